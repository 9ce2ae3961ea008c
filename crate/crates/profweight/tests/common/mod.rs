//! Shared helpers for the integration suites: an independent exhaustive
//! CART oracle and small dataset builders.

use profweight::data::Dataset;
use profweight::numerics::{Matrix, SimplexVector};
use profweight::simple::TreeNode;

/// Independent exhaustive-search CART oracle. At every node it scores every
/// (feature, midpoint-threshold) candidate by recomputing weighted class
/// totals from scratch in ascending sample-index order, keeps the first
/// strictly-best split (features ascending, thresholds ascending), and
/// recurses. Mirrors the documented tie-break of the production builder
/// while sharing none of its code.
pub fn oracle_tree(
    d: &Dataset,
    w: &[f64],
    indices: &[usize],
    depth: usize,
    max_depth: usize,
    min_leaf: f64,
) -> TreeNode {
    let counts = index_order_class_weights(d, w, indices);
    let total: f64 = counts.iter().sum();
    let live_classes = counts.iter().filter(|&&c| c > 0.0).count();
    if depth >= max_depth || live_classes <= 1 || indices.len() < 2 {
        return oracle_leaf(&counts, total);
    }

    let mut best: Option<(usize, f64, f64)> = None; // (feature, threshold, decrease)
    let parent = weighted_gini_mass(&counts);
    for feature in 0..d.dim() {
        let mut values: Vec<f64> = indices.iter().map(|&i| d.row(i)[feature]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = (pair[0] + pair[1]) / 2.0;
            let left: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| d.row(i)[feature] <= threshold)
                .collect();
            let right: Vec<usize> = indices
                .iter()
                .copied()
                .filter(|&i| d.row(i)[feature] > threshold)
                .collect();
            let lc = index_order_class_weights(d, w, &left);
            let rc = index_order_class_weights(d, w, &right);
            let lt: f64 = lc.iter().sum();
            let rt: f64 = rc.iter().sum();
            if lt < min_leaf || rt < min_leaf {
                continue;
            }
            let decrease = parent - weighted_gini_mass(&lc) - weighted_gini_mass(&rc);
            if decrease > best.map_or(0.0, |(_, _, b)| b) {
                best = Some((feature, threshold, decrease));
            }
        }
    }

    let Some((feature, threshold, _)) = best else {
        return oracle_leaf(&counts, total);
    };
    let left: Vec<usize> = indices
        .iter()
        .copied()
        .filter(|&i| d.row(i)[feature] <= threshold)
        .collect();
    let right: Vec<usize> = indices
        .iter()
        .copied()
        .filter(|&i| d.row(i)[feature] > threshold)
        .collect();
    TreeNode::Internal {
        feature_index: feature,
        threshold,
        left: Box::new(oracle_tree(d, w, &left, depth + 1, max_depth, min_leaf)),
        right: Box::new(oracle_tree(d, w, &right, depth + 1, max_depth, min_leaf)),
    }
}

fn index_order_class_weights(d: &Dataset, w: &[f64], indices: &[usize]) -> Vec<f64> {
    let mut counts = vec![0.0; d.num_classes()];
    for &i in indices {
        counts[d.label(i)] += w[i];
    }
    counts
}

fn weighted_gini_mass(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    total - counts.iter().map(|c| c * c).sum::<f64>() / total
}

fn oracle_leaf(counts: &[f64], total: f64) -> TreeNode {
    let probs: Vec<f64> = counts.iter().map(|c| (c / total).clamp(0.0, 1.0)).collect();
    TreeNode::Leaf {
        distribution: SimplexVector::new(probs).expect("normalized counts"),
        weight: total,
    }
}

/// Structural equality with bitwise thresholds and leaf distributions.
pub fn trees_identical(a: &TreeNode, b: &TreeNode) -> bool {
    match (a, b) {
        (
            TreeNode::Leaf {
                distribution: da, ..
            },
            TreeNode::Leaf {
                distribution: db, ..
            },
        ) => da
            .probabilities()
            .iter()
            .zip(db.probabilities())
            .all(|(x, y)| x.to_bits() == y.to_bits()),
        (
            TreeNode::Internal {
                feature_index: fa,
                threshold: ta,
                left: la,
                right: ra,
            },
            TreeNode::Internal {
                feature_index: fb,
                threshold: tb,
                left: lb,
                right: rb,
            },
        ) => {
            fa == fb
                && ta.to_bits() == tb.to_bits()
                && trees_identical(la, lb)
                && trees_identical(ra, rb)
        }
        _ => false,
    }
}

/// Random small classification dataset on a coarse value grid (so duplicate
/// feature values and threshold ties actually occur).
pub fn random_small_dataset(
    rng: &mut impl rand::Rng,
    m: usize,
    dim: usize,
    num_classes: usize,
) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..dim)
                .map(|_| (rng.random_range(-10i32..=10) as f64) / 10.0)
                .collect()
        })
        .collect();
    let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..num_classes)).collect();
    Dataset::new(
        Matrix::from_rows(&rows).unwrap(),
        labels,
        num_classes,
        "random-small",
    )
    .unwrap()
}
