//! Weighted CART: greedy binary splits maximizing weighted Gini impurity
//! decrease.
//!
//! Candidate thresholds are midpoints between consecutive distinct sorted
//! feature values among positive-weight samples. Ties in impurity decrease
//! break toward the lower feature index, then the lower threshold. Class
//! weights for every candidate are summed in ascending sample-index order,
//! so identical partitions always score identically regardless of which
//! feature induced them.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{SimplexVector, PROB_CLAMP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        distribution: SimplexVector,
        weight: f64,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaf_for<'a>(&'a self, x: &[f64]) -> &'a SimplexVector {
        match self {
            TreeNode::Leaf { distribution, .. } => distribution,
            TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
            } => {
                if x[*feature_index] <= *threshold {
                    left.leaf_for(x)
                } else {
                    right.leaf_for(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub root: TreeNode,
    pub num_classes: usize,
    /// Total weighted impurity decrease credited to each feature,
    /// normalized to sum to one. This is one common importance convention,
    /// not the only reasonable one.
    pub feature_importances: Vec<f64>,
}

impl TreeModel {
    pub fn predict_proba(&self, x: &[f64]) -> SimplexVector {
        self.root.leaf_for(x).clone()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        self.root.leaf_for(x).argmax()
    }

    pub fn per_sample_loss(&self, x: &[f64], label: usize) -> f64 {
        -(self.root.leaf_for(x).get(label).max(PROB_CLAMP)).ln()
    }

    /// Indented plain-text rendering for human inspection.
    pub fn render_text(&self, feature_names: Option<&[String]>) -> String {
        let mut out = String::new();
        render_node(&self.root, feature_names, 0, &mut out);
        out
    }
}

fn render_node(node: &TreeNode, names: Option<&[String]>, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match node {
        TreeNode::Leaf {
            distribution,
            weight,
        } => {
            let probs: Vec<String> = distribution
                .probabilities()
                .iter()
                .map(|p| format!("{p:.4}"))
                .collect();
            out.push_str(&format!(
                "{pad}predict class {} p=[{}] weight={weight:.4}\n",
                distribution.argmax(),
                probs.join(", ")
            ));
        }
        TreeNode::Internal {
            feature_index,
            threshold,
            left,
            right,
        } => {
            let name = names
                .and_then(|n| n.get(*feature_index).cloned())
                .unwrap_or_else(|| format!("x{feature_index}"));
            out.push_str(&format!("{pad}if {name} <= {threshold:.6}:\n"));
            render_node(left, names, indent + 1, out);
            out.push_str(&format!("{pad}else:\n"));
            render_node(right, names, indent + 1, out);
        }
    }
}

pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf_weight: Option<f64>,
}

/// Class-weight totals over the given sample indices, summed in ascending
/// index order.
fn class_weights(d: &Dataset, w: &[f64], indices: &[usize], num_classes: usize) -> Vec<f64> {
    let mut cw = vec![0.0; num_classes];
    for &i in indices {
        cw[d.label(i)] += w[i];
    }
    cw
}

/// Weighted Gini impurity times total weight: sum_c w_c * (1 - w_c / W).
/// Scaled by the node weight so parent/child scores subtract directly.
fn gini_times_weight(cw: &[f64]) -> f64 {
    let total: f64 = cw.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let sum_sq: f64 = cw.iter().map(|c| c * c).sum();
    total - sum_sq / total
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

fn leaf(cw: &[f64]) -> TreeNode {
    let total: f64 = cw.iter().sum();
    let probs: Vec<f64> = cw.iter().map(|c| (c / total).clamp(0.0, 1.0)).collect();
    TreeNode::Leaf {
        distribution: SimplexVector::new(probs).expect("normalized class weights"),
        weight: total,
    }
}

fn build_node(
    d: &Dataset,
    w: &[f64],
    indices: &[usize],
    depth: usize,
    params: &TreeParams,
    min_leaf: f64,
    importances: &mut [f64],
) -> TreeNode {
    let cw = class_weights(d, w, indices, d.num_classes());
    let pure = cw.iter().filter(|&&c| c > 0.0).count() <= 1;
    if depth >= params.max_depth || pure || indices.len() < 2 {
        return leaf(&cw);
    }
    let parent_score = gini_times_weight(&cw);
    let mut best: Option<BestSplit> = None;

    for feature in 0..d.dim() {
        // Distinct sorted values among this node's samples.
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
            let left_cw = class_weights(d, w, &left, d.num_classes());
            let left_total: f64 = left_cw.iter().sum();
            let right_cw: Vec<f64> = {
                let right: Vec<usize> = indices
                    .iter()
                    .copied()
                    .filter(|&i| d.row(i)[feature] > threshold)
                    .collect();
                class_weights(d, w, &right, d.num_classes())
            };
            let right_total: f64 = right_cw.iter().sum();
            if left_total < min_leaf || right_total < min_leaf {
                continue;
            }
            let decrease =
                parent_score - gini_times_weight(&left_cw) - gini_times_weight(&right_cw);
            // Strictly-greater acceptance keeps the earliest (feature,
            // threshold) on ties.
            if decrease > best.as_ref().map_or(0.0, |b| b.decrease) {
                best = Some(BestSplit {
                    feature,
                    threshold,
                    decrease,
                });
            }
        }
    }

    let Some(split) = best else {
        return leaf(&cw);
    };
    importances[split.feature] += split.decrease;
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .copied()
        .partition(|&i| d.row(i)[split.feature] <= split.threshold);
    TreeNode::Internal {
        feature_index: split.feature,
        threshold: split.threshold,
        left: Box::new(build_node(
            d, w, &left_idx, depth + 1, params, min_leaf, importances,
        )),
        right: Box::new(build_node(
            d, w, &right_idx, depth + 1, params, min_leaf, importances,
        )),
    }
}

/// Train a weighted CART classifier. Zero-weight samples are fully inert:
/// they join no node and contribute no candidate thresholds.
pub fn train_weighted_tree(d: &Dataset, w: &[f64], params: &TreeParams) -> Result<TreeModel> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if w.len() != d.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} rows",
            w.len(),
            d.len()
        )));
    }
    if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidArgument(
            "weights must be finite and non-negative".into(),
        ));
    }
    if params.max_depth == 0 {
        return Err(Error::InvalidSpec("max_depth must be >= 1".into()));
    }
    let active: Vec<usize> = (0..d.len()).filter(|&i| w[i] > 0.0).collect();
    let total: f64 = active.iter().map(|&i| w[i]).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let min_leaf = match params.min_leaf_weight {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            return Err(Error::InvalidSpec(format!(
                "min_leaf_weight must be positive, got {v}"
            )))
        }
        None => 0.01 * total,
    };
    let mut importances = vec![0.0; d.dim()];
    let root = build_node(d, w, &active, 0, params, min_leaf, &mut importances);
    let sum: f64 = importances.iter().sum();
    if sum > 0.0 {
        for v in &mut importances {
            *v /= sum;
        }
    }
    Ok(TreeModel {
        root,
        num_classes: d.num_classes(),
        feature_importances: importances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn dataset_1d(xs: &[f64], labels: &[usize]) -> Dataset {
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            labels.to_vec(),
            2,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn unique_optimal_split_lands_between_one_and_two() {
        let d = dataset_1d(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]);
        let model = train_weighted_tree(
            &d,
            &[1.0, 1.0, 1.0, 1.0],
            &TreeParams {
                max_depth: 1,
                min_leaf_weight: None,
            },
        )
        .unwrap();
        match &model.root {
            TreeNode::Internal {
                threshold,
                left,
                right,
                ..
            } => {
                assert!(*threshold > 1.0 && *threshold < 2.0);
                for child in [left, right] {
                    match child.as_ref() {
                        TreeNode::Leaf { distribution, .. } => {
                            let top = distribution.probabilities()[distribution.argmax()];
                            assert_eq!(top, 1.0, "both leaves should be pure");
                        }
                        _ => panic!("depth-1 children must be leaves"),
                    }
                }
            }
            _ => panic!("root should split"),
        }
        assert!(model.predict(&[0.5]) == 0 && model.predict(&[2.5]) == 1);
    }

    #[test]
    fn zero_weight_half_collapses_to_pure_leaf() {
        // Positive weight only on class-0 samples: the node is pure, no
        // split happens, and class 0 is predicted everywhere.
        let d = dataset_1d(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]);
        let model = train_weighted_tree(
            &d,
            &[1.0, 1.0, 0.0, 0.0],
            &TreeParams {
                max_depth: 3,
                min_leaf_weight: None,
            },
        )
        .unwrap();
        assert!(matches!(model.root, TreeNode::Leaf { .. }));
        for x in [-1.0, 0.5, 2.5, 10.0] {
            assert_eq!(model.predict(&[x]), 0);
        }
    }

    #[test]
    fn all_zero_weights_are_degenerate() {
        let d = dataset_1d(&[0.0, 1.0], &[0, 1]);
        let err = train_weighted_tree(
            &d,
            &[0.0, 0.0],
            &TreeParams {
                max_depth: 1,
                min_leaf_weight: None,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateWeights));
    }

    #[test]
    fn power_of_two_weight_scaling_preserves_structure() {
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.711).sin(), (i as f64 * 1.37).cos()])
            .collect();
        let labels: Vec<usize> = (0..12).map(|i| (i % 3 == 0) as usize).collect();
        let d = Dataset::new(Matrix::from_rows(&xs).unwrap(), labels, 2, "t").unwrap();
        let w: Vec<f64> = (0..12).map(|i| 0.25 + (i % 5) as f64 * 0.5).collect();
        let params = TreeParams {
            max_depth: 3,
            min_leaf_weight: Some(0.1),
        };
        let base = train_weighted_tree(&d, &w, &params).unwrap();
        for scale in [0.5, 2.0, 4.0] {
            let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let other = train_weighted_tree(
                &d,
                &scaled,
                &TreeParams {
                    max_depth: 3,
                    min_leaf_weight: Some(0.1 * scale),
                },
            )
            .unwrap();
            assert_trees_equal(&base.root, &other.root);
        }
    }

    fn assert_trees_equal(a: &TreeNode, b: &TreeNode) {
        match (a, b) {
            (
                TreeNode::Leaf {
                    distribution: da, ..
                },
                TreeNode::Leaf {
                    distribution: db, ..
                },
            ) => {
                for (x, y) in da.probabilities().iter().zip(db.probabilities()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
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
                assert_eq!(fa, fb);
                assert_eq!(ta.to_bits(), tb.to_bits());
                assert_trees_equal(la, lb);
                assert_trees_equal(ra, rb);
            }
            _ => panic!("tree structures differ"),
        }
    }

    #[test]
    fn duplicated_zero_weight_sample_is_inert() {
        let xs = vec![
            vec![0.1, 0.9],
            vec![0.4, 0.2],
            vec![0.8, 0.5],
            vec![0.9, 0.1],
        ];
        let labels = vec![0, 0, 1, 1];
        let d = Dataset::new(Matrix::from_rows(&xs).unwrap(), labels.clone(), 2, "t").unwrap();
        let w = vec![1.0, 1.0, 0.0, 1.0];
        let params = TreeParams {
            max_depth: 2,
            min_leaf_weight: Some(0.05),
        };
        let base = train_weighted_tree(&d, &w, &params).unwrap();

        let mut xs2 = xs.clone();
        xs2.push(xs[2].clone()); // duplicate the zero-weight sample
        let mut labels2 = labels.clone();
        labels2.push(labels[2]);
        let d2 = Dataset::new(Matrix::from_rows(&xs2).unwrap(), labels2, 2, "t").unwrap();
        let w2 = vec![1.0, 1.0, 0.0, 1.0, 0.0];
        let dup = train_weighted_tree(&d2, &w2, &params).unwrap();
        assert_trees_equal(&base.root, &dup.root);
    }

    #[test]
    fn depth_limit_is_respected() {
        let xs: Vec<Vec<f64>> = (0..32).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let labels: Vec<usize> = (0..32).map(|i| (i * 5 % 3 == 0) as usize).collect();
        let d = Dataset::new(Matrix::from_rows(&xs).unwrap(), labels, 2, "t").unwrap();
        let w = vec![1.0; 32];
        for depth in 1..=4 {
            let model = train_weighted_tree(
                &d,
                &w,
                &TreeParams {
                    max_depth: depth,
                    min_leaf_weight: Some(0.5),
                },
            )
            .unwrap();
            assert!(model.root.depth() <= depth);
        }
    }

    #[test]
    fn importances_are_normalized_and_text_renders() {
        let xs: Vec<Vec<f64>> = (0..16)
            .map(|i| vec![i as f64 / 4.0, ((i * 3) % 7) as f64])
            .collect();
        let labels: Vec<usize> = (0..16).map(|i| (i >= 8) as usize).collect();
        let d = Dataset::new(Matrix::from_rows(&xs).unwrap(), labels, 2, "t").unwrap();
        let model = train_weighted_tree(
            &d,
            &[1.0; 16],
            &TreeParams {
                max_depth: 2,
                min_leaf_weight: Some(0.2),
            },
        )
        .unwrap();
        let total: f64 = model.feature_importances.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let text = model.render_text(None);
        assert!(text.contains("if x0 <="));
        assert!(text.contains("predict class"));
    }
}
