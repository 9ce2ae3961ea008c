//! Executable verification of the mathematical claims underpinning the
//! weighting scheme, by brute-force enumeration over discrete
//! distributions: the ratio-sum identity and its grid verifier, the
//! total-variation / Bayes-error identity, and the mean-one constraint
//! check on importance weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strictly interior discrete distribution: every mass positive, summing
/// to one within 1e-12. Strict interiority matters because the checks
/// divide by coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscreteDistribution {
    masses: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if masses.iter().any(|&m| m.is_nan() || m <= 0.0 || !m.is_finite()) {
            return Err(Error::InvalidArgument(
                "all masses must be strictly positive".into(),
            ));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "masses sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(DiscreteDistribution { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn dim(&self) -> usize {
        self.masses.len()
    }

    /// Random interior distribution: exponential draws, normalized
    /// (Dirichlet(1,...,1) up to floating point).
    pub fn random_interior(n: usize, rng: &mut impl Rng) -> Self {
        loop {
            let mut masses: Vec<f64> = (0..n)
                .map(|_| -(rng.random_range(1e-12..1.0f64)).ln())
                .collect();
            let sum: f64 = masses.iter().sum();
            for m in &mut masses {
                *m /= sum;
            }
            if let Ok(d) = DiscreteDistribution::new(masses) {
                return d;
            }
        }
    }

    fn linf_distance(&self, other: &[f64]) -> f64 {
        self.masses
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_dims(a: &DiscreteDistribution, b: &DiscreteDistribution) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "distributions of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// sum_i p_i * r_i / q_i. Equals 1 when q = p or q = r (cancellation).
pub fn ratio_sum(
    p: &DiscreteDistribution,
    q: &DiscreteDistribution,
    r: &DiscreteDistribution,
) -> Result<f64> {
    check_dims(p, q)?;
    check_dims(p, r)?;
    Ok(p.masses
        .iter()
        .zip(&q.masses)
        .zip(&r.masses)
        .map(|((pi, qi), ri)| pi * ri / qi)
        .sum())
}

/// One grid point whose ratio sum came within tolerance of 1 but which sits
/// near neither reference distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridViolation {
    pub q: Vec<f64>,
    pub ratio_sum: f64,
}

/// Outcome of enumerating q over the interior simplex grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCheckReport {
    pub dimension: usize,
    pub grid_resolution: usize,
    pub tolerance: f64,
    pub neighborhood_radius: f64,
    pub points_checked: usize,
    /// Grid points with |ratio_sum - 1| < tolerance, split by which
    /// reference they sit next to.
    pub near_solutions: usize,
    pub near_p: usize,
    pub near_r: usize,
    pub violations: Vec<GridViolation>,
}

impl GridCheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Default near-solution tolerance for grid checks.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Enumerate q over the interior simplex grid (n in {2, 3}) and verify the
/// ratio sum comes within `tolerance` of 1 only in an L-infinity
/// neighborhood of q = p or q = r. The neighborhood radius is
/// 2/grid_resolution so discretization alone can never flag a violation.
pub fn lemma_grid_verify_with(
    p: &DiscreteDistribution,
    r: &DiscreteDistribution,
    grid_resolution: usize,
    tolerance: f64,
) -> Result<GridCheckReport> {
    check_dims(p, r)?;
    let n = p.dim();
    if n != 2 && n != 3 {
        return Err(Error::InvalidArgument(format!(
            "grid verification supports dimensions 2 and 3, got {n}"
        )));
    }
    if grid_resolution < 100 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be >= 100, got {grid_resolution}"
        )));
    }
    let radius = 2.0 / grid_resolution as f64;
    let mut report = GridCheckReport {
        dimension: n,
        grid_resolution,
        tolerance,
        neighborhood_radius: radius,
        points_checked: 0,
        near_solutions: 0,
        near_p: 0,
        near_r: 0,
        violations: Vec::new(),
    };
    let res = grid_resolution as f64;
    let mut visit = |q: &[f64]| {
        report.points_checked += 1;
        let s: f64 = p
            .masses
            .iter()
            .zip(q)
            .zip(&r.masses)
            .map(|((pi, qi), ri)| pi * ri / qi)
            .sum();
        if (s - 1.0).abs() < tolerance {
            report.near_solutions += 1;
            let near_p = p.linf_distance(q) <= radius;
            let near_r = r.linf_distance(q) <= radius;
            if near_p {
                report.near_p += 1;
            }
            if near_r {
                report.near_r += 1;
            }
            if !near_p && !near_r && report.violations.len() < 32 {
                report.violations.push(GridViolation {
                    q: q.to_vec(),
                    ratio_sum: s,
                });
            }
        }
    };
    match n {
        2 => {
            for i in 1..grid_resolution {
                let q = [i as f64 / res, (grid_resolution - i) as f64 / res];
                visit(&q);
            }
        }
        3 => {
            for i in 1..grid_resolution {
                for j in 1..grid_resolution - i {
                    let k = grid_resolution - i - j;
                    let q = [i as f64 / res, j as f64 / res, k as f64 / res];
                    visit(&q);
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(report)
}

/// [`lemma_grid_verify_with`] at the default tolerance of 1e-9.
pub fn lemma_grid_verify(
    p: &DiscreteDistribution,
    r: &DiscreteDistribution,
    grid_resolution: usize,
) -> Result<GridCheckReport> {
    lemma_grid_verify_with(p, r, grid_resolution, GRID_TOLERANCE)
}

/// Total variation distance: half the L1 distance.
pub fn tv_distance(p0: &DiscreteDistribution, p1: &DiscreteDistribution) -> Result<f64> {
    check_dims(p0, p1)?;
    Ok(0.5
        * p0.masses
            .iter()
            .zip(&p1.masses)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Bayes error of the optimal classifier on a uniform two-class mixture,
/// by direct enumeration of the optimal decision per atom:
/// sum_i (1/2) min(p0_i, p1_i).
pub fn bayes_error_discrete(
    p0: &DiscreteDistribution,
    p1: &DiscreteDistribution,
) -> Result<f64> {
    check_dims(p0, p1)?;
    Ok(p0
        .masses
        .iter()
        .zip(&p1.masses)
        .map(|(a, b)| 0.5 * a.min(*b))
        .sum())
}

/// Result of checking the mean-one constraint on candidate importance
/// weights w(x) = P(x) / P_M'(x) over a grid of candidate models P_M'.
///
/// Constraint satisfiers should populate exactly two families: candidates
/// near P_M (where the weights are the true ratio P/P_M) and candidates
/// near P itself (where the weights are identically 1). Both families are
/// reported; the second is the degenerate solution the supporting identity
/// also admits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintCheckReport {
    pub grid: GridCheckReport,
    /// Satisfiers in the neighborhood of P_M: weights equal P/P_M there.
    pub ratio_family: usize,
    /// Satisfiers in the neighborhood of P: weights identically one.
    pub unit_family: usize,
}

impl ConstraintCheckReport {
    pub fn passed(&self) -> bool {
        self.grid.passed()
    }
}

/// For each grid candidate P_M', compute E_{P_M}[P / P_M'] and verify the
/// candidates satisfying the constraint within tolerance lie near P_M or
/// near P. This is the ratio-sum grid check with p := P_M and r := P.
pub fn theorem1_check(
    p: &DiscreteDistribution,
    p_m: &DiscreteDistribution,
    grid_resolution: usize,
) -> Result<ConstraintCheckReport> {
    let grid = lemma_grid_verify_with(p_m, p, grid_resolution, GRID_TOLERANCE)?;
    Ok(ConstraintCheckReport {
        // near_p counts candidates near P_M (w = P/P_M), near_r those near P.
        ratio_family: grid.near_p,
        unit_family: grid.near_r,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dist(masses: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(masses.to_vec()).unwrap()
    }

    #[test]
    fn construction_enforces_interior_and_normalization() {
        assert!(DiscreteDistribution::new(vec![0.5, 0.5]).is_ok());
        assert!(DiscreteDistribution::new(vec![0.0, 1.0]).is_err());
        assert!(DiscreteDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(DiscreteDistribution::new(vec![]).is_err());
    }

    #[test]
    fn ratio_sum_cancels_when_q_matches_either_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2usize, 3, 5, 8] {
            let p = DiscreteDistribution::random_interior(n, &mut rng);
            let r = DiscreteDistribution::random_interior(n, &mut rng);
            let with_q_p = ratio_sum(&p, &p, &r).unwrap();
            let with_q_r = ratio_sum(&p, &r, &r).unwrap();
            assert!((with_q_p - 1.0).abs() < 1e-14, "q=p gave {with_q_p}");
            assert!((with_q_r - 1.0).abs() < 1e-14, "q=r gave {with_q_r}");
        }
    }

    #[test]
    fn ratio_sum_hand_example() {
        let p = dist(&[0.5, 0.5]);
        let r = dist(&[0.5, 0.5]);
        let q = dist(&[0.25, 0.75]);
        let s = ratio_sum(&p, &q, &r).unwrap();
        assert!((s - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ratio_sum_rejects_dimension_mismatch() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.2, 0.3, 0.5]);
        assert!(ratio_sum(&p, &q, &p).is_err());
    }

    #[test]
    fn grid_verify_two_point_case_is_clean() {
        let p = dist(&[0.3, 0.7]);
        let r = dist(&[0.6, 0.4]);
        let report = lemma_grid_verify(&p, &r, 10_000).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
        assert_eq!(report.points_checked, 9_999);
    }

    #[test]
    fn grid_verify_degenerate_p_equals_r() {
        let p = dist(&[0.45, 0.55]);
        let report = lemma_grid_verify(&p, &p, 10_000).unwrap();
        assert!(report.passed());
        // The two solution neighborhoods coincide.
        assert_eq!(report.near_p, report.near_r);
    }

    #[test]
    fn grid_verify_three_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = DiscreteDistribution::random_interior(3, &mut rng);
        let r = DiscreteDistribution::random_interior(3, &mut rng);
        let report = lemma_grid_verify(&p, &r, 200).unwrap();
        assert!(report.passed(), "violations: {:?}", report.violations);
    }

    #[test]
    fn grid_verify_validates_inputs() {
        let p = dist(&[0.5, 0.5]);
        assert!(lemma_grid_verify(&p, &p, 50).is_err());
        let q4 = dist(&[0.25, 0.25, 0.25, 0.25]);
        assert!(lemma_grid_verify(&q4, &q4, 1000).is_err());
    }

    #[test]
    fn tv_distance_examples() {
        let p = dist(&[0.5, 0.5]);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        let q = dist(&[0.25, 0.75]);
        assert!((tv_distance(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        // Near-disjoint supports approach distance 1.
        let eps = 1e-9;
        let a = dist(&[1.0 - eps, eps]);
        let b = dist(&[eps, 1.0 - eps]);
        assert!(tv_distance(&a, &b).unwrap() > 1.0 - 1e-8);
    }

    #[test]
    fn bayes_error_examples() {
        let p = dist(&[0.3, 0.7]);
        assert_eq!(bayes_error_discrete(&p, &p).unwrap(), 0.5);
        let eps = 1e-12;
        let a = dist(&[1.0 - eps, eps]);
        let b = dist(&[eps, 1.0 - eps]);
        assert!(bayes_error_discrete(&a, &b).unwrap() < 1e-11);
    }

    #[test]
    fn bayes_error_equals_half_minus_half_tv() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..200 {
            let n = rng.random_range(2..=10);
            let p0 = DiscreteDistribution::random_interior(n, &mut rng);
            let p1 = DiscreteDistribution::random_interior(n, &mut rng);
            let bayes = bayes_error_discrete(&p0, &p1).unwrap();
            let tv = tv_distance(&p0, &p1).unwrap();
            assert!(
                (bayes - (0.5 - 0.5 * tv)).abs() < 1e-12,
                "n={n}: bayes {bayes}, tv {tv}"
            );
        }
    }

    #[test]
    fn constraint_check_finds_both_solution_families() {
        let p = dist(&[0.3, 0.7]);
        let p_m = dist(&[0.6, 0.4]);
        let report = theorem1_check(&p, &p_m, 10_000).unwrap();
        assert!(report.passed());
        assert!(report.ratio_family > 0, "no satisfiers near P_M");
        assert!(report.unit_family > 0, "no satisfiers near P");
    }

    #[test]
    fn constraint_check_degenerate_families_coincide() {
        let p = dist(&[0.4, 0.6]);
        let report = theorem1_check(&p, &p, 10_000).unwrap();
        assert!(report.passed());
        assert_eq!(report.ratio_family, report.unit_family);
    }

    #[test]
    fn far_candidates_clearly_violate_the_constraint() {
        let p = dist(&[0.3, 0.7]);
        let p_m = dist(&[0.6, 0.4]);
        // A candidate far from both P and P_M.
        let q = dist(&[0.9, 0.1]);
        let e = ratio_sum(&p_m, &q, &p).unwrap();
        assert!((e - 1.0).abs() > 1e-3, "E[w] = {e}");
    }
}
