//! Dataset ingestion, deterministic splitting, and the synthetic
//! hard-regions generator.
//!
//! The generator produces a two-class 2D Gaussian mixture in which each
//! class has an easy, well-separated component, plus a *shared* component
//! where both class densities are identical, so p(y|x) = 1/2 there: those
//! samples are hard by construction. The shared component is the designated
//! overlap region; its samples carry a ground-truth hardness flag and get
//! their labels flipped at the requested noise rate.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sgd::mix_seed;
use crate::numerics::Matrix;
use crate::serialize::fmt_f64;

/// Feature matrix plus integer class labels. `hard_flags` is populated by
/// the synthetic generator and carried through splits so experiments can
/// correlate learned weights with ground-truth hardness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    pub feature_names: Option<Vec<String>>,
    pub provenance: String,
    pub hard_flags: Option<Vec<bool>>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} rows",
                labels.len(),
                features.rows()
            )));
        }
        if num_classes == 0 {
            return Err(Error::InvalidArgument("num_classes must be >= 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            feature_names: None,
            provenance: provenance.into(),
            hard_flags: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// New dataset holding the given rows (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let rows: Vec<Vec<f64>> = indices.iter().map(|&i| self.row(i).to_vec()).collect();
        Dataset {
            features: Matrix::from_rows(&rows).expect("subset of a valid matrix"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
            hard_flags: self
                .hard_flags
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Random,
    Sequential,
}

/// Four-way split plan: fractions for the complex-model training set, the
/// simple-model training set, validation, and holdout, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub mode: SplitMode,
    pub fractions: [f64; 4],
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            mode: SplitMode::Random,
            fractions: [0.6, 0.2, 0.05, 0.15],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub d_n: Dataset,
    pub d_s: Dataset,
    pub validation: Dataset,
    pub holdout: Dataset,
}

/// Partition sizes by largest-remainder rounding (ties go to the earlier
/// split), so sizes always sum to m.
fn split_sizes(m: usize, fractions: &[f64; 4]) -> [usize; 4] {
    let mut sizes = [0usize; 4];
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(4);
    let mut assigned = 0usize;
    for (i, &f) in fractions.iter().enumerate() {
        let exact = f * m as f64;
        let floor = exact.floor() as usize;
        sizes[i] = floor;
        assigned += floor;
        remainders.push((i, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for k in 0..m - assigned {
        sizes[remainders[k % 4].0] += 1;
    }
    sizes
}

/// Split into (D_N, D_S, validation, holdout). Random mode shuffles with a
/// seeded ChaCha8; sequential mode slices rows in their original order.
pub fn split(dataset: &Dataset, plan: &SplitPlan) -> Result<Splits> {
    let m = dataset.len();
    if m < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 rows to split, got {m}"
        )));
    }
    let sum: f64 = plan.fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "split fractions sum to {sum}, expected 1"
        )));
    }
    if let Some((i, &f)) = plan
        .fractions
        .iter()
        .enumerate()
        .find(|(_, &f)| f.is_nan() || f <= 0.0)
    {
        return Err(Error::InvalidArgument(format!(
            "split fraction {i} must be positive, got {f}"
        )));
    }
    let sizes = split_sizes(m, &plan.fractions);
    if let Some((i, _)) = sizes.iter().enumerate().find(|(_, &s)| s == 0) {
        return Err(Error::EmptySplit {
            index: i,
            fraction: plan.fractions[i],
            m,
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    if plan.mode == SplitMode::Random {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        order.shuffle(&mut rng);
    }
    let (a, rest) = order.split_at(sizes[0]);
    let (b, rest) = rest.split_at(sizes[1]);
    let (c, d) = rest.split_at(sizes[2]);
    Ok(Splits {
        d_n: dataset.subset(a),
        d_s: dataset.subset(b),
        validation: dataset.subset(c),
        holdout: dataset.subset(d),
    })
}

/// How to locate the label column in a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

/// Row indices (0-based, header excluded) rejected during ingestion.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvReport {
    pub rejected_rows: Vec<usize>,
}

/// Load a numeric CSV. Rows with non-finite feature values are rejected and
/// reported; an unparseable numeric cell or a bad label is an error.
pub fn load_csv(
    path: &Path,
    label_column: &LabelColumn,
    has_header: bool,
) -> Result<(Dataset, CsvReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let mut label_idx: Option<usize> = None;
    let mut feature_names: Option<Vec<String>> = None;
    if has_header {
        let headers = reader.headers()?.clone();
        label_idx = Some(match label_column {
            LabelColumn::Index(i) => *i,
            LabelColumn::Name(name) => headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?,
        });
        let li = label_idx.unwrap();
        if li >= headers.len() {
            return Err(Error::MissingColumn(format!("index {li}")));
        }
        feature_names = Some(
            headers
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != li)
                .map(|(_, h)| h.to_string())
                .collect(),
        );
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut report = CsvReport::default();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let li = match (label_idx, label_column) {
            (Some(i), _) => i,
            (None, LabelColumn::Index(i)) => *i,
            (None, LabelColumn::Name(name)) => {
                return Err(Error::MissingColumn(format!(
                    "'{name}' (file has no header)"
                )))
            }
        };
        if li >= record.len() {
            return Err(Error::MissingColumn(format!("index {li}")));
        }
        let label_raw = &record[li];
        let label: i64 = label_raw.parse().map_err(|_| Error::LabelParse {
            row: row_idx,
            value: label_raw.to_string(),
        })?;
        if label < 0 {
            return Err(Error::LabelParse {
                row: row_idx,
                value: label_raw.to_string(),
            });
        }
        let mut row = Vec::with_capacity(record.len() - 1);
        let mut finite = true;
        for (col, cell) in record.iter().enumerate() {
            if col == li {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| Error::UnparseableNumeric {
                row: row_idx,
                column: col,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                finite = false;
            }
            row.push(v);
        }
        if !finite {
            report.rejected_rows.push(row_idx);
            continue;
        }
        rows.push(row);
        labels.push(label as usize);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let num_classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut dataset = Dataset::new(Matrix::from_rows(&rows)?, labels, num_classes, path.display().to_string())?;
    dataset.feature_names = feature_names;
    Ok((dataset, report))
}

/// Write a dataset as CSV: feature columns then a final `label` column,
/// floats with 17 significant digits. A header is written only when the
/// dataset has feature names.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    if let Some(names) = &dataset.feature_names {
        let mut header: Vec<String> = names.clone();
        header.push("label".to_string());
        writer.write_record(&header)?;
    }
    for i in 0..dataset.len() {
        let mut record: Vec<String> = dataset.row(i).iter().map(|&v| fmt_f64(v)).collect();
        record.push(dataset.label(i).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parameters of the synthetic mixture, exposed so tests and diagnostics can
/// evaluate the class densities independently.
///
/// Each class mixes a dominant component on the main diagonal (so the clean
/// boundary is diagonal, which axis-aligned trees can only staircase) and a
/// smaller satellite straddling that boundary, plus one component *shared by
/// both classes*: the designated hard region, where the label carries almost
/// no information. The shared component sits just off the boundary on the
/// class-1 side, so unweighted fits get dragged toward it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardRegionsMixture {
    /// [class][component] means: component 0 is the major mode, 1 the minor.
    pub easy_mean: [[[f64; 2]; 2]; 2],
    /// Fraction of a class's easy mass sitting in the minor mode.
    pub minor_fraction: f64,
    pub sigma: f64,
    pub shared_mean: [f64; 2],
    pub shared_mass: f64,
}

pub const HARD_REGIONS_MIXTURE: HardRegionsMixture = HardRegionsMixture {
    easy_mean: [
        [[-0.85, -0.85], [1.5, -1.5]],
        [[0.85, 0.85], [-1.5, 1.5]],
    ],
    minor_fraction: 0.22,
    sigma: 0.55,
    shared_mean: [1.2, 0.2],
    shared_mass: 0.2,
};

impl HardRegionsMixture {
    /// Per-class easy-component masses (absolute, within f(x|y)).
    fn easy_masses(&self) -> [f64; 2] {
        let easy = 1.0 - self.shared_mass;
        [easy * (1.0 - self.minor_fraction), easy * self.minor_fraction]
    }

    /// Class-conditional density f(x | y).
    pub fn class_density(&self, class: usize, x: [f64; 2]) -> f64 {
        let masses = self.easy_masses();
        let mut density = self.shared_mass * gauss2(x, self.shared_mean, self.sigma);
        for (component, &mass) in masses.iter().enumerate() {
            density += mass * gauss2(x, self.easy_mean[class][component], self.sigma);
        }
        density
    }

    /// Analytic Bayes error of the mixture under equal class priors.
    ///
    /// The shared component is common to both class densities, so it
    /// contributes exactly half its mass: min(s + a, s + b) = s + min(a, b).
    /// The easy part is approximated by summing the exact two-Gaussian
    /// overlap over the four opposite-class component pairs; the components
    /// are separated by several sigma, so triple-overlap corrections are
    /// negligible next to the grid-check tolerance.
    pub fn bayes_error(&self) -> f64 {
        let masses = self.easy_masses();
        let mut overlap = 0.0;
        for (i, &mass_a) in masses.iter().enumerate() {
            for (j, &mass_b) in masses.iter().enumerate() {
                overlap += gaussian_pair_overlap(
                    self.easy_mean[0][i],
                    mass_a,
                    self.easy_mean[1][j],
                    mass_b,
                    self.sigma,
                );
            }
        }
        0.5 * (self.shared_mass + overlap)
    }
}

/// Integral of min(a * g_a, b * g_b) for two spherical Gaussians with a
/// common sigma, centers distance d apart, and prior masses a and b:
///   a * Phi(-d/(2s) - (s/d) ln(a/b)) + b * Phi(-d/(2s) + (s/d) ln(a/b)).
fn gaussian_pair_overlap(
    mean_a: [f64; 2],
    mass_a: f64,
    mean_b: [f64; 2],
    mass_b: f64,
    sigma: f64,
) -> f64 {
    let dx = mean_b[0] - mean_a[0];
    let dy = mean_b[1] - mean_a[1];
    let d = (dx * dx + dy * dy).sqrt();
    let half = d / (2.0 * sigma);
    let shift = (sigma / d) * (mass_a / mass_b).ln();
    mass_a * normal_cdf(-half - shift) + mass_b * normal_cdf(-half + shift)
}

fn gauss2(x: [f64; 2], mean: [f64; 2], sigma: f64) -> f64 {
    let dx = x[0] - mean[0];
    let dy = x[1] - mean[1];
    let s2 = sigma * sigma;
    (-0.5 * (dx * dx + dy * dy) / s2).exp() / (2.0 * std::f64::consts::PI * s2)
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf approximation
/// (absolute error below 1.5e-7, ample for the analytic-overlap checks).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

const FLIP_STREAM_SALT: u64 = 0x5851_F42D_4C95_7F2D;

/// Generate the synthetic hard-regions dataset with the default mixture.
///
/// Component and pre-flip label assignment are deterministic in `m` alone;
/// positions use one seeded stream and label flips another, so datasets with
/// the same seed share positions across noise rates (flips nest as the rate
/// grows). Class balance is exact before flips (alternating labels).
pub fn synth_hard_regions(m: usize, noise_rate: f64, seed: u64) -> Result<Dataset> {
    synth_hard_regions_with(&HARD_REGIONS_MIXTURE, m, noise_rate, seed)
}

/// [`synth_hard_regions`] with an explicit mixture layout.
pub fn synth_hard_regions_with(
    mix: &HardRegionsMixture,
    m: usize,
    noise_rate: f64,
    seed: u64,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..0.5).contains(&noise_rate) {
        return Err(Error::InvalidArgument(format!(
            "noise rate must lie in [0, 0.5), got {noise_rate}"
        )));
    }
    let n_hard = (mix.shared_mass * m as f64).round() as usize;
    // Integer Bresenham fractions keep component proportions exact.
    let minor_num = (mix.minor_fraction * 100.0).round() as usize;
    let mut pos_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flip_rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, FLIP_STREAM_SALT));

    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    let mut flags = Vec::with_capacity(m);
    let mut hard_count = 0usize;
    let mut easy_count = 0usize;
    let mut class_easy_count = [0usize; 2];
    for i in 0..m {
        // Bresenham-style spreading of the n_hard shared samples over 0..m.
        let is_hard = (i + 1) * n_hard / m > i * n_hard / m;
        let (mean, label) = if is_hard {
            hard_count += 1;
            (mix.shared_mean, (hard_count - 1) % 2)
        } else {
            easy_count += 1;
            let label = (easy_count - 1) % 2;
            let n = class_easy_count[label] + 1;
            class_easy_count[label] = n;
            let is_minor = n * minor_num / 100 > (n - 1) * minor_num / 100;
            (mix.easy_mean[label][usize::from(is_minor)], label)
        };
        let z0: f64 = pos_rng.sample(StandardNormal);
        let z1: f64 = pos_rng.sample(StandardNormal);
        rows.push(vec![mean[0] + mix.sigma * z0, mean[1] + mix.sigma * z1]);
        let mut label = label;
        if is_hard {
            let u: f64 = flip_rng.random_range(0.0..1.0);
            if u < noise_rate {
                label = 1 - label;
            }
        }
        labels.push(label);
        flags.push(is_hard);
    }
    let mut dataset = Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        2,
        format!("synth-hard-regions(m={m},noise={noise_rate},seed={seed})"),
    )?;
    dataset.feature_names = Some(vec!["x0".to_string(), "x1".to_string()]);
    dataset.hard_flags = Some(flags);
    Ok(dataset)
}
