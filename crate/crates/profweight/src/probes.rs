//! Linear probes on frozen intermediate representations, and the per-sample
//! confidence profiles they induce.
//!
//! A probe is an affine map plus softmax trained on one unit's flattened
//! representation. No gradient ever reaches the complex model: probe
//! training asserts the model's parameter hash is unchanged. The model's own
//! softmax head doubles as the final probe via [`Probe::output_head`], an
//! identity map over the logits unit, which makes last-layer confidence
//! weighting an exact single-probe special case of profile weighting.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{LayeredModel, LOGITS_UNIT};
use crate::numerics::sgd::mix_seed;
use crate::numerics::{sgd_train, softmax, Matrix, NetObjective, NetShape, SgdConfig, SimplexVector};
use crate::serialize;

/// Affine-plus-softmax classifier over one unit's representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub unit_name: String,
    weights: Matrix,
    bias: Vec<f64>,
    /// Misclassification rate on the simple-model training set, filled in by
    /// [`probe_error`]. Never computed on the complex model's training set.
    pub error_on_ds: Option<f64>,
}

impl Probe {
    pub fn new(unit_name: impl Into<String>, weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if weights.rows() != bias.len() {
            return Err(Error::DimensionMismatch(format!(
                "probe has {} weight rows but {} bias entries",
                weights.rows(),
                bias.len()
            )));
        }
        Ok(Probe {
            unit_name: unit_name.into(),
            weights,
            bias,
            error_on_ds: None,
        })
    }

    /// The model's own softmax head expressed as a probe: an identity affine
    /// over the logits unit. Its confidence scores equal
    /// `predict_proba(model, x)` bit-for-bit.
    pub fn output_head(model: &LayeredModel) -> Probe {
        let k = model.num_classes();
        Probe {
            unit_name: LOGITS_UNIT.to_string(),
            weights: Matrix::identity(k),
            bias: vec![0.0; k],
            error_on_ds: None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn rep_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// softmax(W r + b) over a unit representation.
    pub fn predict_proba(&self, representation: &[f64]) -> Result<SimplexVector> {
        let mut z = self.weights.matvec(representation)?;
        for (zi, b) in z.iter_mut().zip(&self.bias) {
            *zi += b;
        }
        softmax(&z)
    }

    /// Confidence of the probe on a dataset row, for that row's true label.
    pub fn confidence(&self, model: &LayeredModel, d: &Dataset, i: usize) -> Result<f64> {
        let rep = model.representation(&self.unit_name, d.row(i))?;
        Ok(self.predict_proba(&rep)?.get(d.label(i)))
    }

    /// Misclassification rate of argmax predictions on a dataset (pure;
    /// does not store the result). Ties go to the lowest class index.
    /// Computed as 1 - accuracy so it agrees exactly with any
    /// accuracy-first path.
    pub fn error_on(&self, model: &LayeredModel, d: &Dataset) -> Result<f64> {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut correct = 0usize;
        for i in 0..d.len() {
            let rep = model.representation(&self.unit_name, d.row(i))?;
            if self.predict_proba(&rep)?.argmax() == d.label(i) {
                correct += 1;
            }
        }
        Ok(1.0 - correct as f64 / d.len() as f64)
    }
}

/// Train one probe per unit on D_N representations, minimizing
/// cross-entropy against the D_N labels.
///
/// Unit `i` trains with seed `mix_seed(cfg.seed, i)` so the whole set
/// replays from one config. The model must already be frozen, and its
/// parameter hash is checked before and after.
pub fn train_probes(
    model: &LayeredModel,
    unit_names: &[String],
    d_n: &Dataset,
    cfg: &SgdConfig,
) -> Result<Vec<Probe>> {
    if !model.is_frozen() {
        return Err(Error::NotFrozen("train_probes"));
    }
    if d_n.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hash_before = model.param_hash();
    let mut probes = Vec::with_capacity(unit_names.len());
    for (i, unit) in unit_names.iter().enumerate() {
        let reps = model.representation_matrix(unit, d_n)?;
        let shape = NetShape::linear(reps.cols(), model.num_classes());
        let weights = vec![1.0; d_n.len()];
        let objective = NetObjective {
            shape: &shape,
            features: &reps,
            labels: d_n.labels(),
            weights: &weights,
            l2: cfg.l2_penalty,
        };
        let unit_cfg = SgdConfig {
            seed: mix_seed(cfg.seed, i as u64),
            ..cfg.clone()
        };
        let init = shape.init_params(unit_cfg.seed);
        let indices: Vec<usize> = (0..d_n.len()).collect();
        let run = sgd_train(&objective, &init, &unit_cfg, &indices)?;
        let k = model.num_classes();
        let rep_dim = reps.cols();
        let weights = Matrix::from_vec(k, rep_dim, run.params[..k * rep_dim].to_vec())?;
        let bias = run.params[k * rep_dim..].to_vec();
        probes.push(Probe::new(unit.clone(), weights, bias)?);
    }
    if model.param_hash() != hash_before {
        return Err(Error::FrozenParamsChanged("train_probes"));
    }
    Ok(probes)
}

/// Compute the probe's misclassification rate on `d` and store it as the
/// probe's recorded error.
pub fn probe_error(probe: &mut Probe, model: &LayeredModel, d: &Dataset) -> Result<f64> {
    let error = probe.error_on(model, d)?;
    probe.error_on_ds = Some(error);
    Ok(error)
}

/// Per-sample true-label confidences across a selected set of probes.
/// Column order follows `unit_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceProfile {
    pub unit_names: Vec<String>,
    pub scores: Matrix,
}

impl ConfidenceProfile {
    pub fn num_samples(&self) -> usize {
        self.scores.rows()
    }

    pub fn num_units(&self) -> usize {
        self.scores.cols()
    }
}

/// Evaluate the selected probes on every row of D_S, collecting the
/// confidence score of each row's true label. Pure with respect to the
/// model and the probes.
pub fn build_profile(
    model: &LayeredModel,
    probes: &[Probe],
    selected: &[String],
    d_s: &Dataset,
) -> Result<ConfidenceProfile> {
    if d_s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut scores = Matrix::zeros(d_s.len(), selected.len());
    for (col, unit) in selected.iter().enumerate() {
        let probe = probes
            .iter()
            .find(|p| &p.unit_name == unit)
            .ok_or_else(|| Error::UnknownUnit(unit.clone()))?;
        for i in 0..d_s.len() {
            scores.set(i, col, probe.confidence(model, d_s, i)?);
        }
    }
    Ok(ConfidenceProfile {
        unit_names: selected.to_vec(),
        scores,
    })
}

const PROBE_SET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ProbeBlock {
    unit_name: String,
    rep_dim: usize,
    num_classes: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    error_on_ds: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbeSetDocument {
    format_version: u32,
    kind: String,
    probes: Vec<ProbeBlock>,
}

pub fn probes_to_json(probes: &[Probe]) -> Result<String> {
    let doc = ProbeSetDocument {
        format_version: PROBE_SET_FORMAT_VERSION,
        kind: "probe-set".to_string(),
        probes: probes
            .iter()
            .map(|p| ProbeBlock {
                unit_name: p.unit_name.clone(),
                rep_dim: p.rep_dim(),
                num_classes: p.num_classes(),
                weights: p.weights.data().to_vec(),
                bias: p.bias.clone(),
                error_on_ds: p.error_on_ds,
            })
            .collect(),
    };
    serialize::to_json_string(&doc)
}

pub fn probes_from_json(text: &str) -> Result<Vec<Probe>> {
    let doc: ProbeSetDocument = serialize::from_json_str(text)?;
    probes_from_doc(doc)
}

fn probes_from_doc(doc: ProbeSetDocument) -> Result<Vec<Probe>> {
    if doc.format_version != PROBE_SET_FORMAT_VERSION {
        return Err(Error::InvalidArgument(format!(
            "unsupported probe-set format version {}",
            doc.format_version
        )));
    }
    doc.probes
        .into_iter()
        .map(|b| {
            let weights = Matrix::from_vec(b.num_classes, b.rep_dim, b.weights)?;
            let mut probe = Probe::new(b.unit_name, weights, b.bias)?;
            probe.error_on_ds = b.error_on_ds;
            Ok(probe)
        })
        .collect()
}

pub fn save_probes(probes: &[Probe], path: &std::path::Path) -> Result<()> {
    std::fs::write(path, probes_to_json(probes)? + "\n")?;
    Ok(())
}

pub fn load_probes(path: &std::path::Path) -> Result<Vec<Probe>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact {
                path: path.display().to_string(),
                producer: "profweight train-probes".to_string(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    probes_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_hard_regions;
    use crate::model::LayerSpec;

    fn cfg(epochs: usize, seed: u64) -> SgdConfig {
        SgdConfig {
            learning_rate: 0.1,
            batch_size: 16,
            epochs,
            l2_penalty: 1e-4,
            momentum: 0.9,
            seed,
        }
    }

    fn blob_data(m: usize, seed: u64) -> Dataset {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..m {
            let label = i % 2;
            let cx = if label == 0 { -1.5 } else { 1.5 };
            rows.push(vec![
                cx + 0.45 * rng.random_range(-1.0..1.0),
                0.45 * rng.random_range(-1.0..1.0),
            ]);
            labels.push(label);
        }
        Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, 2, "blobs").unwrap()
    }

    fn trained_model(seed: u64) -> (LayeredModel, Dataset, Dataset) {
        let easy_data = blob_data(246, seed);
        let half = easy_data.len() / 2;
        let d_n = easy_data.subset(&(0..half).collect::<Vec<_>>());
        let d_s = easy_data.subset(&(half..easy_data.len()).collect::<Vec<_>>());
        let mut model = LayeredModel::build(
            2,
            vec![LayerSpec::relu("h1", 8), LayerSpec::relu("h2", 6)],
            2,
            seed,
        )
        .unwrap();
        model.train(&d_n, &cfg(120, seed)).unwrap();
        (model, d_n, d_s)
    }

    #[test]
    fn probe_count_matches_unit_list_and_hash_is_unchanged() {
        let (model, d_n, _) = trained_model(1);
        let before = model.param_hash();
        let probes = train_probes(&model, &model.unit_names(), &d_n, &cfg(30, 2)).unwrap();
        assert_eq!(probes.len(), 2);
        assert_eq!(model.param_hash(), before);
    }

    #[test]
    fn probes_on_separable_data_have_low_error() {
        let (model, d_n, d_s) = trained_model(3);
        let mut probes = train_probes(&model, &model.unit_names(), &d_n, &cfg(80, 5)).unwrap();
        for probe in &mut probes {
            let e = probe_error(probe, &model, &d_s).unwrap();
            assert!(e <= 0.05, "unit {}: error {e}", probe.unit_name);
            assert_eq!(probe.error_on_ds, Some(e));
        }
    }

    #[test]
    fn random_labels_pin_probe_accuracy_to_chance() {
        use rand::Rng;
        use rand::SeedableRng;
        let (model, _, _) = trained_model(7);
        // Enough rows that a linear probe cannot memorize random labels.
        let big = blob_data(1500, 31);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let rows: Vec<Vec<f64>> = (0..big.len()).map(|i| big.row(i).to_vec()).collect();
        let labels: Vec<usize> = (0..big.len()).map(|_| rng.random_range(0..2)).collect();
        let shuffled = Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            labels,
            2,
            "random-labels",
        )
        .unwrap();
        let probes = train_probes(&model, &model.unit_names(), &shuffled, &cfg(40, 3)).unwrap();
        for probe in &probes {
            let e = probe.error_on(&model, &shuffled).unwrap();
            let accuracy = 1.0 - e;
            assert!(
                (accuracy - 0.5).abs() <= 0.1,
                "unit {}: accuracy {accuracy}",
                probe.unit_name
            );
        }
    }

    #[test]
    fn uniform_probe_scores_exactly_class_balance_error() {
        let (model, _, d_s) = trained_model(11);
        // Zero affine map: uniform probabilities, argmax ties to class 0.
        let k = model.num_classes();
        let probe = Probe::new("h1", Matrix::zeros(k, 8), vec![0.0; k]).unwrap();
        let e = probe.error_on(&model, &d_s).unwrap();
        let zeros = d_s.labels().iter().filter(|&&y| y == 0).count() as f64;
        assert_eq!(e, 1.0 - zeros / d_s.len() as f64);
    }

    #[test]
    fn perfect_probe_has_zero_error() {
        // The output head scores zero error on the rows the model itself
        // classifies correctly.
        let (model, _, d_s) = trained_model(13);
        let correct: Vec<usize> = (0..d_s.len())
            .filter(|&i| model.predict(d_s.row(i)).unwrap() == d_s.label(i))
            .collect();
        assert!(!correct.is_empty());
        let mut head = Probe::output_head(&model);
        let e = probe_error(&mut head, &model, &d_s.subset(&correct)).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn probe_error_matches_independent_confusion_path() {
        let (model, d_n, d_s) = trained_model(17);
        let probes = train_probes(&model, &model.unit_names(), &d_n, &cfg(10, 9)).unwrap();
        for probe in &probes {
            let e = probe.error_on(&model, &d_s).unwrap();
            // Independent path: full confusion matrix, then 1 - trace/m.
            let k = model.num_classes();
            let mut confusion = vec![vec![0usize; k]; k];
            for i in 0..d_s.len() {
                let rep = model.representation(&probe.unit_name, d_s.row(i)).unwrap();
                let pred = probe.predict_proba(&rep).unwrap().argmax();
                confusion[d_s.label(i)][pred] += 1;
            }
            let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
            let independent = 1.0 - trace as f64 / d_s.len() as f64;
            assert_eq!(e, independent);
        }
    }

    #[test]
    fn profile_scores_are_simplex_coordinates() {
        let (model, d_n, d_s) = trained_model(19);
        let probes = train_probes(&model, &model.unit_names(), &d_n, &cfg(15, 11)).unwrap();
        let profile =
            build_profile(&model, &probes, &model.unit_names(), &d_s).unwrap();
        assert_eq!(profile.num_samples(), d_s.len());
        assert_eq!(profile.num_units(), 2);
        for i in 0..profile.num_samples() {
            for c in 0..profile.num_units() {
                let s = profile.scores.get(i, c);
                assert!((0.0..=1.0).contains(&s));
            }
        }
        // Per sample and unit, the full probe output sums to one.
        let rep = model.representation("h1", d_s.row(0)).unwrap();
        let p = probes[0].predict_proba(&rep).unwrap();
        let total: f64 = p.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn profile_shape_for_many_units() {
        let data = synth_hard_regions(100, 0.0, 23).unwrap();
        let layers: Vec<LayerSpec> = (0..6).map(|i| LayerSpec::relu(format!("h{i}"), 4)).collect();
        let mut model = LayeredModel::build(2, layers, 2, 5).unwrap();
        model.train(&data, &cfg(10, 1)).unwrap();
        let probes = train_probes(&model, &model.unit_names(), &data, &cfg(5, 2)).unwrap();
        let profile = build_profile(&model, &probes, &model.unit_names(), &data).unwrap();
        assert_eq!(profile.scores.rows(), 100);
        assert_eq!(profile.scores.cols(), 6);
    }

    #[test]
    fn unknown_unit_in_selection_is_an_error() {
        let (model, d_n, d_s) = trained_model(29);
        let probes = train_probes(&model, &model.unit_names(), &d_n, &cfg(5, 1)).unwrap();
        let err = build_profile(&model, &probes, &["h9".to_string()], &d_s).unwrap_err();
        assert!(matches!(err, Error::UnknownUnit(_)));
    }

    #[test]
    fn output_head_probe_reproduces_predict_proba_bitwise() {
        let (model, _, d_s) = trained_model(31);
        let head = Probe::output_head(&model);
        for i in 0..d_s.len().min(32) {
            let rep = model.representation(LOGITS_UNIT, d_s.row(i)).unwrap();
            let via_probe = head.predict_proba(&rep).unwrap();
            let direct = model.predict_proba(d_s.row(i)).unwrap();
            for (a, b) in via_probe
                .probabilities()
                .iter()
                .zip(direct.probabilities())
            {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn saturated_probe_fills_profile_column_with_ones() {
        let (model, _, d_s) = trained_model(37);
        // Output-head probe scaled hard: logits multiplied by a large factor
        // saturate the softmax at exactly 1.0 for the winning class.
        let k = model.num_classes();
        let mut big = Matrix::zeros(k, k);
        for i in 0..k {
            big.set(i, i, 5000.0);
        }
        let sat = Probe::new(LOGITS_UNIT, big, vec![0.0; k]).unwrap();
        // Keep only rows the head classifies correctly and decisively.
        let correct: Vec<usize> = (0..d_s.len())
            .filter(|&i| {
                let p = model.predict_proba(d_s.row(i)).unwrap();
                p.argmax() == d_s.label(i) && p.get(d_s.label(i)) > 0.6
            })
            .collect();
        assert!(!correct.is_empty());
        let subset = d_s.subset(&correct);
        let profile = build_profile(&model, &[sat], &[LOGITS_UNIT.to_string()], &subset).unwrap();
        for i in 0..profile.num_samples() {
            assert_eq!(profile.scores.get(i, 0), 1.0);
        }
    }

    #[test]
    fn probe_set_json_round_trip_is_exact() {
        let (model, d_n, d_s) = trained_model(41);
        let mut probes = train_probes(&model, &model.unit_names(), &d_n, &cfg(10, 13)).unwrap();
        for p in &mut probes {
            probe_error(p, &model, &d_s).unwrap();
        }
        let text = probes_to_json(&probes).unwrap();
        let back = probes_from_json(&text).unwrap();
        assert_eq!(probes.len(), back.len());
        for (a, b) in probes.iter().zip(&back) {
            assert_eq!(a, b);
        }
    }
}
