//! Sample-weighting schemes: margin-based probe selection, profile-average
//! (AUC) weights, last-layer confidence weights, and weights learned by a
//! small network through alternating minimization with the mean-one
//! regularizer.
//!
//! The alternation trains the simple model under the current weights, then
//! descends the weight-net parameters on
//!   (1/m) sum_j w(c_j) * loss_j  +  gamma * (mean(w) - 1)^2
//! with the simple model fixed. The weight net ends in a ReLU so weights
//! stay non-negative; its output layer starts at exactly zero with bias one,
//! so the initial weights are exactly the all-ones vector. The update step
//! uses full-batch gradient descent with Armijo backtracking, making every
//! accepted step non-increasing.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::LayeredModel;
use crate::numerics::{Matrix, NetShape, Objective, SgdConfig};
use crate::probes::{build_profile, ConfidenceProfile, Probe};
use crate::serialize::fmt_f64;
use crate::simple::{SimpleModel, SimpleModelSpec};

/// Which scheme produced a weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeTag {
    Standard,
    Confweight,
    ProfweightAuc,
    ProfweightNn,
}

/// Non-negative per-sample weights, tagged with their provenance.
/// Profile-average weights additionally lie in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    pub scheme: SchemeTag,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, scheme: SchemeTag) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "weights must be finite and non-negative, got {w}"
                )));
            }
            if scheme == SchemeTag::ProfweightAuc && w > 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "profile-average weight {w} exceeds 1"
                )));
            }
        }
        Ok(WeightVector { weights, scheme })
    }

    pub fn uniform(m: usize) -> Self {
        WeightVector {
            weights: vec![1.0; m],
            scheme: SchemeTag::Standard,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }

    /// Two-column CSV (sample_index, weight), 17 significant digits.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("sample_index,weight\n");
        for (i, w) in self.weights.iter().enumerate() {
            out.push_str(&format!("{i},{}\n", fmt_f64(*w)));
        }
        out
    }

    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Read a weight CSV written by [`WeightVector::save_csv`]. The scheme
    /// tag is not stored in the CSV, so the caller supplies it.
    pub fn load_csv(path: &std::path::Path, scheme: SchemeTag) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingArtifact {
                    path: path.display().to_string(),
                    producer: "profweight compute-weights".to_string(),
                }
            } else {
                Error::Io(e)
            }
        })?;
        let mut weights = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 {
                continue; // header
            }
            let mut parts = line.splitn(2, ',');
            let idx: usize = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::MalformedArtifact {
                    path: path.display().to_string(),
                    reason: format!("bad sample index on line {}", lineno + 1),
                })?;
            if idx != weights.len() {
                return Err(Error::MalformedArtifact {
                    path: path.display().to_string(),
                    reason: format!("non-contiguous sample index {idx} on line {}", lineno + 1),
                });
            }
            let w: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::MalformedArtifact {
                    path: path.display().to_string(),
                    reason: format!("bad weight on line {}", lineno + 1),
                })?;
            weights.push(w);
        }
        WeightVector::new(weights, scheme)
    }
}

/// Outcome of margin-based probe selection: I = { u : e_u <= e_S - alpha }.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSelection {
    pub alpha: f64,
    pub simple_error: f64,
    pub probe_errors: Vec<f64>,
    pub selected: Vec<usize>,
}

/// Select the probes at least `alpha` more accurate than the simple model.
/// An empty selection is allowed here; downstream weight computation turns
/// it into an error.
pub fn select_probes(probe_errors: &[f64], e_s: f64, alpha: f64) -> Result<MarginSelection> {
    for &e in probe_errors.iter().chain(std::iter::once(&e_s)) {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::InvalidArgument(format!(
                "errors must lie in [0, 1], got {e}"
            )));
        }
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let selected = probe_errors
        .iter()
        .enumerate()
        .filter(|(_, &e)| e <= e_s - alpha)
        .map(|(u, _)| u)
        .collect();
    Ok(MarginSelection {
        alpha,
        simple_error: e_s,
        probe_errors: probe_errors.to_vec(),
        selected,
    })
}

/// Profile-average weights: w_i = (1/|I|) sum_{u in I} c_iu, the area under
/// the confidence curve over the selected probes.
pub fn auc_weights(profile: &ConfidenceProfile) -> Result<WeightVector> {
    if profile.num_units() == 0 {
        return Err(Error::EmptyProbeSet {
            context: "confidence profile has zero probe columns".into(),
        });
    }
    let k = profile.num_units() as f64;
    let weights: Vec<f64> = (0..profile.num_samples())
        .map(|i| profile.scores.row(i).iter().sum::<f64>() / k)
        .collect();
    WeightVector::new(weights, SchemeTag::ProfweightAuc)
}

/// Last-layer confidence weights: w_i = predict_proba(model, x_i)[y_i].
pub fn conf_weights(model: &LayeredModel, d_s: &Dataset) -> Result<WeightVector> {
    if d_s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let weights: Result<Vec<f64>> = (0..d_s.len())
        .map(|i| Ok(model.predict_proba(d_s.row(i))?.get(d_s.label(i))))
        .collect();
    WeightVector::new(weights?, SchemeTag::Confweight)
}

/// Mean-one regularizer: gamma * (mean(w) - 1)^2. Keeps the learned weights
/// from collapsing to zero. The mean is accumulated in sorted order so the
/// value is exactly invariant under permutations of `weights`.
pub fn weight_regularizer(weights: &[f64], gamma: f64) -> f64 {
    let mut sorted = weights.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    gamma * (mean - 1.0) * (mean - 1.0)
}

/// Architecture and schedule for the learned weighting network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightNetSpec {
    /// Hidden widths of the weight net (ReLU activations).
    pub hidden: Vec<usize>,
    /// Scale of the mean-one regularizer.
    pub gamma: f64,
    /// Alternating-minimization outer iterations.
    pub outer_iterations: usize,
    /// Stop early when a full cycle improves the objective by less than this.
    pub min_cycle_improvement: f64,
    /// Simple-model training config for the model-update step.
    pub beta_sgd: SgdConfig,
    /// Weight-net descent config: `epochs` is the maximum number of accepted
    /// steps, `learning_rate` the initial step size, `l2_penalty` the ridge
    /// on the weight-net parameters, `seed` the initialization seed.
    pub w_sgd: SgdConfig,
    /// Use Armijo backtracking (monotone) rather than fixed-step descent.
    pub monotone: bool,
}

impl Default for WeightNetSpec {
    fn default() -> Self {
        WeightNetSpec {
            hidden: vec![8],
            gamma: 1.0,
            outer_iterations: 5,
            min_cycle_improvement: 1e-6,
            beta_sgd: SgdConfig::default(),
            w_sgd: SgdConfig {
                learning_rate: 0.5,
                batch_size: 32,
                epochs: 60,
                l2_penalty: 1e-4,
                momentum: 0.0,
                seed: 0,
            },
            monotone: true,
        }
    }
}

impl WeightNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 || !self.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if self.outer_iterations == 0 {
            return Err(Error::InvalidArgument(
                "need at least one outer iteration".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "weight-net hidden widths must be >= 1".into(),
            ));
        }
        self.beta_sgd.validate()?;
        if self.w_sgd.learning_rate.is_nan() || self.w_sgd.learning_rate <= 0.0 || self.w_sgd.epochs == 0 {
            return Err(Error::InvalidArgument(
                "weight-net step size and step count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn net_shape(&self, num_units: usize) -> NetShape {
        NetShape::mlp(num_units, &self.hidden, 1)
    }
}

/// Weight-net parameters at initialization: hidden layers get the seeded
/// scaled-uniform scheme, the output affine is zeroed, and the output bias
/// is one, so every initial weight is relu(1) = exactly 1.
pub fn weight_net_init(shape: &NetShape, seed: u64) -> Vec<f64> {
    let mut params = shape.init_params(seed);
    let out_in = shape
        .affine_dims()
        .last()
        .map(|&(inp, out)| inp * out + out)
        .expect("output affine");
    let n = params.len();
    for p in params[n - out_in..].iter_mut() {
        *p = 0.0;
    }
    params[n - 1] = 1.0;
    params
}

/// Evaluate the weight net on every profile row: w_j = relu(net(c_j)).
pub fn weight_net_outputs(shape: &NetShape, params: &[f64], profile: &Matrix) -> Vec<f64> {
    (0..profile.rows())
        .map(|j| shape.forward(params, profile.row(j))[0].max(0.0))
        .collect()
}

/// The weight-update objective of the alternation, with w_j = relu(net(c_j))
/// and loss_j the fixed simple-model loss:
///
///   (1/m) sum_{j in batch} w_j * loss_j
///   + gamma * (mean over ALL samples of w - 1)^2
///   + 0.5 * l2 * ||params||^2
///
/// The regularizer always ranges over the full sample set.
pub struct WStepObjective<'a> {
    pub shape: &'a NetShape,
    pub profile: &'a Matrix,
    pub sample_losses: &'a [f64],
    pub gamma: f64,
    pub l2: f64,
}

impl Objective for WStepObjective<'_> {
    fn num_samples(&self) -> usize {
        self.profile.rows()
    }

    fn loss_and_grad(&self, params: &[f64], batch: &[usize]) -> (f64, Vec<f64>) {
        let m = self.profile.rows();
        let mut grad = vec![0.0; params.len()];
        let mut in_batch = vec![false; m];
        for &j in batch {
            in_batch[j] = true;
        }
        // Forward everything once: the regularizer needs all samples.
        let mut acts_all = Vec::with_capacity(m);
        let mut w_all = Vec::with_capacity(m);
        for j in 0..m {
            let acts = self.shape.forward_collect(params, self.profile.row(j));
            let raw = acts.last().expect("output layer")[0];
            w_all.push(raw.max(0.0));
            acts_all.push(acts);
        }
        let mean_w = w_all.iter().sum::<f64>() / m as f64;
        let mut loss = self.gamma * (mean_w - 1.0) * (mean_w - 1.0);
        let reg_coeff = 2.0 * self.gamma * (mean_w - 1.0) / m as f64;
        let mut data = 0.0;
        for j in 0..m {
            if in_batch[j] {
                data += w_all[j] * self.sample_losses[j];
            }
            // ReLU gate: no gradient flows for inactive outputs.
            let raw = acts_all[j].last().expect("output layer")[0];
            if raw <= 0.0 {
                continue;
            }
            let mut coeff = reg_coeff;
            if in_batch[j] {
                coeff += self.sample_losses[j] / m as f64;
            }
            if coeff != 0.0 {
                self.shape.backprop_sample(
                    params,
                    self.profile.row(j),
                    &acts_all[j],
                    &[coeff],
                    &mut grad,
                );
            }
        }
        loss += data / m as f64;
        if self.l2 > 0.0 {
            let mut sq = 0.0;
            for (g, p) in grad.iter_mut().zip(params) {
                sq += p * p;
                *g += self.l2 * p;
            }
            loss += 0.5 * self.l2 * sq;
        }
        (loss, grad)
    }
}

/// Which half of an alternation cycle a recorded objective belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlternationPhase {
    ModelUpdate,
    WeightUpdate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfStepRecord {
    pub outer_iteration: usize,
    pub phase: AlternationPhase,
    pub objective: f64,
}

/// Objective history of one alternation run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightNetTrace {
    /// Full objective after every half-step.
    pub half_steps: Vec<HalfStepRecord>,
    /// Per outer iteration: the objective before descent followed by the
    /// objective after each accepted weight-net step.
    pub wstep_objectives: Vec<Vec<f64>>,
}

/// Full-batch gradient descent on the weight net. In monotone mode each
/// step passes an Armijo backtracking test, so the recorded objective
/// sequence never increases.
fn descend_weight_net(
    objective: &WStepObjective<'_>,
    params: &mut Vec<f64>,
    cfg: &SgdConfig,
    monotone: bool,
) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..objective.num_samples()).collect();
    let (mut current, mut grad) = objective.loss_and_grad(params, &all);
    if !current.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            what: "loss",
        });
    }
    let mut history = vec![current];
    let mut step = cfg.learning_rate;
    for it in 0..cfg.epochs {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2 <= 1e-20 {
            break;
        }
        if monotone {
            let mut t = step;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - t * g).collect();
                let (cl, cg) = objective.loss_and_grad(&cand, &all);
                if cl.is_finite() && cl <= current - 1e-4 * t * gnorm2 {
                    accepted = Some((cand, cl, cg, t));
                    break;
                }
                t /= 2.0;
            }
            let Some((cand, cl, cg, t)) = accepted else {
                break; // no descent step exists at any tried scale
            };
            *params = cand;
            current = cl;
            grad = cg;
            step = (t * 2.0).min(cfg.learning_rate * 64.0);
        } else {
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            let (cl, cg) = objective.loss_and_grad(params, &all);
            if !cl.is_finite() || cg.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch: it,
                    batch: 0,
                    what: "loss",
                });
            }
            current = cl;
            grad = cg;
        }
        history.push(current);
    }
    Ok(history)
}

/// Learn per-sample weights by alternating minimization (simple-model step,
/// then weight-net step), returning the final weights and the objective
/// trace. The caller retrains the simple model under the returned weights.
pub fn learn_weights_nn(
    profile: &ConfidenceProfile,
    d_s: &Dataset,
    learner: &SimpleModelSpec,
    spec: &WeightNetSpec,
) -> Result<(WeightVector, WeightNetTrace)> {
    spec.validate()?;
    if profile.num_units() == 0 {
        return Err(Error::EmptyProbeSet {
            context: "confidence profile has zero probe columns".into(),
        });
    }
    let m = d_s.len();
    if profile.num_samples() != m {
        return Err(Error::DimensionMismatch(format!(
            "profile has {} rows but D_S has {m}",
            profile.num_samples()
        )));
    }
    let shape = spec.net_shape(profile.num_units());
    let mut params = weight_net_init(&shape, spec.w_sgd.seed);
    let mut weights = weight_net_outputs(&shape, &params, &profile.scores);
    let mut trace = WeightNetTrace::default();
    let all: Vec<usize> = (0..m).collect();
    let mut last_cycle = f64::INFINITY;

    for outer in 0..spec.outer_iterations {
        // Model update: train the student under the current weights.
        let model = learner.train_weighted(d_s, &weights)?;
        let losses = model.per_sample_losses(d_s)?;
        let objective = WStepObjective {
            shape: &shape,
            profile: &profile.scores,
            sample_losses: &losses,
            gamma: spec.gamma,
            l2: spec.w_sgd.l2_penalty,
        };
        let (after_model, _) = objective.loss_and_grad(&params, &all);
        trace.half_steps.push(HalfStepRecord {
            outer_iteration: outer,
            phase: AlternationPhase::ModelUpdate,
            objective: after_model,
        });

        // Weight update: descend the weight net with the student fixed.
        let history = descend_weight_net(&objective, &mut params, &spec.w_sgd, spec.monotone)?;
        weights = weight_net_outputs(&shape, &params, &profile.scores);
        let after_weights = *history.last().expect("history starts non-empty");
        trace.wstep_objectives.push(history);
        trace.half_steps.push(HalfStepRecord {
            outer_iteration: outer,
            phase: AlternationPhase::WeightUpdate,
            objective: after_weights,
        });

        if last_cycle - after_weights < spec.min_cycle_improvement {
            break;
        }
        last_cycle = after_weights;
    }
    Ok((WeightVector::new(weights, SchemeTag::ProfweightNn)?, trace))
}

/// Weight computation scheme for the end-to-end pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Auc,
    Nn,
}

/// Pipeline options. `lowest_unit` overrides margin selection with "this
/// unit and everything after it", mirroring manual lowest-layer choices.
/// When `eval_on` is `None`, e_S and the probe errors are measured on D_S
/// itself (the literal reading); pass a validation split to measure there
/// instead.
#[derive(Debug, Clone)]
pub struct ProfWeightOptions {
    pub alpha: f64,
    pub scheme: WeightScheme,
    pub nn_spec: Option<WeightNetSpec>,
    pub lowest_unit: Option<String>,
}

impl ProfWeightOptions {
    pub fn auc(alpha: f64) -> Self {
        ProfWeightOptions {
            alpha,
            scheme: WeightScheme::Auc,
            nn_spec: None,
            lowest_unit: None,
        }
    }

    pub fn nn(alpha: f64, spec: WeightNetSpec) -> Self {
        ProfWeightOptions {
            alpha,
            scheme: WeightScheme::Nn,
            nn_spec: Some(spec),
            lowest_unit: None,
        }
    }
}

/// Everything the end-to-end run produces.
#[derive(Debug, Clone)]
pub struct ProfWeightOutcome {
    pub weights: WeightVector,
    pub model: SimpleModel,
    pub standard_model: SimpleModel,
    pub selection: MarginSelection,
    pub selected_units: Vec<String>,
    pub nn_trace: Option<WeightNetTrace>,
}

/// The end-to-end pipeline: train the standard simple model for e_S, select
/// probes by margin, compute weights (profile average or learned net), and
/// retrain the simple model under those weights.
pub fn profweight(
    model: &LayeredModel,
    probes: &[Probe],
    d_s: &Dataset,
    learner: &SimpleModelSpec,
    options: &ProfWeightOptions,
    eval_on: Option<&Dataset>,
) -> Result<ProfWeightOutcome> {
    if !model.is_frozen() {
        return Err(Error::NotFrozen("profweight"));
    }
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probes supplied".into()));
    }
    let standard_model = learner.train_unweighted(d_s)?;
    let eval_d = eval_on.unwrap_or(d_s);
    let e_s = standard_model.evaluate(eval_d)?.error;
    let probe_errors: Result<Vec<f64>> = probes.iter().map(|p| p.error_on(model, eval_d)).collect();
    let probe_errors = probe_errors?;
    let mut selection = select_probes(&probe_errors, e_s, options.alpha)?;

    if let Some(lowest) = &options.lowest_unit {
        let pos = probes
            .iter()
            .position(|p| &p.unit_name == lowest)
            .ok_or_else(|| Error::UnknownUnit(lowest.clone()))?;
        selection.selected = (pos..probes.len()).collect();
    }
    if selection.selected.is_empty() {
        return Err(Error::EmptyProbeSet {
            context: format!(
                "no probe error within alpha={} of simple-model error e_s={e_s}",
                options.alpha
            ),
        });
    }
    let selected_units: Vec<String> = selection
        .selected
        .iter()
        .map(|&u| probes[u].unit_name.clone())
        .collect();
    let profile = build_profile(model, probes, &selected_units, d_s)?;

    let (weights, nn_trace) = match options.scheme {
        WeightScheme::Auc => (auc_weights(&profile)?, None),
        WeightScheme::Nn => {
            let spec = options.nn_spec.clone().unwrap_or_default();
            let (w, trace) = learn_weights_nn(&profile, d_s, learner, &spec)?;
            (w, Some(trace))
        }
    };
    let weighted_model = learner.train_weighted(d_s, weights.weights())?;
    Ok(ProfWeightOutcome {
        weights,
        model: weighted_model,
        standard_model,
        selection,
        selected_units,
        nn_trace,
    })
}
