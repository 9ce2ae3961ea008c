//! Weighted low-capacity learners: logistic regression, CART, small MLPs,
//! and the distillation baseline. Every learner accepts per-sample weights;
//! uniform weights reproduce unweighted training bit-for-bit, and
//! zero-weight samples are excluded from batches so they are exactly inert.

pub mod tree;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::net::{softmax_in_place, DistillObjective};
use crate::numerics::{
    sgd_train, Matrix, NetObjective, NetShape, SgdConfig, SimplexVector, PROB_CLAMP,
};
use crate::serialize;

pub use tree::{train_weighted_tree, TreeModel, TreeNode, TreeParams};

/// What kind of simple model to train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SimpleKind {
    Logistic,
    Tree {
        max_depth: usize,
        min_leaf_weight: Option<f64>,
    },
    Mlp {
        hidden: Vec<usize>,
    },
}

/// A simple-model learner: the kind plus its trainer settings. The SGD
/// config (including its l2 penalty and seed) applies to the differentiable
/// kinds; trees ignore it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleModelSpec {
    #[serde(flatten)]
    pub kind: SimpleKind,
    pub sgd: SgdConfig,
}

impl SimpleModelSpec {
    pub fn logistic(sgd: SgdConfig) -> Self {
        SimpleModelSpec {
            kind: SimpleKind::Logistic,
            sgd,
        }
    }

    pub fn tree(max_depth: usize) -> Self {
        SimpleModelSpec {
            kind: SimpleKind::Tree {
                max_depth,
                min_leaf_weight: None,
            },
            sgd: SgdConfig::default(),
        }
    }

    pub fn mlp(hidden: Vec<usize>, sgd: SgdConfig) -> Self {
        SimpleModelSpec {
            kind: SimpleKind::Mlp { hidden },
            sgd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            SimpleKind::Tree {
                max_depth,
                min_leaf_weight,
            } => {
                if *max_depth == 0 {
                    return Err(Error::InvalidSpec("tree max_depth must be >= 1".into()));
                }
                if let Some(v) = min_leaf_weight {
                    if v.is_nan() || *v <= 0.0 {
                        return Err(Error::InvalidSpec(
                            "tree min_leaf_weight must be positive".into(),
                        ));
                    }
                }
                Ok(())
            }
            SimpleKind::Mlp { hidden } => {
                if hidden.contains(&0) {
                    return Err(Error::InvalidSpec("mlp hidden widths must be >= 1".into()));
                }
                self.sgd.validate()
            }
            SimpleKind::Logistic => self.sgd.validate(),
        }
    }

    fn net_shape(&self, input_dim: usize, num_classes: usize) -> Option<NetShape> {
        match &self.kind {
            SimpleKind::Logistic => Some(NetShape::linear(input_dim, num_classes)),
            SimpleKind::Mlp { hidden } => Some(NetShape::mlp(input_dim, hidden, num_classes)),
            SimpleKind::Tree { .. } => None,
        }
    }

    /// Train with per-sample weights. `Sum w` must be positive; zero-weight
    /// rows never enter a batch.
    pub fn train_weighted(&self, d: &Dataset, weights: &[f64]) -> Result<SimpleModel> {
        self.validate()?;
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if weights.len() != d.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} rows",
                weights.len(),
                d.len()
            )));
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        match &self.kind {
            SimpleKind::Tree {
                max_depth,
                min_leaf_weight,
            } => {
                let model = train_weighted_tree(
                    d,
                    weights,
                    &TreeParams {
                        max_depth: *max_depth,
                        min_leaf_weight: *min_leaf_weight,
                    },
                )?;
                Ok(SimpleModel::Tree(model))
            }
            _ => {
                let active: Vec<usize> = (0..d.len()).filter(|&i| weights[i] > 0.0).collect();
                if active.is_empty() {
                    return Err(Error::DegenerateWeights);
                }
                let shape = self
                    .net_shape(d.dim(), d.num_classes())
                    .expect("net kinds only");
                let objective = NetObjective {
                    shape: &shape,
                    features: d.features(),
                    labels: d.labels(),
                    weights,
                    l2: self.sgd.l2_penalty,
                };
                let init = shape.init_params(self.sgd.seed);
                let run = sgd_train(&objective, &init, &self.sgd, &active)?;
                Ok(SimpleModel::Net(NetClassifier {
                    shape,
                    params: run.params,
                }))
            }
        }
    }

    /// Standard (unweighted) training: weights identically one.
    pub fn train_unweighted(&self, d: &Dataset) -> Result<SimpleModel> {
        self.train_weighted(d, &vec![1.0; d.len()])
    }

    /// Like [`train_weighted`] but also returns the per-epoch mean batch
    /// loss, for loss-trajectory comparisons.
    pub fn train_weighted_traced(
        &self,
        d: &Dataset,
        weights: &[f64],
    ) -> Result<(SimpleModel, Vec<f64>)> {
        match &self.kind {
            SimpleKind::Tree { .. } => {
                let model = self.train_weighted(d, weights)?;
                Ok((model, Vec::new()))
            }
            _ => {
                self.validate()?;
                let active: Vec<usize> = (0..d.len()).filter(|&i| weights[i] > 0.0).collect();
                if active.is_empty() {
                    return Err(Error::DegenerateWeights);
                }
                let shape = self
                    .net_shape(d.dim(), d.num_classes())
                    .expect("net kinds only");
                let objective = NetObjective {
                    shape: &shape,
                    features: d.features(),
                    labels: d.labels(),
                    weights,
                    l2: self.sgd.l2_penalty,
                };
                let init = shape.init_params(self.sgd.seed);
                let run = sgd_train(&objective, &init, &self.sgd, &active)?;
                Ok((
                    SimpleModel::Net(NetClassifier {
                        shape,
                        params: run.params,
                    }),
                    run.epoch_loss,
                ))
            }
        }
    }
}

/// A trained differentiable student (logistic regression or MLP).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetClassifier {
    pub shape: NetShape,
    pub params: Vec<f64>,
}

impl NetClassifier {
    pub fn predict_proba(&self, x: &[f64]) -> SimplexVector {
        let mut logits = self.shape.forward(&self.params, x);
        softmax_in_place(&mut logits);
        SimplexVector::new(logits).expect("softmax output is a simplex vector")
    }
}

/// A trained simple model of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum SimpleModel {
    Net(NetClassifier),
    Tree(TreeModel),
}

/// Evaluation summary: accuracy, error = 1 - accuracy, and the per-class
/// confusion matrix (rows are true classes, columns predictions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub error: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl SimpleModel {
    pub fn num_classes(&self) -> usize {
        match self {
            SimpleModel::Net(n) => n.shape.output_dim,
            SimpleModel::Tree(t) => t.num_classes,
        }
    }

    pub fn predict_proba(&self, x: &[f64]) -> SimplexVector {
        match self {
            SimpleModel::Net(n) => n.predict_proba(x),
            SimpleModel::Tree(t) => t.predict_proba(x),
        }
    }

    /// Argmax prediction; ties resolve to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        self.predict_proba(x).argmax()
    }

    pub fn evaluate(&self, d: &Dataset) -> Result<EvalReport> {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let k = self.num_classes();
        let mut confusion = vec![vec![0usize; k]; k];
        let mut correct = 0usize;
        for i in 0..d.len() {
            let truth = d.label(i);
            if truth >= k {
                return Err(Error::InvalidArgument(format!(
                    "label {truth} out of range for {k}-class model"
                )));
            }
            let pred = self.predict(d.row(i));
            confusion[truth][pred] += 1;
            if pred == truth {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / d.len() as f64;
        Ok(EvalReport {
            accuracy,
            error: 1.0 - accuracy,
            confusion,
        })
    }

    /// Per-sample cross-entropy against the true labels, probabilities
    /// clamped before the logarithm. This is the loss the weighting
    /// alternation treats as fixed during its weight-update step.
    pub fn per_sample_losses(&self, d: &Dataset) -> Result<Vec<f64>> {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok((0..d.len())
            .map(|i| match self {
                SimpleModel::Tree(t) => t.per_sample_loss(d.row(i), d.label(i)),
                SimpleModel::Net(n) => {
                    let p = n.predict_proba(d.row(i));
                    -(p.get(d.label(i)).max(PROB_CLAMP)).ln()
                }
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        serialize::to_json_string(&SimpleDocument::from(self))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SimpleDocument = serialize::from_json_str(text)?;
        Ok(doc.into_model())
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        serialize::write_json_file(&SimpleDocument::from(self), path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let doc: SimpleDocument =
            serialize::read_json_artifact(path, "profweight train-simple")?;
        Ok(doc.into_model())
    }
}

const SIMPLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum SimpleDocument {
    SimpleNet {
        format_version: u32,
        shape: NetShape,
        params: Vec<f64>,
    },
    SimpleTree {
        format_version: u32,
        model: TreeModel,
    },
}

impl From<&SimpleModel> for SimpleDocument {
    fn from(model: &SimpleModel) -> Self {
        match model {
            SimpleModel::Net(n) => SimpleDocument::SimpleNet {
                format_version: SIMPLE_FORMAT_VERSION,
                shape: n.shape.clone(),
                params: n.params.clone(),
            },
            SimpleModel::Tree(t) => SimpleDocument::SimpleTree {
                format_version: SIMPLE_FORMAT_VERSION,
                model: t.clone(),
            },
        }
    }
}

impl SimpleDocument {
    fn into_model(self) -> SimpleModel {
        match self {
            SimpleDocument::SimpleNet { shape, params, .. } => {
                SimpleModel::Net(NetClassifier { shape, params })
            }
            SimpleDocument::SimpleTree { model, .. } => SimpleModel::Tree(model),
        }
    }
}

/// Distillation baseline: soft targets softmax(z/t) from teacher logits.
#[derive(Debug, Clone)]
pub struct DistillConfig {
    pub temperature: f64,
    pub teacher_logits: Matrix,
}

impl DistillConfig {
    pub fn new(temperature: f64, teacher_logits: Matrix) -> Result<Self> {
        if temperature.is_nan() || temperature <= 0.0 || !temperature.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "distillation temperature must be positive, got {temperature}"
            )));
        }
        Ok(DistillConfig {
            temperature,
            teacher_logits,
        })
    }

    /// Temperature-scaled soft targets, one distribution per row.
    pub fn soft_targets(&self) -> Matrix {
        let mut out = Matrix::zeros(self.teacher_logits.rows(), self.teacher_logits.cols());
        for i in 0..self.teacher_logits.rows() {
            let mut row: Vec<f64> = self
                .teacher_logits
                .row(i)
                .iter()
                .map(|z| z / self.temperature)
                .collect();
            softmax_in_place(&mut row);
            for (j, v) in row.iter().enumerate() {
                out.set(i, j, *v);
            }
        }
        out
    }
}

/// Default temperature grid: multiples of 2 starting at 0.5.
pub fn default_temperature_grid() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 8.0]
}

/// Train a student against temperature-scaled teacher soft targets.
///
/// Differentiable students minimize cross-entropy to the soft targets. For
/// trees the targets are hardened to their argmax label first, since CART
/// consumes labels, not distributions.
pub fn distill(d_s: &Dataset, cfg: &DistillConfig, spec: &SimpleModelSpec) -> Result<SimpleModel> {
    spec.validate()?;
    if cfg.temperature.is_nan() || cfg.temperature <= 0.0 {
        return Err(Error::InvalidArgument(
            "distillation temperature must be positive".into(),
        ));
    }
    if cfg.teacher_logits.rows() != d_s.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} teacher rows for {} samples",
            cfg.teacher_logits.rows(),
            d_s.len()
        )));
    }
    let targets = cfg.soft_targets();
    match &spec.kind {
        SimpleKind::Tree {
            max_depth,
            min_leaf_weight,
        } => {
            let hard: Vec<usize> = (0..targets.rows())
                .map(|i| crate::numerics::argmax(targets.row(i)))
                .collect();
            let mut relabeled = Dataset::new(
                d_s.features().clone(),
                hard,
                targets.cols().max(d_s.num_classes()),
                format!("{}#distilled", d_s.provenance),
            )?;
            relabeled.feature_names = d_s.feature_names.clone();
            let model = train_weighted_tree(
                &relabeled,
                &vec![1.0; relabeled.len()],
                &TreeParams {
                    max_depth: *max_depth,
                    min_leaf_weight: *min_leaf_weight,
                },
            )?;
            Ok(SimpleModel::Tree(model))
        }
        _ => {
            let shape = spec
                .net_shape(d_s.dim(), targets.cols())
                .expect("net kinds only");
            let objective = DistillObjective {
                shape: &shape,
                features: d_s.features(),
                soft_targets: &targets,
                l2: spec.sgd.l2_penalty,
            };
            let init = shape.init_params(spec.sgd.seed);
            let indices: Vec<usize> = (0..d_s.len()).collect();
            let run = sgd_train(&objective, &init, &spec.sgd, &indices)?;
            Ok(SimpleModel::Net(NetClassifier {
                shape,
                params: run.params,
            }))
        }
    }
}
