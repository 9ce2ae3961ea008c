//! The complex model: a multilayer perceptron with named logical units that
//! expose flattened intermediate representations for probe training.
//!
//! After training the model is frozen; every later stage (probes, weighting,
//! simple models) treats it as read-only, and a parameter hash makes the
//! no-mutation contract checkable.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::net::softmax_in_place;
use crate::numerics::{argmax, sgd_train, NetObjective, NetShape, SimplexVector};
use crate::numerics::{Activation, SgdConfig};
use crate::serialize;

/// Reserved unit name for the final pre-softmax affine output.
pub const LOGITS_UNIT: &str = "logits";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub unit_name: String,
    pub width: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn relu(unit_name: impl Into<String>, width: usize) -> Self {
        LayerSpec {
            unit_name: unit_name.into(),
            width,
            activation: Activation::Relu,
        }
    }
}

/// Feed-forward classifier with named hidden units.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredModel {
    input_dim: usize,
    num_classes: usize,
    seed: u64,
    layers: Vec<LayerSpec>,
    shape: NetShape,
    params: Vec<f64>,
    frozen: bool,
    train_accuracy: Option<f64>,
}

impl LayeredModel {
    /// Build an unfrozen model with seeded scaled-uniform initialization.
    pub fn build(
        input_dim: usize,
        layers: Vec<LayerSpec>,
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidSpec("input dimension must be >= 1".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidSpec("need at least 2 classes".into()));
        }
        if layers.is_empty() {
            return Err(Error::InvalidSpec(
                "need at least one hidden layer".into(),
            ));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.width == 0 {
                return Err(Error::InvalidSpec(format!(
                    "layer '{}' has width 0",
                    layer.unit_name
                )));
            }
            if layer.unit_name == LOGITS_UNIT {
                return Err(Error::InvalidSpec(format!(
                    "unit name '{LOGITS_UNIT}' is reserved for the output"
                )));
            }
            if layers[..i].iter().any(|l| l.unit_name == layer.unit_name) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate unit name '{}'",
                    layer.unit_name
                )));
            }
        }
        let shape = NetShape {
            input_dim,
            hidden: layers.iter().map(|l| (l.width, l.activation)).collect(),
            output_dim: num_classes,
        };
        let params = shape.init_params(seed);
        Ok(LayeredModel {
            input_dim,
            num_classes,
            seed,
            layers,
            shape,
            params,
            frozen: false,
            train_accuracy: None,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Hidden unit names, in depth order. The output logits are addressable
    /// separately as [`LOGITS_UNIT`].
    pub fn unit_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.unit_name.clone()).collect()
    }

    /// Width of the flattened representation exposed by a unit.
    pub fn unit_width(&self, unit_name: &str) -> Result<usize> {
        if unit_name == LOGITS_UNIT {
            return Ok(self.num_classes);
        }
        self.layers
            .iter()
            .find(|l| l.unit_name == unit_name)
            .map(|l| l.width)
            .ok_or_else(|| Error::UnknownUnit(unit_name.to_string()))
    }

    /// Training accuracy recorded when the model was frozen.
    pub fn train_accuracy(&self) -> Option<f64> {
        self.train_accuracy
    }

    /// Train on D_N with unweighted cross-entropy, then freeze.
    pub fn train(&mut self, d_n: &Dataset, cfg: &SgdConfig) -> Result<()> {
        if self.frozen {
            return Err(Error::AlreadyFrozen);
        }
        if d_n.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if d_n.dim() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "dataset dimension {} != model input {}",
                d_n.dim(),
                self.input_dim
            )));
        }
        if d_n.num_classes() > self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "dataset has {} classes, model supports {}",
                d_n.num_classes(),
                self.num_classes
            )));
        }
        let weights = vec![1.0; d_n.len()];
        let objective = NetObjective {
            shape: &self.shape,
            features: d_n.features(),
            labels: d_n.labels(),
            weights: &weights,
            l2: cfg.l2_penalty,
        };
        let indices: Vec<usize> = (0..d_n.len()).collect();
        let run = sgd_train(&objective, &self.params, cfg, &indices)?;
        self.params = run.params;
        self.frozen = true;
        let correct = (0..d_n.len())
            .filter(|&i| self.predict_unchecked(d_n.row(i)) == d_n.label(i))
            .count();
        self.train_accuracy = Some(correct as f64 / d_n.len() as f64);
        Ok(())
    }

    fn require_frozen(&self, op: &'static str) -> Result<()> {
        if !self.frozen {
            return Err(Error::NotFrozen(op));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "input length {} != model input {}",
                x.len(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Flattened representation after the named unit: the post-activation
    /// output of a hidden layer, or the pre-softmax logits for
    /// [`LOGITS_UNIT`]. Pure: never mutates the model.
    pub fn representation(&self, unit_name: &str, x: &[f64]) -> Result<Vec<f64>> {
        self.require_frozen("representation")?;
        self.check_input(x)?;
        let acts = self.shape.forward_collect(&self.params, x);
        if unit_name == LOGITS_UNIT {
            return Ok(acts.last().expect("output layer").clone());
        }
        let idx = self
            .layers
            .iter()
            .position(|l| l.unit_name == unit_name)
            .ok_or_else(|| Error::UnknownUnit(unit_name.to_string()))?;
        Ok(acts[idx].clone())
    }

    /// Representations of a whole dataset as rows of a matrix.
    pub fn representation_matrix(
        &self,
        unit_name: &str,
        d: &Dataset,
    ) -> Result<crate::numerics::Matrix> {
        let rows: Result<Vec<Vec<f64>>> = (0..d.len())
            .map(|i| self.representation(unit_name, d.row(i)))
            .collect();
        crate::numerics::Matrix::from_rows(&rows?)
    }

    /// Softmax over the final logits.
    pub fn predict_proba(&self, x: &[f64]) -> Result<SimplexVector> {
        self.require_frozen("predict_proba")?;
        self.check_input(x)?;
        let mut logits = self.shape.forward(&self.params, x);
        softmax_in_place(&mut logits);
        SimplexVector::new(logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax())
    }

    fn predict_unchecked(&self, x: &[f64]) -> usize {
        argmax(&self.shape.forward(&self.params, x))
    }

    pub fn accuracy_on(&self, d: &Dataset) -> Result<f64> {
        self.require_frozen("accuracy_on")?;
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let correct = (0..d.len())
            .filter(|&i| self.predict_unchecked(d.row(i)) == d.label(i))
            .count();
        Ok(correct as f64 / d.len() as f64)
    }

    /// FNV-1a hash over the parameter bit patterns. Used to assert the
    /// freeze contract: probe and weighting stages must leave this value
    /// unchanged.
    pub fn param_hash(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for byte in p.to_bits().to_le_bytes() {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }

    pub fn to_json(&self) -> Result<String> {
        serialize::to_json_string(&ModelDocument::from(self))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serialize::from_json_str(text)?;
        doc.into_model()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        serialize::write_json_file(&ModelDocument::from(self), path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let doc: ModelDocument =
            serialize::read_json_artifact(path, "profweight train-complex")?;
        doc.into_model()
    }
}

pub(crate) const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk form: a header followed by per-affine weight/bias
/// arrays in row-major order.
#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct AffineBlock {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    kind: String,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
    frozen: bool,
    train_accuracy: Option<f64>,
    layers: Vec<LayerSpec>,
    affines: Vec<AffineBlock>,
}

impl From<&LayeredModel> for ModelDocument {
    fn from(model: &LayeredModel) -> Self {
        let mut affines = Vec::new();
        let mut at = 0usize;
        for (in_dim, out_dim) in model.shape.affine_dims() {
            let weights = model.params[at..at + out_dim * in_dim].to_vec();
            at += out_dim * in_dim;
            let bias = model.params[at..at + out_dim].to_vec();
            at += out_dim;
            affines.push(AffineBlock {
                in_dim,
                out_dim,
                weights,
                bias,
            });
        }
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            kind: "layered-model".to_string(),
            input_dim: model.input_dim,
            num_classes: model.num_classes,
            seed: model.seed,
            frozen: model.frozen,
            train_accuracy: model.train_accuracy,
            layers: model.layers.clone(),
            affines,
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> Result<LayeredModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let mut model = LayeredModel::build(
            self.input_dim,
            self.layers,
            self.num_classes,
            self.seed,
        )?;
        let mut params = Vec::with_capacity(model.shape.num_params());
        for (block, (in_dim, out_dim)) in self.affines.iter().zip(model.shape.affine_dims()) {
            if block.in_dim != in_dim
                || block.out_dim != out_dim
                || block.weights.len() != in_dim * out_dim
                || block.bias.len() != out_dim
            {
                return Err(Error::DimensionMismatch(
                    "affine block does not match declared layers".into(),
                ));
            }
            params.extend_from_slice(&block.weights);
            params.extend_from_slice(&block.bias);
        }
        if params.len() != model.shape.num_params() {
            return Err(Error::DimensionMismatch(
                "parameter count does not match architecture".into(),
            ));
        }
        model.params = params;
        model.frozen = self.frozen;
        model.train_accuracy = self.train_accuracy;
        Ok(model)
    }
}
