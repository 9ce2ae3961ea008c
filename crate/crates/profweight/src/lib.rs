//! Improve simple models with confidence profiles from a pretrained
//! network's intermediate layers.
//!
//! The pipeline: train and freeze a complex feed-forward classifier, attach
//! a linear probe to each hidden unit, and read off each training sample's
//! per-layer confidence in its *true* label. Samples the network resolves
//! early are easy; samples no layer resolves are hard. Averaging the
//! confidences over the probes that outperform the simple model gives a
//! per-sample weight ([`weighting::auc_weights`]), or a small network over
//! the confidence vector learns the weights by alternating minimization
//! with a mean-one regularizer ([`weighting::learn_weights_nn`]). Training
//! the simple model on the reweighted data focuses its capacity on the
//! examples it can learn.
//!
//! ```
//! use profweight::data::{split, synth_hard_regions, SplitPlan};
//! use profweight::model::{LayerSpec, LayeredModel};
//! use profweight::numerics::SgdConfig;
//! use profweight::probes::{probe_error, train_probes, Probe};
//! use profweight::simple::SimpleModelSpec;
//! use profweight::weighting::{profweight, ProfWeightOptions};
//!
//! # fn main() -> profweight::Result<()> {
//! let data = synth_hard_regions(1200, 0.3, 7)?;
//! let splits = split(&data, &SplitPlan::default())?;
//!
//! let mut teacher = LayeredModel::build(
//!     2,
//!     vec![LayerSpec::relu("h1", 12), LayerSpec::relu("h2", 10)],
//!     2,
//!     7,
//! )?;
//! let cfg = SgdConfig { epochs: 40, ..SgdConfig::default() };
//! teacher.train(&splits.d_n, &cfg)?;
//!
//! let mut probes = train_probes(&teacher, &teacher.unit_names(), &splits.d_n, &cfg)?;
//! probes.push(Probe::output_head(&teacher));
//! for probe in &mut probes {
//!     probe_error(probe, &teacher, &splits.d_s)?;
//! }
//!
//! let student = SimpleModelSpec::tree(2);
//! let outcome = profweight(
//!     &teacher,
//!     &probes,
//!     &splits.d_s,
//!     &student,
//!     &ProfWeightOptions::auc(-0.05),
//!     None,
//! )?;
//! let report = outcome.model.evaluate(&splits.holdout)?;
//! assert!(report.accuracy > 0.5);
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod error;
pub mod experiment;
pub mod model;
pub mod numerics;
pub mod probes;
pub mod serialize;
pub mod simple;
pub mod theory;
pub mod weighting;

pub use data::{Dataset, SplitPlan, Splits};
pub use error::{Error, Result};
pub use model::{LayerSpec, LayeredModel};
pub use numerics::{Matrix, SgdConfig, SimplexVector};
pub use probes::{ConfidenceProfile, Probe};
pub use simple::{SimpleModel, SimpleModelSpec};
pub use weighting::{ProfWeightOptions, ProfWeightOutcome, WeightVector};
