//! Config-driven experiment orchestration: train the complex model, attach
//! probes, compute weights per scheme, train and evaluate the simple models,
//! and aggregate everything into a report.
//!
//! Every stage seed is mixed with the experiment seed through
//! [`mix_seed`](crate::numerics::sgd::mix_seed), so one config plus a seed
//! list replays exactly, and chaining the CLI subcommands reproduces
//! `run_experiment`'s artifacts byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, LabelColumn, SplitPlan, Splits};
use crate::error::{Error, Result};
use crate::model::{LayerSpec, LayeredModel, LOGITS_UNIT};
use crate::numerics::sgd::mix_seed;
use crate::numerics::SgdConfig;
use crate::probes::{build_profile, probe_error, train_probes, Probe};
use crate::serialize;
use crate::simple::{distill, DistillConfig, SimpleModel, SimpleModelSpec};
use crate::weighting::{
    auc_weights, conf_weights, learn_weights_nn, select_probes, WeightNetSpec,
    WeightVector,
};

/// Where the experiment's rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        label_column: LabelColumn,
        header: bool,
    },
    Synthetic {
        m: usize,
        noise_rate: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexConfig {
    pub layers: Vec<LayerSpec>,
    pub sgd: SgdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStageConfig {
    /// Units to probe; defaults to every hidden layer.
    pub units: Option<Vec<String>>,
    /// Append the model's own softmax head as the final probe.
    pub attach_output_head: bool,
    pub sgd: SgdConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Standard,
    Confweight,
    Distillation,
    ProfweightAuc,
    ProfweightNn,
}

impl SchemeName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeName::Standard => "standard",
            SchemeName::Confweight => "confweight",
            SchemeName::Distillation => "distillation",
            SchemeName::ProfweightAuc => "profweight-auc",
            SchemeName::ProfweightNn => "profweight-nn",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "standard" => Ok(SchemeName::Standard),
            "confweight" => Ok(SchemeName::Confweight),
            "distillation" => Ok(SchemeName::Distillation),
            "profweight-auc" => Ok(SchemeName::ProfweightAuc),
            "profweight-nn" => Ok(SchemeName::ProfweightNn),
            other => Err(Error::Config(format!(
                "unknown scheme '{other}' (expected standard, confweight, distillation, \
                 profweight-auc, or profweight-nn)"
            ))),
        }
    }
}

/// A simple-model spec with a display name for report rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSimpleSpec {
    pub name: String,
    #[serde(flatten)]
    pub spec: SimpleModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationStage {
    /// Temperatures tried; the validation split picks the winner.
    pub temperatures: Vec<f64>,
}

/// Where e_S and the probe errors are measured. `Train` is the literal
/// reading (the simple model's own training split D_S); `Validation` uses
/// the held-out validation split instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorEvalSplit {
    Train,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub split: SplitPlan,
    pub complex: ComplexConfig,
    pub probes: ProbeStageConfig,
    pub alpha: f64,
    /// Manual selection override: use this unit and everything after it,
    /// regardless of margins (the manual ">= layer L" choice).
    pub lowest_unit: Option<String>,
    pub schemes: Vec<SchemeName>,
    pub simple_models: Vec<NamedSimpleSpec>,
    pub distillation: DistillationStage,
    pub weight_net: WeightNetSpec,
    pub seeds: Vec<u64>,
    pub error_eval: ErrorEvalSplit,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let simple_sgd = SgdConfig {
            learning_rate: 0.05,
            batch_size: 32,
            epochs: 120,
            l2_penalty: 1e-4,
            momentum: 0.9,
            seed: 11,
        };
        ExperimentConfig {
            dataset: DatasetSource::Synthetic {
                m: 4000,
                noise_rate: 0.35,
                seed: 7,
            },
            split: SplitPlan::default(),
            complex: ComplexConfig {
                layers: vec![LayerSpec::relu("h1", 24), LayerSpec::relu("h2", 24)],
                sgd: SgdConfig {
                    learning_rate: 0.1,
                    batch_size: 32,
                    epochs: 80,
                    l2_penalty: 1e-4,
                    momentum: 0.9,
                    seed: 3,
                },
            },
            probes: ProbeStageConfig {
                units: None,
                attach_output_head: true,
                sgd: SgdConfig {
                    learning_rate: 0.1,
                    batch_size: 32,
                    epochs: 80,
                    l2_penalty: 1e-4,
                    momentum: 0.9,
                    seed: 5,
                },
            },
            alpha: 0.0,
            lowest_unit: None,
            schemes: vec![
                SchemeName::Standard,
                SchemeName::Confweight,
                SchemeName::Distillation,
                SchemeName::ProfweightAuc,
                SchemeName::ProfweightNn,
            ],
            simple_models: vec![
                NamedSimpleSpec {
                    name: "tree-depth2".to_string(),
                    spec: SimpleModelSpec::tree(2),
                },
                NamedSimpleSpec {
                    name: "logistic".to_string(),
                    spec: SimpleModelSpec::logistic(simple_sgd),
                },
            ],
            distillation: DistillationStage {
                temperatures: crate::simple::default_temperature_grid(),
            },
            weight_net: WeightNetSpec::default(),
            seeds: vec![1, 2, 3],
            error_eval: ErrorEvalSplit::Train,
            output_dir: PathBuf::from("profweight-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::Config("need at least one scheme".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("need at least one seed".into()));
        }
        if self.simple_models.is_empty() {
            return Err(Error::Config("need at least one simple model".into()));
        }
        if !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be finite".into()));
        }
        for (i, m) in self.simple_models.iter().enumerate() {
            if self.simple_models[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Config(format!(
                    "duplicate simple-model name '{}'",
                    m.name
                )));
            }
            m.spec.validate().map_err(|e| {
                Error::Config(format!("simple model '{}': {e}", m.name))
            })?;
        }
        if self.schemes.contains(&SchemeName::Distillation)
            && self.distillation.temperatures.is_empty()
        {
            return Err(Error::Config(
                "distillation scheme needs at least one temperature".into(),
            ));
        }
        self.complex.sgd.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.probes.sgd.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.weight_net.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }
}

/// Summary statistics of a weight vector, with hardness diagnostics when
/// the dataset carries ground-truth flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightStats {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub hard_mean: Option<f64>,
    pub easy_mean: Option<f64>,
    pub hardness_correlation: Option<f64>,
}

impl WeightStats {
    pub fn from_weights(weights: &WeightVector, d_s: &Dataset) -> Self {
        let w = weights.weights();
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = weights.mean();
        let (mut hard_mean, mut easy_mean, mut correlation) = (None, None, None);
        if let Some(flags) = &d_s.hard_flags {
            let hard: Vec<f64> = w
                .iter()
                .zip(flags)
                .filter(|(_, &f)| f)
                .map(|(&x, _)| x)
                .collect();
            let easy: Vec<f64> = w
                .iter()
                .zip(flags)
                .filter(|(_, &f)| !f)
                .map(|(&x, _)| x)
                .collect();
            if !hard.is_empty() {
                hard_mean = Some(hard.iter().sum::<f64>() / hard.len() as f64);
            }
            if !easy.is_empty() {
                easy_mean = Some(easy.iter().sum::<f64>() / easy.len() as f64);
            }
            correlation = pearson(
                w,
                &flags.iter().map(|&f| f as u8 as f64).collect::<Vec<f64>>(),
            );
        }
        WeightStats {
            min,
            mean,
            max,
            hard_mean,
            easy_mean,
            hardness_correlation: correlation,
        }
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// One (scheme, simple model, seed) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scheme: SchemeName,
    pub model_name: String,
    pub seed: u64,
    pub holdout_accuracy: f64,
    pub validation_accuracy: f64,
    pub simple_error_e_s: Option<f64>,
    pub selected_units: Option<Vec<String>>,
    pub weight_stats: Option<WeightStats>,
    pub distill_temperature: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeErrorEntry {
    pub unit_name: String,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub complex_train_accuracy: f64,
    pub complex_holdout_accuracy: f64,
    pub probe_errors: Vec<ProbeErrorEntry>,
    pub cells: Vec<CellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: SchemeName,
    pub model_name: String,
    pub num_seeds: usize,
    pub mean_holdout_accuracy: f64,
    /// Sample standard deviation over seeds (0 when only one seed ran).
    pub stddev_holdout_accuracy: f64,
}

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub aggregates: Vec<AggregateRow>,
}

impl ExperimentReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        serialize::write_json_file(self, path)
    }

    /// Load a report, recomputing the aggregates from the per-seed rows and
    /// verifying they match the stored ones within 1e-12.
    pub fn load(path: &Path) -> Result<Self> {
        let report: ExperimentReport = serialize::read_json_artifact(path, "profweight run")?;
        if report.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::MalformedArtifact {
                path: path.display().to_string(),
                reason: format!("unsupported report version {}", report.format_version),
            });
        }
        let recomputed = compute_aggregates(&report.config, &report.seeds);
        if recomputed.len() != report.aggregates.len() {
            return Err(Error::MalformedArtifact {
                path: path.display().to_string(),
                reason: "aggregate row count mismatch".into(),
            });
        }
        for (a, b) in report.aggregates.iter().zip(&recomputed) {
            let same = a.scheme == b.scheme
                && a.model_name == b.model_name
                && a.num_seeds == b.num_seeds
                && (a.mean_holdout_accuracy - b.mean_holdout_accuracy).abs() < 1e-12
                && (a.stddev_holdout_accuracy - b.stddev_holdout_accuracy).abs() < 1e-12;
            if !same {
                return Err(Error::MalformedArtifact {
                    path: path.display().to_string(),
                    reason: format!(
                        "stored aggregate for {} / {} does not match per-seed rows",
                        a.scheme.as_str(),
                        a.model_name
                    ),
                });
            }
        }
        Ok(report)
    }

    /// Human-readable table: schemes down, simple models across.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Holdout accuracy, mean over seeds (± sample std)\n\n");
        let models: Vec<&str> = self
            .config
            .simple_models
            .iter()
            .map(|m| m.name.as_str())
            .collect();
        out.push_str(&format!("{:<16}", "scheme"));
        for m in &models {
            out.push_str(&format!("{m:>24}"));
        }
        out.push('\n');
        for scheme in &self.config.schemes {
            out.push_str(&format!("{:<16}", scheme.as_str()));
            for m in &models {
                let row = self
                    .aggregates
                    .iter()
                    .find(|a| a.scheme == *scheme && a.model_name == *m);
                match row {
                    Some(a) => out.push_str(&format!(
                        "{:>24}",
                        format!(
                            "{:.4} (±{:.4})",
                            a.mean_holdout_accuracy, a.stddev_holdout_accuracy
                        )
                    )),
                    None => out.push_str(&format!("{:>24}", "-")),
                }
            }
            out.push('\n');
        }
        out.push('\n');
        for seed_report in &self.seeds {
            out.push_str(&format!(
                "seed {}: complex train acc {:.4}, holdout acc {:.4}\n",
                seed_report.seed,
                seed_report.complex_train_accuracy,
                seed_report.complex_holdout_accuracy
            ));
            out.push_str("  probe errors: ");
            let entries: Vec<String> = seed_report
                .probe_errors
                .iter()
                .map(|p| format!("{}={:.4}", p.unit_name, p.error))
                .collect();
            out.push_str(&entries.join(", "));
            out.push('\n');
        }
        out
    }
}

/// Mean and sample standard deviation per (scheme, model), in config order.
pub fn compute_aggregates(config: &ExperimentConfig, seeds: &[SeedReport]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for scheme in &config.schemes {
        for model in &config.simple_models {
            let values: Vec<f64> = seeds
                .iter()
                .flat_map(|s| {
                    s.cells
                        .iter()
                        .filter(|c| c.scheme == *scheme && c.model_name == model.name)
                        .map(|c| c.holdout_accuracy)
                })
                .collect();
            if values.is_empty() {
                continue;
            }
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let stddev = if n > 1 {
                (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            rows.push(AggregateRow {
                scheme: *scheme,
                model_name: model.name.clone(),
                num_seeds: n,
                mean_holdout_accuracy: mean,
                stddev_holdout_accuracy: stddev,
            });
        }
    }
    rows
}

/// Materialize the dataset and splits for one experiment seed. Synthetic
/// data and the split shuffle both mix the experiment seed, so different
/// seeds are independent replicates.
pub fn prepare_data(config: &ExperimentConfig, seed: u64) -> Result<(Dataset, Splits)> {
    let dataset = match &config.dataset {
        DatasetSource::Synthetic {
            m,
            noise_rate,
            seed: data_seed,
        } => data::synth_hard_regions(*m, *noise_rate, mix_seed(*data_seed, seed))?,
        DatasetSource::Csv {
            path,
            label_column,
            header,
        } => data::load_csv(path, label_column, *header)?.0,
    };
    let plan = SplitPlan {
        seed: mix_seed(config.split.seed, seed),
        ..config.split.clone()
    };
    let splits = data::split(&dataset, &plan)?;
    Ok((dataset, splits))
}

pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed-{seed}"))
}

pub fn model_path(dir: &Path) -> PathBuf {
    dir.join("model.json")
}

pub fn probes_path(dir: &Path) -> PathBuf {
    dir.join("probes.json")
}

pub fn weights_path(dir: &Path, scheme: SchemeName, model_name: &str) -> PathBuf {
    dir.join(format!("weights-{}-{model_name}.csv", scheme.as_str()))
}

pub fn simple_model_path(dir: &Path, scheme: SchemeName, model_name: &str) -> PathBuf {
    dir.join(format!("simple-{}-{model_name}.json", scheme.as_str()))
}

pub fn tree_text_path(dir: &Path, scheme: SchemeName, model_name: &str) -> PathBuf {
    dir.join(format!("simple-{}-{model_name}.txt", scheme.as_str()))
}

/// Train the complex model for one seed and write `model.json`.
pub fn stage_train_complex(
    config: &ExperimentConfig,
    seed: u64,
    splits: &Splits,
    dir: &Path,
) -> Result<LayeredModel> {
    let cfg = config.complex.sgd.with_mixed_seed(seed);
    let mut model = LayeredModel::build(
        splits.d_n.dim(),
        config.complex.layers.clone(),
        splits.d_n.num_classes(),
        cfg.seed,
    )?;
    model.train(&splits.d_n, &cfg)?;
    std::fs::create_dir_all(dir)?;
    model.save(&model_path(dir))?;
    Ok(model)
}

/// Train the probe set for one seed, record each probe's error on the
/// configured evaluation split, and write `probes.json`.
pub fn stage_train_probes(
    config: &ExperimentConfig,
    seed: u64,
    model: &LayeredModel,
    splits: &Splits,
    dir: &Path,
) -> Result<Vec<Probe>> {
    let units = config
        .probes
        .units
        .clone()
        .unwrap_or_else(|| model.unit_names());
    let cfg = config.probes.sgd.with_mixed_seed(seed);
    let mut probes = train_probes(model, &units, &splits.d_n, &cfg)?;
    if config.probes.attach_output_head {
        probes.push(Probe::output_head(model));
    }
    let eval_d = error_eval_split(config, splits);
    for probe in &mut probes {
        probe_error(probe, model, eval_d)?;
    }
    std::fs::create_dir_all(dir)?;
    crate::probes::save_probes(&probes, &probes_path(dir))?;
    Ok(probes)
}

fn error_eval_split<'a>(config: &ExperimentConfig, splits: &'a Splits) -> &'a Dataset {
    match config.error_eval {
        ErrorEvalSplit::Train => &splits.d_s,
        ErrorEvalSplit::Validation => &splits.validation,
    }
}

/// Weights for one (scheme, model) cell, plus pipeline diagnostics.
pub struct WeightOutcome {
    pub weights: WeightVector,
    pub e_s: Option<f64>,
    pub selected_units: Option<Vec<String>>,
    pub selection_errors: Option<Vec<ProbeErrorEntry>>,
}

/// Compute the weight vector a scheme assigns to D_S, writing the CSV.
/// `Standard` and `Distillation` have no weight vector and return uniform
/// weights without writing anything.
#[allow(clippy::too_many_arguments)]
pub fn stage_compute_weights(
    config: &ExperimentConfig,
    seed: u64,
    model: &LayeredModel,
    probes: &[Probe],
    splits: &Splits,
    scheme: SchemeName,
    named: &NamedSimpleSpec,
    dir: &Path,
) -> Result<WeightOutcome> {
    let d_s = &splits.d_s;
    match scheme {
        SchemeName::Standard | SchemeName::Distillation => Ok(WeightOutcome {
            weights: WeightVector::uniform(d_s.len()),
            e_s: None,
            selected_units: None,
            selection_errors: None,
        }),
        SchemeName::Confweight => {
            let weights = conf_weights(model, d_s)?;
            weights.save_csv(&weights_path(dir, scheme, &named.name))?;
            Ok(WeightOutcome {
                weights,
                e_s: None,
                selected_units: None,
                selection_errors: None,
            })
        }
        SchemeName::ProfweightAuc | SchemeName::ProfweightNn => {
            let spec = seeded_simple_spec(named, seed);
            let standard = spec.train_unweighted(d_s)?;
            let eval_d = error_eval_split(config, splits);
            let e_s = standard.evaluate(eval_d)?.error;
            let probe_errors: Vec<f64> = probes
                .iter()
                .map(|p| {
                    p.error_on_ds
                        .ok_or_else(|| Error::InvalidArgument(format!(
                            "probe '{}' has no recorded error; run train-probes first",
                            p.unit_name
                        )))
                })
                .collect::<Result<_>>()?;
            let mut selection = select_probes(&probe_errors, e_s, config.alpha)?;
            if let Some(lowest) = &config.lowest_unit {
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
                        config.alpha
                    ),
                });
            }
            let selected_units: Vec<String> = selection
                .selected
                .iter()
                .map(|&u| probes[u].unit_name.clone())
                .collect();
            let profile = build_profile(model, probes, &selected_units, d_s)?;
            let weights = match scheme {
                SchemeName::ProfweightAuc => auc_weights(&profile)?,
                SchemeName::ProfweightNn => {
                    let mut net_spec = config.weight_net.clone();
                    net_spec.beta_sgd = seeded_simple_spec(named, seed).sgd;
                    net_spec.w_sgd = net_spec.w_sgd.with_mixed_seed(seed);
                    learn_weights_nn(&profile, d_s, &spec, &net_spec)?.0
                }
                _ => unreachable!(),
            };
            weights.save_csv(&weights_path(dir, scheme, &named.name))?;
            Ok(WeightOutcome {
                weights,
                e_s: Some(e_s),
                selected_units: Some(selected_units),
                selection_errors: Some(
                    probes
                        .iter()
                        .zip(&probe_errors)
                        .map(|(p, &e)| ProbeErrorEntry {
                            unit_name: p.unit_name.clone(),
                            error: e,
                        })
                        .collect(),
                ),
            })
        }
    }
}

/// The simple-model spec with its SGD seed mixed for this experiment seed.
pub fn seeded_simple_spec(named: &NamedSimpleSpec, seed: u64) -> SimpleModelSpec {
    let mut spec = named.spec.clone();
    spec.sgd = spec.sgd.with_mixed_seed(seed);
    spec
}

/// Train the cell's simple model from an already-computed weight vector
/// (standard and weighted schemes) or by distillation, and write its JSON.
#[allow(clippy::too_many_arguments)]
pub fn stage_train_simple(
    config: &ExperimentConfig,
    seed: u64,
    model: &LayeredModel,
    splits: &Splits,
    scheme: SchemeName,
    named: &NamedSimpleSpec,
    weights: &WeightVector,
    dir: &Path,
) -> Result<(SimpleModel, Option<f64>)> {
    let d_s = &splits.d_s;
    let spec = seeded_simple_spec(named, seed);
    let (simple, temperature) = match scheme {
        SchemeName::Distillation => {
            let teacher = model.representation_matrix(LOGITS_UNIT, d_s)?;
            let mut best: Option<(f64, f64, SimpleModel)> = None;
            for &t in &config.distillation.temperatures {
                let cfg = DistillConfig::new(t, teacher.clone())?;
                let student = distill(d_s, &cfg, &spec)?;
                let val_acc = student.evaluate(&splits.validation)?.accuracy;
                let better = match &best {
                    None => true,
                    Some((acc, _, _)) => val_acc > *acc,
                };
                if better {
                    best = Some((val_acc, t, student));
                }
            }
            let (_, t, student) = best.expect("at least one temperature");
            (student, Some(t))
        }
        _ => (spec.train_weighted(d_s, weights.weights())?, None),
    };
    simple.save(&simple_model_path(dir, scheme, &named.name))?;
    if let SimpleModel::Tree(tree) = &simple {
        let names = d_s.feature_names.as_deref();
        std::fs::write(
            tree_text_path(dir, scheme, &named.name),
            tree.render_text(names),
        )?;
    }
    Ok((simple, temperature))
}

/// Run one (scheme, model) cell end to end for a seed.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    config: &ExperimentConfig,
    seed: u64,
    model: &LayeredModel,
    probes: &[Probe],
    splits: &Splits,
    scheme: SchemeName,
    named: &NamedSimpleSpec,
    dir: &Path,
) -> Result<CellResult> {
    let weight_outcome =
        stage_compute_weights(config, seed, model, probes, splits, scheme, named, dir)?;
    let (simple, temperature) = stage_train_simple(
        config,
        seed,
        model,
        splits,
        scheme,
        named,
        &weight_outcome.weights,
        dir,
    )?;
    let holdout = simple.evaluate(&splits.holdout)?.accuracy;
    let validation = simple.evaluate(&splits.validation)?.accuracy;
    let weight_stats = match scheme {
        SchemeName::Standard | SchemeName::Distillation => None,
        _ => Some(WeightStats::from_weights(&weight_outcome.weights, &splits.d_s)),
    };
    Ok(CellResult {
        scheme,
        model_name: named.name.clone(),
        seed,
        holdout_accuracy: holdout,
        validation_accuracy: validation,
        simple_error_e_s: weight_outcome.e_s,
        selected_units: weight_outcome.selected_units,
        weight_stats,
        distill_temperature: temperature,
    })
}

/// Run the full pipeline for one seed and write every artifact under
/// `out_dir/seed-<seed>/`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, out_dir: &Path) -> Result<SeedReport> {
    let dir = seed_dir(out_dir, seed);
    std::fs::create_dir_all(&dir)?;
    let (_, splits) = prepare_data(config, seed).map_err(|e| e.in_stage("prepare-data"))?;
    let model = stage_train_complex(config, seed, &splits, &dir)
        .map_err(|e| e.in_stage("train-complex"))?;
    let probes = stage_train_probes(config, seed, &model, &splits, &dir)
        .map_err(|e| e.in_stage("train-probes"))?;
    let mut cells = Vec::new();
    for named in &config.simple_models {
        for &scheme in &config.schemes {
            let cell = run_cell(config, seed, &model, &probes, &splits, scheme, named, &dir)
                .map_err(|e| {
                    e.in_stage(format!(
                        "scheme {} / model {} / seed {seed}",
                        scheme.as_str(),
                        named.name
                    ))
                })?;
            cells.push(cell);
        }
    }
    Ok(SeedReport {
        seed,
        complex_train_accuracy: model.train_accuracy().unwrap_or(0.0),
        complex_holdout_accuracy: model.accuracy_on(&splits.holdout)?,
        probe_errors: probes
            .iter()
            .map(|p| ProbeErrorEntry {
                unit_name: p.unit_name.clone(),
                error: p.error_on_ds.unwrap_or(f64::NAN),
            })
            .collect(),
        cells,
    })
}

/// Run the whole experiment: every seed, then aggregate, then write
/// `report.json` and `report.txt` under `out_dir`. Partial per-seed results
/// are flushed to disk before any later stage can abort.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut seeds = Vec::new();
    for &seed in &config.seeds {
        let seed_report = run_seed(config, seed, out_dir)?;
        serialize::write_json_file(&seed_report, &seed_dir(out_dir, seed).join("seed-report.json"))?;
        seeds.push(seed_report);
    }
    let aggregates = compute_aggregates(config, &seeds);
    let report = ExperimentReport {
        format_version: REPORT_FORMAT_VERSION,
        config: config.clone(),
        seeds,
        aggregates,
    };
    report.save(&out_dir.join("report.json"))?;
    std::fs::write(out_dir.join("report.txt"), report.render_text())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[allow(clippy::field_reassign_with_default)]
    fn tiny_config() -> ExperimentConfig {
        let mut config = ExperimentConfig::default();
        config.dataset = DatasetSource::Synthetic {
            m: 400,
            noise_rate: 0.3,
            seed: 5,
        };
        config.complex.layers = vec![LayerSpec::relu("h1", 8), LayerSpec::relu("h2", 8)];
        config.complex.sgd.epochs = 25;
        config.probes.sgd.epochs = 15;
        config.schemes = vec![SchemeName::Standard, SchemeName::Confweight];
        config.simple_models = vec![NamedSimpleSpec {
            name: "logistic".to_string(),
            spec: SimpleModelSpec::logistic(SgdConfig {
                epochs: 20,
                ..SgdConfig::default()
            }),
        }];
        config.seeds = vec![1];
        config
    }

    #[test]
    fn config_toml_round_trip() {
        let config = ExperimentConfig::default();
        let text = config.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn run_produces_expected_row_count_and_replays_byte_identically() {
        let config = tiny_config();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let a = run_experiment(&config, dir_a.path()).unwrap();
        let _b = run_experiment(&config, dir_b.path()).unwrap();
        assert_eq!(a.seeds[0].cells.len(), 2);
        let text_a = std::fs::read(dir_a.path().join("report.json")).unwrap();
        let text_b = std::fs::read(dir_b.path().join("report.json")).unwrap();
        assert_eq!(text_a, text_b);
    }

    #[test]
    fn report_load_verifies_aggregates() {
        let config = tiny_config();
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&config, dir.path()).unwrap();
        let report = ExperimentReport::load(&dir.path().join("report.json")).unwrap();
        assert_eq!(report.aggregates.len(), 2);

        // Corrupt an aggregate and make sure loading fails.
        let mut corrupted = report.clone();
        corrupted.aggregates[0].mean_holdout_accuracy += 0.25;
        let bad_path = dir.path().join("bad.json");
        corrupted.save(&bad_path).unwrap();
        assert!(matches!(
            ExperimentReport::load(&bad_path).unwrap_err(),
            Error::MalformedArtifact { .. }
        ));
    }

    #[test]
    fn duplicate_model_names_rejected() {
        let mut config = tiny_config();
        config.simple_models.push(config.simple_models[0].clone());
        assert!(matches!(config.validate().unwrap_err(), Error::Config(_)));
    }
}
