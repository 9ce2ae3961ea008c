//! C ABI over the profweight pipeline.
//!
//! Every handle is opaque and owned by the side that created it; free
//! handles with the matching `pw_*_free`. Functions return [`PwStatus`];
//! on failure `pw_last_error_message` describes the most recent error for
//! the calling thread. Pointer arguments must be valid for the duration of
//! the call; output handles are written only on `PW_OK`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use profweight::data::{self, Dataset, LabelColumn, SplitMode, SplitPlan};
use profweight::error::Error;
use profweight::model::{LayerSpec, LayeredModel};
use profweight::numerics::{Matrix, SgdConfig};
use profweight::probes::{self, Probe};
use profweight::simple::{SimpleKind, SimpleModel, SimpleModelSpec};
use profweight::theory::{bayes_error_discrete, lemma_grid_verify, tv_distance, DiscreteDistribution};
use profweight::weighting::{conf_weights, profweight, ProfWeightOptions, SchemeTag, WeightVector};

/// Status codes mirroring the CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwStatus {
    PwOk = 0,
    PwErr = 1,
    PwErrConfig = 2,
    PwErrData = 3,
    PwErrEmptyProbeSet = 4,
    PwErrDivergence = 5,
    PwErrTheory = 6,
    PwErrNullArgument = 7,
    PwErrPanic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(error: &Error) -> PwStatus {
    match error.exit_code() {
        2 => PwStatus::PwErrConfig,
        3 => PwStatus::PwErrData,
        4 => PwStatus::PwErrEmptyProbeSet,
        5 => PwStatus::PwErrDivergence,
        6 => PwStatus::PwErrTheory,
        _ => PwStatus::PwErr,
    }
}

fn fail(error: Error) -> PwStatus {
    let status = status_of(&error);
    set_last_error(&error.to_string());
    status
}

fn guard(body: impl FnOnce() -> PwStatus) -> PwStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PwStatus::PwErrPanic
        }
    }
}

/// Message describing the calling thread's most recent error. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

macro_rules! require {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_last_error(concat!("null argument: ", stringify!($ptr)));
            return PwStatus::PwErrNullArgument;
        }
    };
}

unsafe fn c_path<'a>(path: *const c_char) -> Result<&'a Path, Error> {
    let raw = unsafe { CStr::from_ptr(path) };
    raw.to_str()
        .map(Path::new)
        .map_err(|_| Error::InvalidArgument("path is not valid UTF-8".into()))
}

/// Trainer settings shared by every differentiable model in the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PwSgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2_penalty: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl From<PwSgdConfig> for SgdConfig {
    fn from(cfg: PwSgdConfig) -> SgdConfig {
        SgdConfig {
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            epochs: cfg.epochs,
            l2_penalty: cfg.l2_penalty,
            momentum: cfg.momentum,
            seed: cfg.seed,
        }
    }
}

/// Default trainer settings.
#[no_mangle]
pub extern "C" fn pw_sgd_default() -> PwSgdConfig {
    let cfg = SgdConfig::default();
    PwSgdConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        l2_penalty: cfg.l2_penalty,
        momentum: cfg.momentum,
        seed: cfg.seed,
    }
}

/// Opaque dataset handle.
pub struct PwDataset(Dataset);
/// Opaque frozen-model handle.
pub struct PwModel(LayeredModel);
/// Opaque probe-set handle.
pub struct PwProbes(Vec<Probe>);
/// Opaque weight-vector handle.
pub struct PwWeights(WeightVector);
/// Opaque simple-model handle.
pub struct PwSimpleModel(SimpleModel);

fn emit<T>(out: *mut *mut T, value: T) -> PwStatus {
    unsafe { *out = Box::into_raw(Box::new(value)) };
    PwStatus::PwOk
}

/// Build a dataset from a row-major feature array and a label array.
///
/// # Safety
/// `features` must hold `rows * cols` doubles, `labels` must hold `rows`
/// entries below `num_classes`, and `out` must be a valid output slot.
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_from_arrays(
    features: *const f64,
    rows: usize,
    cols: usize,
    labels: *const usize,
    num_classes: usize,
    out: *mut *mut PwDataset,
) -> PwStatus {
    require!(features);
    require!(labels);
    require!(out);
    guard(|| {
        let data = unsafe { std::slice::from_raw_parts(features, rows * cols) }.to_vec();
        let labels = unsafe { std::slice::from_raw_parts(labels, rows) }.to_vec();
        let matrix = match Matrix::from_vec(rows, cols, data) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match Dataset::new(matrix, labels, num_classes, "ffi") {
            Ok(d) => emit(out, PwDataset(d)),
            Err(e) => fail(e),
        }
    })
}

/// Generate the synthetic hard-regions dataset.
///
/// # Safety
/// `out` must be a valid output slot.
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_synth_hard_regions(
    m: usize,
    noise_rate: f64,
    seed: u64,
    out: *mut *mut PwDataset,
) -> PwStatus {
    require!(out);
    guard(|| match data::synth_hard_regions(m, noise_rate, seed) {
        Ok(d) => emit(out, PwDataset(d)),
        Err(e) => fail(e),
    })
}

/// Load a CSV dataset; the label column is given by index.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid output slot.
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_load_csv(
    path: *const c_char,
    label_column: usize,
    has_header: bool,
    out: *mut *mut PwDataset,
) -> PwStatus {
    require!(path);
    require!(out);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match data::load_csv(path, &LabelColumn::Index(label_column), has_header) {
            Ok((d, _report)) => emit(out, PwDataset(d)),
            Err(e) => fail(e),
        }
    })
}

/// Number of rows.
///
/// # Safety
/// `dataset` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_len(dataset: *const PwDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.0.len()
}

/// Feature dimension.
///
/// # Safety
/// `dataset` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_dim(dataset: *const PwDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.0.dim()
}

/// Four-way split (complex-train, simple-train, validation, holdout).
///
/// # Safety
/// All five handle arguments must be valid; each output slot receives a new
/// dataset the caller must free.
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_split(
    dataset: *const PwDataset,
    f_complex: f64,
    f_simple: f64,
    f_validation: f64,
    f_holdout: f64,
    seed: u64,
    sequential: bool,
    out_complex: *mut *mut PwDataset,
    out_simple: *mut *mut PwDataset,
    out_validation: *mut *mut PwDataset,
    out_holdout: *mut *mut PwDataset,
) -> PwStatus {
    require!(dataset);
    require!(out_complex);
    require!(out_simple);
    require!(out_validation);
    require!(out_holdout);
    guard(|| {
        let plan = SplitPlan {
            mode: if sequential {
                SplitMode::Sequential
            } else {
                SplitMode::Random
            },
            fractions: [f_complex, f_simple, f_validation, f_holdout],
            seed,
        };
        match data::split(&unsafe { &*dataset }.0, &plan) {
            Ok(s) => {
                emit(out_complex, PwDataset(s.d_n));
                emit(out_simple, PwDataset(s.d_s));
                emit(out_validation, PwDataset(s.validation));
                emit(out_holdout, PwDataset(s.holdout))
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `dataset` must come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn pw_dataset_free(dataset: *mut PwDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Build and train the complex model on `d_n`, freezing it. Hidden units
/// are named h1..hk.
///
/// # Safety
/// `hidden_widths` must hold `num_hidden` entries; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_model_train(
    d_n: *const PwDataset,
    hidden_widths: *const usize,
    num_hidden: usize,
    cfg: PwSgdConfig,
    out: *mut *mut PwModel,
) -> PwStatus {
    require!(d_n);
    require!(hidden_widths);
    require!(out);
    guard(|| {
        let d_n = &unsafe { &*d_n }.0;
        let widths = unsafe { std::slice::from_raw_parts(hidden_widths, num_hidden) };
        let layers: Vec<LayerSpec> = widths
            .iter()
            .enumerate()
            .map(|(i, &w)| LayerSpec::relu(format!("h{}", i + 1), w))
            .collect();
        let cfg: SgdConfig = cfg.into();
        let mut model = match LayeredModel::build(d_n.dim(), layers, d_n.num_classes(), cfg.seed) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match model.train(d_n, &cfg) {
            Ok(()) => emit(out, PwModel(model)),
            Err(e) => fail(e),
        }
    })
}

/// Holdout accuracy of the frozen model.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_model_accuracy(
    model: *const PwModel,
    dataset: *const PwDataset,
    out: *mut f64,
) -> PwStatus {
    require!(model);
    require!(dataset);
    require!(out);
    guard(
        || match unsafe { &*model }.0.accuracy_on(&unsafe { &*dataset }.0) {
            Ok(acc) => {
                unsafe { *out = acc };
                PwStatus::PwOk
            }
            Err(e) => fail(e),
        },
    )
}

/// # Safety
/// `model` and `path` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_model_save_json(
    model: *const PwModel,
    path: *const c_char,
) -> PwStatus {
    require!(model);
    require!(path);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match unsafe { &*model }.0.save(path) {
            Ok(()) => PwStatus::PwOk,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_model_load_json(
    path: *const c_char,
    out: *mut *mut PwModel,
) -> PwStatus {
    require!(path);
    require!(out);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match LayeredModel::load(path) {
            Ok(m) => emit(out, PwModel(m)),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn pw_model_free(model: *mut PwModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Train probes on every hidden unit of the frozen model, optionally
/// appending the model's own softmax head as the final probe, then record
/// each probe's error on `eval`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_probes_train(
    model: *const PwModel,
    d_n: *const PwDataset,
    eval: *const PwDataset,
    cfg: PwSgdConfig,
    attach_output_head: bool,
    out: *mut *mut PwProbes,
) -> PwStatus {
    require!(model);
    require!(d_n);
    require!(eval);
    require!(out);
    guard(|| {
        let model = &unsafe { &*model }.0;
        let cfg: SgdConfig = cfg.into();
        let mut trained =
            match probes::train_probes(model, &model.unit_names(), &unsafe { &*d_n }.0, &cfg) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
        if attach_output_head {
            trained.push(Probe::output_head(model));
        }
        for probe in &mut trained {
            if let Err(e) = probes::probe_error(probe, model, &unsafe { &*eval }.0) {
                return fail(e);
            }
        }
        emit(out, PwProbes(trained))
    })
}

/// Number of probes in the set.
///
/// # Safety
/// `probes` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pw_probes_count(probes: *const PwProbes) -> usize {
    if probes.is_null() {
        return 0;
    }
    unsafe { &*probes }.0.len()
}

/// Copy the recorded probe errors into `errors_out` (length `len`).
///
/// # Safety
/// `errors_out` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pw_probes_errors(
    probes: *const PwProbes,
    errors_out: *mut f64,
    len: usize,
) -> PwStatus {
    require!(probes);
    require!(errors_out);
    guard(|| {
        let set = &unsafe { &*probes }.0;
        if len < set.len() {
            return fail(Error::InvalidArgument(format!(
                "buffer holds {len} entries, need {}",
                set.len()
            )));
        }
        for (i, probe) in set.iter().enumerate() {
            unsafe { *errors_out.add(i) = probe.error_on_ds.unwrap_or(f64::NAN) };
        }
        PwStatus::PwOk
    })
}

/// # Safety
/// `probes` and `path` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_probes_save_json(
    probes: *const PwProbes,
    path: *const c_char,
) -> PwStatus {
    require!(probes);
    require!(path);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match probes::save_probes(&unsafe { &*probes }.0, path) {
            Ok(()) => PwStatus::PwOk,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_probes_load_json(
    path: *const c_char,
    out: *mut *mut PwProbes,
) -> PwStatus {
    require!(path);
    require!(out);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match probes::load_probes(path) {
            Ok(p) => emit(out, PwProbes(p)),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `probes` must come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn pw_probes_free(probes: *mut PwProbes) {
    if !probes.is_null() {
        drop(unsafe { Box::from_raw(probes) });
    }
}

/// Simple-model kinds exposed through the C API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwSimpleKind {
    PwSimpleLogistic = 0,
    PwSimpleTree = 1,
    PwSimpleMlp = 2,
}

/// Simple-model spec. `mlp_hidden` may be NULL unless kind is the MLP.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PwSimpleSpec {
    pub kind: PwSimpleKind,
    pub tree_max_depth: usize,
    pub mlp_hidden: *const usize,
    pub mlp_hidden_len: usize,
    pub sgd: PwSgdConfig,
}

unsafe fn simple_spec(spec: &PwSimpleSpec) -> Result<SimpleModelSpec, Error> {
    let kind = match spec.kind {
        PwSimpleKind::PwSimpleLogistic => SimpleKind::Logistic,
        PwSimpleKind::PwSimpleTree => SimpleKind::Tree {
            max_depth: spec.tree_max_depth,
            min_leaf_weight: None,
        },
        PwSimpleKind::PwSimpleMlp => {
            if spec.mlp_hidden.is_null() {
                return Err(Error::InvalidArgument(
                    "mlp_hidden must be set for the MLP kind".into(),
                ));
            }
            let hidden =
                unsafe { std::slice::from_raw_parts(spec.mlp_hidden, spec.mlp_hidden_len) };
            SimpleKind::Mlp {
                hidden: hidden.to_vec(),
            }
        }
    };
    Ok(SimpleModelSpec {
        kind,
        sgd: spec.sgd.into(),
    })
}

/// Last-layer confidence weights for the true labels.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_conf_weights(
    model: *const PwModel,
    d_s: *const PwDataset,
    out: *mut *mut PwWeights,
) -> PwStatus {
    require!(model);
    require!(d_s);
    require!(out);
    guard(
        || match conf_weights(&unsafe { &*model }.0, &unsafe { &*d_s }.0) {
            Ok(w) => emit(out, PwWeights(w)),
            Err(e) => fail(e),
        },
    )
}

/// Run the full profile-average pipeline: select probes by margin `alpha`,
/// average their true-label confidences, and train the simple model under
/// those weights. Both the weight vector and the trained model are
/// returned.
///
/// # Safety
/// All pointers must be valid; `spec`'s embedded pointers must satisfy
/// their own contracts.
#[no_mangle]
pub unsafe extern "C" fn pw_profweight_auc(
    model: *const PwModel,
    probes: *const PwProbes,
    d_s: *const PwDataset,
    spec: PwSimpleSpec,
    alpha: f64,
    out_weights: *mut *mut PwWeights,
    out_model: *mut *mut PwSimpleModel,
) -> PwStatus {
    require!(model);
    require!(probes);
    require!(d_s);
    require!(out_weights);
    require!(out_model);
    guard(|| {
        let learner = match unsafe { simple_spec(&spec) } {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        match profweight(
            &unsafe { &*model }.0,
            &unsafe { &*probes }.0,
            &unsafe { &*d_s }.0,
            &learner,
            &ProfWeightOptions::auc(alpha),
            None,
        ) {
            Ok(outcome) => {
                emit(out_weights, PwWeights(outcome.weights));
                emit(out_model, PwSimpleModel(outcome.model))
            }
            Err(e) => fail(e),
        }
    })
}

/// Number of per-sample weights.
///
/// # Safety
/// `weights` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pw_weights_len(weights: *const PwWeights) -> usize {
    if weights.is_null() {
        return 0;
    }
    unsafe { &*weights }.0.len()
}

/// Mean weight.
///
/// # Safety
/// `weights` must be a live handle from this library (or NULL).
#[no_mangle]
pub unsafe extern "C" fn pw_weights_mean(weights: *const PwWeights) -> f64 {
    if weights.is_null() {
        return f64::NAN;
    }
    unsafe { &*weights }.0.mean()
}

/// Copy the weights into `out` (capacity `len`).
///
/// # Safety
/// `out` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pw_weights_copy(
    weights: *const PwWeights,
    out: *mut f64,
    len: usize,
) -> PwStatus {
    require!(weights);
    require!(out);
    guard(|| {
        let w = unsafe { &*weights }.0.weights();
        if len < w.len() {
            return fail(Error::InvalidArgument(format!(
                "buffer holds {len} entries, need {}",
                w.len()
            )));
        }
        unsafe { std::ptr::copy_nonoverlapping(w.as_ptr(), out, w.len()) };
        PwStatus::PwOk
    })
}

/// Write the two-column weight CSV.
///
/// # Safety
/// `weights` and `path` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_weights_save_csv(
    weights: *const PwWeights,
    path: *const c_char,
) -> PwStatus {
    require!(weights);
    require!(path);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match unsafe { &*weights }.0.save_csv(path) {
            Ok(()) => PwStatus::PwOk,
            Err(e) => fail(e),
        }
    })
}

/// Read a weight CSV produced by `pw_weights_save_csv`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_weights_load_csv(
    path: *const c_char,
    out: *mut *mut PwWeights,
) -> PwStatus {
    require!(path);
    require!(out);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match WeightVector::load_csv(path, SchemeTag::Standard) {
            Ok(w) => emit(out, PwWeights(w)),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `weights` must come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn pw_weights_free(weights: *mut PwWeights) {
    if !weights.is_null() {
        drop(unsafe { Box::from_raw(weights) });
    }
}

/// Train a simple model, optionally with per-sample weights (NULL means
/// uniform).
///
/// # Safety
/// `weights`, when non-NULL, must hold one entry per dataset row.
#[no_mangle]
pub unsafe extern "C" fn pw_simple_train(
    d_s: *const PwDataset,
    weights: *const f64,
    spec: PwSimpleSpec,
    out: *mut *mut PwSimpleModel,
) -> PwStatus {
    require!(d_s);
    require!(out);
    guard(|| {
        let d_s = &unsafe { &*d_s }.0;
        let learner = match unsafe { simple_spec(&spec) } {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let weights = if weights.is_null() {
            vec![1.0; d_s.len()]
        } else {
            unsafe { std::slice::from_raw_parts(weights, d_s.len()) }.to_vec()
        };
        match learner.train_weighted(d_s, &weights) {
            Ok(m) => emit(out, PwSimpleModel(m)),
            Err(e) => fail(e),
        }
    })
}

/// Accuracy of a simple model on a dataset.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_simple_accuracy(
    model: *const PwSimpleModel,
    dataset: *const PwDataset,
    out: *mut f64,
) -> PwStatus {
    require!(model);
    require!(dataset);
    require!(out);
    guard(
        || match unsafe { &*model }.0.evaluate(&unsafe { &*dataset }.0) {
            Ok(report) => {
                unsafe { *out = report.accuracy };
                PwStatus::PwOk
            }
            Err(e) => fail(e),
        },
    )
}

/// Predicted class for one feature vector of length `dim`.
///
/// # Safety
/// `x` must hold `dim` doubles; `class_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_simple_predict(
    model: *const PwSimpleModel,
    x: *const f64,
    dim: usize,
    class_out: *mut usize,
) -> PwStatus {
    require!(model);
    require!(x);
    require!(class_out);
    guard(|| {
        let x = unsafe { std::slice::from_raw_parts(x, dim) };
        let class = unsafe { &*model }.0.predict(x);
        unsafe { *class_out = class };
        PwStatus::PwOk
    })
}

/// # Safety
/// `model` and `path` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_simple_save_json(
    model: *const PwSimpleModel,
    path: *const c_char,
) -> PwStatus {
    require!(model);
    require!(path);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match unsafe { &*model }.0.save(path) {
            Ok(()) => PwStatus::PwOk,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_simple_load_json(
    path: *const c_char,
    out: *mut *mut PwSimpleModel,
) -> PwStatus {
    require!(path);
    require!(out);
    guard(|| {
        let path = match unsafe { c_path(path) } {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match SimpleModel::load(path) {
            Ok(m) => emit(out, PwSimpleModel(m)),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn pw_simple_free(model: *mut PwSimpleModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

unsafe fn distribution(ptr: *const f64, n: usize) -> Result<DiscreteDistribution, Error> {
    let masses = unsafe { std::slice::from_raw_parts(ptr, n) }.to_vec();
    DiscreteDistribution::new(masses)
}

/// Total variation distance between two strictly positive distributions of
/// dimension `n`.
///
/// # Safety
/// `p` and `q` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_tv_distance(
    p: *const f64,
    q: *const f64,
    n: usize,
    out: *mut f64,
) -> PwStatus {
    require!(p);
    require!(q);
    require!(out);
    guard(|| {
        let (p, q) = match (unsafe { distribution(p, n) }, unsafe { distribution(q, n) }) {
            (Ok(p), Ok(q)) => (p, q),
            (Err(e), _) | (_, Err(e)) => return fail(e),
        };
        match tv_distance(&p, &q) {
            Ok(v) => {
                unsafe { *out = v };
                PwStatus::PwOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Bayes error of the optimal classifier on a uniform two-class mixture.
///
/// # Safety
/// `p` and `q` must hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_bayes_error_discrete(
    p: *const f64,
    q: *const f64,
    n: usize,
    out: *mut f64,
) -> PwStatus {
    require!(p);
    require!(q);
    require!(out);
    guard(|| {
        let (p, q) = match (unsafe { distribution(p, n) }, unsafe { distribution(q, n) }) {
            (Ok(p), Ok(q)) => (p, q),
            (Err(e), _) | (_, Err(e)) => return fail(e),
        };
        match bayes_error_discrete(&p, &q) {
            Ok(v) => {
                unsafe { *out = v };
                PwStatus::PwOk
            }
            Err(e) => fail(e),
        }
    })
}

/// Grid-verify the ratio-sum identity; writes the number of violating grid
/// points (0 means the check passed).
///
/// # Safety
/// `p` and `r` must hold `n` doubles; `violations_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pw_lemma_grid_verify(
    p: *const f64,
    r: *const f64,
    n: usize,
    resolution: usize,
    violations_out: *mut usize,
) -> PwStatus {
    require!(p);
    require!(r);
    require!(violations_out);
    guard(|| {
        let (p, r) = match (unsafe { distribution(p, n) }, unsafe { distribution(r, n) }) {
            (Ok(p), Ok(r)) => (p, r),
            (Err(e), _) | (_, Err(e)) => return fail(e),
        };
        match lemma_grid_verify(&p, &r, resolution) {
            Ok(report) => {
                unsafe { *violations_out = report.violations.len() };
                PwStatus::PwOk
            }
            Err(e) => fail(e),
        }
    })
}
