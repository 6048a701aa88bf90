//! Experiment harness: sweep configs, cached datasets, estimator evaluation
//! and CSV / plot-data output.
//!
//! Randomness flows only from the config seed. Train and test seeds do not
//! depend on the sweep point, so every grid value sees the same underlying
//! states (common random numbers) and all estimators score identical
//! `(state, frequency)` pairs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dnn::{
    generate_dataset, init_model, load_model, predict_state, save_model, train, Dataset,
    DatasetSpec, Mlp, StateFamily, TrainConfig,
};
use crate::error::{QstError, Result};
use crate::lre::{lre_estimate_with, DesignMatrix};
use crate::measure::{MeasurementSuite, NoiseDistribution, NoiseSpec, SuiteDescriptor, SuiteKind};
use crate::mle::{mle_estimate, MleConfig};
use crate::qstate::{infidelity, mixture_purity, QubitCount};

pub const CSV_HEADER: &str =
    "experiment,estimator,sweep_param,sweep_value,mean_infidelity,std_error,n_samples,seconds";

/// Environment variable overriding the dataset/model cache directory.
pub const CACHE_ENV: &str = "QSTBENCH_CACHE_DIR";

pub const PAPER_TRAIN_SIZE: usize = 98_800;
pub const PAPER_TEST_SIZE: usize = 1_000;

/// Sentinel bound for the complete-suite, exact, noiseless corner.
pub const EXACTNESS_BOUND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Dnn,
    Mle,
    Lre,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Dnn => "dnn",
            Estimator::Mle => "mle",
            Estimator::Lre => "lre",
        }
    }
}

impl FromStr for Estimator {
    type Err = QstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnn" => Ok(Estimator::Dnn),
            "mle" => Ok(Estimator::Mle),
            "lre" => Ok(Estimator::Lre),
            other => Err(QstError::Config {
                field: "estimators".into(),
                reason: format!("unknown estimator `{other}` (dnn | mle | lre)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Grid values are copies per operator `S`.
    CopiesSweep,
    /// Grid values are set-prefix lengths `K`.
    SetsSweep,
    /// Grid values are isotropic noise ratios `xi`.
    NoiseSweep,
    /// Grid values are mixture weights `p`.
    PuritySweep,
    /// Grid values are uniform noise ratios; test states are the optical family.
    OpticalGeneralization,
}

impl ExperimentKind {
    fn sweep_param(self) -> &'static str {
        match self {
            ExperimentKind::CopiesSweep => "copies",
            ExperimentKind::SetsSweep => "sets",
            ExperimentKind::NoiseSweep | ExperimentKind::OpticalGeneralization => "xi",
            ExperimentKind::PuritySweep => "p",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = QstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "copies_sweep" => Ok(ExperimentKind::CopiesSweep),
            "sets_sweep" => Ok(ExperimentKind::SetsSweep),
            "noise_sweep" => Ok(ExperimentKind::NoiseSweep),
            "purity_sweep" => Ok(ExperimentKind::PuritySweep),
            "optical_generalization" => Ok(ExperimentKind::OpticalGeneralization),
            other => Err(field_err("experiment.kind", format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub name: String,
    pub kind: ExperimentKind,
    pub qubits: usize,
    /// `cube` or `mub`.
    pub suite: String,
    /// Set-prefix length; 0 means the complete suite.
    pub sets: usize,
    /// `pure` or `mixed:<p>`.
    pub family: String,
    pub grid: Vec<f64>,
    /// Test-set copies per operator, or `exact`.
    pub shots: String,
    /// Training copies: `matched` (same as test), `exact`, or a number.
    pub train_shots: String,
    /// `none`, `uniform:<xi>`, `gaussian:<x1>,<x2>,<x3>`.
    pub noise: String,
    /// Distribution used by noise sweeps.
    pub noise_distribution: String,
    pub estimators: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    /// Replaces train/test sizes with 98,800 / 1,000.
    pub paper_scale: bool,
    pub seed: u64,
    pub output_dir: String,
    /// Write wall-clock seconds into the CSV (breaks byte-identical reruns).
    pub record_timing: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            name: "copies-smoke".into(),
            kind: ExperimentKind::CopiesSweep,
            qubits: 2,
            suite: "cube".into(),
            sets: 0,
            family: "pure".into(),
            grid: vec![10.0, 100.0, 1000.0],
            shots: "100".into(),
            train_shots: "matched".into(),
            noise: "none".into(),
            noise_distribution: "uniform".into(),
            estimators: vec!["dnn".into(), "mle".into(), "lre".into()],
            train_size: 1_000,
            test_size: 200,
            paper_scale: false,
            seed: 1,
            output_dir: "qstbench-out".into(),
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// 0 picks 128 for 2-qubit pure states and 256 otherwise.
    pub hidden_width: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            beta1: d.beta1,
            beta2: d.beta2,
            adam_epsilon: d.adam_epsilon,
            batch_size: d.batch_size,
            epochs: d.epochs,
            hidden_width: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleSection {
    pub stop_gap: f64,
    pub max_iters: usize,
    pub accelerate: bool,
}

impl Default for MleSection {
    fn default() -> Self {
        let d = MleConfig::default();
        MleSection {
            stop_gap: d.stop_gap,
            max_iters: d.max_iters,
            accelerate: d.accelerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticalSection {
    pub basis_states: usize,
    pub gates_per_state: usize,
    pub suites: Vec<String>,
    /// Pretrained model for the cube suite; empty trains a `mixed:<train_p>` model.
    pub cube_model: String,
    pub mub_model: String,
    pub train_p: f64,
}

impl Default for OpticalSection {
    fn default() -> Self {
        OpticalSection {
            basis_states: 5,
            gates_per_state: 20,
            suites: vec!["cube".into(), "mub".into()],
            cube_model: String::new(),
            mub_model: String::new(),
            train_p: 0.99,
        }
    }
}

/// A complete, reproducible experiment description (TOML on disk).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub train: TrainSection,
    pub mle: MleSection,
    pub optical: OpticalSection,
}

/// Validated view of an [`ExperimentConfig`].
#[derive(Debug, Clone)]
struct Plan {
    qubits: QubitCount,
    suite: SuiteKind,
    sets: usize,
    family: StateFamily,
    shots: Option<u64>,
    train_shots: TrainShots,
    noise: NoiseSpec,
    noise_distribution: NoiseDistribution,
    estimators: Vec<Estimator>,
    train_size: usize,
    test_size: usize,
}

#[derive(Debug, Clone, Copy)]
enum TrainShots {
    Matched,
    Fixed(Option<u64>),
}

fn field_err(field: &str, reason: impl Into<String>) -> QstError {
    QstError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn parse_shots(field: &str, s: &str) -> Result<Option<u64>> {
    match s.trim() {
        "exact" => Ok(None),
        other => match other.parse::<u64>() {
            Ok(0) | Err(_) => Err(field_err(field, format!("`{other}` is not `exact` or a positive integer"))),
            Ok(n) => Ok(Some(n)),
        },
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| field_err("toml", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Default config for `kind`, as written by `config init`.
    pub fn template(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig::default();
        let e = &mut cfg.experiment;
        e.kind = kind;
        match kind {
            ExperimentKind::CopiesSweep => {}
            ExperimentKind::SetsSweep => {
                e.name = "sets-smoke".into();
                e.grid = (1..=9).map(f64::from).collect();
                e.shots = "exact".into();
            }
            ExperimentKind::NoiseSweep => {
                e.name = "noise-smoke".into();
                e.grid = vec![0.0, 0.01, 0.05, 0.1];
            }
            ExperimentKind::PuritySweep => {
                e.name = "purity-smoke".into();
                e.grid = (1..=9).map(|k| k as f64 / 10.0).collect();
            }
            ExperimentKind::OpticalGeneralization => {
                e.name = "optical-smoke".into();
                e.family = "mixed:0.99".into();
                e.grid = vec![0.0, 0.05, 0.1];
            }
        }
        cfg
    }

    fn plan(&self) -> Result<Plan> {
        let e = &self.experiment;
        if e.name.trim().is_empty() || e.name.contains([',', '\n']) {
            return Err(field_err("experiment.name", "must be non-empty without commas"));
        }
        let qubits = QubitCount::new(e.qubits).map_err(|err| field_err("experiment.qubits", err.to_string()))?;
        let suite: SuiteKind = e.suite.parse().map_err(|_| field_err("experiment.suite", format!("`{}`", e.suite)))?;
        if suite == SuiteKind::Mub && qubits != QubitCount::TWO {
            return Err(field_err("experiment.suite", "mub is only defined for 2 qubits"));
        }
        let complete = match suite {
            SuiteKind::Cube => 3usize.pow(e.qubits as u32),
            SuiteKind::Mub => 5,
        };
        let sets = if e.sets == 0 { complete } else { e.sets };
        if sets > complete {
            return Err(field_err("experiment.sets", format!("{sets} > {complete}")));
        }
        let family: StateFamily = e.family.parse().map_err(|err: QstError| field_err("experiment.family", err.to_string()))?;
        if matches!(family, StateFamily::Optical { .. }) {
            return Err(field_err("experiment.family", "optical states are test-only; use kind = optical_generalization"));
        }
        if e.grid.is_empty() {
            return Err(field_err("experiment.grid", "must be non-empty"));
        }
        if e.grid.iter().any(|v| !v.is_finite()) {
            return Err(field_err("experiment.grid", "values must be finite"));
        }
        match e.kind {
            ExperimentKind::CopiesSweep | ExperimentKind::SetsSweep => {
                if e.grid.iter().any(|v| *v < 1.0 || v.fract() != 0.0) {
                    return Err(field_err("experiment.grid", "values must be positive integers"));
                }
                if e.kind == ExperimentKind::SetsSweep && e.grid.iter().any(|v| *v as usize > complete) {
                    return Err(field_err("experiment.grid", format!("set counts must be <= {complete}")));
                }
            }
            ExperimentKind::NoiseSweep | ExperimentKind::OpticalGeneralization => {
                if e.grid.iter().any(|v| *v < 0.0) {
                    return Err(field_err("experiment.grid", "noise ratios must be >= 0"));
                }
            }
            ExperimentKind::PuritySweep => {
                if e.grid.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                    return Err(field_err("experiment.grid", "p values must lie in (0, 1)"));
                }
            }
        }
        let shots = parse_shots("experiment.shots", &e.shots)?;
        let train_shots = match e.train_shots.trim() {
            "matched" => TrainShots::Matched,
            other => TrainShots::Fixed(parse_shots("experiment.train_shots", other)?),
        };
        let noise: NoiseSpec = e.noise.parse().map_err(|err: QstError| field_err("experiment.noise", err.to_string()))?;
        let noise_distribution = match e.noise_distribution.as_str() {
            "uniform" => NoiseDistribution::Uniform,
            "gaussian" => NoiseDistribution::Gaussian,
            other => return Err(field_err("experiment.noise_distribution", format!("`{other}`"))),
        };
        if e.estimators.is_empty() {
            return Err(field_err("experiment.estimators", "must list at least one of dnn, mle, lre"));
        }
        let mut estimators = Vec::new();
        for name in &e.estimators {
            let est: Estimator = name.parse()?;
            if !estimators.contains(&est) {
                estimators.push(est);
            }
        }
        let (train_size, test_size) = if e.paper_scale {
            (PAPER_TRAIN_SIZE, PAPER_TEST_SIZE)
        } else {
            (e.train_size, e.test_size)
        };
        if test_size == 0 {
            return Err(field_err("experiment.test_size", "must be >= 1"));
        }
        if estimators.contains(&Estimator::Dnn) && train_size == 0 {
            return Err(field_err("experiment.train_size", "must be >= 1 when dnn is listed"));
        }
        let t = &self.train;
        if !(t.learning_rate >= 0.0) || t.batch_size == 0 || t.epochs == 0 {
            return Err(field_err("train", "learning_rate >= 0, batch_size >= 1 and epochs >= 1 required"));
        }
        if !(self.mle.stop_gap > 0.0) || self.mle.max_iters == 0 {
            return Err(field_err("mle", "stop_gap > 0 and max_iters >= 1 required"));
        }
        if e.kind == ExperimentKind::OpticalGeneralization {
            let o = &self.optical;
            if qubits != QubitCount::TWO {
                return Err(field_err("experiment.qubits", "the optical family is 2-qubit"));
            }
            if o.basis_states == 0 {
                return Err(field_err("optical.basis_states", "must be >= 1"));
            }
            if o.suites.is_empty() {
                return Err(field_err("optical.suites", "must list cube and/or mub"));
            }
            for s in &o.suites {
                s.parse::<SuiteKind>().map_err(|_| field_err("optical.suites", format!("`{s}`")))?;
            }
            if !(o.train_p > 0.0 && o.train_p < 1.0) {
                return Err(field_err("optical.train_p", "must lie in (0, 1)"));
            }
        }
        Ok(Plan {
            qubits,
            suite,
            sets,
            family,
            shots,
            train_shots,
            noise,
            noise_distribution,
            estimators,
            train_size,
            test_size,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    fn train_config(&self, qubits: QubitCount, family: &StateFamily) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_epsilon: t.adam_epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed: derive_seed(self.experiment.seed, "train-shuffle"),
            hidden_width: if t.hidden_width == 0 {
                TrainConfig::paper_hidden_width(qubits, family)
            } else {
                t.hidden_width
            },
        }
    }

    fn mle_config(&self) -> MleConfig {
        MleConfig {
            stop_gap: self.mle.stop_gap,
            max_iters: self.mle.max_iters,
            accelerate: self.mle.accelerate,
            ..MleConfig::default()
        }
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub estimator: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub mean_infidelity: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seconds: f64,
}

/// Mixture weight and directly computed purity of one purity-sweep population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityPoint {
    pub p: f64,
    pub purity: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub purity: Vec<PurityPoint>,
    /// Samples excluded because an estimator returned an error.
    pub failures: Vec<(String, f64, usize)>,
    pub artifacts: Vec<PathBuf>,
}

/// Stable 64-bit seed for a named purpose.
pub fn derive_seed(master: u64, purpose: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}:{purpose}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn content_hash(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..16])
}

/// Dataset and model cache with atomic (write-then-rename) stores.
#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    /// `QSTBENCH_CACHE_DIR` if set, otherwise `<output_dir>/cache`.
    pub fn for_output(output_dir: &Path) -> Self {
        let dir = std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| output_dir.join("cache"));
        Cache { dir }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Cache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{key}.{ext}"))
    }

    fn store(&self, target: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = target.with_extension(format!("tmp{}", std::process::id()));
        write(&tmp)?;
        fs::rename(&tmp, target)?;
        Ok(())
    }

    pub fn dataset(&self, spec: &DatasetSpec) -> Result<Dataset> {
        let path = self.path(&content_hash(&spec.to_manifest()), "qstdata");
        if path.exists() {
            if let Ok(ds) = Dataset::load(&path) {
                if &ds.spec == spec {
                    return Ok(ds);
                }
            }
        }
        let ds = generate_dataset(spec)?;
        self.store(&path, |tmp| ds.save(tmp))?;
        Ok(ds)
    }

    pub fn model(&self, data: &Dataset, cfg: &TrainConfig, init_seed: u64) -> Result<Mlp> {
        let manifest = model_manifest(&data.spec, cfg, init_seed);
        let path = self.path(&content_hash(&manifest), "dnnqst");
        if path.exists() {
            if let Ok(m) = load_model(&path) {
                if m.manifest() == manifest {
                    return Ok(m);
                }
            }
        }
        let init = init_model(data.feature_len(), cfg.hidden_width, data.target_len(), init_seed)?;
        let (mut model, _) = train(init, data, cfg)?;
        model.set_manifest(manifest);
        self.store(&path, |tmp| save_model(&model, tmp))?;
        Ok(model)
    }
}

pub fn model_manifest(spec: &DatasetSpec, cfg: &TrainConfig, init_seed: u64) -> String {
    format!("{}{}init_seed={init_seed}\n", spec.to_manifest(), cfg.to_manifest())
}

/// Per-sample infidelities of each estimator on a shared test set.
pub struct Evaluation {
    pub estimator: Estimator,
    pub infidelities: Vec<f64>,
    pub failed: usize,
    pub seconds: f64,
}

impl Evaluation {
    pub fn mean(&self) -> f64 {
        mean_and_stderr(&self.infidelities).0
    }
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Scores `estimator` on every row of `test` against its true state, using
/// the ideal `suite` for reconstruction.
pub fn evaluate(
    estimator: Estimator,
    test: &Dataset,
    suite: &MeasurementSuite,
    model: Option<&Mlp>,
    mle_cfg: &MleConfig,
) -> Result<Evaluation> {
    let start = Instant::now();
    let design = match estimator {
        Estimator::Lre => Some(DesignMatrix::new(suite)?),
        _ => None,
    };
    if estimator == Estimator::Dnn && model.is_none() {
        return Err(QstError::Config {
            field: "estimators".into(),
            reason: "dnn evaluation needs a model".into(),
        });
    }
    let outcomes: Vec<Option<f64>> = (0..test.len())
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<f64> {
                let freq = test.frequencies(i)?;
                let truth = test.rows[i].truth.as_ref().ok_or_else(|| {
                    QstError::ShapeMismatch("test rows need true states".into())
                })?;
                let est = match estimator {
                    Estimator::Dnn => predict_state(model.expect("checked above"), &freq)?,
                    Estimator::Mle => mle_estimate(&freq, suite, mle_cfg)?.state,
                    Estimator::Lre => lre_estimate_with(&freq, design.as_ref().expect("built above"))?,
                };
                infidelity(truth, &est)
            };
            run().ok()
        })
        .collect();
    let failed = outcomes.iter().filter(|o| o.is_none()).count();
    Ok(Evaluation {
        estimator,
        infidelities: outcomes.into_iter().flatten().collect(),
        failed,
        seconds: start.elapsed().as_secs_f64(),
    })
}

struct Point {
    value: f64,
    test: DatasetSpec,
    train: DatasetSpec,
}

fn points(cfg: &ExperimentConfig, plan: &Plan) -> Vec<Point> {
    let e = &cfg.experiment;
    let test_seed = derive_seed(e.seed, "test");
    let train_seed = derive_seed(e.seed, "train");
    let base_suite = SuiteDescriptor {
        kind: plan.suite,
        qubits: plan.qubits.get(),
        sets: plan.sets,
    };
    e.grid
        .iter()
        .map(|&value| {
            let mut suite = base_suite;
            let mut family = plan.family;
            let mut shots = plan.shots;
            let mut noise = plan.noise;
            match e.kind {
                ExperimentKind::CopiesSweep => shots = Some(value as u64),
                ExperimentKind::SetsSweep => suite.sets = value as usize,
                ExperimentKind::NoiseSweep => {
                    noise = NoiseSpec::isotropic(plan.noise_distribution, value).expect("validated")
                }
                ExperimentKind::PuritySweep => family = StateFamily::Mixed { p: value },
                ExperimentKind::OpticalGeneralization => unreachable!("handled separately"),
            }
            let train_shots = match plan.train_shots {
                TrainShots::Matched => shots,
                TrainShots::Fixed(s) => s,
            };
            Point {
                value,
                test: DatasetSpec {
                    suite,
                    family,
                    noise,
                    shots,
                    count: plan.test_size,
                    seed: test_seed,
                },
                train: DatasetSpec {
                    suite,
                    family,
                    noise,
                    shots: train_shots,
                    count: plan.train_size,
                    seed: train_seed,
                },
            }
        })
        .collect()
}

fn is_exact_corner(spec: &DatasetSpec, complete: usize) -> bool {
    spec.shots.is_none() && spec.noise.is_noiseless() && spec.suite.sets == complete
}

#[allow(clippy::too_many_arguments)]
fn score_point(
    cfg: &ExperimentConfig,
    plan: &Plan,
    cache: &Cache,
    sweep_param: &str,
    value: f64,
    test_spec: &DatasetSpec,
    train_spec: Option<(&DatasetSpec, StateFamily)>,
    model_override: Option<&Mlp>,
    report: &mut ExperimentReport,
) -> Result<()> {
    let suite = test_spec.suite.build()?;
    let test = cache.dataset(test_spec)?;
    let mle_cfg = cfg.mle_config();
    for &est in &plan.estimators {
        let trained: Option<Mlp>;
        let model = if est == Estimator::Dnn {
            match model_override {
                Some(m) => Some(m),
                None => {
                    let (spec, family) = train_spec.expect("train spec for dnn");
                    let data = cache.dataset(spec)?;
                    let tcfg = cfg.train_config(plan.qubits, &family);
                    trained = Some(cache.model(&data, &tcfg, derive_seed(cfg.experiment.seed, "init"))?);
                    trained.as_ref()
                }
            }
        } else {
            None
        };
        if let Some(m) = model {
            if m.input_dim() != suite.operator_count() {
                return Err(QstError::ShapeMismatch(format!(
                    "model input {} but suite has {} operators",
                    m.input_dim(),
                    suite.operator_count()
                )));
            }
        }
        let ev = evaluate(est, &test, &suite, model, &mle_cfg)?;
        if ev.infidelities.is_empty() {
            return Err(QstError::Sentinel(format!(
                "{} failed on all {} samples at {sweep_param}={value}",
                est.name(),
                test.len()
            )));
        }
        let (mean, se) = mean_and_stderr(&ev.infidelities);
        if ev.failed > 0 {
            report.failures.push((est.name().to_string(), value, ev.failed));
        }
        report.rows.push(ResultRow {
            experiment: cfg.experiment.name.clone(),
            estimator: est.name().to_string(),
            sweep_param: sweep_param.to_string(),
            sweep_value: value,
            mean_infidelity: mean.clamp(0.0, 1.0),
            std_error: se,
            n_samples: ev.infidelities.len(),
            seconds: if cfg.experiment.record_timing { ev.seconds } else { 0.0 },
        });
        if matches!(est, Estimator::Mle | Estimator::Lre)
            && is_exact_corner(test_spec, suite_complete_sets(&suite))
            && mean >= EXACTNESS_BOUND
        {
            return Err(QstError::Sentinel(format!(
                "{} mean infidelity {mean:e} >= {EXACTNESS_BOUND:e} on complete exact noiseless data",
                est.name()
            )));
        }
    }
    Ok(())
}

fn suite_complete_sets(suite: &MeasurementSuite) -> usize {
    suite.complete_set_count()
}

/// Runs a copies, sets, noise or purity sweep (or the optical protocol) and
/// writes `<name>.csv` and `<name>.dat` under the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let plan = cfg.plan()?;
    let out_dir = PathBuf::from(&cfg.experiment.output_dir);
    fs::create_dir_all(&out_dir)?;
    let cache = Cache::for_output(&out_dir);
    let mut report = ExperimentReport::default();

    if cfg.experiment.kind == ExperimentKind::OpticalGeneralization {
        run_optical(cfg, &plan, &cache, &mut report)?;
    } else {
        let param = cfg.experiment.kind.sweep_param();
        for point in points(cfg, &plan) {
            score_point(
                cfg,
                &plan,
                &cache,
                param,
                point.value,
                &point.test,
                Some((&point.train, point.train.family)),
                None,
                &mut report,
            )?;
            if cfg.experiment.kind == ExperimentKind::PuritySweep {
                report.purity.push(PurityPoint {
                    p: point.value,
                    purity: population_purity(&point.test)?,
                });
            }
        }
    }

    let stem = out_dir.join(&cfg.experiment.name);
    let csv = stem.with_extension("csv");
    emit_csv(&report.rows, &csv)?;
    let dat = stem.with_extension("dat");
    emit_plotdata(&report.rows, &dat)?;
    report.artifacts.extend([csv, dat]);
    if !report.purity.is_empty() {
        let path = out_dir.join(format!("{}_purity.csv", cfg.experiment.name));
        let mut text = String::from("p,purity\n");
        for pt in &report.purity {
            writeln!(text, "{},{}", pt.p, pt.purity).expect("string write");
        }
        fs::write(&path, text)?;
        report.artifacts.push(path);
    }
    Ok(report)
}

/// Mean direct purity `Tr(rho^2)` of the test population.
fn population_purity(spec: &DatasetSpec) -> Result<f64> {
    match spec.family {
        StateFamily::Mixed { p } => Ok(mixture_purity(p, 1 << spec.suite.qubits)),
        _ => {
            let states = crate::dnn::generate_states(spec)?;
            Ok(states.iter().map(|s| s.purity()).sum::<f64>() / states.len() as f64)
        }
    }
}

/// Rows over a purity grid; `cfg` must be a `purity_sweep`.
pub fn sweep_purity(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.experiment.kind != ExperimentKind::PuritySweep {
        return Err(field_err("experiment.kind", "sweep_purity needs kind = purity_sweep"));
    }
    run_experiment(cfg)
}

/// The optical generalization protocol; `cfg` must be `optical_generalization`.
pub fn run_optical_generalization(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if cfg.experiment.kind != ExperimentKind::OpticalGeneralization {
        return Err(field_err("experiment.kind", "needs kind = optical_generalization"));
    }
    run_experiment(cfg)
}

fn run_optical(cfg: &ExperimentConfig, plan: &Plan, cache: &Cache, report: &mut ExperimentReport) -> Result<()> {
    let o = &cfg.optical;
    let e = &cfg.experiment;
    let train_family = StateFamily::Mixed { p: o.train_p };
    for suite_name in &o.suites {
        let kind: SuiteKind = suite_name.parse()?;
        let complete = match kind {
            SuiteKind::Cube => 9,
            SuiteKind::Mub => 5,
        };
        let descriptor = SuiteDescriptor {
            kind,
            qubits: 2,
            sets: complete,
        };
        let model_path = match kind {
            SuiteKind::Cube => &o.cube_model,
            SuiteKind::Mub => &o.mub_model,
        };
        let pretrained = if model_path.is_empty() || !plan.estimators.contains(&Estimator::Dnn) {
            None
        } else {
            let path = Path::new(model_path);
            if !path.exists() {
                return Err(QstError::MissingModel(path.to_path_buf()));
            }
            Some(load_model(path)?)
        };
        for &xi in &e.grid {
            let noise = NoiseSpec::isotropic(NoiseDistribution::Uniform, xi)?;
            let test = DatasetSpec {
                suite: descriptor,
                family: StateFamily::Optical {
                    basis: o.basis_states,
                    gates: o.gates_per_state,
                },
                noise,
                shots: plan.shots,
                count: o.basis_states * (1 + o.gates_per_state),
                seed: derive_seed(e.seed, "optical-test"),
            };
            let train = DatasetSpec {
                suite: descriptor,
                family: train_family,
                noise,
                shots: match plan.train_shots {
                    TrainShots::Matched => plan.shots,
                    TrainShots::Fixed(s) => s,
                },
                count: plan.train_size,
                seed: derive_seed(e.seed, "train"),
            };
            score_point(
                cfg,
                plan,
                cache,
                &format!("xi:{kind}"),
                xi,
                &test,
                Some((&train, train_family)),
                pretrained.as_ref(),
                report,
            )?;
        }
    }
    Ok(())
}

fn format_row(r: &ResultRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.experiment,
        r.estimator,
        r.sweep_param,
        r.sweep_value,
        r.mean_infidelity,
        r.std_error,
        r.n_samples,
        r.seconds
    )
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format_row(r));
        s.push('\n');
    }
    s
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(field_err("rows", "nothing to write"));
    }
    fs::write(path, csv_string(rows))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(QstError::FormatVersionMismatch {
                expected: CSV_HEADER.into(),
                found: other.unwrap_or_default().into(),
            })
        }
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(field_err("csv", format!("line {} has {} fields", i + 2, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| field_err("csv", format!("line {}: {e}", i + 2)));
            Ok(ResultRow {
                experiment: f[0].into(),
                estimator: f[1].into(),
                sweep_param: f[2].into(),
                sweep_value: num(f[3])?,
                mean_infidelity: num(f[4])?,
                std_error: num(f[5])?,
                n_samples: f[6].parse().map_err(|e| field_err("csv", format!("line {}: {e}", i + 2)))?,
                seconds: num(f[7])?,
            })
        })
        .collect()
}

/// Whitespace-separated series, one gnuplot `index` block per
/// (estimator, sweep parameter) in first-appearance order.
pub fn plotdata_string(rows: &[ResultRow]) -> String {
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        let k = (r.estimator.as_str(), r.sweep_param.as_str());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut s = String::new();
    for (i, (est, param)) in keys.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        writeln!(s, "# estimator={est} sweep_param={param}").expect("string write");
        writeln!(s, "# sweep_value mean_infidelity std_error n_samples").expect("string write");
        for r in rows.iter().filter(|r| r.estimator == *est && r.sweep_param == *param) {
            writeln!(s, "{} {} {} {}", r.sweep_value, r.mean_infidelity, r.std_error, r.n_samples)
                .expect("string write");
        }
    }
    s
}

pub fn emit_plotdata(rows: &[ResultRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(field_err("rows", "nothing to write"));
    }
    fs::write(path, plotdata_string(rows))?;
    Ok(())
}

/// Human-readable table, including `S` and `N = S k` for copies sweeps.
pub fn summary_table(cfg: &ExperimentConfig, report: &ExperimentReport) -> String {
    let mut s = String::new();
    let ops = cfg
        .plan()
        .ok()
        .map(|p| p.sets * p.qubits.dim())
        .unwrap_or_default();
    writeln!(s, "{:<10} {:<8} {:>12} {:>14} {:>12} {:>8}", "estimator", "param", "value", "infidelity", "std_err", "n").expect("write");
    for r in &report.rows {
        write!(
            s,
            "{:<10} {:<8} {:>12} {:>14.6e} {:>12.3e} {:>8}",
            r.estimator, r.sweep_param, r.sweep_value, r.mean_infidelity, r.std_error, r.n_samples
        )
        .expect("write");
        if r.sweep_param == "copies" {
            write!(s, "   N={}", r.sweep_value as u64 * ops as u64).expect("write");
        }
        s.push('\n');
    }
    for pt in &report.purity {
        writeln!(s, "p={} purity={:.6}", pt.p, pt.purity).expect("write");
    }
    for (est, value, n) in &report.failures {
        writeln!(s, "excluded: {est} at {value}: {n} failed samples").expect("write");
    }
    s
}
