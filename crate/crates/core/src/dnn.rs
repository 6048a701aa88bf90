//! The neural-network estimator: a three-hidden-layer perceptron regressing
//! frequency vectors onto Cholesky alpha-vectors, trained with Adam on MSE.
//!
//! Also owns the dataset type (features, targets, true states) and the binary
//! model/dataset file formats.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;

use crate::error::{QstError, Result};
use crate::measure::{apply_noise, sample_noise_angles, NoiseSpec, SuiteDescriptor};
use crate::qstate::{
    alpha_encode, alpha_to_density, cholesky_decompose, mixed_state, optical_basis_states,
    optical_state_family, random_pure_state, AlphaVector, DensityMatrix,
    QubitCount, DEFAULT_EPSILON,
};
use crate::sampling::{exact_frequencies, sample_frequencies, FrequencyVector, ShotBudget};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const HIDDEN_LAYERS: usize = 3;

pub const MODEL_MAGIC: &[u8; 8] = b"DNNQST01";
pub const DATASET_MAGIC: &[u8; 8] = b"QSTDATA1";

/// Independent random streams derived from one per-sample seed.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    State = 0,
    Noise = 1,
    Shots = 2,
}

/// Per-sample generator: the sample index is folded into the master seed with
/// a splitmix step, and each purpose gets its own ChaCha stream.
pub fn sample_rng(master_seed: u64, index: u64, stream: Stream) -> ChaCha8Rng {
    let mut z = master_seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let mut rng = ChaCha8Rng::seed_from_u64(z);
    rng.set_stream(stream as u64);
    rng
}

// ---------------------------------------------------------------------------
// Model

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out x in`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Fully connected network; leaky rectifier after every layer but the last.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    manifest: String,
}

/// Gradients with the same shapes as the model layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

impl Mlp {
    /// Arbitrary layer chain `sizes[0] -> ... -> sizes[last]`, weights
    /// `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn with_sizes(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(QstError::ShapeMismatch(format!("invalid layer sizes {sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let bound = (6.0 / w[0] as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Layer {
                    weights: DMatrix::from_fn(w[1], w[0], |_, _| dist.sample(&mut rng)),
                    bias: DVector::zeros(w[1]),
                }
            })
            .collect();
        Ok(Mlp {
            layers,
            manifest: String::new(),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::output_dim)
    }

    /// Layer widths from input to output.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(Layer::output_dim));
        s
    }

    pub fn manifest(&self) -> &str {
        &self.manifest
    }

    pub fn set_manifest(&mut self, manifest: impl Into<String>) {
        self.manifest = manifest.into();
    }

    /// Column-batched forward pass; `x` is `in x batch`.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.nrows() != self.input_dim() {
            return Err(QstError::ShapeMismatch(format!(
                "feature length {} but model expects {}",
                x.nrows(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &a;
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            if k < last {
                z.apply(|v| *v = leaky(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Batch MSE (mean over samples and outputs) and its parameter gradients.
    pub fn loss_and_gradients(
        &self,
        x: &DMatrix<f64>,
        target: &DMatrix<f64>,
    ) -> Result<(f64, Gradients)> {
        if x.nrows() != self.input_dim() || target.nrows() != self.output_dim() || x.ncols() != target.ncols() {
            return Err(QstError::ShapeMismatch(format!(
                "batch {}x{} / target {}x{} against model {:?}",
                x.nrows(),
                x.ncols(),
                target.nrows(),
                target.ncols(),
                self.shape()
            )));
        }
        let last = self.layers.len() - 1;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut acts = vec![x.clone()];
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = &layer.weights * &acts[k];
            for mut col in z.column_iter_mut() {
                col += &layer.bias;
            }
            let a = if k < last { z.map(leaky) } else { z.clone() };
            pre.push(z);
            acts.push(a);
        }
        let diff = &acts[last + 1] - target;
        let count = diff.len() as f64;
        let loss = diff.norm_squared() / count;

        let mut delta = diff * (2.0 / count);
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            if k < last {
                delta.zip_apply(&pre[k], |d, z| *d *= leaky_grad(z));
            }
            let gw = &delta * acts[k].transpose();
            let gb = delta.column_sum();
            let next = self.layers[k].weights.transpose() * &delta;
            grads.push(Layer { weights: gw, bias: gb });
            delta = next;
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }
}

/// Three hidden layers of `hidden_width` between `input_dim` and `output_dim`.
pub fn init_model(input_dim: usize, hidden_width: usize, output_dim: usize, seed: u64) -> Result<Mlp> {
    let mut sizes = vec![input_dim];
    sizes.extend([hidden_width; HIDDEN_LAYERS]);
    sizes.push(output_dim);
    Mlp::with_sizes(&sizes, seed)
}

pub fn forward(model: &Mlp, features: &FrequencyVector) -> Result<AlphaVector> {
    let x = DMatrix::from_column_slice(features.len(), 1, features.values());
    let out = model.forward_batch(&x)?;
    AlphaVector::new(out.as_slice().to_vec())
}

/// Mean of squared componentwise differences.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(QstError::ShapeMismatch(format!(
            "prediction length {} vs target length {}",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / pred.len() as f64)
}

/// `d loss / d pred = 2 (pred - target) / len`.
pub fn mse_gradient(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    mse_loss(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect())
}

/// Feed-forward then `alpha -> L -> rho`; no iteration.
pub fn predict_state(model: &Mlp, features: &FrequencyVector) -> Result<DensityMatrix> {
    alpha_to_density(&forward(model, features)?)
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 256,
            epochs: 100,
            seed: 0,
            hidden_width: 128,
        }
    }
}

impl TrainConfig {
    /// 128 for 2-qubit pure states, 256 for mixed states and for 3 qubits.
    pub fn paper_hidden_width(qubits: QubitCount, family: &StateFamily) -> usize {
        if qubits == QubitCount::TWO && matches!(family, StateFamily::Pure) {
            128
        } else {
            256
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(QstError::InvalidParameter {
                    name,
                    reason: "must be positive".into(),
                })
            }
        };
        positive("learning_rate", self.learning_rate >= 0.0)?;
        positive("batch_size", self.batch_size > 0)?;
        positive("epochs", self.epochs > 0)?;
        positive("hidden_width", self.hidden_width > 0)?;
        positive("adam_epsilon", self.adam_epsilon > 0.0)?;
        positive("beta1", (0.0..1.0).contains(&self.beta1))?;
        positive("beta2", (0.0..1.0).contains(&self.beta2))
    }

    pub fn to_manifest(&self) -> String {
        format!(
            "train.learning_rate={}\ntrain.beta1={}\ntrain.beta2={}\ntrain.adam_epsilon={}\n\
             train.batch_size={}\ntrain.epochs={}\ntrain.seed={}\ntrain.hidden_width={}\n",
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.adam_epsilon,
            self.batch_size,
            self.epochs,
            self.seed,
            self.hidden_width
        )
    }
}

struct Adam {
    m: Vec<Layer>,
    v: Vec<Layer>,
    step: i32,
}

impl Adam {
    fn new(model: &Mlp) -> Self {
        let zeros = || {
            model
                .layers
                .iter()
                .map(|l| Layer {
                    weights: DMatrix::zeros(l.weights.nrows(), l.weights.ncols()),
                    bias: DVector::zeros(l.bias.len()),
                })
                .collect::<Vec<_>>()
        };
        Adam {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut Mlp, grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let (b1, b2, lr, eps) = (cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.adam_epsilon);
        let step = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (k, layer) in model.layers.iter_mut().enumerate() {
            let g = &grads.layers[k];
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..layer.weights.len() {
                step(&mut layer.weights[i], g.weights[i], &mut m.weights[i], &mut v.weights[i]);
            }
            for i in 0..layer.bias.len() {
                step(&mut layer.bias[i], g.bias[i], &mut m.bias[i], &mut v.bias[i]);
            }
        }
    }
}

/// Mini-batch Adam over seeded shuffles; returns the mean training loss of
/// every epoch.
pub fn train(mut model: Mlp, dataset: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, Vec<f64>)> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(QstError::ShapeMismatch("empty training set".into()));
    }
    let (fdim, tdim) = (dataset.feature_len(), dataset.target_len());
    if fdim != model.input_dim() || tdim != model.output_dim() {
        return Err(QstError::ShapeMismatch(format!(
            "dataset {fdim}->{tdim} vs model {:?}",
            model.shape()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(&model);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let x = DMatrix::from_fn(fdim, batch.len(), |r, c| dataset.rows[batch[c]].features[r]);
            let t = DMatrix::from_fn(tdim, batch.len(), |r, c| dataset.rows[batch[c]].target[r]);
            let (loss, grads) = model.loss_and_gradients(&x, &t)?;
            if !loss.is_finite() {
                return Err(QstError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            total += loss * batch.len() as f64;
            adam.update(&mut model, &grads, cfg);
        }
        history.push(total / dataset.len() as f64);
    }
    Ok((model, history))
}

// ---------------------------------------------------------------------------
// Datasets

/// Which random states populate a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateFamily {
    /// Haar-random pure states.
    Pure,
    /// `p |psi><psi| + (1 - p) I/d` with Haar `psi`.
    Mixed { p: f64 },
    /// High-purity basis states and random optical-gate conjugates of them
    /// (2 qubits only); the sample count is `basis * (1 + gates)`.
    Optical { basis: usize, gates: usize },
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFamily::Pure => f.write_str("pure"),
            StateFamily::Mixed { p } => write!(f, "mixed:{p}"),
            StateFamily::Optical { basis, gates } => write!(f, "optical:{basis}x{gates}"),
        }
    }
}

impl FromStr for StateFamily {
    type Err = QstError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| QstError::Config {
            field: "family".into(),
            reason,
        };
        let s = s.trim();
        if s == "pure" {
            return Ok(StateFamily::Pure);
        }
        if let Some(p) = s.strip_prefix("mixed:") {
            let p: f64 = p.parse().map_err(|e| bad(format!("`{p}`: {e}")))?;
            if !(p > 0.0 && p < 1.0) {
                return Err(bad(format!("p = {p} outside (0, 1)")));
            }
            return Ok(StateFamily::Mixed { p });
        }
        if let Some(rest) = s.strip_prefix("optical:") {
            let (b, g) = rest
                .split_once('x')
                .ok_or_else(|| bad(format!("`{rest}` is not <basis>x<gates>")))?;
            return Ok(StateFamily::Optical {
                basis: b.parse().map_err(|e| bad(format!("`{b}`: {e}")))?,
                gates: g.parse().map_err(|e| bad(format!("`{g}`: {e}")))?,
            });
        }
        Err(bad(format!("unknown family `{s}` (pure | mixed:<p> | optical:<b>x<g>)")))
    }
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub suite: SuiteDescriptor,
    pub family: StateFamily,
    pub noise: NoiseSpec,
    /// Copies per operator; `None` means exact (infinite-copy) frequencies.
    pub shots: Option<u64>,
    pub count: usize,
    pub seed: u64,
}

impl DatasetSpec {
    pub fn to_manifest(&self) -> String {
        format!(
            "{}family={}\nnoise={}\nshots={}\ncount={}\nseed={}\n",
            self.suite.to_manifest(),
            self.family,
            self.noise,
            self.shots.map_or_else(|| "exact".to_string(), |s| s.to_string()),
            self.count,
            self.seed
        )
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let get = |key: &str| -> Result<&str> {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::trim)
                .ok_or_else(|| QstError::Config {
                    field: key.into(),
                    reason: "missing from manifest".into(),
                })
        };
        let parse_num = |key: &str| -> Result<u64> {
            get(key)?.parse().map_err(|e| QstError::Config {
                field: key.into(),
                reason: format!("{e}"),
            })
        };
        let shots = match get("shots")? {
            "exact" => None,
            _ => Some(parse_num("shots")?),
        };
        Ok(DatasetSpec {
            suite: SuiteDescriptor::from_manifest(text)?,
            family: get("family")?.parse()?,
            noise: get("noise")?.parse()?,
            shots,
            count: parse_num("count")? as usize,
            seed: parse_num("seed")?,
        })
    }

    /// Number of rows this spec produces.
    pub fn effective_count(&self) -> usize {
        match self.family {
            StateFamily::Optical { basis, gates } => basis * (1 + gates),
            _ => self.count,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: Vec<f64>,
    pub truth: Option<DensityMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub rows: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.rows.first().map_or(0, |r| r.features.len())
    }

    pub fn target_len(&self) -> usize {
        self.rows.first().map_or(0, |r| r.target.len())
    }

    pub fn frequencies(&self, i: usize) -> Result<FrequencyVector> {
        let d = 1usize << self.spec.suite.qubits;
        FrequencyVector::new(d, self.rows[i].features.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(DATASET_MAGIC)?;
        write_text(&mut w, &self.spec.to_manifest())?;
        let truth_len = self.rows.first().and_then(|r| r.truth.as_ref()).map_or(0, |t| 2 * t.dim() * t.dim());
        for v in [self.len(), self.feature_len(), self.target_len(), truth_len] {
            write_u64(&mut w, v as u64)?;
        }
        for row in &self.rows {
            write_f64s(&mut w, &row.features)?;
            write_f64s(&mut w, &row.target)?;
            if truth_len > 0 {
                let flat = row.truth.as_ref().map(DensityMatrix::to_flat).ok_or_else(|| {
                    QstError::ShapeMismatch("dataset mixes rows with and without truth".into())
                })?;
                write_f64s(&mut w, &flat)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        read_magic(&mut r, DATASET_MAGIC)?;
        let spec = DatasetSpec::from_manifest(&read_text(&mut r)?)?;
        let rows_n = read_u64(&mut r)? as usize;
        let flen = read_u64(&mut r)? as usize;
        let tlen = read_u64(&mut r)? as usize;
        let truth_len = read_u64(&mut r)? as usize;
        let d = 1usize << spec.suite.qubits;
        if truth_len != 0 && truth_len != 2 * d * d {
            return Err(QstError::ShapeMismatch(format!("truth width {truth_len} for d = {d}")));
        }
        let mut rows = Vec::with_capacity(rows_n.min(1 << 20));
        for _ in 0..rows_n {
            let features = read_f64s(&mut r, flen)?;
            let target = read_f64s(&mut r, tlen)?;
            let truth = if truth_len > 0 {
                Some(DensityMatrix::from_flat(d, &read_f64s(&mut r, truth_len)?)?)
            } else {
                None
            };
            rows.push(Sample {
                features,
                target,
                truth,
            });
        }
        Ok(Dataset { spec, rows })
    }
}

/// Cholesky alpha-vector used as the regression target. Rank-deficient
/// states (pure states in particular) are first mixed as
/// `(1 - eps) rho + eps I/d` with `eps = 1e-7`.
pub fn target_alpha(rho: &DensityMatrix) -> Result<AlphaVector> {
    let min_eig = rho.eigenvalues()[0];
    let l = if min_eig < 1e-12 {
        let d = rho.dim();
        let eps = DEFAULT_EPSILON;
        let m = rho.matrix().scale(1.0 - eps) + crate::linalg::CMatrix::identity(d, d).scale(eps / d as f64);
        cholesky_decompose(&DensityMatrix::new(m, 1e-9)?)?
    } else {
        cholesky_decompose(rho)?
    };
    Ok(alpha_encode(&l))
}

/// Frequencies of `rho` under `spec`: a fresh noise realization (noise stream)
/// and finite-shot sampling (shot stream), both keyed by `index`.
pub fn observe(
    rho: &DensityMatrix,
    ideal: &crate::measure::MeasurementSuite,
    spec: &DatasetSpec,
    index: u64,
) -> Result<FrequencyVector> {
    let suite = if spec.noise.is_noiseless() {
        ideal.clone()
    } else {
        let mut rng = sample_rng(spec.seed, index, Stream::Noise);
        let angles = sample_noise_angles(&spec.noise, ideal.qubits(), &mut rng);
        apply_noise(ideal, &angles)?
    };
    match spec.shots {
        None => exact_frequencies(rho, &suite),
        Some(s) => {
            let mut rng = sample_rng(spec.seed, index, Stream::Shots);
            sample_frequencies(rho, &suite, ShotBudget::new(s)?, &mut rng)
        }
    }
}

/// The true states of a dataset, in row order.
pub fn generate_states(spec: &DatasetSpec) -> Result<Vec<DensityMatrix>> {
    let n = QubitCount::new(spec.suite.qubits)?;
    match spec.family {
        StateFamily::Pure => Ok((0..spec.count as u64)
            .map(|i| random_pure_state(n, &mut sample_rng(spec.seed, i, Stream::State)).to_density())
            .collect()),
        StateFamily::Mixed { p } => (0..spec.count as u64)
            .map(|i| mixed_state(&random_pure_state(n, &mut sample_rng(spec.seed, i, Stream::State)), p))
            .collect(),
        StateFamily::Optical { basis, gates } => {
            if n != QubitCount::TWO {
                return Err(QstError::UnsupportedQubitCount(n.get()));
            }
            let mut rng = sample_rng(spec.seed, u64::MAX, Stream::State);
            let basis_states = optical_basis_states(basis, &mut rng);
            optical_state_family(&basis_states, gates, &mut rng)
        }
    }
}

/// Features, targets and true states for `spec`; deterministic under its seed
/// and independent of the thread count.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.effective_count() == 0 {
        return Err(QstError::InvalidParameter {
            name: "count",
            reason: "dataset needs at least one sample".into(),
        });
    }
    let ideal = spec.suite.build()?;
    let states = generate_states(spec)?;
    let rows = states
        .into_par_iter()
        .enumerate()
        .map(|(i, truth)| {
            let features = observe(&truth, &ideal, spec, i as u64)?;
            let target = target_alpha(&truth)?;
            Ok(Sample {
                features: features.values().to_vec(),
                target: target.into_values(),
                truth: Some(truth),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        spec: spec.clone(),
        rows,
    })
}

// ---------------------------------------------------------------------------
// Binary I/O

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_text(w: &mut impl Write, text: &str) -> Result<()> {
    write_u64(w, text.len() as u64)?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

fn read_text(r: &mut impl Read) -> Result<String> {
    let len = read_u64(r)? as usize;
    if len > 1 << 24 {
        return Err(QstError::ShapeMismatch(format!("manifest length {len} is implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| QstError::ShapeMismatch(format!("manifest is not UTF-8: {e}")))
}

fn read_magic(r: &mut impl Read, expected: &[u8; 8]) -> Result<()> {
    let mut found = [0u8; 8];
    r.read_exact(&mut found)?;
    if &found != expected {
        return Err(QstError::FormatVersionMismatch {
            expected: String::from_utf8_lossy(expected).into_owned(),
            found: String::from_utf8_lossy(&found).into_owned(),
        });
    }
    Ok(())
}

/// Little-endian: magic, layer count, per layer `(rows, cols)` then weights
/// row-major then biases, then the length-prefixed manifest.
pub fn save_model(model: &Mlp, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    write_u64(&mut w, model.layers.len() as u64)?;
    for layer in &model.layers {
        let (rows, cols) = layer.weights.shape();
        write_u64(&mut w, rows as u64)?;
        write_u64(&mut w, cols as u64)?;
        for i in 0..rows {
            for j in 0..cols {
                w.write_all(&layer.weights[(i, j)].to_le_bytes())?;
            }
        }
        write_f64s(&mut w, layer.bias.as_slice())?;
    }
    write_text(&mut w, &model.manifest)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Mlp> {
    if !path.exists() {
        return Err(QstError::MissingModel(path.to_path_buf()));
    }
    let mut r = BufReader::new(File::open(path)?);
    read_magic(&mut r, MODEL_MAGIC)?;
    let count = read_u64(&mut r)? as usize;
    if count == 0 || count > 64 {
        return Err(QstError::ShapeMismatch(format!("layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        if rows == 0 || cols == 0 || rows.saturating_mul(cols) > 1 << 28 {
            return Err(QstError::ShapeMismatch(format!("layer shape {rows}x{cols}")));
        }
        let w = read_f64s(&mut r, rows * cols)?;
        let bias = DVector::from_vec(read_f64s(&mut r, rows)?);
        layers.push(Layer {
            weights: DMatrix::from_row_slice(rows, cols, &w),
            bias,
        });
    }
    for pair in layers.windows(2) {
        if pair[0].output_dim() != pair[1].input_dim() {
            return Err(QstError::ShapeMismatch("inconsistent layer chain".into()));
        }
    }
    let manifest = read_text(&mut r)?;
    Ok(Mlp { layers, manifest })
}

/// Uniform random draw helper for tests and examples.
pub fn random_features<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SuiteKind;
    use crate::qstate::fidelity;

    fn spec(count: usize, family: StateFamily, shots: Option<u64>) -> DatasetSpec {
        DatasetSpec {
            suite: SuiteDescriptor {
                kind: SuiteKind::Cube,
                qubits: 2,
                sets: 9,
            },
            family,
            noise: NoiseSpec::noiseless(),
            shots,
            count,
            seed: 17,
        }
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = init_model(36, 128, 16, 5).unwrap();
        assert_eq!(a.shape(), vec![36, 128, 128, 128, 16]);
        let b = init_model(36, 128, 16, 5).unwrap();
        assert_eq!(a, b);
        let bound = (6.0f64 / 36.0).sqrt();
        assert!(a.layers()[0].weights.iter().all(|w| w.abs() <= bound));
        assert!(a.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));

        let zero = FrequencyVector::new(4, [1.0, 0.0, 0.0, 0.0].repeat(9)).unwrap();
        let out = forward(&a, &zero).unwrap();
        assert_eq!(out.values().len(), 16);
        assert!(out.values().iter().all(|v| v.is_finite()));
        assert_eq!(init_model(216, 256, 64, 0).unwrap().output_dim(), 64);
    }

    #[test]
    fn leaky_slope_on_hidden_layer() {
        let mut m = Mlp::with_sizes(&[1, 1, 1], 0).unwrap();
        m.layers_mut()[0].weights[(0, 0)] = -1.0;
        m.layers_mut()[1].weights[(0, 0)] = 1.0;
        let out = m.forward_batch(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((out[(0, 0)] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let m = init_model(36, 8, 16, 0).unwrap();
        let f = FrequencyVector::new(4, vec![0.25; 20]).unwrap();
        assert!(matches!(forward(&m, &f), Err(QstError::ShapeMismatch(_))));
    }

    #[test]
    fn mse_values() {
        let t = [0.1, -0.4, 2.0];
        assert_eq!(mse_loss(&t, &t).unwrap(), 0.0);
        let shifted: Vec<f64> = t.iter().map(|v| v + 1.0).collect();
        assert!((mse_loss(&shifted, &t).unwrap() - 1.0).abs() < 1e-15);
        let g = mse_gradient(&shifted, &t).unwrap();
        assert!(g.iter().all(|v| (v - 2.0 / 3.0).abs() < 1e-15));
        assert!(mse_loss(&t, &t[..2]).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let ds = generate_dataset(&spec(40, StateFamily::Pure, None)).unwrap();
        let model = init_model(36, 16, 16, 1).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (trained, hist) = train(model.clone(), &ds, &cfg).unwrap();
        assert_eq!(trained, model);
        assert!(hist.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-12));
    }

    #[test]
    fn training_is_deterministic() {
        let ds = generate_dataset(&spec(64, StateFamily::Pure, Some(10))).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            seed: 4,
            ..TrainConfig::default()
        };
        let (_, a) = train(init_model(36, 16, 16, 2).unwrap(), &ds, &cfg).unwrap();
        let (_, b) = train(init_model(36, 16, 16, 2).unwrap(), &ds, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn targets_decode_to_truth() {
        for family in [StateFamily::Pure, StateFamily::Mixed { p: 0.7 }] {
            let ds = generate_dataset(&spec(50, family, None)).unwrap();
            for row in &ds.rows {
                let rho = alpha_to_density(&AlphaVector::new(row.target.clone()).unwrap()).unwrap();
                assert!(fidelity(&rho, row.truth.as_ref().unwrap()).unwrap() >= 1.0 - 1e-6);
            }
        }
    }

    #[test]
    fn untrained_predictions_are_physical() {
        let m = init_model(36, 32, 16, 99).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let raw = random_features(36, &mut rng);
            let x = DMatrix::from_column_slice(36, 1, &raw);
            let alpha = AlphaVector::new(m.forward_batch(&x).unwrap().as_slice().to_vec()).unwrap();
            alpha_to_density(&alpha).unwrap().check(1e-10).unwrap();
        }
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let s = spec(30, StateFamily::Mixed { p: 0.9 }, Some(20));
        assert_eq!(generate_dataset(&s).unwrap(), generate_dataset(&s).unwrap());
        let optical = DatasetSpec {
            family: StateFamily::Optical { basis: 2, gates: 3 },
            ..s
        };
        assert_eq!(generate_dataset(&optical).unwrap().len(), 8);
    }

    #[test]
    fn manifest_round_trips() {
        let mut s = spec(12, StateFamily::Optical { basis: 5, gates: 20 }, Some(100));
        s.noise = "gaussian:0.01,0.02,0.03".parse().unwrap();
        assert_eq!(DatasetSpec::from_manifest(&s.to_manifest()).unwrap(), s);
        let e = spec(3, StateFamily::Mixed { p: 0.25 }, None);
        assert_eq!(DatasetSpec::from_manifest(&e.to_manifest()).unwrap(), e);
    }
}
