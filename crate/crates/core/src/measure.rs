//! Projective measurement suites (cube and MUB) and unitary rotation noise.
//!
//! Projectors are rank one, so each is stored as its defining unit vector.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{QstError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::qstate::QubitCount;

/// The six single-qubit Pauli eigenstates.
#[derive(Debug, Clone)]
pub struct PauliStates {
    pub h: CVector,
    pub v: CVector,
    pub d: CVector,
    pub a: CVector,
    pub r: CVector,
    pub l: CVector,
}

/// `H, V` (sigma_z), `D, A` (sigma_x) and `R = (H + iV)/sqrt2`,
/// `L = (H - iV)/sqrt2` (sigma_y, eigenvalues +1 / -1).
pub fn pauli_basis_states() -> PauliStates {
    let s = FRAC_1_SQRT_2;
    let v2 = |a: (f64, f64), b: (f64, f64)| CVector::from_vec(vec![c(a.0, a.1), c(b.0, b.1)]);
    PauliStates {
        h: v2((1.0, 0.0), (0.0, 0.0)),
        v: v2((0.0, 0.0), (1.0, 0.0)),
        d: v2((s, 0.0), (s, 0.0)),
        a: v2((s, 0.0), (-s, 0.0)),
        r: v2((s, 0.0), (0.0, s)),
        l: v2((s, 0.0), (0.0, -s)),
    }
}

/// Single-qubit measurement axis. The declaration order is the cube set order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Z,
    X,
    Y,
}

impl Axis {
    const ALL: [Axis; 3] = [Axis::Z, Axis::X, Axis::Y];

    fn states(self, p: &PauliStates) -> [(char, CVector); 2] {
        match self {
            Axis::Z => [('H', p.h.clone()), ('V', p.v.clone())],
            Axis::X => [('D', p.d.clone()), ('A', p.a.clone())],
            Axis::Y => [('R', p.r.clone()), ('L', p.l.clone())],
        }
    }
}

/// `d` mutually orthogonal rank-one projectors resolving the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSet {
    vectors: Vec<CVector>,
    labels: Vec<String>,
}

impl ProjectorSet {
    pub fn new(vectors: Vec<CVector>, labels: Vec<String>) -> Result<Self> {
        let d = vectors.first().map_or(0, |v| v.len());
        if vectors.len() != d || labels.len() != d {
            return Err(QstError::ShapeMismatch(format!(
                "projector set needs {d} vectors and labels, got {} / {}",
                vectors.len(),
                labels.len()
            )));
        }
        let set = ProjectorSet { vectors, labels };
        let defect = set.resolution_defect();
        if defect > 1e-10 {
            return Err(QstError::InvalidParameter {
                name: "projector set",
                reason: format!("does not resolve the identity (defect {defect:e})"),
            });
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn projector(&self, i: usize) -> CMatrix {
        linalg::outer(&self.vectors[i])
    }

    /// `max |sum_i P_i - I|`.
    pub fn resolution_defect(&self) -> f64 {
        let d = self.dim();
        let sum = (0..d).fold(CMatrix::zeros(d, d), |acc, i| acc + self.projector(i));
        linalg::max_abs_diff(&sum, &CMatrix::identity(d, d))
    }

    fn transformed(&self, u: &CMatrix) -> ProjectorSet {
        ProjectorSet {
            vectors: self.vectors.iter().map(|v| u * v).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SuiteKind {
    Cube,
    Mub,
}

impl fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SuiteKind::Cube => "cube",
            SuiteKind::Mub => "mub",
        })
    }
}

impl FromStr for SuiteKind {
    type Err = QstError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(SuiteKind::Cube),
            "mub" => Ok(SuiteKind::Mub),
            other => Err(QstError::Config {
                field: "suite".into(),
                reason: format!("unknown suite kind `{other}` (expected cube|mub)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseDistribution {
    Gaussian,
    Uniform,
}

/// Noise distribution plus the three ratios `(xi1, xi2, xi3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub distribution: NoiseDistribution,
    pub ratios: [f64; 3],
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        NoiseSpec {
            distribution: NoiseDistribution::Uniform,
            ratios: [0.0; 3],
        }
    }

    pub fn new(distribution: NoiseDistribution, ratios: [f64; 3]) -> Result<Self> {
        if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(QstError::InvalidParameter {
                name: "noise ratios",
                reason: format!("{ratios:?} must be finite and >= 0"),
            });
        }
        Ok(NoiseSpec {
            distribution,
            ratios,
        })
    }

    /// Same ratio on all three angles.
    pub fn isotropic(distribution: NoiseDistribution, ratio: f64) -> Result<Self> {
        NoiseSpec::new(distribution, [ratio; 3])
    }

    pub fn is_noiseless(&self) -> bool {
        self.ratios.iter().all(|&r| r == 0.0)
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dist = match self.distribution {
            NoiseDistribution::Gaussian => "gaussian",
            NoiseDistribution::Uniform => "uniform",
        };
        let [a, b, cc] = self.ratios;
        write!(f, "{dist}:{a},{b},{cc}")
    }
}

impl FromStr for NoiseSpec {
    type Err = QstError;

    /// Parses `none`, or `gaussian:x1,x2,x3` / `uniform:x` (one ratio for all angles).
    fn from_str(s: &str) -> Result<Self> {
        let bad = |reason: String| QstError::Config {
            field: "noise".into(),
            reason,
        };
        let s = s.trim();
        if s == "none" {
            return Ok(NoiseSpec::noiseless());
        }
        let (dist, rest) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("`{s}` is not `none` or `<dist>:<ratios>`")))?;
        let distribution = match dist {
            "gaussian" => NoiseDistribution::Gaussian,
            "uniform" => NoiseDistribution::Uniform,
            other => return Err(bad(format!("unknown distribution `{other}`"))),
        };
        let values = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| bad(format!("`{t}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let ratios = match values.as_slice() {
            [x] => [*x; 3],
            [a, b, cc] => [*a, *b, *cc],
            _ => return Err(bad(format!("expected 1 or 3 ratios, got {}", values.len()))),
        };
        NoiseSpec::new(distribution, ratios)
    }
}

/// One angle triple per qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAngles {
    pub per_qubit: Vec<[f64; 3]>,
}

impl NoiseAngles {
    pub fn zero(n: QubitCount) -> Self {
        NoiseAngles {
            per_qubit: vec![[0.0; 3]; n.get()],
        }
    }
}

/// An ordered list of projector sets, possibly with a noise realization
/// already applied to its vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSuite {
    kind: SuiteKind,
    qubits: QubitCount,
    sets: Vec<ProjectorSet>,
    noise: Option<NoiseAngles>,
}

impl MeasurementSuite {
    pub fn kind(&self) -> SuiteKind {
        self.kind
    }

    pub fn qubits(&self) -> QubitCount {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        self.qubits.dim()
    }

    pub fn sets(&self) -> &[ProjectorSet] {
        &self.sets
    }

    pub fn set_count(&self) -> usize {
        self.sets.len()
    }

    /// Total number of projectors, `sets * d`.
    pub fn operator_count(&self) -> usize {
        self.sets.len() * self.dim()
    }

    pub fn noise(&self) -> Option<&NoiseAngles> {
        self.noise.as_ref()
    }

    /// Number of sets in the complete suite of this kind.
    pub fn complete_set_count(&self) -> usize {
        match self.kind {
            SuiteKind::Cube => 3usize.pow(self.qubits.get() as u32),
            SuiteKind::Mub => self.dim() + 1,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.set_count() == self.complete_set_count()
    }

    /// All projector vectors in suite order.
    pub fn vectors(&self) -> impl Iterator<Item = &CVector> {
        self.sets.iter().flat_map(|s| s.vectors.iter())
    }

    /// Returns the suite with every vector mapped through `u`.
    pub fn transformed(&self, u: &CMatrix) -> Result<MeasurementSuite> {
        if u.shape() != (self.dim(), self.dim()) {
            return Err(QstError::DimensionMismatch {
                expected: self.dim(),
                actual: u.nrows(),
            });
        }
        Ok(MeasurementSuite {
            kind: self.kind,
            qubits: self.qubits,
            sets: self.sets.iter().map(|s| s.transformed(u)).collect(),
            noise: self.noise.clone(),
        })
    }

    /// Plain-text descriptor used in dataset and model manifests.
    pub fn descriptor(&self) -> SuiteDescriptor {
        SuiteDescriptor {
            kind: self.kind,
            qubits: self.qubits.get(),
            sets: self.set_count(),
        }
    }
}

/// Enough to rebuild an ideal suite: kind, qubit count and set prefix length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SuiteDescriptor {
    pub kind: SuiteKind,
    pub qubits: usize,
    pub sets: usize,
}

impl SuiteDescriptor {
    pub fn build(&self) -> Result<MeasurementSuite> {
        let n = QubitCount::new(self.qubits)?;
        let full = match self.kind {
            SuiteKind::Cube => cube_suite(n),
            SuiteKind::Mub if n == QubitCount::TWO => mub_suite_2q(),
            SuiteKind::Mub => return Err(QstError::UnsupportedQubitCount(self.qubits)),
        };
        truncate_suite(&full, self.sets)
    }

    /// `kind=..`, `qubits=..`, `sets=..` lines.
    pub fn to_manifest(&self) -> String {
        format!(
            "suite.kind={}\nsuite.qubits={}\nsuite.sets={}\n",
            self.kind, self.qubits, self.sets
        )
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let lookup = |key: &str| -> Result<&str> {
            text.lines()
                .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .ok_or_else(|| QstError::Config {
                    field: key.to_string(),
                    reason: "missing from manifest".into(),
                })
        };
        let num = |key: &str| -> Result<usize> {
            lookup(key)?.trim().parse().map_err(|e| QstError::Config {
                field: key.to_string(),
                reason: format!("{e}"),
            })
        };
        Ok(SuiteDescriptor {
            kind: lookup("suite.kind")?.trim().parse()?,
            qubits: num("suite.qubits")?,
            sets: num("suite.sets")?,
        })
    }
}

/// All `3^n` tensor products of the Z, X, Y eigenbases. Sets are ordered
/// lexicographically over per-qubit axes (Z < X < Y), qubit 1 slowest.
pub fn cube_suite(n: QubitCount) -> MeasurementSuite {
    let pauli = pauli_basis_states();
    let nq = n.get();
    let mut sets = Vec::with_capacity(3usize.pow(nq as u32));
    for code in 0..3usize.pow(nq as u32) {
        let axes: Vec<Axis> = (0..nq)
            .map(|q| Axis::ALL[(code / 3usize.pow((nq - 1 - q) as u32)) % 3])
            .collect();
        let mut vectors = vec![CVector::from_element(1, c(1.0, 0.0))];
        let mut labels = vec![String::new()];
        for axis in &axes {
            let states = axis.states(&pauli);
            let mut next_v = Vec::with_capacity(vectors.len() * 2);
            let mut next_l = Vec::with_capacity(vectors.len() * 2);
            for (v, l) in vectors.iter().zip(&labels) {
                for (ch, s) in &states {
                    next_v.push(linalg::kron_vec(v, s));
                    next_l.push(format!("{l}{ch}"));
                }
            }
            vectors = next_v;
            labels = next_l;
        }
        sets.push(ProjectorSet { vectors, labels });
    }
    MeasurementSuite {
        kind: SuiteKind::Cube,
        qubits: n,
        sets,
        noise: None,
    }
}

/// The five 2-qubit mutually unbiased bases, including the three product
/// bases and the two entangled ones.
pub fn mub_suite_2q() -> MeasurementSuite {
    let p = pauli_basis_states();
    let k = |a: &CVector, b: &CVector| linalg::kron_vec(a, b);
    let product = |pairs: [(&CVector, &CVector, &str); 4]| ProjectorSet {
        vectors: pairs.iter().map(|(a, b, _)| k(a, b)).collect(),
        labels: pairs.iter().map(|(_, _, l)| l.to_string()).collect(),
    };
    // (|xy> +/- i|zw>)/sqrt2
    let entangled = |x: CVector, y: CVector, sign: f64| -> CVector {
        (x + y * c(0.0, sign)).scale(FRAC_1_SQRT_2)
    };
    let ent_set = |first: (&CVector, &CVector, &CVector, &CVector, &str),
                   second: (&CVector, &CVector, &CVector, &CVector, &str)| {
        let mut vectors = Vec::with_capacity(4);
        let mut labels = Vec::with_capacity(4);
        for (a, b, cc, dd, name) in [first, second] {
            for (sign, s) in [(1.0, '+'), (-1.0, '-')] {
                vectors.push(entangled(k(a, b), k(cc, dd), sign));
                labels.push(format!("{}{}i{}", &name[..2], s, &name[2..]));
            }
        }
        ProjectorSet { vectors, labels }
    };

    let sets = vec![
        product([(&p.h, &p.h, "HH"), (&p.h, &p.v, "HV"), (&p.v, &p.h, "VH"), (&p.v, &p.v, "VV")]),
        product([(&p.r, &p.d, "RD"), (&p.r, &p.a, "RA"), (&p.l, &p.d, "LD"), (&p.l, &p.a, "LA")]),
        product([(&p.d, &p.r, "DR"), (&p.d, &p.l, "DL"), (&p.a, &p.r, "AR"), (&p.a, &p.l, "AL")]),
        ent_set((&p.r, &p.l, &p.l, &p.r, "RLLR"), (&p.r, &p.r, &p.l, &p.l, "RRLL")),
        ent_set((&p.r, &p.v, &p.l, &p.h, "RVLH"), (&p.r, &p.h, &p.l, &p.v, "RHLV")),
    ];
    MeasurementSuite {
        kind: SuiteKind::Mub,
        qubits: QubitCount::TWO,
        sets,
        noise: None,
    }
}

/// First `k` sets of `suite`.
pub fn truncate_suite(suite: &MeasurementSuite, k: usize) -> Result<MeasurementSuite> {
    if k == 0 || k > suite.set_count() {
        return Err(QstError::OutOfRange {
            requested: k,
            available: suite.set_count(),
        });
    }
    Ok(MeasurementSuite {
        kind: suite.kind,
        qubits: suite.qubits,
        sets: suite.sets[..k].to_vec(),
        noise: suite.noise.clone(),
    })
}

/// `[[e^{i t1} cos t2, -i e^{i t3} sin t2], [-i e^{-i t3} sin t2, e^{-i t1} cos t2]]`.
pub fn rotation_unitary(theta1: f64, theta2: f64, theta3: f64) -> CMatrix {
    let (s2, c2) = theta2.sin_cos();
    let e1 = c(0.0, theta1).exp();
    let e3 = c(0.0, theta3).exp();
    let minus_i = c(0.0, -1.0);
    CMatrix::from_row_slice(
        2,
        2,
        &[
            e1 * c2,
            minus_i * e3 * s2,
            minus_i * e3.conj() * s2,
            e1.conj() * c2,
        ],
    )
}

/// Draws one angle triple per qubit.
///
/// Gaussian: `t1 ~ N(0, pi xi1)`, `t2 ~ N(0, 2 pi xi2)`, `t3 ~ N(0, 2 pi xi3)`
/// with the second argument a standard deviation. Uniform: `t1 ~ U(0, 2 pi xi1)`,
/// `t2 ~ U(0, pi xi2 / 2)`, `t3 ~ U(0, 2 pi xi3)`.
pub fn sample_noise_angles<R: Rng + ?Sized>(
    spec: &NoiseSpec,
    n: QubitCount,
    rng: &mut R,
) -> NoiseAngles {
    let scales = match spec.distribution {
        NoiseDistribution::Gaussian => [PI, TAU, TAU],
        NoiseDistribution::Uniform => [TAU, 0.5 * PI, TAU],
    };
    let widths: Vec<f64> = scales.iter().zip(spec.ratios).map(|(s, r)| s * r).collect();
    let per_qubit = (0..n.get())
        .map(|_| {
            let mut triple = [0.0; 3];
            for (t, &w) in triple.iter_mut().zip(&widths) {
                if w == 0.0 {
                    continue;
                }
                *t = match spec.distribution {
                    NoiseDistribution::Gaussian => {
                        Normal::new(0.0, w).expect("finite width").sample(rng)
                    }
                    NoiseDistribution::Uniform => {
                        Uniform::new(0.0, w).expect("positive width").sample(rng)
                    }
                };
            }
            triple
        })
        .collect();
    NoiseAngles { per_qubit }
}

/// `U_e = U(Theta_1) (x) ... (x) U(Theta_n)`.
pub fn noise_unitary(angles: &NoiseAngles) -> CMatrix {
    angles
        .per_qubit
        .iter()
        .map(|t| rotation_unitary(t[0], t[1], t[2]))
        .reduce(|acc, u| linalg::kron(&acc, &u))
        .unwrap_or_else(|| CMatrix::identity(1, 1))
}

/// Replaces every projector `|m>` by `U_e |m>`; one realization for the whole suite.
pub fn apply_noise(suite: &MeasurementSuite, angles: &NoiseAngles) -> Result<MeasurementSuite> {
    if angles.per_qubit.len() != suite.qubits.get() {
        return Err(QstError::DimensionMismatch {
            expected: suite.qubits.get(),
            actual: angles.per_qubit.len(),
        });
    }
    let mut noisy = suite.transformed(&noise_unitary(angles))?;
    noisy.noise = Some(angles.clone());
    Ok(noisy)
}
