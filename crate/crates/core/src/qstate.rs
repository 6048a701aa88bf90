//! Quantum states: generation, Cholesky/alpha encoding and fidelity.
//!
//! States are dense `d x d` complex matrices with `d = 2^n`, `n` in {2, 3}.
//! Tensor products put qubit 1 in the most significant position, so
//! `|HV> = |H> (x) |V>`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{QstError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::measure::rotation_unitary;

/// Default pure-state perturbation used before Cholesky decomposition.
pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Tolerance used when checking the density-matrix invariants.
pub const STATE_TOL: f64 = 1e-10;

/// Number of qubits; only 2 and 3 are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QubitCount(usize);

impl QubitCount {
    pub const TWO: QubitCount = QubitCount(2);
    pub const THREE: QubitCount = QubitCount(3);

    pub fn new(n: usize) -> Result<Self> {
        match n {
            2 | 3 => Ok(QubitCount(n)),
            other => Err(QstError::UnsupportedQubitCount(other)),
        }
    }

    pub fn get(self) -> usize {
        self.0
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(self) -> usize {
        1 << self.0
    }
}

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    /// Validates `matrix` at tolerance `tol` and wraps it.
    pub fn new(matrix: CMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QstError::ShapeMismatch(format!(
                "density matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::hermitian_defect(&matrix);
        if defect > tol {
            return Err(QstError::NotHermitian(defect));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(QstError::InvalidParameter {
                name: "density matrix",
                reason: format!("trace {tr} is not 1"),
            });
        }
        let min = linalg::hermitian_eigen(&matrix).0[0];
        if min < -tol {
            return Err(QstError::NotPositiveDefinite { row: 0, pivot: min });
        }
        Ok(DensityMatrix { matrix })
    }

    /// Wraps a matrix already known to be physical up to rounding.
    /// The Hermitian part is kept and the trace renormalized.
    pub(crate) fn from_physical(matrix: CMatrix) -> Self {
        let h = linalg::hermitize(&matrix);
        let tr = h.trace().re;
        DensityMatrix {
            matrix: h.unscale(tr),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            matrix: CMatrix::identity(d, d).unscale(d as f64),
        }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        DensityMatrix {
            matrix: linalg::outer(&psi.amplitudes),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigen(&self.matrix).0
    }

    /// `U rho U^dagger`.
    pub fn conjugate(&self, u: &CMatrix) -> DensityMatrix {
        DensityMatrix::from_physical(u * &self.matrix * u.adjoint())
    }

    /// Re-checks the invariants at tolerance `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        DensityMatrix::new(self.matrix.clone(), tol).map(|_| ())
    }

    /// Row-major `(re, im)` pairs, flattened.
    pub fn to_flat(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(2 * d * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.matrix[(i, j)];
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    pub fn from_flat(d: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != 2 * d * d {
            return Err(QstError::DimensionMismatch {
                expected: 2 * d * d,
                actual: flat.len(),
            });
        }
        let m = CMatrix::from_fn(d, d, |i, j| {
            let k = 2 * (i * d + j);
            c(flat[k], flat[k + 1])
        });
        DensityMatrix::new(m, 1e-8)
    }
}

/// A normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: CVector,
}

impl PureState {
    pub fn new(amplitudes: CVector) -> Result<Self> {
        let norm2 = amplitudes.norm_squared();
        if (norm2 - 1.0).abs() > 1e-12 {
            return Err(QstError::InvalidParameter {
                name: "amplitudes",
                reason: format!("squared norm {norm2} is not 1"),
            });
        }
        Ok(PureState { amplitudes })
    }

    /// Computational basis state `|index>`.
    pub fn basis(d: usize, index: usize) -> Self {
        let mut v = CVector::zeros(d);
        v[index] = c(1.0, 0.0);
        PureState { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::from_pure(self)
    }
}

/// Lower-triangular factor `L` with `rho proportional to L L^dagger`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    matrix: CMatrix,
}

impl LowerTriangular {
    /// Keeps the lower triangle of `m`; everything above the diagonal is dropped.
    pub fn from_matrix(m: &CMatrix) -> Self {
        let d = m.nrows();
        LowerTriangular {
            matrix: CMatrix::from_fn(d, d, |i, j| if j <= i { m[(i, j)] } else { c(0.0, 0.0) }),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `L L^dagger` without normalization.
    pub fn gram(&self) -> CMatrix {
        &self.matrix * self.matrix.adjoint()
    }
}

/// Real length-`d^2` encoding of a lower-triangular factor: the `d` diagonal
/// entries first, then real and imaginary parts of each strictly-lower entry
/// in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaVector {
    values: Vec<f64>,
}

impl AlphaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let d = (values.len() as f64).sqrt().round() as usize;
        if d == 0 || d * d != values.len() {
            return Err(QstError::ShapeMismatch(format!(
                "alpha vector length {} is not a perfect square",
                values.len()
            )));
        }
        Ok(AlphaVector { values })
    }

    pub fn dim(&self) -> usize {
        (self.values.len() as f64).sqrt().round() as usize
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Haar-random `d x d` unitary (Ginibre matrix, QR, phase-fixed R diagonal).
pub fn haar_random_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re * scale, im * scale)
    });
    let (q, r) = z.qr().unpack();
    let mut u = q;
    for k in 0..d {
        let rkk = r[(k, k)];
        let n = rkk.norm();
        let phase = if n > 0.0 { rkk / n } else { c(1.0, 0.0) };
        for i in 0..d {
            u[(i, k)] *= phase;
        }
    }
    u
}

/// `U_haar |0...0>`.
pub fn random_pure_state<R: Rng + ?Sized>(n: QubitCount, rng: &mut R) -> PureState {
    let u = haar_random_unitary(n.dim(), rng);
    PureState {
        amplitudes: u.column(0).into_owned(),
    }
}

/// `p |psi><psi| + (1 - p) I/d` for `0 < p < 1`.
pub fn mixed_state(psi: &PureState, p: f64) -> Result<DensityMatrix> {
    if !(p > 0.0 && p < 1.0) {
        return Err(QstError::InvalidParameter {
            name: "p",
            reason: format!("{p} outside (0, 1)"),
        });
    }
    Ok(blend_with_identity(psi, p))
}

/// `(1 - eps) |psi><psi| + (eps/d) I` for `0 < eps < 1e-3`.
pub fn perturb_pure(psi: &PureState, epsilon: f64) -> Result<DensityMatrix> {
    if !(epsilon > 0.0 && epsilon < 1e-3) {
        return Err(QstError::InvalidParameter {
            name: "epsilon",
            reason: format!("{epsilon} outside (0, 1e-3)"),
        });
    }
    Ok(blend_with_identity(psi, 1.0 - epsilon))
}

fn blend_with_identity(psi: &PureState, weight: f64) -> DensityMatrix {
    let d = psi.dim();
    let pure = linalg::outer(&psi.amplitudes).scale(weight);
    let noise = CMatrix::identity(d, d).scale((1.0 - weight) / d as f64);
    DensityMatrix::from_physical(pure + noise)
}

/// Direct expansion of `Tr(rho_p^2)` for the pure/identity mixture.
pub fn mixture_purity(p: f64, d: usize) -> f64 {
    let d = d as f64;
    p * p + 2.0 * p * (1.0 - p) / d + (1.0 - p) * (1.0 - p) / d
}

const ZERO_PIVOT: f64 = 1e-15;

/// Cholesky factor of a positive semidefinite matrix.
///
/// Pivots in `[-1e-10, 1e-15]` are treated as zero (the column below is
/// then zeroed, which perturbs entries by at most `sqrt(1e-15)`); anything
/// more negative is rejected.
pub fn cholesky_decompose(rho: &DensityMatrix) -> Result<LowerTriangular> {
    let a = linalg::hermitize(rho.matrix());
    let d = a.nrows();
    let mut l = CMatrix::zeros(d, d);
    for j in 0..d {
        let mut pivot = a[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if pivot < -1e-10 {
            return Err(QstError::NotPositiveDefinite { row: j, pivot });
        }
        let ljj = if pivot > ZERO_PIVOT { pivot.sqrt() } else { 0.0 };
        l[(j, j)] = c(ljj, 0.0);
        for i in (j + 1)..d {
            if ljj == 0.0 {
                continue;
            }
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular { matrix: l })
}

pub fn alpha_encode(l: &LowerTriangular) -> AlphaVector {
    let d = l.dim();
    let m = l.matrix();
    let mut values = Vec::with_capacity(d * d);
    values.extend((0..d).map(|i| m[(i, i)].re));
    for i in 1..d {
        for j in 0..i {
            values.push(m[(i, j)].re);
            values.push(m[(i, j)].im);
        }
    }
    AlphaVector { values }
}

pub fn alpha_decode(alpha: &AlphaVector) -> LowerTriangular {
    let d = alpha.dim();
    let v = &alpha.values;
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = c(v[i], 0.0);
    }
    let mut k = d;
    for i in 1..d {
        for j in 0..i {
            m[(i, j)] = c(v[k], v[k + 1]);
            k += 2;
        }
    }
    LowerTriangular { matrix: m }
}

/// `L L^dagger / Tr(L L^dagger)`; physical for any real alpha.
pub fn alpha_to_density(alpha: &AlphaVector) -> Result<DensityMatrix> {
    let gram = alpha_decode(alpha).gram();
    let tr = gram.trace().re;
    if !(tr > 1e-30) || !tr.is_finite() {
        return Err(QstError::DegenerateAlpha(tr));
    }
    Ok(DensityMatrix::from_physical(gram.unscale(tr)))
}

/// Uhlmann fidelity `Tr sqrt(sqrt(rho) sigma sqrt(rho))`, clamped to `[0, 1]`.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(QstError::DimensionMismatch {
            expected: rho.dim(),
            actual: sigma.dim(),
        });
    }
    let root = linalg::psd_sqrt(rho.matrix());
    let inner = &root * sigma.matrix() * &root;
    let (vals, _) = linalg::hermitian_eigen(&inner);
    let f: f64 = vals
        .iter()
        .map(|&v| if v > linalg::EIGEN_CLAMP { v.sqrt() } else { 0.0 })
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

pub fn infidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    Ok(1.0 - fidelity(rho, sigma)?)
}

/// The four 2x2 polarization unitaries of the path/polarization gate.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalGateParams {
    pub v1: CMatrix,
    pub v2: CMatrix,
    pub vr: CMatrix,
    pub vl: CMatrix,
}

impl OpticalGateParams {
    /// Each block is a rotation with all three angles uniform on `[0, 2 pi)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let angle = Uniform::new(0.0, TAU).expect("valid range");
        let mut block = || {
            rotation_unitary(angle.sample(rng), angle.sample(rng), angle.sample(rng))
        };
        OpticalGateParams {
            v1: block(),
            v2: block(),
            vr: block(),
            vl: block(),
        }
    }

    pub fn identity() -> Self {
        let id = CMatrix::identity(2, 2);
        OpticalGateParams {
            v1: id.clone(),
            v2: id.clone(),
            vr: id.clone(),
            vl: id,
        }
    }
}

/// Assembles `[[U_RR, U_RL], [U_LR, U_LL]]` with
/// `U_RR = V2 (VR + VL) V1 / 2`, `U_LL = (VR + VL) / 2`,
/// `U_RL = -i V2 (VR - VL) / 2`, `U_LR = i (VR - VL) V1 / 2`.
pub fn build_optical_unitary(params: &OpticalGateParams) -> Result<CMatrix> {
    let blocks = [
        ("V1", &params.v1),
        ("V2", &params.v2),
        ("VR", &params.vr),
        ("VL", &params.vl),
    ];
    for (name, b) in blocks {
        if b.shape() != (2, 2) || linalg::unitarity_defect(b) > 1e-10 {
            return Err(QstError::NonUnitaryBlock(name));
        }
    }
    let sum = &params.vr + &params.vl;
    let diff = &params.vr - &params.vl;
    let half = c(0.5, 0.0);
    let u_rr = (&params.v2 * &sum * &params.v1) * half;
    let u_ll = &sum * half;
    let u_rl = (&params.v2 * &diff) * c(0.0, -0.5);
    let u_lr = (&diff * &params.v1) * c(0.0, 0.5);

    let mut u = CMatrix::zeros(4, 4);
    u.view_mut((0, 0), (2, 2)).copy_from(&u_rr);
    u.view_mut((0, 2), (2, 2)).copy_from(&u_rl);
    u.view_mut((2, 0), (2, 2)).copy_from(&u_lr);
    u.view_mut((2, 2), (2, 2)).copy_from(&u_ll);
    Ok(u)
}

/// High-purity 2-qubit basis states: mixtures with `p` uniform on
/// `[0.995, 1)`, giving direct purity above 0.99.
pub fn optical_basis_states<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<DensityMatrix> {
    let p_dist = Uniform::new(0.995, 1.0).expect("valid range");
    (0..count)
        .map(|_| {
            let psi = random_pure_state(QubitCount::TWO, rng);
            let p = p_dist.sample(rng);
            blend_with_identity(&psi, p)
        })
        .collect()
}

/// Each basis state followed by `gates_per_state` random-gate conjugations of it.
pub fn optical_state_family<R: Rng + ?Sized>(
    basis_states: &[DensityMatrix],
    gates_per_state: usize,
    rng: &mut R,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(basis_states.len() * (1 + gates_per_state));
    for rho in basis_states {
        if rho.dim() != 4 {
            return Err(QstError::DimensionMismatch {
                expected: 4,
                actual: rho.dim(),
            });
        }
        out.push(rho.clone());
        for _ in 0..gates_per_state {
            let u = build_optical_unitary(&OpticalGateParams::random(rng))?;
            out.push(rho.conjugate(&u));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn diag(values: &[f64]) -> DensityMatrix {
        let d = values.len();
        let m = CMatrix::from_fn(d, d, |i, j| if i == j { c(values[i], 0.0) } else { c(0.0, 0.0) });
        DensityMatrix::new(m, 1e-12).unwrap()
    }

    #[test]
    fn qubit_count_rejects_unsupported() {
        assert!(QubitCount::new(1).is_err());
        assert!(QubitCount::new(4).is_err());
        assert_eq!(QubitCount::new(3).unwrap().dim(), 8);
    }

    #[test]
    fn haar_unitary_has_unimodular_determinant() {
        let u = haar_random_unitary(2, &mut rng(3));
        assert!(linalg::unitarity_defect(&u) < 1e-10);
        assert!((u.determinant().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn haar_unitary_is_seed_deterministic() {
        let a = haar_random_unitary(4, &mut rng(11));
        let b = haar_random_unitary(4, &mut rng(11));
        assert_eq!(a, b);
    }

    #[test]
    fn haar_second_moment() {
        // E|U_00|^2 = 1/d under the Haar measure.
        let mut r = rng(5);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| haar_random_unitary(2, &mut r)[(0, 0)].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn pure_state_norm_and_moment() {
        let mut r = rng(8);
        let psi = random_pure_state(QubitCount::TWO, &mut r);
        assert!((psi.amplitudes().norm_squared() - 1.0).abs() < 1e-12);
        assert!((psi.to_density().purity() - 1.0).abs() < 1e-10);
        let draws = 10_000;
        let mean: f64 = (0..draws)
            .map(|_| random_pure_state(QubitCount::TWO, &mut r).amplitudes()[0].norm_sqr())
            .sum::<f64>()
            / draws as f64;
        assert!((mean - 0.25).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn mixed_state_purity_values() {
        let psi = random_pure_state(QubitCount::TWO, &mut rng(1));
        let half = mixed_state(&psi, 0.5).unwrap();
        assert!((half.purity() - 0.4375).abs() < 1e-12);
        let ninety = mixed_state(&psi, 0.9).unwrap();
        assert!((ninety.purity() - 0.8575).abs() < 1e-12);
        let nearly_pure = mixed_state(&psi, 1.0 - 1e-12).unwrap();
        assert!((nearly_pure.purity() - 1.0).abs() < 1e-9);
        assert!(mixed_state(&psi, 0.0).is_err());
        assert!(mixed_state(&psi, 1.0).is_err());
    }

    #[test]
    fn perturbation_spectrum() {
        let psi = PureState::basis(4, 0);
        let rho = perturb_pure(&psi, 1e-7).unwrap();
        let ev = rho.eigenvalues();
        for &v in &ev[..3] {
            assert!((v - 2.5e-8).abs() < 1e-12);
        }
        assert!((ev[3] - (1.0 - 0.75e-7)).abs() < 1e-12);
        assert!(fidelity(&rho, &psi.to_density()).unwrap() >= 1.0 - 1e-7);
        assert!(cholesky_decompose(&rho).is_ok());
        assert!(perturb_pure(&psi, 1e-3).is_err());
        assert!(perturb_pure(&psi, 0.0).is_err());
    }

    #[test]
    fn cholesky_of_identity() {
        let l = cholesky_decompose(&DensityMatrix::maximally_mixed(4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 0.5 } else { 0.0 };
                assert!((l.matrix()[(i, j)] - c(expected, 0.0)).norm() < 1e-15);
            }
        }
        let alpha = alpha_encode(&l);
        let mut expected = vec![0.0; 16];
        expected[..4].fill(0.5);
        assert_eq!(alpha.values(), expected.as_slice());
    }

    #[test]
    fn cholesky_rank_deficient_after_perturbation() {
        let rho = perturb_pure(&PureState::basis(4, 0), 1e-7).unwrap();
        let l = cholesky_decompose(&rho).unwrap();
        assert!(linalg::max_abs_diff(&l.gram(), rho.matrix()) < 1e-7);
    }

    #[test]
    fn cholesky_clamps_tiny_negative_pivots_and_rejects_large_ones() {
        let ok = diag(&[1.0, 0.0, 0.0, 0.0]);
        let l = cholesky_decompose(&ok).unwrap();
        assert!(linalg::max_abs_diff(&l.gram(), ok.matrix()) < 1e-15);

        let bad = DensityMatrix {
            matrix: CMatrix::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => c(1.1, 0.0),
                (1, 1) => c(-0.1, 0.0),
                _ => c(0.0, 0.0),
            }),
        };
        assert!(matches!(
            cholesky_decompose(&bad),
            Err(QstError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn alpha_layout_two_dim() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.3, 0.0), c(0.0, 0.0), c(0.4, -0.2), c(0.7, 0.0)]);
        let l = LowerTriangular::from_matrix(&m);
        let a = alpha_encode(&l);
        assert_eq!(a.values(), &[0.3, 0.7, 0.4, -0.2]);
        assert_eq!(alpha_decode(&a), l);
    }

    #[test]
    fn alpha_to_density_is_scale_invariant_and_physical() {
        let mut r = rng(21);
        let psi = random_pure_state(QubitCount::TWO, &mut r);
        let rho = mixed_state(&psi, 0.5).unwrap();
        let alpha = alpha_encode(&cholesky_decompose(&rho).unwrap());
        let back = alpha_to_density(&alpha).unwrap();
        assert!(linalg::max_abs_diff(back.matrix(), rho.matrix()) < 1e-10);

        let tripled = AlphaVector::new(alpha.values().iter().map(|v| 3.0 * v).collect()).unwrap();
        let again = alpha_to_density(&tripled).unwrap();
        assert!(linalg::max_abs_diff(again.matrix(), back.matrix()) < 1e-12);

        let neg = AlphaVector::new((0..16).map(|k| if k < 4 { -0.3 - k as f64 } else { 0.1 * k as f64 }).collect()).unwrap();
        alpha_to_density(&neg).unwrap().check(1e-10).unwrap();

        let zero = AlphaVector::new(vec![0.0; 16]).unwrap();
        assert!(matches!(alpha_to_density(&zero), Err(QstError::DegenerateAlpha(_))));
    }

    #[test]
    fn fidelity_reference_values() {
        let zero = PureState::basis(2, 0).to_density();
        let one = PureState::basis(2, 1).to_density();
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((fidelity(&zero, &zero).unwrap() - 1.0).abs() < 1e-9);
        assert!(fidelity(&zero, &one).unwrap().abs() < 1e-9);
        assert!((fidelity(&zero, &mixed).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((infidelity(&zero, &mixed).unwrap() - (1.0 - 0.5f64.sqrt())).abs() < 1e-9);
        assert!((infidelity(&zero, &one).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(
            fidelity(&zero, &DensityMatrix::maximally_mixed(4)),
            Err(QstError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn optical_unitary_reference_cases() {
        let u = build_optical_unitary(&OpticalGateParams::identity()).unwrap();
        assert!(linalg::max_abs_diff(&u, &CMatrix::identity(4, 4)) < 1e-15);

        let id = CMatrix::identity(2, 2);
        let params = OpticalGateParams {
            v1: id.clone(),
            v2: id.clone(),
            vr: id.clone(),
            vl: -id.clone(),
        };
        let u = build_optical_unitary(&params).unwrap();
        let block = |r: usize, col: usize| u.view((r, col), (2, 2)).into_owned();
        assert!(linalg::max_abs_diff(&block(0, 0), &CMatrix::zeros(2, 2)) < 1e-15);
        assert!(linalg::max_abs_diff(&block(2, 2), &CMatrix::zeros(2, 2)) < 1e-15);
        assert!(linalg::max_abs_diff(&block(0, 2), &(&id * c(0.0, -1.0))) < 1e-15);
        assert!(linalg::max_abs_diff(&block(2, 0), &(&id * c(0.0, 1.0))) < 1e-15);
        assert!(linalg::unitarity_defect(&u) < 1e-12);

        let mut broken = OpticalGateParams::identity();
        broken.vr[(0, 0)] = c(2.0, 0.0);
        assert!(matches!(
            build_optical_unitary(&broken),
            Err(QstError::NonUnitaryBlock("VR"))
        ));
    }

    #[test]
    fn optical_family_counts() {
        let mut r = rng(4);
        let basis = optical_basis_states(1, &mut r);
        assert!(basis[0].purity() > 0.99);
        let alone = optical_state_family(&basis, 0, &mut r).unwrap();
        assert_eq!(alone.len(), 1);
        assert_eq!(alone[0], basis[0]);
    }
}
