#![allow(dead_code)]

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

pub type CM = DMatrix<Complex<f64>>;

/// Random Hermitian matrix with unit trace and eigenvalues of both signs.
pub fn random_unit_trace_hermitian<R: Rng>(d: usize, rng: &mut R) -> CM {
    let mut h = CM::from_fn(d, d, |_, _| {
        Complex::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    h = (&h + h.adjoint()).scale(0.25);
    let shift = (Complex::new(1.0, 0.0) - h.trace()) / Complex::new(d as f64, 0.0);
    for i in 0..d {
        h[(i, i)] += shift;
    }
    h
}

/// Frobenius projection onto density matrices by exhaustive active-set
/// search: for each candidate support of the spectrum solve the equality
/// constrained QP in closed form, keep the feasible one nearest to `h`.
pub fn brute_force_projection(h: &CM) -> CM {
    let d = h.nrows();
    let eig = h.clone().symmetric_eigen();
    let lam: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let tau = (1.0 - support.iter().map(|&i| lam[i]).sum::<f64>()) / support.len() as f64;
        let x: Vec<f64> = (0..d)
            .map(|i| if mask & (1 << i) != 0 { lam[i] + tau } else { 0.0 })
            .collect();
        if x.iter().any(|v| *v < -1e-15) {
            continue;
        }
        let dist: f64 = x.iter().zip(&lam).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
            best = Some((dist, x));
        }
    }
    let x = best.expect("some support is always feasible").1;
    let v = &eig.eigenvectors;
    let diag = CM::from_fn(d, d, |i, j| if i == j { Complex::new(x[i].max(0.0), 0.0) } else { Complex::new(0.0, 0.0) });
    v * diag * v.adjoint()
}

/// KKT residual of `p` as the projection of `h`: `h - p = c I - Z` with
/// `Z >= 0`, `Z p = 0`. Returns the largest violation.
pub fn projection_kkt_violation(h: &CM, p: &CM) -> f64 {
    let d = h.nrows();
    let diff = h - p;
    let peig = p.clone().symmetric_eigen();
    // c from the support of p: on it, (h - p) v = c v.
    let mut c_sum = 0.0;
    let mut count = 0;
    for k in 0..d {
        if peig.eigenvalues[k] > 1e-9 {
            let v = peig.eigenvectors.column(k);
            c_sum += (v.adjoint() * &diff * v)[(0, 0)].re;
            count += 1;
        }
    }
    let c = c_sum / count as f64;
    let z = CM::identity(d, d).scale(c) - &diff;
    let zmin = z.clone().symmetric_eigen().eigenvalues.min();
    let comp = (&z * p).norm();
    let trace = (p.trace().re - 1.0).abs();
    let pmin = peig.eigenvalues.min();
    [(-zmin).max(0.0), comp, trace, (-pmin).max(0.0)].into_iter().fold(0.0, f64::max)
}

pub fn frobenius(a: &CM, b: &CM) -> f64 {
    (a - b).norm()
}
