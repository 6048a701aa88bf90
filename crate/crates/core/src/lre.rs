//! Linear regression estimation followed by projection onto physical states.

use nalgebra::{DMatrix, DVector};

use crate::error::{QstError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::measure::MeasurementSuite;
use crate::qstate::DensityMatrix;
use crate::sampling::FrequencyVector;

/// Weight of the appended trace row relative to the data rows.
pub const TRACE_ROW_WEIGHT: f64 = 1e3;

/// Singular values at or below this are dropped from the pseudoinverse.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

/// Linear map from the real Hermitian-basis coordinates of `rho` to the
/// Born probabilities of each projector, plus a weighted trace row.
///
/// Coordinates: `d` diagonal entries, then for each `j < k` the real and
/// imaginary parts of `rho[j][k]`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    dim: usize,
    operators: usize,
    matrix: DMatrix<f64>,
    pinv: DMatrix<f64>,
    rank: usize,
}

impl DesignMatrix {
    pub fn new(suite: &MeasurementSuite) -> Result<Self> {
        let d = suite.dim();
        let operators = suite.operator_count();
        let cols = d * d;
        let mut matrix = DMatrix::zeros(operators + 1, cols);
        for (row, m) in suite.vectors().enumerate() {
            fill_row(&mut matrix, row, m);
        }
        for j in 0..d {
            matrix[(operators, j)] = TRACE_ROW_WEIGHT;
        }
        let svd = matrix.clone().svd(true, true);
        let rank = svd.singular_values.iter().filter(|&&s| s > SINGULAR_CUTOFF).count();
        if rank < 2 {
            return Err(QstError::DegenerateDesign(rank));
        }
        let pinv = svd
            .pseudo_inverse(SINGULAR_CUTOFF)
            .map_err(|_| QstError::DegenerateDesign(rank))?;
        Ok(DesignMatrix {
            dim: d,
            operators,
            matrix,
            pinv,
            rank,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Data rows only (without the trace row).
    pub fn data_rows(&self) -> DMatrix<f64> {
        self.matrix.rows(0, self.operators).into_owned()
    }

    /// Minimum-norm least-squares Hermitian solution, before projection.
    pub fn solve_hermitian(&self, freq: &FrequencyVector) -> Result<CMatrix> {
        if freq.len() != self.operators || freq.set_size() != self.dim {
            return Err(QstError::DimensionMismatch {
                expected: self.operators,
                actual: freq.len(),
            });
        }
        let mut rhs = DVector::zeros(self.operators + 1);
        rhs.rows_mut(0, self.operators).copy_from_slice(freq.values());
        rhs[self.operators] = TRACE_ROW_WEIGHT;
        let x = &self.pinv * rhs;
        Ok(coords_to_hermitian(self.dim, x.as_slice()))
    }

    /// Born probabilities of the ideal projectors for Hermitian `h`.
    pub fn predict(&self, h: &CMatrix) -> Vec<f64> {
        let x = DVector::from_vec(hermitian_to_coords(h));
        (self.data_rows() * x).iter().copied().collect()
    }
}

fn fill_row(matrix: &mut DMatrix<f64>, row: usize, m: &CVector) {
    let d = m.len();
    for j in 0..d {
        matrix[(row, j)] = m[j].norm_sqr();
    }
    let mut col = d;
    for j in 0..d {
        for k in (j + 1)..d {
            let z = m[j].conj() * m[k];
            matrix[(row, col)] = 2.0 * z.re;
            matrix[(row, col + 1)] = -2.0 * z.im;
            col += 2;
        }
    }
}

fn coords_to_hermitian(d: usize, x: &[f64]) -> CMatrix {
    let mut h = CMatrix::zeros(d, d);
    for j in 0..d {
        h[(j, j)] = c(x[j], 0.0);
    }
    let mut col = d;
    for j in 0..d {
        for k in (j + 1)..d {
            let z = c(x[col], x[col + 1]);
            h[(j, k)] = z;
            h[(k, j)] = z.conj();
            col += 2;
        }
    }
    h
}

fn hermitian_to_coords(h: &CMatrix) -> Vec<f64> {
    let d = h.nrows();
    let mut x: Vec<f64> = (0..d).map(|j| h[(j, j)].re).collect();
    for j in 0..d {
        for k in (j + 1)..d {
            x.push(h[(j, k)].re);
            x.push(h[(j, k)].im);
        }
    }
    x
}

/// Least-squares inversion on a cached design, then physical projection.
pub fn lre_estimate_with(freq: &FrequencyVector, design: &DesignMatrix) -> Result<DensityMatrix> {
    project_to_physical(&design.solve_hermitian(freq)?)
}

pub fn lre_estimate(freq: &FrequencyVector, suite: &MeasurementSuite) -> Result<DensityMatrix> {
    freq.check_against(suite)?;
    lre_estimate_with(freq, &DesignMatrix::new(suite)?)
}

/// Euclidean projection of `values` onto the probability simplex.
///
/// The vector is first shifted onto the unit-sum hyperplane; then, scanning
/// from the smallest entry, negative entries are zeroed and their mass is
/// spread evenly over the entries that remain.
pub fn project_simplex(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let shift = (1.0 - values.iter().sum::<f64>()) / n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i] + shift).collect();

    let mut kept = n;
    let mut carried = 0.0;
    while kept > 0 && sorted[kept - 1] + carried / (kept as f64) < 0.0 {
        carried += sorted[kept - 1];
        kept -= 1;
    }
    let mut out = vec![0.0; n];
    for (rank, &i) in order.iter().enumerate().take(kept) {
        out[i] = sorted[rank] + carried / kept as f64;
    }
    out
}

/// Frobenius-nearest density matrix to a Hermitian matrix.
pub fn project_to_physical(h: &CMatrix) -> Result<DensityMatrix> {
    let defect = linalg::hermitian_defect(h);
    if defect > 1e-8 {
        return Err(QstError::NotHermitian(defect));
    }
    let (values, vectors) = linalg::hermitian_eigen(h);
    let projected = project_simplex(&values);
    Ok(DensityMatrix::from_physical(linalg::from_spectrum(&projected, &vectors)))
}
