//! Born-rule probabilities and finite-shot frequency vectors.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{QstError, Result};
use crate::linalg;
use crate::measure::{MeasurementSuite, ProjectorSet};
use crate::qstate::DensityMatrix;

/// Per-set outcome frequencies concatenated in suite order; the estimator input.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    set_size: usize,
    values: Vec<f64>,
}

impl FrequencyVector {
    /// Wraps raw values, checking that every block of `set_size` entries is a
    /// probability vector (sums to 1 within 1e-9).
    pub fn new(set_size: usize, values: Vec<f64>) -> Result<Self> {
        if set_size == 0 || values.is_empty() || values.len() % set_size != 0 {
            return Err(QstError::ShapeMismatch(format!(
                "{} values cannot be split into sets of {set_size}",
                values.len()
            )));
        }
        for (k, block) in values.chunks(set_size).enumerate() {
            let sum: f64 = block.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || block.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(QstError::InvalidParameter {
                    name: "frequencies",
                    reason: format!("set {k} is not a probability vector (sum {sum})"),
                });
            }
        }
        Ok(FrequencyVector { set_size, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn set_count(&self) -> usize {
        self.values.len() / self.set_size
    }

    pub fn blocks(&self) -> std::slice::Chunks<'_, f64> {
        self.values.chunks(self.set_size)
    }

    /// Errors unless this vector has the layout of `suite`.
    pub fn check_against(&self, suite: &MeasurementSuite) -> Result<()> {
        if self.set_size != suite.dim() || self.values.len() != suite.operator_count() {
            return Err(QstError::DimensionMismatch {
                expected: suite.operator_count(),
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Copies per measurement operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotBudget {
    per_operator: u64,
}

impl ShotBudget {
    pub fn new(per_operator: u64) -> Result<Self> {
        if per_operator == 0 {
            return Err(QstError::InvalidParameter {
                name: "copies",
                reason: "S must be at least 1".into(),
            });
        }
        Ok(ShotBudget { per_operator })
    }

    pub fn per_operator(&self) -> u64 {
        self.per_operator
    }

    /// `N = S k`.
    pub fn total_copies(&self, suite: &MeasurementSuite) -> u64 {
        self.per_operator * suite.operator_count() as u64
    }
}

/// `p_i = <m_i|rho|m_i>`, clamped to `[0, 1]`.
pub fn born_probabilities(rho: &DensityMatrix, set: &ProjectorSet) -> Result<Vec<f64>> {
    if rho.dim() != set.dim() {
        return Err(QstError::DimensionMismatch {
            expected: set.dim(),
            actual: rho.dim(),
        });
    }
    Ok(set
        .vectors()
        .iter()
        .map(|v| linalg::expectation(rho.matrix(), v).clamp(0.0, 1.0))
        .collect())
}

/// Infinite-copy frequencies: Born probabilities of every set, in order.
pub fn exact_frequencies(rho: &DensityMatrix, suite: &MeasurementSuite) -> Result<FrequencyVector> {
    let mut values = Vec::with_capacity(suite.operator_count());
    for set in suite.sets() {
        values.extend(born_probabilities(rho, set)?);
    }
    Ok(FrequencyVector {
        set_size: suite.dim(),
        values,
    })
}

/// One multinomial draw of `S d` trials per set; each block reports counts / (S d).
pub fn sample_frequencies<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    suite: &MeasurementSuite,
    budget: ShotBudget,
    rng: &mut R,
) -> Result<FrequencyVector> {
    let d = suite.dim();
    let trials = budget.per_operator * d as u64;
    let mut values = Vec::with_capacity(suite.operator_count());
    for set in suite.sets() {
        let probs = born_probabilities(rho, set)?;
        let counts = multinomial(trials, &probs, rng);
        values.extend(counts.iter().map(|&k| k as f64 / trials as f64));
    }
    Ok(FrequencyVector {
        set_size: d,
        values,
    })
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial<R: Rng + ?Sized>(trials: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    let mut remaining_n = trials;
    let mut remaining_p = 1.0f64;
    let mut counts = vec![0u64; probs.len()];
    for (i, p) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        let p = p.max(0.0) / total;
        if i + 1 == probs.len() {
            counts[i] = remaining_n;
            break;
        }
        let cond = if remaining_p > 0.0 { (p / remaining_p).clamp(0.0, 1.0) } else { 1.0 };
        let k = if cond == 0.0 {
            0
        } else if cond == 1.0 {
            remaining_n
        } else {
            Binomial::new(remaining_n, cond).expect("probability in [0, 1]").sample(rng)
        };
        counts[i] = k;
        remaining_n -= k;
        remaining_p -= p;
    }
    counts
}
