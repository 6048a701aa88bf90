//! Iterative maximum-likelihood reconstruction (R rho R with a diluted fallback).

use crate::error::{QstError, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::lre::{lre_estimate, project_to_physical};
use crate::measure::MeasurementSuite;
use crate::qstate::{infidelity, DensityMatrix};
use crate::sampling::FrequencyVector;

const ZERO_PROBABILITY: f64 = 1e-14;
const REGULARIZER: f64 = 1e-12;
const DILUTION: f64 = 0.1;
const MAX_HALVINGS: usize = 30;
const MAX_DOUBLINGS: usize = 40;
const GRADIENT_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleConfig {
    /// Stop once the infidelity between successive iterates drops below this.
    pub stop_gap: f64,
    pub max_iters: usize,
    /// Step mixing for every iteration; 1 is the plain R rho R map.
    pub diluted_step: f64,
    /// After an accepted plain step, also line-search along that step and
    /// along `R - I` (doubling step lengths, projected back onto density
    /// matrices) and keep the best likelihood. The projected linear-inversion
    /// estimate is offered once as well. Fixed points are unchanged; near
    /// rank-deficient optima the plain map only converges like `1/k`.
    pub accelerate: bool,
}

impl Default for MleConfig {
    fn default() -> Self {
        MleConfig {
            stop_gap: 1e-8,
            max_iters: 20_000,
            diluted_step: 1.0,
            accelerate: true,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_gap > 0.0) {
            return Err(QstError::InvalidParameter {
                name: "stop_gap",
                reason: format!("{} must be > 0", self.stop_gap),
            });
        }
        if self.max_iters == 0 {
            return Err(QstError::InvalidParameter {
                name: "max_iters",
                reason: "must be >= 1".into(),
            });
        }
        if !(self.diluted_step > 0.0 && self.diluted_step <= 1.0) {
            return Err(QstError::InvalidParameter {
                name: "diluted_step",
                reason: format!("{} outside (0, 1]", self.diluted_step),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub state: DensityMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Infidelity between the last two iterates.
    pub final_gap: f64,
    /// Log-likelihood after every accepted iteration, starting with `I/d`.
    pub log_likelihood: Vec<f64>,
}

struct Problem<'a> {
    vectors: Vec<CVector>,
    projectors: Vec<CMatrix>,
    freq: &'a [f64],
    sets: f64,
    dim: usize,
}

impl Problem<'_> {
    fn probabilities(&self, rho: &CMatrix) -> Vec<f64> {
        self.vectors.iter().map(|m| linalg::expectation(rho, m)).collect()
    }

    fn log_likelihood(&self, probs: &[f64]) -> f64 {
        self.freq
            .iter()
            .zip(probs)
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, p)| f * p.max(f64::MIN_POSITIVE).ln())
            .sum()
    }

    fn starved(&self, probs: &[f64]) -> Option<usize> {
        self.freq
            .iter()
            .zip(probs)
            .position(|(f, p)| *f > 0.0 && *p < ZERO_PROBABILITY)
    }

    /// `R = sum_i (f_i / p_i) P_i / K`; equals the identity at the optimum.
    fn r_operator(&self, probs: &[f64]) -> CMatrix {
        let mut r = CMatrix::zeros(self.dim, self.dim);
        for ((p_op, f), p) in self.projectors.iter().zip(self.freq).zip(probs) {
            if *f > 0.0 {
                r += p_op * linalg::c(f / p / self.sets, 0.0);
            }
        }
        r
    }
}

fn sandwich(r: &CMatrix, rho: &CMatrix) -> CMatrix {
    let m = r * rho * r;
    let tr = m.trace().re;
    linalg::hermitize(&m.unscale(tr))
}

fn diluted(r: &CMatrix, eps: f64) -> CMatrix {
    let d = r.nrows();
    (CMatrix::identity(d, d) + r.scale(eps)).unscale(1.0 + eps)
}

struct Iterate {
    rho: CMatrix,
    probs: Vec<f64>,
    ll: f64,
}

impl Iterate {
    fn new(problem: &Problem, rho: CMatrix) -> Self {
        let probs = problem.probabilities(&rho);
        let ll = problem.log_likelihood(&probs);
        Iterate { rho, probs, ll }
    }

    /// Replaces `self` if `trial` has a clearly larger likelihood.
    fn offer(&mut self, problem: &Problem, trial: CMatrix) -> bool {
        let next = Iterate::new(problem, trial);
        let better = next.ll > self.ll + 1e-15 * self.ll.abs().max(1.0) && problem.starved(&next.probs).is_none();
        if better {
            *self = next;
        }
        better
    }
}

/// Extra trial points after an accepted plain step from `rho` to `best`:
/// extrapolation of the step in factor space (`rho = A A^dag`, `A -> R A`),
/// spectral truncation to every lower rank, and a projected search along
/// `R - I`. Each is kept only if it raises the likelihood.
fn accelerate(problem: &Problem, rho: &CMatrix, r: &CMatrix, best: &mut Iterate) -> Result<()> {
    let d = problem.dim;
    let a = linalg::psd_sqrt(rho);
    let ra = r * &a;
    let norm = (&ra * ra.adjoint()).trace().re.sqrt();
    let step = ra.unscale(norm) - &a;
    let mut alpha = 2.0;
    for _ in 0..MAX_DOUBLINGS {
        let f = &a + step.scale(alpha);
        let m = &f * f.adjoint();
        if !best.offer(problem, linalg::hermitize(&m.unscale(m.trace().re))) {
            break;
        }
        alpha *= 2.0;
    }

    let (values, vectors) = linalg::hermitian_eigen(&best.rho);
    let mut truncated: Option<Iterate> = None;
    for dropped in 1..d {
        let total: f64 = values[dropped..].iter().sum();
        let kept: Vec<f64> = (0..d).map(|i| if i < dropped { 0.0 } else { values[i] / total }).collect();
        let trial = Iterate::new(problem, linalg::from_spectrum(&kept, &vectors));
        if problem.starved(&trial.probs).is_none() && truncated.as_ref().is_none_or(|t| trial.ll > t.ll) {
            truncated = Some(trial);
        }
    }
    if let Some(t) = truncated {
        best.offer(problem, t.rho);
    }

    let gradient = problem.r_operator(&best.probs) - CMatrix::identity(d, d);
    let base = best.rho.clone();
    let mut alpha = GRADIENT_STEP;
    for _ in 0..MAX_DOUBLINGS {
        let trial = project_to_physical(&(&base + gradient.scale(alpha)))?.into_matrix();
        if !best.offer(problem, trial) {
            break;
        }
        alpha *= 2.0;
    }
    Ok(())
}

/// Maximum-likelihood estimate from per-set frequencies, starting at `I/d`.
///
/// For incomplete suites the maximizer is not unique; the deterministic
/// fixed point reached from `I/d` is returned.
pub fn mle_estimate(
    freq: &FrequencyVector,
    suite: &MeasurementSuite,
    cfg: &MleConfig,
) -> Result<MleOutcome> {
    cfg.validate()?;
    freq.check_against(suite)?;
    let d = suite.dim();
    let problem = Problem {
        vectors: suite.vectors().cloned().collect(),
        projectors: suite.vectors().map(linalg::outer).collect(),
        freq: freq.values(),
        sets: suite.set_count() as f64,
        dim: d,
    };

    let mut rho = CMatrix::identity(d, d).unscale(d as f64);
    let mut probs = problem.probabilities(&rho);
    let mut ll = problem.log_likelihood(&probs);
    let mut history = vec![ll];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut inversion = if cfg.accelerate { lre_estimate(freq, suite).ok() } else { None };

    while iterations < cfg.max_iters {
        iterations += 1;
        if problem.starved(&probs).is_some() {
            let mix = CMatrix::identity(d, d).scale(REGULARIZER / d as f64);
            rho = rho.scale(1.0 - REGULARIZER) + mix;
            probs = problem.probabilities(&rho);
            if let Some(i) = problem.starved(&probs) {
                return Err(QstError::ZeroProbability {
                    index: i,
                    frequency: problem.freq[i],
                });
            }
            ll = problem.log_likelihood(&probs);
        }

        let r = problem.r_operator(&probs);
        let step = if cfg.diluted_step < 1.0 { diluted(&r, cfg.diluted_step) } else { r.clone() };
        let mut candidate = sandwich(&step, &rho);
        let mut cand_probs = problem.probabilities(&candidate);
        let mut cand_ll = problem.log_likelihood(&cand_probs);

        let slack = 1e-14 * ll.abs().max(1.0);
        if cand_ll > ll && cfg.accelerate && cfg.diluted_step == 1.0 {
            let mut best = Iterate {
                rho: candidate,
                probs: cand_probs,
                ll: cand_ll,
            };
            if let Some(guess) = inversion.take() {
                best.offer(&problem, guess.into_matrix());
            }
            accelerate(&problem, &rho, &r, &mut best)?;
            (candidate, cand_probs, cand_ll) = (best.rho, best.probs, best.ll);
        }
        if cand_ll < ll - slack {
            let mut eps = DILUTION;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                candidate = sandwich(&diluted(&r, eps), &rho);
                cand_probs = problem.probabilities(&candidate);
                cand_ll = problem.log_likelihood(&cand_probs);
                if cand_ll >= ll - slack {
                    accepted = true;
                    break;
                }
                eps *= 0.5;
            }
            if !accepted {
                // No ascent direction left at machine precision.
                converged = true;
                gap = 0.0;
                break;
            }
        }

        let current = DensityMatrix::from_physical(rho.clone());
        let next = DensityMatrix::from_physical(candidate.clone());
        gap = infidelity(&current, &next)?;
        rho = candidate;
        probs = cand_probs;
        ll = cand_ll;
        history.push(ll);
        if gap < cfg.stop_gap {
            converged = true;
            break;
        }
    }

    Ok(MleOutcome {
        state: DensityMatrix::from_physical(rho),
        iterations,
        converged,
        final_gap: gap,
        log_likelihood: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{cube_suite, mub_suite_2q, truncate_suite};
    use crate::qstate::{mixed_state, random_pure_state, QubitCount};
    use crate::sampling::exact_frequencies;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn maximally_mixed_is_a_fixed_point() {
        let mixed = DensityMatrix::maximally_mixed(4);
        for suite in [cube_suite(QubitCount::TWO), truncate_suite(&mub_suite_2q(), 2).unwrap()] {
            let f = exact_frequencies(&mixed, &suite).unwrap();
            let out = mle_estimate(&f, &suite, &MleConfig::default()).unwrap();
            assert!(out.converged);
            assert!(out.iterations <= 2);
            assert!(linalg::max_abs_diff(out.state.matrix(), mixed.matrix()) < 1e-12);
        }
    }

    #[test]
    fn exact_data_recovers_mixed_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let suite = cube_suite(QubitCount::TWO);
        let rho = mixed_state(&random_pure_state(QubitCount::TWO, &mut rng), 0.5).unwrap();
        let out = mle_estimate(&exact_frequencies(&rho, &suite).unwrap(), &suite, &MleConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.final_gap < 1e-8);
        assert!(infidelity(&rho, &out.state).unwrap() < 1e-6);
        for w in out.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-14 * w[0].abs().max(1.0));
        }
        out.state.check(1e-9).unwrap();
    }

    #[test]
    fn exact_data_recovers_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for suite in [cube_suite(QubitCount::TWO), mub_suite_2q()] {
            for _ in 0..5 {
                let rho = random_pure_state(QubitCount::TWO, &mut rng).to_density();
                let f = exact_frequencies(&rho, &suite).unwrap();
                let out = mle_estimate(&f, &suite, &MleConfig::default()).unwrap();
                assert!(out.converged);
                let inf = infidelity(&rho, &out.state).unwrap();
                assert!(inf < 1e-6, "infidelity {inf} after {} iterations", out.iterations);
            }
        }
    }

    #[test]
    fn plain_iteration_is_slow_on_pure_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let suite = cube_suite(QubitCount::TWO);
        let rho = random_pure_state(QubitCount::TWO, &mut rng).to_density();
        let f = exact_frequencies(&rho, &suite).unwrap();
        let plain = MleConfig { accelerate: false, max_iters: 500, ..MleConfig::default() };
        let fast = MleConfig { max_iters: 500, ..MleConfig::default() };
        let a = infidelity(&rho, &mle_estimate(&f, &suite, &plain).unwrap().state).unwrap();
        let b = infidelity(&rho, &mle_estimate(&f, &suite, &fast).unwrap().state).unwrap();
        assert!(b < a);
    }

    #[test]
    fn deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let suite = mub_suite_2q();
        let rho = mixed_state(&random_pure_state(QubitCount::TWO, &mut rng), 0.8).unwrap();
        let f = exact_frequencies(&rho, &suite).unwrap();
        let a = mle_estimate(&f, &suite, &MleConfig::default()).unwrap();
        let b = mle_estimate(&f, &suite, &MleConfig::default()).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let suite = cube_suite(QubitCount::TWO);
        let rho = mixed_state(&random_pure_state(QubitCount::TWO, &mut rng), 0.9).unwrap();
        let cfg = MleConfig { max_iters: 2, accelerate: false, ..MleConfig::default() };
        let out = mle_estimate(&exact_frequencies(&rho, &suite).unwrap(), &suite, &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }

    #[test]
    fn rejects_bad_config_and_shapes() {
        let suite = cube_suite(QubitCount::TWO);
        let f = exact_frequencies(&DensityMatrix::maximally_mixed(4), &suite).unwrap();
        let bad = MleConfig { stop_gap: 0.0, ..MleConfig::default() };
        assert!(mle_estimate(&f, &suite, &bad).is_err());
        assert!(mle_estimate(&f, &mub_suite_2q(), &MleConfig::default()).is_err());
    }
}
