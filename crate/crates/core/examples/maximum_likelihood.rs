//! Iterative maximum-likelihood estimation, plain and accelerated.
use dnnqst::measure::mub_suite_2q;
use dnnqst::mle::{mle_estimate, MleConfig};
use dnnqst::qstate::{infidelity, mixed_state, random_pure_state, QubitCount};
use dnnqst::sampling::{exact_frequencies, sample_frequencies, ShotBudget};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dnnqst::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let rho = mixed_state(&random_pure_state(QubitCount::TWO, &mut rng), 0.95)?;
    let suite = mub_suite_2q();

    let exact = exact_frequencies(&rho, &suite)?;
    let plain = MleConfig { accelerate: false, ..MleConfig::default() };
    for (name, cfg) in [("plain", plain), ("accelerated", MleConfig::default())] {
        let out = mle_estimate(&exact, &suite, &cfg)?;
        println!(
            "{name:>11}: {:>5} iterations, converged {}, infidelity {:.2e}",
            out.iterations,
            out.converged,
            infidelity(&rho, &out.state)?
        );
    }

    let f = sample_frequencies(&rho, &suite, ShotBudget::new(200)?, &mut rng)?;
    let out = mle_estimate(&f, &suite, &MleConfig::default())?;
    let ll = &out.log_likelihood;
    println!(
        "S = 200: log-likelihood {:.5} -> {:.5} in {} iterations, infidelity {:.4}",
        ll[0],
        ll[ll.len() - 1],
        out.iterations,
        infidelity(&rho, &out.state)?
    );
    Ok(())
}
