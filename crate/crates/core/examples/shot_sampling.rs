//! Born-rule probabilities versus finite-copy frequencies.
use dnnqst::measure::cube_suite;
use dnnqst::qstate::{random_pure_state, QubitCount};
use dnnqst::sampling::{exact_frequencies, sample_frequencies, ShotBudget};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dnnqst::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rho = random_pure_state(QubitCount::TWO, &mut rng).to_density();
    let suite = cube_suite(QubitCount::TWO);
    let exact = exact_frequencies(&rho, &suite)?;
    println!("exact, first set: {:?}", fmt(&exact.values()[..4]));
    for s in [10, 100, 1000, 10_000] {
        let budget = ShotBudget::new(s)?;
        let f = sample_frequencies(&rho, &suite, budget, &mut rng)?;
        let err = f.values().iter().zip(exact.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "S = {s:>5} ({:>7} copies): first set {:?}, max deviation {err:.4}",
            budget.total_copies(&suite),
            fmt(&f.values()[..4])
        );
    }
    Ok(())
}

fn fmt(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.3}")).collect()
}
