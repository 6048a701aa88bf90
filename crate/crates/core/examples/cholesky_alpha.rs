//! Cholesky factors and the real alpha vector the network regresses onto.
use dnnqst::linalg;
use dnnqst::qstate::{alpha_encode, alpha_to_density, cholesky_decompose, mixed_state, random_pure_state, AlphaVector, QubitCount};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dnnqst::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho = mixed_state(&random_pure_state(QubitCount::TWO, &mut rng), 0.7)?;
    let alpha = alpha_encode(&cholesky_decompose(&rho)?);
    println!("alpha ({} values):", alpha.values().len());
    for chunk in alpha.values().chunks(4) {
        println!("  {}", chunk.iter().map(|v| format!("{v:+.4}")).collect::<Vec<_>>().join(" "));
    }
    let back = alpha_to_density(&alpha)?;
    println!("round trip error {:.2e}", linalg::max_abs_diff(back.matrix(), rho.matrix()));

    // Any real vector decodes to a valid state, whatever its scale.
    let arbitrary = AlphaVector::new((0..16).map(|i| (i as f64 * 0.7).sin()).collect())?;
    let scaled = AlphaVector::new(arbitrary.values().iter().map(|v| v * 40.0).collect())?;
    let a = alpha_to_density(&arbitrary)?;
    let b = alpha_to_density(&scaled)?;
    println!("arbitrary alpha: purity {:.4}, min eigenvalue {:.2e}", a.purity(), a.eigenvalues()[0]);
    println!("scale invariance error {:.2e}", linalg::max_abs_diff(a.matrix(), b.matrix()));
    Ok(())
}
