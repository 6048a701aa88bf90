//! Random states: Haar pure states, pure/identity mixtures and the optical
//! gate family, with purity and fidelity.
use dnnqst::qstate::{
    fidelity, mixed_state, mixture_purity, optical_basis_states, optical_state_family, random_pure_state,
    QubitCount,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dnnqst::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let psi = random_pure_state(QubitCount::TWO, &mut rng);
    let pure = psi.to_density();
    println!("pure state purity = {:.6}", pure.purity());

    for p in [0.2, 0.5, 0.9] {
        let rho = mixed_state(&psi, p)?;
        println!(
            "p = {p}: purity {:.6} (closed form {:.6}), fidelity to pure {:.6}",
            rho.purity(),
            mixture_purity(p, 4),
            fidelity(&rho, &pure)?
        );
    }

    let basis = optical_basis_states(2, &mut rng);
    let family = optical_state_family(&basis, 3, &mut rng)?;
    for (i, rho) in family.iter().enumerate() {
        println!("optical state {i}: purity {:.9}", rho.purity());
    }

    let three = random_pure_state(QubitCount::new(3)?, &mut rng).to_density();
    println!("3-qubit state eigenvalues {:?}", three.eigenvalues().iter().map(|v| format!("{:.3}", v.max(0.0))).collect::<Vec<_>>());
    Ok(())
}
