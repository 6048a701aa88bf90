//! Linear-regression estimation: least squares then projection onto states.
use dnnqst::lre::{lre_estimate, project_to_physical, DesignMatrix};
use dnnqst::measure::{cube_suite, truncate_suite};
use dnnqst::qstate::{infidelity, random_pure_state, QubitCount};
use dnnqst::sampling::{exact_frequencies, sample_frequencies, ShotBudget};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dnnqst::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rho = random_pure_state(QubitCount::TWO, &mut rng).to_density();
    let cube = cube_suite(QubitCount::TWO);

    let est = lre_estimate(&exact_frequencies(&rho, &cube)?, &cube)?;
    println!("exact data, complete suite: infidelity {:.2e}", infidelity(&rho, &est)?);

    for s in [10, 100, 1000] {
        let f = sample_frequencies(&rho, &cube, ShotBudget::new(s)?, &mut rng)?;
        let design = DesignMatrix::new(&cube)?;
        let raw = design.solve_hermitian(&f)?;
        let projected = project_to_physical(&raw)?;
        let negative = dnnqst::linalg::hermitian_eigen(&raw).0[0];
        println!(
            "S = {s:>4}: least-squares min eigenvalue {negative:+.4}, infidelity after projection {:.4}",
            infidelity(&rho, &projected)?
        );
    }

    for k in [2, 4, 6, 9] {
        let suite = truncate_suite(&cube, k)?;
        let est = lre_estimate(&exact_frequencies(&rho, &suite)?, &suite)?;
        println!(
            "{k} sets: design rank {:>2}, exact-data infidelity {:.2e}",
            DesignMatrix::new(&suite)?.rank(),
            infidelity(&rho, &est)?
        );
    }
    Ok(())
}
