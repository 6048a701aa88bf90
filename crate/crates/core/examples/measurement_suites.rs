//! Cube and MUB projector suites, set truncation and unitary rotation noise.
use dnnqst::measure::{
    apply_noise, cube_suite, mub_suite_2q, sample_noise_angles, truncate_suite, NoiseDistribution, NoiseSpec,
};
use dnnqst::qstate::QubitCount;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dnnqst::Result<()> {
    for n in [2, 3] {
        let suite = cube_suite(QubitCount::new(n)?);
        println!("{n}-qubit cube: {} sets, {} projectors", suite.set_count(), suite.operator_count());
    }
    let mub = mub_suite_2q();
    println!("2-qubit MUB: {} sets, {} projectors", mub.set_count(), mub.operator_count());
    for set in mub.sets() {
        println!("  {}", set.labels().join(" "));
    }

    let cube = cube_suite(QubitCount::TWO);
    let first_three = truncate_suite(&cube, 3)?;
    println!("first 3 cube sets: {:?}", first_three.sets().iter().map(|s| s.labels()[0].clone()).collect::<Vec<_>>());

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = NoiseSpec::isotropic(NoiseDistribution::Uniform, 0.1)?;
    let angles = sample_noise_angles(&spec, QubitCount::TWO, &mut rng);
    let noisy = apply_noise(&cube, &angles)?;
    let worst = noisy.sets().iter().map(|s| s.resolution_defect()).fold(0.0, f64::max);
    println!("noise {spec}: noisy sets still resolve the identity (defect {worst:.1e})");
    Ok(())
}
