mod common;

use dnnqst::linalg::{self, CMatrix};
use dnnqst::lre::{lre_estimate, project_to_physical};
use dnnqst::measure::{
    apply_noise, cube_suite, mub_suite_2q, noise_unitary, sample_noise_angles, truncate_suite,
    NoiseDistribution, NoiseSpec,
};
use dnnqst::mle::{mle_estimate, MleConfig};
use dnnqst::qstate::{
    alpha_encode, alpha_to_density, build_optical_unitary, cholesky_decompose, fidelity,
    haar_random_unitary, mixed_state, mixture_purity, optical_basis_states, optical_state_family,
    random_pure_state, AlphaVector, DensityMatrix, OpticalGateParams, QubitCount,
};
use dnnqst::sampling::{born_probabilities, exact_frequencies, sample_frequencies, ShotBudget};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qubits(n: usize) -> QubitCount {
    QubitCount::new(n).unwrap()
}

fn state(seed: u64, n: usize, p: f64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mixed_state(&random_pure_state(qubits(n), &mut rng), p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cholesky_alpha_round_trip(seed in any::<u64>(), n in 2usize..=3, p in 0.01f64..0.99) {
        let rho = state(seed, n, p);
        let back = alpha_to_density(&alpha_encode(&cholesky_decompose(&rho).unwrap())).unwrap();
        prop_assert!(linalg::max_abs_diff(back.matrix(), rho.matrix()) < 1e-10);
    }

    #[test]
    fn cholesky_round_trip_on_pure_states(seed in any::<u64>(), n in 2usize..=3) {
        let rho = random_pure_state(qubits(n), &mut ChaCha8Rng::seed_from_u64(seed)).to_density();
        let back = alpha_to_density(&alpha_encode(&cholesky_decompose(&rho).unwrap())).unwrap();
        prop_assert!(linalg::max_abs_diff(back.matrix(), rho.matrix()) < 1e-7);
    }

    #[test]
    fn alpha_decoding_ignores_scale(values in prop::collection::vec(-3.0f64..3.0, 16), c in 0.01f64..100.0) {
        prop_assume!(values[..4].iter().any(|v| v.abs() > 1e-3));
        let a = alpha_to_density(&AlphaVector::new(values.clone()).unwrap()).unwrap();
        let b = alpha_to_density(&AlphaVector::new(values.iter().map(|v| v * c).collect()).unwrap()).unwrap();
        prop_assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) < 1e-12);
        a.check(1e-10).unwrap();
    }

    #[test]
    fn fidelity_is_symmetric_and_unitarily_invariant(s1 in any::<u64>(), s2 in any::<u64>(), p in 0.05f64..0.95) {
        let rho = state(s1, 2, p);
        let sigma = state(s2, 2, 1.0 - p);
        let u = haar_random_unitary(4, &mut ChaCha8Rng::seed_from_u64(s1 ^ s2));
        let f = fidelity(&rho, &sigma).unwrap();
        prop_assert!((f - fidelity(&sigma, &rho).unwrap()).abs() < 1e-9);
        prop_assert!((f - fidelity(&rho.conjugate(&u), &sigma.conjugate(&u)).unwrap()).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn pure_state_fidelity_is_overlap(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = random_pure_state(qubits(2), &mut ChaCha8Rng::seed_from_u64(s1));
        let b = random_pure_state(qubits(2), &mut ChaCha8Rng::seed_from_u64(s2));
        let overlap = (a.amplitudes().adjoint() * b.amplitudes())[(0, 0)].norm();
        let f = fidelity(&a.to_density(), &b.to_density()).unwrap();
        prop_assert!((f - overlap).abs() < 1e-6, "{} vs {}", f, overlap);
    }

    #[test]
    fn mixture_purity_matches_trace(seed in any::<u64>(), p in 0.0f64..1.0) {
        prop_assume!(p > 0.0);
        let rho = state(seed, 2, p);
        let direct = (rho.matrix() * rho.matrix()).trace().re;
        prop_assert!((direct - mixture_purity(p, 4)).abs() < 1e-12);
        prop_assert!((direct - (p * p + (1.0 - p * p) / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn projection_matches_brute_force(seed in any::<u64>()) {
        let h = common::random_unit_trace_hermitian(4, &mut ChaCha8Rng::seed_from_u64(seed));
        let fast = project_to_physical(&h).unwrap();
        let slow = common::brute_force_projection(&h);
        prop_assert!(common::frobenius(fast.matrix(), &slow) < 1e-9);
        prop_assert!(common::projection_kkt_violation(&h, fast.matrix()) < 1e-9);
    }

    #[test]
    fn noise_unitary_is_local_and_unitary(seed in any::<u64>(), xi in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for dist in [NoiseDistribution::Uniform, NoiseDistribution::Gaussian] {
            let spec = NoiseSpec::isotropic(dist, xi).unwrap();
            let angles = sample_noise_angles(&spec, qubits(2), &mut rng);
            prop_assert!(linalg::unitarity_defect(&noise_unitary(&angles)) < 1e-12);
            let noisy = apply_noise(&cube_suite(qubits(2)), &angles).unwrap();
            for set in noisy.sets() {
                prop_assert!(set.resolution_defect() < 1e-10);
            }
        }
    }

    #[test]
    fn lre_recovers_states_on_complete_suites(seed in any::<u64>(), p in 0.05f64..0.95) {
        let rho = state(seed, 2, p);
        for suite in [cube_suite(qubits(2)), mub_suite_2q()] {
            let est = lre_estimate(&exact_frequencies(&rho, &suite).unwrap(), &suite).unwrap();
            prop_assert!(linalg::max_abs_diff(est.matrix(), rho.matrix()) < 1e-9);
        }
    }

    #[test]
    fn mle_likelihood_never_decreases(seed in any::<u64>(), shots in 5u64..500, k in 2usize..=9) {
        let rho = state(seed, 2, 0.9);
        let suite = truncate_suite(&cube_suite(qubits(2)), k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let f = sample_frequencies(&rho, &suite, ShotBudget::new(shots).unwrap(), &mut rng).unwrap();
        let out = mle_estimate(&f, &suite, &MleConfig::default()).unwrap();
        for w in out.log_likelihood.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-14 * w[0].abs().max(1.0));
        }
        out.state.check(1e-9).unwrap();
    }
}

#[test]
fn optical_unitaries_are_unitary() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let u = build_optical_unitary(&OpticalGateParams::random(&mut rng)).unwrap();
        worst = worst.max(linalg::unitarity_defect(&u));
    }
    assert!(worst < 1e-12, "{worst:e}");
    let id = build_optical_unitary(&OpticalGateParams::identity()).unwrap();
    assert!(linalg::max_abs_diff(&id, &CMatrix::identity(4, 4)) < 1e-15);
}

#[test]
fn optical_family_preserves_purity() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let basis = optical_basis_states(5, &mut rng);
    let family = optical_state_family(&basis, 30, &mut rng).unwrap();
    assert_eq!(family.len(), 5 * 31);
    for (b, group) in basis.iter().zip(family.chunks(31)) {
        assert_eq!(&group[0], b);
        for s in group {
            assert!((s.purity() - b.purity()).abs() < 1e-9);
            s.check(1e-10).unwrap();
        }
    }
}

#[test]
fn haar_states_have_uniform_moments() {
    // E|<0|psi>|^2 = 1/d and E|<0|psi>|^4 = 2/(d(d+1)) for Haar-random psi.
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 20_000;
    let (mut m2, mut m4) = (0.0, 0.0);
    for _ in 0..n {
        let a = random_pure_state(qubits(2), &mut rng).amplitudes()[0].norm_sqr();
        m2 += a;
        m4 += a * a;
    }
    m2 /= n as f64;
    m4 /= n as f64;
    assert!((m2 - 0.25).abs() < 0.01, "{m2}");
    assert!((m4 - 0.1).abs() < 0.01, "{m4}");
}

#[test]
fn shot_frequencies_are_unbiased() {
    let rho = state(5, 2, 0.7);
    let suite = cube_suite(qubits(2));
    let shots = 50u64;
    let trials = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mean = vec![0.0; 36];
    for _ in 0..trials {
        let f = sample_frequencies(&rho, &suite, ShotBudget::new(shots).unwrap(), &mut rng).unwrap();
        for (m, v) in mean.iter_mut().zip(f.values()) {
            *m += v / trials as f64;
        }
    }
    let mut k = 0;
    for set in suite.sets() {
        for p in born_probabilities(&rho, set).unwrap() {
            // Multinomial over S * d trials per set.
            let sigma = (p * (1.0 - p) / (shots as f64 * 4.0) / trials as f64).sqrt();
            assert!((mean[k] - p).abs() < 5.0 * sigma + 1e-12, "outcome {k}: {} vs {p}", mean[k]);
            k += 1;
        }
    }
}
