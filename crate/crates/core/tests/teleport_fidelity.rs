use cylspace::epr_teleport::{collapse_amplitude, collapse_contraction, sample_outcomes, teleport};
use cylspace::angular_state::von_mises_auto;
use cylspace::VonMisesParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sampled_outcomes_teleport_faithfully() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..4 {
        let input = VonMisesParams::new(
            rng.gen_range(-3..=3),
            rng.gen_range(0.0..1.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(0.2..3.0),
        )
        .unwrap();
        let deltas = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        for (m, psi) in sample_outcomes(&input, deltas, 40, 64, 5, rng.gen()).unwrap() {
            let out = teleport(&input, deltas, (m, psi), 40).unwrap();
            assert!(out.fidelity >= 1.0 - 1e-8, "fidelity {}", out.fidelity);
            assert_eq!(out.corrected_state.delta(), deltas.1);
        }
    }
}

#[test]
fn closed_form_collapse_matches_contraction() {
    let input = VonMisesParams::new(1, 0.7, 0.4, 1.3).unwrap();
    let deltas = (0.6, 0.25);
    let ket = von_mises_auto(&input, 1e-15).unwrap();
    for (m, psi) in [(0, 0.3), (2, -2.0), (-1, 3.0)] {
        let a = collapse_amplitude(&input, deltas, m, psi, 30).unwrap();
        let b = collapse_contraction(&ket, deltas, m, psi, 30).unwrap();
        let worst = a.window().labels().map(|l| (a.coeff(l) - b.coeff(l)).norm()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "({m}, {psi}): {worst:e}");
    }
}
