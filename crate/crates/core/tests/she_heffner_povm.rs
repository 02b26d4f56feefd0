use std::f64::consts::PI;

use cylspace::angular_state::{phi_grid, von_mises_auto};
use cylspace::joint_measurement::{she_heffner_moment, von_mises_pair_report};
use cylspace::{VonMisesParams, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `Σ_N ∫dΦ (N - N̄)² (sin Φ - S̄)² P(N, Φ)` with
/// `P(N, Φ) = |⟨N, Φ|ψ_s ψ_a⟩|²`, `Φ` on a 2048-point grid.
fn povm_moment(kappa_s: f64, kappa_a: f64) -> f64 {
    let s = von_mises_auto(&VonMisesParams::new(0, 0.0, 0.0, kappa_s).unwrap(), 1e-16).unwrap();
    let a = von_mises_auto(&VonMisesParams::new(0, 0.0, 0.0, kappa_a).unwrap(), 1e-16).unwrap();
    let (ws, wa) = (*s.window(), *a.window());
    let grid = phi_grid(2048);
    let h = 2.0 * PI / grid.len() as f64;
    let mut table = Vec::new();
    for n in ws.l_min() + wa.l_min()..=ws.l_max() + wa.l_max() {
        for &phi in &grid {
            let amp: C64 = wa
                .labels()
                .map(|m| C64::from_polar(1.0, -(m as f64) * phi) * s.coeff(n + m) * a.coeff(m))
                .sum();
            table.push((n as f64, phi, amp.norm_sqr() / (2.0 * PI) * h));
        }
    }
    let total: f64 = table.iter().map(|t| t.2).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let n_bar: f64 = table.iter().map(|t| t.0 * t.2).sum();
    let s_bar: f64 = table.iter().map(|t| t.1.sin() * t.2).sum();
    table.iter().map(|(n, phi, p)| (n - n_bar).powi(2) * (phi.sin() - s_bar).powi(2) * p).sum()
}

#[test]
fn closed_form_matches_outcome_integral() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let ks = rng.gen_range(0.2..5.0);
        let ka = rng.gen_range(0.2..5.0);
        let oracle = povm_moment(ks, ka);
        let closed = she_heffner_moment(ks, ka);
        let operator = von_mises_pair_report(ks, ka, 0.0).unwrap().she_heffner;
        assert!((closed - oracle).abs() < 1e-8 * oracle, "({ks}, {ka}): {closed} vs {oracle}");
        assert!((operator - oracle).abs() < 1e-8 * oracle);
    }
}

#[test]
fn zero_spread_sentinel() {
    assert!(she_heffner_moment(0.0, 1.0).is_infinite());
}
