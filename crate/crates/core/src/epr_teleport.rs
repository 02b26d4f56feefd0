//! EPR-like common eigenstates of `𝓛` and `𝓔`, the Bell-like measurement
//! built from them, and teleportation of von Mises states.
//!
//! Ideal EPR states are not normalisable; here they are truncated to
//! `2H + 1` terms and carried unnormalised.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::angular_state::{
    phi_grid, reduce_angle, von_mises_auto, AngularWindow, TruncatedKet, VonMisesParams, DEFAULT_TAIL_TOL,
};
use crate::error::{Error, Result};
use crate::joint_measurement::JointAmplitudes;
use crate::operators::{displace_inverse, displacement};

/// Largest acceptable weight lost to truncation of the shared resource.
pub const DEFAULT_LEAKAGE_BUDGET: f64 = 1e-9;

/// Default number of grid points for the outcome angle.
pub const DEFAULT_PSI_GRID: usize = 256;

/// Integer and fractional parts of `δ_j + δ_k`.
pub fn split_sum(delta_j: f64, delta_k: f64) -> (i64, f64) {
    let s = delta_j + delta_k;
    let i = s.floor();
    (i as i64, s - i)
}

/// Label `|N + Δ_AB, Φ⟩` of an EPR-like state on modes A and B.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EprParams {
    n: i64,
    phi: f64,
    delta_a: f64,
    delta_b: f64,
}

impl EprParams {
    pub fn new(n: i64, phi: f64, delta_a: f64, delta_b: f64) -> Result<Self> {
        for d in [delta_a, delta_b] {
            if !(0.0..1.0).contains(&d) {
                return Err(Error::InvalidParameter(format!("fractional part must lie in [0, 1), got {d}")));
            }
        }
        if !phi.is_finite() {
            return Err(Error::InvalidParameter(format!("Phi must be finite, got {phi}")));
        }
        Ok(EprParams { n, phi: reduce_angle(phi), delta_a, delta_b })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn delta_a(&self) -> f64 {
        self.delta_a
    }

    pub fn delta_b(&self) -> f64 {
        self.delta_b
    }

    /// `I_AB = ⌊δ_A + δ_B⌋`.
    pub fn integer_part(&self) -> i64 {
        split_sum(self.delta_a, self.delta_b).0
    }

    /// `Δ_AB = (δ_A + δ_B) mod 1`.
    pub fn fractional_part(&self) -> f64 {
        split_sum(self.delta_a, self.delta_b).1
    }

    /// Eigenvalue `N + Δ_AB` of the total angular momentum.
    pub fn total_l(&self) -> f64 {
        self.n as f64 + self.fractional_part()
    }
}

/// `(2π)^{-1/2} Σ_{|l|≤H} e^{-ilΦ} |l + N - I_AB + δ_A⟩|-l + δ_B⟩`.
pub fn epr_ket(params: &EprParams, half_width: usize) -> Result<JointAmplitudes> {
    if half_width < 1 {
        return Err(Error::InvalidParameter("half_width must be at least 1".into()));
    }
    let shift = params.n - params.integer_part();
    let wa = AngularWindow::centered(shift, half_width, params.delta_a)?;
    let wb = AngularWindow::centered(0, half_width, params.delta_b)?;
    epr_on_windows(params, &wa, &wb)
}

/// The EPR-like state restricted to arbitrary windows on A and B.
pub fn epr_on_windows(params: &EprParams, wa: &AngularWindow, wb: &AngularWindow) -> Result<JointAmplitudes> {
    if wa.delta() != params.delta_a || wb.delta() != params.delta_b {
        return Err(Error::Mismatch("window fractional parts differ from the EPR labels".into()));
    }
    let shift = params.n - params.integer_part();
    let norm = 1.0 / (2.0 * PI).sqrt();
    let mut amps = Array2::zeros((wa.dim(), wb.dim()));
    for (j, b) in wb.labels().enumerate() {
        let l = -b;
        if let Some(i) = wa.index_of(l + shift) {
            amps[(i, j)] = C64::from_polar(norm, -(l as f64) * params.phi);
        }
    }
    JointAmplitudes::new(*wa, *wb, amps)
}

/// `⟨χ|_2 Ψ⟩`: contract the second mode of a joint state with a ket.
pub fn project_second(state: &JointAmplitudes, bra: &TruncatedKet) -> Result<TruncatedKet> {
    if bra.delta() != state.window_a().delta() {
        return Err(Error::Mismatch("fractional parts differ".into()));
    }
    let ws = *state.window_s();
    let coeffs = ws
        .labels()
        .map(|l| state.window_a().labels().map(|m| bra.coeff(m).conj() * state.get(l, m)).sum())
        .collect();
    TruncatedKet::new(ws, coeffs)
}

/// Displacement index `K = M + I_AB - I_inA` that Bob corrects with.
pub fn correction_index(delta_in: f64, delta_a: f64, delta_b: f64, m: i64) -> i64 {
    m + split_sum(delta_a, delta_b).0 - split_sum(delta_in, delta_a).0
}

/// Scalar `e^{i(I_AB + I_inA - M - 2δ_B)Ψ/2} / 2π` in front of the collapsed state.
pub fn collapse_prefactor(delta_in: f64, delta_a: f64, delta_b: f64, m: i64, psi: f64) -> C64 {
    let i_ab = split_sum(delta_a, delta_b).0;
    let i_in = split_sum(delta_in, delta_a).0;
    let phase = (i_ab + i_in - m) as f64 - 2.0 * delta_b;
    C64::from_polar(1.0 / (2.0 * PI), phase * psi / 2.0)
}

fn bob_window(half_width: usize, delta_b: f64) -> Result<AngularWindow> {
    AngularWindow::centered(0, half_width, delta_b)
}

/// Bob's unnormalised state after Alice obtains `(M, Ψ)`, from the closed form
/// `prefactor · D_B^{-1}(K, Ψ)|n + δ_B, α⟩`, restricted to the resource window.
///
/// Fails when the restriction discards more than the leakage budget.
pub fn collapse_amplitude(
    input: &VonMisesParams,
    deltas: (f64, f64),
    m: i64,
    psi: f64,
    half_width: usize,
) -> Result<TruncatedKet> {
    let (delta_a, delta_b) = deltas;
    let target = von_mises_auto(&input.with_delta(delta_b)?, DEFAULT_TAIL_TOL)?;
    let k = correction_index(input.delta(), delta_a, delta_b, m);
    let moved = displace_inverse(&target, k, psi);
    let wb = bob_window(half_width, delta_b)?;
    let leakage = moved.weight_outside(wb.l_min(), wb.l_max());
    if leakage > DEFAULT_LEAKAGE_BUDGET {
        return Err(Error::Leakage { leakage, budget: DEFAULT_LEAKAGE_BUDGET });
    }
    let pre = collapse_prefactor(input.delta(), delta_a, delta_b, m, psi);
    let coeffs = wb.labels().map(|l| moved.coeff(l) * pre).collect();
    TruncatedKet::new(wb, coeffs)
}

/// The same collapsed state from the explicit contraction
/// `⟨M + Δ_inA, Ψ|_{in,A} (|ψ⟩_in ⊗ |Δ_AB, 0⟩_{AB})` with the truncated resource.
pub fn collapse_contraction(
    input_ket: &TruncatedKet,
    deltas: (f64, f64),
    m: i64,
    psi: f64,
    half_width: usize,
) -> Result<TruncatedKet> {
    let (delta_a, delta_b) = deltas;
    let resource = epr_ket(&EprParams::new(0, 0.0, delta_a, delta_b)?, half_width)?;
    let win = *input_ket.window();
    let wa = *resource.window_s();
    let wb = *resource.window_a();
    let bell = epr_on_windows(&EprParams::new(m, psi, input_ket.delta(), delta_a)?, &win, &wa)?;
    // t(a) = Σ_j conj(bell(j, a)) in(j)
    let t: Vec<C64> = wa
        .labels()
        .map(|a| win.labels().zip(input_ket.coeffs()).map(|(j, c)| bell.get(j, a).conj() * c).sum())
        .collect();
    let coeffs = wb
        .labels()
        .map(|b| wa.labels().zip(&t).map(|(a, ta)| ta * resource.get(a, b)).sum())
        .collect();
    TruncatedKet::new(wb, coeffs)
}

/// Result of one run of the protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportOutcome {
    pub m: i64,
    pub psi: f64,
    pub corrected_state: TruncatedKet,
    pub fidelity: f64,
    pub leakage: f64,
}

/// Teleport `|n + δ_in, α⟩` through the truncated resource for Alice's outcome
/// `(M, Ψ)`. Bob's correction `D_B(K, Ψ)` is applied as a dense matrix.
pub fn teleport(
    input: &VonMisesParams,
    deltas: (f64, f64),
    outcome: (i64, f64),
    half_width: usize,
) -> Result<TeleportOutcome> {
    let (delta_a, delta_b) = deltas;
    let (m, psi) = outcome;
    let input_ket = von_mises_auto(input, DEFAULT_TAIL_TOL)?;
    let collapsed = collapse_contraction(&input_ket, deltas, m, psi, half_width)?;
    let leakage = (1.0 - 4.0 * PI * PI * collapsed.norm_sqr()).max(0.0);
    if leakage > DEFAULT_LEAKAGE_BUDGET {
        return Err(Error::Leakage { leakage, budget: DEFAULT_LEAKAGE_BUDGET });
    }
    let k = correction_index(input.delta(), delta_a, delta_b, m);
    let wb = *collapsed.window();
    let cover = AngularWindow::new(wb.l_min() + k.min(0), wb.l_max() + k.max(0), delta_b, wb.tail_tol())?;
    let corrected = displacement(k, psi, &cover).apply(&collapsed.embed(cover)?)?.normalized()?;
    let target = von_mises_auto(&input.with_delta(delta_b)?, DEFAULT_TAIL_TOL)?;
    let fidelity = target.inner(&corrected)?.norm_sqr();
    Ok(TeleportOutcome { m, psi: reduce_angle(psi), corrected_state: corrected, fidelity, leakage })
}

/// [`teleport`] over many outcomes in parallel, results in input order.
pub fn teleport_sweep(
    input: &VonMisesParams,
    deltas: (f64, f64),
    outcomes: &[(i64, f64)],
    half_width: usize,
) -> Vec<Result<TeleportOutcome>> {
    outcomes.par_iter().map(|&o| teleport(input, deltas, o, half_width)).collect()
}

/// Outcome `M` values whose collapsed state keeps its full weight inside the
/// resource window, given an input window of half-width `input_half_width`.
pub fn safe_outcome_range(input: &VonMisesParams, deltas: (f64, f64), half_width: usize, input_half_width: usize) -> (i64, i64) {
    let (delta_a, delta_b) = deltas;
    let offset = correction_index(input.delta(), delta_a, delta_b, 0);
    let slack = half_width as i64 - input_half_width as i64;
    (input.n() - offset - slack, input.n() - offset + slack)
}

/// Probabilities of Alice's outcomes on `M ∈ [m_min, m_max]` and a uniform
/// `Ψ` grid, for the resource normalised to unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub m_min: i64,
    pub m_max: i64,
    pub psi_grid: Vec<f64>,
    /// `prob[(M - m_min, j)]`, already multiplied by the cell width.
    pub prob: Array2<f64>,
}

impl OutcomeTable {
    pub fn total(&self) -> f64 {
        self.prob.sum()
    }

    pub fn m_marginal(&self) -> Vec<f64> {
        self.prob.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Draw `count` outcomes: `M` from its marginal, then `Ψ` by inverse CDF
    /// with linear interpolation inside grid cells.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<(i64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let marginal = self.m_marginal();
        let total: f64 = marginal.iter().sum();
        let h = 2.0 * PI / self.psi_grid.len() as f64;
        (0..count)
            .map(|_| {
                let row = pick(&marginal, rng.gen::<f64>() * total);
                let cells = self.prob.row(row);
                let row_total: f64 = cells.sum();
                let u = rng.gen::<f64>() * row_total;
                let mut acc = 0.0;
                let mut psi = self.psi_grid[self.psi_grid.len() - 1] + h;
                for (j, &p) in cells.iter().enumerate() {
                    if acc + p >= u && p > 0.0 {
                        psi = self.psi_grid[j] + (u - acc) / p * h;
                        break;
                    }
                    acc += p;
                }
                (self.m_min + row as i64, reduce_angle(psi))
            })
            .collect()
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Outcome probabilities: `‖collapsed‖² · 2π/(2H+1)` per unit `Ψ`, times the
/// cell width `2π/P`.
pub fn outcome_distribution(
    input: &VonMisesParams,
    deltas: (f64, f64),
    m_range: (i64, i64),
    psi_grid_size: usize,
    half_width: usize,
) -> Result<OutcomeTable> {
    let (m_min, m_max) = m_range;
    if m_min > m_max || psi_grid_size == 0 {
        return Err(Error::InvalidParameter("empty outcome grid".into()));
    }
    let (delta_a, delta_b) = deltas;
    let target = von_mises_auto(&input.with_delta(delta_b)?, DEFAULT_TAIL_TOL)?;
    let wb = bob_window(half_width, delta_b)?;
    let grid = phi_grid(psi_grid_size);
    let cell = 2.0 * PI / psi_grid_size as f64;
    let scale = 2.0 * PI / (2 * half_width + 1) as f64 * cell;
    let rows: Vec<Vec<f64>> = (m_min..=m_max)
        .into_par_iter()
        .map(|m| {
            let k = correction_index(input.delta(), delta_a, delta_b, m);
            grid.iter()
                .map(|&psi| {
                    let moved = displace_inverse(&target, k, psi);
                    let inside = moved.norm_sqr() - moved.weight_outside(wb.l_min(), wb.l_max());
                    inside / (4.0 * PI * PI) * scale
                })
                .collect()
        })
        .collect();
    let mut prob = Array2::zeros((rows.len(), psi_grid_size));
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            prob[(i, j)] = *v;
        }
    }
    Ok(OutcomeTable { m_min, m_max, psi_grid: grid, prob })
}

/// Largest deviation from the identity of `Σ_N ∫dΦ |N, Φ⟩⟨N, Φ|` on pairs of
/// labels from `wa × wb`, with `Φ` on a uniform grid of `phi_grid_size` points.
pub fn epr_completeness_residual(wa: &AngularWindow, wb: &AngularWindow, phi_grid_size: usize) -> Result<f64> {
    let i_ab = split_sum(wa.delta(), wb.delta()).0;
    let n_min = wa.l_min() + wb.l_min() + i_ab;
    let n_max = wa.l_max() + wb.l_max() + i_ab;
    let (da, db) = (wa.dim(), wb.dim());
    let d = da * db;
    let mut acc: Array2<C64> = Array2::zeros((d, d));
    let w = 2.0 * PI / phi_grid_size as f64;
    for n in n_min..=n_max {
        for &phi in &phi_grid(phi_grid_size) {
            let s = epr_on_windows(&EprParams::new(n, phi, wa.delta(), wb.delta())?, wa, wb)?;
            let v: Vec<C64> = s.amps().iter().copied().collect();
            for (p, x) in v.iter().enumerate() {
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                for (q, y) in v.iter().enumerate() {
                    acc[(p, q)] += x * y.conj() * w;
                }
            }
        }
    }
    let mut worst = 0.0f64;
    for ((p, q), v) in acc.indexed_iter() {
        let target = if p == q { 1.0 } else { 0.0 };
        worst = worst.max((v - target).norm());
    }
    Ok(worst)
}

/// Draw `count` outcomes from the distribution over the safe outcome range.
pub fn sample_outcomes(
    input: &VonMisesParams,
    deltas: (f64, f64),
    half_width: usize,
    psi_grid_size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(i64, f64)>> {
    let input_hw = von_mises_auto(input, DEFAULT_TAIL_TOL)?.window().half_width();
    let range = safe_outcome_range(input, deltas, half_width, input_hw + 2);
    if range.0 > range.1 {
        return Err(Error::InvalidParameter(format!(
            "half_width {half_width} leaves no outcome free of truncation"
        )));
    }
    Ok(outcome_distribution(input, deltas, range, psi_grid_size, half_width)?.sample(count, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vm(n: i64, delta: f64, alpha: f64, kappa: f64) -> VonMisesParams {
        VonMisesParams::new(n, delta, alpha, kappa).unwrap()
    }

    #[test]
    fn derived_parts() {
        let p = EprParams::new(2, 0.0, 0.8, 0.4).unwrap();
        assert_eq!(p.integer_part(), 1);
        assert!((p.fractional_part() - 0.2).abs() < 1e-15);
        assert!((p.total_l() - 2.2).abs() < 1e-15);
        assert_eq!(EprParams::new(0, 0.0, 0.3, 0.2).unwrap().integer_part(), 0);
        assert!(EprParams::new(0, 0.0, 1.0, 0.2).is_err());
    }

    #[test]
    fn single_antidiagonal() {
        let p = EprParams::new(0, 0.0, 0.0, 0.0).unwrap();
        let s = epr_ket(&p, 5).unwrap();
        let d = s.window_s().dim();
        for i in 0..d {
            for j in 0..d {
                let v = s.amps()[(i, j)];
                if i + j == d - 1 {
                    assert!((v.norm() - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
                } else {
                    assert_eq!(v, C64::default());
                }
            }
        }
    }

    #[test]
    fn eigenvalue_relations() {
        let p = EprParams::new(3, 0.9, 0.7, 0.6).unwrap();
        let s = epr_ket(&p, 6).unwrap();
        let (wa, wb) = (*s.window_s(), *s.window_a());
        for a in wa.labels() {
            for b in wb.labels() {
                let v = s.get(a, b);
                if v.norm() > 0.0 {
                    assert!((wa.eigenvalue(a) + wb.eigenvalue(b) - p.total_l()).abs() < 1e-14);
                    // 𝓔ψ(a, b) = ψ(a+1, b-1) for interior labels
                    if wa.contains(a + 1) && wb.contains(b - 1) {
                        let e = s.get(a + 1, b - 1);
                        assert!((e - C64::from_polar(1.0, -0.9) * v).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn ancilla_projection_gives_von_mises() {
        let kappa = 1.3;
        let p = EprParams::new(2, 0.6, 0.0, 0.0).unwrap();
        let s = epr_ket(&p, 40).unwrap();
        let vac = von_mises_auto(&vm(0, 0.0, 0.0, kappa), 1e-15).unwrap();
        let sig = project_second(&s, &vac).unwrap().normalized().unwrap();
        let target = von_mises_auto(&vm(2, 0.0, 0.6, kappa), 1e-15).unwrap();
        assert!((target.inner(&sig).unwrap().norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn analytic_collapse_matches_contraction() {
        let input = vm(1, 0.3, 0.5, 1.2);
        let deltas = (0.8, 0.4);
        let ket = von_mises_auto(&input, 1e-15).unwrap();
        for &(m, psi) in &[(0, 0.0), (2, 1.3), (-3, -2.2)] {
            let a = collapse_amplitude(&input, deltas, m, psi, 40).unwrap();
            let b = collapse_contraction(&ket, deltas, m, psi, 40).unwrap();
            let diff = a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(diff < 1e-9, "m={m}");
        }
    }

    #[test]
    fn prefactor_modulus() {
        for &(m, psi) in &[(0, 0.2), (5, -3.0), (-7, 2.9)] {
            let p = collapse_prefactor(0.3, 0.8, 0.4, m, psi);
            assert!((p.norm() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
    }

    #[test]
    fn trivial_teleport() {
        let input = vm(2, 0.0, 0.0, 0.0);
        let out = teleport(&input, (0.0, 0.0), (0, 0.0), 10).unwrap();
        assert!((out.fidelity - 1.0).abs() < 1e-14);
        assert_eq!(out.corrected_state.delta(), 0.0);
    }

    #[test]
    fn teleport_fractional_parts() {
        let input = vm(3, 0.3, 0.7, 2.0);
        for &(m, psi) in &[(0, 0.0), (4, 1.1), (-2, -2.5)] {
            let out = teleport(&input, (0.8, 0.4), (m, psi), 40).unwrap();
            assert!(out.fidelity >= 1.0 - 1e-8);
            assert!(out.fidelity <= 1.0 + 1e-12);
            assert_eq!(out.corrected_state.delta(), 0.4);
        }
    }

    #[test]
    fn leakage_is_reported() {
        let input = vm(0, 0.0, 0.0, 2.0);
        assert!(matches!(teleport(&input, (0.0, 0.0), (30, 0.0), 35), Err(Error::Leakage { .. })));
        assert!(matches!(collapse_amplitude(&input, (0.0, 0.0), 30, 0.0, 35), Err(Error::Leakage { .. })));
    }

    #[test]
    fn outcome_table_normalised_and_flat_in_psi() {
        let input = vm(1, 0.2, 0.4, 1.5);
        let deltas = (0.5, 0.9);
        let h = 20;
        let off = correction_index(0.2, 0.5, 0.9, 0);
        let table = outcome_distribution(&input, deltas, (1 - off - 45, 1 - off + 45), 64, h).unwrap();
        assert!((table.total() - 1.0).abs() < 1e-8);
        for row in table.prob.rows() {
            let first = row[0];
            assert!(row.iter().all(|v| (v - first).abs() < 1e-15));
            assert!(row.iter().all(|v| *v >= 0.0));
        }
        let marginal = table.m_marginal();
        let peak = marginal.iter().cloned().fold(0.0, f64::max);
        let centre = (1 - off - table.m_min) as usize;
        assert!((marginal[centre] - peak).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic() {
        let input = vm(0, 0.0, 0.3, 1.0);
        let a = sample_outcomes(&input, (0.2, 0.1), 20, 32, 10, 7).unwrap();
        let b = sample_outcomes(&input, (0.2, 0.1), 20, 32, 10, 7).unwrap();
        assert_eq!(a, b);
        for (_, psi) in &a {
            assert!((-PI..PI).contains(psi));
        }
    }

    #[test]
    fn completeness_on_small_windows() {
        let wa = AngularWindow::new(-2, 2, 0.6, 1e-12).unwrap();
        let wb = AngularWindow::new(-1, 3, 0.7, 1e-12).unwrap();
        assert!(epr_completeness_residual(&wa, &wb, 16).unwrap() < 1e-10);
    }
}
