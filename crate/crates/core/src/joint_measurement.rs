//! Simultaneous measurement of `L` and `S` through the commuting meter pair
//! `𝓛 = L_s + L_a`, `𝓔 = E_s E_a†` on signal and ancilla modes.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::angular_state::{von_mises_auto, AngularWindow, TruncatedKet, VonMisesParams};
use crate::error::{Error, Result};
use crate::operators::E_MEAN_FLOOR;
use crate::special_fn::{bessel_i_scaled, bessel_ratio};

/// Tolerance on the ancilla conditions `⟨L_a⟩ = δ_a`, `arg⟨E_a⟩ = arg⟨E_a²⟩ = 0`.
pub const UNBIASED_TOL: f64 = 1e-10;

/// Truncation tolerance used when building kets for curve rows.
pub const CURVE_TAIL_TOL: f64 = 1e-15;

const MAX_ROOT_ITERATIONS: usize = 200;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Amplitudes `ψ(l, m)` over `window_s × window_a`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointAmplitudes {
    window_s: AngularWindow,
    window_a: AngularWindow,
    amps: Array2<C64>,
}

impl JointAmplitudes {
    pub fn new(window_s: AngularWindow, window_a: AngularWindow, amps: Array2<C64>) -> Result<Self> {
        if amps.dim() != (window_s.dim(), window_a.dim()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude shape {:?} does not match windows ({}, {})",
                amps.dim(),
                window_s.dim(),
                window_a.dim()
            )));
        }
        Ok(JointAmplitudes { window_s, window_a, amps })
    }

    pub fn product(signal: &TruncatedKet, ancilla: &TruncatedKet) -> Self {
        let amps = Array2::from_shape_fn((signal.coeffs().len(), ancilla.coeffs().len()), |(i, j)| {
            signal.coeffs()[i] * ancilla.coeffs()[j]
        });
        JointAmplitudes { window_s: *signal.window(), window_a: *ancilla.window(), amps }
    }

    pub fn window_s(&self) -> &AngularWindow {
        &self.window_s
    }

    pub fn window_a(&self) -> &AngularWindow {
        &self.window_a
    }

    pub fn amps(&self) -> &Array2<C64> {
        &self.amps
    }

    /// `ψ(l, m)`; zero outside the windows.
    pub fn get(&self, l: i64, m: i64) -> C64 {
        match (self.window_s.index_of(l), self.window_a.index_of(m)) {
            (Some(i), Some(j)) => self.amps[(i, j)],
            _ => C64::default(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalise a zero or non-finite state".into()));
        }
        self.amps.mapv_inplace(|c| c / n);
        Ok(self)
    }

    /// Same state on windows grown by `by` labels per side.
    pub fn padded(&self, by: usize) -> Self {
        let ws = self.window_s.expanded(by);
        let wa = self.window_a.expanded(by);
        let mut amps = Array2::zeros((ws.dim(), wa.dim()));
        amps.slice_mut(ndarray::s![by..by + self.window_s.dim(), by..by + self.window_a.dim()])
            .assign(&self.amps);
        JointAmplitudes { window_s: ws, window_a: wa, amps }
    }

    /// `⟨ψ|X|ψ⟩` for an operator mapping `|l, m⟩ → |l - ds, m - da⟩`.
    fn shift_mean(&self, ds: i64, da: i64) -> C64 {
        let mut acc = C64::default();
        for (i, l) in self.window_s.labels().enumerate() {
            for (j, m) in self.window_a.labels().enumerate() {
                acc += self.get(l - ds, m - da).conj() * self.amps[(i, j)];
            }
        }
        acc
    }

    /// `Σ |ψ(l, m)|² f(l+δ_s, m+δ_a)`.
    fn diagonal_mean(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (i, l) in self.window_s.labels().enumerate() {
            let x = self.window_s.eigenvalue(l);
            for (j, m) in self.window_a.labels().enumerate() {
                acc += self.amps[(i, j)].norm_sqr() * f(x, self.window_a.eigenvalue(m));
            }
        }
        acc
    }

    /// `⟨𝓔^k⟩` with `𝓔|l, m⟩ = |l-1, m+1⟩`.
    pub fn meter_e_moment(&self, k: i64) -> C64 {
        self.shift_mean(k, -k)
    }

    pub fn signal_e_moment(&self, k: i64) -> C64 {
        self.shift_mean(k, 0)
    }

    pub fn ancilla_e_moment(&self, k: i64) -> C64 {
        self.shift_mean(0, k)
    }
}

/// Signal ⊗ ancilla state.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoModeState {
    Product { signal: TruncatedKet, ancilla: TruncatedKet },
    Joint(JointAmplitudes),
}

impl TwoModeState {
    pub fn product(signal: TruncatedKet, ancilla: TruncatedKet) -> Self {
        TwoModeState::Product { signal, ancilla }
    }

    pub fn joint(&self) -> JointAmplitudes {
        match self {
            TwoModeState::Product { signal, ancilla } => JointAmplitudes::product(signal, ancilla),
            TwoModeState::Joint(j) => j.clone(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        match self {
            TwoModeState::Product { signal, ancilla } => signal.norm_sqr() * ancilla.norm_sqr(),
            TwoModeState::Joint(j) => j.norm_sqr(),
        }
    }
}

/// Dense meter operators on `window_s ⊗ window_a`, row index `i·d_a + j`.
#[derive(Debug, Clone)]
pub struct MeterOperators {
    pub window_s: AngularWindow,
    pub window_a: AngularWindow,
    pub total_l: Array2<C64>,
    pub e: Array2<C64>,
}

impl MeterOperators {
    /// `𝓢_β = (e^{-iβ}𝓔† - e^{iβ}𝓔) / 2i`.
    pub fn s_beta(&self, beta: f64) -> Array2<C64> {
        let dag = self.e.t().mapv(|z| z.conj());
        (dag * C64::from_polar(1.0, -beta) - &self.e * C64::from_polar(1.0, beta)) / (2.0 * I)
    }

    /// Largest entry of `[A, B]` over basis states at least `margin` labels
    /// from every window edge.
    pub fn interior_commutator(&self, a: &Array2<C64>, b: &Array2<C64>, margin: usize) -> f64 {
        let c = a.dot(b) - b.dot(a);
        let (ds, da) = (self.window_s.dim(), self.window_a.dim());
        let inside = |k: usize| {
            let (i, j) = (k / da, k % da);
            i >= margin && i + margin < ds && j >= margin && j + margin < da
        };
        let mut worst = 0.0f64;
        for ((r, col), v) in c.indexed_iter() {
            if inside(r) && inside(col) {
                worst = worst.max(v.norm());
            }
        }
        worst
    }
}

pub fn meter_operators(window_s: &AngularWindow, window_a: &AngularWindow) -> MeterOperators {
    let (ds, da) = (window_s.dim(), window_a.dim());
    let d = ds * da;
    let mut total_l = Array2::zeros((d, d));
    let mut e = Array2::zeros((d, d));
    for (i, l) in window_s.labels().enumerate() {
        for (j, m) in window_a.labels().enumerate() {
            let k = i * da + j;
            total_l[(k, k)] = C64::new(window_s.eigenvalue(l) + window_a.eigenvalue(m), 0.0);
            if i > 0 && j + 1 < da {
                e[((i - 1) * da + j + 1, k)] = C64::new(1.0, 0.0);
            }
        }
    }
    MeterOperators { window_s: *window_s, window_a: *window_a, total_l, e }
}

/// Uncertainties of the meter pair and the single-mode quantities that bound them.
#[derive(Debug, Clone, PartialEq)]
pub struct JointUncertaintyReport {
    pub mean_total_l: f64,
    pub var_total_l: f64,
    pub var_s_rel: f64,
    /// `var_s_rel / (|⟨E_s⟩|² |⟨E_a⟩|²)`.
    pub omega2: Option<f64>,
    pub product: f64,
    pub bound: f64,
    pub e_mean_s: f64,
    pub e_mean_a: f64,
    /// `|⟨E_s²⟩|`.
    pub e_s: f64,
    /// `|⟨E_a²⟩|`.
    pub e_a: f64,
    pub psi_s: f64,
    pub beta: f64,
    pub var_l_s: f64,
    pub var_l_a: f64,
    /// `⟨(ΔS_s)²⟩` at the angle where `⟨S_s⟩` vanishes.
    pub var_s_s: f64,
    pub var_s_a: f64,
    /// `⟨(Δ𝓛)²(Δ𝓢_β)²⟩`.
    pub she_heffner: f64,
    pub unbiased: bool,
}

impl JointUncertaintyReport {
    fn normalizer(&self) -> Option<f64> {
        let n = self.e_mean_s * self.e_mean_s * self.e_mean_a * self.e_mean_a;
        (self.e_mean_s * self.e_mean_a >= E_MEAN_FLOOR).then_some(n)
    }

    /// `⟨(Δ𝓛)²⟩ Ω²`.
    pub fn normalized_product(&self) -> Option<f64> {
        self.normalizer().map(|n| self.product / n)
    }

    pub fn normalized_bound(&self) -> Option<f64> {
        self.normalizer().map(|n| self.bound / n)
    }

    pub fn normalized_she_heffner(&self) -> Option<f64> {
        self.normalizer().map(|n| self.she_heffner / n)
    }

    pub fn inequality_chain(&self) -> InequalityChain {
        let a = (self.var_l_a * self.var_s_a).sqrt();
        let b = (self.e_a * self.var_l_s * self.var_s_s).sqrt();
        InequalityChain {
            product: (self.var_l_s + self.var_l_a) * (self.var_s_a + self.e_a * self.var_s_s),
            middle: (a + b).powi(2),
            bound: self.bound,
            cross_residual: self.var_l_s * self.var_s_a - self.e_a * self.var_l_a * self.var_s_s,
        }
    }
}

/// The two-step lower bound on the measured uncertainty product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityChain {
    pub product: f64,
    /// `[√(⟨ΔL_a²⟩⟨ΔS_a²⟩) + √(e_a ⟨ΔL_s²⟩⟨ΔS_s²⟩)]²`.
    pub middle: f64,
    pub bound: f64,
    /// `⟨ΔL_s²⟩⟨ΔS_a²⟩ - e_a⟨ΔL_a²⟩⟨ΔS_s²⟩`; zero when the first step is tight.
    pub cross_residual: f64,
}

fn arg(z: C64) -> f64 {
    z.im.atan2(z.re)
}

/// Variance of `S` at the angle where its mean vanishes, from `⟨E⟩` and `⟨E²⟩`.
fn centered_var_s(e1: C64, e2: C64) -> f64 {
    let rot = C64::from_polar(1.0, -2.0 * arg(e1));
    (0.5 * (1.0 - (rot * e2).re)).max(0.0)
}

pub fn joint_uncertainties(state: &TwoModeState) -> Result<JointUncertaintyReport> {
    let psi = state.joint();
    let norm = psi.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidParameter(format!("state norm² {norm} differs from 1")));
    }
    let wa = psi.window_a;

    let mean_ls = psi.diagonal_mean(|x, _| x);
    let mean_la = psi.diagonal_mean(|_, y| y);
    let mean_total = mean_ls + mean_la;
    let var_total = psi.diagonal_mean(|x, y| (x + y - mean_total).powi(2));
    let var_l_s = psi.diagonal_mean(|x, _| (x - mean_ls).powi(2));
    let var_l_a = psi.diagonal_mean(|_, y| (y - mean_la).powi(2));

    let es1 = psi.signal_e_moment(1);
    let es2 = psi.signal_e_moment(2);
    let ea1 = psi.ancilla_e_moment(1);
    let ea2 = psi.ancilla_e_moment(2);
    let beta = arg(ea1) - arg(es1);

    // ⟨𝓢_β⟩ = -Im(e^{iβ}⟨𝓔⟩), ⟨𝓢_β²⟩ = (1 - Re(e^{2iβ}⟨𝓔²⟩)) / 2
    let m1 = psi.meter_e_moment(1);
    let m2 = psi.meter_e_moment(2);
    let mean_s = -(C64::from_polar(1.0, beta) * m1).im;
    let var_s_rel = (0.5 * (1.0 - (C64::from_polar(1.0, 2.0 * beta) * m2).re) - mean_s * mean_s).max(0.0);

    // ‖(Δ𝓛)(Δ𝓢_β)ψ‖² on a padded grid
    let pad = psi.padded(1);
    let (pws, pwa) = (pad.window_s, pad.window_a);
    let up = C64::from_polar(1.0, -beta);
    let down = C64::from_polar(1.0, beta);
    let mut she = 0.0;
    for l in pws.labels() {
        for m in pwa.labels() {
            let s = (up * psi.get(l - 1, m + 1) - down * psi.get(l + 1, m - 1)) / (2.0 * I);
            let ds = s - psi.get(l, m) * mean_s;
            let dl = pws.eigenvalue(l) + pwa.eigenvalue(m) - mean_total;
            she += (ds * dl).norm_sqr();
        }
    }

    let e_mean_s = es1.norm();
    let e_mean_a = ea1.norm();
    let e_s = es2.norm();
    let e_a = ea2.norm();
    let omega2 = (e_mean_s * e_mean_a >= E_MEAN_FLOOR).then(|| var_s_rel / (e_mean_s * e_mean_a).powi(2));
    let unbiased = (mean_la - wa.delta()).abs() <= UNBIASED_TOL
        && arg(ea1).abs() <= UNBIASED_TOL
        && (e_a < E_MEAN_FLOOR || arg(ea2).abs() <= UNBIASED_TOL);

    Ok(JointUncertaintyReport {
        mean_total_l: mean_total,
        var_total_l: var_total,
        var_s_rel,
        omega2,
        product: var_total * var_s_rel,
        bound: 0.25 * (e_mean_a + e_mean_s * e_a.sqrt()).powi(2),
        e_mean_s,
        e_mean_a,
        e_s,
        e_a,
        psi_s: crate::angular_state::reduce_angle(2.0 * arg(es1) - arg(es2)),
        beta: crate::angular_state::reduce_angle(beta),
        var_l_s,
        var_l_a,
        var_s_s: centered_var_s(es1, es2),
        var_s_a: centered_var_s(ea1, ea2),
        she_heffner: she,
        unbiased,
    })
}

/// Signal spread matched to an ancilla spread: `κ_s = κ_a √(I_2(2κ_a)/I_0(2κ_a))`.
pub fn kappa_match(kappa_a: f64) -> Result<f64> {
    if !kappa_a.is_finite() || kappa_a < 0.0 {
        return Err(Error::InvalidParameter(format!("kappa_a must be finite and >= 0, got {kappa_a}")));
    }
    if kappa_a == 0.0 {
        return Ok(0.0);
    }
    Ok(kappa_a * bessel_ratio(2, 0, 2.0 * kappa_a)?.sqrt())
}

/// `d κ_s / d κ_a`, using `I_n' = (I_{n-1} + I_{n+1}) / 2`.
fn kappa_match_derivative(kappa_a: f64) -> f64 {
    let z = 2.0 * kappa_a;
    let i: Vec<f64> = (0..4).map(|n| bessel_i_scaled(n, z)).collect();
    let r2 = i[2] / i[0];
    let d2 = 0.5 * (i[1] + i[3]);
    let dr2_dz = (d2 * i[0] - i[2] * i[1]) / (i[0] * i[0]);
    r2.sqrt() + kappa_a * dr2_dz / r2.sqrt()
}

/// Ancilla spread whose matched signal spread is `kappa_s`.
///
/// Bisection on a doubling bracket, then two Newton steps kept inside the bracket.
pub fn kappa_match_inverse(kappa_s: f64) -> Result<f64> {
    if !kappa_s.is_finite() || kappa_s < 0.0 {
        return Err(Error::InvalidParameter(format!("kappa_s must be finite and >= 0, got {kappa_s}")));
    }
    if kappa_s == 0.0 {
        return Ok(0.0);
    }
    let f = |k: f64| kappa_match(k).map(|v| v - kappa_s);
    let mut lo = 0.0;
    let mut hi = kappa_s + 1.0;
    let mut iterations = 0;
    while f(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations > MAX_ROOT_ITERATIONS {
            return Err(Error::Convergence(iterations));
        }
    }
    let tol = 1e-12 * kappa_s.max(1.0);
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
        if iterations > MAX_ROOT_ITERATIONS {
            return Err(Error::Convergence(iterations));
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..2 {
        let fx = f(x)?;
        let d = kappa_match_derivative(x);
        if d.is_finite() && d > 0.0 {
            let next = x - fx / d;
            if next > 0.0 && f(next)?.abs() <= fx.abs() {
                x = next;
            }
        }
    }
    if f(x)?.abs() > tol {
        return Err(Error::Convergence(iterations));
    }
    Ok(x)
}

/// Closed-form `⟨(Δ𝓛)²(Δ𝓢)²⟩` for von Mises signal and ancilla,
/// `[(κ_s/κ_a + κ_a/κ_s) I_1 I_1 + 2 I_2 I_2] / (4 I_0 I_0)`.
///
/// Returns `+∞` as a sentinel when either spread is zero.
pub fn she_heffner_moment(kappa_s: f64, kappa_a: f64) -> f64 {
    if kappa_s <= 0.0 || kappa_a <= 0.0 {
        return f64::INFINITY;
    }
    let r = |n: i64, k: f64| bessel_ratio(n, 0, 2.0 * k).unwrap_or(f64::NAN);
    ((kappa_s / kappa_a + kappa_a / kappa_s) * r(1, kappa_s) * r(1, kappa_a)
        + 2.0 * r(2, kappa_s) * r(2, kappa_a))
        / 4.0
}

/// Optimal-product curve value `[I_1(2κ_a)/I_0 + √(I_2(2κ_a)/I_0) I_1(2κ_s)/I_0]² / 4`.
pub fn bound_closed(kappa_s: f64, kappa_a: f64) -> f64 {
    let r = |n: i64, k: f64| bessel_ratio(n, 0, 2.0 * k).unwrap_or(f64::NAN);
    0.25 * (r(1, kappa_a) + r(2, kappa_a).sqrt() * r(1, kappa_s)).powi(2)
}

/// Header of the curve table.
pub const FIGURE2_HEADER: &str = "kappa_s,kappa_a,var_L,omega2,product_opt,product_equal_kappa,she_heffner";

/// One row of the measurement-curve table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Figure2Row {
    pub kappa_s: f64,
    pub kappa_a: f64,
    pub var_l: f64,
    pub omega2: f64,
    pub product_opt: f64,
    pub product_equal_kappa: f64,
    pub she_heffner: f64,
}

impl Figure2Row {
    pub fn values(&self) -> [f64; 7] {
        [
            self.kappa_s,
            self.kappa_a,
            self.var_l,
            self.omega2,
            self.product_opt,
            self.product_equal_kappa,
            self.she_heffner,
        ]
    }
}

/// Report for signal `|0, 0; κ_s⟩` and ancilla `|δ_a, 0; κ_a⟩`.
pub fn von_mises_pair_report(kappa_s: f64, kappa_a: f64, delta_a: f64) -> Result<JointUncertaintyReport> {
    let s = von_mises_auto(&VonMisesParams::new(0, 0.0, 0.0, kappa_s)?, CURVE_TAIL_TOL)?;
    let a = von_mises_auto(&VonMisesParams::new(0, delta_a, 0.0, kappa_a)?, CURVE_TAIL_TOL)?;
    joint_uncertainties(&TwoModeState::product(s, a))
}

fn figure2_row(kappa_s: f64, delta_a: f64) -> Result<Figure2Row> {
    if !(kappa_s > 0.0) || !kappa_s.is_finite() {
        return Err(Error::InvalidParameter(format!("curve grid values must be positive, got {kappa_s}")));
    }
    let kappa_a = kappa_match_inverse(kappa_s)?;
    let opt = von_mises_pair_report(kappa_s, kappa_a, delta_a)?;
    let equal = von_mises_pair_report(kappa_s, kappa_s, delta_a)?;
    let undefined = || Error::DivisionByZero(format!("⟨E⟩ vanishes at kappa_s = {kappa_s}"));
    let norm = |k: f64| bessel_ratio(1, 0, 2.0 * k).map(|r| r * r);
    Ok(Figure2Row {
        kappa_s,
        kappa_a,
        var_l: opt.var_total_l,
        omega2: opt.omega2.ok_or_else(undefined)?,
        product_opt: opt.normalized_product().ok_or_else(undefined)?,
        product_equal_kappa: equal.normalized_product().ok_or_else(undefined)?,
        she_heffner: she_heffner_moment(kappa_s, kappa_a) / (norm(kappa_s)? * norm(kappa_a)?),
    })
}

/// Curve rows for each `κ_s`, computed in parallel and returned in input order.
pub fn figure2_curve(kappa_s_grid: &[f64], delta_a: f64) -> Result<Vec<Figure2Row>> {
    kappa_s_grid.par_iter().map(|&k| figure2_row(k, delta_a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vm_ket(n: i64, delta: f64, alpha: f64, kappa: f64) -> TruncatedKet {
        von_mises_auto(&VonMisesParams::new(n, delta, alpha, kappa).unwrap(), 1e-15).unwrap()
    }

    #[test]
    fn meter_commutes_on_interior() {
        let ws = AngularWindow::new(-3, 3, 0.2, 1e-12).unwrap();
        let wa = AngularWindow::new(-2, 4, 0.7, 1e-12).unwrap();
        let ops = meter_operators(&ws, &wa);
        assert!(ops.interior_commutator(&ops.total_l, &ops.e, 1) <= 1e-14);
        assert!(ops.interior_commutator(&ops.total_l, &ops.s_beta(0.4), 1) <= 1e-14);
        // |l, m⟩ → |l-1, m+1⟩ with eigenvalue l + m + δ_s + δ_a
        let k = 3 * wa.dim() + 2;
        assert_eq!(ops.e[((2) * wa.dim() + 3, k)], C64::new(1.0, 0.0));
        assert!((ops.total_l[(k, k)].re - (0.0 + 0.0 + 0.2 + 0.7)).abs() < 1e-15);
    }

    #[test]
    fn matched_pair_saturates_bound() {
        for ks in [0.1, 0.7, 1.146, 3.0, 10.0] {
            let ka = kappa_match_inverse(ks).unwrap();
            let r = von_mises_pair_report(ks, ka, 0.0).unwrap();
            assert!(r.unbiased);
            assert!((r.product - r.bound).abs() < 1e-10, "ks={ks}");
            assert!((r.bound - bound_closed(ks, ka)).abs() < 1e-12);
            let eq = von_mises_pair_report(ks, ks, 0.0).unwrap();
            assert!(eq.product > eq.bound);
        }
    }

    #[test]
    fn report_identities() {
        let s = vm_ket(2, 0.3, 0.8, 1.4);
        let a = vm_ket(0, 0.6, 0.0, 2.1);
        let r = joint_uncertainties(&TwoModeState::product(s, a)).unwrap();
        assert!(r.unbiased);
        assert!((r.var_total_l - r.var_l_s - r.var_l_a).abs() < 1e-12);
        assert!((r.var_s_rel - (r.var_s_a + r.e_a * r.var_s_s)).abs() < 1e-12);
        assert!((r.var_s_rel - 0.5 * (1.0 - r.e_s * r.e_a * r.psi_s.cos())).abs() < 1e-12);
        assert!((r.mean_total_l - 2.9).abs() < 1e-12);
        let sh = she_heffner_moment(1.4, 2.1);
        assert!((r.she_heffner - sh).abs() < 1e-10);
    }

    #[test]
    fn biased_ancilla_is_flagged() {
        let s = vm_ket(0, 0.0, 0.0, 1.0);
        let a = vm_ket(0, 0.0, 0.5, 1.0);
        assert!(!joint_uncertainties(&TwoModeState::product(s, a)).unwrap().unbiased);
    }

    #[test]
    fn kappa_match_values() {
        assert_eq!(kappa_match(0.0).unwrap(), 0.0);
        assert!((kappa_match(1.632).unwrap() - 1.146).abs() < 2e-3);
        assert!((kappa_match_inverse(1.146).unwrap() - 1.632).abs() < 2e-3);
        assert_eq!(kappa_match_inverse(0.0).unwrap(), 0.0);
        for k in [1e-3, 0.05, 0.3, 2.0, 19.0, 500.0, 9000.0] {
            let ka = kappa_match_inverse(k).unwrap();
            assert!(ka > k);
            assert!((kappa_match(ka).unwrap() - k).abs() <= 1e-12 * k.max(1.0));
        }
        assert!(kappa_match(-1.0).is_err());
    }

    #[test]
    fn she_heffner_special_values() {
        let k: f64 = 1.3;
        let r1 = bessel_ratio(1, 0, 2.0 * k).unwrap();
        let r2 = bessel_ratio(2, 0, 2.0 * k).unwrap();
        assert!((she_heffner_moment(k, k) - (2.0 * r1 * r1 + 2.0 * r2 * r2) / 4.0).abs() < 1e-15);
        assert!(she_heffner_moment(0.0, 1.0).is_infinite());
    }

    #[test]
    fn curve_rows_in_order() {
        let grid = [2.0, 0.5, 1.146];
        let rows = figure2_curve(&grid, 0.0).unwrap();
        assert_eq!(rows.iter().map(|r| r.kappa_s).collect::<Vec<_>>(), grid.to_vec());
        let c = rows[2];
        assert!((c.var_l - 1.099).abs() < 5e-3 && (c.omega2 - 1.099).abs() < 5e-3);
        for r in &rows {
            assert!(r.product_opt >= 1.0 && r.she_heffner <= r.product_opt);
        }
        assert!(figure2_curve(&[0.0], 0.0).is_err());
    }
}
