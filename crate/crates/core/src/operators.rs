//! Angular momentum `L`, the exponential angle operator `E`, the sine and
//! cosine operators, displacements and moments.
//!
//! Two evaluation paths coexist. Dense [`OperatorMatrix`] values act inside a
//! fixed window and drop whatever is shifted across its edge (that loss is the
//! reported leakage). The structured functions below treat a ket as zero
//! outside its window and are exact on the full space.

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::angular_state::{AngularWindow, TruncatedKet, VonMisesParams};
use crate::error::{Error, Result};
use crate::special_fn::{bessel_quotient, bessel_ratio};

/// Below this `|⟨E⟩|` the angular spread `ω²` is reported as undefined.
pub const E_MEAN_FLOOR: f64 = 1e-12;

/// Highest power of `L` handled by the joint-moment recurrence.
pub const MAX_MOMENT_ORDER: u32 = 4;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Dense operator on the span of an [`AngularWindow`].
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    window: AngularWindow,
    entries: Array2<C64>,
}

impl OperatorMatrix {
    pub fn new(window: AngularWindow, entries: Array2<C64>) -> Result<Self> {
        let d = window.dim();
        if entries.dim() != (d, d) {
            return Err(Error::InvalidParameter(format!(
                "matrix shape {:?} does not match window dimension {d}",
                entries.dim()
            )));
        }
        Ok(OperatorMatrix { window, entries })
    }

    pub fn identity(window: AngularWindow) -> Self {
        OperatorMatrix { window, entries: Array2::eye(window.dim()) }
    }

    pub fn window(&self) -> &AngularWindow {
        &self.window
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    /// Matrix element `⟨l|A|l'⟩` by label.
    pub fn element(&self, l: i64, lp: i64) -> C64 {
        match (self.window.index_of(l), self.window.index_of(lp)) {
            (Some(i), Some(j)) => self.entries[(i, j)],
            _ => C64::default(),
        }
    }

    pub fn adjoint(&self) -> Self {
        let entries = self.entries.t().mapv(|z| z.conj());
        OperatorMatrix { window: self.window, entries }
    }

    pub fn scaled(&self, s: C64) -> Self {
        OperatorMatrix { window: self.window, entries: &self.entries * s }
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_same(other)?;
        Ok(OperatorMatrix { window: self.window, entries: &self.entries + &other.entries })
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_same(other)?;
        Ok(OperatorMatrix { window: self.window, entries: &self.entries - &other.entries })
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<Self> {
        self.check_same(other)?;
        Ok(OperatorMatrix { window: self.window, entries: self.entries.dot(&other.entries) })
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = OperatorMatrix::identity(self.window);
        for _ in 0..k {
            out.entries = out.entries.dot(&self.entries);
        }
        out
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &OperatorMatrix) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    /// `max |A - A†|` over all entries.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry difference over indices at least `margin` away from
    /// either window edge.
    pub fn interior_distance(&self, other: &OperatorMatrix, margin: usize) -> Result<f64> {
        self.check_same(other)?;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in margin..d.saturating_sub(margin) {
            for j in margin..d.saturating_sub(margin) {
                worst = worst.max((self.entries[(i, j)] - other.entries[(i, j)]).norm());
            }
        }
        Ok(worst)
    }

    /// `A|ψ⟩` inside the window, plus the weight lost across the edges.
    ///
    /// The leakage figure assumes `A` is norm-preserving on the full space.
    pub fn apply_tracked(&self, ket: &TruncatedKet) -> Result<(TruncatedKet, f64)> {
        let ket = self.conform(ket)?;
        let v = ndarray::Array1::from(ket.coeffs().to_vec());
        let out = self.entries.dot(&v).to_vec();
        let before = ket.norm_sqr();
        let out = TruncatedKet::new(self.window, out)?;
        let leakage = (before - out.norm_sqr()).max(0.0);
        Ok((out, leakage))
    }

    pub fn apply(&self, ket: &TruncatedKet) -> Result<TruncatedKet> {
        Ok(self.apply_tracked(ket)?.0)
    }

    /// `⟨ψ|A|ψ⟩`.
    pub fn expectation(&self, ket: &TruncatedKet) -> Result<C64> {
        let ket = self.conform(ket)?;
        let out = self.apply(&ket)?;
        ket.inner(&out)
    }

    fn conform(&self, ket: &TruncatedKet) -> Result<TruncatedKet> {
        if ket.window() == &self.window {
            return Ok(ket.clone());
        }
        if ket.delta() != self.window.delta() {
            return Err(Error::Mismatch("ket and operator fractional parts differ".into()));
        }
        if ket.window().l_min() < self.window.l_min() || ket.window().l_max() > self.window.l_max() {
            return Err(Error::InvalidParameter("ket extends beyond the operator window".into()));
        }
        ket.embed(self.window)
    }

    fn check_same(&self, other: &OperatorMatrix) -> Result<()> {
        if self.window.l_min() != other.window.l_min()
            || self.window.l_max() != other.window.l_max()
            || self.window.delta() != other.window.delta()
        {
            return Err(Error::Mismatch("operators live on different windows".into()));
        }
        Ok(())
    }
}

/// `L` with diagonal entries `l + δ`.
pub fn angular_momentum(window: &AngularWindow) -> OperatorMatrix {
    let mut m = Array2::zeros((window.dim(), window.dim()));
    for (i, l) in window.labels().enumerate() {
        m[(i, i)] = C64::new(window.eigenvalue(l), 0.0);
    }
    OperatorMatrix { window: *window, entries: m }
}

/// `E` as the lowering shift `⟨l|E|l'⟩ = δ_{l,l'-1}`.
pub fn lowering(window: &AngularWindow) -> OperatorMatrix {
    let d = window.dim();
    let mut m = Array2::zeros((d, d));
    for i in 0..d.saturating_sub(1) {
        m[(i, i + 1)] = C64::new(1.0, 0.0);
    }
    OperatorMatrix { window: *window, entries: m }
}

/// `E†`, raising `|l⟩ → |l+1⟩`.
pub fn raising(window: &AngularWindow) -> OperatorMatrix {
    lowering(window).adjoint()
}

/// `S_α = (e^{-iα}E† - e^{iα}E) / 2i`.
pub fn sine(window: &AngularWindow, alpha: f64) -> OperatorMatrix {
    let up = raising(window).scaled(C64::from_polar(1.0, -alpha));
    let down = lowering(window).scaled(C64::from_polar(1.0, alpha));
    let diff = up.sub(&down).expect("same window");
    diff.scaled(1.0 / (2.0 * I))
}

/// `C_α = (e^{-iα}E† + e^{iα}E) / 2`.
pub fn cosine(window: &AngularWindow, alpha: f64) -> OperatorMatrix {
    let up = raising(window).scaled(C64::from_polar(1.0, -alpha));
    let down = lowering(window).scaled(C64::from_polar(1.0, alpha));
    up.add(&down).expect("same window").scaled(C64::new(0.5, 0.0))
}

/// `e^{-iLφ}`.
pub fn rotation(window: &AngularWindow, phi: f64) -> OperatorMatrix {
    let mut m = Array2::zeros((window.dim(), window.dim()));
    for (i, l) in window.labels().enumerate() {
        m[(i, i)] = C64::from_polar(1.0, -window.eigenvalue(l) * phi);
    }
    OperatorMatrix { window: *window, entries: m }
}

/// `D(l, φ) = e^{-ilφ/2} E^{-l} e^{-iLφ}` restricted to `window`.
pub fn displacement(l: i64, phi: f64, window: &AngularWindow) -> OperatorMatrix {
    let d = window.dim();
    let mut m = Array2::zeros((d, d));
    let pre = -(l as f64) * phi / 2.0;
    for (j, lab) in window.labels().enumerate() {
        if let Some(i) = window.index_of(lab + l) {
            m[(i, j)] = C64::from_polar(1.0, pre - window.eigenvalue(lab) * phi);
        }
    }
    OperatorMatrix { window: *window, entries: m }
}

/// The operator family built on one window.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub l: OperatorMatrix,
    pub e: OperatorMatrix,
    pub e_dag: OperatorMatrix,
}

impl OperatorSet {
    pub fn s(&self, alpha: f64) -> OperatorMatrix {
        sine(self.l.window(), alpha)
    }

    pub fn c(&self, alpha: f64) -> OperatorMatrix {
        cosine(self.l.window(), alpha)
    }
}

pub fn build_operators(window: &AngularWindow) -> OperatorSet {
    OperatorSet { l: angular_momentum(window), e: lowering(window), e_dag: raising(window) }
}

/// `e^{-iLφ}|ψ⟩`, exact.
pub fn rotate(ket: &TruncatedKet, phi: f64) -> TruncatedKet {
    let w = *ket.window();
    let coeffs = w
        .labels()
        .zip(ket.coeffs())
        .map(|(l, c)| c * C64::from_polar(1.0, -w.eigenvalue(l) * phi))
        .collect();
    TruncatedKet::new(w, coeffs).expect("same dimension")
}

/// `E^{-k}|ψ⟩`, exact: the window is relabelled by `k`.
pub fn raise(ket: &TruncatedKet, k: i64) -> TruncatedKet {
    let w = ket.window();
    let window = AngularWindow::new(w.l_min() + k, w.l_max() + k, w.delta(), w.tail_tol())
        .expect("shifted window is valid");
    TruncatedKet::new(window, ket.coeffs().to_vec()).expect("same dimension")
}

/// `D(l, φ)|ψ⟩`, exact.
pub fn displace(ket: &TruncatedKet, l: i64, phi: f64) -> TruncatedKet {
    raise(&rotate(ket, phi), l).scaled(C64::from_polar(1.0, -(l as f64) * phi / 2.0))
}

/// `D^{-1}(l, φ)|ψ⟩ = D(-l, -φ)|ψ⟩`, exact.
pub fn displace_inverse(ket: &TruncatedKet, l: i64, phi: f64) -> TruncatedKet {
    displace(ket, -l, -phi)
}

/// `⟨E^{-k}⟩ = Σ_l c̄_{l+k} c_l`.
pub fn e_moment(ket: &TruncatedKet, k: i64) -> C64 {
    let w = ket.window();
    w.labels().zip(ket.coeffs()).map(|(l, c)| ket.coeff(l + k).conj() * c).sum()
}

pub fn mean_l(ket: &TruncatedKet) -> f64 {
    let w = ket.window();
    w.labels().zip(ket.coeffs()).map(|(l, c)| c.norm_sqr() * w.eigenvalue(l)).sum()
}

pub fn var_l(ket: &TruncatedKet) -> f64 {
    let w = ket.window();
    let mu = mean_l(ket);
    w.labels().zip(ket.coeffs()).map(|(l, c)| c.norm_sqr() * (w.eigenvalue(l) - mu).powi(2)).sum()
}

/// `⟨S_α⟩ = -Im(e^{iα}⟨E⟩)`.
pub fn mean_s(ket: &TruncatedKet, alpha: f64) -> f64 {
    -(C64::from_polar(1.0, alpha) * e_moment(ket, -1)).im
}

/// `⟨C_α⟩ = Re(e^{iα}⟨E⟩)`.
pub fn mean_c(ket: &TruncatedKet, alpha: f64) -> f64 {
    (C64::from_polar(1.0, alpha) * e_moment(ket, -1)).re
}

/// `⟨(ΔS_α)²⟩`, using `E†E = 1` on the full space.
pub fn var_s(ket: &TruncatedKet, alpha: f64) -> f64 {
    let e2 = e_moment(ket, -2);
    let s2 = 0.5 * (1.0 - (C64::from_polar(1.0, 2.0 * alpha) * e2).re);
    (s2 - mean_s(ket, alpha).powi(2)).max(0.0)
}

/// `⟨(ΔC_α)²⟩`.
pub fn var_c(ket: &TruncatedKet, alpha: f64) -> f64 {
    let e2 = e_moment(ket, -2);
    let c2 = 0.5 * (1.0 + (C64::from_polar(1.0, 2.0 * alpha) * e2).re);
    (c2 - mean_c(ket, alpha).powi(2)).max(0.0)
}

/// `S_α|ψ⟩` on the window grown by one label.
pub fn apply_sine(ket: &TruncatedKet, alpha: f64) -> TruncatedKet {
    let padded = ket.padded(1);
    let w = *padded.window();
    let up = C64::from_polar(1.0, -alpha);
    let down = C64::from_polar(1.0, alpha);
    let coeffs = w
        .labels()
        .map(|l| (up * ket.coeff(l - 1) - down * ket.coeff(l + 1)) / (2.0 * I))
        .collect();
    TruncatedKet::new(w, coeffs).expect("same dimension")
}

/// `⟨{ΔL, ΔS_α}⟩ = 2 Re⟨ΔL ψ|ΔS_α ψ⟩`.
pub fn anticommutator_mean(ket: &TruncatedKet, alpha: f64) -> f64 {
    let mu = mean_l(ket);
    let ms = mean_s(ket, alpha);
    let s_psi = apply_sine(ket, alpha);
    let w = *s_psi.window();
    let mut acc = C64::default();
    for l in w.labels() {
        let dl = ket.coeff(l) * (w.eigenvalue(l) - mu);
        let ds = s_psi.coeff(l) - ket.coeff(l) * ms;
        acc += dl.conj() * ds;
    }
    2.0 * acc.re
}

/// Summary of first and second moments of a ket.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean_l: f64,
    pub var_l: f64,
    /// `⟨E^{-l}⟩` for `l = 1..=l_top`.
    pub e_moments: Vec<C64>,
    /// Angle at which `⟨S_α⟩` vanishes, `-arg⟨E⟩`.
    pub alpha_star: f64,
    /// `⟨(ΔS_{α*})²⟩ / |⟨E⟩|²`; `None` when `⟨E⟩` vanishes.
    pub omega2: Option<f64>,
    pub uncertainty_product: Option<f64>,
}

pub fn moments(ket: &TruncatedKet, l_top: usize) -> Result<MomentReport> {
    let hw = ket.window().half_width();
    if l_top > hw.max(1) {
        return Err(Error::InvalidParameter(format!(
            "l_top = {l_top} exceeds window half-width {hw}"
        )));
    }
    let var = var_l(ket);
    let e1 = e_moment(ket, -1);
    let alpha_star = -e1.im.atan2(e1.re);
    let omega2 = (e1.norm() >= E_MEAN_FLOOR).then(|| var_s(ket, alpha_star) / e1.norm_sqr());
    Ok(MomentReport {
        mean_l: mean_l(ket),
        var_l: var,
        e_moments: (1..=l_top as i64).map(|k| e_moment(ket, k)).collect(),
        alpha_star,
        omega2,
        uncertainty_product: omega2.map(|o| o * var),
    })
}

/// `⟨(ΔL)²⟩ = (κ/2) I_1(2κ)/I_0(2κ)` for a von Mises state.
pub fn var_l_closed(kappa: f64) -> f64 {
    0.5 * kappa * bessel_ratio(1, 0, 2.0 * kappa).unwrap_or(0.0)
}

/// `ω² = (1 - I_2/I_0) / (2 (I_1/I_0)²)` at argument `2κ`; `None` at `κ = 0`.
pub fn omega2_closed(kappa: f64) -> Option<f64> {
    if kappa == 0.0 {
        return None;
    }
    let r1 = bessel_ratio(1, 0, 2.0 * kappa).ok()?;
    let r2 = bessel_ratio(2, 0, 2.0 * kappa).ok()?;
    Some((1.0 - r2) / (2.0 * r1 * r1))
}

/// Moment generating function `G(l, φ) = ⟨E^{-l} e^{-iLφ}⟩` of a von Mises state.
pub fn generating_function(params: &VonMisesParams, l: i64, phi: f64) -> C64 {
    let kappa = params.kappa();
    let mag = bessel_quotient(l, 2.0 * kappa * (phi / 2.0).cos(), 0, 2.0 * kappa).unwrap_or(0.0);
    let phase = l as f64 * params.alpha() - (params.mean_l() - l as f64 / 2.0) * phi;
    C64::from_polar(1.0, phase) * mag
}

/// `⟨ψ|E^{-l} e^{-iLφ}|ψ⟩` summed over the ket's coefficients.
pub fn generating_function_numeric(ket: &TruncatedKet, l: i64, phi: f64) -> C64 {
    let w = ket.window();
    w.labels()
        .zip(ket.coeffs())
        .map(|(m, c)| ket.coeff(m + l).conj() * c * C64::from_polar(1.0, -w.eigenvalue(m) * phi))
        .sum()
}

/// `⟨E^{-l} L^N⟩` from the coefficients, applying `L` by diagonal scaling.
pub fn joint_moment_numeric(ket: &TruncatedKet, l: i64, order: u32) -> C64 {
    let w = ket.window();
    let mut v: Vec<C64> = ket.coeffs().to_vec();
    for _ in 0..order {
        for (c, lab) in v.iter_mut().zip(w.labels()) {
            *c *= w.eigenvalue(lab);
        }
    }
    w.labels().zip(&v).map(|(m, c)| ket.coeff(m + l).conj() * c).sum()
}

/// `⟨E^{-l} (L - ⟨L⟩)^N⟩` from the coefficients.
pub fn central_joint_moment_numeric(ket: &TruncatedKet, l: i64, order: u32) -> C64 {
    let w = ket.window();
    let mu = mean_l(ket);
    w.labels()
        .zip(ket.coeffs())
        .map(|(m, c)| ket.coeff(m + l).conj() * c * (w.eigenvalue(m) - mu).powi(order as i32))
        .sum()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

struct Recurrence<'a> {
    params: &'a VonMisesParams,
    memo: HashMap<(i64, u32), C64>,
}

impl Recurrence<'_> {
    fn moment(&mut self, l: i64, order: u32) -> C64 {
        if let Some(v) = self.memo.get(&(l, order)) {
            return *v;
        }
        let p = self.params;
        let kappa = p.kappa();
        let v = if order == 0 {
            let r = bessel_quotient(l, 2.0 * kappa, 0, 2.0 * kappa).unwrap_or(0.0);
            C64::from_polar(1.0, l as f64 * p.alpha()) * r
        } else {
            // ⟨E^{-k} [(L+a)^{N-1} - (L+b)^{N-1}]⟩ expanded binomially in L^j
            let mut shifted = |k: i64, a: f64, b: f64| -> C64 {
                let n1 = order - 1;
                (0..=n1)
                    .map(|j| {
                        let e = (n1 - j) as i32;
                        self.moment(k, j) * (binomial(n1, j) * (a.powi(e) - b.powi(e)))
                    })
                    .sum()
            };
            let lower = shifted(l - 1, 0.0, -1.0);
            let upper = shifted(l + 1, 0.0, 1.0);
            let bracket = C64::from_polar(1.0, p.alpha()) * lower - C64::from_polar(1.0, -p.alpha()) * upper;
            bracket * (kappa / 4.0) + self.moment(l, order - 1) * (p.mean_l() - l as f64 / 2.0)
        };
        self.memo.insert((l, order), v);
        v
    }
}

/// `⟨E^{-l} L^N⟩` of a von Mises state by the recurrence in `N`, seeded with
/// `⟨E^{-l}⟩ = e^{ilα} I_l(2κ)/I_0(2κ)`.
pub fn joint_moment_recurrence(params: &VonMisesParams, l: i64, order: u32) -> Result<C64> {
    if order > MAX_MOMENT_ORDER {
        return Err(Error::InvalidParameter(format!(
            "moment order {order} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    Ok(Recurrence { params, memo: HashMap::new() }.moment(l, order))
}

/// `⟨E^{-l} (L - ⟨L⟩)^N⟩` of a von Mises state, expanded from raw joint moments.
pub fn central_joint_moment(params: &VonMisesParams, l: i64, order: u32) -> Result<C64> {
    if order > MAX_MOMENT_ORDER {
        return Err(Error::InvalidParameter(format!(
            "moment order {order} exceeds {MAX_MOMENT_ORDER}"
        )));
    }
    let mut rec = Recurrence { params, memo: HashMap::new() };
    let mu = params.mean_l();
    Ok((0..=order)
        .map(|j| rec.moment(l, j) * (binomial(order, j) * (-mu).powi((order - j) as i32)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_state::{von_mises_auto, von_mises_ket};

    fn vm(n: i64, delta: f64, alpha: f64, kappa: f64) -> VonMisesParams {
        VonMisesParams::new(n, delta, alpha, kappa).unwrap()
    }

    fn window(lo: i64, hi: i64, delta: f64) -> AngularWindow {
        AngularWindow::new(lo, hi, delta, 1e-14).unwrap()
    }

    #[test]
    fn shapes_and_hermiticity() {
        let w = window(-4, 6, 0.3);
        let ops = build_operators(&w);
        assert_eq!(ops.l.element(2, 2), C64::new(2.3, 0.0));
        assert_eq!(ops.e.element(1, 2), C64::new(1.0, 0.0));
        assert_eq!(ops.e_dag.element(2, 1), C64::new(1.0, 0.0));
        for a in [0.0, 0.4, -2.2] {
            assert!(ops.s(a).hermiticity_residual() < 1e-15);
            assert!(ops.c(a).hermiticity_residual() < 1e-15);
        }
        let s0 = ops.s(0.0);
        let direct = ops.e_dag.sub(&ops.e).unwrap().scaled(1.0 / (2.0 * I));
        assert!(s0.interior_distance(&direct, 0).unwrap() < 1e-16);
    }

    #[test]
    fn euclidean_commutators() {
        let w = window(-6, 6, 0.45);
        let ops = build_operators(&w);
        let el = ops.e.commutator(&ops.l).unwrap();
        assert!(el.interior_distance(&ops.e, 1).unwrap() < 1e-13);
        for a in [0.0, 1.1, -2.7] {
            let sl = ops.s(a).commutator(&ops.l).unwrap();
            let ic = ops.c(a).scaled(I);
            assert!(sl.interior_distance(&ic, 1).unwrap() < 1e-13);
        }
    }

    #[test]
    fn tracked_leakage() {
        let w = window(-3, 3, 0.0);
        let e = lowering(&w);
        let edge = TruncatedKet::basis(w, -3).unwrap();
        let (_, leak) = e.apply_tracked(&edge).unwrap();
        assert!((leak - 1.0).abs() < 1e-15);
        let inner = TruncatedKet::basis(w, 0).unwrap();
        let (out, leak) = e.apply_tracked(&inner).unwrap();
        assert_eq!(leak, 0.0);
        assert_eq!(out.coeff(-1), C64::new(1.0, 0.0));
    }

    #[test]
    fn eigenstate_moments() {
        let w = window(-2, 2, 0.25);
        let ket = TruncatedKet::basis(w, 1).unwrap();
        let r = moments(&ket, 2).unwrap();
        assert_eq!(r.var_l, 0.0);
        assert!((r.mean_l - 1.25).abs() < 1e-15);
        assert!(r.omega2.is_none());
        assert!(r.uncertainty_product.is_none());
    }

    #[test]
    fn von_mises_moments_and_saturation() {
        for &(n, d, a, k) in &[(0, 0.0, 0.0, 1.292), (3, 0.2, 1.0, 0.4), (-2, 0.7, -2.0, 5.0), (1, 0.0, 3.1, 14.0)] {
            let p = vm(n, d, a, k);
            let ket = von_mises_auto(&p, 1e-15).unwrap();
            let r = moments(&ket, 3).unwrap();
            assert!((r.mean_l - p.mean_l()).abs() < 1e-11);
            assert!((r.var_l - var_l_closed(k)).abs() < 1e-11);
            for (i, e) in r.e_moments.iter().enumerate() {
                let l = i as i64 + 1;
                let expect = C64::from_polar(bessel_ratio(l, 0, 2.0 * k).unwrap(), l as f64 * p.alpha());
                assert!((e - expect).norm() < 1e-11);
            }
            assert!((r.uncertainty_product.unwrap() - 0.25).abs() < 1e-10);
            assert!(anticommutator_mean(&ket, r.alpha_star).abs() < 1e-11);
        }
    }

    #[test]
    fn closed_forms_are_dual() {
        for k in [0.05, 0.5, 1.292, 3.0, 20.0, 400.0] {
            assert!((var_l_closed(k) * omega2_closed(k).unwrap() - 0.25).abs() < 1e-14);
        }
        assert!(omega2_closed(0.0).is_none());
    }

    #[test]
    fn action_on_von_mises_states() {
        let p = vm(1, 0.3, 0.5, 1.4);
        let w = window(-40, 40, 0.3);
        let ket = von_mises_ket(&p, &w).unwrap();
        let phi = 0.9;
        let rotated = rotation(&w, phi).apply(&ket).unwrap();
        let target = von_mises_ket(&p.with_alpha(0.5 + phi), &w)
            .unwrap()
            .scaled(C64::from_polar(1.0, -p.mean_l() * phi));
        let diff: f64 = rotated.coeffs().iter().zip(target.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-11);
        let shifted = raising(&w).apply(&ket).unwrap();
        let target = von_mises_ket(&p.with_n(2), &w).unwrap();
        let diff: f64 = shifted.coeffs().iter().zip(target.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-11);
    }

    #[test]
    fn displacement_basics() {
        let w = window(-10, 10, 0.0);
        let id = displacement(0, 0.0, &w);
        assert!(id.interior_distance(&OperatorMatrix::identity(w), 0).unwrap() == 0.0);
        let d = displacement(3, 0.7, &w);
        let dd = d.adjoint().matmul(&d).unwrap();
        assert!(dd.interior_distance(&OperatorMatrix::identity(w), 3).unwrap() < 1e-13);
        // E^{l} e^{iLφ} = e^{ilφ/2} D^{-1}(l, φ)
        let l = 2;
        let phi = -1.3;
        let lhs = lowering(&w).pow(l as u32).matmul(&rotation(&w, -phi)).unwrap();
        let rhs = displacement(-l, -phi, &w).scaled(C64::from_polar(1.0, l as f64 * phi / 2.0));
        assert!(lhs.interior_distance(&rhs, 2).unwrap() < 1e-13);
    }

    #[test]
    fn displacement_moves_von_mises_state() {
        let p = vm(0, 0.0, 0.4, 1.7);
        let ket = von_mises_auto(&p, 1e-15).unwrap();
        let w = ket.window().expanded(6);
        let moved = displacement(3, 0.8, &w).apply(&ket).unwrap();
        let target = von_mises_ket(&p.with_n(3).with_alpha(0.4 + 0.8), &w).unwrap();
        assert!((target.inner(&moved).unwrap().norm() - 1.0).abs() < 1e-11);
        let structured = displace(&ket, 3, 0.8);
        assert!((structured.inner(&moved).unwrap().norm() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn generating_function_paths() {
        let p = vm(2, 0.35, -0.6, 2.0);
        let ket = von_mises_auto(&p, 1e-16).unwrap();
        assert!((generating_function(&p, 0, 0.0) - 1.0).norm() < 1e-15);
        let g1 = generating_function(&p, 1, 0.0);
        assert!((g1 - C64::from_polar(bessel_ratio(1, 0, 4.0).unwrap(), -0.6)).norm() < 1e-14);
        for &(l, phi) in &[(2, 0.8), (-1, 2.0), (3, -3.0), (0, 1.0)] {
            let a = generating_function(&p, l, phi);
            let b = generating_function_numeric(&ket, l, phi);
            assert!((a - b).norm() < 1e-11, "l={l} phi={phi}");
        }
    }

    #[test]
    fn recurrence_known_values() {
        let p = vm(4, 0.2, 0.9, 1.6);
        let k2 = 3.2;
        assert!((joint_moment_recurrence(&p, 0, 1).unwrap() - 4.2).norm() < 1e-12);
        let var = central_joint_moment(&p, 0, 2).unwrap();
        assert!((var.re - var_l_closed(1.6)).abs() < 1e-12);
        let r2 = bessel_ratio(2, 0, k2).unwrap();
        let r1 = bessel_ratio(1, 0, k2).unwrap();
        // E^{+2} and E^{-2} against ΔL and (ΔL)²
        let plus = central_joint_moment(&p, -2, 1).unwrap();
        assert!((plus - C64::from_polar(r2, -1.8)).norm() < 1e-10);
        let minus = central_joint_moment(&p, 2, 1).unwrap();
        assert!((minus + C64::from_polar(r2, 1.8)).norm() < 1e-10);
        let sq = 0.5 * (r2 + 1.6 * r1);
        assert!((central_joint_moment(&p, -2, 2).unwrap() - C64::from_polar(sq, -1.8)).norm() < 1e-10);
        assert!((central_joint_moment(&p, 2, 2).unwrap() - C64::from_polar(sq, 1.8)).norm() < 1e-10);
        assert!(joint_moment_recurrence(&p, 0, 5).is_err());
    }

    #[test]
    fn recurrence_matches_coefficients() {
        let p = vm(1, 0.5, 0.3, 1.1);
        let ket = von_mises_auto(&p, 1e-16).unwrap();
        for l in -3..=3 {
            for n in 0..=4 {
                let a = joint_moment_recurrence(&p, l, n).unwrap();
                let b = joint_moment_numeric(&ket, l, n);
                assert!((a - b).norm() < 1e-10 * (1.0 + b.norm()), "l={l} N={n}");
            }
        }
    }
}
