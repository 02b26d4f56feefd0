//! States in a truncated angular-momentum eigenbasis `{|l+δ⟩}`.
//!
//! The fractional part `δ` lives on the [`AngularWindow`]; coefficient vectors
//! are indexed by the integer label `l` only.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special_fn::{bessel_i_scaled, bessel_i_scaled_seq, bessel_quotient};

/// Default truncation tolerance for von Mises kets.
pub const DEFAULT_TAIL_TOL: f64 = 1e-15;

/// Reduce an angle into `[-π, π)`.
///
/// The winding number is rounded half-to-even; a result landing exactly on `π`
/// is mapped to `-π`.
pub fn reduce_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let w = (a / two_pi).round_ties_even();
    let mut r = a - two_pi * w;
    if r >= PI {
        r -= two_pi;
    }
    if r < -PI {
        r += two_pi;
    }
    r
}

/// Uniform grid of `size` points on `[-π, π)`.
pub fn phi_grid(size: usize) -> Vec<f64> {
    (0..size).map(|j| -PI + 2.0 * PI * j as f64 / size as f64).collect()
}

/// Finite label range `[l_min, l_max]` of retained eigenstates `|l+δ⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularWindow {
    l_min: i64,
    l_max: i64,
    delta: f64,
    tail_tol: f64,
}

impl AngularWindow {
    pub fn new(l_min: i64, l_max: i64, delta: f64, tail_tol: f64) -> Result<Self> {
        if l_min > l_max {
            return Err(Error::InvalidParameter(format!("empty window [{l_min}, {l_max}]")));
        }
        check_delta(delta)?;
        if !(tail_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tail_tol must be positive, got {tail_tol}")));
        }
        Ok(AngularWindow { l_min, l_max, delta, tail_tol })
    }

    /// Window `[center - half_width, center + half_width]` with the default tolerance.
    pub fn centered(center: i64, half_width: usize, delta: f64) -> Result<Self> {
        let w = half_width as i64;
        Self::new(center - w, center + w, delta, DEFAULT_TAIL_TOL)
    }

    pub fn l_min(&self) -> i64 {
        self.l_min
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn dim(&self) -> usize {
        (self.l_max - self.l_min + 1) as usize
    }

    pub fn half_width(&self) -> usize {
        (self.dim() - 1) / 2
    }

    pub fn labels(&self) -> RangeInclusive<i64> {
        self.l_min..=self.l_max
    }

    pub fn contains(&self, l: i64) -> bool {
        l >= self.l_min && l <= self.l_max
    }

    pub fn index_of(&self, l: i64) -> Option<usize> {
        self.contains(l).then(|| (l - self.l_min) as usize)
    }

    pub fn label(&self, index: usize) -> i64 {
        self.l_min + index as i64
    }

    /// Eigenvalue `l + δ` of `L` for label `l`.
    pub fn eigenvalue(&self, l: i64) -> f64 {
        l as f64 + self.delta
    }

    pub fn expanded(&self, by: usize) -> Self {
        let by = by as i64;
        AngularWindow { l_min: self.l_min - by, l_max: self.l_max + by, ..*self }
    }

    pub fn with_tail_tol(&self, tail_tol: f64) -> Result<Self> {
        Self::new(self.l_min, self.l_max, self.delta, tail_tol)
    }

    /// Smallest window holding both; the fractional parts must agree.
    pub fn union(&self, other: &AngularWindow) -> Result<Self> {
        if self.delta != other.delta {
            return Err(Error::Mismatch(format!(
                "fractional parts differ: {} vs {}",
                self.delta, other.delta
            )));
        }
        Ok(AngularWindow {
            l_min: self.l_min.min(other.l_min),
            l_max: self.l_max.max(other.l_max),
            delta: self.delta,
            tail_tol: self.tail_tol.min(other.tail_tol),
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("fractional part must lie in [0, 1), got {delta}")));
    }
    Ok(())
}

/// Label of a von Mises state `|n+δ, α⟩` with spread `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VonMisesParams {
    n: i64,
    delta: f64,
    alpha: f64,
    kappa: f64,
}

impl VonMisesParams {
    pub fn new(n: i64, delta: f64, alpha: f64, kappa: f64) -> Result<Self> {
        check_delta(delta)?;
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidParameter(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        Ok(VonMisesParams { n, delta, alpha: reduce_angle(alpha), kappa })
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Mean angular momentum `n + δ`.
    pub fn mean_l(&self) -> f64 {
        self.n as f64 + self.delta
    }

    pub fn with_n(&self, n: i64) -> Self {
        VonMisesParams { n, ..*self }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        VonMisesParams { alpha: reduce_angle(alpha), ..*self }
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(VonMisesParams { delta, ..*self })
    }
}

/// Coefficient `⟨l+δ|n+δ, α⟩ = e^{i(n-l)α} I_{n-l}(κ) / √I_0(2κ)`.
pub fn von_mises_coefficient(params: &VonMisesParams, l: i64) -> C64 {
    let m = params.n - l;
    let kappa = params.kappa;
    // e^{-κ} I_m(κ) / √(e^{-2κ} I_0(2κ)) equals the unscaled ratio
    let mag = bessel_i_scaled(m, kappa) / bessel_i_scaled(0, 2.0 * kappa).sqrt();
    C64::from_polar(mag, m as f64 * params.alpha)
}

/// Weights `p_m = I_m(κ)² / I_0(2κ)` for `m = 0..` until negligible.
fn bessel_weights(kappa: f64) -> Vec<f64> {
    let norm = bessel_i_scaled(0, 2.0 * kappa);
    let mut len = 64usize;
    loop {
        let seq = bessel_i_scaled_seq(len, kappa);
        let w: Vec<f64> = seq.iter().map(|v| v * v / norm).collect();
        let last = *w.last().unwrap();
        if last < 1e-40 || last == 0.0 {
            return w;
        }
        len *= 2;
    }
}

/// Weight of the von Mises distribution over `|m|` discarded outside
/// `m ∈ [lo, hi]` (offsets `n - l`).
fn discarded_weight(kappa: f64, lo: i64, hi: i64) -> f64 {
    let w = bessel_weights(kappa);
    let weight = |m: i64| w.get(m.unsigned_abs() as usize).copied().unwrap_or(0.0);
    let top = w.len() as i64;
    let mut tail = 0.0;
    // sum smallest terms first
    for m in (hi + 1..=top.max(hi)).rev() {
        tail += weight(m);
    }
    for m in (-top.max(-lo)..lo).rev().collect::<Vec<_>>().into_iter().rev() {
        tail += weight(m);
    }
    tail
}

/// Smallest symmetric window around `n` whose discarded von Mises weight is
/// below `tail_tol`.
pub fn choose_window(params: &VonMisesParams, tail_tol: f64) -> Result<AngularWindow> {
    if !(tail_tol > 0.0 && tail_tol <= 1e-6) {
        return Err(Error::InvalidParameter(format!("tail_tol must lie in (0, 1e-6], got {tail_tol}")));
    }
    let w = bessel_weights(params.kappa);
    // tails[k] = Σ_{|m| > k} p_m
    let mut tails = vec![0.0; w.len()];
    let mut acc = 0.0;
    for k in (0..w.len()).rev() {
        tails[k] = acc;
        acc += 2.0 * w[k];
    }
    let half = tails.iter().position(|&t| t <= tail_tol).unwrap_or(w.len() - 1);
    AngularWindow::new(params.n - half as i64, params.n + half as i64, params.delta, tail_tol)
}

/// Complex amplitudes over an [`AngularWindow`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedKet {
    window: AngularWindow,
    coeffs: Vec<C64>,
    tail: f64,
}

impl TruncatedKet {
    /// Wrap raw coefficients without normalising them.
    pub fn new(window: AngularWindow, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != window.dim() {
            return Err(Error::InvalidParameter(format!(
                "coefficient count {} does not match window dimension {}",
                coeffs.len(),
                window.dim()
            )));
        }
        Ok(TruncatedKet { window, coeffs, tail: 0.0 })
    }

    /// Unit-normalised ket from arbitrary coefficients.
    pub fn from_coeffs(window: AngularWindow, coeffs: Vec<C64>) -> Result<Self> {
        Self::new(window, coeffs)?.normalized()
    }

    /// The eigenstate `|l+δ⟩`.
    pub fn basis(window: AngularWindow, l: i64) -> Result<Self> {
        let idx = window
            .index_of(l)
            .ok_or_else(|| Error::InvalidParameter(format!("label {l} outside window")))?;
        let mut coeffs = vec![C64::new(0.0, 0.0); window.dim()];
        coeffs[idx] = C64::new(1.0, 0.0);
        Self::new(window, coeffs)
    }

    pub fn window(&self) -> &AngularWindow {
        &self.window
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Weight analytically discarded by the truncation.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn delta(&self) -> f64 {
        self.window.delta
    }

    /// Amplitude at label `l`; zero outside the window.
    pub fn coeff(&self, l: i64) -> C64 {
        self.window.index_of(l).map(|i| self.coeffs[i]).unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalise a zero or non-finite vector".into()));
        }
        self.coeffs.iter_mut().for_each(|c| *c /= n);
        Ok(self)
    }

    pub fn scaled(mut self, factor: C64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
        self
    }

    /// `⟨self|other⟩`, summed over the common labels.
    pub fn inner(&self, other: &TruncatedKet) -> Result<C64> {
        if self.window.delta != other.window.delta {
            return Err(Error::Mismatch(format!(
                "fractional parts differ: {} vs {}",
                self.window.delta, other.window.delta
            )));
        }
        let lo = self.window.l_min.max(other.window.l_min);
        let hi = self.window.l_max.min(other.window.l_max);
        Ok((lo..=hi).map(|l| self.coeff(l).conj() * other.coeff(l)).sum())
    }

    /// Same state on a window grown by `by` labels on each side.
    pub fn padded(&self, by: usize) -> Self {
        let window = self.window.expanded(by);
        let mut coeffs = vec![C64::default(); by];
        coeffs.extend_from_slice(&self.coeffs);
        coeffs.extend(std::iter::repeat(C64::default()).take(by));
        TruncatedKet { window, coeffs, tail: self.tail }
    }

    /// Same state on a containing window.
    pub fn embed(&self, window: AngularWindow) -> Result<Self> {
        if window.delta != self.window.delta {
            return Err(Error::Mismatch("fractional parts differ".into()));
        }
        if window.l_min > self.window.l_min || window.l_max < self.window.l_max {
            return Err(Error::InvalidParameter("target window does not contain the ket".into()));
        }
        let coeffs = window.labels().map(|l| self.coeff(l)).collect();
        Ok(TruncatedKet { window, coeffs, tail: self.tail })
    }

    /// Weight held on labels outside `[lo, hi]`.
    pub fn weight_outside(&self, lo: i64, hi: i64) -> f64 {
        self.window
            .labels()
            .zip(&self.coeffs)
            .filter(|(l, _)| *l < lo || *l > hi)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }
}

/// JSON form `{l_min, l_max, delta, coeffs: [[re, im], ...]}`.
#[derive(Serialize, Deserialize)]
struct KetRecord {
    l_min: i64,
    l_max: i64,
    delta: f64,
    coeffs: Vec<[f64; 2]>,
}

impl Serialize for TruncatedKet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KetRecord {
            l_min: self.window.l_min,
            l_max: self.window.l_max,
            delta: self.window.delta,
            coeffs: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TruncatedKet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = KetRecord::deserialize(d)?;
        let window = AngularWindow::new(rec.l_min, rec.l_max, rec.delta, DEFAULT_TAIL_TOL)
            .map_err(serde::de::Error::custom)?;
        let coeffs = rec.coeffs.iter().map(|[re, im]| C64::new(*re, *im)).collect();
        TruncatedKet::new(window, coeffs).map_err(serde::de::Error::custom)
    }
}

/// The von Mises ket `|n+δ, α⟩` truncated to `window` and renormalised.
///
/// Fails when the weight discarded by the window exceeds its tolerance.
pub fn von_mises_ket(params: &VonMisesParams, window: &AngularWindow) -> Result<TruncatedKet> {
    if window.delta != params.delta {
        return Err(Error::Mismatch(format!(
            "window fractional part {} differs from state's {}",
            window.delta, params.delta
        )));
    }
    let tail = discarded_weight(params.kappa, params.n - window.l_max, params.n - window.l_min);
    if tail > window.tail_tol {
        return Err(Error::WindowTooNarrow { tail, tol: window.tail_tol });
    }
    let coeffs = window.labels().map(|l| von_mises_coefficient(params, l)).collect();
    let mut ket = TruncatedKet::new(*window, coeffs)?.normalized()?;
    ket.tail = tail;
    Ok(ket)
}

/// `|n+δ, α⟩` on its own automatically chosen window.
pub fn von_mises_auto(params: &VonMisesParams, tail_tol: f64) -> Result<TruncatedKet> {
    von_mises_ket(params, &choose_window(params, tail_tol)?)
}

/// Closed-form overlap `⟨b|a⟩` of two von Mises states sharing `κ` and `δ`:
/// `e^{i(n-n')(α+α')/2} I_{n-n'}(2κ cos((α-α')/2)) / I_0(2κ)`.
pub fn overlap(a: &VonMisesParams, b: &VonMisesParams) -> Result<C64> {
    if a.delta != b.delta {
        return Err(Error::Mismatch(format!("fractional parts differ: {} vs {}", a.delta, b.delta)));
    }
    if a.kappa != b.kappa {
        return Err(Error::Mismatch(format!("spread parameters differ: {} vs {}", a.kappa, b.kappa)));
    }
    let dn = a.n - b.n;
    let arg = 2.0 * a.kappa * (0.5 * (a.alpha - b.alpha)).cos();
    let mag = bessel_quotient(dn, arg, 0, 2.0 * a.kappa).unwrap_or(0.0);
    Ok(C64::from_polar(mag, dn as f64 * 0.5 * (a.alpha + b.alpha)))
}

/// `ψ(φ) = Σ_l c_l e^{i(l+δ)φ} / √(2π)` at a single angle.
pub fn wavefunction_at(ket: &TruncatedKet, phi: f64) -> C64 {
    let w = ket.window();
    let s: C64 = w
        .labels()
        .zip(ket.coeffs())
        .map(|(l, c)| c * C64::from_polar(1.0, w.eigenvalue(l) * phi))
        .sum();
    s / (2.0 * PI).sqrt()
}

/// Angle representation sampled on the uniform grid of `grid_size` points.
pub fn angle_wavefunction(ket: &TruncatedKet, grid_size: usize) -> Result<Vec<C64>> {
    if grid_size < ket.window().dim() {
        return Err(Error::InvalidParameter(format!(
            "grid of {grid_size} points cannot resolve a window of {} labels",
            ket.window().dim()
        )));
    }
    Ok(phi_grid(grid_size).into_iter().map(|phi| wavefunction_at(ket, phi)).collect())
}

/// Periodic trapezoid `∫ |ψ|² dφ` from grid samples.
pub fn angle_norm(samples: &[C64]) -> f64 {
    let h = 2.0 * PI / samples.len() as f64;
    samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * h
}

/// Largest deviation from the identity of
/// `Σ_n ∫ dα/2π |n+δ,α⟩⟨n+δ,α|` restricted to `window`, with `n` summed over
/// `center ± n_sum_halfwidth` and `α` on a uniform grid.
pub fn completeness_residual(
    kappa: f64,
    delta: f64,
    window: &AngularWindow,
    n_sum_halfwidth: usize,
    alpha_grid_size: usize,
) -> Result<f64> {
    if alpha_grid_size < 2 * window.dim() {
        return Err(Error::InvalidParameter(format!(
            "alpha grid of {alpha_grid_size} points too coarse for {} labels",
            window.dim()
        )));
    }
    let center = (window.l_min + window.l_max).div_euclid(2);
    let h = n_sum_halfwidth as i64;
    let dim = window.dim();
    let alphas = phi_grid(alpha_grid_size);
    let mut acc = vec![C64::default(); dim * dim];
    let mut col = vec![C64::default(); dim];
    for n in center - h..=center + h {
        for &alpha in &alphas {
            let p = VonMisesParams::new(n, delta, alpha, kappa)?;
            for (i, l) in window.labels().enumerate() {
                col[i] = von_mises_coefficient(&p, l);
            }
            for i in 0..dim {
                for j in 0..dim {
                    acc[i * dim + j] += col[i] * col[j].conj();
                }
            }
        }
    }
    let scale = 1.0 / alpha_grid_size as f64;
    let mut worst = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((acc[i * dim + j] * scale - target).norm());
        }
    }
    Ok(worst)
}
