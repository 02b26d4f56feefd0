//! Modified Bessel functions of the first kind and integer order, `I_n(z)`.
//!
//! Two evaluation routes are used:
//!
//! * the ascending power series `Σ_k (z/2)^{n+2k} / (k! (n+k)!)` when `z ≤ 20`
//!   or `z ≤ 2n`. All terms are positive, so the sum is accurate to a few ulps;
//!   a mantissa/exponent accumulator keeps very large or very small partial
//!   results representable.
//! * Miller's backward recurrence `I_{k-1} = I_{k+1} + (2k/z) I_k` for the
//!   remaining large-argument region, normalised with the generating-function
//!   identity `I_0(z) + 2 Σ_{k≥1} I_k(z) = e^z`. This yields `e^{-z} I_n(z)`
//!   directly and never overflows.
//!
//! Above `z = 50` values are handed out in the scaled form `e^{-|z|} I_n(z)`.

use num_complex::Complex64 as C64;

use crate::angular_state::AngularWindow;
use crate::error::{Error, Result};

/// Arguments above this are reported in scaled form.
pub const SCALED_THRESHOLD: f64 = 50.0;

/// Floor used in relative-error contracts to avoid `0/0`.
pub const TINY: f64 = 1e-300;

const SERIES_Z_MAX: f64 = 20.0;
const TWO_P500: f64 = 3.273_390_607_896_141_9e150;
const TWO_M500: f64 = 3.054_936_363_499_604_7e-151;

/// A value of `I_n(z)`, possibly carried as `e^{-|z|} I_n(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselValue {
    pub value: f64,
    pub scaled: bool,
    arg: f64,
}

impl BesselValue {
    /// `e^{-|z|} I_n(z)`.
    pub fn scaled_value(&self) -> f64 {
        if self.scaled {
            self.value
        } else {
            self.value * (-self.arg.abs()).exp()
        }
    }

    /// `I_n(z)`; overflows to infinity for very large arguments.
    pub fn unscaled(&self) -> f64 {
        if self.scaled {
            self.value * self.arg.abs().exp()
        } else {
            self.value
        }
    }

    pub fn arg(&self) -> f64 {
        self.arg
    }
}

/// Floating mantissa with a separate binary exponent: `m · 2^e`.
#[derive(Debug, Clone, Copy)]
struct Wide {
    m: f64,
    e: i64,
}

impl Wide {
    fn one() -> Self {
        Wide { m: 1.0, e: 0 }
    }

    fn mul(&mut self, x: f64) {
        self.m *= x;
        self.renormalize();
    }

    fn mul_wide(&mut self, other: Wide) {
        self.m *= other.m;
        self.e += other.e;
        self.renormalize();
    }

    fn renormalize(&mut self) {
        while self.m.abs() > TWO_P500 {
            self.m *= TWO_M500;
            self.e += 500;
        }
        while self.m != 0.0 && self.m.abs() < TWO_M500 {
            self.m *= TWO_P500;
            self.e -= 500;
        }
    }

    fn to_f64(self) -> f64 {
        let mut m = self.m;
        let mut e = self.e;
        while e > 500 {
            m *= TWO_P500;
            e -= 500;
            if m.is_infinite() {
                return m;
            }
        }
        while e < -500 {
            m *= TWO_M500;
            e += 500;
            if m == 0.0 {
                return 0.0;
            }
        }
        m * 2f64.powi(e as i32)
    }

    /// `e^{-z}` for `z ≥ 0` without underflow.
    fn exp_neg(z: f64) -> Self {
        let mut w = Wide::one();
        let mut rest = z;
        let chunk = (-700.0f64).exp();
        while rest > 700.0 {
            w.mul(chunk);
            rest -= 700.0;
        }
        w.mul((-rest).exp());
        w
    }
}

/// Ascending series for `I_n(z)`, `n ≥ 0`, `z > 0`, unscaled.
fn series_wide(n: u64, z: f64) -> Wide {
    let half = 0.5 * z;
    let mut lead = Wide::one();
    for k in 1..=n {
        lead.mul(half / k as f64);
    }
    let q = half * half;
    let nf = n as f64;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut shift = 0i64;
    let mut k = 0.0f64;
    loop {
        k += 1.0;
        term *= q / (k * (nf + k));
        sum += term;
        if sum > TWO_P500 {
            sum *= TWO_M500;
            term *= TWO_M500;
            shift += 500;
        }
        if (term <= sum * 1e-18 && k * (nf + k) > q) || k > 1e7 {
            break;
        }
    }
    lead.mul(sum);
    lead.e += shift;
    lead
}

fn miller_start(n: u64, z: f64) -> u64 {
    n + (10.0 * z.sqrt()).ceil() as u64 + 30
}

/// Backward recurrence for `e^{-z} I_k(z)`, `k = 0..=n_max`, `z > 0`.
fn miller_scaled_seq(n_max: u64, z: f64) -> Vec<f64> {
    let start = miller_start(n_max, z);
    let mut out = vec![0.0; n_max as usize + 1];
    let mut upper = 0.0; // i_{k+1}
    let mut cur = 1e-280; // i_k
    let mut norm = 0.0; // 2 Σ_{j ≥ k+1} i_j
    let mut k = start;
    loop {
        if k <= n_max {
            out[k as usize] = cur;
        }
        if k == 0 {
            norm += cur;
            break;
        }
        norm += 2.0 * cur;
        let lower = upper + (2.0 * k as f64 / z) * cur;
        upper = cur;
        cur = lower;
        k -= 1;
        if cur > 1e250 {
            cur *= 1e-250;
            upper *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

fn use_series(n: u64, z: f64) -> bool {
    z <= SERIES_Z_MAX || z <= 2.0 * n as f64
}

/// `e^{-z} I_n(z)` for `n ≥ 0`, `z ≥ 0`.
fn scaled_nonneg(n: u64, z: f64) -> f64 {
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if use_series(n, z) {
        let mut w = series_wide(n, z);
        w.mul_wide(Wide::exp_neg(z));
        w.to_f64()
    } else {
        miller_scaled_seq(n, z)[n as usize]
    }
}

/// `I_n(z)` for `n ≥ 0`, `0 ≤ z ≤ SCALED_THRESHOLD`.
fn unscaled_nonneg(n: u64, z: f64) -> f64 {
    if z == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if use_series(n, z) {
        series_wide(n, z).to_f64()
    } else {
        miller_scaled_seq(n, z)[n as usize] * z.exp()
    }
}

fn parity_sign(n: i64, z: f64) -> f64 {
    if z < 0.0 && n.rem_euclid(2) == 1 {
        -1.0
    } else {
        1.0
    }
}

/// Modified Bessel function `I_n(z)`.
///
/// Negative arguments are reduced with `I_n(-z) = (-1)^n I_n(z)` and negative
/// orders with `I_{-n} = I_n`. For `|z| > 50` the returned value is scaled by
/// `e^{-|z|}`.
pub fn bessel_i(n: i64, z: f64) -> Result<BesselValue> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("I_n(z) requires finite z, got {z}")));
    }
    let order = n.unsigned_abs();
    let a = z.abs();
    let sign = parity_sign(n, z);
    if a > SCALED_THRESHOLD {
        Ok(BesselValue { value: sign * scaled_nonneg(order, a), scaled: true, arg: z })
    } else {
        Ok(BesselValue { value: sign * unscaled_nonneg(order, a), scaled: false, arg: z })
    }
}

/// `e^{-|z|} I_n(z)`; `NaN` for non-finite `z`.
pub fn bessel_i_scaled(n: i64, z: f64) -> f64 {
    if !z.is_finite() {
        return f64::NAN;
    }
    parity_sign(n, z) * scaled_nonneg(n.unsigned_abs(), z.abs())
}

/// `e^{-z} I_k(z)` for `k = 0..=n_max` and `z ≥ 0`.
pub fn bessel_i_scaled_seq(n_max: usize, z: f64) -> Vec<f64> {
    let z = z.abs();
    if z == 0.0 {
        let mut v = vec![0.0; n_max + 1];
        v[0] = 1.0;
        return v;
    }
    if z <= SERIES_Z_MAX {
        return (0..=n_max as u64).map(|k| scaled_nonneg(k, z)).collect();
    }
    // orders below z/2 come from one shared recurrence
    let split = ((z / 2.0).ceil() as usize).min(n_max + 1);
    let mut out = if split > 0 { miller_scaled_seq(split as u64 - 1, z) } else { Vec::new() };
    out.extend((split as u64..=n_max as u64).map(|k| scaled_nonneg(k, z)));
    out
}

/// `I_n(x) / I_m(y)` evaluated in scaled space.
///
/// Returns `None` when the denominator vanishes.
pub fn bessel_quotient(n: i64, x: f64, m: i64, y: f64) -> Option<f64> {
    let den = bessel_i_scaled(m, y);
    if den == 0.0 {
        return None;
    }
    let num = bessel_i_scaled(n, x);
    if num == 0.0 {
        return Some(0.0);
    }
    Some(num / den * (x.abs() - y.abs()).exp())
}

/// `I_n(z) / I_m(z)`.
pub fn bessel_ratio(n: i64, m: i64, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("I_n(z) requires finite z, got {z}")));
    }
    if n.unsigned_abs() == m.unsigned_abs() {
        return Ok(1.0);
    }
    bessel_quotient(n, z, m, z)
        .ok_or_else(|| Error::DivisionByZero(format!("I_{m}({z}) = 0")))
}

/// Residual of the addition theorem
/// `Σ_m I_m(κ) I_{m+r}(κ) e^{imφ} = e^{-irφ/2} I_r(2κ cos(φ/2))`,
/// with the sum running over the labels of `window`.
pub fn verify_addition_theorem(kappa: f64, r: i64, phi: f64, window: &AngularWindow) -> f64 {
    let lhs: C64 = window
        .labels()
        .map(|m| {
            let a = bessel_i(m, kappa).map(|v| v.unscaled()).unwrap_or(f64::NAN);
            let b = bessel_i(m + r, kappa).map(|v| v.unscaled()).unwrap_or(f64::NAN);
            C64::from_polar(a * b, m as f64 * phi)
        })
        .sum();
    let arg = 2.0 * kappa * (0.5 * phi).cos();
    let rhs_mag = bessel_i(r, arg).map(|v| v.unscaled()).unwrap_or(f64::NAN);
    let rhs = C64::from_polar(1.0, -(r as f64) * phi / 2.0) * rhs_mag;
    (lhs - rhs).norm()
}

/// Residual of the generating function `Σ_m I_m(z) e^{imφ} = e^{z cos φ}`
/// with the sum running over the labels of `window`.
pub fn generating_function_check(z: f64, phi: f64, window: &AngularWindow) -> f64 {
    let lhs: C64 = window
        .labels()
        .map(|m| {
            let v = bessel_i(m, z).map(|v| v.unscaled()).unwrap_or(f64::NAN);
            C64::from_polar(v, m as f64 * phi)
        })
        .sum();
    (lhs - C64::new((z * phi.cos()).exp(), 0.0)).norm()
}
