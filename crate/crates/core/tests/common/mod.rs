#![allow(dead_code)]

use cylspace::{AngularWindow, TruncatedKet, C64};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, d: f64) -> Dd {
        let q1 = self.hi / d;
        let (p, e) = two_prod(q1, d);
        let r = (self.hi - p - e + self.lo) / d;
        let (hi, lo) = two_sum(q1, r);
        Dd { hi, lo }
    }
}

/// `I_n(z)` from the power series `Σ_k (z/2)^{2k+n} / (k! (k+n)!)` in
/// double-double arithmetic. At least 60 terms are summed.
pub fn bessel_series(n: i64, z: f64) -> f64 {
    let n = n.unsigned_abs();
    let half = Dd::new(z).div_f64(2.0);
    let mut term = Dd::new(1.0);
    for k in 1..=n {
        term = term.mul(half).div_f64(k as f64);
    }
    let q = half.mul(half);
    let mut sum = term;
    let mut k = 0u64;
    loop {
        k += 1;
        term = term.mul(q).div_f64((k * (k + n)) as f64);
        sum = sum.add(term);
        if k >= 60 && term.hi.abs() < 1e-34 * sum.hi.abs() {
            break;
        }
    }
    sum.hi + sum.lo
}

/// Dense `⟨ψ|A|ψ⟩` for a matrix given by a closure over labels.
pub fn dense_expectation(ket: &TruncatedKet, a: impl Fn(i64, i64) -> C64) -> C64 {
    let w: AngularWindow = *ket.window();
    let mut acc = C64::default();
    for l in w.labels() {
        for lp in w.labels() {
            acc += ket.coeff(l).conj() * a(l, lp) * ket.coeff(lp);
        }
    }
    acc
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
