#![allow(dead_code)]

use std::f64::consts::PI;
use std::time::Duration;

use cylspace::angular_state::{phi_grid, von_mises_auto};
use cylspace::{VonMisesParams, C64};

/// Print one verdict line and return whether it passed.
pub fn verdict(id: u32, title: &str, ok: bool, detail: String, elapsed: Duration) -> bool {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id:>2} {title}: {detail} [{:.2} s]", elapsed.as_secs_f64());
    ok
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_cylspace"))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[derive(Clone, Copy)]
struct Dd(f64, f64);

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let (hi, lo) = two_sum(s, e + self.1 + o.1);
        Dd(hi, lo)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p) + self.0 * o.1 + self.1 * o.0;
        let (hi, lo) = two_sum(p, e);
        Dd(hi, lo)
    }

    fn div(self, d: f64) -> Dd {
        let q = self.0 / d;
        let p = q * d;
        let r = (self.0 - p - q.mul_add(d, -p) + self.1) / d;
        let (hi, lo) = two_sum(q, r);
        Dd(hi, lo)
    }
}

/// Power series of `I_n(z)` in double-double arithmetic, at least 60 terms.
pub fn bessel_series(n: i64, z: f64) -> f64 {
    let n = n.unsigned_abs();
    let half = Dd(z, 0.0).div(2.0);
    let mut term = Dd(1.0, 0.0);
    for k in 1..=n {
        term = term.mul(half).div(k as f64);
    }
    let q = half.mul(half);
    let mut sum = term;
    let mut k = 0u64;
    loop {
        k += 1;
        term = term.mul(q).div((k * (k + n)) as f64);
        sum = sum.add(term);
        if k >= 60 && term.0.abs() < 1e-34 * sum.0.abs() {
            return sum.0 + sum.1;
        }
    }
}

/// `Σ_N ∫dΦ (N - N̄)² (sin Φ - S̄)² |⟨N, Φ|ψ_s ψ_a⟩|²` on a 2048-point grid,
/// for von Mises signal and ancilla centred at zero.
pub fn she_heffner_outcome_integral(kappa_s: f64, kappa_a: f64) -> f64 {
    let s = von_mises_auto(&VonMisesParams::new(0, 0.0, 0.0, kappa_s).unwrap(), 1e-16).unwrap();
    let a = von_mises_auto(&VonMisesParams::new(0, 0.0, 0.0, kappa_a).unwrap(), 1e-16).unwrap();
    let (ws, wa) = (*s.window(), *a.window());
    let grid = phi_grid(2048);
    let h = 2.0 * PI / grid.len() as f64;
    let mut cells = Vec::new();
    for n in ws.l_min() + wa.l_min()..=ws.l_max() + wa.l_max() {
        for &phi in &grid {
            let amp: C64 =
                wa.labels().map(|m| C64::from_polar(1.0, -(m as f64) * phi) * s.coeff(n + m) * a.coeff(m)).sum();
            cells.push((n as f64, phi.sin(), amp.norm_sqr() * h / (2.0 * PI)));
        }
    }
    let n_bar: f64 = cells.iter().map(|c| c.0 * c.2).sum();
    let s_bar: f64 = cells.iter().map(|c| c.1 * c.2).sum();
    cells.iter().map(|(n, s, p)| (n - n_bar).powi(2) * (s - s_bar).powi(2) * p).sum()
}
