//! Invariant suite: algebraic, special-function and phase-space identities
//! evaluated on fixed inputs, each reported as a residual against a tolerance.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::angular_state::{completeness_residual, von_mises_ket, AngularWindow, VonMisesParams};
use crate::epr_teleport::epr_completeness_residual;
use crate::error::Result;
use crate::operators::{
    angular_momentum, cosine, displacement, lowering, moments, raising, sine, OperatorMatrix,
};
use crate::phase_space::{
    cyl_fourier, cyl_fourier_char, epr_projector_transform, kron, overlap_grid, overlap_kernel, projector_transform,
    q_function, reconstruct_from_wigner_char, wigner_char, wigner_function, DensityMatrix, PhaseTable,
};
use crate::special_fn::{bessel_i, generating_function_check, verify_addition_theorem};

/// One named invariant.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: Option<String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.residual <= self.tolerance
    }
}

fn check(name: &'static str, tolerance: f64, f: impl FnOnce() -> Result<f64>) -> Check {
    match f() {
        Ok(residual) => Check { name, residual, tolerance, detail: None },
        Err(e) => Check { name, residual: f64::NAN, tolerance, detail: Some(e.to_string()) },
    }
}

fn max_abs(a: &OperatorMatrix, b: &OperatorMatrix, margin: usize) -> Result<f64> {
    a.interior_distance(b, margin)
}

fn random_mixture(rng: &mut ChaCha8Rng, window: AngularWindow) -> Result<DensityMatrix> {
    let count = rng.gen_range(1..=3);
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let comps = raw
        .iter()
        .map(|w| {
            let p = VonMisesParams::new(rng.gen_range(-2..=2), 0.0, rng.gen_range(-PI..PI), rng.gen_range(0.3..1.5))?;
            Ok((w / total, von_mises_ket(&p, &window)?))
        })
        .collect::<Result<Vec<_>>>()?;
    DensityMatrix::from_mixture(&comps, window)
}

/// Run every invariant. Inputs are fixed so the report is reproducible.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    let w = AngularWindow::centered(0, 20, 0.25).expect("window");

    out.push(check("commutator [E, L] = E", 1e-12, || {
        let (e, l) = (lowering(&w), angular_momentum(&w));
        max_abs(&e.commutator(&l)?, &e, 1)
    }));
    out.push(check("commutator [L, E^dag] = E^dag", 1e-12, || {
        let (ed, l) = (raising(&w), angular_momentum(&w));
        max_abs(&l.commutator(&ed)?, &ed, 1)
    }));
    out.push(check("commutator [E, E^dag] = 0 in the interior", 1e-15, || {
        let (e, ed) = (lowering(&w), raising(&w));
        max_abs(&e.commutator(&ed)?, &OperatorMatrix::identity(w).scaled(C64::default()), 1)
    }));
    out.push(check("hermiticity of L, S_alpha, C_alpha", 1e-15, || {
        let mut worst = angular_momentum(&w).hermiticity_residual();
        for a in [0.0, 0.7, -2.1, PI] {
            worst = worst.max(sine(&w, a).hermiticity_residual()).max(cosine(&w, a).hermiticity_residual());
        }
        Ok(worst)
    }));
    out.push(check("displacement unitarity in the interior", 1e-14, || {
        let d = displacement(3, 1.1, &w);
        max_abs(&d.adjoint().matmul(&d)?, &OperatorMatrix::identity(w), 3)
    }));

    out.push(check("Bessel addition theorem (relative)", 1e-13, || {
        let win = AngularWindow::centered(0, 80, 0.0)?;
        let mut worst = 0.0f64;
        for kappa in [0.3, 1.5, 4.0] {
            let scale = bessel_i(0, 2.0 * kappa)?.unscaled();
            for r in [-3, 0, 2, 5] {
                for phi in [0.4, 2.9, -1.7] {
                    worst = worst.max(verify_addition_theorem(kappa, r, phi, &win) / scale);
                }
            }
        }
        Ok(worst)
    }));
    out.push(check("Bessel generating function (relative)", 1e-13, || {
        let win = AngularWindow::centered(0, 80, 0.0)?;
        let mut worst = 0.0f64;
        for z in [0.5, 3.0, 10.0] {
            for phi in [0.0, 1.2, 3.0] {
                worst = worst.max(generating_function_check(z, phi, &win) / z.exp());
            }
        }
        Ok(worst)
    }));
    out.push(check("Bessel three-term recurrence (relative)", 1e-13, || {
        let mut worst = 0.0f64;
        for z in [0.1, 2.5, 17.0, 60.0] {
            for n in 1..30 {
                let (a, b, c) =
                    (bessel_i(n - 1, z)?.unscaled(), bessel_i(n, z)?.unscaled(), bessel_i(n + 1, z)?.unscaled());
                if a > 0.0 {
                    worst = worst.max((a - c - 2.0 * n as f64 / z * b).abs() / a);
                }
            }
        }
        Ok(worst)
    }));

    out.push(check("minimum-uncertainty saturation var_L * omega^2 = 1/4", 1e-10, || {
        let mut worst = 0.0f64;
        for kappa in [0.05, 0.4, 1.292, 5.0, 20.0] {
            let p = VonMisesParams::new(1, 0.3, 0.6, kappa)?;
            let ket = crate::angular_state::von_mises_auto(&p, 1e-16)?;
            let r = moments(&ket, 2)?;
            let product = r.uncertainty_product.unwrap_or(f64::NAN);
            worst = worst.max((product - 0.25).abs());
        }
        Ok(worst)
    }));

    out.push(check("von Mises completeness residual", 1e-10, || {
        completeness_residual(1.0, 0.3, &AngularWindow::centered(0, 6, 0.3)?, 40, 32)
    }));
    out.push(check("EPR completeness residual", 1e-12, || {
        epr_completeness_residual(&AngularWindow::centered(0, 3, 0.2)?, &AngularWindow::centered(1, 3, 0.7)?, 32)
    }));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let table = PhaseTable::integer(-4, 4, 32, |_, _| C64::default()).expect("table");
    let table = {
        let mut vals = table.values().clone();
        for ((i, _), v) in vals.indexed_iter_mut() {
            if i % 2 == 0 {
                *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        PhaseTable::new(table.nu2_min(), table.nu2_max(), 32, vals).expect("table")
    };
    out.push(check("Fourier self-inversion on periodic tables", 1e-10, || {
        let c = cyl_fourier(&table, -16, 15, 32)?;
        let back = cyl_fourier_char(&c, -8, 8, 32)?;
        back.max_distance(&table)
    }));
    out.push(check("Parseval pairing (relative)", 1e-10, || {
        let c = cyl_fourier(&table, -16, 15, 32)?;
        let rhs = table.pairing(&table)?;
        Ok((c.pairing(&c)? - rhs).norm() / rhs.norm())
    }));

    let win = AngularWindow::new(-14, 14, 0.0, 1e-12).expect("window");
    let rho = random_mixture(&mut rng, win);
    out.push(check("Fourier self-inversion on the half-integer lattice", 1e-10, || {
        let rho = rho.clone()?;
        let wf = wigner_function(&rho, 64)?;
        let cw = wigner_char(&rho, -28, 28, 64)?;
        cyl_fourier(&wf, -28, 28, 64)?.max_distance(&cw)
    }));
    out.push(check("Hermitian symmetry of C_W", 1e-12, || {
        Ok(wigner_char(&rho.clone()?, -10, 10, 32)?.hermitian_residual())
    }));
    out.push(check("rho round trip through C_W (smeared displacement completeness)", 1e-9, || {
        let rho = rho.clone()?;
        let cw = wigner_char(&rho, -28, 28, 64)?;
        Ok(reconstruct_from_wigner_char(&cw, win)?.distance(&rho))
    }));
    out.push(check("Q normalization and nonnegativity", 1e-8, || {
        let q = q_function(&rho.clone()?, 1.1, -45, 45, 64)?;
        Ok((q.total() - 1.0).abs().max(-q.min()))
    }));
    out.push(check("C_Q = o C_W", 1e-9, || {
        let rho = rho.clone()?;
        let q = q_function(&rho, 1.1, -45, 45, 64)?;
        let cq = cyl_fourier(&q.to_table(), -28, 28, 64)?;
        let rhs = wigner_char(&rho, -28, 28, 64)?.multiply(&overlap_grid(1.1, -28, 28, 64)?)?;
        cq.max_distance(&rhs)
    }));

    out.push(check("projector transform F|n,a><n,a| = o D", 1e-9, || {
        let win = AngularWindow::centered(0, 5, 0.0)?;
        let mut worst = 0.0f64;
        for (l, phi, kappa) in [(0, 0.3, 0.7), (2, 0.7, 0.9), (-3, -2.5, 1.6)] {
            let f = projector_transform(kappa, l, phi, &win, (-50, 50), 32)?;
            let expect = displacement(l, phi, &win).scaled(C64::new(overlap_kernel(l, phi, kappa), 0.0));
            worst = worst.max(f.interior_distance(&expect, 0)?);
        }
        Ok(worst)
    }));
    out.push(check("two-mode projector transform = D_s(l) D_a(-l)", 1e-9, || {
        let (ws, wa) = (AngularWindow::centered(0, 3, 0.0)?, AngularWindow::centered(1, 3, 0.0)?);
        let mut worst = 0.0f64;
        for (l, phi) in [(0, 0.9), (-1, 1.3), (2, -2.2)] {
            let two = epr_projector_transform(l, phi, &ws, &wa, 32)?;
            let expect = kron(displacement(l, phi, &ws).entries(), displacement(-l, phi, &wa).entries());
            worst = worst.max((&two - &expect).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        Ok(worst)
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in run_all() {
            assert!(c.passed(), "{} residual {:e} tol {:e} {:?}", c.name, c.residual, c.tolerance, c.detail);
        }
    }
}
