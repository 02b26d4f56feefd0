//! Phase space on the cylinder `ℤ × [-π, π)` for integer angular momentum.
//!
//! The Fourier transformation
//! `(𝓕A)(l, φ) = Σ_n ∫dα/2π e^{i(lα - φn)} A(n, α)` maps distributions on
//! `(n, α)` to characteristic functions on `(l, φ)` and is its own inverse on
//! `2π`-periodic input.
//!
//! The Wigner characteristic function and the overlap `o(l, φ)` are not
//! periodic in `φ`: both pick up `(-1)^l` under `φ → φ + 2π`. Their transforms
//! therefore live on the half-integer lattice `ν ∈ ½ℤ`. [`PhaseTable`] stores
//! that lattice in half steps, and [`cyl_fourier_char`] integrates over
//! `φ ∈ [-2π, 2π)`. On periodic input this reduces to the ordinary transform
//! with support on integer `ν`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::angular_state::{phi_grid, von_mises_coefficient, von_mises_ket, AngularWindow, TruncatedKet, VonMisesParams};
use crate::epr_teleport::{epr_on_windows, EprParams};
use crate::error::{Error, Result};
use crate::operators::OperatorMatrix;
use crate::special_fn::bessel_quotient;

/// `C_P = C_W / o` is only formed where `|o| > O_FLOOR`.
pub const O_FLOOR: f64 = 1e-8;

/// Behaviour of a characteristic function under `φ → φ + 2π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `C(l, φ + 2π) = C(l, φ)`.
    Periodic,
    /// `C(l, φ + 2π) = (-1)^l C(l, φ)`.
    Alternating,
}

/// Samples `C(l, φ_j)` on `l ∈ [l_min, l_max]` and `φ_j = -π + 2πj/P`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGrid {
    l_min: i64,
    l_max: i64,
    grid_size: usize,
    parity: Parity,
    values: Array2<C64>,
}

fn par_rows(rows: usize, cols: usize, f: impl Fn(usize) -> Vec<C64> + Sync) -> Array2<C64> {
    let data: Vec<C64> = (0..rows).into_par_iter().flat_map_iter(|i| f(i)).collect();
    Array2::from_shape_vec((rows, cols), data).expect("row length matches")
}

fn check_grid_size(p: usize) -> Result<()> {
    if p < 2 || !p.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("grid size must be a power of two >= 2, got {p}")));
    }
    Ok(())
}

impl CharGrid {
    pub fn new(l_min: i64, l_max: i64, grid_size: usize, parity: Parity, values: Array2<C64>) -> Result<Self> {
        check_grid_size(grid_size)?;
        if l_min > l_max {
            return Err(Error::InvalidParameter(format!("empty l window [{l_min}, {l_max}]")));
        }
        if values.dim() != ((l_max - l_min + 1) as usize, grid_size) {
            return Err(Error::InvalidParameter(format!("values shape {:?} does not match grid", values.dim())));
        }
        Ok(CharGrid { l_min, l_max, grid_size, parity, values })
    }

    pub fn from_fn(
        l_min: i64,
        l_max: i64,
        grid_size: usize,
        parity: Parity,
        f: impl Fn(i64, f64) -> C64 + Sync,
    ) -> Result<Self> {
        check_grid_size(grid_size)?;
        let phis = phi_grid(grid_size);
        let rows = (l_max - l_min + 1).max(0) as usize;
        let values = par_rows(rows, grid_size, |i| {
            let l = l_min + i as i64;
            phis.iter().map(|&phi| f(l, phi)).collect()
        });
        Self::new(l_min, l_max, grid_size, parity, values)
    }

    pub fn l_min(&self) -> i64 {
        self.l_min
    }

    pub fn l_max(&self) -> i64 {
        self.l_max
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    pub fn phis(&self) -> Vec<f64> {
        phi_grid(self.grid_size)
    }

    pub fn labels(&self) -> std::ops::RangeInclusive<i64> {
        self.l_min..=self.l_max
    }

    /// `C(l, φ_j)`; zero outside the `l` window.
    pub fn get(&self, l: i64, j: usize) -> C64 {
        if l < self.l_min || l > self.l_max {
            return C64::default();
        }
        self.values[((l - self.l_min) as usize, j)]
    }

    /// Value at `φ = -2π + 2πj/P` for `j ∈ [0, 2P)`, extended by parity.
    pub fn lifted(&self, l: i64, j: usize) -> C64 {
        let p = self.grid_size;
        let half = p / 2;
        let sign = |v: C64| match self.parity {
            Parity::Alternating if l.rem_euclid(2) == 1 => -v,
            _ => v,
        };
        if j < half {
            sign(self.get(l, j + half))
        } else if j < p + half {
            self.get(l, j - half)
        } else {
            sign(self.get(l, j - p - half))
        }
    }

    /// Largest `|C(-l, -φ) - C(l, φ)*|` over cells whose mirror is on the grid.
    pub fn hermitian_residual(&self) -> f64 {
        let p = self.grid_size;
        let mut worst = 0.0f64;
        for l in self.labels() {
            if -l < self.l_min || -l > self.l_max {
                continue;
            }
            for j in 0..p {
                // -φ_j = φ_{P-j}; -φ_0 = π lies one period away
                let mirror = if j == 0 { self.lifted(-l, p + p / 2) } else { self.get(-l, p - j) };
                worst = worst.max((mirror - self.get(l, j).conj()).norm());
            }
        }
        worst
    }

    /// Largest `|a - b|` over cells where both are finite.
    pub fn max_distance(&self, other: &CharGrid) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .filter(|(a, b)| a.re.is_finite() && b.re.is_finite())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Cell-wise product; the parity follows the usual sign rule.
    pub fn multiply(&self, other: &CharGrid) -> Result<CharGrid> {
        self.check_same(other)?;
        let parity = if self.parity == other.parity { Parity::Periodic } else { Parity::Alternating };
        CharGrid::new(self.l_min, self.l_max, self.grid_size, parity, &self.values * &other.values)
    }

    fn check_same(&self, other: &CharGrid) -> Result<()> {
        if self.l_min != other.l_min || self.l_max != other.l_max || self.grid_size != other.grid_size {
            return Err(Error::Mismatch("characteristic grids differ in shape".into()));
        }
        Ok(())
    }

    /// `Σ_l ∫dφ A(l, φ) B(l, φ)*` by the periodic trapezoid rule.
    pub fn pairing(&self, other: &CharGrid) -> Result<C64> {
        self.check_same(other)?;
        let h = 2.0 * PI / self.grid_size as f64;
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| a * b.conj()).sum::<C64>() * h)
    }
}

/// Table `A(ν, α_k)` on `ν = ν2/2`, `ν2 ∈ [nu2_min, nu2_max]`, and a uniform `α` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    nu2_min: i64,
    nu2_max: i64,
    alpha_grid_size: usize,
    values: Array2<C64>,
}

impl PhaseTable {
    pub fn new(nu2_min: i64, nu2_max: i64, alpha_grid_size: usize, values: Array2<C64>) -> Result<Self> {
        if nu2_min > nu2_max || alpha_grid_size < 2 || alpha_grid_size % 2 != 0 {
            return Err(Error::InvalidParameter("invalid phase table shape".into()));
        }
        if values.dim() != ((nu2_max - nu2_min + 1) as usize, alpha_grid_size) {
            return Err(Error::InvalidParameter(format!("values shape {:?} does not match table", values.dim())));
        }
        Ok(PhaseTable { nu2_min, nu2_max, alpha_grid_size, values })
    }

    /// Table over integer `n ∈ [n_min, n_max]` only.
    pub fn integer(n_min: i64, n_max: i64, alpha_grid_size: usize, f: impl Fn(i64, f64) -> C64) -> Result<Self> {
        let alphas = phi_grid(alpha_grid_size);
        let (lo, hi) = (2 * n_min, 2 * n_max);
        let values = Array2::from_shape_fn(((hi - lo + 1) as usize, alpha_grid_size), |(i, k)| {
            let nu2 = lo + i as i64;
            if nu2 % 2 == 0 {
                f(nu2 / 2, alphas[k])
            } else {
                C64::default()
            }
        });
        Self::new(lo, hi, alpha_grid_size, values)
    }

    pub fn nu2_min(&self) -> i64 {
        self.nu2_min
    }

    pub fn nu2_max(&self) -> i64 {
        self.nu2_max
    }

    pub fn alpha_grid_size(&self) -> usize {
        self.alpha_grid_size
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    pub fn alphas(&self) -> Vec<f64> {
        phi_grid(self.alpha_grid_size)
    }

    /// `A(ν2/2, α_k)`; zero outside the window.
    pub fn get(&self, nu2: i64, k: usize) -> C64 {
        if nu2 < self.nu2_min || nu2 > self.nu2_max {
            return C64::default();
        }
        self.values[((nu2 - self.nu2_min) as usize, k)]
    }

    /// `Σ_ν ∫dα A(ν, α)`.
    pub fn total(&self) -> C64 {
        self.values.sum() * (2.0 * PI / self.alpha_grid_size as f64)
    }

    /// `Σ_ν ∫dα A B*`.
    pub fn pairing(&self, other: &PhaseTable) -> Result<C64> {
        let lo = self.nu2_min.min(other.nu2_min);
        let hi = self.nu2_max.max(other.nu2_max);
        if self.alpha_grid_size != other.alpha_grid_size {
            return Err(Error::Mismatch("alpha grids differ".into()));
        }
        let mut acc = C64::default();
        for nu2 in lo..=hi {
            for k in 0..self.alpha_grid_size {
                acc += self.get(nu2, k) * other.get(nu2, k).conj();
            }
        }
        Ok(acc * (2.0 * PI / self.alpha_grid_size as f64))
    }

    /// Largest `|a - b|` over the union of both windows.
    pub fn max_distance(&self, other: &PhaseTable) -> Result<f64> {
        if self.alpha_grid_size != other.alpha_grid_size {
            return Err(Error::Mismatch("alpha grids differ".into()));
        }
        let lo = self.nu2_min.min(other.nu2_min);
        let hi = self.nu2_max.max(other.nu2_max);
        let mut worst = 0.0f64;
        for nu2 in lo..=hi {
            for k in 0..self.alpha_grid_size {
                worst = worst.max((self.get(nu2, k) - other.get(nu2, k)).norm());
            }
        }
        Ok(worst)
    }

    /// Largest modulus carried on half-integer `ν`.
    pub fn half_integer_weight(&self) -> f64 {
        (self.nu2_min..=self.nu2_max)
            .filter(|v| v.rem_euclid(2) == 1)
            .flat_map(|v| (0..self.alpha_grid_size).map(move |k| (v, k)))
            .map(|(v, k)| self.get(v, k).norm())
            .fold(0.0, f64::max)
    }
}

/// `(𝓕A)(l, φ_j) = Σ_ν ∫dα/2π e^{i(lα - φ_jν)} A(ν, α)` on the requested grid.
///
/// The `l` window must fit within the `α` grid's band.
pub fn cyl_fourier(table: &PhaseTable, l_min: i64, l_max: i64, grid_size: usize) -> Result<CharGrid> {
    check_grid_size(grid_size)?;
    let pa = table.alpha_grid_size;
    let span = (l_max - l_min).max(0) as usize;
    if span >= pa {
        return Err(Error::Aliasing { band: span, capacity: pa - 1 });
    }
    let alphas = table.alphas();
    let nus: Vec<i64> = (table.nu2_min..=table.nu2_max).collect();
    // b[ν][l] = (1/P_α) Σ_k e^{ilα_k} A(ν, α_k)
    let ls: Vec<i64> = (l_min..=l_max).collect();
    let b: Vec<Vec<C64>> = nus
        .par_iter()
        .map(|&nu2| {
            ls.iter()
                .map(|&l| {
                    (0..pa).map(|k| C64::from_polar(1.0, l as f64 * alphas[k]) * table.get(nu2, k)).sum::<C64>()
                        / pa as f64
                })
                .collect()
        })
        .collect();
    let half_support = nus
        .iter()
        .zip(&b)
        .any(|(nu2, row)| nu2.rem_euclid(2) == 1 && row.iter().any(|v| v.norm() > 0.0));
    let parity = if half_support { Parity::Alternating } else { Parity::Periodic };
    let phis = phi_grid(grid_size);
    let values = par_rows(ls.len(), grid_size, |li| {
        phis.iter()
            .map(|&phi| {
                nus.iter()
                    .zip(&b)
                    .map(|(&nu2, bl)| C64::from_polar(1.0, -phi * nu2 as f64 / 2.0) * bl[li])
                    .sum()
            })
            .collect()
    });
    CharGrid::new(l_min, l_max, grid_size, parity, values)
}

/// `(𝓕C)(ν, α_k) = Σ_l ∫dφ/2π e^{i(νφ - α_k l)} C(l, φ)` with `φ` running over
/// `[-2π, 2π)` (weight ½) so that half-integer `ν` are resolved.
///
/// The `ν` window must span less than one grid period.
pub fn cyl_fourier_char(grid: &CharGrid, nu2_min: i64, nu2_max: i64, alpha_grid_size: usize) -> Result<PhaseTable> {
    let p = grid.grid_size;
    let span2 = (nu2_max - nu2_min).max(0) as usize;
    if span2 >= 2 * p {
        return Err(Error::Aliasing { band: span2 / 2, capacity: p - 1 });
    }
    let l_span = (grid.l_max - grid.l_min) as usize;
    if alpha_grid_size < 2 || alpha_grid_size % 2 != 0 || l_span >= alpha_grid_size {
        return Err(Error::Aliasing { band: l_span, capacity: alpha_grid_size.saturating_sub(1) });
    }
    let phis2: Vec<f64> = (0..2 * p).map(|j| -2.0 * PI + 2.0 * PI * j as f64 / p as f64).collect();
    let alphas = phi_grid(alpha_grid_size);
    let ls: Vec<i64> = grid.labels().collect();
    let nus: Vec<i64> = (nu2_min..=nu2_max).collect();
    // b[ν][l] = (1/2P) Σ_j e^{iνφ_j} C(l, φ_j)
    let b: Vec<Vec<C64>> = nus
        .par_iter()
        .map(|&nu2| {
            let nu = nu2 as f64 / 2.0;
            ls.iter()
                .map(|&l| {
                    (0..2 * p).map(|j| C64::from_polar(1.0, nu * phis2[j]) * grid.lifted(l, j)).sum::<C64>()
                        / (2 * p) as f64
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((nus.len(), alpha_grid_size));
    for (i, bl) in b.iter().enumerate() {
        for (k, &a) in alphas.iter().enumerate() {
            values[(i, k)] = ls.iter().zip(bl).map(|(&l, v)| C64::from_polar(1.0, -a * l as f64) * v).sum();
        }
    }
    PhaseTable::new(nu2_min, nu2_max, alpha_grid_size, values)
}

/// `(A ∗ B)(ν, α) = Σ_μ ∫dβ/2π A(ν - μ, α - β) B(μ, β)`, evaluated directly on
/// the shared `α` grid for `ν2 ∈ [nu2_min, nu2_max]`.
pub fn convolve(a: &PhaseTable, b: &PhaseTable, nu2_min: i64, nu2_max: i64) -> Result<PhaseTable> {
    if a.alpha_grid_size != b.alpha_grid_size {
        return Err(Error::Mismatch("alpha grids differ".into()));
    }
    let pa = a.alpha_grid_size;
    let half = pa / 2;
    let rows: Vec<Vec<C64>> = (nu2_min..=nu2_max)
        .into_par_iter()
        .map(|nu2| {
            (0..pa)
                .map(|k| {
                    let mut acc = C64::default();
                    for mu2 in b.nu2_min..=b.nu2_max {
                        let d = nu2 - mu2;
                        if d < a.nu2_min || d > a.nu2_max {
                            continue;
                        }
                        for q in 0..pa {
                            // α_k - α_q = -π + 2πr/P_α (mod 2π)
                            let r = (k + pa + half - q) % pa;
                            acc += a.get(d, r) * b.get(mu2, q);
                        }
                    }
                    acc / pa as f64
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((rows.len(), pa));
    for (i, r) in rows.iter().enumerate() {
        for (k, v) in r.iter().enumerate() {
            values[(i, k)] = *v;
        }
    }
    PhaseTable::new(nu2_min, nu2_max, pa, values)
}

/// `o(l, φ) = I_l(2κ cos(φ/2)) / I_0(2κ)`.
pub fn overlap_kernel(l: i64, phi: f64, kappa: f64) -> f64 {
    bessel_quotient(l, 2.0 * kappa * (phi / 2.0).cos(), 0, 2.0 * kappa).unwrap_or(0.0)
}

/// [`overlap_kernel`] sampled on a characteristic grid.
pub fn overlap_grid(kappa: f64, l_min: i64, l_max: i64, grid_size: usize) -> Result<CharGrid> {
    CharGrid::from_fn(l_min, l_max, grid_size, Parity::Alternating, |l, phi| {
        C64::new(overlap_kernel(l, phi, kappa), 0.0)
    })
}

/// Density operator on an integer-label window.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    window: AngularWindow,
    entries: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(window: AngularWindow, entries: Array2<C64>) -> Result<Self> {
        if window.delta() != 0.0 {
            return Err(Error::InvalidParameter("phase-space routines need integer angular momentum".into()));
        }
        if entries.dim() != (window.dim(), window.dim()) {
            return Err(Error::InvalidParameter("density matrix shape does not match window".into()));
        }
        Ok(DensityMatrix { window, entries })
    }

    /// `Σ_i w_i |ψ_i⟩⟨ψ_i|` with the kets embedded into `window`.
    pub fn from_mixture(components: &[(f64, TruncatedKet)], window: AngularWindow) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let d = window.dim();
        let mut m = Array2::zeros((d, d));
        for (w, ket) in components {
            if !(*w >= 0.0) {
                return Err(Error::InvalidParameter(format!("mixture weight {w} is negative")));
            }
            let k = ket.embed(window)?;
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += k.coeffs()[i] * k.coeffs()[j].conj() * *w;
                }
            }
        }
        Self::new(window, m)
    }

    pub fn window(&self) -> &AngularWindow {
        &self.window
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    /// `⟨a|ρ|b⟩`; zero outside the window.
    pub fn element(&self, a: i64, b: i64) -> C64 {
        match (self.window.index_of(a), self.window.index_of(b)) {
            (Some(i), Some(j)) => self.entries[(i, j)],
            _ => C64::default(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.window.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Largest entry difference, comparing by label over both windows.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        let lo = self.window.l_min().min(other.window.l_min());
        let hi = self.window.l_max().max(other.window.l_max());
        let mut worst = 0.0f64;
        for a in lo..=hi {
            for b in lo..=hi {
                worst = worst.max((self.element(a, b) - other.element(a, b)).norm());
            }
        }
        worst
    }
}

/// `C_W(l, φ) = Tr[ρ D(l, φ)] / 2π = (1/2π) Σ_m e^{-i(m + l/2)φ} ρ(m, m + l)`.
pub fn wigner_char(rho: &DensityMatrix, l_min: i64, l_max: i64, grid_size: usize) -> Result<CharGrid> {
    let w = *rho.window();
    CharGrid::from_fn(l_min, l_max, grid_size, Parity::Alternating, |l, phi| {
        let s: C64 = w
            .labels()
            .map(|m| C64::from_polar(1.0, -(m as f64 + l as f64 / 2.0) * phi) * rho.element(m, m + l))
            .sum();
        s / (2.0 * PI)
    })
}

/// `ρ(m, m + l) = ∫dφ C_W(l, φ) e^{i(m + l/2)φ}` on `window`.
pub fn reconstruct_from_wigner_char(grid: &CharGrid, window: AngularWindow) -> Result<DensityMatrix> {
    let p = grid.grid_size();
    let band = window.dim() - 1;
    if band as i64 > grid.l_max().min(-grid.l_min()) {
        return Err(Error::Aliasing { band, capacity: grid.l_max().min(-grid.l_min()).max(0) as usize });
    }
    if window.dim() > p {
        return Err(Error::Aliasing { band: window.dim(), capacity: p });
    }
    let phis = grid.phis();
    let h = 2.0 * PI / p as f64;
    let d = window.dim();
    let mut m = Array2::zeros((d, d));
    for (i, a) in window.labels().enumerate() {
        for (j, b) in window.labels().enumerate() {
            let l = b - a;
            let s: C64 = (0..p)
                .map(|k| grid.get(l, k) * C64::from_polar(1.0, (a as f64 + l as f64 / 2.0) * phis[k]))
                .sum();
            m[(i, j)] = s * h;
        }
    }
    DensityMatrix::new(window, m)
}

/// Real distribution over integer `n` and a uniform `α` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDist {
    pub n_min: i64,
    pub n_max: i64,
    pub alpha_grid_size: usize,
    pub values: Array2<f64>,
}

impl PhaseDist {
    /// `Σ_n ∫dα` by the periodic trapezoid rule.
    pub fn total(&self) -> f64 {
        self.values.sum() * 2.0 * PI / self.alpha_grid_size as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn to_table(&self) -> PhaseTable {
        PhaseTable::integer(self.n_min, self.n_max, self.alpha_grid_size, |_, _| C64::default())
            .map(|mut t| {
                for (i, n) in (self.n_min..=self.n_max).enumerate() {
                    let row = (2 * n - t.nu2_min) as usize;
                    for k in 0..self.alpha_grid_size {
                        t.values[(row, k)] = C64::new(self.values[(i, k)], 0.0);
                    }
                }
                t
            })
            .expect("valid shape")
    }
}

/// `Q(n, α) = ⟨n, α|ρ|n, α⟩ / 2π` with probe spread `κ`.
pub fn q_function(rho: &DensityMatrix, kappa: f64, n_min: i64, n_max: i64, alpha_grid_size: usize) -> Result<PhaseDist> {
    let w = *rho.window();
    let band = 2 * (w.dim() - 1);
    if alpha_grid_size <= band || alpha_grid_size % 2 != 0 {
        return Err(Error::Aliasing { band, capacity: alpha_grid_size.saturating_sub(1) });
    }
    if n_min > n_max {
        return Err(Error::InvalidParameter("empty n window".into()));
    }
    let alphas = phi_grid(alpha_grid_size);
    let rows: Vec<Vec<f64>> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            alphas
                .iter()
                .map(|&a| {
                    let p = VonMisesParams::new(n, 0.0, a, kappa).expect("validated probe");
                    let v: Vec<C64> = w.labels().map(|l| von_mises_coefficient(&p, l)).collect();
                    let mut acc = C64::default();
                    for (i, vi) in v.iter().enumerate() {
                        for (j, vj) in v.iter().enumerate() {
                            acc += vi.conj() * rho.entries[(i, j)] * vj;
                        }
                    }
                    acc.re / (2.0 * PI)
                })
                .collect()
        })
        .collect();
    let mut values = Array2::zeros((rows.len(), alpha_grid_size));
    for (i, r) in rows.iter().enumerate() {
        for (k, v) in r.iter().enumerate() {
            values[(i, k)] = *v;
        }
    }
    Ok(PhaseDist { n_min, n_max, alpha_grid_size, values })
}

/// `C_P = C_W / o` on the admissible cells, with the excluded cells listed.
#[derive(Debug, Clone, PartialEq)]
pub struct PChar {
    /// Excluded cells hold NaN.
    pub grid: CharGrid,
    pub excluded: Vec<(i64, usize)>,
}

impl PChar {
    /// The grid, or a singular-region error naming every excluded cell.
    pub fn require_full(self) -> Result<CharGrid> {
        if self.excluded.is_empty() {
            Ok(self.grid)
        } else {
            Err(Error::SingularRegion(self.excluded))
        }
    }
}

pub fn p_char(rho: &DensityMatrix, kappa: f64, l_min: i64, l_max: i64, grid_size: usize) -> Result<PChar> {
    let cw = wigner_char(rho, l_min, l_max, grid_size)?;
    let o = overlap_grid(kappa, l_min, l_max, grid_size)?;
    let mut values = Array2::zeros(cw.values().dim());
    let mut excluded = Vec::new();
    for (i, l) in cw.labels().enumerate() {
        for j in 0..grid_size {
            let ov = o.values()[(i, j)].re;
            if ov.abs() > O_FLOOR {
                values[(i, j)] = cw.values()[(i, j)] / ov;
            } else {
                values[(i, j)] = C64::new(f64::NAN, f64::NAN);
                excluded.push((l, j));
            }
        }
    }
    Ok(PChar { grid: CharGrid::new(l_min, l_max, grid_size, Parity::Periodic, values)?, excluded })
}

fn check_components(components: &[(f64, VonMisesParams)]) -> Result<f64> {
    let first = components.first().ok_or(Error::EmptyMixture)?;
    let kappa = first.1.kappa();
    for (w, p) in components {
        if p.kappa() != kappa {
            return Err(Error::Mismatch(format!("components use spreads {kappa} and {}", p.kappa())));
        }
        if p.delta() != 0.0 {
            return Err(Error::InvalidParameter("phase-space routines need integer angular momentum".into()));
        }
        if !(*w >= 0.0) {
            return Err(Error::InvalidParameter(format!("mixture weight {w} is negative")));
        }
    }
    Ok(kappa)
}

/// `Σ_i w_i |n_i, α_i⟩⟨n_i, α_i|` on `window`, all components sharing one `κ`.
pub fn p_reconstruct(components: &[(f64, VonMisesParams)], window: AngularWindow) -> Result<DensityMatrix> {
    check_components(components)?;
    let kets = components
        .iter()
        .map(|(w, p)| Ok((*w, von_mises_ket(p, &window)?)))
        .collect::<Result<Vec<_>>>()?;
    DensityMatrix::from_mixture(&kets, window)
}

/// Characteristic function of point masses `Σ_i w_i δ_{n n_i} δ(α - α_i)`:
/// `Σ_i w_i e^{i(lα_i - n_iφ)} / 2π`.
pub fn p_char_point_masses(
    components: &[(f64, VonMisesParams)],
    l_min: i64,
    l_max: i64,
    grid_size: usize,
) -> Result<CharGrid> {
    check_components(components)?;
    CharGrid::from_fn(l_min, l_max, grid_size, Parity::Periodic, |l, phi| {
        components
            .iter()
            .map(|(w, p)| C64::from_polar(*w / (2.0 * PI), l as f64 * p.alpha() - p.n() as f64 * phi))
            .sum()
    })
}

/// `𝓕o` on `|ν| ≤ nu_half_width`, the kernel linking `Q`, `W` and `P`.
///
/// The overlap is band-limited to `|l| < P_α/2` before transforming.
pub fn convolution_kernel(kappa: f64, nu_half_width: usize, alpha_grid_size: usize) -> Result<PhaseTable> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel needs kappa > 0, got {kappa}")));
    }
    let lb = (alpha_grid_size / 2).saturating_sub(1) as i64;
    let p = (2 * nu_half_width + 2).next_power_of_two().max(8);
    let o = overlap_grid(kappa, -lb, lb, p)?;
    let h = nu_half_width as i64;
    cyl_fourier_char(&o, -2 * h, 2 * h, alpha_grid_size)
}

/// Wigner function `W = 𝓕 C_W` on the half-integer lattice.
pub fn wigner_function(rho: &DensityMatrix, alpha_grid_size: usize) -> Result<PhaseTable> {
    let w = *rho.window();
    let band = (w.dim() - 1) as i64;
    let p = (2 * w.dim() + 2).next_power_of_two();
    let cw = wigner_char(rho, -band, band, p)?;
    cyl_fourier_char(&cw, 2 * w.l_min(), 2 * w.l_max(), alpha_grid_size)
}

/// `𝓕[|n, α⟩⟨n, α|](l, φ)` restricted to `window`, with `n` summed over
/// `[n_min, n_max]` and `α` on a uniform grid.
pub fn projector_transform(
    kappa: f64,
    l: i64,
    phi: f64,
    window: &AngularWindow,
    (n_min, n_max): (i64, i64),
    alpha_grid_size: usize,
) -> Result<OperatorMatrix> {
    if window.delta() != 0.0 {
        return Err(Error::InvalidParameter("phase-space routines need integer angular momentum".into()));
    }
    let band = window.dim() + l.unsigned_abs() as usize;
    if alpha_grid_size <= band {
        return Err(Error::Aliasing { band, capacity: alpha_grid_size.saturating_sub(1) });
    }
    let d = window.dim();
    let alphas = phi_grid(alpha_grid_size);
    let mut m: Array2<C64> = Array2::zeros((d, d));
    for n in n_min..=n_max {
        for &a in &alphas {
            let p = VonMisesParams::new(n, 0.0, a, kappa)?;
            let v: Vec<C64> = window.labels().map(|x| von_mises_coefficient(&p, x)).collect();
            let w = C64::from_polar(1.0 / alpha_grid_size as f64, l as f64 * a - phi * n as f64);
            for i in 0..d {
                for j in 0..d {
                    m[(i, j)] += w * v[i] * v[j].conj();
                }
            }
        }
    }
    OperatorMatrix::new(*window, m)
}

/// `2π 𝓕[|n, α⟩⟨n, α|](l, φ)` for the two-mode EPR-like states on `ws × wa`,
/// as a matrix over the flattened index `i_s · dim_a + i_a`.
pub fn epr_projector_transform(
    l: i64,
    phi: f64,
    ws: &AngularWindow,
    wa: &AngularWindow,
    alpha_grid_size: usize,
) -> Result<Array2<C64>> {
    if ws.delta() != 0.0 || wa.delta() != 0.0 {
        return Err(Error::InvalidParameter("phase-space routines need integer angular momentum".into()));
    }
    let band = ws.dim() + wa.dim() + l.unsigned_abs() as usize;
    if alpha_grid_size <= band {
        return Err(Error::Aliasing { band, capacity: alpha_grid_size.saturating_sub(1) });
    }
    let d = ws.dim() * wa.dim();
    let mut m: Array2<C64> = Array2::zeros((d, d));
    for n in ws.l_min() + wa.l_min()..=ws.l_max() + wa.l_max() {
        for &a in &phi_grid(alpha_grid_size) {
            let s = epr_on_windows(&EprParams::new(n, a, 0.0, 0.0)?, ws, wa)?;
            let v: Vec<C64> = s.amps().iter().copied().collect();
            let w = C64::from_polar(2.0 * PI / alpha_grid_size as f64, l as f64 * a - phi * n as f64);
            for (p, x) in v.iter().enumerate() {
                if x.norm_sqr() == 0.0 {
                    continue;
                }
                for (q, y) in v.iter().enumerate() {
                    m[(p, q)] += w * x * y.conj();
                }
            }
        }
    }
    Ok(m)
}

/// `A ⊗ B` over the flattened index `i_A · dim_B + i_B`.
pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    Array2::from_shape_fn((ra * rb, ca * cb), |(r, c)| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_state::{overlap, von_mises_auto};
    use crate::operators::generating_function;

    fn vm(n: i64, alpha: f64, kappa: f64) -> VonMisesParams {
        VonMisesParams::new(n, 0.0, alpha, kappa).unwrap()
    }

    fn window(h: usize) -> AngularWindow {
        AngularWindow::centered(0, h, 0.0).unwrap()
    }

    #[test]
    fn kernel_special_values() {
        assert_eq!(overlap_kernel(0, 0.0, 2.3), 1.0);
        assert!(overlap_kernel(2, PI, 1.1).abs() < 1e-15);
        // e^{ilφ/2}⟨l, φ|0, 0⟩ with the closed-form overlap
        let (l, phi, kappa) = (1, 0.6, 1.4);
        let ov = overlap(&vm(0, 0.0, kappa), &vm(l, phi, kappa)).unwrap();
        let lhs = C64::from_polar(1.0, l as f64 * phi / 2.0) * ov;
        assert!((lhs - overlap_kernel(l, phi, kappa)).norm() < 1e-12);
    }

    #[test]
    fn delta_input_gives_constant() {
        let t = PhaseTable::integer(0, 0, 8, |_, _| C64::new(1.0, 0.0)).unwrap();
        let c = cyl_fourier(&t, 0, 0, 8).unwrap();
        for v in c.values() {
            assert!((v - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn aliasing_detected() {
        let t = PhaseTable::integer(0, 1, 8, |_, _| C64::new(1.0, 0.0)).unwrap();
        assert!(matches!(cyl_fourier(&t, -4, 4, 8), Err(Error::Aliasing { .. })));
        let g = overlap_grid(1.0, -2, 2, 8).unwrap();
        assert!(matches!(cyl_fourier_char(&g, -20, 20, 8), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn wigner_char_of_states() {
        let p = vm(1, 0.5, 1.2);
        let ket = von_mises_auto(&p, 1e-16).unwrap();
        let rho = DensityMatrix::from_mixture(&[(1.0, ket.clone())], ket.window().with_tail_tol(1e-12).unwrap()).unwrap();
        let cw = wigner_char(&rho, -6, 6, 32).unwrap();
        assert!((cw.get(0, 16) - 1.0 / (2.0 * PI)).norm() < 1e-12);
        for (j, phi) in cw.phis().iter().enumerate() {
            for l in -6..=6 {
                let g = generating_function(&p, l, *phi) * C64::from_polar(1.0 / (2.0 * PI), -(l as f64) * phi / 2.0);
                assert!((cw.get(l, j) - g).norm() < 1e-11);
            }
        }
        assert!(cw.hermitian_residual() < 1e-12);

        let w = window(3);
        let basis = TruncatedKet::basis(w, 2).unwrap();
        let rho = DensityMatrix::from_mixture(&[(1.0, basis)], w).unwrap();
        let cw = wigner_char(&rho, -3, 3, 16).unwrap();
        for (j, phi) in cw.phis().iter().enumerate() {
            for l in -3..=3 {
                let expect = if l == 0 { C64::from_polar(1.0 / (2.0 * PI), -2.0 * phi) } else { C64::default() };
                assert!((cw.get(l, j) - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn maximally_mixed_q_is_flat() {
        let w = window(3);
        let comps: Vec<_> = w.labels().map(|l| (1.0 / 7.0, TruncatedKet::basis(w, l).unwrap())).collect();
        let rho = DensityMatrix::from_mixture(&comps, w).unwrap();
        let q = q_function(&rho, 0.8, -15, 15, 16).unwrap();
        for row in q.values.rows() {
            assert!(row.iter().all(|v| (v - row[0]).abs() < 1e-15));
        }
        assert!((q.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_of_matching_von_mises_state() {
        let kappa = 1.1;
        let p = vm(0, 0.0, kappa);
        let rho = p_reconstruct(&[(1.0, p)], AngularWindow::new(-25, 25, 0.0, 1e-14).unwrap()).unwrap();
        let q = q_function(&rho, kappa, -4, 4, 128).unwrap();
        let alphas = phi_grid(128);
        for (i, n) in (-4..=4).enumerate() {
            for (k, a) in alphas.iter().enumerate() {
                let ov = overlap(&vm(n, *a, kappa), &p).unwrap().norm_sqr() / (2.0 * PI);
                assert!((q.values[(i, k)] - ov).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_p_char() {
        let kappa = 0.9;
        let comps = [(0.5, vm(0, 0.0, kappa)), (0.5, vm(0, PI, kappa))];
        let w = AngularWindow::new(-25, 25, 0.0, 1e-14).unwrap();
        let rho = p_reconstruct(&comps, w).unwrap();
        let pc = p_char(&rho, kappa, -5, 5, 32).unwrap();
        let expect = p_char_point_masses(&comps, -5, 5, 32).unwrap();
        assert!(pc.grid.max_distance(&expect).unwrap() < 1e-9);
        assert!(!pc.excluded.is_empty());
        assert!(pc.excluded.iter().all(|(l, j)| *l != 0 && *j == 0));
        assert!(matches!(pc.clone().require_full(), Err(Error::SingularRegion(_))));
        // odd l vanish for the symmetric pair
        for j in 1..32 {
            assert!(pc.grid.get(1, j).norm() < 1e-9);
        }
        assert!(matches!(p_reconstruct(&[], w), Err(Error::EmptyMixture)));
        let bad = [(0.5, vm(0, 0.0, 1.0)), (0.5, vm(0, 0.0, 2.0))];
        assert!(matches!(p_reconstruct(&bad, w), Err(Error::Mismatch(_))));
    }

    #[test]
    fn basis_state_round_trip() {
        let w = window(4);
        let rho = DensityMatrix::from_mixture(&[(1.0, TruncatedKet::basis(w, -1).unwrap())], w).unwrap();
        let cw = wigner_char(&rho, -8, 8, 16).unwrap();
        let back = reconstruct_from_wigner_char(&cw, w).unwrap();
        assert!(back.distance(&rho) < 1e-15);
    }

    #[test]
    fn kernel_normalisation_and_symmetry() {
        let k = convolution_kernel(1.3, 20, 64).unwrap();
        assert!((k.total() / (2.0 * PI) - 1.0).norm() < 1e-8);
        let pa = k.alpha_grid_size();
        for nu2 in k.nu2_min()..=k.nu2_max() {
            for q in 1..pa / 2 {
                // α_{P/2 + q} = -α_{P/2 - q}
                let a = k.get(nu2, pa / 2 + q);
                let b = k.get(nu2, pa / 2 - q);
                assert!((a - b).norm() < 1e-12);
                assert!(a.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q_is_kernel_convolved_with_w() {
        let kappa = 1.0;
        let w = window(12);
        let p = vm(1, 0.4, 0.7);
        let rho = DensityMatrix::from_mixture(&[(1.0, von_mises_ket(&p, &w).unwrap())], w).unwrap();
        let q = q_function(&rho, kappa, -30, 30, 64).unwrap();
        let k = convolution_kernel(kappa, 18, 64).unwrap();
        let wf = wigner_function(&rho, 64).unwrap();
        assert!(wf.half_integer_weight() > 1e-3);
        let conv = convolve(&k, &wf, -60, 60).unwrap();
        assert!(conv.max_distance(&q.to_table()).unwrap() < 1e-12);
    }

    #[test]
    fn w_is_kernel_convolved_with_p() {
        let kappa = 0.8;
        let comps = [(0.3, vm(0, 0.0, kappa)), (0.7, vm(2, -1.0, kappa))];
        let rho = p_reconstruct(&comps, AngularWindow::new(-40, 42, 0.0, 1e-14).unwrap()).unwrap();
        let (lb, pa, pg) = (31, 64, 128);
        let cw = wigner_char(&rho, -lb, lb, pg).unwrap();
        let wf = cyl_fourier_char(&cw, -40, 40, pa).unwrap();
        let cp = p_char_point_masses(&comps, -lb, lb, 8).unwrap();
        let pt = cyl_fourier_char(&cp, -6, 6, pa).unwrap();
        assert!(pt.half_integer_weight() < 1e-14);
        let k = convolution_kernel(kappa, 18, pa).unwrap();
        let conv = convolve(&k, &pt, -40, 40).unwrap();
        assert!(conv.max_distance(&wf).unwrap() < 1e-10);
    }

    #[test]
    fn fourier_self_inverse_and_parseval() {
        let t = PhaseTable::integer(-3, 4, 16, |n, a| {
            C64::new((n as f64 * 0.3).cos() * (1.0 + (2.0 * a).cos()), (a - n as f64).sin() * 0.2)
        })
        .unwrap();
        let c = cyl_fourier(&t, -7, 7, 16).unwrap();
        assert_eq!(c.parity(), Parity::Periodic);
        let back = cyl_fourier_char(&c, -6, 8, 16).unwrap();
        assert!(back.max_distance(&t).unwrap() < 1e-13);
        let lhs = c.pairing(&c).unwrap();
        let rhs = t.pairing(&t).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn projector_transforms() {
        use crate::operators::displacement;
        let w = window(5);
        let (l, phi, kappa) = (2, 0.7, 0.9);
        let f = projector_transform(kappa, l, phi, &w, (-45, 45), 32).unwrap();
        let expect = displacement(l, phi, &w).scaled(C64::new(overlap_kernel(l, phi, kappa), 0.0));
        assert!(f.interior_distance(&expect, 0).unwrap() < 1e-12);

        let (ws, wa) = (window(3), window(3));
        let two = epr_projector_transform(-1, 1.3, &ws, &wa, 32).unwrap();
        let expect = kron(displacement(-1, 1.3, &ws).entries(), displacement(1, 1.3, &wa).entries());
        let worst = (&two - &expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-13);
    }
}
