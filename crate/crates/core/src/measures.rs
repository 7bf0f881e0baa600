//! Scalar diagnostics: purity, von Neumann entropy, relative entropy of
//! coherence and mirror correlations.

use std::f64::consts::PI;

use faer::{c64, Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::ScaledITable;
use crate::error::{Error, Result};
use crate::lattice::{series_cutoff, DensityMatrix, ReducedDensity, SimParams, Window};
use crate::propagator::{evolve_analytic, one_particle_analytic, EvolutionRequest};

/// Eigenvalues at or below this are dropped from `-Σ λ ln λ`.
pub const ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    pub t_omega: f64,
    pub t_d: f64,
    pub purity2: f64,
    pub purity1_sq: f64,
    pub delta_purity: f64,
    pub entropy: f64,
    /// Entropy of two walkers with independent baths, `2 S(ρ⁽¹⁾)`.
    pub entropy_independent: f64,
    pub c_re: f64,
    pub mirror_t1: f64,
    pub mirror_total: f64,
}

impl MeasureRecord {
    /// Column names in output order.
    pub const COLUMNS: [&'static str; 10] = [
        "t_omega",
        "t_d",
        "purity2",
        "purity1_sq",
        "delta_purity",
        "entropy",
        "entropy_independent",
        "c_re",
        "mirror_t1",
        "mirror_total",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.t_omega,
            self.t_d,
            self.purity2,
            self.purity1_sq,
            self.delta_purity,
            self.entropy,
            self.entropy_independent,
            self.c_re,
            self.mirror_t1,
            self.mirror_total,
        ]
    }

    /// All measures for the matrix `rho` evolved with `params` on its window.
    pub fn from_matrix(rho: &DensityMatrix, params: &SimParams) -> Result<Self> {
        let t_d = params.t_d();
        let purity2 = purity_matrix(rho);
        let p1 = purity_one(t_d)?;
        let one = one_particle_analytic(params, rho.window())?;
        let entropy = von_neumann_entropy(rho)?;
        Ok(Self {
            t_omega: params.t_omega(),
            t_d,
            purity2,
            purity1_sq: p1 * p1,
            delta_purity: purity2 - p1 * p1,
            entropy,
            entropy_independent: 2.0 * one_particle_entropy(&one)?,
            c_re: shannon_entropy(rho) - entropy,
            mirror_t1: mirror_t1(t_d)?,
            mirror_total: mirror_total(rho, t_d)?,
        })
    }

    pub fn compute(params: &SimParams, window: &Window) -> Result<Self> {
        let rho = evolve_analytic(&EvolutionRequest::new(*params, *window))?;
        Self::from_matrix(&rho, params)
    }
}

/// `Tr ρ²` for Hermitian `ρ`.
pub fn purity_matrix(rho: &DensityMatrix) -> f64 {
    rho.data().iter().map(|z| z.norm_sqr()).sum()
}

/// Cutoff for [`purity_series`] whose neglected terms stay below `tol`.
pub fn purity_cutoff(t_d: f64, tol: f64) -> Result<usize> {
    if !(t_d >= 0.0) {
        return Err(Error::Domain(format!(
            "t_D must be non-negative, got {t_d}"
        )));
    }
    let y = 2.0 * t_d;
    series_cutoff(y, tol * (-4.0 * y).exp(), 400).map(|(n, _)| n)
}

/// Two-particle purity from the closed triple series in the scaled Bessel
/// functions of argument `y = 2 t_D`:
/// `e^{4y} Σ_m i_m Σ_{α,β} (-1)^{α+β} i_α i_β i_{α+m} i_{β+m} i_{α+β+m}`.
///
/// The sum alternates with absolute mass `e^{4y}`, so rounding grows like
/// `e^{8 t_D} ε`.
pub fn purity_series(t_d: f64, cutoff: usize) -> Result<f64> {
    if !(t_d >= 0.0) {
        return Err(Error::Domain(format!(
            "t_D must be non-negative, got {t_d}"
        )));
    }
    let y = 2.0 * t_d;
    let n = cutoff as i64;
    let table = ScaledITable::new(y, 3 * cutoff)?;
    let i = |k: i64| table.get(k);
    let mut total = 0.0;
    for m in -n..=n {
        let mut inner = 0.0;
        for a in -n..=n {
            let sa = if a.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let fa = sa * i(a) * i(a + m);
            let mut row = 0.0;
            for b in -n..=n {
                let sb = if b.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                row += sb * i(b) * i(b + m) * i(a + b + m);
            }
            inner += fa * row;
        }
        total += i(m) * inner;
    }
    Ok((4.0 * y).exp() * total)
}

/// One-particle purity `e^{-2t_D} I₀(2t_D)`.
pub fn purity_one(t_d: f64) -> Result<f64> {
    if !(t_d >= 0.0) {
        return Err(Error::Domain(format!(
            "t_D must be non-negative, got {t_d}"
        )));
    }
    crate::bessel::bessel_i_scaled(0, 2.0 * t_d)
}

fn entropy_from_eigenvalues(values: &[f64], tol: f64) -> Result<f64> {
    let bound = 100.0 * tol;
    let mut s = 0.0;
    for &lambda in values {
        if lambda < -bound {
            return Err(Error::WindowUnderflow { lambda, bound });
        }
        if lambda > ENTROPY_FLOOR {
            s -= lambda * lambda.ln();
        }
    }
    Ok(s)
}

fn hermitian_eigenvalues(n: usize, at: impl Fn(usize, usize) -> Complex64) -> Result<Vec<f64>> {
    let m = Mat::<c64>::from_fn(n, n, |i, j| {
        let z = at(i, j);
        c64::new(z.re, z.im)
    });
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))
}

/// Eigenvalues of the pair-basis matrix, ascending.
pub fn spectrum(rho: &DensityMatrix) -> Result<Vec<f64>> {
    hermitian_eigenvalues(rho.dim(), |i, j| rho.at(i, j))
}

/// `-Tr ρ ln ρ` in nats; fails if an eigenvalue falls below `-100 tol`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_from_eigenvalues(&spectrum(rho)?, rho.window().tol)
}

pub fn one_particle_entropy(rho: &ReducedDensity) -> Result<f64> {
    let n = rho.sites();
    let values = hermitian_eigenvalues(n, |i, j| rho.data()[i * n + j])?;
    entropy_from_eigenvalues(&values, rho.window().tol)
}

/// Shannon entropy of the site distribution `P(s1, s2)`.
pub fn shannon_entropy(rho: &DensityMatrix) -> f64 {
    (0..rho.dim())
        .map(|i| rho.at(i, i).re)
        .filter(|&p| p > ENTROPY_FLOOR)
        .map(|p| -p * p.ln())
        .sum()
}

/// `S(ρ_diag) - S(ρ)`.
pub fn relative_entropy_coherence(rho: &DensityMatrix) -> Result<f64> {
    Ok(shannon_entropy(rho) - von_neumann_entropy(rho)?)
}

/// One-particle return amplitude `Σ_s ⟨s|ρ⁽¹⁾|-s⟩ = e^{-t_D} I₀(t_D)`.
pub fn mirror_t1(t_d: f64) -> Result<f64> {
    if !(t_d >= 0.0) {
        return Err(Error::Domain(format!(
            "t_D must be non-negative, got {t_d}"
        )));
    }
    crate::bessel::bessel_i_scaled(0, t_d)
}

/// `Σ_s ⟨s|ρ⁽¹⁾|-s⟩` on the window.
pub fn mirror_sum_one(rho: &ReducedDensity) -> Complex64 {
    let r = rho.radius() as i64;
    (-r..=r).map(|s| rho.get(s, -s)).sum()
}

/// `Σ_{s1,s2} ⟨s1,s2|ρ|-s1,-s2⟩` on the window.
pub fn mirror_sum(rho: &DensityMatrix) -> Complex64 {
    let r = rho.radius() as i64;
    let mut total = Complex64::new(0.0, 0.0);
    for s1 in -r..=r {
        for s2 in -r..=r {
            total += rho.get(s1, s2, -s1, -s2);
        }
    }
    total
}

/// Total mirror correlation `Σ ⟨s1,s2|ρ|-s1,-s2⟩ - (T⁽¹⁾)²` from the windowed matrix.
pub fn mirror_total(rho: &DensityMatrix, t_d: f64) -> Result<f64> {
    let sum = mirror_sum(rho);
    if sum.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!(
            "mirror sum has imaginary part {:e}",
            sum.im
        )));
    }
    Ok(sum.re - mirror_t1(t_d)?.powi(2))
}

/// Same quantity from the exact momentum integral
/// `(2π)^{-2} ∫∫ exp(t_D [cos 2k1 + cos 2k2 - 2 - 4 sin k1 sin k2]) dk1 dk2`,
/// which is independent of `Ω` and needs no window. The trapezoid grid is
/// doubled until two successive values agree to rounding.
pub fn mirror_total_integral(t_d: f64) -> Result<f64> {
    let t1 = mirror_t1(t_d)?;
    let eval = |m: usize| -> f64 {
        let k: Vec<f64> = (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect();
        let c2: Vec<f64> = k.iter().map(|x| (2.0 * x).cos()).collect();
        let sn: Vec<f64> = k.iter().map(|x| x.sin()).collect();
        let mut total = 0.0;
        for a in 0..m {
            let mut row = 0.0;
            for b in 0..m {
                row += (t_d * (c2[a] + c2[b] - 2.0 - 4.0 * sn[a] * sn[b])).exp();
            }
            total += row;
        }
        total / (m * m) as f64
    };
    let mut m = 32;
    let mut prev = eval(m);
    loop {
        m *= 2;
        let next = eval(m);
        if (next - prev).abs() <= 1e-14 * next.abs().max(1e-300) || m >= 1 << 13 {
            return Ok(next - t1 * t1);
        }
        prev = next;
    }
}
