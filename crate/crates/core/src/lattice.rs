//! Physical parameters, truncation windows and the windowed density matrices.
//!
//! Units: ħ = 1. Everything downstream depends only on the dimensionless pair
//! `t_Ω = Ωt` and `t_D = 2Dt`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::{JTable, ScaledITable};
use crate::error::{Error, Result};

/// Hopping amplitude, bath rate and elapsed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub omega: f64,
    pub diss: f64,
    pub time: f64,
}

impl SimParams {
    pub fn new(omega: f64, diss: f64, time: f64) -> Result<Self> {
        for (name, v) in [("omega", omega), ("diss", diss), ("time", time)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { omega, diss, time })
    }

    /// Parameters realizing a given dimensionless pair at unit time.
    pub fn from_dimensionless(t_omega: f64, t_d: f64) -> Result<Self> {
        Self::new(t_omega, t_d / 2.0, 1.0)
    }

    /// `Ωt` (ħ = 1).
    pub fn t_omega(&self) -> f64 {
        self.omega * self.time
    }

    /// `2Dt`.
    pub fn t_d(&self) -> f64 {
        2.0 * self.diss * self.time
    }

    /// `2D / Ω`, undefined without hopping.
    pub fn r_d(&self) -> Option<f64> {
        (self.omega > 0.0).then(|| 2.0 * self.diss / self.omega)
    }

    pub fn at_time(&self, time: f64) -> Result<Self> {
        Self::new(self.omega, self.diss, time)
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(omega, self.diss, self.time)
    }
}

/// Site window `|s| ≤ radius` per particle plus the series cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub radius: usize,
    pub series_cutoff_i: usize,
    pub series_cutoff_j: usize,
    pub tol: f64,
    /// Bound on the probability lost to the finite window and series cutoff.
    pub certified_error: f64,
}

impl Window {
    /// A window with explicit radius and I-cutoff; no certificate is claimed.
    pub fn new(radius: usize, series_cutoff_i: usize, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParams(format!(
                "tol must be positive, got {tol}"
            )));
        }
        Ok(Self {
            radius,
            series_cutoff_i,
            series_cutoff_j: radius + 3 * series_cutoff_i,
            tol,
            certified_error: f64::NAN,
        })
    }

    /// Number of sites per particle.
    pub fn sites(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn contains(&self, s: i64) -> bool {
        s.unsigned_abs() as usize <= self.radius
    }

    pub fn site_range(&self) -> std::ops::RangeInclusive<i64> {
        let w = self.radius as i64;
        -w..=w
    }
}

/// Limits applied by [`select_window`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowLimits {
    pub min_radius: usize,
    pub max_radius: usize,
    pub max_series_cutoff: usize,
}

impl Default for WindowLimits {
    fn default() -> Self {
        Self {
            min_radius: 8,
            max_radius: 40,
            max_series_cutoff: 120,
        }
    }
}

/// Smallest I-cutoff whose first neglected term satisfies
/// `e^{-t_D} I_{N+1}(t_D) (2N+1)^3 < tol`, and the resulting tail estimate.
pub(crate) fn series_cutoff(t_d: f64, tol: f64, max_cutoff: usize) -> Result<(usize, f64)> {
    let table = ScaledITable::new(t_d, max_cutoff + 1)?;
    for n in 0..=max_cutoff {
        let first_neglected = table.get(n as i64 + 1);
        let growth = (2 * n + 1) as f64;
        if first_neglected * growth.powi(3) < tol {
            // both signs, geometric safety factor 2
            return Ok((n, 4.0 * first_neglected));
        }
    }
    Err(Error::Resource(format!(
        "series cutoff for t_D = {t_d} exceeds {max_cutoff} at tol {tol:e}"
    )))
}

/// One-particle profile `P(s) = Σ_n e^{-t_D} I_n(t_D) J_{s+n}(t_Ω)^2`, `s ≥ 0`.
fn one_particle_profile(t_omega: f64, t_d: f64, n_i: usize, s_max: usize) -> Result<Vec<f64>> {
    let jt = JTable::new(t_omega, s_max + n_i + 1)?;
    let it = ScaledITable::new(t_d, n_i)?;
    let ni = n_i as i64;
    Ok((0..=s_max as i64)
        .map(|s| (-ni..=ni).map(|n| it.get(n) * jt.get(s + n).powi(2)).sum())
        .collect())
}

/// Choose a window whose certified truncation error is at most `tol`.
///
/// The radius is the smallest `W ≥ min_radius` for which both particles'
/// out-of-window probability, computed from the exact one-particle profile,
/// stays below `tol / 2`; the other half of the budget goes to the I-series
/// cutoff.
pub fn select_window(params: &SimParams, tol: f64) -> Result<Window> {
    select_window_with(params, tol, WindowLimits::default())
}

pub fn select_window_with(params: &SimParams, tol: f64, limits: WindowLimits) -> Result<Window> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParams(format!(
            "tol must lie in (0, 1), got {tol}"
        )));
    }
    let t_omega = params.t_omega();
    let t_d = params.t_d();
    let (n_i, series_tail) = series_cutoff(t_d, tol / 2.0, limits.max_series_cutoff)?;

    // Generous scan range from the usual Bessel decay estimates.
    let ballistic = t_omega + 8.0 * t_omega.cbrt() + 8.0;
    let diffusive = t_d + 8.0 * t_d.sqrt() + 8.0;
    let s_max = (ballistic + diffusive).ceil() as usize + limits.min_radius;
    let profile = one_particle_profile(t_omega, t_d, n_i, s_max)?;

    // tails[w] = 2 Σ_{s>w} P(s), both particles: twice that.
    let mut tail = 0.0;
    let mut radius = None;
    let mut tails = vec![0.0; s_max + 1];
    for s in (0..=s_max).rev() {
        tails[s] = 2.0 * 2.0 * tail;
        tail += profile[s];
    }
    for (w, &t) in tails.iter().enumerate().skip(limits.min_radius) {
        if t <= tol / 2.0 {
            radius = Some(w);
            break;
        }
    }
    let radius = radius.ok_or(Error::WindowTooLarge {
        required: s_max + 1,
        max: limits.max_radius,
    })?;
    if radius > limits.max_radius {
        return Err(Error::WindowTooLarge {
            required: radius,
            max: limits.max_radius,
        });
    }
    Ok(Window {
        radius,
        series_cutoff_i: n_i,
        series_cutoff_j: radius + 3 * n_i,
        tol,
        certified_error: tails[radius] + series_tail,
    })
}

/// Window of a given radius with the series cutoff and certified error
/// chosen as in [`select_window`]; the radius is not checked against `tol`.
pub fn fixed_window(params: &SimParams, radius: usize, tol: f64) -> Result<Window> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidParams(format!(
            "tol must lie in (0, 1), got {tol}"
        )));
    }
    let limits = WindowLimits::default();
    let (n_i, series_tail) = series_cutoff(params.t_d(), tol / 2.0, limits.max_series_cutoff)?;
    let s_max = radius + (params.t_omega() + params.t_d()).ceil() as usize + 64;
    let profile = one_particle_profile(params.t_omega(), params.t_d(), n_i, s_max)?;
    let outside: f64 = profile[radius + 1..].iter().sum();
    let mut window = Window::new(radius, n_i, tol)?;
    window.certified_error = 4.0 * outside + series_tail;
    Ok(window)
}

#[inline]
fn offset(w: usize, s: i64) -> usize {
    (s + w as i64) as usize
}

/// Two-particle density operator on the window, indexed `(s1, s2, s1', s2')`.
///
/// Storage is row-major over the pair basis: row `(s1, s2)`, column
/// `(s1', s2')`, i.e. a `(2W+1)^2 × (2W+1)^2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    window: Window,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zeros(window: Window) -> Self {
        let n = window.sites();
        Self {
            window,
            data: vec![Complex64::new(0.0, 0.0); n * n * n * n],
        }
    }

    pub fn from_data(window: Window, data: Vec<Complex64>) -> Result<Self> {
        let n = window.sites();
        if data.len() != n * n * n * n {
            return Err(Error::InvalidParams(format!(
                "expected {} elements for radius {}, got {}",
                n * n * n * n,
                window.radius,
                data.len()
            )));
        }
        Ok(Self { window, data })
    }

    /// `|s1, s2⟩⟨s1, s2|`.
    pub fn localized(window: Window, s1: i64, s2: i64) -> Result<Self> {
        if !window.contains(s1) || !window.contains(s2) {
            return Err(Error::OutOfRange(format!(
                "({s1}, {s2}) outside radius {}",
                window.radius
            )));
        }
        let mut rho = Self::zeros(window);
        *rho.get_mut(s1, s2, s1, s2) = Complex64::new(1.0, 0.0);
        Ok(rho)
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn radius(&self) -> usize {
        self.window.radius
    }

    pub fn sites(&self) -> usize {
        self.window.sites()
    }

    /// Dimension of the pair basis.
    pub fn dim(&self) -> usize {
        self.sites() * self.sites()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    /// Flat offset of `(s1, s2, s1', s2')`; caller guarantees the indices are in range.
    #[inline]
    pub fn index(&self, s1: i64, s2: i64, s1p: i64, s2p: i64) -> usize {
        let w = self.window.radius;
        let n = self.sites();
        ((offset(w, s1) * n + offset(w, s2)) * n + offset(w, s1p)) * n + offset(w, s2p)
    }

    /// Pair-basis row/column index of `(s1, s2)`.
    #[inline]
    pub fn pair_index(&self, s1: i64, s2: i64) -> usize {
        let w = self.window.radius;
        offset(w, s1) * self.sites() + offset(w, s2)
    }

    #[inline]
    pub fn get(&self, s1: i64, s2: i64, s1p: i64, s2p: i64) -> Complex64 {
        self.data[self.index(s1, s2, s1p, s2p)]
    }

    /// Element lookup that reads zero outside the window.
    pub fn get_or_zero(&self, s1: i64, s2: i64, s1p: i64, s2p: i64) -> Complex64 {
        let w = &self.window;
        if w.contains(s1) && w.contains(s2) && w.contains(s1p) && w.contains(s2p) {
            self.get(s1, s2, s1p, s2p)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    #[inline]
    pub fn get_mut(&mut self, s1: i64, s2: i64, s1p: i64, s2p: i64) -> &mut Complex64 {
        let i = self.index(s1, s2, s1p, s2p);
        &mut self.data[i]
    }

    /// Pair-basis matrix element.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let d = self.dim();
        (0..d).map(|i| self.data[i * d + i]).sum()
    }

    /// Largest `|ρ(s,s') - conj ρ(s',s)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..d {
            for j in i..d {
                let a = self.data[i * d + j];
                let b = self.data[j * d + i].conj();
                worst = worst.max((a - b).norm());
            }
        }
        worst
    }

    /// Largest `|ρ(s1,s2,s1',s2') - ρ(s2,s1,s2',s1')|`.
    pub fn exchange_defect(&self) -> f64 {
        let r = self.window.radius as i64;
        let mut worst = 0.0_f64;
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in -r..=r {
                    for s2p in -r..=r {
                        let a = self.get(s1, s2, s1p, s2p);
                        let b = self.get(s2, s1, s2p, s1p);
                        worst = worst.max((a - b).norm());
                    }
                }
            }
        }
        worst
    }

    /// Largest elementwise modulus difference; windows must match in radius.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if self.radius() != other.radius() {
            return Err(Error::InvalidParams(format!(
                "radius mismatch: {} vs {}",
                self.radius(),
                other.radius()
            )));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Largest difference over elements with every index in `|s| ≤ radius`.
    pub fn max_abs_diff_within(&self, other: &DensityMatrix, radius: usize) -> f64 {
        let r = radius.min(self.radius()).min(other.radius()) as i64;
        let mut worst = 0.0_f64;
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in -r..=r {
                    for s2p in -r..=r {
                        let d = self.get(s1, s2, s1p, s2p) - other.get(s1, s2, s1p, s2p);
                        worst = worst.max(d.norm());
                    }
                }
            }
        }
        worst
    }

    /// Copy restricted to a smaller centred window.
    pub fn restrict(&self, window: Window) -> Result<DensityMatrix> {
        if window.radius > self.radius() {
            return Err(Error::OutOfRange(format!(
                "cannot restrict radius {} to {}",
                self.radius(),
                window.radius
            )));
        }
        let r = window.radius as i64;
        let mut out = DensityMatrix::zeros(window);
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in -r..=r {
                    for s2p in -r..=r {
                        *out.get_mut(s1, s2, s1p, s2p) = self.get(s1, s2, s1p, s2p);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Kronecker product `a ⊗ b` of one-particle matrices on the same window.
    pub fn product(a: &ReducedDensity, b: &ReducedDensity) -> Result<DensityMatrix> {
        if a.radius() != b.radius() {
            return Err(Error::InvalidParams("factor windows differ".into()));
        }
        let r = a.radius() as i64;
        let mut out = DensityMatrix::zeros(*a.window());
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in -r..=r {
                    for s2p in -r..=r {
                        *out.get_mut(s1, s2, s1p, s2p) = a.get(s1, s1p) * b.get(s2, s2p);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One-particle density operator on the window, indexed `(s, s')`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensity {
    window: Window,
    data: Vec<Complex64>,
}

impl ReducedDensity {
    pub fn zeros(window: Window) -> Self {
        let n = window.sites();
        Self {
            window,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn radius(&self) -> usize {
        self.window.radius
    }

    pub fn sites(&self) -> usize {
        self.window.sites()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    fn index(&self, s: i64, sp: i64) -> usize {
        let w = self.window.radius;
        offset(w, s) * self.sites() + offset(w, sp)
    }

    #[inline]
    pub fn get(&self, s: i64, sp: i64) -> Complex64 {
        self.data[self.index(s, sp)]
    }

    #[inline]
    pub fn get_mut(&mut self, s: i64, sp: i64) -> &mut Complex64 {
        let i = self.index(s, sp);
        &mut self.data[i]
    }

    pub fn trace(&self) -> Complex64 {
        self.window.site_range().map(|s| self.get(s, s)).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let r = self.window.radius as i64;
        let mut worst = 0.0_f64;
        for s in -r..=r {
            for sp in s..=r {
                worst = worst.max((self.get(s, sp) - self.get(sp, s).conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &ReducedDensity) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensionless_times() {
        let p = SimParams::new(2.0, 0.25, 3.0).unwrap();
        assert_eq!(p.t_omega(), 6.0);
        assert_eq!(p.t_d(), 1.5);
        let r = p.r_d().unwrap();
        assert!((r * p.t_omega() - p.t_d()).abs() < 1e-15);
        assert_eq!(SimParams::new(0.0, 1.0, 1.0).unwrap().r_d(), None);
    }

    #[test]
    fn params_reject_negative() {
        assert!(SimParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(SimParams::new(1.0, -0.1, 0.0).is_err());
        assert!(SimParams::new(1.0, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn localized_window() {
        let p = SimParams::from_dimensionless(0.0, 0.0).unwrap();
        let w = select_window(&p, 1e-8).unwrap();
        assert!(w.radius >= 8);
        assert_eq!(w.series_cutoff_i, 0);
        assert_eq!(w.series_cutoff_j, w.radius);
        assert!(w.certified_error <= 1e-8);
    }

    #[test]
    fn unitary_window_covers_ballistic_tail() {
        let p = SimParams::from_dimensionless(5.0, 0.0).unwrap();
        let w = select_window(&p, 1e-8).unwrap();
        assert_eq!(w.series_cutoff_i, 0);
        let jt = JTable::new(5.0, 200).unwrap();
        let tail: f64 = (w.radius as i64 + 1..200)
            .map(|s| 2.0 * jt.get(s).powi(2))
            .sum();
        assert!(tail < 1e-8, "tail {tail}");
    }

    #[test]
    fn diffusive_window_covers_classical_tail() {
        let p = SimParams::from_dimensionless(0.0, 5.0).unwrap();
        let w = select_window(&p, 1e-8).unwrap();
        let it = ScaledITable::new(5.0, 200).unwrap();
        let tail: f64 = (w.radius as i64 + 1..200).map(|s| 2.0 * it.get(s)).sum();
        assert!(tail < 1e-8, "tail {tail}");
        assert!(w.certified_error <= 1e-8);
        assert_eq!(w.series_cutoff_j, w.radius + 3 * w.series_cutoff_i);
    }

    #[test]
    fn series_cutoff_sum_rule() {
        for &t_d in &[0.3, 1.0, 2.0, 4.0] {
            let tol = 1e-10;
            let p = SimParams::from_dimensionless(1.0, t_d).unwrap();
            let w = select_window(&p, tol).unwrap();
            let it = ScaledITable::new(t_d, w.series_cutoff_i).unwrap();
            let n = w.series_cutoff_i as i64;
            let s: f64 = (-n..=n).map(|k| it.get(k)).sum();
            assert!((1.0 - tol..=1.0 + 1e-15).contains(&s), "t_d={t_d} sum={s}");
        }
    }

    #[test]
    fn window_guard() {
        let p = SimParams::from_dimensionless(30.0, 0.0).unwrap();
        let limits = WindowLimits {
            max_radius: 10,
            ..WindowLimits::default()
        };
        assert!(matches!(
            select_window_with(&p, 1e-8, limits),
            Err(Error::WindowTooLarge { .. })
        ));
    }

    #[test]
    fn localized_matrix_is_a_projector() {
        let w = Window::new(3, 0, 1e-8).unwrap();
        let rho = DensityMatrix::localized(w, 1, -2).unwrap();
        assert_eq!(rho.trace(), Complex64::new(1.0, 0.0));
        assert_eq!(rho.get(1, -2, 1, -2).re, 1.0);
        assert_eq!(rho.get_or_zero(9, 0, 0, 0).re, 0.0);
        assert_eq!(rho.hermiticity_defect(), 0.0);
        assert!(DensityMatrix::localized(w, 4, 0).is_err());
    }
}
