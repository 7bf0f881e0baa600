//! Exact evolution in the Fourier representation.
//!
//! The generator is diagonal in `|k1,k2⟩⟨k1',k2'|`, so the state at time `t`
//! is the initial Fourier kernel times `e^{F t}`. Wannier elements follow by
//! the periodic trapezoid rule on an `M⁴` grid. This path shares no code with
//! the Bessel series and is used to certify it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{DensityMatrix, SimParams, Window};

/// Largest `M⁴` grid the oracle will allocate or sweep.
pub const MAX_GRID_POINTS: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierPoint {
    pub k1: f64,
    pub k1p: f64,
    pub k2: f64,
    pub k2p: f64,
}

impl FourierPoint {
    pub fn new(k1: f64, k1p: f64, k2: f64, k2p: f64) -> Result<Self> {
        for k in [k1, k1p, k2, k2p] {
            if !(k > -PI && k <= PI) {
                return Err(Error::Domain(format!("momentum {k} outside (-π, π]")));
            }
        }
        Ok(Self { k1, k1p, k2, k2p })
    }
}

#[inline]
fn band(k: f64) -> f64 {
    1.0 - k.cos()
}

/// Generator `F(k1,k1',k2,k2')` per unit time.
pub fn generator_f(p: &FourierPoint, params: &SimParams) -> Complex64 {
    let d = params.diss;
    let one = |k: f64, kp: f64| {
        Complex64::new(
            2.0 * d * ((k - kp).cos() - 1.0),
            -params.omega * (band(k) - band(kp)),
        )
    };
    let cross =
        (p.k1 - p.k2p).cos() + (p.k2 - p.k1p).cos() - (p.k1 - p.k2).cos() - (p.k1p - p.k2p).cos();
    one(p.k1, p.k1p) + one(p.k2, p.k2p) + 2.0 * d * cross
}

/// Smallest grid size satisfying the bandwidth precondition for sites up to `max_site`.
pub fn required_quad_points(max_site: usize, params: &SimParams) -> usize {
    2 * (max_site + params.t_omega().ceil() as usize + params.t_d().ceil() as usize)
}

fn check_grid(m: usize, max_site: usize, params: &SimParams) -> Result<()> {
    let need = required_quad_points(max_site, params);
    if m < need {
        return Err(Error::InvalidParams(format!(
            "{m} quadrature points per axis is below the bandwidth bound {need}"
        )));
    }
    let points = m.checked_pow(4).unwrap_or(usize::MAX);
    if points > MAX_GRID_POINTS {
        return Err(Error::Resource(format!(
            "grid of {m}⁴ points exceeds the limit {MAX_GRID_POINTS}"
        )));
    }
    Ok(())
}

/// Grid nodes `k_j = -π + 2π (j+1)/M`, covering `(-π, π]`.
fn nodes(m: usize) -> Vec<f64> {
    (0..m)
        .map(|j| -PI + 2.0 * PI * (j + 1) as f64 / m as f64)
        .collect()
}

/// Lookup tables for the dimensionless exponent `F t` on a uniform grid.
struct GridExponent {
    m: usize,
    band: Vec<f64>,
    /// `cos(k_a - k_b)` indexed by `(a - b) mod M`.
    cos_diff: Vec<f64>,
    t_omega: f64,
    t_d: f64,
}

impl GridExponent {
    fn new(m: usize, t_omega: f64, t_d: f64) -> Self {
        let k = nodes(m);
        Self {
            m,
            band: k.iter().map(|&x| band(x)).collect(),
            cos_diff: (0..m)
                .map(|d| (2.0 * PI * d as f64 / m as f64).cos())
                .collect(),
            t_omega,
            t_d,
        }
    }

    #[inline]
    fn c(&self, a: usize, b: usize) -> f64 {
        self.cos_diff[(a + self.m - b) % self.m]
    }

    /// `e^{F t}` at grid indices `(k1, k2, k1', k2')`.
    #[inline]
    fn factor(&self, a1: usize, a2: usize, b1: usize, b2: usize) -> Complex64 {
        let re = self.c(a1, b1) + self.c(a2, b2) - 2.0 + self.c(a1, b2) + self.c(a2, b1)
            - self.c(a1, a2)
            - self.c(b1, b2);
        let im = -(self.band[a1] + self.band[a2] - self.band[b1] - self.band[b2]);
        Complex64::from_polar((self.t_d * re).exp(), self.t_omega * im)
    }
}

/// Fixed-order pairwise reduction.
fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Single Wannier element `⟨s1,s2|ρ(t)|s1',s2'⟩` from the origin-localized state.
pub fn oracle_element(s: [i64; 4], params: &SimParams, m: usize) -> Result<Complex64> {
    let max_site = s
        .iter()
        .map(|v| v.unsigned_abs() as usize)
        .max()
        .unwrap_or(0);
    check_grid(m, max_site, params)?;
    let g = GridExponent::new(m, params.t_omega(), params.t_d());
    let k = nodes(m);
    let wave = |sv: i64| -> Vec<Complex64> {
        k.iter()
            .map(|&x| Complex64::from_polar(1.0, x * sv as f64))
            .collect()
    };
    let (e1, e2) = (wave(s[0]), wave(s[1]));
    let (f1, f2) = (wave(-s[2]), wave(-s[3]));
    // one partial per (k1, k2); each a serial sum over (k1', k2')
    let partials: Vec<Complex64> = (0..m * m)
        .into_par_iter()
        .map(|ab| {
            let (a1, a2) = (ab / m, ab % m);
            let mut acc = Complex64::new(0.0, 0.0);
            for b1 in 0..m {
                let mut inner = Complex64::new(0.0, 0.0);
                for b2 in 0..m {
                    inner += g.factor(a1, a2, b1, b2) * f2[b2];
                }
                acc += inner * f1[b1];
            }
            acc * e1[a1] * e2[a2]
        })
        .collect();
    Ok(pairwise_sum(&partials) / (m as f64).powi(4))
}

/// Fourier-space kernel `⟨k|ρ(t)|k'⟩·(2π)²` on the `M⁴` grid, layout `(k1, k2, k1', k2')`.
#[derive(Debug, Clone)]
pub struct FourierState {
    m: usize,
    values: Vec<Complex64>,
}

impl FourierState {
    /// Origin-localized initial state, flat in momentum.
    pub fn localized(m: usize) -> Result<Self> {
        let points = m.checked_pow(4).unwrap_or(usize::MAX);
        if m == 0 || points > MAX_GRID_POINTS {
            return Err(Error::Resource(format!(
                "grid of {m}⁴ points exceeds the limit {MAX_GRID_POINTS}"
            )));
        }
        Ok(Self {
            m,
            values: vec![Complex64::new(1.0, 0.0); points],
        })
    }

    pub fn quad_points(&self) -> usize {
        self.m
    }

    /// Multiply by `e^{F Δt}` with `Δt = params.time`.
    pub fn propagate(&mut self, params: &SimParams) {
        let m = self.m;
        let g = GridExponent::new(m, params.t_omega(), params.t_d());
        self.values
            .par_chunks_mut(m * m)
            .enumerate()
            .for_each(|(ab, block)| {
                let (a1, a2) = (ab / m, ab % m);
                for b1 in 0..m {
                    for b2 in 0..m {
                        block[b1 * m + b2] *= g.factor(a1, a2, b1, b2);
                    }
                }
            });
    }

    /// Invert to Wannier elements on `window`.
    pub fn to_wannier(&self, window: &Window) -> Result<DensityMatrix> {
        let m = self.m;
        let n = window.sites();
        let k = nodes(m);
        let sites: Vec<i64> = window.site_range().collect();
        // phase[s][k] = e^{i k s}
        let phase: Vec<Complex64> = sites
            .iter()
            .flat_map(|&s| {
                k.iter()
                    .map(move |&x| Complex64::from_polar(1.0, x * s as f64))
            })
            .collect();
        let zero = Complex64::new(0.0, 0.0);

        // contract k2' -> s2'  : (a1, a2, b1, b2) -> (a1, a2, b1, j2)
        let mut t1 = vec![zero; m * m * m * n];
        t1.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
            let src = &self.values[row * m..(row + 1) * m];
            for (j, o) in out.iter_mut().enumerate() {
                let ph = &phase[j * m..(j + 1) * m];
                *o = src.iter().zip(ph).map(|(v, p)| v * p.conj()).sum();
            }
        });
        // contract k1' -> s1'  : (a1, a2, b1, j2) -> (a1, a2, j1, j2)
        let mut t2 = vec![zero; m * m * n * n];
        t2.par_chunks_mut(n * n).enumerate().for_each(|(ab, out)| {
            let src = &t1[ab * m * n..(ab + 1) * m * n];
            for j1 in 0..n {
                let ph = &phase[j1 * m..(j1 + 1) * m];
                for j2 in 0..n {
                    out[j1 * n + j2] = (0..m).map(|b1| src[b1 * n + j2] * ph[b1].conj()).sum();
                }
            }
        });
        drop(t1);
        // contract k2 -> s2  : (a1, a2, j) -> (a1, i2, j)
        let nn = n * n;
        let mut t3 = vec![zero; m * n * nn];
        t3.par_chunks_mut(n * nn).enumerate().for_each(|(a1, out)| {
            let src = &t2[a1 * m * nn..(a1 + 1) * m * nn];
            for i2 in 0..n {
                let ph = &phase[i2 * m..(i2 + 1) * m];
                for j in 0..nn {
                    out[i2 * nn + j] = (0..m).map(|a2| src[a2 * nn + j] * ph[a2]).sum();
                }
            }
        });
        drop(t2);
        // contract k1 -> s1
        let scale = 1.0 / (m as f64).powi(4);
        let nnn = n * nn;
        let mut data = vec![zero; n * nnn];
        data.par_chunks_mut(nnn).enumerate().for_each(|(i1, out)| {
            let ph = &phase[i1 * m..(i1 + 1) * m];
            for (j, o) in out.iter_mut().enumerate() {
                *o = (0..m)
                    .map(|a1| t3[a1 * nnn + j] * ph[a1])
                    .sum::<Complex64>()
                    * scale;
            }
        });
        DensityMatrix::from_data(*window, data)
    }
}

/// Wannier matrix on `window` from one shared `e^{F t}` grid.
pub fn oracle_matrix(window: &Window, params: &SimParams, m: usize) -> Result<DensityMatrix> {
    check_grid(m, window.radius, params)?;
    let mut state = FourierState::localized(m)?;
    state.propagate(params);
    state.to_wannier(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;
    use crate::propagator::evolve_unitary;
    use proptest::prelude::*;

    fn params(t_omega: f64, t_d: f64) -> SimParams {
        SimParams::from_dimensionless(t_omega, t_d).unwrap()
    }

    #[test]
    fn generator_vanishes_on_the_diagonal() {
        let p = SimParams::new(1.3, 0.7, 1.0).unwrap();
        for &(a, b) in &[(0.1, -2.0), (3.0, 1.0), (PI, PI)] {
            let f = generator_f(&FourierPoint::new(a, a, b, b).unwrap(), &p);
            assert!(f.norm() < 1e-15);
        }
    }

    #[test]
    fn generator_without_bath_is_imaginary() {
        let p = SimParams::new(1.3, 0.0, 1.0).unwrap();
        let q = FourierPoint::new(0.3, -1.2, 2.0, 0.4).unwrap();
        let f = generator_f(&q, &p);
        assert_eq!(f.re, 0.0);
        let e = |k: f64| 1.3 * (1.0 - k.cos());
        assert!((f.im + (e(0.3) + e(2.0) - e(-1.2) - e(0.4))).abs() < 1e-15);
    }

    #[test]
    fn generator_real_part_is_non_positive_on_a_scan() {
        use proptest::test_runner::{Config, TestRunner};
        let mut runner = TestRunner::new(Config {
            cases: 100_000,
            ..Config::default()
        });
        let k = -PI + 1e-12..=PI;
        runner
            .run(
                &(k.clone(), k.clone(), k.clone(), k, 0.0..5.0, 0.0..5.0),
                |(a, b, c, d, om, di)| {
                    let p = SimParams::new(om, di, 1.0).unwrap();
                    let f = generator_f(&FourierPoint::new(a, b, c, d).unwrap(), &p);
                    prop_assert!(f.re <= 1e-12);
                    Ok(())
                },
            )
            .unwrap();
    }

    #[test]
    fn point_range_is_enforced() {
        assert!(FourierPoint::new(-PI, 0.0, 0.0, 0.0).is_err());
        assert!(FourierPoint::new(PI, 0.0, 0.0, 0.0).is_ok());
        assert!(FourierPoint::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn initial_elements() {
        let p = params(0.0, 0.0);
        assert!((oracle_element([0, 0, 0, 0], &p, 8).unwrap() - 1.0).norm() < 1e-10);
        assert!(oracle_element([1, 0, 0, 0], &p, 8).unwrap().norm() < 1e-10);
    }

    #[test]
    fn undersized_grid_is_rejected() {
        assert!(matches!(
            oracle_element([3, 0, 0, 0], &params(2.0, 1.0), 8),
            Err(Error::InvalidParams(_))
        ));
        let w = Window::new(8, 0, 1e-8).unwrap();
        assert!(matches!(
            oracle_matrix(&w, &params(0.0, 0.0), 200),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn matrix_agrees_with_single_elements() {
        let p = params(1.0, 0.5);
        let w = Window::new(3, 0, 1e-8).unwrap();
        let rho = oracle_matrix(&w, &p, 16).unwrap();
        for s in [[1, 0, 0, 1], [2, -1, 0, 0], [0, 0, 0, 0], [-3, 2, 1, -1]] {
            let e = oracle_element(s, &p, 16).unwrap();
            assert!((rho.get(s[0], s[1], s[2], s[3]) - e).norm() < 1e-14);
        }
        assert!(rho.hermiticity_defect() < 1e-10);
    }

    #[test]
    fn origin_state_at_zero_time() {
        let w = Window::new(4, 0, 1e-8).unwrap();
        let rho = oracle_matrix(&w, &params(0.0, 0.0), 12).unwrap();
        for (i, z) in rho.data().iter().enumerate() {
            let want = if i == rho.index(0, 0, 0, 0) { 1.0 } else { 0.0 };
            assert!((z - want).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_limit_matches_bessel_products() {
        let w = Window::new(8, 0, 1e-8).unwrap();
        let p = params(1.0, 0.0);
        let rho = oracle_matrix(&w, &p, 32).unwrap();
        let exact = evolve_unitary(1.0, &w).unwrap();
        assert!(rho.max_abs_diff(&exact).unwrap() < 1e-8);
        let j1 = bessel_j(1, 1.0).unwrap();
        let j0 = bessel_j(0, 1.0).unwrap();
        // i^{1-0+0-1} J1 J0 J0 J1
        assert!((rho.get(1, 0, 0, 1).re - j1 * j0 * j0 * j1).abs() < 1e-10);
    }

    #[test]
    fn trace_is_normalized() {
        for &(to, td) in &[(1.0, 0.5), (0.5, 2.0)] {
            let w = Window::new(10, 0, 1e-8).unwrap();
            let rho = oracle_matrix(&w, &params(to, td), 28).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn quadrature_converges() {
        let p = params(1.0, 1.0);
        let w = Window::new(4, 0, 1e-8).unwrap();
        let a = oracle_matrix(&w, &p, 20).unwrap();
        let b = oracle_matrix(&w, &p, 40).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-8);
    }

    #[test]
    fn evolution_is_a_semigroup() {
        let w = Window::new(4, 0, 1e-8).unwrap();
        let m = 20;
        let mut split = FourierState::localized(m).unwrap();
        split.propagate(&SimParams::new(1.0, 0.5, 0.4).unwrap());
        split.propagate(&SimParams::new(1.0, 0.5, 0.6).unwrap());
        let mut whole = FourierState::localized(m).unwrap();
        whole.propagate(&SimParams::new(1.0, 0.5, 1.0).unwrap());
        let a = split.to_wannier(&w).unwrap();
        let b = whole.to_wannier(&w).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-14);
    }

    #[test]
    fn repeated_runs_are_bit_identical() {
        let p = params(1.0, 0.5);
        let a = oracle_element([1, 0, 0, 1], &p, 16).unwrap();
        let b = oracle_element([1, 0, 0, 1], &p, 16).unwrap();
        assert_eq!(a, b);
    }
}
