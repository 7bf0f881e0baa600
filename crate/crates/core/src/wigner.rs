//! Discrete Wigner function of the two-walker state on the enlarged lattice
//! of integers and half-integers.
//!
//! `W(k, x) = (2π)^{-2} Σ_{x'} ⟨x+x'|ρ|x-x'⟩ e^{-2i k·x'}`, where only `x'`
//! with both `x ± x'` integer contribute. Coordinates are stored doubled
//! (`X = 2x`), so with `s = x + x'` the sum runs over `s` with `X - s` also a
//! site and the phase is `e^{-i k (2s - X)}`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::JTable;
use crate::error::{Error, Result};
use crate::lattice::{DensityMatrix, SimParams, Window};
use crate::propagator::BathKernel;

const FOUR_PI_SQ: f64 = 4.0 * PI * PI;

/// A point of `ℤ ⊕ ℤ/2`, held as twice its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EnlargedIndex {
    pub twice: i64,
}

impl EnlargedIndex {
    pub fn from_twice(twice: i64) -> Self {
        Self { twice }
    }

    pub fn from_site(s: i64) -> Self {
        Self { twice: 2 * s }
    }

    pub fn is_integer(&self) -> bool {
        self.twice.rem_euclid(2) == 0
    }

    pub fn value(&self) -> f64 {
        self.twice as f64 / 2.0
    }
}

impl fmt::Display for EnlargedIndex {
    /// Integers print plainly, half-integers as `n/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

fn guard(rho: &DensityMatrix, x: [EnlargedIndex; 2]) -> Result<()> {
    let limit = 2 * rho.radius() as i64;
    for xi in x {
        if xi.twice.abs() > limit {
            return Err(Error::OutOfRange(format!(
                "enlarged coordinate {xi} outside the window radius {}",
                rho.radius()
            )));
        }
    }
    Ok(())
}

/// Sites `s` with `s` and `X - s` both in the window.
fn chord(radius: i64, twice: i64) -> std::ops::RangeInclusive<i64> {
    (twice - radius).max(-radius)..=(twice + radius).min(radius)
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > 1e-10 {
        return Err(Error::Numerical(format!(
            "Wigner value has imaginary part {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

/// Definitional sum at one phase-space point.
pub fn wigner_from_rho(rho: &DensityMatrix, k: [f64; 2], x: [EnlargedIndex; 2]) -> Result<f64> {
    guard(rho, x)?;
    let r = rho.radius() as i64;
    let (x1, x2) = (x[0].twice, x[1].twice);
    let mut total = Complex64::new(0.0, 0.0);
    for s1 in chord(r, x1) {
        let p1 = Complex64::from_polar(1.0, -k[0] * (2 * s1 - x1) as f64);
        for s2 in chord(r, x2) {
            let p2 = Complex64::from_polar(1.0, -k[1] * (2 * s2 - x2) as f64);
            total += rho.get(s1, s2, x1 - s1, x2 - s2) * p1 * p2;
        }
    }
    real_part(total / FOUR_PI_SQ)
}

/// Dissipation-free form `(2π)^{-2} (-1)^{X1+X2} J_{X1}(-2t_Ω sin k1) J_{X2}(-2t_Ω sin k2)`.
pub fn wigner_unitary(t_omega: f64, k: [f64; 2], x: [EnlargedIndex; 2]) -> Result<f64> {
    let mut value = 1.0 / FOUR_PI_SQ;
    for (ki, xi) in k.into_iter().zip(x) {
        let sign = if xi.twice.rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        value *= sign * crate::bessel::bessel_j(xi.twice, -2.0 * t_omega * ki.sin())?;
    }
    Ok(value)
}

/// Closed-form Wigner function from the six-index Bessel series.
///
/// Writing `α`, `β`, `q` for the summed offsets, the value is
/// `(2π)^{-2} Σ L(α,β,q) J_{X1+2α-q}(z1) J_{X2+2β+q}(z2) e^{iq(k1-k2)}` with
/// `z_j = 2 t_Ω sin k_j` and `L` the bath sum over the three remaining
/// indices; `L(α,β,q)` is the bath kernel at `(A, B, C) = (α, α-q, β)`, so
/// it is built once and reused across points.
#[derive(Debug, Clone)]
pub struct WignerSeries {
    kernel: BathKernel,
    t_omega: f64,
}

impl WignerSeries {
    pub fn new(params: &SimParams, cutoffs: &Window) -> Result<Self> {
        Ok(Self {
            kernel: BathKernel::build(params.t_d(), cutoffs.series_cutoff_i, cutoffs.tol)?,
            t_omega: params.t_omega(),
        })
    }

    pub fn value(&self, k: [f64; 2], x: [EnlargedIndex; 2]) -> Result<f64> {
        let kern = &self.kernel;
        if kern.terms == 0 {
            return Ok(0.0);
        }
        let (x1, x2) = (x[0].twice, x[1].twice);
        let reach = (x1.abs().max(x2.abs()) + 3 * kern.half + 1) as usize;
        let j1 = JTable::new(2.0 * self.t_omega * k[0].sin(), reach)?;
        let j2 = JTable::new(2.0 * self.t_omega * k[1].sin(), reach)?;
        let dk = k[0] - k[1];
        let [a_lo, b_lo, c_lo] = kern.lo;
        let [a_hi, b_hi, c_hi] = kern.hi;
        let mut total = Complex64::new(0.0, 0.0);
        for a in a_lo..=a_hi {
            for b in b_lo..=b_hi {
                let q = a - b;
                let first = j1.get(x1 + 2 * a - q);
                if first == 0.0 {
                    continue;
                }
                let mut inner = 0.0;
                for c in c_lo..=c_hi {
                    let v = kern.get(a, b, c);
                    if v != 0.0 {
                        inner += v * j2.get(x2 + 2 * c + q);
                    }
                }
                total += Complex64::from_polar(first * inner, q as f64 * dk);
            }
        }
        real_part(total / FOUR_PI_SQ)
    }
}

/// One-shot evaluation of [`WignerSeries`].
pub fn wigner_closed(
    params: &SimParams,
    k: [f64; 2],
    x: [EnlargedIndex; 2],
    cutoffs: &Window,
) -> Result<f64> {
    WignerSeries::new(params, cutoffs)?.value(k, x)
}

/// Wigner function on a midpoint `M × M` momentum grid and the enlarged
/// square `|x_i| ≤ W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub k_points: usize,
    pub radius: usize,
    /// Layout `(X1, X2, k1, k2)` with `X_i = -2W..=2W`.
    pub values: Vec<f64>,
}

impl WignerGrid {
    /// Nodes `k_j = -π + 2π (j + 1/2) / M`.
    pub fn k_nodes(m: usize) -> Vec<f64> {
        (0..m)
            .map(|j| -PI + 2.0 * PI * (j as f64 + 0.5) / m as f64)
            .collect()
    }

    /// Doubled coordinates along one axis.
    pub fn x_values(&self) -> Vec<EnlargedIndex> {
        let w = 2 * self.radius as i64;
        (-w..=w).map(EnlargedIndex::from_twice).collect()
    }

    pub fn x_count(&self) -> usize {
        4 * self.radius + 1
    }

    fn weight(&self) -> f64 {
        (2.0 * PI / self.k_points as f64).powi(2)
    }

    pub fn get(&self, x: [EnlargedIndex; 2], k_index: [usize; 2]) -> f64 {
        let w = 2 * self.radius as i64;
        let nx = self.x_count();
        let m = self.k_points;
        let xi = ((x[0].twice + w) as usize) * nx + (x[1].twice + w) as usize;
        self.values[(xi * m + k_index[0]) * m + k_index[1]]
    }

    fn plane(&self, xi: usize) -> &[f64] {
        let mm = self.k_points * self.k_points;
        &self.values[xi * mm..(xi + 1) * mm]
    }

    /// Build the grid from `rho`; `k_points` must exceed `2W` so the
    /// quadrature of every phase `e^{ikm}` in the window is exact.
    pub fn from_rho(rho: &DensityMatrix, k_points: usize) -> Result<Self> {
        let radius = rho.radius();
        if k_points <= 2 * radius {
            return Err(Error::InvalidParams(format!(
                "{k_points} momentum points cannot resolve window radius {radius} (need > {})",
                2 * radius
            )));
        }
        let m = k_points;
        let r = radius as i64;
        let w = 2 * r;
        let nx = (2 * w + 1) as usize;
        let k = Self::k_nodes(m);
        let n = rho.sites();
        let mm = m * m;
        let mut values = vec![0.0; nx * nx * mm];

        // Only X1 <= X2 is evaluated; the rest follows from exchange symmetry.
        let planes: Vec<(usize, Result<Vec<f64>>)> = (0..nx * nx)
            .into_par_iter()
            .filter(|xi| xi / nx <= xi % nx)
            .map(|xi| {
                let x1 = (xi / nx) as i64 - w;
                let x2 = (xi % nx) as i64 - w;
                (xi, wigner_plane(rho, &k, x1, x2, n))
            })
            .collect();
        for (xi, plane) in planes {
            let plane = plane?;
            let (a, b) = (xi / nx, xi % nx);
            values[xi * mm..(xi + 1) * mm].copy_from_slice(&plane);
            let mirror = b * nx + a;
            for i in 0..m {
                for j in 0..m {
                    values[mirror * mm + j * m + i] = plane[i * m + j];
                }
            }
        }
        Ok(Self {
            k_points: m,
            radius,
            values,
        })
    }

    /// `Σ_x ∫∫dk W`.
    pub fn normalization(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.weight()
    }

    /// `Σ_x ∫∫dk max(0, -W)`.
    pub fn negative_volume(&self) -> f64 {
        self.values.iter().map(|&v| (-v).max(0.0)).sum::<f64>() * self.weight()
    }

    /// Number of grid cells with `W < -threshold`.
    pub fn negative_cells(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v < -threshold).count()
    }

    /// `∫∫dk W(k, x)` for every enlarged `x`, layout `(X1, X2)`.
    pub fn position_marginal(&self) -> Vec<f64> {
        let nx = self.x_count();
        (0..nx * nx)
            .map(|xi| self.plane(xi).iter().sum::<f64>() * self.weight())
            .collect()
    }

    /// `Σ_x W(k, x)` for every grid momentum, layout `(k1, k2)`.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let nx = self.x_count();
        let mm = self.k_points * self.k_points;
        let mut out = vec![0.0; mm];
        for xi in 0..nx * nx {
            for (o, v) in out.iter_mut().zip(self.plane(xi)) {
                *o += v;
            }
        }
        out
    }

    /// `⟨s|ρ|s'⟩ = ∫∫dk W(k, (s+s')/2) e^{ik·(s-s')}` by the grid quadrature.
    pub fn reconstruct(&self, s: [i64; 2], sp: [i64; 2]) -> Result<Complex64> {
        let x = [
            EnlargedIndex::from_twice(s[0] + sp[0]),
            EnlargedIndex::from_twice(s[1] + sp[1]),
        ];
        let w = 2 * self.radius as i64;
        if x.iter().any(|xi| xi.twice.abs() > w) {
            return Err(Error::OutOfRange("midpoint outside the grid".into()));
        }
        let k = Self::k_nodes(self.k_points);
        let m = self.k_points;
        let d = [(s[0] - sp[0]) as f64, (s[1] - sp[1]) as f64];
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..m {
            let p1 = Complex64::from_polar(1.0, k[i] * d[0]);
            for j in 0..m {
                total += p1 * Complex64::from_polar(self.get(x, [i, j]), k[j] * d[1]);
            }
        }
        Ok(total * self.weight())
    }
}

/// All momenta for one `(X1, X2)`, as `E1 G E2ᵀ` with `G[s1][s2] = ρ(s1, s2, X1-s1, X2-s2)`.
fn wigner_plane(rho: &DensityMatrix, k: &[f64], x1: i64, x2: i64, n: usize) -> Result<Vec<f64>> {
    let r = rho.radius() as i64;
    let m = k.len();
    let c1: Vec<i64> = chord(r, x1).collect();
    let c2: Vec<i64> = chord(r, x2).collect();
    let _ = n;
    let phase = |kv: f64, s: i64, x: i64| Complex64::from_polar(1.0, -kv * (2 * s - x) as f64);
    // H[s1][k2] = Σ_{s2} G[s1][s2] e^{-ik2(2s2-X2)}
    let mut h = vec![Complex64::new(0.0, 0.0); c1.len() * m];
    for (a, &s1) in c1.iter().enumerate() {
        let row: Vec<Complex64> = c2
            .iter()
            .map(|&s2| rho.get(s1, s2, x1 - s1, x2 - s2))
            .collect();
        for (j, &kv) in k.iter().enumerate() {
            h[a * m + j] = c2
                .iter()
                .zip(&row)
                .map(|(&s2, g)| g * phase(kv, s2, x2))
                .sum();
        }
    }
    let mut out = vec![0.0; m * m];
    for (i, &kv) in k.iter().enumerate() {
        let e1: Vec<Complex64> = c1.iter().map(|&s1| phase(kv, s1, x1)).collect();
        for j in 0..m {
            let z: Complex64 = e1.iter().enumerate().map(|(a, e)| e * h[a * m + j]).sum();
            out[i * m + j] = real_part(z / FOUR_PI_SQ)?;
        }
    }
    if x1 == x2 {
        for i in 0..m {
            for j in 0..i {
                out[i * m + j] = out[j * m + i];
            }
        }
    }
    Ok(out)
}

/// `W` over the enlarged square at one momentum pair, layout `(X1, X2)`.
pub fn wigner_slice(rho: &DensityMatrix, k: [f64; 2]) -> Result<Vec<f64>> {
    let w = 2 * rho.radius() as i64;
    let xs: Vec<i64> = (-w..=w).collect();
    xs.iter()
        .flat_map(|&a| xs.iter().map(move |&b| (a, b)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(a, b)| {
            wigner_from_rho(
                rho,
                k,
                [EnlargedIndex::from_twice(a), EnlargedIndex::from_twice(b)],
            )
        })
        .collect()
}

/// Momentum pair `(Δk/2, -Δk/2)` used for fixed-`Δk` panels.
pub fn delta_k_point(delta_k: f64) -> [f64; 2] {
    [delta_k / 2.0, -delta_k / 2.0]
}
