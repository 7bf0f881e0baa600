//! Closed-form time evolution of the two-walker density matrix.
//!
//! Each element is the six-fold Bessel series
//!
//! ```text
//! ρ(s1,s2;s1',s2') = i^{s1-s1'+s2-s2'} e^{-2t_D} Σ_{n1..n6} (-1)^{n4+n5}
//!     J_{s1+n1+n2+n5} J_{s1'+n1+n3+n4} J_{s2+n3-n5+n6} J_{s2'+n2-n4+n6} Π I_{n_i}
//! ```
//!
//! evaluated in two stages. The I-part only enters through the offsets
//! `A = n1+n2+n5`, `B = n1+n3+n4`, `C = n3-n5+n6`, `D = n2-n4+n6`, and
//! `A + C = B + D` identically, so the bath sum collapses into a real kernel
//! `K(A, B, C)` built once per time. The four J factors are then contracted
//! against `K` one particle index at a time.
//!
//! The kernel weights alternate in sign and their absolute sum is `e^{4 t_D}`,
//! so rounding in the kernel grows like `e^{4 t_D} ε`; the estimate is
//! reported in [`EvolutionReport`].

use num_complex::Complex64;
use rayon::prelude::*;

use crate::bessel::{JTable, ScaledITable};
use crate::error::{Error, Result};
use crate::lattice::{DensityMatrix, ReducedDensity, SimParams, Window};

/// Largest number of complex elements a windowed matrix may hold.
pub const MAX_MATRIX_ELEMENTS: usize = 1 << 25;
/// Largest number of entries in the dense bath kernel.
pub const MAX_KERNEL_ENTRIES: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionRequest {
    pub params: SimParams,
    pub window: Window,
    /// Sites `(s1⁰, s2⁰)` of the localized initial pair.
    pub initial: (i64, i64),
}

impl EvolutionRequest {
    pub fn new(params: SimParams, window: Window) -> Self {
        Self {
            params,
            window,
            initial: (0, 0),
        }
    }

    pub fn with_initial(mut self, s1: i64, s2: i64) -> Self {
        self.initial = (s1, s2);
        self
    }

    fn validate(&self) -> Result<()> {
        let half = (self.window.radius / 2) as i64;
        let (a, b) = self.initial;
        if a.abs() > half || b.abs() > half {
            return Err(Error::OutOfRange(format!(
                "initial sites ({a}, {b}) must lie within half the window radius {}",
                self.window.radius
            )));
        }
        check_matrix_budget(&self.window)
    }
}

fn check_matrix_budget(window: &Window) -> Result<()> {
    let n = window.sites();
    let elements = n.checked_pow(4).unwrap_or(usize::MAX);
    if elements > MAX_MATRIX_ELEMENTS {
        return Err(Error::Resource(format!(
            "radius {} needs {elements} matrix elements (limit {MAX_MATRIX_ELEMENTS})",
            window.radius
        )));
    }
    Ok(())
}

/// Diagnostics from one analytic evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionReport {
    /// Terms of the six-fold series kept after pruning.
    pub kernel_terms: usize,
    /// Pessimistic rounding scale of the alternating bath sum.
    pub rounding_estimate: f64,
    /// Largest disagreement between symmetry-related elements before the
    /// orbit representative was copied out.
    pub symmetry_defect: f64,
}

/// Real bath kernel `K(A, B, C)` on a dense box, including the `e^{-2t_D}`
/// prefactor and the `(-1)^{n4+n5}` sign.
#[derive(Debug, Clone)]
pub(crate) struct BathKernel {
    pub(crate) lo: [i64; 3],
    pub(crate) hi: [i64; 3],
    span: i64,
    pub(crate) half: i64,
    data: Vec<f64>,
    pub(crate) terms: usize,
    pub(crate) abs_sum: f64,
}

impl BathKernel {
    #[inline]
    fn slot(&self, a: i64, b: i64, c: i64) -> usize {
        let s = self.span;
        (((a + self.half) * s + (b + self.half)) * s + (c + self.half)) as usize
    }

    #[inline]
    pub(crate) fn get(&self, a: i64, b: i64, c: i64) -> f64 {
        self.data[self.slot(a, b, c)]
    }

    pub(crate) fn build(t_d: f64, n_i: usize, tol: f64) -> Result<Self> {
        let half = 3 * n_i as i64;
        let span = 2 * half + 1;
        let entries = (span as usize).pow(3);
        if entries > MAX_KERNEL_ENTRIES {
            return Err(Error::Resource(format!(
                "series cutoff {n_i} needs a kernel of {entries} entries (limit {MAX_KERNEL_ENTRIES})"
            )));
        }
        // Six factors e^{-t_D/3} I_n(t_D) carry the e^{-2 t_D} prefactor exactly.
        let table = ScaledITable::new(t_d, n_i)?;
        let lift = (2.0 * t_d / 3.0).exp();
        let ni = n_i as i64;
        let factor: Vec<f64> = (-ni..=ni).map(|n| table.get(n) * lift).collect();
        let f = |n: i64| factor[(n + ni) as usize];
        let fmax = f(0);
        let threshold = tol / ((2 * n_i + 1) as f64).powi(2);

        // Largest |n| whose factor keeps `weight * f(n) * fmax^rest` above threshold.
        let reach = |weight: f64, rest: i32| -> i64 {
            let bound = weight.abs() * fmax.powi(rest);
            let mut m = -1;
            for n in 0..=ni {
                if bound * f(n) >= threshold {
                    m = n;
                } else {
                    break;
                }
            }
            m
        };
        let sign = |n: i64| if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };

        let mut kernel = BathKernel {
            lo: [half; 3],
            hi: [-half; 3],
            span,
            half,
            data: vec![0.0; entries],
            terms: 0,
            abs_sum: 0.0,
        };
        let r1 = reach(1.0, 5);
        for n1 in -r1..=r1 {
            let p1 = f(n1);
            let r5 = reach(p1, 4);
            for n5 in -r5..=r5 {
                let p15 = p1 * f(n5) * sign(n5);
                let r3 = reach(p15, 3);
                for n3 in -r3..=r3 {
                    let p = p15 * f(n3);
                    let (a0, b0, c0) = (n1 + n5, n1 + n3, n3 - n5);
                    let r2 = reach(p, 2);
                    for n2 in -r2..=r2 {
                        let q = p * f(n2);
                        let a = a0 + n2;
                        let r4 = reach(q, 1);
                        for n4 in -r4..=r4 {
                            let r = q * f(n4) * sign(n4);
                            let b = b0 + n4;
                            let r6 = reach(r, 0);
                            for n6 in -r6..=r6 {
                                let v = r * f(n6);
                                let c = c0 + n6;
                                let slot = kernel.slot(a, b, c);
                                kernel.data[slot] += v;
                                kernel.abs_sum += v.abs();
                                kernel.terms += 1;
                                for (k, x) in [a, b, c].into_iter().enumerate() {
                                    kernel.lo[k] = kernel.lo[k].min(x);
                                    kernel.hi[k] = kernel.hi[k].max(x);
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(kernel)
    }
}

/// `i^k` for integer `k`.
#[inline]
pub(crate) fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Evaluate the closed-form series on the request's window.
pub fn evolve_analytic(req: &EvolutionRequest) -> Result<DensityMatrix> {
    evolve_analytic_with_report(req).map(|(rho, _)| rho)
}

pub fn evolve_analytic_with_report(
    req: &EvolutionRequest,
) -> Result<(DensityMatrix, EvolutionReport)> {
    req.validate()?;
    let window = req.window;
    let t_omega = req.params.t_omega();
    let t_d = req.params.t_d();
    let kernel = BathKernel::build(t_d, window.series_cutoff_i, window.tol)?;

    let w = window.radius as i64;
    let n = window.sites();
    let (o1, o2) = req.initial;
    let reach = w + o1.abs().max(o2.abs()) + kernel.half + 1;
    let jt = JTable::new(t_omega, reach as usize)?;
    let jband = jt.symmetric_band();
    let j = |k: i64| -> f64 {
        if k.abs() > reach {
            0.0
        } else {
            jband[(k + reach) as usize]
        }
    };

    let [a_lo, b_lo, c_lo] = kernel.lo;
    let [a_hi, b_hi, c_hi] = kernel.hi;
    let sites: Vec<i64> = window.site_range().collect();
    let n2 = n * n;
    let n3 = n2 * n;

    // real part before the i^k phase, layout (s1, s2, s1', s2')
    let mut real = vec![0.0_f64; n3 * n];
    if kernel.terms > 0 {
        for a in a_lo..=a_hi {
            // X[c][s1'][s2'] = Σ_B K(a,B,c) J(u1'+B) J(u2'+a+c-B)
            let c_count = (c_hi - c_lo + 1) as usize;
            let mut x = vec![0.0_f64; c_count * n2];
            x.par_chunks_mut(n2).enumerate().for_each(|(ci, block)| {
                let c = c_lo + ci as i64;
                for b in b_lo..=b_hi {
                    let k = kernel.get(a, b, c);
                    if k == 0.0 {
                        continue;
                    }
                    for (i1p, &s1p) in sites.iter().enumerate() {
                        let jb = j(s1p - o1 + b);
                        if jb == 0.0 {
                            continue;
                        }
                        let kb = k * jb;
                        let row = &mut block[i1p * n..(i1p + 1) * n];
                        for (i2p, &s2p) in sites.iter().enumerate() {
                            row[i2p] += kb * j(s2p - o2 + a + c - b);
                        }
                    }
                }
            });
            // Y[s2][s1'][s2'] = Σ_C J(u2+C) X[C][s1'][s2']
            let mut y = vec![0.0_f64; n3];
            y.par_chunks_mut(n2).enumerate().for_each(|(i2, block)| {
                let s2 = sites[i2];
                for ci in 0..c_count {
                    let jc = j(s2 - o2 + c_lo + ci as i64);
                    if jc == 0.0 {
                        continue;
                    }
                    let src = &x[ci * n2..(ci + 1) * n2];
                    for (dst, &v) in block.iter_mut().zip(src) {
                        *dst += jc * v;
                    }
                }
            });
            // R[s1][..] += J(u1+a) Y
            real.par_chunks_mut(n3).enumerate().for_each(|(i1, block)| {
                let ja = j(sites[i1] - o1 + a);
                if ja == 0.0 {
                    return;
                }
                for (dst, &v) in block.iter_mut().zip(&y) {
                    *dst += ja * v;
                }
            });
        }
    }

    let exchange = o1 == o2;
    let symmetry_defect = canonicalize_orbits(&mut real, n, exchange);
    let rounding_estimate = kernel.abs_sum * f64::EPSILON * 64.0;
    if symmetry_defect > 1e-8 + 1e3 * rounding_estimate {
        return Err(Error::Numerical(format!(
            "symmetry defect {symmetry_defect:e} exceeds the rounding scale {rounding_estimate:e}"
        )));
    }

    let mut rho = DensityMatrix::zeros(window);
    let data = rho.data_mut();
    for (i1, &s1) in sites.iter().enumerate() {
        for (i2, &s2) in sites.iter().enumerate() {
            for (i1p, &s1p) in sites.iter().enumerate() {
                let base = ((i1 * n + i2) * n + i1p) * n;
                for (i2p, &s2p) in sites.iter().enumerate() {
                    let v = real[base + i2p];
                    let ph = i_pow(s1 - s1p + s2 - s2p);
                    data[base + i2p] = Complex64::new(ph.re * v, ph.im * v);
                }
            }
        }
    }
    Ok((
        rho,
        EvolutionReport {
            kernel_terms: kernel.terms,
            rounding_estimate,
            symmetry_defect,
        },
    ))
}

/// Replace every element by the value at its orbit representative under
/// Hermitian conjugation (and particle exchange when enabled); returns the
/// largest discrepancy that was overwritten.
fn canonicalize_orbits(real: &mut [f64], n: usize, exchange: bool) -> f64 {
    let at = |i1: usize, i2: usize, j1: usize, j2: usize| ((i1 * n + i2) * n + j1) * n + j2;
    let mut defect = 0.0_f64;
    for i1 in 0..n {
        for i2 in 0..n {
            for j1 in 0..n {
                for j2 in 0..n {
                    let me = [i1, i2, j1, j2];
                    let mut orbit = vec![me, [j1, j2, i1, i2]];
                    if exchange {
                        orbit.push([i2, i1, j2, j1]);
                        orbit.push([j2, j1, i2, i1]);
                    }
                    let rep = *orbit.iter().min().unwrap();
                    if rep != me {
                        let src = real[at(rep[0], rep[1], rep[2], rep[3])];
                        let dst = &mut real[at(i1, i2, j1, j2)];
                        defect = defect.max((src - *dst).abs());
                        *dst = src;
                    }
                }
            }
        }
    }
    defect
}

/// Dissipation-free product solution `Π_j i^{s_j - s_j'} J_{s_j} J_{s_j'}`.
pub fn evolve_unitary(t_omega: f64, window: &Window) -> Result<DensityMatrix> {
    check_matrix_budget(window)?;
    let jt = JTable::new(t_omega, window.radius)?;
    let mut rho = DensityMatrix::zeros(*window);
    let r = window.radius as i64;
    for s1 in -r..=r {
        for s2 in -r..=r {
            for s1p in -r..=r {
                for s2p in -r..=r {
                    let first = jt.get(s1) * jt.get(s1p);
                    let second = jt.get(s2) * jt.get(s2p);
                    let v = first * second;
                    let ph = i_pow(s1 - s1p + s2 - s2p);
                    *rho.get_mut(s1, s2, s1p, s2p) = Complex64::new(ph.re * v, ph.im * v);
                }
            }
        }
    }
    Ok(rho)
}

/// Partial trace over the second walker.
pub fn reduce_one_particle(rho: &DensityMatrix) -> ReducedDensity {
    let mut out = ReducedDensity::zeros(*rho.window());
    let r = rho.radius() as i64;
    for s in -r..=r {
        for sp in -r..=r {
            *out.get_mut(s, sp) = (-r..=r).map(|s2| rho.get(s, s2, sp, s2)).sum();
        }
    }
    out
}

/// `⟨s|ρ⁽¹⁾|s'⟩ = i^{s-s'} Σ_n e^{-t_D} I_n(t_D) J_{s+n}(t_Ω) J_{s'+n}(t_Ω)`.
pub fn one_particle_analytic(params: &SimParams, window: &Window) -> Result<ReducedDensity> {
    let n_i = window.series_cutoff_i as i64;
    let r = window.radius as i64;
    let jt = JTable::new(params.t_omega(), (r + n_i + 1) as usize)?;
    let it = ScaledITable::new(params.t_d(), n_i as usize)?;
    let mut out = ReducedDensity::zeros(*window);
    for s in -r..=r {
        for sp in -r..=r {
            let v: f64 = (-n_i..=n_i)
                .map(|n| it.get(n) * jt.get(s + n) * jt.get(sp + n))
                .sum();
            let ph = i_pow(s - sp);
            *out.get_mut(s, sp) = Complex64::new(ph.re * v, ph.im * v);
        }
    }
    Ok(out)
}

/// Classical lattice random walk `P_t(s) = e^{-t_D} I_s(t_D)`.
pub fn classical_profile(s: i64, t_d: f64) -> Result<f64> {
    if !(t_d >= 0.0) {
        return Err(Error::Domain(format!(
            "t_D must be non-negative, got {t_d}"
        )));
    }
    crate::bessel::bessel_i_scaled(s, t_d)
}

/// Joint site occupation `P(s1, s2) = ⟨s1,s2|ρ|s1,s2⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityProfile {
    radius: usize,
    values: Vec<f64>,
}

impl ProbabilityProfile {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn sites(&self) -> usize {
        2 * self.radius + 1
    }

    /// Row-major `(s1, s2)` values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, s1: i64, s2: i64) -> f64 {
        let w = self.radius as i64;
        self.values[((s1 + w) as usize) * self.sites() + (s2 + w) as usize]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Marginal of the first walker.
    pub fn marginal(&self) -> Vec<f64> {
        let n = self.sites();
        (0..n)
            .map(|i| self.values[i * n..(i + 1) * n].iter().sum())
            .collect()
    }

    /// Largest `|P(s1,s2) - P1(s1) P1(s2)|` against the product of marginals.
    pub fn factorization_defect(&self) -> f64 {
        let m = self.marginal();
        let n = self.sites();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for k in 0..n {
                worst = worst.max((self.values[i * n + k] - m[i] * m[k]).abs());
            }
        }
        worst
    }
}

pub fn probability_profile(rho: &DensityMatrix) -> ProbabilityProfile {
    let r = rho.radius() as i64;
    let mut values = Vec::with_capacity(rho.dim());
    for s1 in -r..=r {
        for s2 in -r..=r {
            values.push(rho.get(s1, s2, s1, s2).re);
        }
    }
    ProbabilityProfile {
        radius: rho.radius(),
        values,
    }
}

/// Apply `m` (n×n, row-major) along one axis of the 4-index tensor; `conj`
/// uses `conj(m)` as is required on the ket-adjoint side.
fn apply_axis(
    data: &[Complex64],
    n: usize,
    axis: usize,
    m: &[Complex64],
    conj: bool,
) -> Vec<Complex64> {
    let stride = n.pow(3 - axis as u32);
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    out.par_chunks_mut(stride * n)
        .enumerate()
        .for_each(|(outer, dst)| {
            let src = &data[outer * stride * n..(outer + 1) * stride * n];
            for i in 0..n {
                let row = &mut dst[i * stride..(i + 1) * stride];
                for k in 0..n {
                    let mut c = m[i * n + k];
                    if conj {
                        c = c.conj();
                    }
                    if c.re == 0.0 && c.im == 0.0 {
                        continue;
                    }
                    for (d, s) in row.iter_mut().zip(&src[k * stride..(k + 1) * stride]) {
                        *d += c * s;
                    }
                }
            }
        });
    out
}

/// `U₁ ρ U₁†` with `⟨s1,s2|U₁|s1',s2'⟩ = i^{s1+s2+s1'+s2'} J_{s1-s1'}(t_Ω) J_{s2-s2'}(t_Ω)`,
/// truncated to the window.
pub fn u1_transform(rho: &DensityMatrix, t_omega: f64) -> Result<DensityMatrix> {
    let n = rho.sites();
    let w = rho.radius() as i64;
    let jt = JTable::new(t_omega, 2 * rho.radius())?;
    let mut u = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, s) in (-w..=w).enumerate() {
        for (k, a) in (-w..=w).enumerate() {
            u[i * n + k] = i_pow(s + a) * jt.get(s - a);
        }
    }
    let mut data = apply_axis(rho.data(), n, 0, &u, false);
    data = apply_axis(&data, n, 1, &u, false);
    data = apply_axis(&data, n, 2, &u, true);
    data = apply_axis(&data, n, 3, &u, true);
    DensityMatrix::from_data(*rho.window(), data)
}

/// `⟨k1,k2|ρ|k1,k2⟩ = (2π)^{-2} Σ e^{-ik·s} e^{ik·s'} ρ(s,s')` from the windowed matrix.
pub fn momentum_diagonal(rho: &DensityMatrix, k1: f64, k2: f64) -> f64 {
    let r = rho.radius() as i64;
    let n = rho.sites();
    let e1: Vec<Complex64> = (-r..=r)
        .map(|s| Complex64::from_polar(1.0, k1 * s as f64))
        .collect();
    let e2: Vec<Complex64> = (-r..=r)
        .map(|s| Complex64::from_polar(1.0, k2 * s as f64))
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for i1 in 0..n {
        for i2 in 0..n {
            let bra = (e1[i1] * e2[i2]).conj();
            let mut inner = Complex64::new(0.0, 0.0);
            let row = (i1 * n + i2) * n * n;
            for j1 in 0..n {
                for j2 in 0..n {
                    inner += rho.data()[row + j1 * n + j2] * e1[j1] * e2[j2];
                }
            }
            total += bra * inner;
        }
    }
    total.re / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
}

/// Frobenius distance between `ρ` and `ρ⁽¹⁾ ⊗ ρ⁽¹⁾`.
pub fn factorization_distance(rho: &DensityMatrix) -> Result<f64> {
    let one = reduce_one_particle(rho);
    let product = DensityMatrix::product(&one, &one)?;
    Ok(rho
        .data()
        .iter()
        .zip(product.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::select_window;
    use approx::assert_abs_diff_eq;

    fn analytic(t_omega: f64, t_d: f64, tol: f64) -> DensityMatrix {
        let p = SimParams::from_dimensionless(t_omega, t_d).unwrap();
        let w = select_window(&p, tol).unwrap();
        evolve_analytic(&EvolutionRequest::new(p, w)).unwrap()
    }

    #[test]
    fn initial_state_is_localized() {
        let rho = analytic(0.0, 0.0, 1e-10);
        assert_eq!(rho.get(0, 0, 0, 0), Complex64::new(1.0, 0.0));
        let others: f64 = rho.data().iter().map(|z| z.norm()).sum::<f64>() - 1.0;
        assert_eq!(others, 0.0);
    }

    #[test]
    fn no_dissipation_matches_product_form() {
        let p = SimParams::from_dimensionless(1.7, 0.0).unwrap();
        let w = select_window(&p, 1e-10).unwrap();
        let rho = evolve_analytic(&EvolutionRequest::new(p, w)).unwrap();
        let prod = evolve_unitary(1.7, &w).unwrap();
        assert!(rho.max_abs_diff(&prod).unwrap() < 1e-14);
    }

    #[test]
    fn unitary_profile_is_product_of_bessels() {
        let p = SimParams::from_dimensionless(2.0, 0.0).unwrap();
        let w = select_window(&p, 1e-10).unwrap();
        let rho = evolve_unitary(2.0, &w).unwrap();
        let prof = probability_profile(&rho);
        for s1 in -4i64..=4 {
            for s2 in -4i64..=4 {
                let want = crate::bessel::bessel_j(s1, 2.0).unwrap().powi(2)
                    * crate::bessel::bessel_j(s2, 2.0).unwrap().powi(2);
                assert_abs_diff_eq!(prof.get(s1, s2), want, epsilon = 1e-15);
            }
        }
        let t0 = evolve_unitary(0.0, &w).unwrap();
        assert_eq!(t0.get(0, 0, 0, 0).re, 1.0);
        assert_eq!(t0.trace().re, 1.0);
    }

    #[test]
    fn trace_and_symmetry() {
        for &(to, td) in &[(0.5, 0.5), (1.0, 1.0), (2.0, 0.5), (0.0, 2.0)] {
            let rho = analytic(to, td, 1e-10);
            let tr = rho.trace();
            assert!((tr.re - 1.0).abs() <= 1e-10, "({to},{td}) trace {tr}");
            assert_eq!(tr.im, 0.0);
            assert_eq!(rho.hermiticity_defect(), 0.0);
            assert_eq!(rho.exchange_defect(), 0.0);
        }
    }

    #[test]
    fn shifted_initial_condition_translates() {
        let p = SimParams::from_dimensionless(0.8, 0.6).unwrap();
        let w = select_window(&p, 1e-10).unwrap();
        let base = evolve_analytic(&EvolutionRequest::new(p, w)).unwrap();
        let moved = evolve_analytic(&EvolutionRequest::new(p, w).with_initial(2, -1)).unwrap();
        let r = w.radius as i64 - 3;
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in [-1i64, 0, 2] {
                    for s2p in [-2i64, 0, 1] {
                        let a = moved.get(s1 + 2, s2 - 1, s1p + 2, s2p - 1);
                        let b = base.get(s1, s2, s1p, s2p);
                        assert!((a - b).norm() < 1e-14);
                    }
                }
            }
        }
        assert_eq!(moved.hermiticity_defect(), 0.0);
        assert!(
            evolve_analytic(&EvolutionRequest::new(p, w).with_initial(w.radius as i64, 0)).is_err()
        );
    }

    #[test]
    fn partial_trace_matches_one_particle_series() {
        let p = SimParams::from_dimensionless(1.0, 1.0).unwrap();
        let w = select_window(&p, 1e-10).unwrap();
        let rho = evolve_analytic(&EvolutionRequest::new(p, w)).unwrap();
        let reduced = reduce_one_particle(&rho);
        assert!((reduced.trace() - rho.trace()).norm() < 1e-12);
        let direct = one_particle_analytic(&p, &w).unwrap();
        assert!(reduced.max_abs_diff(&direct) < 1e-8);
        assert!(reduced.hermiticity_defect() < 1e-15);
    }

    #[test]
    fn one_particle_without_hopping_is_classical() {
        let p = SimParams::from_dimensionless(0.0, 3.0).unwrap();
        let w = select_window(&p, 1e-10).unwrap();
        let one = one_particle_analytic(&p, &w).unwrap();
        let tr = one.trace().re;
        for s in w.site_range() {
            for sp in w.site_range() {
                let v = one.get(s, sp);
                if s == sp {
                    assert_abs_diff_eq!(v.re, classical_profile(s, 3.0).unwrap(), epsilon = 1e-14);
                } else {
                    assert_eq!(v.norm(), 0.0);
                }
                assert!(v.norm() <= tr);
            }
        }
    }

    /// Classical RK4 for dP_s/dt = D (P_{s+1} + P_{s-1} - 2 P_s); with t_D = 2Dt
    /// the profile at t_D = 4 is reached with D = 1/2, t = 4.
    #[test]
    fn classical_profile_matches_master_equation() {
        let half = 60usize;
        let mut p = vec![0.0_f64; 2 * half + 1];
        p[half] = 1.0;
        let d = 0.5;
        let dt = 1e-3_f64;
        let rhs = |p: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; p.len()];
            for i in 1..p.len() - 1 {
                out[i] = d * (p[i + 1] + p[i - 1] - 2.0 * p[i]);
            }
            out
        };
        let axpy = |p: &[f64], k: &[f64], h: f64| -> Vec<f64> {
            p.iter().zip(k).map(|(a, b)| a + h * b).collect()
        };
        for _ in 0..(4.0 / dt).round() as usize {
            let k1 = rhs(&p);
            let k2 = rhs(&axpy(&p, &k1, dt / 2.0));
            let k3 = rhs(&axpy(&p, &k2, dt / 2.0));
            let k4 = rhs(&axpy(&p, &k3, dt));
            for i in 0..p.len() {
                p[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        for s in -10i64..=10 {
            let want = p[(s + half as i64) as usize];
            assert_abs_diff_eq!(classical_profile(s, 4.0).unwrap(), want, epsilon = 1e-11);
        }
        assert_eq!(classical_profile(0, 0.0).unwrap(), 1.0);
        assert_eq!(
            classical_profile(3, 2.0).unwrap(),
            classical_profile(-3, 2.0).unwrap()
        );
        assert!(classical_profile(0, -1.0).is_err());
    }

    #[test]
    fn profile_symmetry_and_positivity() {
        let rho = analytic(1.0, 1.5, 1e-10);
        let prof = probability_profile(&rho);
        let r = prof.radius() as i64;
        for s1 in -r..=r {
            for s2 in -r..=r {
                assert_eq!(prof.get(s1, s2), prof.get(s2, s1));
                assert!(prof.get(s1, s2) >= -1e-10);
            }
        }
        let t0 = probability_profile(&analytic(0.0, 0.0, 1e-10));
        assert_eq!(t0.get(0, 0), 1.0);
        assert_eq!(t0.total(), 1.0);
    }

    #[test]
    fn strong_bath_profile_does_not_factorize() {
        let tol = 1e-10;
        let rho = analytic(0.0, 4.0, tol);
        let prof = probability_profile(&rho);
        let mut worst = 0.0_f64;
        for s1 in -6i64..=6 {
            for s2 in -6i64..=6 {
                let classical =
                    classical_profile(s1, 4.0).unwrap() * classical_profile(s2, 4.0).unwrap();
                worst = worst.max((prof.get(s1, s2) - classical).abs());
            }
        }
        assert!(worst > 10.0 * tol, "deviation {worst}");
    }

    #[test]
    fn u1_at_zero_time_is_site_parity() {
        let rho = analytic(1.0, 0.5, 1e-10);
        let flipped = u1_transform(&rho, 0.0).unwrap();
        let r = rho.radius() as i64;
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in -r..=r {
                    for s2p in -r..=r {
                        let sign = if (s1 + s2 + s1p + s2p).rem_euclid(2) == 0 {
                            1.0
                        } else {
                            -1.0
                        };
                        let want = rho.get(s1, s2, s1p, s2p) * sign;
                        assert!((flipped.get(s1, s2, s1p, s2p) - want).norm() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn momentum_diagonal_is_conserved() {
        let rho = analytic(1.0, 1.0, 1e-10);
        let want = 1.0 / (4.0 * std::f64::consts::PI.powi(2));
        for &(k1, k2) in &[(0.0, 0.0), (0.7, -2.1), (3.0, 1.1)] {
            assert_abs_diff_eq!(momentum_diagonal(&rho, k1, k2), want, epsilon = 1e-8);
        }
    }

    #[test]
    fn bath_correlates_the_walkers() {
        let tol = 1e-10;
        let rho = analytic(1.0, 1.0, tol);
        assert!(factorization_distance(&rho).unwrap() > 1e3 * tol);
        let free = analytic(1.0, 0.0, tol);
        assert!(factorization_distance(&free).unwrap() < 1e-12);
    }

    #[test]
    fn matrix_budget_guard() {
        let w = Window::new(60, 0, 1e-8).unwrap();
        let p = SimParams::from_dimensionless(1.0, 0.0).unwrap();
        assert!(matches!(
            evolve_analytic(&EvolutionRequest::new(p, w)),
            Err(Error::Resource(_))
        ));
    }
}
