//! Geometric quantum discord lower bound on mirror bipartitions.
//!
//! For each `s > 0` the lattice is split into `A = s`, `B = -s` and the rest
//! `φ`. Tracing out `φ` leaves a two-qubit block over `{AA, AB, BA, BB}` whose
//! Bloch decomposition feeds the closed-form lower bound
//! `(|x|² + ‖T‖² - λ_max(x xᵀ + T Tᵀ)) / 4`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::DensityMatrix;

/// Blocks with a smaller trace are treated as empty.
pub const TRACE_FLOOR: f64 = 1e-10;

pub type Mat4 = [[Complex64; 4]; 4];
pub type Mat9 = [[Complex64; 9]; 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Label {
    A,
    B,
    Phi,
}

/// Order of the nine product labels.
const LABELS: [(Label, Label); 9] = [
    (Label::A, Label::A),
    (Label::A, Label::B),
    (Label::A, Label::Phi),
    (Label::B, Label::A),
    (Label::B, Label::B),
    (Label::B, Label::Phi),
    (Label::Phi, Label::A),
    (Label::Phi, Label::B),
    (Label::Phi, Label::Phi),
];

/// Positions of `{AA, AB, BA, BB}` inside the nine labels.
const QUBIT_SLOTS: [usize; 4] = [0, 1, 3, 4];

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorBlock {
    pub s: usize,
    pub rho9: Mat9,
    pub rho4: Mat4,
    pub block_trace: f64,
}

/// Sites a label may take: a single site for `A`/`B`, all other window sites for `φ`.
fn label_sites(label: Label, s: i64, radius: i64) -> Vec<i64> {
    match label {
        Label::A => vec![s],
        Label::B => vec![-s],
        Label::Phi => (-radius..=radius).filter(|x| x.abs() != s).collect(),
    }
}

/// Matrix element between labelled coordinates; a `φ` coordinate is traced
/// out, so it must be `φ` on both sides and carries the same site.
fn labelled_element(
    rho: &DensityMatrix,
    s: i64,
    left: (Label, Label),
    right: (Label, Label),
) -> Complex64 {
    let r = rho.radius() as i64;
    let pairs = |l: Label, rr: Label| -> Option<Vec<(i64, i64)>> {
        match (l, rr) {
            (Label::Phi, Label::Phi) => Some(
                label_sites(Label::Phi, s, r)
                    .into_iter()
                    .map(|x| (x, x))
                    .collect(),
            ),
            (Label::Phi, _) | (_, Label::Phi) => None,
            _ => Some(vec![(label_sites(l, s, r)[0], label_sites(rr, s, r)[0])]),
        }
    };
    let (Some(first), Some(second)) = (pairs(left.0, right.0), pairs(left.1, right.1)) else {
        return Complex64::new(0.0, 0.0);
    };
    let mut total = Complex64::new(0.0, 0.0);
    for &(s1, s1p) in &first {
        for &(s2, s2p) in &second {
            total += rho.get(s1, s2, s1p, s2p);
        }
    }
    total
}

/// Mirror bipartition at site `s` (`1 ≤ s ≤ W`).
pub fn reduce_bipartition(rho: &DensityMatrix, s: usize) -> Result<MirrorBlock> {
    if s == 0 || s > rho.radius() {
        return Err(Error::OutOfRange(format!(
            "mirror site {s} outside 1..={}",
            rho.radius()
        )));
    }
    let si = s as i64;
    let zero = Complex64::new(0.0, 0.0);
    let mut rho9 = [[zero; 9]; 9];
    for (i, &l) in LABELS.iter().enumerate() {
        for (j, &r) in LABELS.iter().enumerate() {
            rho9[i][j] = labelled_element(rho, si, l, r);
        }
    }
    let mut rho4 = [[zero; 4]; 4];
    for (a, &i) in QUBIT_SLOTS.iter().enumerate() {
        for (b, &j) in QUBIT_SLOTS.iter().enumerate() {
            rho4[a][b] = rho9[i][j];
        }
    }
    let block_trace = (0..4).map(|i| rho4[i][i].re).sum();
    Ok(MirrorBlock {
        s,
        rho9,
        rho4,
        block_trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochDecomposition {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub corr: [[f64; 3]; 3],
}

fn pauli(i: usize) -> [[Complex64; 2]; 2] {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let im = Complex64::new(0.0, 1.0);
    match i {
        0 => [[o, one], [one, o]],
        1 => [[o, -im], [im, o]],
        2 => [[one, o], [o, -one]],
        _ => [[one, o], [o, one]],
    }
}

/// `Tr(ρ (a ⊗ b))` with the qubit of the first walker as the high index.
fn expect(rho: &Mat4, a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            let op = a[j / 2][i / 2] * b[j % 2][i % 2];
            total += rho[i][j] * op;
        }
    }
    total
}

/// Pauli decomposition of a two-qubit block; with `normalize` the block is
/// divided by its trace first.
pub fn bloch_decompose(rho4: &Mat4, normalize: bool) -> Result<BlochDecomposition> {
    let mut rho = *rho4;
    if normalize {
        let trace: f64 = (0..4).map(|i| rho4[i][i].re).sum();
        if !(trace > TRACE_FLOOR) {
            return Err(Error::EmptyBlock {
                trace,
                floor: TRACE_FLOOR,
            });
        }
        for row in rho.iter_mut() {
            for z in row.iter_mut() {
                *z /= trace;
            }
        }
    }
    let id = pauli(3);
    let real = |z: Complex64| -> Result<f64> {
        if z.im.abs() > 1e-10 {
            return Err(Error::Numerical(format!(
                "Bloch component has imaginary part {:e}",
                z.im
            )));
        }
        Ok(z.re)
    };
    let mut out = BlochDecomposition {
        x: [0.0; 3],
        y: [0.0; 3],
        corr: [[0.0; 3]; 3],
    };
    for i in 0..3 {
        out.x[i] = real(expect(&rho, &pauli(i), &id))?;
        out.y[i] = real(expect(&rho, &id, &pauli(i)))?;
        for j in 0..3 {
            out.corr[i][j] = real(expect(&rho, &pauli(i), &pauli(j)))?;
        }
    }
    Ok(out)
}

/// Eigenvalues of a symmetric 3×3 matrix in descending order, by the
/// trigonometric solution of the characteristic cubic.
pub fn sym3_eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (a[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// `(|x|² + ‖T‖² - λ_max(x xᵀ + T Tᵀ)) / 4` without clamping.
pub fn gqd_lower_raw(b: &BlochDecomposition) -> f64 {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = b.x[i] * b.x[j] + (0..3).map(|l| b.corr[i][l] * b.corr[j][l]).sum::<f64>();
        }
    }
    let trace = k[0][0] + k[1][1] + k[2][2];
    let top = sym3_eigenvalues(&k)[0];
    0.25 * (trace - top)
}

/// Geometric discord lower bound, clamped at zero.
pub fn gqd_lower(b: &BlochDecomposition) -> f64 {
    gqd_lower_raw(b).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GqdSite {
    pub s: usize,
    pub block_trace: f64,
    /// Bound for the trace-normalized block; zero for an empty block.
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GqdTotal {
    /// `Σ_s D_s` over trace-normalized blocks.
    pub renormalized: f64,
    /// `Σ_s p_s D_s` with `p_s` the block trace.
    pub weighted: f64,
    pub per_s: Vec<GqdSite>,
}

/// Discord bound for mirror site `s`.
pub fn gqd_site(rho: &DensityMatrix, s: usize) -> Result<GqdSite> {
    let block = reduce_bipartition(rho, s)?;
    let value = match bloch_decompose(&block.rho4, true) {
        Ok(b) => gqd_lower(&b),
        Err(Error::EmptyBlock { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(GqdSite {
        s,
        block_trace: block.block_trace,
        value,
    })
}

/// Sum of the per-site bounds over `s = 1..=W`, in both conventions.
pub fn gqd_total(rho: &DensityMatrix) -> Result<GqdTotal> {
    let per_s = (1..=rho.radius())
        .into_par_iter()
        .map(|s| gqd_site(rho, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(GqdTotal {
        renormalized: per_s.iter().map(|g| g.value).sum(),
        weighted: per_s.iter().map(|g| g.block_trace * g.value).sum(),
        per_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{select_window, SimParams};
    use crate::propagator::{evolve_analytic, probability_profile, EvolutionRequest};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn evolve(t_omega: f64, t_d: f64) -> DensityMatrix {
        let p = SimParams::from_dimensionless(t_omega, t_d).unwrap();
        let w = select_window(&p, 1e-10).unwrap();
        evolve_analytic(&EvolutionRequest::new(p, w)).unwrap()
    }

    fn bell() -> Mat4 {
        let mut m = [[c(0.0); 4]; 4];
        for i in [0, 3] {
            for j in [0, 3] {
                m[i][j] = c(0.5);
            }
        }
        m
    }

    #[test]
    fn mixed_state_has_no_bloch_vectors() {
        let mut m = [[c(0.0); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = c(0.25);
        }
        let b = bloch_decompose(&m, false).unwrap();
        assert_eq!(b.x, [0.0; 3]);
        assert_eq!(b.y, [0.0; 3]);
        assert_eq!(b.corr, [[0.0; 3]; 3]);
        assert_eq!(gqd_lower(&b), 0.0);
    }

    #[test]
    fn bell_state() {
        let b = bloch_decompose(&bell(), true).unwrap();
        assert_eq!(b.x, [0.0; 3]);
        assert_eq!(b.y, [0.0; 3]);
        assert_eq!(b.corr, [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!((gqd_lower(&b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_state() {
        let mut m = [[c(0.0); 4]; 4];
        m[0][0] = c(1.0);
        let b = bloch_decompose(&m, true).unwrap();
        assert_eq!(b.x, [0.0, 0.0, 1.0]);
        assert_eq!(b.y, [0.0, 0.0, 1.0]);
        assert_eq!(b.corr, [[0.0; 3], [0.0; 3], [0.0, 0.0, 1.0]]);
        assert_eq!(gqd_lower(&b), 0.0);
    }

    #[test]
    fn empty_block_is_flagged() {
        let m = [[c(0.0); 4]; 4];
        assert!(matches!(
            bloch_decompose(&m, true),
            Err(Error::EmptyBlock { .. })
        ));
    }

    #[test]
    fn cubic_eigenvalues() {
        let e = sym3_eigenvalues(&[[2.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, -1.0]]);
        for (a, b) in e.iter().zip([5.0, 2.0, -1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        // [[2,1,0],[1,2,1],[0,1,2]] has 2 ± √2 and 2
        let e = sym3_eigenvalues(&[[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]]);
        let r2 = 2.0_f64.sqrt();
        for (a, b) in e.iter().zip([2.0 + r2, 2.0, 2.0 - r2]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(
            sym3_eigenvalues(&[[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]]),
            [3.0; 3]
        );
    }

    #[test]
    fn origin_state_blocks() {
        let rho = evolve(0.0, 0.0);
        let block = reduce_bipartition(&rho, 1).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == 8 && j == 8 { 1.0 } else { 0.0 };
                assert_eq!(block.rho9[i][j], c(want));
            }
        }
        assert_eq!(block.block_trace, 0.0);
        let total = gqd_total(&rho).unwrap();
        assert_eq!(total.renormalized, 0.0);
        assert_eq!(total.weighted, 0.0);
        assert!(reduce_bipartition(&rho, 0).is_err());
        assert!(reduce_bipartition(&rho, rho.radius() + 1).is_err());
    }

    #[test]
    fn blocks_are_consistent() {
        let rho = evolve(1.0, 0.5);
        let prof = probability_profile(&rho);
        for s in 1..=rho.radius() {
            let block = reduce_bipartition(&rho, s).unwrap();
            let tr: Complex64 = (0..9).map(|i| block.rho9[i][i]).sum();
            assert!((tr - rho.trace()).norm() < 1e-12);
            for i in 0..9 {
                for j in 0..9 {
                    assert!((block.rho9[i][j] - block.rho9[j][i].conj()).norm() < 1e-15);
                }
            }
            let si = s as i64;
            assert!((block.rho4[0][0].re - prof.get(si, si)).abs() < 1e-15);
        }
    }

    #[test]
    fn blocks_follow_particle_exchange() {
        let rho = evolve(1.0, 1.0);
        let r = rho.radius() as i64;
        let mut swapped = rho.clone();
        for s1 in -r..=r {
            for s2 in -r..=r {
                for s1p in -r..=r {
                    for s2p in -r..=r {
                        *swapped.get_mut(s1, s2, s1p, s2p) = rho.get(s2, s1, s2p, s1p);
                    }
                }
            }
        }
        // slot swap AB <-> BA is the permutation (0, 2, 1, 3)
        let perm = [0usize, 2, 1, 3];
        for s in 1..=3 {
            let a = reduce_bipartition(&rho, s).unwrap().rho4;
            let b = reduce_bipartition(&swapped, s).unwrap().rho4;
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(a[perm[i]][perm[j]], b[i][j]);
                }
            }
        }
    }

    #[test]
    fn unitary_walk_has_no_discord() {
        let rho = evolve(2.0, 0.0);
        let total = gqd_total(&rho).unwrap();
        assert!(total.renormalized.abs() < 1e-8);
        assert!(total.weighted.abs() < 1e-8);
    }

    #[test]
    fn bath_generates_discord() {
        let rho = evolve(1.0, 1.0);
        let total = gqd_total(&rho).unwrap();
        assert!(total.weighted > 1e-6);
        for g in &total.per_s {
            assert!(g.value >= 0.0);
            let block = reduce_bipartition(&rho, g.s).unwrap();
            if let Ok(b) = bloch_decompose(&block.rho4, true) {
                assert!(gqd_lower_raw(&b) >= -1e-10);
            }
        }
    }

    fn rotation(a: f64, b: f64, g: f64) -> [[f64; 3]; 3] {
        let (ca, sa) = (a.cos(), a.sin());
        let (cb, sb) = (b.cos(), b.sin());
        let (cg, sg) = (g.cos(), g.sin());
        let rz1 = [[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]];
        let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
        let rz2 = [[cg, -sg, 0.0], [sg, cg, 0.0], [0.0, 0.0, 1.0]];
        matmul(&matmul(&rz1, &ry), &rz2)
    }

    fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    proptest! {
        #[test]
        fn bound_is_invariant_under_local_rotations(
            x in prop::array::uniform3(-1.0f64..1.0),
            t in prop::array::uniform3(prop::array::uniform3(-1.0f64..1.0)),
            r in prop::array::uniform3(-3.2f64..3.2),
            q in prop::array::uniform3(-3.2f64..3.2),
        ) {
            let base = BlochDecomposition { x, y: [0.0; 3], corr: t };
            let rr = rotation(r[0], r[1], r[2]);
            let qq = rotation(q[0], q[1], q[2]);
            let mut qt = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    qt[i][j] = qq[j][i];
                }
            }
            let mut rx = [0.0; 3];
            for i in 0..3 {
                rx[i] = (0..3).map(|k| rr[i][k] * x[k]).sum();
            }
            let rotated = BlochDecomposition { x: rx, y: [0.0; 3], corr: matmul(&matmul(&rr, &t), &qt) };
            prop_assert!((gqd_lower_raw(&base) - gqd_lower_raw(&rotated)).abs() < 1e-8);
            prop_assert!(gqd_lower_raw(&base) >= -1e-12);
        }
    }
}
