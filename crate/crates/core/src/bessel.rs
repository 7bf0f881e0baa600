//! Integer-order Bessel kernels.
//!
//! Both families are evaluated for a whole band of orders at a fixed argument
//! with Miller's backward recurrence, normalized by the generating-function
//! sum rules
//!
//! ```text
//! J_0(x) + 2 Σ_{k≥1} J_{2k}(x) = 1
//! e^{-x} [I_0(x) + 2 Σ_{k≥1} I_k(x)] = 1
//! ```
//!
//! The modified function is only ever exposed in the scaled form
//! `e^{-x} I_n(x)`, which stays in `[0, 1]` for every argument.

use crate::error::{Error, Result};

/// Largest |x| accepted. The recurrence cost is linear in |x|.
pub const MAX_ARGUMENT: f64 = 1.0e6;

const RESCALE_ABOVE: f64 = 1.0e250;
const RESCALE_BY: f64 = 1.0e-250;

fn check_argument(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite Bessel argument {x}")));
    }
    if x.abs() > MAX_ARGUMENT {
        return Err(Error::Domain(format!(
            "Bessel argument {x} exceeds the supported bound {MAX_ARGUMENT}"
        )));
    }
    Ok(())
}

/// Starting order for the backward recurrence: far enough above both the
/// largest requested order and the argument that the seed error has decayed
/// below double precision by the time the recurrence reaches `max_order`.
fn miller_start(max_order: usize, ax: f64) -> usize {
    let base = (max_order as f64).max(ax);
    let m = base + 30.0 + 12.0 * base.sqrt();
    let m = m.ceil() as usize;
    m + (m & 1)
}

/// `J_n(x)` for `n = 0..=max_order`.
fn j_band(x: f64, max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let start = miller_start(max_order, ax);
    let two_over_x = 2.0 / ax;

    let mut next = 0.0_f64; // J_{k+1}
    let mut cur = 1.0e-300_f64; // J_k, arbitrary seed
    let mut even_sum = 0.0_f64;
    let mut k = start;
    loop {
        if k <= max_order {
            out[k] = cur;
        }
        if k % 2 == 0 && k > 0 {
            even_sum += cur;
        }
        if k == 0 {
            break;
        }
        let prev = (k as f64) * two_over_x * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            next *= RESCALE_BY;
            even_sum *= RESCALE_BY;
            for v in out.iter_mut().skip(k + 1) {
                *v *= RESCALE_BY;
            }
        }
    }
    // cur now holds the unnormalized J_0.
    let norm = cur + 2.0 * even_sum;
    for (n, v) in out.iter_mut().enumerate() {
        *v /= norm;
        if x < 0.0 && n % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

/// `e^{-x} I_n(x)` for `n = 0..=max_order`, `x ≥ 0`.
fn i_scaled_band(x: f64, max_order: usize) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = miller_start(max_order, x);
    let two_over_x = 2.0 / x;

    let mut next = 0.0_f64;
    let mut cur = 1.0e-300_f64;
    let mut tail_sum = 0.0_f64; // Σ_{k≥1} I_k, unnormalized
    let mut k = start;
    loop {
        if k <= max_order {
            out[k] = cur;
        }
        if k == 0 {
            break;
        }
        tail_sum += cur;
        let prev = (k as f64) * two_over_x * cur + next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur > RESCALE_ABOVE {
            cur *= RESCALE_BY;
            next *= RESCALE_BY;
            tail_sum *= RESCALE_BY;
            for v in out.iter_mut().skip(k + 1) {
                *v *= RESCALE_BY;
            }
        }
    }
    let norm = cur + 2.0 * tail_sum;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// Regular Bessel function of the first kind of integer order.
pub fn bessel_j(n: i64, x: f64) -> Result<f64> {
    check_argument(x)?;
    let order = n.unsigned_abs() as usize;
    let value = j_band(x, order)[order];
    Ok(if n < 0 && order % 2 == 1 {
        -value
    } else {
        value
    })
}

/// Exponentially scaled modified Bessel function `e^{-x} I_n(x)`.
pub fn bessel_i_scaled(n: i64, x: f64) -> Result<f64> {
    check_argument(x)?;
    if x < 0.0 {
        return Err(Error::Domain(format!(
            "scaled I_n requires a non-negative argument, got {x}"
        )));
    }
    let order = n.unsigned_abs() as usize;
    Ok(i_scaled_band(x, order)[order])
}

/// Contiguous band of `J_n(x)`, `|n| ≤ max_order`, read through the
/// reflection `J_{-n} = (-1)^n J_n`. Orders beyond the band read as zero.
#[derive(Debug, Clone)]
pub struct JTable {
    x: f64,
    values: Vec<f64>,
}

impl JTable {
    pub fn new(x: f64, max_order: usize) -> Result<Self> {
        check_argument(x)?;
        Ok(Self {
            x,
            values: j_band(x, max_order),
        })
    }

    pub fn argument(&self) -> f64 {
        self.x
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn get(&self, n: i64) -> f64 {
        let order = n.unsigned_abs() as usize;
        match self.values.get(order) {
            Some(&v) if n < 0 && order % 2 == 1 => -v,
            Some(&v) => v,
            None => 0.0,
        }
    }

    /// Values for `n = -max_order..=max_order`, index `n + max_order`.
    pub fn symmetric_band(&self) -> Vec<f64> {
        let m = self.max_order() as i64;
        (-m..=m).map(|n| self.get(n)).collect()
    }
}

/// Contiguous band of `e^{-x} I_n(x)`, even in `n`.
#[derive(Debug, Clone)]
pub struct ScaledITable {
    x: f64,
    values: Vec<f64>,
}

impl ScaledITable {
    pub fn new(x: f64, max_order: usize) -> Result<Self> {
        check_argument(x)?;
        if x < 0.0 {
            return Err(Error::Domain(format!(
                "scaled I_n requires a non-negative argument, got {x}"
            )));
        }
        Ok(Self {
            x,
            values: i_scaled_band(x, max_order),
        })
    }

    pub fn argument(&self) -> f64 {
        self.x
    }

    pub fn max_order(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn get(&self, n: i64) -> f64 {
        self.values
            .get(n.unsigned_abs() as usize)
            .copied()
            .unwrap_or(0.0)
    }
}
