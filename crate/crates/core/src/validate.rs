//! Self-check suite: conservation laws, symmetries and agreement between the
//! independent evaluation routes at one parameter point.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::lattice::{fixed_window, select_window, DensityMatrix, SimParams, Window};
use crate::measures::{purity_cutoff, purity_matrix, purity_series, spectrum};
use crate::propagator::{evolve_analytic, momentum_diagonal, u1_transform, EvolutionRequest};
use crate::spectral::{oracle_matrix, required_quad_points};

/// Largest oracle grid the suite will run.
pub const MAX_SUITE_QUAD_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub status: Status,
}

impl Check {
    fn at_most(name: &str, measured: f64, bound: f64) -> Self {
        let status = if measured <= bound {
            Status::Pass
        } else {
            Status::Fail
        };
        Self {
            name: name.to_string(),
            measured,
            bound,
            status,
        }
    }

    fn skipped(name: &str, bound: f64) -> Self {
        Self {
            name: name.to_string(),
            measured: f64::NAN,
            bound,
            status: Status::Skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub params: SimParams,
    pub window: Window,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# t_omega = {}, t_d = {}, W = {}, N_I = {}, tol = {:e}",
            self.params.t_omega(),
            self.params.t_d(),
            self.window.radius,
            self.window.series_cutoff_i,
            self.window.tol
        )?;
        writeln!(
            f,
            "{:<22} {:>8} {:>14} {:>10}",
            "check", "status", "measured", "bound"
        )?;
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            writeln!(
                f,
                "{:<22} {:>8} {:>14.3e} {:>10.1e}",
                c.name, status, c.measured, c.bound
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub params: SimParams,
    pub tol: f64,
    /// Force this window radius instead of the certified choice.
    pub radius: Option<usize>,
}

fn evolve_on(params: &SimParams, window: &Window) -> Result<DensityMatrix> {
    evolve_analytic(&EvolutionRequest::new(*params, *window))
}

/// Run every check at the configured point.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Report> {
    let params = cfg.params;
    let window = match cfg.radius {
        Some(r) => fixed_window(&params, r, cfg.tol)?,
        None => select_window(&params, cfg.tol)?,
    };
    let rho = evolve_on(&params, &window)?;
    let mut checks = Vec::new();

    let trace = rho.trace();
    checks.push(Check::at_most(
        "trace",
        (trace - 1.0).norm(),
        cfg.tol.max(1e-8),
    ));
    checks.push(Check::at_most("hermiticity", rho.hermiticity_defect(), 0.0));
    checks.push(Check::at_most("exchange", rho.exchange_defect(), 0.0));

    let want = 1.0 / (4.0 * PI * PI);
    let mut worst: f64 = 0.0;
    for i in 0..16 {
        for j in 0..16 {
            let k1 = -PI + 2.0 * PI * (i as f64 + 0.5) / 16.0;
            let k2 = -PI + 2.0 * PI * (j as f64 + 0.5) / 16.0;
            worst = worst.max((momentum_diagonal(&rho, k1, k2) - want).abs());
        }
    }
    checks.push(Check::at_most("momentum_diagonal", worst, 1e-6));

    let lowest = spectrum(&rho)?.first().copied().unwrap_or(0.0);
    checks.push(Check::at_most("positivity", (-lowest).max(0.0), 1e-8));

    let inner = window.radius.min(5);
    let m = required_quad_points(inner, &params)
        .max(32)
        .next_multiple_of(4);
    if m <= MAX_SUITE_QUAD_POINTS {
        let sub = Window::new(inner, window.series_cutoff_i, window.tol)?;
        let oracle = oracle_matrix(&sub, &params, m)?;
        let diff = rho.restrict(sub)?.max_abs_diff(&oracle)?;
        checks.push(Check::at_most("oracle_equivalence", diff, 1e-6));
    } else {
        checks.push(Check::skipped("oracle_equivalence", 1e-6));
    }

    let free = SimParams::new(params.omega, 0.0, params.time)?;
    let free_window = select_window(&free, cfg.tol)?;
    let free_rho = evolve_on(&free, &free_window)?;
    checks.push(Check::at_most(
        "unitary_purity",
        (purity_matrix(&free_rho) - 1.0).abs(),
        1e-8,
    ));

    let still = params.with_omega(0.0)?;
    let still_rho = evolve_on(&still, &window)?;
    let moved = u1_transform(&rho, params.t_omega())?;
    checks.push(Check::at_most(
        "u1_identity",
        moved.max_abs_diff_within(&still_rho, window.radius / 2),
        1e-6,
    ));

    let t_d = params.t_d();
    let series = purity_series(t_d, purity_cutoff(t_d, 1e-12)?)?;
    checks.push(Check::at_most(
        "purity_series",
        (series - purity_matrix(&rho)).abs(),
        1e-6,
    ));

    let again = evolve_in_pool(&params, &window, 2)?;
    let once = evolve_in_pool(&params, &window, 1)?;
    let identical = again.data() == once.data() && once.data() == rho.data();
    checks.push(Check::at_most(
        "determinism",
        if identical { 0.0 } else { 1.0 },
        0.0,
    ));

    Ok(Report {
        params,
        window,
        checks,
    })
}

fn evolve_in_pool(params: &SimParams, window: &Window, threads: usize) -> Result<DensityMatrix> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| crate::error::Error::Resource(e.to_string()))?;
    pool.install(|| evolve_on(params, window))
}
