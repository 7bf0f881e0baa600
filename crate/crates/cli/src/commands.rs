use std::fs::File;
use std::io::{BufWriter, Write};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use dqw_core::discord::gqd_total;
use dqw_core::lattice::{fixed_window, select_window, DensityMatrix, SimParams, Window};
use dqw_core::measures::MeasureRecord;
use dqw_core::propagator::{evolve_analytic, probability_profile, EvolutionRequest};
use dqw_core::validate::{run_suite, Status, SuiteConfig};
use dqw_core::wigner::{delta_k_point, wigner_slice, EnlargedIndex, WignerGrid};

use crate::config::{Format, RunConfig};
use crate::output::{grid_document, open, write_csv_header, write_json, write_table, Meta, Table};

fn point(cfg: &RunConfig, t: f64) -> Result<(SimParams, Window)> {
    let params = SimParams::new(cfg.omega, cfg.diss, t)?;
    let window = match cfg.window {
        Some(r) => fixed_window(&params, r, cfg.tol)?,
        None => select_window(&params, cfg.tol)?,
    };
    Ok((params, window))
}

fn evolve_at(cfg: &RunConfig, t: f64) -> Result<(SimParams, DensityMatrix)> {
    let (params, window) = point(cfg, t)?;
    let rho = evolve_analytic(&EvolutionRequest::new(params, window))
        .with_context(|| format!("evolving to t = {t}"))?;
    Ok((params, rho))
}

fn window_meta(t: f64, w: &Window) -> Value {
    json!({
        "t": t,
        "radius": w.radius,
        "series_cutoff_i": w.series_cutoff_i,
        "series_cutoff_j": w.series_cutoff_j,
        "certified_error": w.certified_error,
    })
}

fn sites(radius: usize) -> Vec<i64> {
    let r = radius as i64;
    (-r..=r).collect()
}

fn labels(radius: usize) -> Vec<String> {
    let w = 2 * radius as i64;
    (-w..=w)
        .map(|x| EnlargedIndex::from_twice(x).to_string())
        .collect()
}

pub fn evolve(cfg: &RunConfig) -> Result<()> {
    let mut meta = Meta::default();
    let mut windows = Vec::new();
    let mut defects = Vec::new();
    let mut profiles = Vec::new();
    for &t in &cfg.times {
        let (_, rho) = evolve_at(cfg, t)?;
        if let Some(path) = &cfg.dump_matrix {
            dump_matrix(cfg, &rho, t, path)?;
        }
        let profile = probability_profile(&rho);
        windows.push(window_meta(t, rho.window()));
        defects.push(profile.factorization_defect());
        profiles.push(profile);
    }
    meta.push("windows", windows);
    meta.push("factorization_defect", defects);

    let mut out = open(cfg)?;
    match cfg.format {
        Format::Csv => {
            write_csv_header(cfg, &meta, &mut *out)?;
            writeln!(out, "t,s1,s2,probability")?;
            for (t, p) in cfg.times.iter().zip(&profiles) {
                for s1 in sites(p.radius()) {
                    for s2 in sites(p.radius()) {
                        writeln!(out, "{t},{s1},{s2},{:e}", p.get(s1, s2).max(0.0))?;
                    }
                }
            }
            out.flush()?;
        }
        Format::Json => {
            let radius = profiles.iter().map(|p| p.radius()).max().unwrap_or(0);
            let n = 2 * radius + 1;
            let mut data = vec![0.0; profiles.len() * n * n];
            for (i, p) in profiles.iter().enumerate() {
                let r = p.radius() as i64;
                for s1 in -r..=r {
                    for s2 in -r..=r {
                        let row = (s1 + radius as i64) as usize;
                        let col = (s2 + radius as i64) as usize;
                        data[(i * n + row) * n + col] = p.get(s1, s2).max(0.0);
                    }
                }
            }
            let index = json!({ "t": cfg.times, "s1": sites(radius), "s2": sites(radius) });
            let doc = grid_document(cfg, &meta, &[profiles.len(), n, n], index, json!(data));
            write_json(&doc, &mut *out)?;
        }
    }
    Ok(())
}

fn dump_matrix(cfg: &RunConfig, rho: &DensityMatrix, t: f64, path: &std::path::Path) -> Result<()> {
    let n = rho.sites();
    let s = sites(rho.radius());
    let data: Vec<[f64; 2]> = rho.data().iter().map(|z| [z.re, z.im]).collect();
    let mut meta = Meta::default();
    meta.push("windows", vec![window_meta(t, rho.window())]);
    let index = json!({ "s1": s, "s2": s, "s1p": s, "s2p": s });
    let doc = grid_document(cfg, &meta, &[n, n, n, n], index, json!(data));
    let mut f =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_json(&doc, &mut f)
}

pub fn measures(cfg: &RunConfig) -> Result<()> {
    let mut windows = Vec::new();
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let (params, window) = point(cfg, t)?;
        let rec = MeasureRecord::compute(&params, &window)
            .with_context(|| format!("measures at t = {t}"))?;
        windows.push(window_meta(t, &window));
        rows.push(rec.values().to_vec());
    }
    let mut meta = Meta::default();
    meta.push("windows", windows);
    let table = Table {
        columns: MeasureRecord::COLUMNS
            .iter()
            .map(|c| c.to_string())
            .collect(),
        rows,
    };
    write_table(cfg, &meta, &table, &mut *open(cfg)?)
}

pub fn gqd(cfg: &RunConfig) -> Result<()> {
    let mut columns: Vec<String> = ["t_omega", "t_d", "total", "total_weighted"]
        .map(String::from)
        .to_vec();
    for s in 0..=cfg.s_max {
        columns.push(format!("d_s{s}"));
        columns.push(format!("p_s{s}"));
    }
    let mut windows = Vec::new();
    let mut rows = Vec::new();
    for &t in &cfg.times {
        let (params, rho) = evolve_at(cfg, t)?;
        let g = gqd_total(&rho)?;
        let mut row = vec![params.t_omega(), params.t_d(), g.renormalized, g.weighted];
        for s in 0..=cfg.s_max {
            match g.per_s.iter().find(|site| site.s == s) {
                Some(site) => row.extend([site.value, site.block_trace]),
                None => row.extend([0.0, 0.0]),
            }
        }
        windows.push(window_meta(t, rho.window()));
        rows.push(row);
    }
    let mut meta = Meta::default();
    meta.push("windows", windows);
    write_table(cfg, &meta, &Table { columns, rows }, &mut *open(cfg)?)
}

pub fn wigner(cfg: &RunConfig) -> Result<()> {
    let mut rhos = Vec::new();
    for &t in &cfg.times {
        rhos.push(evolve_at(cfg, t)?.1);
    }
    let radius = rhos.iter().map(|r| r.radius()).max().unwrap_or(0);
    let nx = 4 * radius + 1;
    let mut meta = Meta::default();
    meta.push(
        "windows",
        cfg.times
            .iter()
            .zip(&rhos)
            .map(|(&t, r)| window_meta(t, r.window()))
            .collect::<Vec<_>>(),
    );
    let mut out = open(cfg)?;

    // Copy a grid of smaller radius into the common square; outside points are zero.
    let place = |r: usize, x1: usize, x2: usize| -> usize {
        let shift = 2 * (radius - r);
        (x1 + shift) * nx + x2 + shift
    };

    if let Some(dk) = cfg.delta_k {
        let k = delta_k_point(dk);
        let mut data = vec![0.0; rhos.len() * nx * nx];
        let mut neg_sum = Vec::new();
        let mut neg_cells = Vec::new();
        for (i, rho) in rhos.iter().enumerate() {
            let slice = wigner_slice(rho, k)?;
            let m = 4 * rho.radius() + 1;
            for a in 0..m {
                for b in 0..m {
                    data[i * nx * nx + place(rho.radius(), a, b)] = slice[a * m + b];
                }
            }
            neg_sum.push(slice.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>());
            neg_cells.push(slice.iter().filter(|v| **v < 0.0).count());
        }
        meta.push("k", k.to_vec());
        meta.push("negative_volume", neg_sum);
        meta.push("negative_cells", neg_cells);
        match cfg.format {
            Format::Csv => {
                write_csv_header(cfg, &meta, &mut *out)?;
                writeln!(out, "t,x1,x2,w")?;
                let xs = labels(radius);
                for (i, t) in cfg.times.iter().enumerate() {
                    for (a, x1) in xs.iter().enumerate() {
                        for (b, x2) in xs.iter().enumerate() {
                            writeln!(out, "{t},{x1},{x2},{:e}", data[(i * nx + a) * nx + b])?;
                        }
                    }
                }
                out.flush()?;
            }
            Format::Json => {
                let index = json!({ "t": cfg.times, "x1": labels(radius), "x2": labels(radius) });
                let doc = grid_document(cfg, &meta, &[rhos.len(), nx, nx], index, json!(data));
                write_json(&doc, &mut *out)?;
            }
        }
        return Ok(());
    }

    let m = cfg
        .k_points
        .unwrap_or_else(|| (2 * radius + 2).next_multiple_of(4).max(32));
    let mm = m * m;
    let mut data = vec![0.0; rhos.len() * nx * nx * mm];
    let mut norms = Vec::new();
    let mut negs = Vec::new();
    let mut cells = Vec::new();
    for (i, rho) in rhos.iter().enumerate() {
        let g = WignerGrid::from_rho(rho, m)?;
        let gx = g.x_count();
        for a in 0..gx {
            for b in 0..gx {
                let src = (a * gx + b) * mm;
                let dst = (i * nx * nx + place(g.radius, a, b)) * mm;
                data[dst..dst + mm].copy_from_slice(&g.values[src..src + mm]);
            }
        }
        norms.push(g.normalization());
        negs.push(g.negative_volume());
        cells.push(g.negative_cells(0.0));
    }
    meta.push("normalization", norms);
    meta.push("negative_volume", negs);
    meta.push("negative_cells", cells);
    let nodes = WignerGrid::k_nodes(m);
    match cfg.format {
        Format::Csv => {
            write_csv_header(cfg, &meta, &mut *out)?;
            writeln!(out, "t,x1,x2,k1,k2,w")?;
            let xs = labels(radius);
            let mut at = 0;
            for t in &cfg.times {
                for x1 in &xs {
                    for x2 in &xs {
                        for k1 in &nodes {
                            for k2 in &nodes {
                                writeln!(out, "{t},{x1},{x2},{k1},{k2},{:e}", data[at])?;
                                at += 1;
                            }
                        }
                    }
                }
            }
            out.flush()?;
        }
        Format::Json => {
            let index = json!({
                "t": cfg.times,
                "x1": labels(radius),
                "x2": labels(radius),
                "k1": nodes,
                "k2": nodes,
            });
            let doc = grid_document(cfg, &meta, &[rhos.len(), nx, nx, m, m], index, json!(data));
            write_json(&doc, &mut *out)?;
        }
    }
    Ok(())
}

/// Measures and discord for every time, one job per time point.
pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let jobs: Vec<(Vec<f64>, Value)> = cfg
        .times
        .par_iter()
        .map(|&t| -> Result<(Vec<f64>, Value)> {
            let (params, rho) = evolve_at(cfg, t)?;
            let rec = MeasureRecord::from_matrix(&rho, &params)?;
            let g = gqd_total(&rho)?;
            let mut row = rec.values().to_vec();
            row.extend([
                g.renormalized,
                g.weighted,
                probability_profile(&rho).factorization_defect(),
            ]);
            Ok((row, window_meta(t, rho.window())))
        })
        .collect::<Result<_>>()?;
    let mut columns: Vec<String> = MeasureRecord::COLUMNS
        .iter()
        .map(|c| c.to_string())
        .collect();
    columns.extend(["gqd_total", "gqd_total_weighted", "factorization_defect"].map(String::from));
    let (rows, windows): (Vec<_>, Vec<_>) = jobs.into_iter().unzip();
    let mut meta = Meta::default();
    meta.push("windows", windows);
    write_table(cfg, &meta, &Table { columns, rows }, &mut *open(cfg)?)
}

/// Runs the self-check suite at every time; returns whether all checks passed.
pub fn validate(cfg: &RunConfig) -> Result<bool> {
    let mut reports = Vec::new();
    for &t in &cfg.times {
        let params = SimParams::new(cfg.omega, cfg.diss, t)?;
        let report = run_suite(&SuiteConfig {
            params,
            tol: cfg.tol,
            radius: cfg.window,
        })?;
        print!("{report}");
        reports.push(report);
    }
    let passed = reports.iter().all(|r| r.passed());
    println!(
        "{}",
        if passed {
            "all checks passed"
        } else {
            "some checks FAILED"
        }
    );

    if cfg.out.is_some() {
        let mut out = open(cfg)?;
        let mut meta = Meta::default();
        meta.push(
            "windows",
            cfg.times
                .iter()
                .zip(&reports)
                .map(|(&t, r)| window_meta(t, &r.window))
                .collect::<Vec<_>>(),
        );
        meta.push("passed", passed);
        match cfg.format {
            Format::Csv => {
                write_csv_header(cfg, &meta, &mut *out)?;
                writeln!(out, "t,check,status,measured,bound")?;
                for (t, r) in cfg.times.iter().zip(&reports) {
                    for c in &r.checks {
                        let status = match c.status {
                            Status::Pass => "pass",
                            Status::Fail => "fail",
                            Status::Skipped => "skipped",
                        };
                        writeln!(
                            out,
                            "{t},{},{status},{:e},{:e}",
                            c.name, c.measured, c.bound
                        )?;
                    }
                }
                out.flush()?;
            }
            Format::Json => {
                let index = json!({ "t": cfg.times });
                let doc = grid_document(
                    cfg,
                    &meta,
                    &[reports.len()],
                    index,
                    serde_json::to_value(&reports)?,
                );
                write_json(&doc, &mut *out)?;
            }
        }
    }
    Ok(passed)
}
