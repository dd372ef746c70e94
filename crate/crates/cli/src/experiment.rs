use std::collections::HashMap;

use graphop_core::kuramoto::{empirical_family, integrate, sample_initial, sample_weights};
use graphop_core::metrics::d_bm;
use graphop_core::summability::regularize;
use graphop_core::{
    picard_solve, quantile_family, GraphonKernel, Graphop, GraphopKind, MeasureFamily, TorusGrid, Trajectory,
};
use rayon::prelude::*;

use crate::config::{build, ExperimentConfig, Instance, ScalePoint};
use crate::error::CliError;
use crate::report::{ConvergenceReport, ReportRow, ScalingReport, ScalingRow};

/// `K_K A K_K` on its default grid, together with its kernel.
pub fn regularized(cfg: &ExperimentConfig, a: &Graphop, k: usize) -> graphop_core::Result<(Graphop, GraphonKernel)> {
    let kern = cfg.kernel_for(k);
    let grid = TorusGrid::new(kern.default_resolution())?;
    let ak = regularize(a, &kern, &grid)?;
    let w = match ak.kind() {
        GraphopKind::Graphon(w) => w.clone(),
        _ => unreachable!("regularization always yields a graphon"),
    };
    Ok((ak, w))
}

/// The mean-field solution for `a` from the quantile discretization of the density.
pub fn solve_mean_field(cfg: &ExperimentConfig, a: &Graphop, inst: &Instance, n: usize) -> graphop_core::Result<Trajectory> {
    let mu0 = quantile_family(&inst.density, TorusGrid::new(n)?, cfg.particles)?;
    picard_solve(a, &mu0, &cfg.coupling, &cfg.picard())?.trajectory()
}

/// Empirical families of the discrete model on `n·M` oscillators at every stamp.
pub fn simulate_empirical(
    cfg: &ExperimentConfig,
    w: &GraphonKernel,
    inst: &Instance,
    p: ScalePoint,
    seed: u64,
) -> graphop_core::Result<Vec<MeasureFamily>> {
    let big_n = p.n * p.m;
    let weights = sample_weights(w, big_n)?;
    let u0 = sample_initial(&inst.density, p.n, p.m, seed)?;
    let traj = integrate(&u0, &weights, &cfg.coupling, cfg.t_end, cfg.dt, cfg.t_end / cfg.stamps as f64)?;
    traj.phases.iter().map(|u| empirical_family(u, p.n, p.m)).collect()
}

/// `max_k d̄^{b,m}(a_k, b_k)` over the configured stamps.
pub fn sup_gap(cfg: &ExperimentConfig, a: &[MeasureFamily], b: &[MeasureFamily]) -> graphop_core::Result<f64> {
    let mut best: f64 = 0.0;
    for k in cfg.metric_stamps() {
        best = best.max(d_bm(&a[k], &b[k])?);
    }
    Ok(best)
}

type Solved = Result<Trajectory, String>;

struct Prepared {
    inst: usize,
    /// `A^K` and its kernel per scheduled `K`.
    reg: Vec<Result<(Graphop, GraphonKernel), String>>,
}

fn prepare(cfg: &ExperimentConfig, ks: &[usize]) -> Result<Vec<Prepared>, CliError> {
    cfg.instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let a = build(&inst.graphop, &inst.name)?;
            let reg = ks
                .par_iter()
                .map(|&k| regularized(cfg, &a, k).map_err(|e| e.to_string()))
                .collect();
            Ok(Prepared { inst: i, reg })
        })
        .collect()
}

/// Runs the three-way comparison discrete model / `VFPE^K` / `VFPE^∞` on every
/// `(instance, n, M, K, seed)`. Sub-run failures are recorded per row.
pub fn run_triangle(cfg: &ExperimentConfig) -> Result<ConvergenceReport, CliError> {
    cfg.validate()?;
    let prepared = prepare(cfg, &cfg.k_schedule)?;

    // mean-field solutions, keyed by (instance, K index or None, n)
    let mut jobs: Vec<(usize, Option<usize>, usize)> = Vec::new();
    for p in &prepared {
        for sp in &cfg.scaling {
            jobs.push((p.inst, None, sp.n));
            for ki in 0..cfg.k_schedule.len() {
                jobs.push((p.inst, Some(ki), sp.n));
            }
        }
    }
    let solved: HashMap<(usize, Option<usize>, usize), Solved> = jobs
        .par_iter()
        .map(|&(i, ki, n)| {
            let inst = &cfg.instances[i];
            let res = match ki {
                None => build(&inst.graphop, &inst.name)
                    .map_err(|e| e.to_string())
                    .and_then(|a| solve_mean_field(cfg, &a, inst, n).map_err(|e| e.to_string())),
                Some(ki) => match &prepared[i].reg[ki] {
                    Ok((ak, _)) => solve_mean_field(cfg, ak, inst, n).map_err(|e| e.to_string()),
                    Err(e) => Err(e.clone()),
                },
            };
            if let Err(e) = &res {
                log::warn!("{} K={ki:?} n={n}: mean-field solve failed: {e}", inst.name);
            }
            ((i, ki, n), res)
        })
        .collect();

    // middle column, independent of M and the seed
    let middle: HashMap<(usize, usize, usize), Result<f64, String>> = solved
        .par_iter()
        .filter_map(|(&(i, ki, n), s)| ki.map(|ki| (i, ki, n, s)))
        .map(|(i, ki, n, s)| {
            let inf = &solved[&(i, None, n)];
            let g = match (s, inf) {
                (Ok(a), Ok(b)) => sup_gap(cfg, a.families(), b.families()).map_err(|e| e.to_string()),
                (Err(e), _) | (_, Err(e)) => Err(e.clone()),
            };
            ((i, ki, n), g)
        })
        .collect();

    let mut rows_in: Vec<(usize, ScalePoint, usize, u64)> = Vec::new();
    for p in &prepared {
        for &sp in &cfg.scaling {
            for ki in 0..cfg.k_schedule.len() {
                for &seed in &cfg.seeds {
                    rows_in.push((p.inst, sp, ki, seed));
                }
            }
        }
    }
    let rows: Vec<ReportRow> = rows_in
        .par_iter()
        .map(|&(i, sp, ki, seed)| {
            let inst = &cfg.instances[i];
            let mut row = ReportRow::new(&inst.name, sp, cfg.k_schedule[ki], seed);
            let res = (|| -> Result<(f64, f64, f64), String> {
                let (_, w) = prepared[i].reg[ki].as_ref().map_err(|e| e.clone())?;
                let vk = solved[&(i, Some(ki), sp.n)].as_ref().map_err(|e| e.clone())?;
                let vinf = solved[&(i, None, sp.n)].as_ref().map_err(|e| e.clone())?;
                let mid = middle[&(i, ki, sp.n)].clone()?;
                let emp = simulate_empirical(cfg, w, inst, sp, seed).map_err(|e| e.to_string())?;
                let first = sup_gap(cfg, &emp, vk.families()).map_err(|e| e.to_string())?;
                let third = sup_gap(cfg, &emp, vinf.families()).map_err(|e| e.to_string())?;
                Ok((first, mid, third))
            })();
            match res {
                Ok((a, b, c)) => {
                    row.emp_vs_vfpe_k = a;
                    row.vfpe_k_vs_vfpe_inf = b;
                    row.emp_vs_vfpe_inf = c;
                }
                Err(e) => {
                    log::warn!("{} n={} M={} K={} seed={seed}: {e}", inst.name, sp.n, sp.m, row.k);
                    row.error = Some(e);
                }
            }
            row
        })
        .collect();
    Ok(ConvergenceReport {
        rows,
        tie_tolerance: 2.0 * cfg.tol,
    })
}

/// First column alone at the fixed `K = cfg.scaling_k()`, along the `(n, M)` schedule.
pub fn run_discrete_scaling(cfg: &ExperimentConfig) -> Result<ScalingReport, CliError> {
    cfg.validate()?;
    let k = cfg.scaling_k();
    let prepared = prepare(cfg, &[k])?;
    let mut rows_in = Vec::new();
    for p in &prepared {
        for &sp in &cfg.scaling {
            rows_in.push((p.inst, sp));
        }
    }
    let rows: Vec<Vec<ScalingRow>> = rows_in
        .par_iter()
        .map(|&(i, sp)| {
            let inst = &cfg.instances[i];
            let base = || ScalingRow {
                instance: inst.name.clone(),
                n: sp.n,
                m: sp.m,
                k,
                seed: 0,
                gap: f64::NAN,
                series: Vec::new(),
                error: None,
            };
            let solved = prepared[i].reg[0]
                .clone()
                .and_then(|(ak, w)| solve_mean_field(cfg, &ak, inst, sp.n).map(|t| (t, w)).map_err(|e| e.to_string()));
            cfg.seeds
                .iter()
                .map(|&seed| {
                    let mut row = ScalingRow { seed, ..base() };
                    let res = solved.as_ref().map_err(|e| e.clone()).and_then(|(vk, w)| {
                        let emp = simulate_empirical(cfg, w, inst, sp, seed).map_err(|e| e.to_string())?;
                        cfg.metric_stamps()
                            .into_iter()
                            .map(|s| d_bm(&emp[s], &vk.families()[s]).map_err(|e| e.to_string()))
                            .collect::<Result<Vec<f64>, String>>()
                    });
                    match res {
                        Ok(series) => {
                            row.gap = series.iter().copied().fold(0.0, f64::max);
                            row.series = series;
                        }
                        Err(e) => row.error = Some(e),
                    }
                    row
                })
                .collect()
        })
        .collect();
    Ok(ScalingReport {
        rows: rows.into_iter().flatten().collect(),
        stamps: cfg.metric_stamps().iter().map(|&s| cfg.t_end * s as f64 / cfg.stamps as f64).collect(),
    })
}
