use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use graphop_core::io::{read_trajectory, write_dense_matrix, write_fv, write_phase_trajectory, write_trajectory};
use graphop_core::kuramoto::{integrate, sample_initial, sample_weights};
use graphop_core::metrics::{d_alpha, d_bm_series};
use graphop_core::{fv_transport_solve, picard_solve, quantile_family, FvConfig, Graphop, TorusGrid};
use graphop_cli::config::build;
use graphop_cli::experiment::regularized;
use graphop_cli::{
    run_discrete_scaling, run_triangle, write_scaling_outputs, write_triangle_outputs, CheckSummary, CliError,
    ExperimentConfig, Manifest,
};

#[derive(Parser)]
#[command(name = "graphop", version, about = "Kuramoto models on graphops and their mean-field limits")]
struct Cli {
    /// Experiment config (JSON); a run manifest is accepted too. Defaults to the built-in triangle config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Replace the configured seed list by this single seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the discrete Kuramoto model on weights sampled from K A K.
    Simulate {
        #[arg(long)]
        instance: Option<String>,
        /// Node cells; defaults to the first scheduled n.
        #[arg(long)]
        n: Option<usize>,
        /// Oscillators per cell; defaults to the first scheduled M.
        #[arg(short = 'M', long = "m")]
        m: Option<usize>,
        /// Kernel index; defaults to the scaling K.
        #[arg(short = 'K', long = "k")]
        k: Option<usize>,
        /// Also write the dense weight matrix.
        #[arg(long)]
        dump_weights: bool,
    },
    /// Solve the mean-field equation by Picard iteration.
    Solve {
        #[arg(long)]
        instance: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Solve for K A K instead of A.
        #[arg(short = 'K', long = "k")]
        k: Option<usize>,
        /// Also run the finite-volume transport solver with this many phase cells.
        #[arg(long)]
        fv: Option<usize>,
    },
    /// Write the kernel of K A K on its grid as a dense text matrix.
    Regularize {
        #[arg(long)]
        instance: Option<String>,
        #[arg(short = 'K', long = "k")]
        k: Option<usize>,
    },
    /// The full convergence experiment.
    Triangle {
        /// Exit with status 4 when an acceptance trend fails.
        #[arg(long)]
        check: bool,
        /// Only the discrete-scaling column at the scaling K.
        #[arg(long)]
        scaling_only: bool,
    },
    /// Distances between two stored trajectories (or single families).
    Metrics {
        a: PathBuf,
        b: PathBuf,
        /// Also report d_alpha for the named instance's graphop.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, requires = "instance")]
        alpha: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_triangle(),
    };
    if let Some(s) = cli.seed {
        cfg.seeds = vec![s];
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn instance_name(cfg: &ExperimentConfig, name: &Option<String>) -> Result<String, CliError> {
    match name {
        Some(n) => Ok(cfg.instance(n)?.name.clone()),
        None => Ok(cfg.instances[0].name.clone()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(&cli)?;
    let dir = cfg.out_dir.clone();
    let start = Instant::now();
    match &cli.command {
        Command::Simulate {
            instance,
            n,
            m,
            k,
            dump_weights,
        } => {
            let name = instance_name(&cfg, instance)?;
            let inst = cfg.instance(&name)?;
            let n = n.unwrap_or(cfg.scaling[0].n);
            let m = m.unwrap_or(cfg.scaling[0].m);
            let k = k.unwrap_or(cfg.scaling_k());
            let a = build(&inst.graphop, &inst.name)?;
            let (_, w) = regularized(&cfg, &a, k)?;
            let weights = sample_weights(&w, n * m)?;
            let mut outputs = vec!["phases.txt".to_string()];
            if *dump_weights {
                let mut f = create(&dir, "weights.txt")?;
                write_dense_matrix(&mut f, &weights)?;
                f.flush()?;
                outputs.push("weights.txt".into());
            }
            let seed = cfg.seeds[0];
            let u0 = sample_initial(&inst.density, n, m, seed)?;
            let traj = integrate(&u0, &weights, &cfg.coupling, cfg.t_end, cfg.dt, cfg.t_end / cfg.stamps as f64)?;
            let mut f = create(&dir, "phases.txt")?;
            write_phase_trajectory(&mut f, &traj)?;
            f.flush()?;
            let mut man = Manifest::new("simulate", &cfg);
            man.parameters = serde_json::json!({ "instance": name, "n": n, "M": m, "K": k, "seed": seed });
            man.outputs = outputs;
            man.elapsed_seconds = start.elapsed().as_secs_f64();
            man.write(&dir)?;
        }
        Command::Solve { instance, n, k, fv } => {
            let name = instance_name(&cfg, instance)?;
            let inst = cfg.instance(&name)?;
            let n = n.unwrap_or(cfg.scaling[0].n);
            let base = build(&inst.graphop, &inst.name)?;
            let a: Graphop = match k {
                Some(k) => regularized(&cfg, &base, *k)?.0,
                None => base,
            };
            let grid = TorusGrid::new(n)?;
            let mu0 = quantile_family(&inst.density, grid, cfg.particles)?;
            let state = picard_solve(&a, &mu0, &cfg.coupling, &cfg.picard())?;
            let mut f = create(&dir, "solution.txt")?;
            write_trajectory(&mut f, &state.trajectory()?)?;
            f.flush()?;
            let summary = serde_json::json!({
                "iterations": state.iterations,
                "gaps": state.gaps,
                "ratios": state.ratios,
                "alpha": state.alpha,
                "rate_bound": state.rate_bound,
            });
            std::fs::write(dir.join("solve.json"), serde_json::to_string_pretty(&summary).expect("plain") + "\n")?;
            let mut outputs = vec!["solution.txt".to_string(), "solve.json".to_string()];
            if let Some(u_res) = fv {
                let fcfg = FvConfig {
                    t_end: cfg.t_end,
                    stamps: cfg.stamps,
                    u_resolution: *u_res,
                    ..FvConfig::default()
                };
                let sol = fv_transport_solve(&a, &inst.density, grid, &cfg.coupling, &fcfg)?;
                let mut f = create(&dir, "fv.txt")?;
                write_fv(&mut f, &sol)?;
                f.flush()?;
                outputs.push("fv.txt".into());
            }
            let mut man = Manifest::new("solve", &cfg);
            man.parameters = serde_json::json!({ "instance": name, "n": n, "K": k, "fv": fv });
            man.outputs = outputs;
            man.elapsed_seconds = start.elapsed().as_secs_f64();
            man.write(&dir)?;
        }
        Command::Regularize { instance, k } => {
            let name = instance_name(&cfg, instance)?;
            let inst = cfg.instance(&name)?;
            let k = k.unwrap_or(cfg.scaling_k());
            let (_, w) = regularized(&cfg, &build(&inst.graphop, &inst.name)?, k)?;
            let file = format!("regularized_K{k}.txt");
            let mut f = create(&dir, &file)?;
            let r = w.grid().len();
            for i in 0..r {
                let row: Vec<String> = w.values()[i * r..(i + 1) * r].iter().map(|v| v.to_string()).collect();
                writeln!(f, "{}", row.join(" "))?;
            }
            f.flush()?;
            let mut man = Manifest::new("regularize", &cfg);
            man.parameters = serde_json::json!({ "instance": name, "K": k, "resolution": r });
            man.outputs = vec![file];
            man.elapsed_seconds = start.elapsed().as_secs_f64();
            man.write(&dir)?;
        }
        Command::Triangle { check, scaling_only } => {
            let (outputs, trend) = if *scaling_only {
                let rep = run_discrete_scaling(&cfg)?;
                (write_scaling_outputs(&rep, &dir)?, rep.check())
            } else {
                let rep = run_triangle(&cfg)?;
                (write_triangle_outputs(&rep, &dir)?, rep.check())
            };
            let mut man = Manifest::new(if *scaling_only { "triangle --scaling-only" } else { "triangle" }, &cfg);
            man.outputs = outputs;
            man.elapsed_seconds = start.elapsed().as_secs_f64();
            man.check = Some(CheckSummary::from(&trend));
            man.write(&dir)?;
            for v in &trend.violations {
                log::warn!("{v}");
            }
            println!(
                "{} trend violations; outputs in {}",
                trend.violations.len(),
                dir.display()
            );
            if *check && !trend.passed() {
                return Err(CliError::Trend(trend.violations.join("\n")));
            }
        }
        Command::Metrics { a, b, instance, alpha } => {
            let open = |p: &Path| -> Result<_, CliError> { Ok(read_trajectory(BufReader::new(File::open(p)?))?) };
            let (ta, tb) = (open(a)?, open(b)?);
            let series = d_bm_series(&ta, &tb)?;
            let sup = series.iter().copied().fold(0.0, f64::max);
            let mut out = serde_json::json!({ "times": ta.times(), "d_bm": series, "sup_d_bm": sup });
            if let (Some(name), Some(alpha)) = (instance, alpha) {
                let inst = cfg.instance(name)?;
                let g = build(&inst.graphop, &inst.name)?;
                out["d_alpha"] = serde_json::json!(d_alpha(&ta, &tb, &g, *alpha)?);
            }
            println!("{}", serde_json::to_string_pretty(&out).expect("plain"));
        }
    }
    Ok(())
}
