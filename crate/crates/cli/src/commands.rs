use crate::config::{ExperimentConfig, Initial, Stop};
use loggas_core::field::{distance_to_uniform, free_energy, FourierField, Norm};
use loggas_core::particles::{
    chaos_distance, expected_modulated_energy, modulated_energy, monte_carlo_modulated_energy, ParticleEnsemble,
};
use loggas_core::snapshot::write_snapshot;
use loggas_core::solver::{
    kirkwood_monroe_fixed_point, run, bump_family, DiagnosticsRow, ModelParams, Recording, StopReason, StopRule,
    Trajectory,
};
use loggas_core::stability::{
    certified_escape_bound, infimum_bound, instability_time_forecast, leading_escape_time, mlhls_counterexample,
    threshold_report, GrenierExpansion,
};
use loggas_core::{dimension_constants, Error, Grid, PotentialTables};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    BlowUp(String),
    NonConvergence(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::BlowUp(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::BlowUp(m) | Failure::NonConvergence(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. } => Failure::BlowUp(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type Outcome = Result<(), Failure>;

fn prepare_out(cfg: &ExperimentConfig) -> Outcome {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Outcome {
    let mut s = String::with_capacity(4096);
    s.push_str(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

fn cosine_datum(grid: Grid, eps: f64, k: &[i64]) -> FourierField {
    FourierField::from_fn(grid, |x| {
        let phase: f64 = x.iter().zip(k).map(|(a, b)| a * *b as f64).sum();
        1.0 + 2.0 * eps * (2.0 * PI * phase).cos()
    })
}

fn checked_cosine(cfg: &ExperimentConfig, grid: Grid) -> Result<FourierField, Failure> {
    if !(cfg.eps.abs() < 0.5) {
        return Err(Failure::Usage(format!("eps = {} must satisfy |eps| < 1/2 for a positive density", cfg.eps)));
    }
    Ok(cosine_datum(grid, cfg.eps, &cfg.mode_k))
}

fn model_params(cfg: &ExperimentConfig) -> ModelParams {
    let mut p = ModelParams::new(cfg.dim, cfg.beta, cfg.grid, cfg.dt, cfg.tmax);
    p.track_modes = vec![cfg.mode_k.clone()];
    p
}

pub fn thresholds(cfg: &ExperimentConfig) -> Outcome {
    let (lo, hi) = cfg.dims.unwrap_or((cfg.dim, cfg.dim));
    let reports: Vec<_> = (lo..=hi).map(threshold_report).collect::<Result<_, _>>()?;
    let rows: Vec<String> = reports
        .iter()
        .map(|r| {
            let b0 = r.beta_0.map(|v| format!("{v:.12}")).unwrap_or_default();
            format!("{},{:.12},{:.12},{},{}", r.d, r.beta_c, r.beta_s, b0, r.ordering.as_str())
        })
        .collect();
    let header = "d,beta_c,beta_s,beta_0,ordering";
    prepare_out(cfg)?;
    write_csv(&cfg.out.join("thresholds.csv"), header, rows.iter().cloned())?;
    println!("{header}");
    for r in rows {
        println!("{r}");
    }
    Ok(())
}

fn write_trajectory(cfg: &ExperimentConfig, tr: &Trajectory) -> Outcome {
    let header = DiagnosticsRow::csv_header(tr.params.track_modes.len());
    write_csv(&cfg.out.join("diagnostics.csv"), &header, tr.diagnostics.iter().map(|r| r.csv_line()))?;
    for (i, (t, f)) in tr.snapshots.iter().enumerate() {
        let file = fs::File::create(cfg.out.join(format!("snap_{i:05}.lgas")))?;
        write_snapshot(BufWriter::new(file), f, *t)?;
    }
    Ok(())
}

pub fn solve(cfg: &ExperimentConfig) -> Outcome {
    let p = model_params(cfg);
    p.validate()?;
    let tables = PotentialTables::new(cfg.dim, cfg.grid)?;
    let mu0 = match cfg.initial {
        Initial::Uniform => FourierField::uniform(tables.grid()),
        Initial::Cosine => checked_cosine(cfg, tables.grid())?,
        Initial::Bump => bump_family(cfg.lambda, cfg.dim, cfg.grid)?,
    };
    let rule = match cfg.stop {
        Stop::Horizon => StopRule::Horizon,
        Stop::L1Above => StopRule::L1Above(cfg.tol),
        Stop::L2Below => StopRule::L2Below(cfg.tol),
    };
    let recording = Recording {
        diagnostics_every: cfg.diagnostics_every,
        snapshots_every: (cfg.snapshots_every > 0).then_some(cfg.snapshots_every),
    };
    prepare_out(cfg)?;
    let tr = run(&mu0, &p, &tables, rule, recording)?;
    write_trajectory(cfg, &tr)?;
    let l2 = distance_to_uniform(&tr.final_state, Norm::L2);
    let l1 = distance_to_uniform(&tr.final_state, Norm::L1);
    println!("steps: {}", tr.steps);
    println!("final_time: {}", tr.final_time);
    println!("final_l1_dist: {l1:e}");
    println!("final_l2_dist: {l2:e}");
    match (tr.stop, cfg.stop) {
        (StopReason::BlowUp { t }, _) => {
            println!("stop: blow-up at t = {t}");
            Err(Failure::BlowUp(format!("blow-up detected at t = {t}; partial outputs written")))
        }
        (StopReason::Horizon, Stop::Horizon) => {
            println!("stop: horizon");
            Ok(())
        }
        (StopReason::Horizon, _) => Err(Failure::NonConvergence(format!(
            "stop rule not met by t = {}; final L1 {l1:e}, L2 {l2:e}",
            tr.final_time
        ))),
        (StopReason::L1Above { t }, _) => {
            println!("stop: l1_above at t = {t}");
            Ok(())
        }
        (StopReason::L2Below { t }, _) => {
            println!("stop: l2_below at t = {t}");
            Ok(())
        }
        (StopReason::ResidualBelow { t }, _) => {
            println!("stop: residual_below at t = {t}");
            Ok(())
        }
    }
}

fn particle_csv(ens: &ParticleEnsemble) -> String {
    let d = ens.dim();
    let mut s = String::from("i");
    for a in 1..=d {
        let _ = write!(s, ",x{a}");
    }
    s.push('\n');
    for i in 0..ens.len() {
        let _ = write!(s, "{i}");
        for v in ens.particle(i) {
            let _ = write!(s, ",{v:.17e}");
        }
        s.push('\n');
    }
    s
}

struct SeedRun {
    rows: Vec<String>,
    positions: String,
    final_chaos: f64,
    msd: Vec<f64>,
}

fn min_image(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - d.round()
}

pub fn particles(cfg: &ExperimentConfig) -> Outcome {
    if cfg.n_particles == 0 {
        return Err(Failure::Usage("n_particles must be positive".into()));
    }
    if !(cfg.eta > 0.0) {
        return Err(Failure::Usage("particle runs need eta > 0".into()));
    }
    let tables = PotentialTables::new(cfg.dim, cfg.grid)?;
    let mu0 = checked_cosine(cfg, tables.grid())?;
    let ratio = (cfg.dt / 1e-3).ceil().max(1.0) as usize;
    let mut p = model_params(cfg);
    p.dt = cfg.dt / ratio as f64;
    p.validate()?;
    let steps = (cfg.tmax / cfg.dt).round() as usize;
    let every = cfg.diagnostics_every;
    let reference = run(
        &mu0,
        &p,
        &tables,
        StopRule::Horizon,
        Recording { diagnostics_every: every * ratio, snapshots_every: Some(every * ratio) },
    )?;
    if let StopReason::BlowUp { t } = reference.stop {
        return Err(Failure::BlowUp(format!("reference PDE blew up at t = {t}")));
    }
    let reference_at = |s: usize| -> &FourierField {
        let t = s as f64 * cfg.dt;
        &reference
            .snapshots
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .expect("reference has snapshots")
            .1
    };
    let d = cfg.dim;
    let runs: Vec<Result<SeedRun, Error>> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|s| {
            let seed = cfg.seed + s;
            let mut ens = ParticleEnsemble::sample(&mu0, cfg.n_particles, cfg.beta, cfg.eta, seed)?;
            let start = ens.positions().to_vec();
            let mut unwrapped = vec![0.0; start.len()];
            let mut rows = vec![];
            let mut msd = vec![];
            let mut record = |step: usize, ens: &ParticleEnsemble, disp: &[f64]| -> Result<(), Error> {
                let mu = reference_at(step);
                let energy = ens.pair_energy(&tables)?;
                let fn_ref = modulated_energy(ens.positions(), mu, &tables)?;
                let chaos = chaos_distance(ens.positions(), mu, cfg.bandwidth)?;
                rows.push(format!("{:.12e},{energy:.15e},{fn_ref:.15e},{chaos:.15e}", step as f64 * cfg.dt));
                msd.push(disp.iter().map(|v| v * v).sum::<f64>() / ens.len() as f64);
                Ok(())
            };
            record(0, &ens, &unwrapped)?;
            for step in 1..=steps {
                let before = ens.positions().to_vec();
                ens.step(cfg.dt, &tables)?;
                for ((u, a), b) in unwrapped.iter_mut().zip(ens.positions()).zip(&before) {
                    *u += min_image(*a, *b);
                }
                if step % every == 0 || step == steps {
                    record(step, &ens, &unwrapped)?;
                }
            }
            let final_chaos = chaos_distance(ens.positions(), reference_at(steps), cfg.bandwidth)?;
            Ok(SeedRun { rows, positions: particle_csv(&ens), final_chaos, msd })
        })
        .collect();
    let runs: Vec<SeedRun> = runs.into_iter().collect::<Result<_, _>>()?;
    prepare_out(cfg)?;
    for (s, r) in runs.iter().enumerate() {
        let seed = cfg.seed + s as u64;
        write_csv(
            &cfg.out.join(format!("ensemble_seed{seed}.csv")),
            "t,pair_energy,F_N_vs_reference,chaos_distance",
            r.rows.iter().cloned(),
        )?;
        fs::write(cfg.out.join(format!("particles_seed{seed}.csv")), &r.positions)?;
    }
    let mut chaos: Vec<f64> = runs.iter().map(|r| r.final_chaos).collect();
    write_csv(
        &cfg.out.join("chaos.csv"),
        "seed,chaos_distance",
        chaos.iter().enumerate().map(|(s, c)| format!("{},{c:.15e}", cfg.seed + s as u64)),
    )?;
    chaos.sort_by(|a, b| a.total_cmp(b));
    let m = chaos.len();
    let median = if m % 2 == 1 { chaos[m / 2] } else { 0.5 * (chaos[m / 2 - 1] + chaos[m / 2]) };
    println!("n_particles: {}", cfg.n_particles);
    println!("seeds: {}", cfg.seeds);
    println!("median_chaos_distance: {median:e}");
    if cfg.n_particles == 1 {
        let n_rec = runs[0].msd.len();
        let rows = (0..n_rec).map(|j| {
            let t = runs[0].rows[j].split(',').next().unwrap_or("0").to_string();
            let tv: f64 = t.parse().unwrap_or(0.0);
            let mean = runs.iter().map(|r| r.msd[j]).sum::<f64>() / runs.len() as f64;
            format!("{t},{mean:.15e},{:.15e}", 2.0 * d as f64 * tv / cfg.beta)
        });
        write_csv(&cfg.out.join("brownian.csv"), "t,mean_square_displacement,expected", rows)?;
        let last = runs.iter().map(|r| *r.msd.last().unwrap_or(&0.0)).sum::<f64>() / runs.len() as f64;
        let want = 2.0 * d as f64 * steps as f64 * cfg.dt / cfg.beta;
        println!("brownian_msd: {last:e} (expected {want:e})");
    }
    if cfg.n_mc > 0 {
        let (mean, se) = monte_carlo_modulated_energy(&mu0, &mu0, cfg.n_particles, cfg.n_mc, cfg.seed, &tables)?;
        let closed = expected_modulated_energy(&mu0, &mu0, cfg.n_particles, &tables)?;
        write_csv(
            &cfg.out.join("modulated_energy.csv"),
            "n,n_mc,mean,std_error,closed_form",
            [format!("{},{},{mean:.15e},{se:.15e},{closed:.15e}", cfg.n_particles, cfg.n_mc)],
        )?;
        println!("modulated_energy: {mean:e} +- {se:e} (closed form {closed:e})");
    }
    Ok(())
}

struct SteadyRow {
    beta: f64,
    converged: bool,
    diverged: bool,
    iterations: usize,
    residual: f64,
    l2: f64,
    energy: f64,
    bound: f64,
    mu: FourierField,
}

fn steady_at(cfg: &ExperimentConfig, beta: f64, tables: &PotentialTables) -> Result<SteadyRow, Failure> {
    let init = checked_cosine(cfg, tables.grid())?;
    let fp = kirkwood_monroe_fixed_point(&init, beta, tables, 0.5, cfg.tol, 5000)?;
    Ok(SteadyRow {
        beta,
        converged: fp.converged,
        diverged: fp.diverged,
        iterations: fp.iterations,
        residual: fp.residual,
        l2: distance_to_uniform(&fp.mu, Norm::L2),
        energy: free_energy(&fp.mu, beta, tables).unwrap_or(f64::NAN),
        bound: infimum_bound(beta, cfg.dim)?,
        mu: fp.mu,
    })
}

pub fn steady(cfg: &ExperimentConfig) -> Outcome {
    let tables = PotentialTables::new(cfg.dim, cfg.grid)?;
    let betas: Vec<f64> = match cfg.beta_sweep {
        None => vec![cfg.beta],
        Some((a, b, h)) => {
            if !(h > 0.0) || b < a {
                return Err(Failure::Usage(format!("beta_sweep {a}:{b}:{h} is empty")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|i| a + i as f64 * h).collect()
        }
    };
    let rows: Vec<SteadyRow> =
        betas.par_iter().map(|&b| steady_at(cfg, b, &tables)).collect::<Result<_, _>>()?;
    prepare_out(cfg)?;
    write_csv(
        &cfg.out.join("steady.csv"),
        "beta,converged,iterations,residual,l2_dist,free_energy,infimum_bound",
        rows.iter().map(|r| {
            format!(
                "{:.12e},{},{},{:.6e},{:.15e},{:.15e},{:.15e}",
                r.beta, r.converged, r.iterations, r.residual, r.l2, r.energy, r.bound
            )
        }),
    )?;
    if rows.len() == 1 {
        let file = fs::File::create(cfg.out.join("steady.lgas"))?;
        write_snapshot(BufWriter::new(file), &rows[0].mu, 0.0)?;
    }
    for r in &rows {
        println!(
            "beta {}: converged {}, residual {:.2e}, l2_dist {:.3e}, E {:.6e}, bound {:.3e}",
            r.beta, r.converged, r.residual, r.l2, r.energy, r.bound
        );
    }
    if rows.len() > 1 {
        let beta_s = dimension_constants(cfg.dim)?.beta_s;
        match rows.iter().find(|r| r.converged && r.l2 > 1e-6) {
            Some(r) => println!("departure from uniform at beta = {} (beta_s = {beta_s})", r.beta),
            None => println!("no departure from uniform in the sweep (beta_s = {beta_s})"),
        }
    }
    if let Some(r) = rows.iter().find(|r| !r.converged) {
        let why = if r.diverged { "diverged" } else { "did not converge" };
        return Err(Failure::NonConvergence(format!(
            "fixed-point iteration {why} at beta = {} (residual {:.2e})",
            r.beta, r.residual
        )));
    }
    Ok(())
}

pub fn mlhls(cfg: &ExperimentConfig) -> Outcome {
    let c = dimension_constants(cfg.dim)?;
    let threshold = c.beta_s.min(c.beta_c);
    if !(cfg.beta > threshold) {
        return Err(Failure::Usage(format!(
            "beta = {} must exceed min(beta_s, beta_c) = {threshold} for a nonuniform minimizer",
            cfg.beta
        )));
    }
    let tables = PotentialTables::new(cfg.dim, cfg.grid)?;
    let row = steady_at(cfg, cfg.beta, &tables)?;
    if !row.converged {
        return Err(Failure::NonConvergence(format!(
            "no steady state at beta = {} (residual {:.2e})",
            cfg.beta, row.residual
        )));
    }
    let probe = mlhls_counterexample(cfg.dim, cfg.beta, &row.mu, &tables, &[])?;
    let ns: Vec<usize> = (2..probe.n0 + 200).chain([1000, 10_000, 1_000_000]).collect();
    let cert = mlhls_counterexample(cfg.dim, cfg.beta, &row.mu, &tables, &ns)?;
    prepare_out(cfg)?;
    write_csv(
        &cfg.out.join("mlhls.csv"),
        "n,lhs,rhs,gap,n0",
        cert.rows.iter().map(|(n, rhs, gap)| format!("{n},{:.15e},{rhs:.15e},{gap:.15e},{}", cert.lhs, cert.n0)),
    )?;
    println!("eta_beta: {:e}", cert.eta_beta);
    println!("interaction: {:e}", cert.interaction);
    println!("lhs: {:e}", cert.lhs);
    println!("eta: {:e}", cert.eta);
    println!("n0: {}", cert.n0);
    Ok(())
}

pub fn grenier(cfg: &ExperimentConfig) -> Outcome {
    let exp = GrenierExpansion::new(cfg.beta, cfg.dim, &cfg.mode_k, cfg.order)?;
    if exp.lambda <= 0.0 {
        return Err(Failure::Usage(format!(
            "mode {:?} is linearly stable at beta = {} (lambda = {})",
            cfg.mode_k, cfg.beta, exp.lambda
        )));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 0.5) {
        return Err(Failure::Usage(format!("eps = {} outside (0, 1/2)", cfg.eps)));
    }
    let valid = exp.validity_time(cfg.eps);
    let horizon = if cfg.tmax > 0.0 { valid.min(cfg.tmax) } else { valid };
    let samples = 200;
    prepare_out(cfg)?;
    write_csv(
        &cfg.out.join("grenier.csv"),
        "t,l1_dist,residual_bound",
        (0..=samples).map(|i| {
            let t = horizon * i as f64 / samples as f64;
            format!("{t:.12e},{:.15e},{:.15e}", exp.l1_distance(cfg.eps, t), exp.residual_bound(cfg.eps, t))
        }),
    )?;
    println!("lambda: {}", exp.lambda);
    println!("validity_time: {}", exp.validity_time(cfg.eps));
    println!("leading_escape_time: {}", leading_escape_time(exp.lambda, cfg.eps));
    match instability_time_forecast(&exp, cfg.eps, 0.0) {
        Ok(t) => println!("forecast_escape_time: {t}"),
        Err(e) => println!("forecast_escape_time: none ({e})"),
    }
    match certified_escape_bound(&exp, cfg.eps, 0.0) {
        Ok(t) => println!("certified_escape_time: {t}"),
        Err(e) => println!("certified_escape_time: none ({e})"),
    }
    Ok(())
}
