mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use commands::Failure;
use config::ExperimentConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "loggas", version, about = "Experiments for the attractive log gas on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical inverse temperatures per dimension.
    Thresholds(Flags),
    /// Integrate the mean-field equation.
    Solve(Flags),
    /// Run particle ensembles against a matched PDE reference.
    Particles(Flags),
    /// Steady states by fixed-point iteration.
    Steady(Flags),
    /// Violation certificate for the modulated log-HLS inequality.
    Mlhls(Flags),
    /// Higher-order unstable-mode expansion and escape forecasts.
    Grenier(Flags),
}

#[derive(Args, Default)]
struct Flags {
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Wavevector as comma-separated integers, e.g. `1,0`.
    #[arg(long, allow_hyphen_values = true)]
    mode_k: Option<String>,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat `key = value` file applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

impl Flags {
    fn resolve(&self, thresholds: bool) -> Result<ExperimentConfig, Failure> {
        let usage = |e: config::ConfigError| Failure::Usage(e.to_string());
        let mut cfg = ExperimentConfig::default();
        if let Some(p) = &self.preset {
            cfg.set("preset", p).map_err(usage)?;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_text(&text).map_err(usage)?;
            if let Some(p) = &self.preset {
                cfg.preset = Some(p.clone());
            }
        }
        let overrides: [(&str, Option<String>); 11] = [
            ("dim", self.dim.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| format!("{v:?}"))),
            ("grid", self.grid.map(|v| v.to_string())),
            ("dt", self.dt.map(|v| format!("{v:?}"))),
            ("tmax", self.tmax.map(|v| format!("{v:?}"))),
            ("eps", self.eps.map(|v| format!("{v:?}"))),
            ("mode_k", self.mode_k.clone()),
            ("n_particles", self.n_particles.map(|v| v.to_string())),
            ("eta", self.eta.map(|v| format!("{v:?}"))),
            ("seed", self.seed.map(|v| v.to_string())),
            ("n_mc", self.n_mc.map(|v| v.to_string())),
        ];
        for (k, v) in overrides {
            if let Some(v) = v {
                cfg.set(k, &v).map_err(usage)?;
            }
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.dim.is_some() {
            if thresholds {
                cfg.dims = None;
            }
            if self.mode_k.is_none() && cfg.mode_k.len() != cfg.dim {
                let mut k = vec![0; cfg.dim.max(1)];
                k[0] = 1;
                cfg.mode_k = k;
            }
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Thresholds(f) => commands::thresholds(&f.resolve(true)?),
        Command::Solve(f) => commands::solve(&f.resolve(false)?),
        Command::Particles(f) => commands::particles(&f.resolve(false)?),
        Command::Steady(f) => commands::steady(&f.resolve(false)?),
        Command::Mlhls(f) => commands::mlhls(&f.resolve(false)?),
        Command::Grenier(f) => commands::grenier(&f.resolve(false)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code() as u8)
        }
    }
}
