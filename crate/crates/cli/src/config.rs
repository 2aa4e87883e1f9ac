//! Flat `key = value` experiment configuration.
//!
//! Values are resolved in three layers: the named preset, then the config
//! file, then command-line flags. The resolved configuration is written next
//! to every run's outputs and parses back to the same value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Initial density for `solve`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    Uniform,
    /// `1 + 2ε cos(2π k·x)` with `k = mode_k`.
    Cosine,
    /// Normalized smooth bump of radius `λ/8` centred at the origin.
    Bump,
}

/// Stop rule for `solve`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Horizon,
    L1Above,
    L2Below,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub dim: usize,
    pub dims: Option<(usize, usize)>,
    pub beta: f64,
    pub grid: usize,
    pub dt: f64,
    pub tmax: f64,
    pub eps: f64,
    pub mode_k: Vec<i64>,
    pub initial: Initial,
    pub lambda: f64,
    pub stop: Stop,
    pub tol: f64,
    pub n_particles: usize,
    pub eta: f64,
    pub seed: u64,
    pub seeds: usize,
    pub bandwidth: f64,
    pub n_mc: usize,
    pub order: usize,
    pub beta_sweep: Option<(f64, f64, f64)>,
    pub diagnostics_every: usize,
    pub snapshots_every: usize,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            preset: None,
            dim: 2,
            dims: None,
            beta: 2.0,
            grid: 32,
            dt: 1e-3,
            tmax: 1.0,
            eps: 0.1,
            mode_k: vec![1, 0],
            initial: Initial::Cosine,
            lambda: 0.25,
            stop: Stop::Horizon,
            tol: 1e-6,
            n_particles: 256,
            eta: 1e-3,
            seed: 0,
            seeds: 1,
            bandwidth: 0.01,
            n_mc: 0,
            order: 2,
            beta_sweep: None,
            diagnostics_every: 10,
            snapshots_every: 0,
            out: PathBuf::from("out"),
        }
    }
}

pub const PRESETS: [&str; 6] = ["relaxation", "instability", "chaos", "steady", "mlhls", "thresholds"];

fn preset_pairs(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "relaxation" => &[
            ("dim", "2"),
            ("beta", "2"),
            ("grid", "32"),
            ("dt", "1e-3"),
            ("tmax", "2"),
            ("eps", "0.1"),
            ("initial", "cosine"),
            ("stop", "l2_below"),
            ("tol", "1e-7"),
        ],
        "instability" => &[
            ("dim", "2"),
            ("beta", "9.42477796076938"),
            ("grid", "64"),
            ("dt", "1e-3"),
            ("tmax", "10"),
            ("eps", "1e-3"),
            ("initial", "cosine"),
            ("stop", "l1_above"),
            ("tol", "0.5"),
        ],
        "chaos" => &[
            ("dim", "2"),
            ("beta", "2"),
            ("grid", "32"),
            ("dt", "2.5e-3"),
            ("tmax", "0.5"),
            ("eps", "0.25"),
            ("n_particles", "256"),
            ("eta", "1e-3"),
            ("seeds", "20"),
            ("bandwidth", "0.01"),
            ("diagnostics_every", "20"),
        ],
        "steady" => &[("dim", "2"), ("beta", "8"), ("grid", "64"), ("eps", "0.25"), ("tol", "1e-10")],
        "mlhls" => &[("dim", "2"), ("beta", "8"), ("grid", "64"), ("eps", "0.25"), ("tol", "1e-10")],
        "thresholds" => &[("dims", "1-17")],
        _ => return None,
    })
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.trim().parse().map_err(|_| ConfigError(format!("invalid value for {key}: {v:?}")))
}

fn pair(key: &str, v: &str, sep: char) -> Result<(usize, usize), ConfigError> {
    let (a, b) = v.split_once(sep).ok_or_else(|| ConfigError(format!("{key} expects a{sep}b, got {v:?}")))?;
    Ok((num(key, a)?, num(key, b)?))
}

fn format_f(v: f64) -> String {
    format!("{v:?}")
}

impl ExperimentConfig {
    /// Sets one key; keys accept `-` or `_` as separators.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "preset" => {
                self.apply_preset(v)?;
                self.preset = Some(v.to_string());
            }
            "dim" => self.dim = num(&key, v)?,
            "dims" => {
                self.dims = if v.is_empty() { None } else { Some(pair(&key, v, '-')?) };
            }
            "beta" => self.beta = num(&key, v)?,
            "grid" => self.grid = num(&key, v)?,
            "dt" => self.dt = num(&key, v)?,
            "tmax" => self.tmax = num(&key, v)?,
            "eps" => self.eps = num(&key, v)?,
            "mode_k" => {
                self.mode_k = v.split(',').map(|s| num(&key, s)).collect::<Result<_, _>>()?;
            }
            "initial" => {
                self.initial = match v {
                    "uniform" => Initial::Uniform,
                    "cosine" => Initial::Cosine,
                    "bump" => Initial::Bump,
                    _ => return Err(ConfigError(format!("unknown initial datum {v:?}"))),
                }
            }
            "lambda" => self.lambda = num(&key, v)?,
            "stop" => {
                self.stop = match v {
                    "horizon" => Stop::Horizon,
                    "l1_above" => Stop::L1Above,
                    "l2_below" => Stop::L2Below,
                    _ => return Err(ConfigError(format!("unknown stop rule {v:?}"))),
                }
            }
            "tol" => self.tol = num(&key, v)?,
            "n_particles" => self.n_particles = num(&key, v)?,
            "eta" => self.eta = num(&key, v)?,
            "seed" => self.seed = num(&key, v)?,
            "seeds" => self.seeds = num(&key, v)?,
            "bandwidth" => self.bandwidth = num(&key, v)?,
            "n_mc" => self.n_mc = num(&key, v)?,
            "order" => self.order = num(&key, v)?,
            "beta_sweep" => {
                self.beta_sweep = if v.is_empty() {
                    None
                } else {
                    let parts: Vec<&str> = v.split(':').collect();
                    if parts.len() != 3 {
                        return Err(ConfigError(format!("beta_sweep expects start:stop:step, got {v:?}")));
                    }
                    Some((num(&key, parts[0])?, num(&key, parts[1])?, num(&key, parts[2])?))
                }
            }
            "diagnostics_every" => self.diagnostics_every = num(&key, v)?,
            "snapshots_every" => self.snapshots_every = num(&key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(ConfigError(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_preset(&mut self, name: &str) -> Result<(), ConfigError> {
        let pairs = preset_pairs(name).ok_or_else(|| {
            ConfigError(format!("unknown preset {name:?}; available: {}", PRESETS.join(", ")))
        })?;
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Applies a config file body. A `preset` line is applied before the other keys.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut entries = vec![];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        entries.sort_by_key(|(k, _)| k != "preset");
        for (k, v) in entries {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every key, in a fixed order, as it would appear in a config file.
    pub fn to_text(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("dim", self.dim.to_string());
        m.insert("dims", self.dims.map(|(a, b)| format!("{a}-{b}")).unwrap_or_default());
        m.insert("beta", format_f(self.beta));
        m.insert("grid", self.grid.to_string());
        m.insert("dt", format_f(self.dt));
        m.insert("tmax", format_f(self.tmax));
        m.insert("eps", format_f(self.eps));
        m.insert("mode_k", self.mode_k.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
        m.insert(
            "initial",
            match self.initial {
                Initial::Uniform => "uniform",
                Initial::Cosine => "cosine",
                Initial::Bump => "bump",
            }
            .into(),
        );
        m.insert("lambda", format_f(self.lambda));
        m.insert(
            "stop",
            match self.stop {
                Stop::Horizon => "horizon",
                Stop::L1Above => "l1_above",
                Stop::L2Below => "l2_below",
            }
            .into(),
        );
        m.insert("tol", format_f(self.tol));
        m.insert("n_particles", self.n_particles.to_string());
        m.insert("eta", format_f(self.eta));
        m.insert("seed", self.seed.to_string());
        m.insert("seeds", self.seeds.to_string());
        m.insert("bandwidth", format_f(self.bandwidth));
        m.insert("n_mc", self.n_mc.to_string());
        m.insert("order", self.order.to_string());
        m.insert(
            "beta_sweep",
            self.beta_sweep.map(|(a, b, c)| format!("{}:{}:{}", format_f(a), format_f(b), format_f(c))).unwrap_or_default(),
        );
        m.insert("diagnostics_every", self.diagnostics_every.to_string());
        m.insert("snapshots_every", self.snapshots_every.to_string());
        m.insert("out", self.out.display().to_string());
        let mut s = String::new();
        if let Some(p) = &self.preset {
            s.push_str(&format!("# resolved from preset {p}\n"));
        }
        for (k, v) in m {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim == 0 {
            return Err(ConfigError("dim must be at least 1".into()));
        }
        if let Some((a, b)) = self.dims {
            if a == 0 || b < a {
                return Err(ConfigError(format!("dims range {a}-{b} is empty or contains 0")));
            }
        }
        if self.mode_k.len() != self.dim {
            return Err(ConfigError(format!(
                "mode_k has {} components but dim = {}",
                self.mode_k.len(),
                self.dim
            )));
        }
        if self.diagnostics_every == 0 {
            return Err(ConfigError("diagnostics_every must be positive".into()));
        }
        if self.seeds == 0 {
            return Err(ConfigError("seeds must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_text() {
        for p in PRESETS {
            let mut c = ExperimentConfig::default();
            c.apply_preset(p).unwrap();
            c.preset = Some(p.into());
            c.seed = 17;
            let back = ExperimentConfig::parse(&c.to_text()).unwrap();
            let keys = |t: String| t.lines().filter(|l| !l.starts_with('#')).map(String::from).collect::<Vec<_>>();
            assert_eq!(keys(back.to_text()), keys(c.to_text()));
            assert_eq!(ExperimentConfig { preset: c.preset.clone(), ..back }, c);
        }
    }

    #[test]
    fn file_overrides_preset_regardless_of_order() {
        let c = ExperimentConfig::parse("beta = 5\npreset = relaxation\n# comment\n").unwrap();
        assert_eq!(c.beta, 5.0);
        assert_eq!(c.stop, Stop::L2Below);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("beta 2").is_err());
        assert!(ExperimentConfig::parse("colour = red").is_err());
        assert!(ExperimentConfig::parse("preset = nope").is_err());
        assert!(ExperimentConfig::parse("grid = -4").is_err());
        let mut c = ExperimentConfig::parse("dim = 3").unwrap();
        assert!(c.validate().is_err());
        c.mode_k = vec![1, 0, 0];
        assert!(c.validate().is_ok());
    }
}
