//! Interacting particle system, modulated energies and chaos diagnostics.

use crate::error::{Error, Result};
use crate::field::{check_beta, convolve_g, interaction_energy, relative_entropy, FourierField};
use crate::grid::Grid;
use crate::potential::{norm_sq, wrap, PotentialTables};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Particle positions on the torus with their noise stream.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    d: usize,
    positions: Vec<f64>,
    /// Inverse temperature; `f64::INFINITY` switches the noise off.
    pub beta: f64,
    /// Force truncation radius, zero for the bare kernel.
    pub eta: f64,
    seed: u64,
    time: f64,
    rng: ChaCha8Rng,
}

impl ParticleEnsemble {
    /// Wraps `positions` (row-major, `N × d`) onto the torus.
    pub fn new(d: usize, positions: Vec<f64>, beta: f64, eta: f64, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        if positions.is_empty() || positions.len() % d != 0 {
            return Err(Error::InvalidParameter("positions must hold N >= 1 points of dimension d".into()));
        }
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("inverse temperature {beta} must be positive")));
        }
        if !(0.0..0.5).contains(&eta) {
            return Err(Error::InvalidParameter(format!("truncation radius {eta} outside [0, 1/2)")));
        }
        let positions = positions.into_iter().map(wrap).collect();
        Ok(Self { d, positions, beta, eta, seed, time: 0.0, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    /// `N` i.i.d. samples of the grid density `mu`.
    pub fn sample(mu: &FourierField, n: usize, beta: f64, eta: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions = sample_density(mu, n, &mut rng)?;
        let mut e = Self::new(mu.grid().dim(), positions, beta, eta, seed)?;
        e.rng = rng;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.d..(i + 1) * self.d]
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean-field drift `N^{-1} Σ_{j≠i} ∇g_(η)(x_i - x_j)` for every particle.
    pub fn drift(&self, tables: &PotentialTables) -> Result<Vec<f64>> {
        if tables.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: tables.dim(), found: self.d });
        }
        let d = self.d;
        let n = self.len();
        let eta = self.eta;
        let order = spatial_order(&self.positions, d);
        let x: Vec<f64> = order.iter().flat_map(|&i| self.particle(i).iter().copied()).collect();
        let table = tables.force_table();
        let partials: Vec<Result<Vec<f64>>> = pair_blocks(n)
            .into_par_iter()
            .map(|(lo, hi)| {
                let mut acc = vec![0.0; n * d];
                let mut disp = [0.0; 3];
                let mut f = [0.0; 3];
                for i in lo..hi {
                    for j in (i + 1)..n {
                        for a in 0..d {
                            disp[a] = wrap(x[i * d + a] - x[j * d + a]);
                        }
                        if eta == 0.0 && norm_sq(&disp[..d]) == 0.0 {
                            return Err(Error::Collision);
                        }
                        tables.force_with(table, &disp[..d], eta, &mut f[..d]);
                        for a in 0..d {
                            acc[i * d + a] += f[a];
                            acc[j * d + a] -= f[a];
                        }
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut sorted = vec![0.0; n * d];
        for p in partials {
            sorted.iter_mut().zip(p?).for_each(|(o, v)| *o += v);
        }
        let mut out = vec![0.0; n * d];
        for (k, &i) in order.iter().enumerate() {
            for a in 0..d {
                out[i * d + a] = sorted[k * d + a] / n as f64;
            }
        }
        Ok(out)
    }

    /// One Euler–Maruyama step; noise is drawn in particle order.
    pub fn step(&mut self, dt: f64, tables: &PotentialTables) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter("time step must be positive".into()));
        }
        if self.eta == 0.0 {
            return Err(Error::InvalidParameter("stepping needs a positive truncation radius".into()));
        }
        let drift = self.drift(tables)?;
        let scale = if self.beta.is_finite() { (2.0 * dt / self.beta).sqrt() } else { 0.0 };
        for (k, x) in self.positions.iter_mut().enumerate() {
            let mut v = *x + dt * drift[k];
            if scale > 0.0 {
                let xi: f64 = StandardNormal.sample(&mut self.rng);
                v += scale * xi;
            }
            *x = wrap(v);
        }
        self.time += dt;
        Ok(())
    }

    /// `Σ_{i≠j} g_(η)(x_i - x_j) / (2N²)`.
    pub fn pair_energy(&self, tables: &PotentialTables) -> Result<f64> {
        pair_sum(&self.positions, self.d, self.eta, tables)
    }
}

/// Draws `n` points from a grid density treated as constant on node-centred cells.
pub fn sample_density(mu: &FourierField, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let weights: Vec<f64> = mu.values().iter().map(|v| v.max(0.0)).collect();
    let alias = WeightedAliasIndex::new(weights).map_err(|e| Error::MonteCarlo(e.to_string()))?;
    let grid = mu.grid();
    let h = grid.spacing();
    let mut out = Vec::with_capacity(n * grid.dim());
    for _ in 0..n {
        let idx = alias.sample(rng);
        for c in grid.point(idx) {
            let u: f64 = rng.random();
            out.push(wrap(c + (u - 0.5) * h));
        }
    }
    Ok(out)
}

/// Particle indices sorted by a coarse cell, so that neighbouring pairs hit nearby table rows.
fn spatial_order(x: &[f64], d: usize) -> Vec<usize> {
    let key = |i: usize| cell_of(&x[i * d..(i + 1) * d], 32);
    let mut order: Vec<usize> = (0..x.len() / d).collect();
    order.sort_by_key(|&i| (key(i), i));
    order
}

/// Fixed row ranges with roughly equal numbers of pairs `i < j`.
fn pair_blocks(n: usize) -> Vec<(usize, usize)> {
    const BLOCKS: usize = 16;
    let total = n * n.saturating_sub(1) / 2;
    let mut out = Vec::with_capacity(BLOCKS);
    let (mut lo, mut done) = (0usize, 0usize);
    for b in 1..=BLOCKS {
        let target = total * b / BLOCKS;
        let mut hi = lo;
        while hi < n && (done < target || b == BLOCKS) {
            done += n - hi - 1;
            hi += 1;
        }
        if hi > lo {
            out.push((lo, hi));
        }
        lo = hi;
    }
    out
}

fn pair_sum(x: &[f64], d: usize, eta: f64, tables: &PotentialTables) -> Result<f64> {
    if tables.dim() != d {
        return Err(Error::DimensionMismatch { expected: tables.dim(), found: d });
    }
    let n = x.len() / d;
    tables.force_table();
    let rows: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut disp = [0.0; 3];
            let mut s = 0.0;
            for j in (i + 1)..n {
                for a in 0..d {
                    disp[a] = wrap(x[i * d + a] - x[j * d + a]);
                }
                if eta == 0.0 && norm_sq(&disp[..d]) == 0.0 {
                    return Err(Error::Collision);
                }
                s += tables.g_eta_fast(&disp[..d], eta);
            }
            Ok(s)
        })
        .collect();
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total / (n * n) as f64)
}

fn check_positions(x: &[f64], mu: &FourierField) -> Result<usize> {
    let d = mu.grid().dim();
    if x.is_empty() || x.len() % d != 0 {
        return Err(Error::DimensionMismatch { expected: d, found: x.len() % d.max(1) });
    }
    Ok(x.len() / d)
}

fn modulated(x: &[f64], mu: &FourierField, eta: f64, tables: &PotentialTables) -> Result<f64> {
    let n = check_positions(x, mu)?;
    let d = mu.grid().dim();
    let (potential, self_energy) = if eta > 0.0 {
        let m = tables.g_eta_hat_grid(eta)?;
        let v = mu.apply_multiplier(&m);
        let w: f64 = mu.coeffs().iter().zip(m.iter()).map(|(c, g)| g * c.norm_sqr()).sum();
        (v, w)
    } else {
        (convolve_g(mu, tables)?, interaction_energy(mu, mu, tables)?)
    };
    let field_term: f64 =
        (0..n).map(|i| potential.interpolate(&x[i * d..(i + 1) * d])).sum::<f64>() / n as f64;
    Ok(pair_sum(x, d, eta, tables)? - field_term + 0.5 * self_energy)
}

/// `F_N(X, μ) = (2N²)^{-1} Σ_{i≠j} g(x_i-x_j) - N^{-1} Σ_i g*μ(x_i) + ½ ∬ g dμ⊗²`.
pub fn modulated_energy(x: &[f64], mu: &FourierField, tables: &PotentialTables) -> Result<f64> {
    modulated(x, mu, 0.0, tables)
}

/// [`modulated_energy`] with `g` replaced by `g_(η)`.
pub fn modulated_energy_truncated(
    x: &[f64],
    mu: &FourierField,
    eta: f64,
    tables: &PotentialTables,
) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("truncation radius must be positive".into()));
    }
    modulated(x, mu, eta, tables)
}

/// `E[F_N(X, μ)]` for `X ~ ν^{⊗N}`: `(N-1)/(2N) W(ν,ν) - W(ν,μ) + ½ W(μ,μ)`.
pub fn expected_modulated_energy(
    nu: &FourierField,
    mu: &FourierField,
    n: usize,
    tables: &PotentialTables,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let nn = n as f64;
    Ok((nn - 1.0) / (2.0 * nn) * interaction_energy(nu, nu, tables)?
        - interaction_energy(nu, mu, tables)?
        + 0.5 * interaction_energy(mu, mu, tables)?)
}

/// Per-particle relative entropy `N^{-1} H(ν^{⊗N} | μ^{⊗N}) = H(ν | μ)`.
pub fn product_relative_entropy(nu: &FourierField, mu: &FourierField) -> Result<f64> {
    relative_entropy(nu, mu)
}

/// Monte Carlo estimate of the modulated free energy of `ν^{⊗N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulatedFreeEnergy {
    pub entropy_term: f64,
    pub mean_energy: f64,
    pub std_error: f64,
    pub estimate: f64,
    pub closed_form_energy: f64,
}

pub fn modulated_free_energy_product(
    nu: &FourierField,
    mu: &FourierField,
    n: usize,
    beta: f64,
    n_mc: usize,
    seed: u64,
    tables: &PotentialTables,
) -> Result<ModulatedFreeEnergy> {
    check_beta(beta)?;
    let (mean_energy, std_error) = monte_carlo_modulated_energy(nu, mu, n, n_mc, seed, tables)?;
    let entropy_term = relative_entropy(nu, mu)? / beta;
    Ok(ModulatedFreeEnergy {
        entropy_term,
        mean_energy,
        std_error,
        estimate: entropy_term + mean_energy,
        closed_form_energy: expected_modulated_energy(nu, mu, n, tables)?,
    })
}

/// Mean and standard error of `F_N(X, μ)` over `X ~ ν^{⊗N}`; sample `s` uses stream `s + 1`.
pub fn monte_carlo_modulated_energy(
    nu: &FourierField,
    mu: &FourierField,
    n: usize,
    n_mc: usize,
    seed: u64,
    tables: &PotentialTables,
) -> Result<(f64, f64)> {
    if n_mc < 2 {
        return Err(Error::MonteCarlo("need at least two samples".into()));
    }
    let samples: Vec<Result<f64>> = (0..n_mc)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64 + 1);
            let x = sample_density(nu, n, &mut rng)?;
            modulated_energy(&x, mu, tables)
        })
        .collect();
    let values: Vec<f64> = samples.into_iter().collect::<Result<_>>()?;
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    if !var.is_finite() {
        return Err(Error::MonteCarlo("non-finite variance".into()));
    }
    Ok((mean, (var / m).sqrt()))
}

fn cell_of(x: &[f64], m: usize) -> usize {
    x.iter()
        .fold(0, |acc, &v| acc * m + (((wrap(v) + 0.5) * m as f64) as usize).min(m - 1))
}

fn check_cells(grid: Grid, m: usize) -> Result<()> {
    if m == 0 || grid.n() % m != 0 {
        return Err(Error::InvalidGrid(format!("{m} cells per axis do not divide n = {}", grid.n())));
    }
    Ok(())
}

fn node_cell(grid: Grid, idx: usize, m: usize) -> usize {
    let per = grid.n() / m;
    grid.multi_index(idx).into_iter().fold(0, |acc, j| acc * m + j / per)
}

fn cell_counts(x: &[f64], d: usize, m: usize) -> Vec<usize> {
    let mut counts = vec![0usize; m.pow(d as u32)];
    for p in x.chunks(d) {
        counts[cell_of(p, m)] += 1;
    }
    counts
}

/// Empirical measure averaged over `m^d` cubes, sampled on `grid`.
pub fn coarse_grain_particles(x: &[f64], grid: Grid, m: usize) -> Result<FourierField> {
    check_cells(grid, m)?;
    let d = grid.dim();
    let n = x.len() / d;
    let cells = m.pow(d as u32);
    let counts = cell_counts(x, d, m);
    let values = (0..grid.len())
        .map(|idx| counts[node_cell(grid, idx, m)] as f64 * cells as f64 / n as f64)
        .collect();
    FourierField::from_values(grid, values)
}

/// Field averaged over `m^d` cubes of grid nodes.
pub fn coarse_grain_field(mu: &FourierField, m: usize) -> Result<FourierField> {
    let grid = mu.grid();
    check_cells(grid, m)?;
    let cells = m.pow(grid.dim() as u32);
    let mut sums = vec![0.0; cells];
    let mut counts = vec![0usize; cells];
    for (idx, v) in mu.values().iter().enumerate() {
        let c = node_cell(grid, idx, m);
        sums[c] += v;
        counts[c] += 1;
    }
    let values = (0..grid.len()).map(|idx| {
        let c = node_cell(grid, idx, m);
        sums[c] / counts[c] as f64
    });
    FourierField::from_values(grid, values.collect())
}

/// `H(C_M μ_X | μ) = Σ_k (n_k/N) (log(M n_k/N) - mean_{Q_k} log μ)`.
pub fn coarse_relative_entropy(x: &[f64], mu: &FourierField, m: usize) -> Result<f64> {
    let grid = mu.grid();
    check_cells(grid, m)?;
    let d = grid.dim();
    let n = x.len() / d;
    let cells = m.pow(d as u32);
    let counts = cell_counts(x, d, m);
    let mut log_sum = vec![0.0; cells];
    let mut nodes = vec![0usize; cells];
    for (idx, v) in mu.values().iter().enumerate() {
        if *v <= 0.0 {
            return Err(Error::EntropyUndefined { index: idx, value: *v });
        }
        let c = node_cell(grid, idx, m);
        log_sum[c] += v.ln();
        nodes[c] += 1;
    }
    Ok((0..cells)
        .filter(|&c| counts[c] > 0)
        .map(|c| {
            let p = counts[c] as f64 / n as f64;
            p * ((cells as f64 * p).ln() - log_sum[c] / nodes[c] as f64)
        })
        .sum())
}

/// `‖K_b * (μ_X - μ)‖_{L²}` with the heat kernel `K_b` at time `b`.
pub fn chaos_distance(x: &[f64], mu: &FourierField, bandwidth: f64) -> Result<f64> {
    let grid = mu.grid();
    let d = grid.dim();
    let n_p = check_positions(x, mu)?;
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    let half = (grid.n() / 2) as f64;
    if (-4.0 * PI * PI * half * half * bandwidth).exp() > 1e-8 {
        return Err(Error::InvalidGrid("bandwidth too small for the grid".into()));
    }
    let n = grid.n();
    let wn: Vec<i64> = (0..n).map(|j| grid.wavenumber(j)).collect();
    let phases: Vec<Vec<Complex64>> = x
        .iter()
        .map(|&xq| wn.iter().map(|&k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 * xq)).collect())
        .collect();
    let k2 = grid.k_squared();
    let coeffs = mu.coeffs();
    let total: f64 = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let w = (-8.0 * PI * PI * k2[idx] * bandwidth).exp();
            if w < 1e-30 {
                return 0.0;
            }
            let ks = grid.multi_index(idx);
            let mut emp = Complex64::new(0.0, 0.0);
            for p in 0..n_p {
                let mut z = Complex64::new(1.0, 0.0);
                for a in 0..d {
                    z *= phases[p * d + a][ks[a]];
                }
                emp += z;
            }
            emp /= n_p as f64;
            w * (emp - coeffs[idx]).norm_sqr()
        })
        .sum();
    Ok(total.sqrt())
}
