//! Densities on the periodic grid and the functionals evaluated on them.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::PotentialTables;
use num_complex::Complex64;
use std::sync::OnceLock;
use std::f64::consts::PI;

/// Samples below this value are clamped before taking logarithms.
pub const DENSITY_FLOOR: f64 = 1e-14;
/// Samples below minus this value make entropy-type functionals undefined.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-10;

/// A real field on a [`Grid`] with lazily computed Fourier coefficients.
#[derive(Debug, Clone)]
pub struct FourierField {
    grid: Grid,
    values: Vec<f64>,
    coeffs: OnceLock<Vec<Complex64>>,
}

impl FourierField {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, coeffs: OnceLock::new() })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values, coeffs: OnceLock::new() }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidGrid("coefficient count does not match grid".into()));
        }
        let values = grid.inverse(&coeffs);
        let cell = OnceLock::new();
        let _ = cell.set(coeffs);
        Ok(Self { grid, values, coeffs: cell })
    }

    pub fn uniform(grid: Grid) -> Self {
        Self::from_fn(grid, |_| 1.0)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        self.coeffs.get_or_init(|| self.grid.forward(&self.values))
    }

    /// Fourier coefficient at an integer wavevector inside the grid band.
    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        self.coeffs()[self.grid.flat_index_of_mode(k)]
    }

    pub fn mode_amplitude(&self, k: &[i64]) -> f64 {
        self.coefficient(k).norm()
    }

    /// `∫ μ` by the trapezoid rule.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::from_values(self.grid, self.values.iter().map(|v| v * c).collect()).expect("same grid")
    }

    /// Applies a Fourier multiplier given in FFT order.
    pub fn apply_multiplier(&self, multiplier: &[f64]) -> Self {
        let coeffs = self.coeffs().iter().zip(multiplier).map(|(c, m)| c * m).collect();
        Self::from_coeffs(self.grid, coeffs).expect("same grid")
    }

    /// Spectral gradient, one sample vector per axis.
    pub fn gradient(&self) -> Vec<Vec<f64>> {
        (0..self.grid.dim())
            .map(|a| {
                let ka = self.grid.k_component(a);
                let c: Vec<Complex64> = self
                    .coeffs()
                    .iter()
                    .zip(&ka)
                    .map(|(c, k)| c * Complex64::new(0.0, 2.0 * PI * k))
                    .collect();
                self.grid.inverse(&c)
            })
            .collect()
    }

    /// Multilinear interpolation at a point of the torus.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let d = self.grid.dim();
        let n = self.grid.n();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for a in 0..d {
            let s = (crate::potential::wrap(x[a]) + 0.5) * n as f64;
            let i = s.floor();
            frac[a] = s - i;
            base[a] = (i as usize) % n;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0;
            for a in 0..d {
                let bit = (corner >> a) & 1;
                idx = idx * n + if bit == 1 { (base[a] + 1) % n } else { base[a] };
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            acc += w * self.values[idx];
        }
        acc
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("fields live on different grids".into()));
        }
        Ok(())
    }
}

fn check_tables(mu: &FourierField, tables: &PotentialTables) -> Result<()> {
    if mu.grid() != tables.grid() {
        return Err(Error::InvalidGrid("field grid differs from the potential tables".into()));
    }
    Ok(())
}

/// Rejects genuinely negative samples and counts those clamped at the floor.
fn positivity(values: &[f64]) -> Result<usize> {
    let mut clamped = 0;
    for (index, &value) in values.iter().enumerate() {
        if !(value >= -NEGATIVITY_TOLERANCE) {
            return Err(Error::EntropyUndefined { index, value });
        }
        if value < DENSITY_FLOOR {
            clamped += 1;
        }
    }
    if clamped > 0 {
        log::warn!("{clamped} density samples clamped at {DENSITY_FLOOR:e}");
    }
    Ok(clamped)
}

#[inline]
fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.max(DENSITY_FLOOR).ln()
    }
}

/// `g * μ`.
pub fn convolve_g(mu: &FourierField, tables: &PotentialTables) -> Result<FourierField> {
    check_tables(mu, tables)?;
    Ok(mu.apply_multiplier(tables.g_hat_grid()))
}

/// `∬ g dμ⊗dν = Σ_k ĝ(k) Re(μ̂(k) conj ν̂(k))`.
pub fn interaction_energy(mu: &FourierField, nu: &FourierField, tables: &PotentialTables) -> Result<f64> {
    check_tables(mu, tables)?;
    mu.same_grid(nu)?;
    Ok(mu
        .coeffs()
        .iter()
        .zip(nu.coeffs())
        .zip(tables.g_hat_grid())
        .map(|((a, b), g)| g * (a * b.conj()).re)
        .sum())
}

/// `∫ μ log μ`.
pub fn entropy(mu: &FourierField) -> Result<f64> {
    positivity(mu.values())?;
    Ok(mu.values().iter().map(|&v| xlogx(v)).sum::<f64>() / mu.values().len() as f64)
}

/// `E_β(μ) = β^{-1} ∫ μ log μ - ½ ∬ g dμ⊗²`.
pub fn free_energy(mu: &FourierField, beta: f64, tables: &PotentialTables) -> Result<f64> {
    check_beta(beta)?;
    Ok(entropy(mu)? / beta - 0.5 * interaction_energy(mu, mu, tables)?)
}

/// `D_β(μ) = ∫ |β^{-1} ∇log μ - ∇g*μ|² dμ`.
pub fn dissipation(mu: &FourierField, beta: f64, tables: &PotentialTables) -> Result<f64> {
    check_beta(beta)?;
    positivity(mu.values())?;
    let grad_mu = mu.gradient();
    let grad_v = convolve_g(mu, tables)?.gradient();
    let m = mu.values();
    let mut total = 0.0;
    for i in 0..m.len() {
        let rho = m[i].max(DENSITY_FLOOR);
        let mut flux2 = 0.0;
        for a in 0..grad_mu.len() {
            let j = grad_mu[a][i] / beta - m[i] * grad_v[a][i];
            flux2 += j * j;
        }
        total += flux2 / rho;
    }
    Ok(total / m.len() as f64)
}

/// `I(μ) = ∫ |∇μ|² / μ`.
pub fn fisher_information(mu: &FourierField) -> Result<f64> {
    positivity(mu.values())?;
    let grad = mu.gradient();
    let m = mu.values();
    let total: f64 = (0..m.len())
        .map(|i| grad.iter().map(|g| g[i] * g[i]).sum::<f64>() / m[i].max(DENSITY_FLOOR))
        .sum();
    Ok(total / m.len() as f64)
}

/// `H(ν | μ) = ∫ ν log(ν/μ)`.
pub fn relative_entropy(nu: &FourierField, mu: &FourierField) -> Result<f64> {
    nu.same_grid(mu)?;
    positivity(nu.values())?;
    positivity(mu.values())?;
    let total: f64 = nu
        .values()
        .iter()
        .zip(mu.values())
        .map(|(&a, &b)| xlogx(a) - a.max(0.0) * b.max(DENSITY_FLOOR).ln())
        .sum();
    Ok(total / nu.values().len() as f64)
}

/// Norms available for distances between fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Norm {
    L1,
    L2,
    LInf,
    /// Homogeneous Sobolev norm `(Σ_{k≠0} (2π|k|)^{2s} |f̂(k)|²)^{1/2}`.
    Sobolev(f64),
}

pub fn norm(f: &FourierField, which: Norm) -> f64 {
    let v = f.values();
    let len = v.len() as f64;
    match which {
        Norm::L1 => v.iter().map(|x| x.abs()).sum::<f64>() / len,
        Norm::L2 => (v.iter().map(|x| x * x).sum::<f64>() / len).sqrt(),
        Norm::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        Norm::Sobolev(s) => f
            .grid()
            .k_squared()
            .iter()
            .zip(f.coeffs())
            .filter(|(k2, _)| **k2 > 0.0)
            .map(|(k2, c)| (4.0 * PI * PI * k2).powf(s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt(),
    }
}

/// `‖μ - ν‖` in the chosen norm.
pub fn distance(mu: &FourierField, nu: &FourierField, which: Norm) -> Result<f64> {
    mu.same_grid(nu)?;
    let diff: Vec<f64> = mu.values().iter().zip(nu.values()).map(|(a, b)| a - b).collect();
    Ok(norm(&FourierField::from_values(mu.grid(), diff)?, which))
}

/// Distance to the uniform density of the same mass.
pub fn distance_to_uniform(mu: &FourierField, which: Norm) -> f64 {
    let m = mu.mass();
    let diff: Vec<f64> = mu.values().iter().map(|v| v - m).collect();
    norm(&FourierField::from_values(mu.grid(), diff).expect("same grid"), which)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("inverse temperature {beta} must be positive")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(n: usize, amp: f64) -> FourierField {
        FourierField::from_fn(Grid::new(2, n).unwrap(), |x| 1.0 + amp * (2.0 * PI * x[0]).cos())
    }

    #[test]
    fn uniform_has_zero_entropy_and_energy() {
        let t = PotentialTables::new(2, 16).unwrap();
        let u = FourierField::uniform(t.grid());
        assert!(free_energy(&u, 3.0, &t).unwrap().abs() < 1e-15);
        assert!(dissipation(&u, 3.0, &t).unwrap().abs() < 1e-20);
    }

    #[test]
    fn negative_samples_are_rejected() {
        let f = cosine(16, 1.5);
        assert!(matches!(entropy(&f), Err(Error::EntropyUndefined { .. })));
    }

    #[test]
    fn interaction_of_cosine() {
        let t = PotentialTables::new(2, 32).unwrap();
        let f = cosine(32, 0.4);
        let w = interaction_energy(&f, &f, &t).unwrap();
        // two modes of amplitude 0.2 with ĝ(1) = 1/(2π)
        assert!((w - 2.0 * 0.04 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn fisher_of_cosine() {
        let f = cosine(64, 0.5);
        let got = fisher_information(&f).unwrap();
        // ∫ (π sin)^2 / (1 + cos/2) over a period, done by fine quadrature
        let m = 200_000;
        let want: f64 = (0..m)
            .map(|i| {
                let x = (i as f64 + 0.5) / m as f64;
                let g = 0.5 * 2.0 * PI * (2.0 * PI * x).sin();
                g * g / (1.0 + 0.5 * (2.0 * PI * x).cos())
            })
            .sum::<f64>()
            / m as f64;
        assert!((got - want).abs() < 1e-9);
    }
}
