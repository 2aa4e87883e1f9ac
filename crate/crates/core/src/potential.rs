//! The periodic log kernel `g` with `ĝ(k) = c_d (2π|k|)^{-d}`, its truncations
//! and its gradient.
//!
//! Point evaluation splits `g = s + h` where `s(x) = E1(|x̃|²/a²)/2` is a
//! screened logarithm carried by the minimum image `x̃` and `h` is a smooth
//! periodic remainder stored through its Fourier coefficients on the cube
//! `|k|_∞ <= K_h`. Because `s` is below 1e-17 on the cell boundary and `ĥ`
//! decays like a Gaussian, both pieces are exact to round-off.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::special::{ein, exp_integral_e1, one_minus_exp_over, EULER_GAMMA};
use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use statrs::function::gamma::{digamma, gamma, ln_gamma};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// Screening length of the singular part.
const SCREEN: f64 = 0.0845;
/// Half-width of the Fourier cube holding the smooth remainder.
const REMAINDER_CUTOFF: i64 = 24;

/// Constants attached to a dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionConstants {
    pub d: usize,
    /// `c_d = Γ(d/2) (4π)^{d/2} / 2`.
    pub c_d: f64,
    /// Critical inverse temperature `2d`.
    pub beta_c: f64,
    /// Instability threshold `(2π)^d / c_d`.
    pub beta_s: f64,
}

pub fn dimension_constants(d: usize) -> Result<DimensionConstants> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let half = d as f64 / 2.0;
    let c_d = gamma(half) * (4.0 * PI).powf(half) / 2.0;
    Ok(DimensionConstants {
        d,
        c_d,
        beta_c: 2.0 * d as f64,
        beta_s: (2.0 * PI).powi(d as i32) / c_d,
    })
}

/// Surface area of the unit sphere in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * PI.powf(half) / gamma(half)
}

/// Sharp constant of the logarithmic HLS inequality on `R^d`.
pub fn log_hls_constant(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let df = d as f64;
    Ok(0.5 * PI.ln() + (ln_gamma(df / 2.0) - ln_gamma(df)) / df
        + 0.5 * (digamma(df) - digamma(df / 2.0)))
}

/// Fourier symbol of `e^{tΔ/β}` at wavevector `k`.
pub fn heat_multiplier(k: &[i64], t: f64, beta: f64) -> f64 {
    let k2: i64 = k.iter().map(|v| v * v).sum();
    (-4.0 * PI * PI * t * k2 as f64 / beta).exp()
}

/// `ĝ` as a function of `|k|^2`, zero at the origin.
pub fn g_hat(consts: &DimensionConstants, k_sq: f64) -> f64 {
    if k_sq == 0.0 {
        0.0
    } else {
        consts.c_d * (2.0 * PI * k_sq.sqrt()).powi(-(consts.d as i32))
    }
}

/// Sine integral `Si(x)`.
pub fn sine_integral(x: f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(32).expect("valid degree"));
    let sign = x.signum();
    let x = x.abs();
    let panels = (x / PI).ceil().max(1.0) as usize;
    let h = x / panels as f64;
    let sinc = |t: f64| if t == 0.0 { 1.0 } else { t.sin() / t };
    let total: f64 = (0..panels)
        .map(|p| rule.integrate(p as f64 * h, (p + 1) as f64 * h, sinc))
        .sum();
    sign * total
}

/// Nodes and weights for `∫_0^R f(r) dr` with the graded map `r = R u^3`.
pub(crate) struct RadialRule {
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

impl RadialRule {
    pub(crate) fn new(radius: f64, panels: usize, order: usize) -> Self {
        let rule = GaussLegendre::new(order).expect("valid degree");
        let mut r = Vec::with_capacity(panels * order);
        let mut w = Vec::with_capacity(panels * order);
        let du = 1.0 / panels as f64;
        for p in 0..panels {
            let (a, b) = (p as f64 * du, (p + 1) as f64 * du);
            for &(node, weight) in rule.as_node_weight_pairs() {
                let u = 0.5 * (a + b) + 0.5 * (b - a) * node;
                r.push(radius * u * u * u);
                w.push(0.5 * (b - a) * weight * 3.0 * radius * u * u);
            }
        }
        Self { r, w }
    }

    /// Fourier transform on `R^d` of a radial profile sampled at the nodes.
    pub(crate) fn transform(&self, d: usize, profile: &[f64], kappa: f64) -> f64 {
        let b = 2.0 * PI * kappa;
        let it = self.r.iter().zip(&self.w).zip(profile);
        if kappa == 0.0 {
            return sphere_area(d)
                * it.map(|((r, w), f)| w * f * r.powi(d as i32 - 1)).sum::<f64>();
        }
        match d {
            1 => 2.0 * it.map(|((r, w), f)| w * f * (b * r).cos()).sum::<f64>(),
            2 => 2.0 * PI * it.map(|((r, w), f)| w * f * puruspe::Jn(0, b * r) * r).sum::<f64>(),
            _ => (2.0 / kappa) * it.map(|((r, w), f)| w * f * r * (b * r).sin()).sum::<f64>(),
        }
    }
}

/// Fourier coefficient of `log(|x|/η)` restricted to `|x| < η`.
pub fn truncation_hat(d: usize, eta: f64, kappa: f64) -> f64 {
    if kappa == 0.0 {
        return -sphere_area(d) * eta.powi(d as i32) / (d * d) as f64;
    }
    let b = 2.0 * PI * kappa;
    match d {
        1 => -2.0 * sine_integral(b * eta) / b,
        2 => -2.0 * PI * (1.0 - puruspe::Jn(0, b * eta)) / (b * b),
        _ => -(2.0 / kappa) * (sine_integral(b * eta) - (b * eta).sin()) / (b * b),
    }
}

/// Minimum image of a displacement, componentwise into `[-1/2, 1/2)`.
pub fn min_image(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| wrap(v)).collect()
}

#[inline]
pub(crate) fn wrap(v: f64) -> f64 {
    v - (v + 0.5).floor()
}

/// Multilinear lookup table of `h` and `∇h` on a fine periodic grid.
pub struct ForceTable {
    d: usize,
    n: usize,
    /// Interleaved `[h, ∂_1 h, .., ∂_d h]` per node.
    data: Vec<f64>,
}

impl ForceTable {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Interpolates `[h, ∇h]` at a point of the torus into `out` (length `d + 1`).
    #[inline]
    pub fn lookup(&self, x: &[f64], out: &mut [f64]) {
        let d = self.d;
        let n = self.n;
        let stride = d + 1;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..d {
            let s = (wrap(x[a]) + 0.5) * n as f64;
            let i = s.floor();
            frac[a] = s - i;
            let i = (i as usize).min(n - 1);
            lo[a] = i;
            hi[a] = if i + 1 == n { 0 } else { i + 1 };
        }
        if d == 2 {
            let (fx, fy) = (frac[0], frac[1]);
            let corners = [
                (lo[0] * n + lo[1], (1.0 - fx) * (1.0 - fy)),
                (lo[0] * n + hi[1], (1.0 - fx) * fy),
                (hi[0] * n + lo[1], fx * (1.0 - fy)),
                (hi[0] * n + hi[1], fx * fy),
            ];
            out[..3].iter_mut().for_each(|v| *v = 0.0);
            for (idx, w) in corners {
                let row = &self.data[idx * 3..idx * 3 + 3];
                out[0] += w * row[0];
                out[1] += w * row[1];
                out[2] += w * row[2];
            }
            return;
        }
        out[..stride].iter_mut().for_each(|v| *v = 0.0);
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut idx = 0usize;
            for a in 0..d {
                let up = (corner >> a) & 1 == 1;
                weight *= if up { frac[a] } else { 1.0 - frac[a] };
                idx = idx * n + if up { hi[a] } else { lo[a] };
            }
            let row = &self.data[idx * stride..(idx + 1) * stride];
            for c in 0..stride {
                out[c] += weight * row[c];
            }
        }
    }
}

/// Precomputed data for evaluating `g` on a solver grid and at points.
pub struct PotentialTables {
    consts: DimensionConstants,
    grid: Grid,
    remainder_hat: Vec<f64>,
    g_hat_grid: Vec<f64>,
    g_eta_grid: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
    force_table: OnceLock<ForceTable>,
}

impl std::fmt::Debug for PotentialTables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialTables")
            .field("d", &self.consts.d)
            .field("n", &self.grid.n())
            .finish()
    }
}

impl PotentialTables {
    /// Builds tables for dimension `d` in 1..=3 and solver grid size `n`.
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidDimension(d));
        }
        let consts = dimension_constants(d)?;
        let grid = Grid::new(d, n)?;
        let remainder_hat = remainder_coefficients(&consts);
        let g_hat_grid = grid.k_squared().into_iter().map(|k2| g_hat(&consts, k2)).collect();
        Ok(Self {
            consts,
            grid,
            remainder_hat,
            g_hat_grid,
            g_eta_grid: Mutex::new(HashMap::new()),
            force_table: OnceLock::new(),
        })
    }

    pub fn constants(&self) -> &DimensionConstants {
        &self.consts
    }

    pub fn dim(&self) -> usize {
        self.consts.d
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// `ĝ` in FFT order on the solver grid.
    pub fn g_hat_grid(&self) -> &[f64] {
        &self.g_hat_grid
    }

    /// `ĝ_(η)` in FFT order on the solver grid, cached per `η`.
    pub fn g_eta_hat_grid(&self, eta: f64) -> Result<Arc<Vec<f64>>> {
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::InvalidParameter(format!("truncation radius {eta} outside (0, 1/2)")));
        }
        let mut cache = self.g_eta_grid.lock().expect("cache poisoned");
        if let Some(v) = cache.get(&eta.to_bits()) {
            return Ok(v.clone());
        }
        let d = self.consts.d;
        let mut by_k2: HashMap<u64, f64> = HashMap::new();
        let table: Vec<f64> = self
            .grid
            .k_squared()
            .into_iter()
            .map(|k2| {
                let t = *by_k2
                    .entry(k2 as u64)
                    .or_insert_with(|| truncation_hat(d, eta, k2.sqrt()));
                g_hat(&self.consts, k2) + t
            })
            .collect();
        let arc = Arc::new(table);
        cache.insert(eta.to_bits(), arc.clone());
        Ok(arc)
    }

    /// Largest `|ĥ|` on the outer shell of the remainder cube.
    pub fn remainder_tail(&self) -> f64 {
        let side = (2 * REMAINDER_CUTOFF + 1) as usize;
        let mut worst: f64 = 0.0;
        for (idx, v) in self.remainder_hat.iter().enumerate() {
            let mut rest = idx;
            let mut on_shell = false;
            for _ in 0..self.consts.d {
                let k = (rest % side) as i64 - REMAINDER_CUTOFF;
                on_shell |= k.abs() == REMAINDER_CUTOFF;
                rest /= side;
            }
            if on_shell {
                worst = worst.max(v.abs());
            }
        }
        worst
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.consts.d {
            return Err(Error::DimensionMismatch { expected: self.consts.d, found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// Smooth remainder `h` and its gradient by direct Fourier summation.
    fn remainder_exact(&self, x: &[f64], with_grad: bool) -> (f64, Vec<f64>) {
        let d = self.consts.d;
        let side = (2 * REMAINDER_CUTOFF + 1) as usize;
        let phases: Vec<Vec<Complex64>> = x
            .iter()
            .map(|&xa| {
                (0..side)
                    .map(|j| {
                        let k = j as f64 - REMAINDER_CUTOFF as f64;
                        Complex64::from_polar(1.0, 2.0 * PI * k * xa)
                    })
                    .collect()
            })
            .collect();
        let mut value = 0.0;
        let mut grad = vec![0.0; d];
        let mut ks = vec![0usize; d];
        for (idx, &c) in self.remainder_hat.iter().enumerate() {
            let mut rest = idx;
            let mut z = Complex64::new(c, 0.0);
            for a in (0..d).rev() {
                ks[a] = rest % side;
                rest /= side;
                z *= phases[a][ks[a]];
            }
            value += z.re;
            if with_grad {
                for a in 0..d {
                    let k = ks[a] as f64 - REMAINDER_CUTOFF as f64;
                    grad[a] -= 2.0 * PI * k * z.im;
                }
            }
        }
        (value, grad)
    }

    /// The smooth part `g(x) + log|x̃|`.
    pub fn regular_part(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let xt = min_image(x);
        let (h, _) = self.remainder_exact(&xt, false);
        Ok(h + screened_log_regular(norm_sq(&xt)))
    }

    /// `g(x)`; fails at the singular point.
    pub fn eval_g(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let xt = min_image(x);
        let r2 = norm_sq(&xt);
        if r2 == 0.0 {
            return Err(Error::SingularPoint);
        }
        let (h, _) = self.remainder_exact(&xt, false);
        Ok(h + 0.5 * exp_integral_e1(r2 / (SCREEN * SCREEN)))
    }

    /// `g_(η)(x) = g(x) + log(|x̃| / max(|x̃|, η))`.
    pub fn eval_g_eta(&self, x: &[f64], eta: f64) -> Result<f64> {
        check_eta(eta)?;
        self.check_point(x)?;
        let xt = min_image(x);
        let r2 = norm_sq(&xt);
        if r2 >= eta * eta {
            return self.eval_g(x);
        }
        let (h, _) = self.remainder_exact(&xt, false);
        Ok(h + screened_log_regular(r2) - eta.ln())
    }

    /// `∇g_(η)(x)`; `η = 0` means no truncation and fails at a collision.
    pub fn eval_force(&self, x: &[f64], eta: f64) -> Result<Vec<f64>> {
        if eta != 0.0 {
            check_eta(eta)?;
        }
        self.check_point(x)?;
        let xt = min_image(x);
        let r2 = norm_sq(&xt);
        if r2 == 0.0 && eta == 0.0 {
            return Err(Error::Collision);
        }
        let (_, mut grad) = self.remainder_exact(&xt, true);
        let factor = singular_gradient_factor(r2, eta);
        for a in 0..xt.len() {
            grad[a] += factor * xt[a];
        }
        Ok(grad)
    }

    /// Lookup table for particle loops, built on first use.
    pub fn force_table(&self) -> &ForceTable {
        self.force_table.get_or_init(|| self.build_table())
    }

    /// Fine grid size used by [`Self::force_table`].
    pub fn table_size(&self) -> usize {
        let n = self.grid.n();
        match self.consts.d {
            1 => (4 * n).clamp(4096, 65536),
            2 => (4 * n).clamp(512, 1024),
            _ => (4 * n).clamp(64, 128),
        }
    }

    fn build_table(&self) -> ForceTable {
        let d = self.consts.d;
        let nf = self.table_size();
        let fine = Grid::new(d, nf).expect("fine grid is valid");
        let side = (2 * REMAINDER_CUTOFF + 1) as usize;
        let mut comps: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); fine.len()]; d + 1];
        for (idx, &c) in self.remainder_hat.iter().enumerate() {
            let mut rest = idx;
            let mut k = vec![0i64; d];
            for a in (0..d).rev() {
                k[a] = (rest % side) as i64 - REMAINDER_CUTOFF;
                rest /= side;
            }
            let flat = fine.flat_index_of_mode(&k);
            comps[0][flat] = Complex64::new(c, 0.0);
            for a in 0..d {
                comps[a + 1][flat] = Complex64::new(0.0, 2.0 * PI * k[a] as f64 * c);
            }
        }
        let mut data = vec![0.0; fine.len() * (d + 1)];
        for (c, buf) in comps.iter_mut().enumerate() {
            fine.inverse_in_place(buf);
            for (i, v) in buf.iter().enumerate() {
                data[i * (d + 1) + c] = v.re;
            }
        }
        ForceTable { d, n: nf, data }
    }

    /// Table-based `∇g_(η)` of a displacement already in minimum-image form.
    #[inline]
    pub fn force_fast(&self, xt: &[f64], eta: f64, out: &mut [f64]) {
        self.force_with(self.force_table(), xt, eta, out);
    }

    /// [`Self::force_fast`] with the table already fetched.
    #[inline]
    pub fn force_with(&self, table: &ForceTable, xt: &[f64], eta: f64, out: &mut [f64]) {
        let d = self.consts.d;
        let mut buf = [0.0f64; 4];
        table.lookup(xt, &mut buf);
        let factor = singular_gradient_factor(norm_sq(xt), eta);
        for a in 0..d {
            out[a] = buf[a + 1] + factor * xt[a];
        }
    }

    /// Table-based `g_(η)` of a displacement in minimum-image form.
    #[inline]
    pub fn g_eta_fast(&self, xt: &[f64], eta: f64) -> f64 {
        let mut buf = [0.0f64; 4];
        self.force_table().lookup(xt, &mut buf);
        let r2 = norm_sq(xt);
        if eta > 0.0 && r2 < eta * eta {
            buf[0] + screened_log_regular(r2) - eta.ln()
        } else {
            buf[0] + 0.5 * exp_integral_e1(r2 / (SCREEN * SCREEN))
        }
    }

    /// Supremum of `|g(z) + log|z||` over the cell, sampled on the table nodes.
    pub fn regular_part_sup(&self) -> f64 {
        let table = self.force_table();
        let d = self.consts.d;
        let fine = Grid::new(d, table.n).expect("fine grid is valid");
        (0..fine.len())
            .map(|i| {
                let x = fine.point(i);
                (table.data[i * (d + 1)] + screened_log_regular(norm_sq(&x))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Samples of `Σ_k ĝ(k) e^{2πik·x}` on a grid of size `n`.
    pub fn grid_realization(&self, n: usize) -> Result<Vec<f64>> {
        let grid = Grid::new(self.consts.d, n)?;
        let coeffs: Vec<Complex64> = grid
            .k_squared()
            .into_iter()
            .map(|k2| Complex64::new(g_hat(&self.consts, k2), 0.0))
            .collect();
        Ok(grid.inverse(&coeffs))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("truncation radius {eta} outside (0, 1/2)")))
    }
}

#[inline]
pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// `s(x) + log|x|` for the screened singular part, as a function of `|x|^2`.
#[inline]
fn screened_log_regular(r2: f64) -> f64 {
    let z = r2 / (SCREEN * SCREEN);
    0.5 * (ein(z) - EULER_GAMMA) + SCREEN.ln()
}

/// Scalar `φ` with `∇(s + truncation)(x) = φ x`.
#[inline]
fn singular_gradient_factor(r2: f64, eta: f64) -> f64 {
    let a2 = SCREEN * SCREEN;
    let z = r2 / a2;
    if r2 < eta * eta || r2 == 0.0 {
        one_minus_exp_over(z) / a2
    } else {
        -(-z).exp() / r2
    }
}

fn remainder_coefficients(consts: &DimensionConstants) -> Vec<f64> {
    let d = consts.d;
    let rule = RadialRule::new(0.5, 96, 32);
    let profile: Vec<f64> = rule
        .r
        .iter()
        .map(|&r| 0.5 * exp_integral_e1(r * r / (SCREEN * SCREEN)))
        .collect();
    let side = (2 * REMAINDER_CUTOFF + 1) as usize;
    let total = side.pow(d as u32);
    let mut by_k2: HashMap<i64, f64> = HashMap::new();
    (0..total)
        .map(|idx| {
            let mut rest = idx;
            let mut k2 = 0i64;
            for _ in 0..d {
                let k = (rest % side) as i64 - REMAINDER_CUTOFF;
                k2 += k * k;
                rest /= side;
            }
            *by_k2.entry(k2).or_insert_with(|| {
                let s_hat = rule.transform(d, &profile, (k2 as f64).sqrt());
                g_hat(consts, k2 as f64) - s_hat
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_in_low_dimension() {
        let c1 = dimension_constants(1).unwrap();
        assert!((c1.c_d - PI).abs() < 1e-14);
        assert!((c1.beta_s - 2.0).abs() < 1e-14);
        let c2 = dimension_constants(2).unwrap();
        assert!((c2.beta_s - 2.0 * PI).abs() < 1e-13);
        assert!(dimension_constants(0).is_err());
    }

    #[test]
    fn remainder_spectrum_is_negligible_at_cutoff() {
        for d in 1..=3 {
            let t = PotentialTables::new(d, 16).unwrap();
            assert!(t.remainder_tail() < 1e-14, "d={d} tail {}", t.remainder_tail());
        }
    }

    #[test]
    fn truncation_hat_matches_quadrature() {
        for d in 1..=3 {
            let eta = 0.07;
            let rule = RadialRule::new(eta, 64, 32);
            let prof: Vec<f64> = rule.r.iter().map(|r| (r / eta).ln()).collect();
            for kappa in [0.0, 1.0, 3.5, 17.0] {
                let a = truncation_hat(d, eta, kappa);
                let b = rule.transform(d, &prof, kappa);
                assert!((a - b).abs() < 1e-12, "d={d} k={kappa}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn force_is_attractive_near_origin() {
        let t = PotentialTables::new(2, 16).unwrap();
        let f = t.eval_force(&[1e-3, 0.0], 0.0).unwrap();
        assert!((f[0] + 1000.0).abs() < 1.0);
        assert!(matches!(t.eval_force(&[0.0, 0.0], 0.0), Err(Error::Collision)));
        assert!(matches!(t.eval_g(&[0.0, 0.0]), Err(Error::SingularPoint)));
    }

    #[test]
    fn table_agrees_with_exact_force() {
        let t = PotentialTables::new(2, 64).unwrap();
        let mut out = [0.0; 2];
        for x in [[0.1, 0.2], [-0.31, 0.05], [0.45, -0.44]] {
            t.force_fast(&x, 0.0, &mut out);
            let exact = t.eval_force(&x, 0.0).unwrap();
            for a in 0..2 {
                assert!((out[a] - exact[a]).abs() < 1e-4);
            }
        }
    }
}
