//! Pseudo-spectral integration of `∂_t μ = -div(μ ∇g*μ) + β^{-1} Δμ` and
//! steady-state iterations.
//!
//! Time stepping is the second-order exponential integrator of Cox and
//! Matthews applied to the heat semigroup, with the transport term
//! evaluated on a 2/3-dealiased grid.

use crate::error::{Error, Result};
use crate::field::{
    check_beta, convolve_g, dissipation, distance_to_uniform, fisher_information, free_energy,
    FourierField, Norm,
};
use crate::grid::Grid;
use crate::potential::PotentialTables;
use num_complex::Complex64;
use std::f64::consts::PI;

const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Physical and numerical parameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub d: usize,
    pub beta: f64,
    pub n: usize,
    pub dt: f64,
    pub t_max: f64,
    /// Force truncation radius for particle runs, zero for the PDE.
    pub eta: f64,
    /// Wavevectors whose amplitudes are recorded in diagnostics.
    pub track_modes: Vec<Vec<i64>>,
    /// When false the transport term is dropped and the run is pure heat flow.
    pub interaction: bool,
}

impl ModelParams {
    pub fn new(d: usize, beta: f64, n: usize, dt: f64, t_max: f64) -> Self {
        let mut first = vec![0i64; d];
        first[0] = 1;
        Self { d, beta, n, dt, t_max, eta: 0.0, track_modes: vec![first], interaction: true }
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step {} must be positive", self.dt)));
        }
        if !(self.t_max >= 0.0) {
            return Err(Error::InvalidParameter("horizon must be nonnegative".into()));
        }
        if self.eta < 0.0 {
            return Err(Error::InvalidParameter("truncation radius must be nonnegative".into()));
        }
        for k in &self.track_modes {
            if k.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, found: k.len() });
            }
        }
        Grid::new(self.d, self.n).map(|_| ())
    }
}

/// One row of the diagnostics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub free_energy: f64,
    pub dissipation: f64,
    pub fisher: f64,
    pub l1_dist: f64,
    pub l2_dist: f64,
    pub modes: Vec<f64>,
}

impl DiagnosticsRow {
    pub fn compute(t: f64, mu: &FourierField, params: &ModelParams, tables: &PotentialTables) -> Self {
        Self {
            t,
            mass: mu.mass(),
            free_energy: free_energy(mu, params.beta, tables).unwrap_or(f64::NAN),
            dissipation: dissipation(mu, params.beta, tables).unwrap_or(f64::NAN),
            fisher: fisher_information(mu).unwrap_or(f64::NAN),
            l1_dist: distance_to_uniform(mu, Norm::L1),
            l2_dist: distance_to_uniform(mu, Norm::L2),
            modes: params.track_modes.iter().map(|k| mu.mode_amplitude(k)).collect(),
        }
    }

    pub fn csv_header(n_modes: usize) -> String {
        let mut h = String::from("t,mass,free_energy,dissipation,fisher,l1_dist,l2_dist");
        for i in 1..=n_modes {
            h.push_str(&format!(",mode_k{i}"));
        }
        h
    }

    pub fn csv_line(&self) -> String {
        let mut s = format!(
            "{:.12e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
            self.t, self.mass, self.free_energy, self.dissipation, self.fisher, self.l1_dist, self.l2_dist
        );
        for m in &self.modes {
            s.push_str(&format!(",{m:.15e}"));
        }
        s
    }
}

/// When a run ends before its horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    Horizon,
    /// Stop once `‖μ - m‖_{L¹}` reaches the value.
    L1Above(f64),
    /// Stop once `‖μ - m‖_{L²}` falls to the value.
    L2Below(f64),
    /// Stop once `‖μ^{n+1} - μ^n‖_{L²} / dt` falls to the value.
    ResidualBelow(f64),
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopReason {
    Horizon,
    /// Threshold crossed; `t` is linearly interpolated between steps.
    L1Above { t: f64 },
    L2Below { t: f64 },
    ResidualBelow { t: f64 },
    BlowUp { t: f64 },
}

/// Output cadence of [`run`], in steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recording {
    pub diagnostics_every: usize,
    pub snapshots_every: Option<usize>,
}

impl Default for Recording {
    fn default() -> Self {
        Self { diagnostics_every: 10, snapshots_every: None }
    }
}

/// Result of [`run`]; always holds the last valid state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub snapshots: Vec<(f64, FourierField)>,
    pub diagnostics: Vec<DiagnosticsRow>,
    pub stop: StopReason,
    pub final_time: f64,
    pub final_state: FourierField,
    pub steps: usize,
}

/// Precomputed exponential-integrator coefficients for one `(β, dt, grid)`.
pub struct Stepper<'a> {
    tables: &'a PotentialTables,
    grid: Grid,
    dt: f64,
    e: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    mask: Vec<bool>,
    k_comp: Vec<Vec<f64>>,
    neg: Vec<usize>,
    interaction: bool,
}

fn phi_functions(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1e-5 {
        (z.exp(), 1.0 + z / 2.0 + z * z / 6.0, 0.5 + z / 6.0 + z * z / 24.0)
    } else {
        let e = z.exp();
        (e, (e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

impl<'a> Stepper<'a> {
    pub fn new(params: &ModelParams, tables: &'a PotentialTables) -> Result<Self> {
        params.validate()?;
        let grid = tables.grid();
        if grid.dim() != params.d || grid.n() != params.n {
            return Err(Error::InvalidGrid("parameters and tables disagree on the grid".into()));
        }
        let mut e = Vec::with_capacity(grid.len());
        let mut phi1 = Vec::with_capacity(grid.len());
        let mut phi2 = Vec::with_capacity(grid.len());
        for k2 in grid.k_squared() {
            let z = -4.0 * PI * PI * k2 / params.beta * params.dt;
            let (a, b, c) = phi_functions(z);
            e.push(a);
            phi1.push(b);
            phi2.push(c);
        }
        let neg = (0..grid.len())
            .map(|i| {
                let k: Vec<i64> = grid.wavevector(i).iter().map(|v| -v).collect();
                grid.flat_index_of_mode(&k)
            })
            .collect();
        Ok(Self {
            tables,
            grid,
            dt: params.dt,
            e,
            phi1,
            phi2,
            mask: grid.dealias_mask(),
            k_comp: (0..grid.dim()).map(|a| grid.k_component(a)).collect(),
            neg,
            interaction: params.interaction,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Inverse transforms of two real fields packed into one complex FFT.
    fn inverse_pair(&self, a: &[Complex64], b: Option<&[Complex64]>) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = match b {
            Some(b) => a.iter().zip(b).map(|(x, y)| x + Complex64::i() * y).collect(),
            None => a.to_vec(),
        };
        self.grid.inverse_in_place(&mut buf);
        (buf.iter().map(|c| c.re).collect(), buf.iter().map(|c| c.im).collect())
    }

    /// Forward transforms of two real fields packed into one complex FFT.
    fn forward_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.grid.forward_in_place(&mut buf);
        let mut fa = vec![Complex64::new(0.0, 0.0); buf.len()];
        let mut fb = fa.clone();
        for i in 0..buf.len() {
            let zc = buf[self.neg[i]].conj();
            fa[i] = 0.5 * (buf[i] + zc);
            fb[i] = Complex64::new(0.0, -0.5) * (buf[i] - zc);
        }
        (fa, fb)
    }

    /// Spectral transport term `-div(μ ∇g*μ)` with 2/3 dealiasing.
    pub fn transport(&self, u_hat: &[Complex64]) -> Vec<Complex64> {
        let len = u_hat.len();
        let zero = Complex64::new(0.0, 0.0);
        if !self.interaction {
            return vec![zero; len];
        }
        let d = self.grid.dim();
        let ghat = self.tables.g_hat_grid();
        let u_f: Vec<Complex64> =
            (0..len).map(|i| if self.mask[i] { u_hat[i] } else { zero }).collect();
        let grads: Vec<Vec<Complex64>> = (0..d)
            .map(|a| {
                (0..len)
                    .map(|i| u_f[i] * ghat[i] * Complex64::new(0.0, 2.0 * PI * self.k_comp[a][i]))
                    .collect()
            })
            .collect();
        // physical u and ∂_a v, two per FFT
        let mut phys: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        let mut spectral: Vec<&[Complex64]> = vec![&u_f];
        spectral.extend(grads.iter().map(|g| g.as_slice()));
        for pair in spectral.chunks(2) {
            let (x, y) = self.inverse_pair(pair[0], pair.get(1).copied());
            phys.push(x);
            if pair.len() == 2 {
                phys.push(y);
            }
        }
        let u = &phys[0];
        let fluxes: Vec<Vec<f64>> =
            (0..d).map(|a| u.iter().zip(&phys[a + 1]).map(|(p, q)| p * q).collect()).collect();
        let mut out = vec![zero; len];
        let zeros = vec![0.0; len];
        for a in (0..d).step_by(2) {
            let second = fluxes.get(a + 1).unwrap_or(&zeros);
            let (fa, fb) = self.forward_pair(&fluxes[a], second);
            for i in 0..len {
                if !self.mask[i] {
                    continue;
                }
                let ik = |axis: usize| Complex64::new(0.0, 2.0 * PI * self.k_comp[axis][i]);
                out[i] -= ik(a) * fa[i];
                if a + 1 < d {
                    out[i] -= ik(a + 1) * fb[i];
                }
            }
        }
        out[0] = zero;
        out
    }

    /// Advances true Fourier coefficients by one step.
    pub fn advance(&self, u_hat: &[Complex64]) -> Vec<Complex64> {
        let dt = self.dt;
        let n0 = self.transport(u_hat);
        let a: Vec<Complex64> = (0..u_hat.len())
            .map(|i| self.e[i] * u_hat[i] + dt * self.phi1[i] * n0[i])
            .collect();
        if !self.interaction {
            return a;
        }
        let n1 = self.transport(&a);
        (0..u_hat.len()).map(|i| a[i] + dt * self.phi2[i] * (n1[i] - n0[i])).collect()
    }
}

fn blown_up(c: &[Complex64]) -> bool {
    c.iter().any(|z| !(z.norm() <= BLOW_UP_THRESHOLD))
}

/// One time step from `mu`.
pub fn step(mu: &FourierField, params: &ModelParams, tables: &PotentialTables) -> Result<FourierField> {
    let stepper = Stepper::new(params, tables)?;
    let next = stepper.advance(mu.coeffs());
    if blown_up(&next) {
        return Err(Error::BlowUp { t: params.dt });
    }
    FourierField::from_coeffs(mu.grid(), next)
}

fn cfl_advisory(mu0: &FourierField, params: &ModelParams, tables: &PotentialTables) {
    if !params.interaction {
        return;
    }
    if let Ok(v) = convolve_g(mu0, tables) {
        let grad = v.gradient();
        let peak = (0..mu0.grid().len())
            .map(|i| grad.iter().map(|g| g[i] * g[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let cfl = params.dt * peak * params.n as f64;
        if cfl > 1.0 {
            log::warn!("advective CFL number {cfl:.3} exceeds 1");
        }
    }
}

/// Integrates from `mu0` until the horizon, a stop rule, or blow-up.
pub fn run(
    mu0: &FourierField,
    params: &ModelParams,
    tables: &PotentialTables,
    stop: StopRule,
    recording: Recording,
) -> Result<Trajectory> {
    let stepper = Stepper::new(params, tables)?;
    if mu0.grid() != tables.grid() {
        return Err(Error::InvalidGrid("initial datum is on a different grid".into()));
    }
    cfl_advisory(mu0, params, tables);
    let total_steps = (params.t_max / params.dt - 1e-9).ceil().max(0.0) as usize;
    let every = recording.diagnostics_every.max(1);
    let mut diagnostics = vec![DiagnosticsRow::compute(0.0, mu0, params, tables)];
    let mut snapshots = vec![(0.0, mu0.clone())];
    let mut state = mu0.clone();
    let mut prev_metric = stop_metric(&state, stop, None, params.dt);
    let mut reason = StopReason::Horizon;
    let mut t = 0.0;
    let mut steps = 0;
    for s in 1..=total_steps {
        let next = stepper.advance(state.coeffs());
        let t_next = s as f64 * params.dt;
        if blown_up(&next) {
            reason = StopReason::BlowUp { t: t_next };
            log::warn!("blow-up detected at t = {t_next}");
            break;
        }
        let next = FourierField::from_coeffs(state.grid(), next)?;
        let metric = stop_metric(&next, stop, Some(&state), params.dt);
        state = next;
        t = t_next;
        steps = s;
        let crossed = match stop {
            StopRule::Horizon => None,
            StopRule::L1Above(v) => (metric >= v).then(|| StopReason::L1Above {
                t: interpolate_crossing(t - params.dt, prev_metric, t, metric, v),
            }),
            StopRule::L2Below(v) => (metric <= v).then(|| StopReason::L2Below {
                t: interpolate_crossing(t - params.dt, prev_metric, t, metric, v),
            }),
            StopRule::ResidualBelow(v) => (metric <= v).then_some(StopReason::ResidualBelow { t }),
        };
        prev_metric = metric;
        let record_now = s % every == 0 || crossed.is_some() || s == total_steps;
        if record_now {
            diagnostics.push(DiagnosticsRow::compute(t, &state, params, tables));
        }
        if let Some(k) = recording.snapshots_every {
            if s % k.max(1) == 0 || crossed.is_some() || s == total_steps {
                snapshots.push((t, state.clone()));
            }
        }
        if let Some(r) = crossed {
            reason = r;
            break;
        }
    }
    if recording.snapshots_every.is_none() && steps > 0 {
        snapshots.push((t, state.clone()));
    }
    Ok(Trajectory {
        params: params.clone(),
        snapshots,
        diagnostics,
        stop: reason,
        final_time: t,
        final_state: state,
        steps,
    })
}

fn stop_metric(state: &FourierField, stop: StopRule, prev: Option<&FourierField>, dt: f64) -> f64 {
    match stop {
        StopRule::Horizon => 0.0,
        StopRule::L1Above(_) => distance_to_uniform(state, Norm::L1),
        StopRule::L2Below(_) => distance_to_uniform(state, Norm::L2),
        StopRule::ResidualBelow(_) => match prev {
            Some(p) => crate::field::distance(state, p, Norm::L2).unwrap_or(f64::INFINITY) / dt,
            None => f64::INFINITY,
        },
    }
}

fn interpolate_crossing(t0: f64, m0: f64, t1: f64, m1: f64, level: f64) -> f64 {
    if (m1 - m0).abs() < 1e-300 || !m0.is_finite() {
        t1
    } else {
        (t0 + (level - m0) / (m1 - m0) * (t1 - t0)).clamp(t0, t1)
    }
}

/// Outcome of a steady-state iteration.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub mu: FourierField,
    pub converged: bool,
    pub diverged: bool,
    pub residual: f64,
    pub iterations: usize,
}

/// `e^{β w} / ∫ e^{β w}` computed stably.
fn gibbs(weight: Option<&[f64]>, w: &FourierField, beta: f64) -> Vec<f64> {
    let peak = w.values().iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let mut out: Vec<f64> = w.values().iter().map(|v| (beta * (v - peak)).exp()).collect();
    if let Some(mu) = weight {
        out.iter_mut().zip(mu).for_each(|(o, m)| *o *= m);
    }
    let z = out.iter().sum::<f64>() / out.len() as f64;
    out.iter_mut().for_each(|o| *o /= z);
    out
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Damped iteration `μ ← (1-s)μ + s e^{βg*μ}/Z`.
pub fn kirkwood_monroe_fixed_point(
    mu_init: &FourierField,
    beta: f64,
    tables: &PotentialTables,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPoint> {
    check_beta(beta)?;
    check_damping(damping)?;
    if mu_init.min() <= 0.0 {
        return Err(Error::InvalidParameter("initial density must be strictly positive".into()));
    }
    let mut mu = mu_init.scaled(1.0 / mu_init.mass());
    let mut residual = f64::INFINITY;
    for it in 0..=max_iter {
        let target = gibbs(None, &convolve_g(&mu, tables)?, beta);
        residual = l2(mu.values(), &target);
        if !residual.is_finite() || mu.max() > BLOW_UP_THRESHOLD {
            return Ok(FixedPoint { mu, converged: false, diverged: true, residual, iterations: it });
        }
        if residual <= tol {
            return Ok(FixedPoint { mu, converged: true, diverged: false, residual, iterations: it });
        }
        if it == max_iter {
            break;
        }
        let next = mu.values().iter().zip(&target).map(|(m, t)| (1.0 - damping) * m + damping * t).collect();
        mu = FourierField::from_values(mu.grid(), next)?;
    }
    Ok(FixedPoint { mu, converged: false, diverged: false, residual, iterations: max_iter })
}

/// Damped Euler–Lagrange iteration `ν ← μ e^{βg_(η)*(ν-μ)} / Z` of the rate functional.
#[allow(clippy::too_many_arguments)]
pub fn rate_functional_el_iteration(
    mu: &FourierField,
    start: &FourierField,
    beta: f64,
    eta: f64,
    tables: &PotentialTables,
    damping: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(FixedPoint, bool)> {
    check_beta(beta)?;
    check_damping(damping)?;
    if mu.min() <= 0.0 || start.min() <= 0.0 {
        return Err(Error::InvalidParameter("densities must be strictly positive".into()));
    }
    let multiplier = if eta > 0.0 {
        tables.g_eta_hat_grid(eta)?
    } else {
        std::sync::Arc::new(tables.g_hat_grid().to_vec())
    };
    let mut nu = start.scaled(1.0 / start.mass());
    let mut result = None;
    for it in 0..=max_iter {
        let diff: Vec<f64> = nu.values().iter().zip(mu.values()).map(|(a, b)| a - b).collect();
        let w = FourierField::from_values(mu.grid(), diff)?.apply_multiplier(&multiplier);
        let target = gibbs(Some(mu.values()), &w, beta);
        let residual = l2(nu.values(), &target);
        let diverged = !residual.is_finite();
        if diverged || residual <= tol || it == max_iter {
            result = Some(FixedPoint {
                mu: nu.clone(),
                converged: residual <= tol,
                diverged,
                residual,
                iterations: it,
            });
            break;
        }
        let next = nu.values().iter().zip(&target).map(|(m, t)| (1.0 - damping) * m + damping * t).collect();
        nu = FourierField::from_values(mu.grid(), next)?;
    }
    let fp = result.expect("loop always sets a result");
    let back = fp.converged && l2(fp.mu.values(), mu.values()) <= 1e3 * tol.max(1e-13);
    Ok((fp, back))
}

fn check_damping(s: f64) -> Result<()> {
    if s > 0.0 && s <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("damping {s} outside (0, 1]")))
    }
}

/// `φ_λ(x) = λ^{-d} φ(x/λ)` for a smooth bump `φ` supported in `|x| < 1/8`.
pub fn bump_family(lambda: f64, d: usize, n: usize) -> Result<FourierField> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!("bump scale {lambda} outside (0, 1)")));
    }
    let grid = Grid::new(d, n)?;
    if (n as f64) * lambda / 4.0 < 8.0 {
        let mut required = (32.0 / lambda).ceil() as usize;
        required += required % 2;
        return Err(Error::UnderResolved { required_n: required });
    }
    let f = FourierField::from_fn(grid, |x| {
        let r = 8.0 * x.iter().map(|v| v * v).sum::<f64>().sqrt() / lambda;
        if r < 1.0 {
            (-1.0 / (1.0 - r * r)).exp()
        } else {
            0.0
        }
    });
    Ok(f.scaled(1.0 / f.mass()))
}

/// Normalizes mass: returns `μ/m` and `βm`.
pub fn rescale_mass(mu: &FourierField, beta: f64) -> Result<(FourierField, f64)> {
    check_beta(beta)?;
    let m = mu.mass();
    if !(m > 0.0) {
        return Err(Error::NonPositiveMass(m));
    }
    Ok((mu.scaled(1.0 / m), beta * m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_stationary() {
        let t = PotentialTables::new(2, 16).unwrap();
        let p = ModelParams::new(2, 5.0, 16, 0.01, 0.1);
        let u = FourierField::uniform(t.grid());
        let v = step(&u, &p, &t).unwrap();
        assert!(v.values().iter().all(|x| (x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn pure_diffusion_is_exact() {
        let t = PotentialTables::new(2, 16).unwrap();
        let mut p = ModelParams::new(2, 3.0, 16, 0.02, 0.1);
        p.interaction = false;
        let f = FourierField::from_fn(t.grid(), |x| 1.0 + 0.2 * (2.0 * PI * (x[0] + 2.0 * x[1])).cos());
        let g = step(&f, &p, &t).unwrap();
        let ratio = g.mode_amplitude(&[1, 2]) / f.mode_amplitude(&[1, 2]);
        let want = crate::potential::heat_multiplier(&[1, 2], 0.02, 3.0);
        assert!((ratio - want).abs() < 1e-14);
    }

    #[test]
    fn transport_matches_direct_evaluation() {
        // for μ = 1 + a cos(2πx_1) the term is a c_d 2π... evaluated by hand
        let t = PotentialTables::new(2, 32).unwrap();
        let p = ModelParams::new(2, 3.0, 32, 0.01, 0.1);
        let s = Stepper::new(&p, &t).unwrap();
        let a = 0.3;
        let f = FourierField::from_fn(t.grid(), |x| 1.0 + a * (2.0 * PI * x[0]).cos());
        let n = s.transport(f.coeffs());
        // -div(μ ∇v) with v = a ĝ(1) 2 cos: mode 1 gets a·2π·(1/2), mode 2 gets a²π/2
        let got1 = n[t.grid().flat_index_of_mode(&[1, 0])];
        let got2 = n[t.grid().flat_index_of_mode(&[2, 0])];
        assert!((got1.re - a * PI).abs() < 1e-12, "{got1}");
        assert!((got2.re - a * a * PI).abs() < 1e-12, "{got2}");
    }

    #[test]
    fn bump_rejects_coarse_grid() {
        match bump_family(0.1, 2, 64) {
            Err(Error::UnderResolved { required_n }) => assert_eq!(required_n, 320),
            other => panic!("{other:?}"),
        }
        let b = bump_family(0.2, 2, 256).unwrap();
        assert!((b.mass() - 1.0).abs() < 1e-14);
    }
}
