//! Linear and nonlinear instability of the uniform state, dimension thresholds,
//! and the free-energy certificate against the modulated log-HLS inequality.

use crate::error::{Error, Result};
use crate::field::{check_beta, entropy, free_energy, interaction_energy, FourierField};
use crate::grid::Grid;
use crate::potential::{dimension_constants, sphere_area, PotentialTables};
use gauss_quad::GaussLegendre;
use std::f64::consts::PI;

/// `λ_{β,|k|} = c_d (2π|k|)^{2-d} - 4π²|k|²/β`.
pub fn eigenvalue(beta: f64, k_norm: f64, d: usize) -> Result<f64> {
    check_beta(beta)?;
    if !(k_norm > 0.0) {
        return Err(Error::InvalidParameter(format!("|k| = {k_norm} must be positive")));
    }
    let c = dimension_constants(d)?;
    Ok(c.c_d * (2.0 * PI * k_norm).powi(2 - d as i32) - 4.0 * PI * PI * k_norm * k_norm / beta)
}

/// Relative position of the two thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdOrdering {
    SingularBelow,
    Equal,
    SingularAbove,
}

impl ThresholdOrdering {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::SingularBelow => "beta_s<beta_c",
            Self::Equal => "beta_s=beta_c",
            Self::SingularAbove => "beta_s>beta_c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub d: usize,
    pub beta_c: f64,
    pub beta_s: f64,
    /// Uniqueness threshold, computed for `d <= 3`.
    pub beta_0: Option<f64>,
    /// `sup_ε (d-ε) ∫_Q |y|^{-ε} dy`.
    pub cube_constant: Option<f64>,
    /// `sup_{z∈Q} |g(z) + log|z||`.
    pub regular_constant: Option<f64>,
    pub ordering: ThresholdOrdering,
}

pub fn threshold_report(d: usize) -> Result<ThresholdReport> {
    let c = dimension_constants(d)?;
    let ordering = if ((c.beta_s - c.beta_c) / c.beta_c).abs() < 1e-12 {
        ThresholdOrdering::Equal
    } else if c.beta_s < c.beta_c {
        ThresholdOrdering::SingularBelow
    } else {
        ThresholdOrdering::SingularAbove
    };
    let (beta_0, cube_constant, regular_constant) = if d <= 3 {
        let cd = cube_constant(d);
        let tables = PotentialTables::new(d, 16)?;
        let cdp = tables.regular_part_sup();
        (Some(uniqueness_threshold(d, c.c_d, cd, cdp)), Some(cd), Some(cdp))
    } else {
        (None, None, None)
    };
    Ok(ThresholdReport { d, beta_c: c.beta_c, beta_s: c.beta_s, beta_0, cube_constant, regular_constant, ordering })
}

/// `∫_{S^{d-1}} (2‖ω‖_∞)^{-p} dω`, which equals `p ∫_Q |y|^{p-d} dy`.
pub fn cube_profile(d: usize, p: f64) -> f64 {
    let rule = GaussLegendre::new(48).expect("valid degree");
    match d {
        1 => 2.0 * 2f64.powf(-p),
        2 => 8.0 * rule.integrate(0.0, PI / 4.0, |t| (2.0 * t.cos()).powf(-p)),
        3 => {
            // 24 copies of the cap where ω_3 is the largest component
            let inner = |phi: f64| {
                let c = 1.0 / (1.0 + 1.0 / phi.cos().max(phi.sin()).powi(2)).sqrt();
                if (p - 1.0).abs() < 1e-12 {
                    -0.5 * c.ln()
                } else {
                    2f64.powf(-p) * (1.0 - c.powf(1.0 - p)) / (1.0 - p)
                }
            };
            24.0 * (rule.integrate(0.0, PI / 4.0, inner) + rule.integrate(PI / 4.0, PI / 2.0, inner))
        }
        _ => f64::NAN,
    }
}

/// Supremum of [`cube_profile`] over a logarithmic grid of `p ∈ (0, d)`.
pub fn cube_constant(d: usize) -> f64 {
    (0..=400)
        .map(|i| {
            let p = d as f64 * 10f64.powf(-9.0 + 9.0 * i as f64 / 400.0) * (1.0 - 1e-9);
            cube_profile(d, p)
        })
        .fold(0.0, f64::max)
}

/// Root `β_0 ∈ (0, d)` of `c_d β exp(2C(d+β)/(d-β)² + C'(d+β)/(d-β)) / (2π)^{d/2} = 1`.
pub fn uniqueness_threshold(d: usize, c_d: f64, cube: f64, regular: f64) -> f64 {
    let df = d as f64;
    let lhs = |b: f64| {
        (c_d * b).ln() + 2.0 * cube * (df + b) / (df - b).powi(2) + regular * (df + b) / (df - b)
            - 0.5 * df * (2.0 * PI).ln()
    };
    let (mut lo, mut hi) = (1e-300f64, df * (1.0 - 1e-15));
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Sum of exponentials `Σ a_q e^{r_q t}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExpSum {
    pub terms: Vec<(f64, f64)>,
}

impl ExpSum {
    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|(a, r)| a * (r * t).exp()).sum()
    }

    fn push(&mut self, a: f64, r: f64) {
        if a == 0.0 {
            return;
        }
        if let Some(slot) = self.terms.iter_mut().find(|(_, q)| (q - r).abs() <= 1e-12 * r.abs().max(1.0)) {
            slot.0 += a;
        } else {
            self.terms.push((a, r));
        }
    }

    fn product(&self, other: &Self, scale: f64) -> Self {
        let mut out = Self::default();
        for (a, r) in &self.terms {
            for (b, q) in &other.terms {
                out.push(scale * a * b, r + q);
            }
        }
        out
    }

    /// Solution of `y' = λy + self`, `y(0) = 0`.
    fn duhamel(&self, lambda: f64) -> Result<Self> {
        let mut out = Self::default();
        for (a, r) in &self.terms {
            let gap = r - lambda;
            if gap.abs() < 1e-10 * lambda.abs().max(1.0) {
                return Err(Error::InvalidParameter("resonant rates in the expansion".into()));
            }
            out.push(a / gap, *r);
            out.push(-a / gap, lambda);
        }
        Ok(out)
    }
}

/// Grenier's approximate unstable solution `1 + Σ_{j≤n} ε^j ν_j` with
/// `ν_j = Σ_ℓ C_{j,ℓ}(t) e^{2πiℓ k·x}`.
#[derive(Debug, Clone)]
pub struct GrenierExpansion {
    pub d: usize,
    pub beta: f64,
    pub k: Vec<i64>,
    pub order: usize,
    pub lambda: f64,
    /// `coeffs[j-1][ℓ+j]` holds `C_{j,ℓ}`.
    coeffs: Vec<Vec<ExpSum>>,
}

impl GrenierExpansion {
    pub fn new(beta: f64, d: usize, k: &[i64], order: usize) -> Result<Self> {
        if k.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: k.len() });
        }
        if order == 0 {
            return Err(Error::InvalidParameter("order must be at least 1".into()));
        }
        let kn = (k.iter().map(|v| v * v).sum::<i64>() as f64).sqrt();
        let lambda = eigenvalue(beta, kn, d)?;
        let c_d = dimension_constants(d)?.c_d;
        let mut coeffs: Vec<Vec<ExpSum>> = Vec::with_capacity(order);
        let mut first = vec![ExpSum::default(); 3];
        first[0].push(1.0, lambda);
        first[2].push(1.0, lambda);
        coeffs.push(first);
        for j in 2..=order {
            let mut level = vec![ExpSum::default(); 2 * j + 1];
            for (idx, slot) in level.iter_mut().enumerate() {
                let l = idx as i64 - j as i64;
                if l == 0 {
                    continue;
                }
                let mut source = ExpSum::default();
                for m in 1..j {
                    let outer = &coeffs[j - m - 1];
                    let inner = &coeffs[m - 1];
                    for l1 in -(m as i64)..=(m as i64) {
                        if l1 == 0 {
                            continue;
                        }
                        let l2 = l - l1;
                        if l2.abs() > (j - m) as i64 {
                            continue;
                        }
                        let weight = c_d * (2.0 * PI * l1.abs() as f64 * kn).powi(2 - d as i32)
                            * (l1 + l2) as f64
                            / l1 as f64;
                        let prod = outer[(l2 + (j - m) as i64) as usize]
                            .product(&inner[(l1 + m as i64) as usize], weight);
                        for (a, r) in prod.terms {
                            source.push(a, r);
                        }
                    }
                }
                let lam_l = eigenvalue(beta, l.abs() as f64 * kn, d)?;
                *slot = source.duhamel(lam_l)?;
            }
            coeffs.push(level);
        }
        Ok(Self { d, beta, k: k.to_vec(), order, lambda, coeffs })
    }

    /// `C_{j,ℓ}(t)`; zero outside `|ℓ| <= j`.
    pub fn coefficient(&self, j: usize, l: i64, t: f64) -> f64 {
        if j == 0 || j > self.order || l.unsigned_abs() as usize > j {
            return 0.0;
        }
        self.coeffs[j - 1][(l + j as i64) as usize].eval(t)
    }

    /// Exponential-sum form of `C_{j,ℓ}`.
    pub fn coefficient_terms(&self, j: usize, l: i64) -> &ExpSum {
        &self.coeffs[j - 1][(l + j as i64) as usize]
    }

    /// `sup_{t≥0} |C_{j,ℓ}(t)| e^{-jλt}`.
    pub fn sup_constant(&self, j: usize, l: i64) -> f64 {
        if j == 0 || j > self.order || l.unsigned_abs() as usize > j {
            return 0.0;
        }
        let top = j as f64 * self.lambda;
        let sum = self.coefficient_terms(j, l);
        let mut slowest = f64::INFINITY;
        let mut limit = 0.0;
        for (a, r) in &sum.terms {
            let gap = r - top;
            if gap > 1e-12 * top.abs().max(1.0) {
                return f64::INFINITY;
            }
            if gap.abs() <= 1e-12 * top.abs().max(1.0) {
                limit += a;
            } else {
                slowest = slowest.min(-gap);
            }
        }
        let horizon = if slowest.is_finite() { 40.0 / slowest } else { 1.0 };
        let samples = 4000;
        let mut best: f64 = limit.abs();
        for i in 0..=samples {
            let t = horizon * (i as f64 / samples as f64).powi(2);
            best = best.max((sum.eval(t) * (-top * t).exp()).abs());
        }
        best
    }

    /// `𝖢_j = Σ_ℓ sup_t |C_{j,ℓ}| e^{-jλt}`.
    pub fn level_constant(&self, j: usize) -> f64 {
        (-(j as i64)..=(j as i64)).map(|l| self.sup_constant(j, l)).sum()
    }

    /// Largest time with `ε e^{λt} <= 1/2`.
    pub fn validity_time(&self, eps: f64) -> f64 {
        if self.lambda > 0.0 {
            (0.5 / eps).ln() / self.lambda
        } else {
            f64::INFINITY
        }
    }

    /// `μ_app^t - 1` as a function of the phase `s = k·x`.
    pub fn profile(&self, eps: f64, t: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for j in 1..=self.order {
            pow *= eps;
            for l in 1..=(j as i64) {
                acc += pow * 2.0 * self.coefficient(j, l, t) * (2.0 * PI * l as f64 * s).cos();
            }
        }
        acc
    }

    /// `μ_app^t` sampled on a grid.
    pub fn approximation(&self, eps: f64, t: f64, grid: Grid) -> Result<FourierField> {
        if grid.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: grid.dim() });
        }
        let t_max = self.validity_time(eps);
        if t > t_max {
            return Err(Error::ValidityWindow { t_max });
        }
        Ok(FourierField::from_fn(grid, |x| {
            let s: f64 = x.iter().zip(&self.k).map(|(a, b)| a * *b as f64).sum();
            1.0 + self.profile(eps, t, s)
        }))
    }

    /// `8 (max_j 𝖢_j)² ε^{n+1} e^{(n+1)λt}`.
    pub fn residual_bound(&self, eps: f64, t: f64) -> f64 {
        let cmax = (1..=self.order).map(|j| self.level_constant(j)).fold(0.0, f64::max);
        let np1 = (self.order + 1) as i32;
        8.0 * cmax * cmax * eps.powi(np1) * (np1 as f64 * self.lambda * t).exp()
    }

    /// `‖μ_app^t - 1‖_{L¹}` by midpoint quadrature in the phase.
    pub fn l1_distance(&self, eps: f64, t: f64) -> f64 {
        let m = 8192;
        (0..m).map(|i| self.profile(eps, t, (i as f64 + 0.5) / m as f64).abs()).sum::<f64>() / m as f64
    }
}

fn first_crossing(f: impl Fn(f64) -> f64, t_end: f64) -> Option<f64> {
    let samples = 2000;
    let mut prev_t = 0.0;
    if f(0.0) >= 0.0 {
        return Some(0.0);
    }
    for i in 1..=samples {
        let t = t_end * i as f64 / samples as f64;
        if f(t) >= 0.0 {
            let (mut lo, mut hi) = (prev_t, t);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f(mid) >= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev_t = t;
    }
    None
}

/// Smallest `t` with `(4ε/π) e^{λt} - ε²(C_0 e^{C_0 t} + 𝖢_2 e^{2λt}) >= 1/2`
/// inside the validity window.
pub fn certified_escape_bound(expansion: &GrenierExpansion, eps: f64, c0: f64) -> Result<f64> {
    check_eps(eps)?;
    let lam = expansion.lambda;
    if lam <= 0.0 {
        return Err(Error::NoEscape);
    }
    let c2 = expansion.level_constant(2.min(expansion.order));
    let f = |t: f64| {
        4.0 * eps / PI * (lam * t).exp() - eps * eps * (c0 * (c0 * t).exp() + c2 * (2.0 * lam * t).exp()) - 0.5
    };
    first_crossing(f, expansion.validity_time(eps)).ok_or(Error::NoEscape)
}

/// Smallest `t` with `‖μ_app^t - 1‖_{L¹} - C_0 ε^{n+1} e^{(n+1)λt} >= 1/2`.
pub fn instability_time_forecast(expansion: &GrenierExpansion, eps: f64, c0: f64) -> Result<f64> {
    check_eps(eps)?;
    if expansion.lambda <= 0.0 {
        return Err(Error::NoEscape);
    }
    let np1 = (expansion.order + 1) as i32;
    let lam = expansion.lambda;
    let f = |t: f64| {
        expansion.l1_distance(eps, t) - c0 * eps.powi(np1) * (np1 as f64 * lam * t).exp() - 0.5
    };
    first_crossing(f, expansion.validity_time(eps)).ok_or(Error::NoEscape)
}

/// Leading-order escape time `log(π/(8ε))/λ`.
pub fn leading_escape_time(lambda: f64, eps: f64) -> f64 {
    (PI / (8.0 * eps)).ln() / lambda
}

/// Least-squares `C_0` for [`instability_time_forecast`] against measured `(ε, t_ε)` pairs.
pub fn calibrate_forecast_constant(expansion: &GrenierExpansion, measured: &[(f64, f64)]) -> f64 {
    let cost = |c0: f64| -> f64 {
        measured
            .iter()
            .map(|&(e, t)| match instability_time_forecast(expansion, e, c0) {
                Ok(f) => (f - t).powi(2),
                Err(_) => 1e6,
            })
            .sum()
    };
    let (mut a, mut b) = (-200.0f64, 200.0f64);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = b - ratio * (b - a);
        let x2 = a + ratio * (b - a);
        if cost(x1) <= cost(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    0.5 * (a + b)
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("perturbation size {eps} outside (0, 1/2)")))
    }
}

/// Closed-form violation of the modulated log-HLS inequality by `μ_min^{⊗N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlhlsCertificate {
    pub beta: f64,
    /// `-E_β(μ_min)`.
    pub eta_beta: f64,
    /// `∬ g dμ_min⊗²`.
    pub interaction: f64,
    /// `β^{-1} ∫ μ_min log μ_min`, the per-particle entropy side.
    pub lhs: f64,
    /// Gap kept for every `N >= n0`.
    pub eta: f64,
    pub n0: usize,
    /// `(N, rhs, gap)` with `rhs = (N-1)/(2N) ∬ g dμ⊗²` and `gap = rhs - lhs`.
    pub rows: Vec<(usize, f64, f64)>,
}

pub fn mlhls_counterexample(
    d: usize,
    beta: f64,
    mu_min: &FourierField,
    tables: &PotentialTables,
    n_values: &[usize],
) -> Result<MlhlsCertificate> {
    check_beta(beta)?;
    let c = dimension_constants(d)?;
    let threshold = c.beta_s.min(c.beta_c);
    if beta <= threshold {
        return Err(Error::InvalidParameter(format!(
            "beta = {beta} must exceed min(beta_s, beta_c) = {threshold}"
        )));
    }
    let energy = free_energy(mu_min, beta, tables)?;
    if energy >= 0.0 {
        return Err(Error::NonNegativeFreeEnergy(energy));
    }
    let w = interaction_energy(mu_min, mu_min, tables)?;
    let lhs = entropy(mu_min)? / beta;
    let eta_beta = -energy;
    let n0 = ((w / eta_beta).ceil() as usize).max(2);
    let rows = n_values
        .iter()
        .map(|&n| {
            let rhs = (n as f64 - 1.0) / (2.0 * n as f64) * w;
            (n, rhs, rhs - lhs)
        })
        .collect();
    Ok(MlhlsCertificate { beta, eta_beta, interaction: w, lhs, eta: 0.5 * eta_beta, n0, rows })
}

/// Free-energy upper bound `-(β/432)|1/β_s - 1/β|³` on the infimum.
pub fn infimum_bound(beta: f64, d: usize) -> Result<f64> {
    check_beta(beta)?;
    let c = dimension_constants(d)?;
    Ok(-(beta / 432.0) * (1.0 / c.beta_s - 1.0 / beta).abs().powi(3))
}

/// Optimal cosine amplitude `(β/12)(1/β_s - 1/β)` behind [`infimum_bound`].
pub fn optimal_cosine_amplitude(beta: f64, d: usize) -> Result<f64> {
    check_beta(beta)?;
    let c = dimension_constants(d)?;
    Ok(beta / 12.0 * (1.0 / c.beta_s - 1.0 / beta))
}

/// Surface measure of `S^{d-1}`, the limit of the cube constant for small `d`.
pub fn cube_constant_limit(d: usize) -> f64 {
    sphere_area(d)
}
