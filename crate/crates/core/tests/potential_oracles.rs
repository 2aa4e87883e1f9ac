use loggas_core::potential::{dimension_constants, heat_multiplier, log_hls_constant};
use loggas_core::{Error, PotentialTables};
use std::f64::consts::PI;

/// E1 by composite Simpson on `∫_0^1 e^{-z/u} du / u`, independent of the library.
fn e1_quadrature(z: f64) -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |u: f64| if u <= 0.0 { 0.0 } else { (-z / u).exp() / u };
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// `Γ(d/2, z)` for `d ∈ {1, 2, 3}`.
fn upper_gamma_half(d: usize, z: f64) -> f64 {
    match d {
        1 => PI.sqrt() * puruspe::erfc(z.sqrt()),
        2 => (-z).exp(),
        3 => z.sqrt() * (-z).exp() + 0.5 * PI.sqrt() * puruspe::erfc(z.sqrt()),
        _ => unreachable!(),
    }
}

/// Heat-kernel Ewald sum for the zero-mean periodic log potential, split at time `t`.
fn ewald_oracle(x: &[f64], t: f64) -> f64 {
    let d = x.len();
    let pref = (4.0 * PI).powf(d as f64 / 2.0) / 2.0;
    let images = 3i64;
    let fourier = 14i64;
    let mut real = 0.0;
    let mut recip = 0.0;
    let span = |r: i64| (0..d).map(|_| -r..=r).fold(vec![vec![]], |acc: Vec<Vec<i64>>, rng| {
        acc.into_iter().flat_map(|p| rng.clone().map(move |v| {
            let mut q = p.clone();
            q.push(v);
            q
        })).collect()
    });
    for n in span(images) {
        let r2: f64 = x.iter().zip(&n).map(|(a, b)| (a + *b as f64).powi(2)).sum();
        real += 0.5 * e1_quadrature(r2 / (4.0 * t));
    }
    for k in span(fourier) {
        let k2: f64 = k.iter().map(|v| (*v as f64).powi(2)).sum();
        if k2 == 0.0 {
            continue;
        }
        let z = 4.0 * PI * PI * k2 * t;
        let phase: f64 = k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
        recip += pref * (z / t).powf(-(d as f64) / 2.0) * upper_gamma_half(d, z) * (2.0 * PI * phase).cos();
    }
    real + recip - pref * (2.0 / d as f64) * t.powf(d as f64 / 2.0)
}

#[test]
fn one_dimensional_closed_form() {
    let t = PotentialTables::new(1, 32).unwrap();
    for &x in &[0.013, 0.1, 0.25, -0.37, 0.49] {
        let want = -(2.0 * (PI * x).sin()).abs().ln();
        assert!((t.eval_g(&[x]).unwrap() - want).abs() < 1e-11, "g at {x}");
        let force = t.eval_force(&[x], 0.0).unwrap()[0];
        let dwant = -PI / (PI * x).tan();
        assert!((force - dwant).abs() < 1e-9 * dwant.abs().max(1.0), "force at {x}");
    }
}

#[test]
fn matches_heat_kernel_ewald_oracle() {
    for d in [1usize, 2, 3] {
        let t = PotentialTables::new(d, 16).unwrap();
        let points: [&[f64]; 3] = [&[0.3, -0.1, 0.2], &[0.05, 0.02, -0.01], &[-0.45, 0.4, 0.5]];
        for p in points {
            let x = &p[..d];
            let want = ewald_oracle(x, 0.006);
            let got = t.eval_g(x).unwrap();
            assert!((got - want).abs() < 1e-8, "d={d} x={x:?}: {got} vs {want}");
        }
    }
}

#[test]
fn ewald_oracle_self_consistent_across_split() {
    let a = ewald_oracle(&[0.21, 0.33], 0.004);
    let b = ewald_oracle(&[0.21, 0.33], 0.01);
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn regular_part_is_continuous_near_origin() {
    let t = PotentialTables::new(2, 16).unwrap();
    let at = |r: f64| t.eval_g(&[r * 0.6, r * 0.8]).unwrap() + r.ln();
    assert!((at(1e-3) - at(2e-3)).abs() < 0.05);
    assert!((at(1e-3) - t.regular_part(&[0.0, 0.0]).unwrap()).abs() < 1e-4);
}

#[test]
fn singular_point_is_rejected() {
    let t = PotentialTables::new(2, 16).unwrap();
    assert!(matches!(t.eval_g(&[0.0, 0.0]), Err(Error::SingularPoint)));
    assert!(matches!(t.eval_force(&[0.0, 0.0], 0.0), Err(Error::Collision)));
    assert!(t.eval_g_eta(&[0.0, 0.0], 0.01).unwrap().is_finite());
}

#[test]
fn truncation_is_flat_core_and_exact_outside() {
    let t = PotentialTables::new(2, 16).unwrap();
    let eta = 0.05;
    let x = [0.04, 0.01];
    let r = (x[0] * x[0] + x[1] * x[1]) as f64;
    let r = r.sqrt();
    let want = t.eval_g(&x).unwrap() + (r / eta).ln();
    assert!((t.eval_g_eta(&x, eta).unwrap() - want).abs() < 1e-12);
    let y = [0.2, -0.1];
    assert_eq!(t.eval_g_eta(&y, eta).unwrap(), t.eval_g(&y).unwrap());
    let origin = t.eval_g_eta(&[0.0, 0.0], eta).unwrap();
    assert!((origin - (t.regular_part(&[0.0, 0.0]).unwrap() - eta.ln())).abs() < 1e-12);
}

#[test]
fn force_matches_finite_difference() {
    let t = PotentialTables::new(2, 16).unwrap();
    let x = [0.3 * 0.8, 0.3 * 0.6];
    let h = 1e-5;
    let f = t.eval_force(&x, 0.0).unwrap();
    for a in 0..2 {
        let mut p = x;
        let mut m = x;
        p[a] += h;
        m[a] -= h;
        let fd = (t.eval_g(&p).unwrap() - t.eval_g(&m).unwrap()) / (2.0 * h);
        assert!((f[a] - fd).abs() < 1e-6, "axis {a}: {} vs {fd}", f[a]);
    }
}

#[test]
fn force_inside_core_is_bounded() {
    let t = PotentialTables::new(2, 16).unwrap();
    let eta = 0.02;
    let x = [1e-4, -2e-4];
    let r = (x[0] * x[0] + x[1] * x[1] as f64).sqrt();
    let f = t.eval_force(&x, eta).unwrap();
    let mag = (f[0] * f[0] + f[1] * f[1]).sqrt();
    assert!(mag <= r / (eta * eta) + 1.0, "{mag}");
}

#[test]
fn dimension_constants_known_values() {
    let c1 = dimension_constants(1).unwrap();
    assert!((c1.c_d - PI).abs() < 1e-13 && (c1.beta_s - 2.0).abs() < 1e-13);
    let c2 = dimension_constants(2).unwrap();
    assert!((c2.c_d - 2.0 * PI).abs() < 1e-13 && (c2.beta_s - 2.0 * PI).abs() < 1e-13 && c2.beta_c == 4.0);
    let c3 = dimension_constants(3).unwrap();
    assert!((c3.c_d - 2.0 * PI * PI).abs() < 1e-12 && (c3.beta_s - 4.0 * PI).abs() < 1e-12);
    assert!(dimension_constants(0).is_err());
}

/// `ψ(n) = -γ + H_{n-1}` and `ψ(n + 1/2) = -γ - 2 ln 2 + Σ_{k=1}^n 2/(2k-1)`.
fn digamma_half_integer(two_x: usize) -> f64 {
    let gamma = 0.577_215_664_901_532_9;
    if two_x % 2 == 0 {
        -gamma + (1..two_x / 2).map(|k| 1.0 / k as f64).sum::<f64>()
    } else {
        -gamma - 2.0 * 2f64.ln() + (1..=two_x / 2).map(|k| 2.0 / (2 * k - 1) as f64).sum::<f64>()
    }
}

/// `ln Γ(x)` for half-integers by the recurrence from `Γ(1) = 1` and `Γ(1/2) = √π`.
fn ln_gamma_half_integer(two_x: usize) -> f64 {
    let mut x = if two_x % 2 == 0 { 1.0 } else { 0.5 };
    let mut acc = if two_x % 2 == 0 { 0.0 } else { 0.5 * PI.ln() };
    while 2.0 * x < two_x as f64 - 0.5 {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

#[test]
fn log_hls_constant_against_recurrences() {
    assert!((log_hls_constant(2).unwrap() - 0.5 * (PI.ln() + 1.0)).abs() < 1e-12);
    assert!((log_hls_constant(1).unwrap() - (2.0 * PI).ln()).abs() < 1e-12);
    for d in 1..=17usize {
        let want = 0.5 * PI.ln()
            + (ln_gamma_half_integer(d) - ln_gamma_half_integer(2 * d)) / d as f64
            + 0.5 * (digamma_half_integer(2 * d) - digamma_half_integer(d));
        let got = log_hls_constant(d).unwrap();
        assert!((got - want).abs() < 1e-11, "d={d}: {got} vs {want}");
        assert_eq!(got > 0.0, d <= 9, "sign at d={d}");
    }
}

#[test]
fn heat_multiplier_examples() {
    assert_eq!(heat_multiplier(&[0, 0], 3.0, 2.0), 1.0);
    assert_eq!(heat_multiplier(&[4, 1], 0.0, 2.0), 1.0);
    let beta = 1.7;
    let t = beta / (4.0 * PI * PI);
    assert!((heat_multiplier(&[1, 0], t, beta) - (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn grid_realization_parseval_and_mean() {
    for d in [1usize, 2] {
        let t = PotentialTables::new(d, 16).unwrap();
        let n = 128;
        let g = t.grid_realization(n).unwrap();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        assert!(mean.abs() < 1e-10, "d={d} mean {mean}");
        let c = dimension_constants(d).unwrap();
        let half = n as i64 / 2;
        let mut spectral = 0.0;
        let total = (n as i64).pow(d as u32);
        for idx in 0..total {
            let mut k2 = 0.0;
            let mut r = idx;
            for _ in 0..d {
                let j = r % n as i64;
                r /= n as i64;
                let k = if j < half { j } else { j - n as i64 };
                k2 += (k * k) as f64;
            }
            if k2 > 0.0 {
                spectral += (c.c_d * (2.0 * PI * k2.sqrt()).powi(-(d as i32))).powi(2);
            }
        }
        let physical = g.iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        assert!((physical - spectral).abs() < 1e-8 * spectral, "d={d}: {physical} vs {spectral}");
    }
}
