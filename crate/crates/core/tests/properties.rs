use loggas_core::field::{
    convolve_g, dissipation, distance, fisher_information, relative_entropy, FourierField, Norm,
};
use loggas_core::particles::{chaos_distance, coarse_grain_particles, modulated_energy, ParticleEnsemble};
use loggas_core::potential::heat_multiplier;
use loggas_core::snapshot::{read_snapshot, write_snapshot};
use loggas_core::solver::{rescale_mass, step, ModelParams};
use loggas_core::stability::eigenvalue;
use loggas_core::{Grid, PotentialTables};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

fn tables2() -> &'static PotentialTables {
    static T: OnceLock<PotentialTables> = OnceLock::new();
    T.get_or_init(|| PotentialTables::new(2, 16).unwrap())
}

fn point2() -> impl Strategy<Value = [f64; 2]> {
    [-0.5f64..0.5, -0.5f64..0.5].prop_filter("away from the origin", |x| x[0].hypot(x[1]) > 1e-3)
}

/// Smooth positive density `1 + Σ a cos(2π k·x + φ)` with `Σ|a| < 0.9`.
fn density() -> impl Strategy<Value = Vec<(f64, i64, i64, f64)>> {
    prop::collection::vec(
        (-0.25f64..0.25, -3i64..=3, -3i64..=3, 0.0f64..6.3).prop_filter("nonzero mode", |m| m.1 != 0 || m.2 != 0),
        1..4,
    )
}

fn field(grid: Grid, modes: &[(f64, i64, i64, f64)]) -> FourierField {
    let modes = modes.to_vec();
    FourierField::from_fn(grid, move |x| {
        1.0 + modes
            .iter()
            .map(|(a, k, l, p)| a * (2.0 * PI * (*k as f64 * x[0] + *l as f64 * x[1]) + p).cos())
            .sum::<f64>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn potential_is_even_and_periodic(x in point2()) {
        let t = tables2();
        let g = t.eval_g(&x).unwrap();
        prop_assert!((g - t.eval_g(&[-x[0], -x[1]]).unwrap()).abs() < 1e-12);
        prop_assert!((g - t.eval_g(&[x[0] + 1.0, x[1] - 2.0]).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn force_is_odd(x in point2()) {
        let t = tables2();
        let f = t.eval_force(&x, 0.0).unwrap();
        let b = t.eval_force(&[-x[0], -x[1]], 0.0).unwrap();
        prop_assert!((f[0] + b[0]).abs() < 1e-9 * f[0].abs().max(1.0));
        prop_assert!((f[1] + b[1]).abs() < 1e-9 * f[1].abs().max(1.0));
    }

    #[test]
    fn truncation_lowers_and_is_monotone(x in point2(), e1 in 1e-3f64..0.2, e2 in 1e-3f64..0.2) {
        let t = tables2();
        let (small, large) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let g = t.eval_g(&x).unwrap();
        let gs = t.eval_g_eta(&x, small).unwrap();
        let gl = t.eval_g_eta(&x, large).unwrap();
        prop_assert!(gs <= g + 1e-12 && gl <= gs + 1e-12);
    }

    #[test]
    fn heat_multiplier_is_a_semigroup(k0 in -20i64..20, k1 in -20i64..20, a in 0.0f64..1e-3, b in 0.0f64..1e-3, beta in 0.1f64..50.0) {
        let k = [k0, k1];
        let ab = heat_multiplier(&k, a + b, beta);
        prop_assert!((ab - heat_multiplier(&k, a, beta) * heat_multiplier(&k, b, beta)).abs() <= 1e-12 * ab);
        prop_assert!(ab > 0.0 && ab <= 1.0);
    }

    #[test]
    fn spectral_transforms_preserve_norms(modes in density()) {
        let grid = Grid::new(2, 16).unwrap();
        let f = field(grid, &modes);
        let physical = f.values().iter().map(|v| v * v).sum::<f64>() / grid.len() as f64;
        let spectral: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum();
        prop_assert!((physical - spectral).abs() < 1e-12 * physical);
        let back = FourierField::from_coeffs(grid, f.coeffs().to_vec()).unwrap();
        prop_assert!(distance(&back, &f, Norm::LInf).unwrap() < 1e-13);
        let c = f.coeffs();
        for i in 0..grid.len() {
            let k = grid.wavevector(i);
            if k.iter().any(|v| *v == -8) {
                continue;
            }
            let j = grid.flat_index_of_mode(&[-k[0], -k[1]]);
            prop_assert!((c[i] - c[j].conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn functionals_have_their_signs(a in density(), b in density(), beta in 0.5f64..20.0) {
        let t = tables2();
        let mu = field(t.grid(), &a);
        let nu = field(t.grid(), &b);
        prop_assert!(convolve_g(&mu, t).unwrap().mass().abs() < 1e-14);
        prop_assert!(dissipation(&mu, beta, t).unwrap() >= -1e-12);
        prop_assert!(fisher_information(&mu).unwrap() >= -1e-12);
        prop_assert!(relative_entropy(&nu, &mu).unwrap() >= -1e-10);
    }

    #[test]
    fn steps_preserve_mass(a in density(), beta in 0.5f64..12.0) {
        let t = tables2();
        let mu = field(t.grid(), &a);
        let p = ModelParams::new(2, beta, 16, 1e-3, 1.0);
        let next = step(&mu, &p, t).unwrap();
        prop_assert!((next.mass() - 1.0).abs() < 1e-13);
        let u = FourierField::uniform(t.grid());
        prop_assert!(distance(&step(&u, &p, t).unwrap(), &u, Norm::LInf).unwrap() < 1e-14);
    }

    #[test]
    fn snapshots_round_trip(a in density(), time in 0.0f64..100.0) {
        let mu = field(Grid::new(2, 8).unwrap(), &a);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &mu, time).unwrap();
        prop_assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 8 + 8 * 64);
        let (back, t) = read_snapshot(buf.as_slice()).unwrap();
        prop_assert_eq!(t, time);
        prop_assert_eq!(back.values(), mu.values());
    }

    #[test]
    fn mass_rescaling_round_trips(a in density(), m in 0.1f64..10.0, beta in 0.1f64..10.0) {
        let mu = field(Grid::new(2, 8).unwrap(), &a).scaled(m);
        let (nu, b) = rescale_mass(&mu, beta).unwrap();
        prop_assert!((nu.mass() - 1.0).abs() < 1e-13);
        prop_assert!((b - beta * m).abs() < 1e-12 * b);
    }

    #[test]
    fn eigenvalues_are_subadditive(beta in 0.1f64..100.0, n in 2usize..=10, d in 1usize..=3) {
        let l1 = eigenvalue(beta, 1.0, d).unwrap();
        prop_assert!(eigenvalue(beta, n as f64, d).unwrap() < n as f64 * l1);
    }

    #[test]
    fn modulated_energy_is_exchangeable(seed in 0u64..1000, shift in 1usize..9) {
        let t = tables2();
        let mu = field(t.grid(), &[(0.3, 1, 0, 0.2)]);
        let e = ParticleEnsemble::sample(&mu, 10, 1.0, 0.0, seed).unwrap();
        let x = e.positions().to_vec();
        let mut y = x.clone();
        y.rotate_left(2 * shift);
        let a = modulated_energy(&x, &mu, t).unwrap();
        let b = modulated_energy(&y, &mu, t).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn mollification_contracts(seed in 0u64..1000, b in 0.01f64..0.05) {
        let t = tables2();
        let u = FourierField::uniform(t.grid());
        let e = ParticleEnsemble::sample(&u, 40, 1.0, 0.0, seed).unwrap();
        let near = chaos_distance(e.positions(), &u, b).unwrap();
        let far = chaos_distance(e.positions(), &u, 2.0 * b).unwrap();
        prop_assert!(far <= near + 1e-15);
        let c = coarse_grain_particles(e.positions(), t.grid(), 4).unwrap();
        prop_assert!((c.mass() - 1.0).abs() < 1e-14);
    }
}
