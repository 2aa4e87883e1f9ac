use loggas_core::field::{dissipation, distance_to_uniform, free_energy, FourierField, Norm};
use loggas_core::solver::{
    bump_family, kirkwood_monroe_fixed_point, rate_functional_el_iteration, rescale_mass, run, step, ModelParams,
    Recording, StopReason, StopRule,
};
use loggas_core::stability::eigenvalue;
use loggas_core::{Error, PotentialTables};
use std::f64::consts::PI;

fn cos1(t: &PotentialTables, amp: f64) -> FourierField {
    FourierField::from_fn(t.grid(), |x| 1.0 + amp * (2.0 * PI * x[0]).cos())
}

#[test]
fn unstable_mode_grows_at_the_linear_rate() {
    let t = PotentialTables::new(2, 32).unwrap();
    let beta = 3.0 * PI;
    let mu0 = cos1(&t, 2e-4);
    let p = ModelParams::new(2, beta, 32, 1e-3, 0.05);
    let tr = run(&mu0, &p, &t, StopRule::Horizon, Recording::default()).unwrap();
    let factor = tr.final_state.mode_amplitude(&[1, 0]) / mu0.mode_amplitude(&[1, 0]);
    let want = (eigenvalue(beta, 1.0, 2).unwrap() * 0.05).exp();
    assert!((factor / want - 1.0).abs() < 0.01, "{factor} vs {want}");
}

#[test]
fn relaxation_decays_at_the_linear_rate() {
    let t = PotentialTables::new(2, 32).unwrap();
    let beta = 2.0;
    let raw = FourierField::from_fn(t.grid(), |x| {
        (2.0 * PI * x[0]).cos() + 0.7 * (2.0 * PI * x[1]).sin() + 0.4 * (2.0 * PI * (x[0] + x[1])).cos()
    });
    let scale = 0.1 / distance_to_uniform(&raw, Norm::L2);
    let mu0 = FourierField::from_values(t.grid(), raw.values().iter().map(|v| 1.0 + scale * v).collect()).unwrap();
    let p = ModelParams::new(2, beta, 32, 1e-3, 1.0);
    let tr = run(&mu0, &p, &t, StopRule::Horizon, Recording { diagnostics_every: 10, snapshots_every: None }).unwrap();
    let l2: Vec<f64> = tr.diagnostics.iter().map(|r| r.l2_dist).collect();
    assert!(l2.windows(2).all(|w| w[1] < w[0]));
    let (ta, tb) = (tr.diagnostics[20].t, tr.diagnostics[80].t);
    let rate = (l2[20] / l2[80]).ln() / (tb - ta);
    let want = 4.0 * PI * PI / beta - 2.0 * PI;
    assert!((rate / want - 1.0).abs() < 0.15, "{rate} vs {want}");
}

#[test]
fn trajectory_bookkeeping() {
    let t = PotentialTables::new(2, 16).unwrap();
    let mu0 = cos1(&t, 0.3);
    let p = ModelParams::new(2, 2.0, 16, 0.01, 0.2);
    let tr = run(&mu0, &p, &t, StopRule::Horizon, Recording { diagnostics_every: 2, snapshots_every: Some(5) }).unwrap();
    assert_eq!(tr.snapshots[0].1.values(), mu0.values());
    assert!(tr.snapshots.windows(2).all(|w| w[1].0 > w[0].0));
    assert!(tr.diagnostics.windows(2).all(|w| w[1].t > w[0].t));
    assert_eq!(tr.steps, 20);
    assert_eq!(tr.stop, StopReason::Horizon);
    let one = step(&mu0, &p, &t).unwrap();
    assert!((one.mass() - 1.0).abs() < 1e-14);
}

#[test]
fn l2_stop_rule_interpolates_crossing() {
    let t = PotentialTables::new(2, 16).unwrap();
    let mu0 = cos1(&t, 0.2);
    let p = ModelParams::new(2, 2.0, 16, 1e-3, 5.0);
    let tr = run(&mu0, &p, &t, StopRule::L2Below(1e-3), Recording::default()).unwrap();
    let StopReason::L2Below { t: hit } = tr.stop else { panic!("{:?}", tr.stop) };
    let rate = -eigenvalue(2.0, 1.0, 2).unwrap();
    let want = ((0.2 / 2f64.sqrt()) / 1e-3).ln() / rate;
    assert!((hit - want).abs() < 0.01 * want, "{hit} vs {want}");
}

#[test]
fn supercritical_bump_blows_up_and_subcritical_does_not() {
    let n = 128;
    let t = PotentialTables::new(2, n).unwrap();
    let mu0 = bump_family(0.25, 2, n).unwrap();
    let hot = ModelParams::new(2, 3.0, n, 1e-5, 2e-3);
    let tr = run(&mu0, &hot, &t, StopRule::Horizon, Recording { diagnostics_every: 100, snapshots_every: None }).unwrap();
    assert_eq!(tr.stop, StopReason::Horizon);
    let cold = ModelParams::new(2, 10.0, n, 1e-5, 2e-3);
    let tr = run(&mu0, &cold, &t, StopRule::Horizon, Recording { diagnostics_every: 100, snapshots_every: None }).unwrap();
    let StopReason::BlowUp { t: when } = tr.stop else { panic!("{:?}", tr.stop) };
    assert!(when > 4e-4 && when < 8e-4, "{when}");
    assert!(tr.final_state.values().iter().all(|v| v.is_finite()));
}

#[test]
fn kirkwood_monroe_examples() {
    let t = PotentialTables::new(2, 32).unwrap();
    let u = FourierField::uniform(t.grid());
    let fp = kirkwood_monroe_fixed_point(&u, 9.0, &t, 0.5, 1e-12, 10).unwrap();
    assert!(fp.converged && fp.residual == 0.0 && fp.iterations == 0);
    let fp = kirkwood_monroe_fixed_point(&cos1(&t, 0.3), 2.0, &t, 0.5, 1e-10, 2000).unwrap();
    assert!(fp.converged && distance_to_uniform(&fp.mu, Norm::L2) <= 1e-9);
    let fp = kirkwood_monroe_fixed_point(&cos1(&t, 0.5), 8.0, &t, 0.5, 1e-10, 5000).unwrap();
    assert!(fp.converged);
    assert!(free_energy(&fp.mu, 8.0, &t).unwrap() < 0.0);
    assert!(dissipation(&fp.mu, 8.0, &t).unwrap() <= 1e-9);
    assert!(distance_to_uniform(&fp.mu, Norm::L2) > 0.5);
}

#[test]
fn euler_lagrange_examples() {
    let t = PotentialTables::new(2, 32).unwrap();
    let u = FourierField::uniform(t.grid());
    let (fp, back) = rate_functional_el_iteration(&u, &u, 3.0, 0.05, &t, 0.5, 1e-12, 10).unwrap();
    assert!(back && fp.iterations == 0);
    let (fp, back) = rate_functional_el_iteration(&u, &cos1(&t, 0.2), 1.0, 0.05, &t, 0.5, 1e-10, 2000).unwrap();
    assert!(fp.converged && back);
    let (fp, back) = rate_functional_el_iteration(&u, &cos1(&t, 0.5), 8.0, 0.0, &t, 0.5, 1e-10, 5000).unwrap();
    assert!(fp.converged && !back);
    let km = kirkwood_monroe_fixed_point(&cos1(&t, 0.5), 8.0, &t, 0.5, 1e-10, 5000).unwrap();
    let gap = fp.mu.values().iter().zip(km.mu.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-6, "{gap}");
}

#[test]
fn bump_family_properties() {
    let n = 512;
    let t = PotentialTables::new(2, n).unwrap();
    let a = bump_family(0.2, 2, n).unwrap();
    let b = bump_family(0.1, 2, n).unwrap();
    assert!((a.mass() - 1.0).abs() < 1e-12);
    let grid = t.grid();
    for (i, v) in b.values().iter().enumerate() {
        let x = grid.point(i);
        if (x[0] * x[0] + x[1] * x[1]).sqrt() >= 0.1 / 8.0 {
            assert_eq!(*v, 0.0);
        }
    }
    let beta = 6.0;
    let slope = free_energy(&b, beta, &t).unwrap() - free_energy(&a, beta, &t).unwrap();
    let want = (beta - 4.0) / (2.0 * beta) * 0.5f64.ln();
    assert!((slope / want - 1.0).abs() < 0.2, "{slope} vs {want}");
    assert!(matches!(bump_family(0.05, 2, 256), Err(Error::UnderResolved { required_n: 640 })));
}

#[test]
fn mass_rescaling_examples() {
    let t = PotentialTables::new(2, 16).unwrap();
    let mu = cos1(&t, 0.3);
    let (nu, b) = rescale_mass(&mu, 3.0).unwrap();
    assert!((b - 3.0).abs() < 1e-14 && (nu.mass() - 1.0).abs() < 1e-14);
    let (nu, b) = rescale_mass(&mu.scaled(2.0), 3.0).unwrap();
    assert!((b - 6.0).abs() < 1e-13 && (nu.mass() - 1.0).abs() < 1e-14);
    assert!(matches!(rescale_mass(&mu.scaled(0.0), 3.0), Err(Error::NonPositiveMass(_))));
}
