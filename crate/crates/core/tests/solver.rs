//! Trajectory-level properties of the solver.

use permsym::axisym::{sign_condition_data, Family, FamilyParams};
use permsym::constraint::project_constraint;
use permsym::random::random_field;
use permsym::solver::{run, step_rk4, Mode, SolverConfig, TrajectoryState};
use permsym::spectral::{dealias, sobolev_norm, NormKind, NormSpec};
use permsym::{Grid, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest `log(d(t)/d(0)) / int_0^t ||w1||_{H^2}` along a pair of runs.
fn growth_rate(base: &ScalarField, dir: &ScalarField, delta: f64) -> f64 {
    let mut a = TrajectoryState::new(base.clone(), Mode::SingleComponent);
    let mut b = TrajectoryState::new(base.axpy(delta, dir), Mode::SingleComponent);
    let d0 = a.first_component().sub(b.first_component()).norm_l2();
    let hs = |s: &TrajectoryState| sobolev_norm(s.first_component(), NormSpec::new(2.0), NormKind::Hs).unwrap();
    let dt = 0.05;
    let (mut integral, mut prev, mut rate) = (0.0, hs(&a), 0.0f64);
    for _ in 0..20 {
        a = step_rk4(&a, dt, true).unwrap();
        b = step_rk4(&b, dt, true).unwrap();
        let now = hs(&a);
        integral += 0.5 * dt * (prev + now);
        prev = now;
        let d = a.first_component().sub(b.first_component()).norm_l2();
        rate = rate.max((d / d0).ln() / integral);
    }
    rate
}

#[test]
fn nearby_data_separate_at_most_exponentially() {
    let g = Grid::new(24, 8.0).unwrap();
    let p = FamilyParams { amplitude: 3.0, ..Default::default() };
    let base = dealias(&sign_condition_data(g, Family::Gaussian, &p).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let raw = dealias(&project_constraint(&random_field(g, 4, &mut rng)));
    let dir = raw.scaled(1.0 / raw.norm_l2());
    let c1 = growth_rate(&base, &dir, 1e-4);
    let c2 = growth_rate(&base, &dir, 1e-5);
    assert!(c1.is_finite() && c2.is_finite());
    assert!(c1 < 1.0, "{c1}");
    assert!((c1 - c2).abs() <= 0.05 * c1.abs().max(1e-3), "{c1} {c2}");
}

#[test]
fn lambda_is_continuous_in_time() {
    let cfg = SolverConfig { n: 32, length: 8.0, t_end: 1.0, dt: Some(0.02), ..Default::default() };
    let out = run(&cfg).unwrap();
    let l: Vec<f64> = out.records.iter().map(|r| r.lambda).collect();
    let jumps: Vec<f64> = l.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    for k in 1..jumps.len() - 1 {
        let trend = jumps[k - 1].max(jumps[k + 1]).max(1e-12 * l[k].abs());
        assert!(jumps[k] <= 10.0 * trend, "step {k}: {} vs {trend}", jumps[k]);
    }
    assert!(l.iter().all(|v| v.is_finite() && *v > 0.0));
}

#[test]
fn reprojection_is_logged() {
    let cfg = SolverConfig { n: 16, length: 8.0, t_end: 0.2, dt: Some(0.05), reproject_every: 2, ..Default::default() };
    let out = run(&cfg).unwrap();
    assert_eq!(out.reprojections, vec![2, 4]);
    assert_eq!(out.steps, 4);
}

#[test]
fn full_vorticity_mode_stays_divergence_free() {
    let cfg = SolverConfig { n: 24, length: 8.0, t_end: 0.3, mode: Mode::FullVorticity, ..Default::default() };
    let out = run(&cfg).unwrap();
    let last = out.records.last().unwrap();
    assert!(last.divergence_residual <= 1e-10, "{}", last.divergence_residual);
    assert!(last.formulation_gap.is_none());
}
