//! End-to-end acceptance suite. Each check prints one PASS/FAIL line to
//! stderr (uncaptured) and the test fails if any check fails.

use std::io::Write;
use std::time::Instant;

use permsym::axisym::{
    plane_residuals, rotate_axisym, rotation_q, sigma_mirror_residuals, sign_condition_data, stream_velocity,
    AxisFrame, AxisymProfile, Family, FamilyParams,
};
use permsym::biot_savart::{relative_discrepancy, velocity_from_w1, velocity_kernel, velocity_spectral_at};
use permsym::constraint::{constraint_residual, extract_w1, project_constraint};
use permsym::lambda::{lambda_diagnostics, strain_eigenstructure};
use permsym::pullback::{permutation_residual_max, pullback};
use permsym::random::{random_field, random_symmetric_velocity, random_vector};
use permsym::solver::{run, run_from, zeta_transport_on_run, InitialFamily, Mode, SolverConfig, TrajectoryState};
use permsym::spectral::{curl, sobolev_norm, sobolev_norm_vector, NormKind, NormSpec};
use permsym::symmetry::permutation_group;
use permsym::{Grid, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: Vec<String>,
}

impl Report {
    /// The check passes when every item does.
    fn check(&mut self, name: &str, start: Instant, items: &[Item]) {
        let ok = items.iter().all(|r| r.ok);
        let detail: Vec<String> = items
            .iter()
            .map(|r| format!("{}={:.3e} ({} {:.1e})", r.label, r.value, r.op, r.bound))
            .collect();
        let line = format!(
            "{} {:<28} {:>6.1}s  {}\n",
            if ok { "PASS" } else { "FAIL" },
            name,
            start.elapsed().as_secs_f64(),
            detail.join(" ")
        );
        let _ = std::io::stderr().write_all(line.as_bytes());
        if !ok {
            self.failures.push(name.to_string());
        }
    }
}

struct Item {
    label: &'static str,
    value: f64,
    op: &'static str,
    bound: f64,
    ok: bool,
}

fn le(label: &'static str, value: f64, bound: f64) -> Item {
    Item { label, value, op: "<=", bound, ok: value <= bound }
}

fn ge(label: &'static str, value: f64, bound: f64) -> Item {
    Item { label, value, op: ">=", bound, ok: value >= bound }
}

fn lt(label: &'static str, value: f64, bound: f64) -> Item {
    Item { label, value, op: "<", bound, ok: value < bound }
}

fn finite_positive(label: &'static str, value: f64) -> Item {
    Item { label, value, op: ">", bound: 0.0, ok: value.is_finite() && value > 0.0 }
}

fn equals(label: &'static str, value: f64, want: f64) -> Item {
    Item { label, value, op: "==", bound: want, ok: value == want }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn curl_parity(r: &mut Report) {
    let start = Instant::now();
    let g = Grid::new(32, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let u = random_vector(g, 6, &mut rng);
        let w = curl(&u);
        for p in permutation_group() {
            let q = p.to_map();
            let lhs = curl(&pullback(&u, &q).unwrap());
            let rhs = pullback(&w, &q).unwrap().scaled(f64::from(p.parity()));
            worst = worst.max(lhs.sub(&rhs).norm_l2() / w.norm_l2());
        }
    }
    r.check("curl parity", start, &[le("residual", worst, 1e-12)]);
}

fn characterization(r: &mut Report) {
    let start = Instant::now();
    let g = Grid::new(32, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = NormSpec::new(2.0);
    let (mut trip, mut equal, mut velocity) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..10 {
        let u = random_symmetric_velocity(g, 6, &mut rng);
        let w1 = extract_w1(&u).unwrap();
        trip = trip.max(velocity_from_w1(&w1).unwrap().sub(&u).norm_l2() / u.norm_l2());
        let omega = curl(&u);
        let cap = |a: usize| sobolev_norm(omega.comp(a), spec, NormKind::HsCapHdotNeg1).unwrap();
        for a in 1..3 {
            equal = equal.max(rel(cap(a), cap(0)));
            equal = equal.max(rel(omega.comp(a).norm_l2(), omega.comp(0).norm_l2()));
            equal = equal.max(rel(omega.comp(a).norm_linf(), omega.comp(0).norm_linf()));
        }
        let target = sobolev_norm_vector(&u, NormSpec::new(3.0), NormKind::Hs).unwrap() / 3f64.sqrt();
        velocity = velocity.max(rel(cap(0), target));
    }
    r.check(
        "characterization",
        start,
        &[le("round_trip", trip, 1e-10), le("component_norms", equal, 1e-12), le("velocity_norm", velocity, 1e-10)],
    );
}

fn projection(r: &mut Report) {
    let start = Instant::now();
    let g = Grid::new(32, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut idem, mut adj, mut resid, mut fixed) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let f = random_field(g, 16, &mut rng);
        let h = random_field(g, 16, &mut rng);
        assert!(f.is_mean_zero());
        let pf = project_constraint(&f);
        idem = idem.max(project_constraint(&pf).sub(&pf).norm_l2() / pf.norm_l2());
        adj = adj.max((pf.inner(&h) - f.inner(&project_constraint(&h))).abs() / (f.norm_l2() * h.norm_l2()));
        resid = resid.max(constraint_residual(&pf).max());
        let member = extract_w1(&random_symmetric_velocity(g, 6, &mut rng)).unwrap();
        fixed = fixed.max(project_constraint(&member).sub(&member).norm_l2() / member.norm_l2());
    }
    r.check(
        "constraint projection",
        start,
        &[
            le("idempotence", idem, 1e-12),
            le("self_adjoint", adj, 1e-12),
            le("residual", resid, 1e-12),
            le("fixes_members", fixed, 1e-13),
        ],
    );
}

fn lambda(r: &mut Report) {
    let start = Instant::now();
    let g = Grid::new(64, 8.0).unwrap();
    let w1 = sign_condition_data(g, Family::Gaussian, &FamilyParams::default()).unwrap();
    let rep = lambda_diagnostics(&w1).unwrap();
    let ls = rep.lambdas();
    let spread = ls.iter().flat_map(|a| ls.iter().map(move |b| rel(*a, *b))).fold(0.0, f64::max);
    let lam = rep.lambda_spectral;
    let mut grad = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 0.0 } else { -lam };
            grad = grad.max((rep.grad_origin[i][j] - want).abs() / lam.abs());
        }
    }
    let (e, align) = strain_eigenstructure(&rep);
    let want = [-2.0 * lam, lam, lam];
    let eig = (0..3).map(|i| (e[i] - want[i]).abs()).fold(0.0, f64::max);
    r.check(
        "lambda cross-validation",
        start,
        &[
            le("spread", spread, 1e-6),
            le("gradient", grad, 1e-6),
            le("eigenvalues", eig, 1e-8),
            ge("alignment", align, 1.0 - 1e-8),
            finite_positive("lambda", lam),
        ],
    );
}

fn kernel_discrepancy(n: usize, points: &[[f64; 3]]) -> f64 {
    let g = Grid::new(n, 16.0).unwrap();
    let w = 0.75f64;
    let w1 = ScalarField::from_fn(g, |x| {
        (x[0] + x[1] + x[2]) * (x[1] - x[2]) * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (w * w)).exp()
    });
    let k = velocity_kernel(&w1, points).unwrap();
    let s = velocity_spectral_at(&project_constraint(&w1), points).unwrap();
    relative_discrepancy(&k, &s)
}

fn kernel(r: &mut Report) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<[f64; 3]> = (0..20).map(|_| [0, 1, 2].map(|_| rng.gen_range(-2.0..2.0))).collect();
    let d64 = kernel_discrepancy(64, &points);
    let d96 = kernel_discrepancy(96, &points);
    r.check(
        "kernel velocity",
        start,
        &[le("n64", d64, 1e-3), lt("n96", d96, d64)],
    );
}

/// The unit-time run shared by the conservation and persistence checks.
fn conservation_and_persistence(r: &mut Report) {
    let start = Instant::now();
    let cfg = SolverConfig { n: 64, length: 8.0, t_end: 1.0, cfl: 0.5, ..Default::default() };
    let out = run(&cfg).unwrap();
    assert!(out.breakdown.is_none());
    let (a, b) = (&out.records[0], out.records.last().unwrap());
    let d_h = out.records.iter().map(|x| rel(x.hminus1_w1, a.hminus1_w1)).fold(0.0, f64::max);
    let d_u = out.records.iter().map(|x| rel(x.l2_velocity, a.l2_velocity)).fold(0.0, f64::max);
    let _ = writeln!(std::io::stderr(), "     bkm integral {:.6e} over {} steps", b.bkm_integral, out.steps);
    r.check(
        "conservation",
        start,
        &[
            le("hminus1_drift", d_h, 1e-6),
            le("l2_velocity_drift", d_u, 1e-6),
            finite_positive("bkm", b.bkm_integral),
        ],
    );

    let start = Instant::now();
    let sym = out.records.iter().map(|x| x.symmetry_residual_max).fold(0.0, f64::max);
    let planes = plane_residuals(&out.final_state.velocity()).max();
    r.check(
        "symmetry persistence",
        start,
        &[le("permutation", sym, 1e-9), le("planes", planes, 1e-9), equals("t", b.t, 1.0)],
    );
}

fn formulations(r: &mut Report) {
    let start = Instant::now();
    let cfg = SolverConfig { n: 48, length: 8.0, t_end: 0.25, mode: Mode::Both, ..Default::default() };
    let out = run(&cfg).unwrap();
    let gap = out.records.iter().filter_map(|x| x.formulation_gap).fold(0.0, f64::max);
    r.check(
        "formulation equivalence",
        start,
        &[le("gap", gap, 1e-8), equals("t", out.final_state.t, 0.25)],
    );
}

fn axisymmetric(r: &mut Report) {
    let start = Instant::now();
    let q = rotation_q();
    let m = q.matrix();
    let ortho = (m.transpose() * m - nalgebra::Matrix3::identity()).abs().max();
    let det = (m.determinant() - 1.0).abs();
    let e3 = q.apply([0.0, 0.0, 1.0]);
    let axis = (0..3).map(|a| (e3[a] - 1.0 / 3f64.sqrt()).abs()).fold(0.0, f64::max);

    let g = Grid::new(48, 8.0).unwrap();
    let u = stream_velocity(g, &AxisymProfile::ring_pair(0.75), &AxisFrame::e3());
    let v = rotate_axisym(&u).unwrap();
    let perm = permutation_residual_max(&v);
    let (mu, mw) = sigma_mirror_residuals(&v).unwrap();

    let transport = |n: usize| {
        let g = Grid::new(n, 16.0).unwrap();
        let w1 = sign_condition_data(g, Family::Gaussian, &FamilyParams::default()).unwrap();
        zeta_transport_on_run(&w1, 0.05, 1.0).unwrap()
    };
    let (t32, t64) = (transport(32), transport(64));
    r.check(
        "axisymmetric machinery",
        start,
        &[
            le("q_orthogonal", ortho, 1e-15),
            le("q_det", det, 1e-15),
            le("q_axis", axis, 1e-15),
            le("permutation", perm, 1e-8),
            le("mirror_velocity", mu, 1e-8),
            le("mirror_vorticity", mw, 1e-8),
            ge("transport_gain", t32 / t64, 4.0),
        ],
    );
}

fn rk4_order(r: &mut Report) {
    let start = Instant::now();
    let mut cfg = SolverConfig { n: 32, length: 8.0, t_end: 0.5, ..Default::default() };
    cfg.initial.family = InitialFamily::Gaussian;
    cfg.initial.params.amplitude = 4.0;
    let w1 = cfg.initial_w1().unwrap();
    let finals: Vec<ScalarField> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| {
            let c = SolverConfig { dt: Some(dt), ..cfg.clone() };
            let out = run_from(&c, TrajectoryState::new(w1.clone(), Mode::SingleComponent), &mut ()).unwrap();
            out.final_state.w1.unwrap()
        })
        .collect();
    let e1 = finals[0].sub(&finals[1]).norm_l2();
    let e2 = finals[1].sub(&finals[2]).norm_l2();
    let slope = (e1 / e2).log2();
    r.check("rk4 order", start, &[ge("slope", slope, 3.9)]);
}

#[test]
fn acceptance() {
    let mut r = Report { failures: Vec::new() };
    curl_parity(&mut r);
    characterization(&mut r);
    projection(&mut r);
    lambda(&mut r);
    kernel(&mut r);
    conservation_and_persistence(&mut r);
    formulations(&mut r);
    axisymmetric(&mut r);
    rk4_order(&mut r);
    assert!(r.failures.is_empty(), "failed: {:?}", r.failures);
}
