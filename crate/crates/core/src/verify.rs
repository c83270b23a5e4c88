//! Identity suites run by `permsym verify`.
//!
//! Each check reports a residual against a tolerance. The fast level uses
//! n = 16 and n = 32; the full level uses n = 64 and the tolerances of the
//! acceptance suite. Operations under test can be swapped through [`Hooks`]
//! to confirm that the suites catch deliberate defects.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::axisym::{plane_residuals, sign_condition_data, Family, FamilyParams};
use crate::biot_savart::{relative_discrepancy, velocity_from_vorticity, velocity_from_w1, velocity_kernel, velocity_spectral_at};
use crate::constraint::{constraint_residual, extract_w1, project_constraint, reconstruct_vorticity_unchecked};
use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::lambda::{lambda_diagnostics, strain_eigenstructure};
use crate::pullback::{pullback, scalar_pullback};
use crate::random::{random_field, random_symmetric_velocity, random_vector};
use crate::solver::{run, SolverConfig};
use crate::spectral::{curl, inverse_laplacian, sobolev_norm, sobolev_norm_vector, NormKind, NormSpec};
use crate::symmetry::{compose, permutation, permutation_group};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Fast,
    Full,
}

/// Replaceable operations, for mutation sanity runs.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub reconstruct_vorticity: fn(&ScalarField) -> VectorField,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks { reconstruct_vorticity: reconstruct_vorticity_unchecked }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
    /// Set when the check could not be evaluated.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckResult {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        match &self.error {
            Some(e) => format!("{status} {:<34} error: {e}", self.name),
            None => format!(
                "{status} {:<34} residual {:.3e} <= {:.1e}  ({:.1}s)",
                self.name, self.residual, self.tolerance, self.seconds
            ),
        }
    }
}

struct Ctx {
    level: Level,
    hooks: Hooks,
}

impl Ctx {
    fn n(&self) -> usize {
        match self.level {
            Level::Fast => 16,
            Level::Full => 32,
        }
    }

    fn heavy_n(&self) -> usize {
        match self.level {
            Level::Fast => 32,
            Level::Full => 64,
        }
    }

    fn samples(&self) -> usize {
        match self.level {
            Level::Fast => 10,
            Level::Full => 50,
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0x5eed ^ salt)
    }
}

type Check = fn(&Ctx) -> Result<f64>;

fn checks(level: Level) -> Vec<(&'static str, f64, Check)> {
    let fast = level == Level::Fast;
    vec![
        ("symmetry_algebra", 0.0, symmetry_algebra),
        ("curl_parity", 1e-12, curl_parity),
        ("reconstructed_vorticity_parity", 1e-12, reconstructed_parity),
        ("fourier_commutation", 1e-12, fourier_commutation),
        ("inverse_laplacian_commutation", 1e-12, laplacian_commutation),
        ("norm_isometries", 1e-10, norm_isometries),
        ("characterization_round_trip", 1e-10, round_trip),
        ("constraint_projection", 1e-12, projection),
        ("lambda_cross_validation", 1e-6, lambda_agreement),
        ("strain_eigenstructure", 1e-8, eigenstructure),
        ("planes_of_symmetry", 1e-9, planes),
        ("kernel_velocity", if fast { 1e-2 } else { 1e-3 }, kernel),
        ("conservation_smoke", 1e-6, conservation),
    ]
}

/// Runs every check of `level` and returns one result per check.
pub fn run_suite(level: Level, hooks: Hooks) -> Vec<CheckResult> {
    let ctx = Ctx { level, hooks };
    checks(level)
        .into_iter()
        .map(|(name, tolerance, check)| {
            let start = Instant::now();
            let outcome = check(&ctx);
            let seconds = start.elapsed().as_secs_f64();
            match outcome {
                Ok(residual) => CheckResult {
                    name: name.to_string(),
                    residual,
                    tolerance,
                    passed: residual <= tolerance,
                    seconds,
                    error: None,
                },
                Err(e) => CheckResult {
                    name: name.to_string(),
                    residual: f64::NAN,
                    tolerance,
                    passed: false,
                    seconds,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Number of group-law violations: closure, parity multiplication and
/// generation by the two swaps that involve the first axis.
fn symmetry_algebra(_: &Ctx) -> Result<f64> {
    let group = permutation_group();
    let mut bad = 0usize;
    for a in &group {
        for b in &group {
            let c = a.compose(b);
            if !group.iter().any(|g| g.matrix() == c.matrix()) || c.parity() != a.parity() * b.parity() {
                bad += 1;
            }
        }
    }
    let mut generated = vec![permutation("P12")?, permutation("P13")?];
    loop {
        let mut added = false;
        for i in 0..generated.len() {
            for j in 0..generated.len() {
                let c = generated[i].compose(&generated[j]);
                if !generated.iter().any(|g| g.matrix() == c.matrix()) {
                    generated.push(c);
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    if generated.len() != 6 {
        bad += 1;
    }
    let pb = permutation("Pb")?.to_map();
    if compose(&permutation("P12")?.to_map(), &permutation("P13")?.to_map()) != pb
        || compose(&pb, &pb) != permutation("Pf")?.to_map()
    {
        bad += 1;
    }
    Ok(bad as f64)
}

fn curl_parity(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(1);
    let mut worst = 0.0f64;
    for _ in 0..ctx.samples() {
        let u = random_vector(g, 4, &mut rng);
        let w = curl(&u);
        for p in permutation_group() {
            let q = p.to_map();
            let lhs = curl(&pullback(&u, &q)?);
            let rhs = pullback(&w, &q)?.scaled(f64::from(p.parity()));
            worst = worst.max(lhs.sub(&rhs).norm_l2() / w.norm_l2());
        }
    }
    Ok(worst)
}

/// The vorticity rebuilt from `w1` must transform with the parity of each
/// permutation and be the curl of its own Biot-Savart velocity.
fn reconstructed_parity(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(2);
    let mut worst = 0.0f64;
    for _ in 0..ctx.samples().min(10) {
        let w1 = project_constraint(&random_field(g, 4, &mut rng));
        let omega = (ctx.hooks.reconstruct_vorticity)(&w1);
        let scale = omega.norm_l2();
        for p in permutation_group() {
            let r = pullback(&omega, &p.to_map())?.axpy(-f64::from(p.parity()), &omega);
            worst = worst.max(r.norm_l2() / scale);
        }
        let back = curl(&velocity_from_vorticity(&omega));
        worst = worst.max(back.sub(&omega).norm_l2() / scale);
    }
    Ok(worst)
}

/// Coefficients of `f o P^T` are the coefficients of `f` at `P^T m`.
fn fourier_commutation(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(3);
    let f = random_field(g, g.n() / 2, &mut rng);
    let scale = f.spectral().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    for p in permutation_group() {
        let q = p.to_map();
        let fp = scalar_pullback(&f, &q)?;
        let qt = q.transpose();
        for idx in 0..g.len() {
            let m = g.freq3(idx).map(|v| v as f64);
            let src = qt.apply(m).map(|v| g.freq_index(v.round() as i64).expect("permuted frequency"));
            let c = f.spectral()[g.index(src[0], src[1], src[2])];
            worst = worst.max((fp.spectral()[idx] - c).norm() / scale);
        }
    }
    Ok(worst)
}

fn laplacian_commutation(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(4);
    let f = random_field(g, 4, &mut rng);
    let mut worst = 0.0f64;
    for p in permutation_group() {
        let q = p.to_map();
        let a = inverse_laplacian(&scalar_pullback(&f, &q)?)?;
        let b = scalar_pullback(&inverse_laplacian(&f)?, &q)?;
        worst = worst.max(a.sub(&b).norm_l2() / b.norm_l2());
    }
    Ok(worst)
}

fn norm_isometries(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(5);
    let spec = NormSpec::new(2.0);
    let mut worst = 0.0f64;
    for _ in 0..ctx.samples().min(10) {
        let u = random_symmetric_velocity(g, 4, &mut rng);
        let omega = curl(&u);
        let cap = |f: &ScalarField| sobolev_norm(f, spec, NormKind::HsCapHdotNeg1);
        let n1 = cap(omega.comp(0))?;
        for a in 1..3 {
            let c = omega.comp(a);
            worst = worst.max((cap(c)? - n1).abs() / n1);
            let l2 = omega.comp(0).norm_l2();
            worst = worst.max((c.norm_l2() - l2).abs() / l2);
            let li = omega.comp(0).norm_linf();
            worst = worst.max((c.norm_linf() - li).abs() / li);
        }
        let target = sobolev_norm_vector(&u, NormSpec::new(3.0), NormKind::Hs)? / 3f64.sqrt();
        worst = worst.max((n1 - target).abs() / target);
    }
    Ok(worst)
}

fn round_trip(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(6);
    let mut worst = 0.0f64;
    for _ in 0..ctx.samples().min(10) {
        let u = random_symmetric_velocity(g, 4, &mut rng);
        let w1 = extract_w1(&u)?;
        let back = velocity_from_w1(&w1)?;
        worst = worst.max(back.sub(&u).norm_l2() / u.norm_l2());
    }
    Ok(worst)
}

/// Idempotence, self-adjointness, residual after projection and the fixed
/// points of the projection.
fn projection(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 2.0)?;
    let mut rng = ctx.rng(7);
    let mut worst = 0.0f64;
    for _ in 0..ctx.samples().min(20) {
        let f = random_field(g, g.n() / 2, &mut rng);
        let h = random_field(g, g.n() / 2, &mut rng);
        let pf = project_constraint(&f);
        let ppf = project_constraint(&pf);
        worst = worst.max(ppf.sub(&pf).norm_l2() / pf.norm_l2());
        let ph = project_constraint(&h);
        let sa = (pf.inner(&h) - f.inner(&ph)).abs() / (f.norm_l2() * h.norm_l2());
        worst = worst.max(sa);
        worst = worst.max(constraint_residual(&pf).max());
        let member = ppf.clone();
        worst = worst.max(project_constraint(&member).sub(&member).norm_l2() / member.norm_l2());
    }
    Ok(worst)
}

fn lambda_grid(ctx: &Ctx) -> Result<Grid> {
    Grid::new(ctx.heavy_n(), 8.0)
}

/// Pairwise relative spread of the five lambda evaluations, and the match of
/// the velocity gradient at the origin to `lambda (J - I)` up to sign.
fn lambda_agreement(ctx: &Ctx) -> Result<f64> {
    let w1 = sign_condition_data(lambda_grid(ctx)?, Family::Gaussian, &FamilyParams::default())?;
    let r = lambda_diagnostics(&w1)?;
    let ls = r.lambdas();
    let mut worst = 0.0f64;
    for a in &ls {
        for b in &ls {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    let lam = r.lambda_spectral;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 0.0 } else { -lam };
            worst = worst.max((r.grad_origin[i][j] - want).abs() / lam.abs());
        }
    }
    if !(lam > 0.0) {
        worst = f64::INFINITY;
    }
    Ok(worst)
}

fn eigenstructure(ctx: &Ctx) -> Result<f64> {
    let w1 = sign_condition_data(lambda_grid(ctx)?, Family::Gaussian, &FamilyParams::default())?;
    let r = lambda_diagnostics(&w1)?;
    let (e, align) = strain_eigenstructure(&r);
    let lam = r.lambda_spectral;
    let want = [-2.0 * lam, lam, lam];
    let mut worst = (0..3).map(|i| (e[i] - want[i]).abs()).fold(0.0, f64::max);
    worst = worst.max(1.0 - align);
    Ok(worst)
}

fn planes(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.n(), 8.0)?;
    let w1 = sign_condition_data(g, Family::Perturbed, &FamilyParams::default())?;
    let u = velocity_from_w1(&w1)?;
    Ok(plane_residuals(&u).max())
}

fn kernel(ctx: &Ctx) -> Result<f64> {
    let g = Grid::new(ctx.heavy_n(), 16.0)?;
    let w = 0.75f64;
    let w1 = ScalarField::from_fn(g, |x| {
        (x[0] + x[1] + x[2]) * (x[1] - x[2]) * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (w * w)).exp()
    });
    let mut rng = ctx.rng(8);
    let pts: Vec<[f64; 3]> = (0..20)
        .map(|_| [0, 1, 2].map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)))
        .collect();
    let k = velocity_kernel(&w1, &pts)?;
    let s = velocity_spectral_at(&project_constraint(&w1), &pts)?;
    Ok(relative_discrepancy(&k, &s))
}

fn conservation(ctx: &Ctx) -> Result<f64> {
    let (n, t_end) = match ctx.level {
        Level::Fast => (32, 0.25),
        Level::Full => (64, 1.0),
    };
    let cfg = SolverConfig { n, length: 8.0, t_end, ..Default::default() };
    let out = run(&cfg)?;
    let (a, b) = (&out.records[0], out.records.last().expect("final record"));
    let d1 = (b.hminus1_w1 - a.hminus1_w1).abs() / a.hminus1_w1;
    let d2 = (b.l2_velocity - a.l2_velocity).abs() / a.l2_velocity;
    let bkm_ok = b.bkm_integral.is_finite() && b.bkm_integral > 0.0;
    Ok(if bkm_ok { d1.max(d2).max(b.symmetry_residual_max) } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flipped(w1: &ScalarField) -> VectorField {
        let mut omega = reconstruct_vorticity_unchecked(w1);
        *omega.comp_mut(1) = omega.comp(1).scaled(-1.0);
        omega
    }

    #[test]
    fn cheap_checks_pass() {
        let ctx = Ctx { level: Level::Fast, hooks: Hooks::default() };
        assert_eq!(symmetry_algebra(&ctx).unwrap(), 0.0);
        assert!(curl_parity(&ctx).unwrap() <= 1e-12);
        assert!(reconstructed_parity(&ctx).unwrap() <= 1e-12);
        assert!(fourier_commutation(&ctx).unwrap() <= 1e-12);
        assert!(laplacian_commutation(&ctx).unwrap() <= 1e-12);
        assert!(norm_isometries(&ctx).unwrap() <= 1e-10);
        assert!(round_trip(&ctx).unwrap() <= 1e-10);
        assert!(projection(&ctx).unwrap() <= 1e-12);
        assert!(planes(&ctx).unwrap() <= 1e-9);
    }

    #[test]
    fn injected_sign_error_is_caught() {
        let ctx = Ctx { level: Level::Fast, hooks: Hooks { reconstruct_vorticity: flipped } };
        assert!(reconstructed_parity(&ctx).unwrap() > 1e-2);
    }

    #[test]
    fn check_lines_render() {
        let r = CheckResult {
            name: "x".into(),
            residual: 1e-13,
            tolerance: 1e-12,
            passed: true,
            seconds: 0.1,
            error: None,
        };
        assert!(r.line().starts_with("PASS x"));
    }
}
