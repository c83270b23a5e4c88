//! Pseudo-spectral RK4 integration of the single-component vorticity
//! equation and of the full vorticity equation.
//!
//! Nonlinear terms are formed pointwise from spectrally differentiated
//! samples and then transformed back. With dealiasing on, inputs are kept in
//! the resolved band so every product is alias-free and the scheme is a
//! Galerkin truncation. Constraint drift is measured, never silently
//! corrected; `reproject_every` opts into periodic projection.

use std::path::PathBuf;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::axisym::{sign_condition_data, zeta_transport_residual, Family, FamilyParams};
use crate::biot_savart::{velocity_from_vorticity, velocity_from_w1_unchecked};
use crate::constraint::{
    constraint_residual, project_constraint, reconstruct_vorticity_unchecked, require_member, MEMBERSHIP_TOL,
};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::lambda::lambda_spectral;
use crate::pullback::permutation_residual_max;
use crate::snapshot::read_scalar;
use crate::spectral::{
    dealias_coeffs, derivative_coeffs, derivative_wavenumbers, divergence, sobolev_norm, NormKind, NormSpec,
};

/// Relative divergence accepted by [`rhs_full`].
pub const DIVERGENCE_TOL: f64 = 1e-8;

/// Step sizes below this count as a collapse of the CFL condition.
pub const MIN_DT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    SingleComponent,
    FullVorticity,
    Both,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single_component" | "single" => Ok(Mode::SingleComponent),
            "full_vorticity" | "full" => Ok(Mode::FullVorticity),
            "both" => Ok(Mode::Both),
            _ => Err(Error::config(format!("unknown mode '{s}' (single_component, full_vorticity, both)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitialFamily {
    #[default]
    Gaussian,
    Ring,
    Perturbed,
    Zero,
}

impl InitialFamily {
    fn family(self) -> Option<Family> {
        match self {
            InitialFamily::Gaussian => Some(Family::Gaussian),
            InitialFamily::Ring => Some(Family::Ring),
            InitialFamily::Perturbed => Some(Family::Perturbed),
            InitialFamily::Zero => None,
        }
    }
}

impl std::str::FromStr for InitialFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitialFamily::Zero),
            other => Ok(match other.parse::<Family>().map_err(|e| Error::config(e.to_string()))? {
                Family::Gaussian => InitialFamily::Gaussian,
                Family::Ring => InitialFamily::Ring,
                Family::Perturbed => InitialFamily::Perturbed,
            }),
        }
    }
}

/// Initial data: a named family or a `w1` snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct InitialConfig {
    pub family: InitialFamily,
    #[serde(flatten)]
    pub params: FamilyParams,
    /// When set, `w1` is read from this snapshot instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

/// Run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub t_end: f64,
    /// Fixed step; when absent the step is `cfl * h / max|u|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub cfl: f64,
    pub dealias: bool,
    /// Steps between diagnostics records.
    pub diagnostics_every: usize,
    /// Steps between trajectory snapshots; 0 keeps only the final state.
    pub snapshot_every: usize,
    /// Steps between constraint projections; 0 disables them.
    pub reproject_every: usize,
    pub mode: Mode,
    pub initial: InitialConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n: 32,
            length: 8.0,
            t_end: 1.0,
            dt: None,
            cfl: 0.5,
            dealias: true,
            diagnostics_every: 1,
            snapshot_every: 0,
            reproject_every: 0,
            mode: Mode::SingleComponent,
            initial: InitialConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: SolverConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::config("t_end must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::config("dt must be positive"));
            }
        } else if !(self.cfl.is_finite() && self.cfl > 0.0) {
            return Err(Error::config("cfl must be positive"));
        }
        if self.diagnostics_every == 0 {
            return Err(Error::config("diagnostics_every must be at least 1"));
        }
        Ok(())
    }

    /// Initial `w1` on the configured grid, dealiased when dealiasing is on.
    pub fn initial_w1(&self) -> Result<ScalarField> {
        let grid = self.grid()?;
        let w1 = if let Some(path) = &self.initial.file {
            let (_, f) = read_scalar(path)?;
            if f.grid() != &grid {
                return Err(Error::config(format!("{} does not match the configured grid", path.display())));
            }
            f
        } else {
            match self.initial.family.family() {
                None => ScalarField::zeros(grid),
                Some(fam) => sign_condition_data(grid, fam, &self.initial.params)
                    .map_err(|e| Error::config(e.to_string()))?,
            }
        };
        Ok(if self.dealias { dealias_keep_mean_zero(&w1) } else { w1 })
    }
}

fn dealias_keep_mean_zero(f: &ScalarField) -> ScalarField {
    let mut c = f.spectral().to_vec();
    dealias_coeffs(f.grid(), &mut c);
    c[0] = Complex64::default();
    ScalarField::from_spectral(*f.grid(), c)
}

/// Time and the evolved fields of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub w1: Option<ScalarField>,
    pub omega: Option<VectorField>,
}

impl TrajectoryState {
    pub fn new(w1: ScalarField, mode: Mode) -> Self {
        let omega = (mode != Mode::SingleComponent).then(|| reconstruct_vorticity_unchecked(&w1));
        let w1 = (mode != Mode::FullVorticity).then_some(w1);
        TrajectoryState { t: 0.0, w1, omega }
    }

    /// The first vorticity component, from `w1` when it is evolved.
    pub fn first_component(&self) -> &ScalarField {
        match (&self.w1, &self.omega) {
            (Some(w1), _) => w1,
            (None, Some(omega)) => omega.comp(0),
            (None, None) => unreachable!("state holds at least one field"),
        }
    }

    pub fn velocity(&self) -> VectorField {
        match (&self.w1, &self.omega) {
            (Some(w1), _) => velocity_from_w1_unchecked(w1),
            (None, Some(omega)) => velocity_from_vorticity(omega),
            (None, None) => unreachable!("state holds at least one field"),
        }
    }

    pub fn vorticity(&self) -> VectorField {
        match (&self.w1, &self.omega) {
            (Some(w1), _) => reconstruct_vorticity_unchecked(w1),
            (None, Some(omega)) => omega.clone(),
            (None, None) => unreachable!("state holds at least one field"),
        }
    }

    fn is_finite(&self) -> bool {
        self.w1.as_ref().map_or(true, |f| f.is_finite()) && self.omega.as_ref().map_or(true, |f| f.is_finite())
    }
}

/// Samples of the three first derivatives of a field with coefficients `c`.
fn gradient_samples(grid: &Grid, c: &[Complex64]) -> Vec<Vec<f64>> {
    let d = [0, 1, 2].map(|a| derivative_coeffs(grid, c, a));
    fft::inverse_many(grid, &[&d[0], &d[1], &d[2]])
}

/// Samples of `-(u . grad) q + (omega . grad) v` for a scalar `q` and a
/// velocity component `v`, given their gradients as samples.
fn transport_term(
    grid: &Grid,
    u: &VectorField,
    omega: &VectorField,
    grad_q: &[Vec<f64>],
    grad_v: &[Vec<f64>],
) -> Vec<f64> {
    let (us, ws) = (u.comps().each_ref().map(|c| c.samples()), omega.comps().each_ref().map(|c| c.samples()));
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut r = 0.0;
            for j in 0..3 {
                r += ws[j][i] * grad_v[j][i] - us[j][i] * grad_q[j][i];
            }
            r
        })
        .collect()
}

/// Filters raw nonlinear samples: zero mean, and the resolved band only when
/// dealiasing.
fn finish(grid: &Grid, samples: Vec<f64>, dealias: bool) -> Vec<Complex64> {
    let mut c = fft::forward_real(grid, &samples);
    if dealias {
        dealias_coeffs(grid, &mut c);
    }
    c[0] = Complex64::default();
    c
}

fn finish_many(grid: &Grid, samples: [Vec<f64>; 3], dealias: bool) -> [Vec<Complex64>; 3] {
    let mut c = fft::forward_many(grid, &[&samples[0], &samples[1], &samples[2]]);
    for ci in c.iter_mut() {
        if dealias {
            dealias_coeffs(grid, ci);
        }
        ci[0] = Complex64::default();
    }
    let [a, b, d]: [Vec<Complex64>; 3] = c.try_into().expect("three components");
    [a, b, d]
}

pub(crate) fn rhs_single_unchecked(w1: &ScalarField, dealias: bool) -> ScalarField {
    let g = *w1.grid();
    let omega = reconstruct_vorticity_unchecked(w1);
    let u = velocity_from_vorticity(&omega);
    let grad_w = gradient_samples(&g, w1.spectral());
    let grad_u1 = gradient_samples(&g, u.comp(0).spectral());
    let s = transport_term(&g, &u, &omega, &grad_w, &grad_u1);
    ScalarField::from_spectral(g, finish(&g, s, dealias))
}

/// `-(u . grad) w1 + (omega . grad) u1` with `u` and `omega` rebuilt from `w1`.
pub fn rhs_single(w1: &ScalarField) -> Result<ScalarField> {
    require_member(w1, MEMBERSHIP_TOL)?;
    Ok(rhs_single_unchecked(w1, true))
}

pub(crate) fn rhs_full_unchecked(omega: &VectorField, dealias: bool) -> VectorField {
    let g = *omega.grid();
    let u = velocity_from_vorticity(omega);
    let s = [0, 1, 2].map(|i| {
        let grad_w = gradient_samples(&g, omega.comp(i).spectral());
        let grad_u = gradient_samples(&g, u.comp(i).spectral());
        transport_term(&g, &u, omega, &grad_w, &grad_u)
    });
    VectorField::from_spectra(g, finish_many(&g, s, dealias))
}

/// `||div omega|| / ||grad omega||`, both in discrete L^2.
pub fn relative_divergence(omega: &VectorField) -> f64 {
    let g = *omega.grid();
    let k = derivative_wavenumbers(&g);
    let n = g.n();
    let s = omega.spectra();
    let mut grad2 = 0.0;
    for idx in 0..g.len() {
        let k2 = k[idx % n].powi(2) + k[(idx / n) % n].powi(2) + k[idx / (n * n)].powi(2);
        grad2 += k2 * s.iter().map(|c| c[idx].norm_sqr()).sum::<f64>();
    }
    let scale = (grad2 * g.volume()).sqrt();
    if scale == 0.0 {
        0.0
    } else {
        divergence(omega).norm_l2() / scale
    }
}

/// `-(u . grad) omega + (omega . grad) u` with `u` the Biot-Savart velocity.
pub fn rhs_full(omega: &VectorField) -> Result<VectorField> {
    let div = relative_divergence(omega);
    if div > DIVERGENCE_TOL {
        return Err(Error::input(format!("vorticity is not solenoidal (relative divergence {div:e})")));
    }
    Ok(rhs_full_unchecked(omega, true))
}

/// `safety * h / max(1e-30, max|u|)`.
pub fn auto_dt(state: &TrajectoryState, safety: f64) -> f64 {
    let u = state.velocity();
    safety * u.grid().spacing() / u.norm_linf().max(1e-30)
}

fn breakdown(t: f64, what: &str) -> Error {
    Error::Breakdown { time: t, reason: format!("non-finite values in {what}") }
}

fn rk4_scalar(w: &ScalarField, dt: f64, t: f64, dealias: bool) -> Result<ScalarField> {
    let stage = |f: &ScalarField, name: &str| {
        let k = rhs_single_unchecked(f, dealias);
        if k.is_finite() {
            Ok(k)
        } else {
            Err(breakdown(t, name))
        }
    };
    let k1 = stage(w, "stage 1")?;
    let k2 = stage(&w.axpy(0.5 * dt, &k1), "stage 2")?;
    let k3 = stage(&w.axpy(0.5 * dt, &k2), "stage 3")?;
    let k4 = stage(&w.axpy(dt, &k3), "stage 4")?;
    let c: Vec<Complex64> = (0..w.grid().len())
        .map(|i| {
            w.spectral()[i]
                + (k1.spectral()[i] + 2.0 * k2.spectral()[i] + 2.0 * k3.spectral()[i] + k4.spectral()[i])
                    * (dt / 6.0)
        })
        .collect();
    Ok(ScalarField::from_spectral(*w.grid(), c))
}

fn rk4_vector(w: &VectorField, dt: f64, t: f64, dealias: bool) -> Result<VectorField> {
    let stage = |f: &VectorField, name: &str| {
        let k = rhs_full_unchecked(f, dealias);
        if k.is_finite() {
            Ok(k)
        } else {
            Err(breakdown(t, name))
        }
    };
    let k1 = stage(w, "full stage 1")?;
    let k2 = stage(&w.axpy(0.5 * dt, &k1), "full stage 2")?;
    let k3 = stage(&w.axpy(0.5 * dt, &k2), "full stage 3")?;
    let k4 = stage(&w.axpy(dt, &k3), "full stage 4")?;
    let g = *w.grid();
    let ws = w.spectra();
    let ks = [k1.spectra(), k2.spectra(), k3.spectra(), k4.spectra()];
    let out = [0, 1, 2].map(|a| {
        (0..g.len())
            .map(|i| ws[a][i] + (ks[0][a][i] + 2.0 * ks[1][a][i] + 2.0 * ks[2][a][i] + ks[3][a][i]) * (dt / 6.0))
            .collect()
    });
    Ok(VectorField::from_spectra(g, out))
}

/// One classical RK4 step of every evolved field.
pub fn step_rk4(state: &TrajectoryState, dt: f64, dealias: bool) -> Result<TrajectoryState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::input("dt must be positive"));
    }
    let w1 = state.w1.as_ref().map(|w| rk4_scalar(w, dt, state.t, dealias)).transpose()?;
    let omega = state.omega.as_ref().map(|w| rk4_vector(w, dt, state.t, dealias)).transpose()?;
    let next = TrajectoryState { t: state.t + dt, w1, omega };
    if !next.is_finite() {
        return Err(breakdown(state.t, "the updated state"));
    }
    Ok(next)
}

/// One row of the diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    /// `-du_1/dx_2` at the origin.
    pub lambda: f64,
    pub l2_velocity: f64,
    pub hminus1_w1: f64,
    pub linf_w1: f64,
    /// Trapezoid rule for the time integral of `max|w1|` over every step.
    pub bkm_integral: f64,
    pub symmetry_residual_max: f64,
    pub constraint_physical: f64,
    pub constraint_fourier: f64,
    /// `||div omega|| / ||grad omega||`.
    pub divergence_residual: f64,
    /// `||w1 - omega_1|| / ||w1||` in `both` mode.
    pub formulation_gap: Option<f64>,
}

impl DiagnosticsRecord {
    pub const HEADER: [&'static str; 13] = [
        "step",
        "t",
        "dt",
        "lambda",
        "l2_velocity",
        "hminus1_w1",
        "linf_w1",
        "bkm_integral",
        "symmetry_residual_max",
        "constraint_physical",
        "constraint_fourier",
        "divergence_residual",
        "formulation_gap",
    ];

    /// CSV header, with the gap column only in `both` mode.
    pub fn csv_header(mode: Mode) -> String {
        let n = if mode == Mode::Both { 13 } else { 12 };
        Self::HEADER[..n].join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.step.to_string(),
            format!("{:e}", self.t),
            format!("{:e}", self.dt),
            format!("{:e}", self.lambda),
            format!("{:e}", self.l2_velocity),
            format!("{:e}", self.hminus1_w1),
            format!("{:e}", self.linf_w1),
            format!("{:e}", self.bkm_integral),
            format!("{:e}", self.symmetry_residual_max),
            format!("{:e}", self.constraint_physical),
            format!("{:e}", self.constraint_fourier),
            format!("{:e}", self.divergence_residual),
        ];
        if let Some(g) = self.formulation_gap {
            cols.push(format!("{g:e}"));
        }
        cols.join(",")
    }
}

pub fn diagnostics(state: &TrajectoryState, step: usize, dt: f64, bkm: f64) -> DiagnosticsRecord {
    let w1 = state.first_component();
    let u = state.velocity();
    let omega = state.vorticity();
    let c = constraint_residual(w1);
    let formulation_gap = match (&state.w1, &state.omega) {
        (Some(a), Some(b)) => Some(a.sub(b.comp(0)).norm_l2() / a.norm_l2().max(1e-300)),
        _ => None,
    };
    DiagnosticsRecord {
        step,
        t: state.t,
        dt,
        lambda: lambda_spectral(w1) + 0.0,
        l2_velocity: u.norm_l2(),
        hminus1_w1: sobolev_norm(w1, NormSpec::new(0.0), NormKind::HdotNeg1).unwrap_or(f64::NAN),
        linf_w1: w1.norm_linf(),
        bkm_integral: bkm,
        symmetry_residual_max: permutation_residual_max(&u),
        constraint_physical: c.physical,
        constraint_fourier: c.fourier,
        divergence_residual: relative_divergence(&omega),
        formulation_gap,
    }
}

/// Receives records and snapshots while a run proceeds.
pub trait Observer {
    fn record(&mut self, _record: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
    fn snapshot(&mut self, _step: usize, _state: &TrajectoryState) -> Result<()> {
        Ok(())
    }
}

impl Observer for () {}

/// Where a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownInfo {
    pub time: f64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    /// Last finite state; the state at `t_end` unless the run broke down.
    pub final_state: TrajectoryState,
    pub steps: usize,
    pub breakdown: Option<BreakdownInfo>,
    /// Steps at which `w1` was reprojected.
    pub reprojections: Vec<usize>,
}

/// Integrates `config` from its configured initial data.
pub fn run(config: &SolverConfig) -> Result<RunOutput> {
    config.validate()?;
    let w1 = config.initial_w1()?;
    run_from(config, TrajectoryState::new(w1, config.mode), &mut ())
}

/// Integrates from a given state, reporting to `observer`. Numerical
/// breakdown ends the run early and is reported in the output.
pub fn run_from(config: &SolverConfig, initial: TrajectoryState, observer: &mut dyn Observer) -> Result<RunOutput> {
    config.validate()?;
    let mut state = initial;
    let t_end = config.t_end;
    let mut records = Vec::new();
    let mut reprojections = Vec::new();
    let mut step = 0usize;
    let mut linf_prev = state.first_component().norm_linf();
    let mut bkm = 0.0;
    let fixed_steps = config.dt.map(|dt| (t_end / dt).ceil().max(1.0) as usize);

    let first = diagnostics(&state, 0, 0.0, 0.0);
    observer.record(&first)?;
    records.push(first);
    if config.snapshot_every > 0 {
        observer.snapshot(0, &state)?;
    }

    let mut breakdown_info = None;
    while state.t < t_end && fixed_steps.map_or(true, |s| step < s) {
        let dt = match fixed_steps {
            Some(s) => t_end / s as f64,
            None => {
                let dt = auto_dt(&state, config.cfl);
                if !dt.is_finite() || dt < MIN_DT {
                    breakdown_info =
                        Some(BreakdownInfo { time: state.t, reason: format!("step size collapsed to {dt:e}") });
                    break;
                }
                // avoid a sliver of a final step
                let left = t_end - state.t;
                if dt >= left || left - dt < 1e-9 * t_end {
                    left
                } else {
                    dt
                }
            }
        };
        let mut next = match step_rk4(&state, dt, config.dealias) {
            Ok(s) => s,
            Err(Error::Breakdown { time, reason }) => {
                breakdown_info = Some(BreakdownInfo { time, reason });
                break;
            }
            Err(e) => return Err(e),
        };
        step += 1;
        if fixed_steps == Some(step) || t_end - next.t < 1e-12 * t_end {
            next.t = t_end;
        }
        if config.reproject_every > 0 && step % config.reproject_every == 0 {
            next.w1 = next.w1.map(|w| project_constraint(&w));
            reprojections.push(step);
        }
        let linf = next.first_component().norm_linf();
        bkm += 0.5 * dt * (linf + linf_prev);
        linf_prev = linf;
        state = next;
        let last = state.t >= t_end;
        if step % config.diagnostics_every == 0 || last {
            let r = diagnostics(&state, step, dt, bkm);
            observer.record(&r)?;
            records.push(r);
        }
        if config.snapshot_every > 0 && step % config.snapshot_every == 0 {
            observer.snapshot(step, &state)?;
        }
    }
    Ok(RunOutput { records, final_state: state, steps: step, breakdown: breakdown_info, reprojections })
}

/// Transport residual of the relative vorticity along a solver trajectory.
///
/// Takes four fixed RK4 steps of size `dt` from `w1`, estimates `d_t w1` at
/// the middle state with the fourth-order central difference, and returns
/// [`zeta_transport_residual`] there.
pub fn zeta_transport_on_run(w1: &ScalarField, dt: f64, epsilon: f64) -> Result<f64> {
    let mut states = vec![TrajectoryState::new(w1.clone(), Mode::SingleComponent)];
    for _ in 0..4 {
        let next = step_rk4(states.last().expect("nonempty"), dt, true)?;
        states.push(next);
    }
    let w = |i: usize| states[i].w1.as_ref().expect("single-component state");
    let dw = w(0).axpy(-8.0, w(1)).axpy(8.0, w(3)).axpy(-1.0, w(4)).scaled(1.0 / (12.0 * dt));
    zeta_transport_residual(w(2), &dw, &states[2].velocity(), epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_field, random_vector};
    use crate::spectral::{curl, gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn member(g: Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        project_constraint(&random_field(g, 3, &mut rng))
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = Grid::new(8, 2.0).unwrap();
        assert_eq!(rhs_single(&ScalarField::zeros(g)).unwrap().norm_linf(), 0.0);
        assert_eq!(rhs_full(&VectorField::zeros(g)).unwrap().norm_linf(), 0.0);
        let s = TrajectoryState::new(ScalarField::zeros(g), Mode::Both);
        let next = step_rk4(&s, 0.1, true).unwrap();
        assert_eq!(next.first_component().norm_linf(), 0.0);
    }

    #[test]
    fn single_matches_full_first_component() {
        let g = Grid::new(12, 2.0).unwrap();
        let w1 = member(g, 1);
        let a = rhs_single(&w1).unwrap();
        let b = rhs_full(&reconstruct_vorticity_unchecked(&w1)).unwrap();
        assert!(a.sub(b.comp(0)).norm_l2() <= 1e-12 * a.norm_l2());
        assert!(a.is_mean_zero());
        assert!(constraint_residual(&a).max() <= 1e-11);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(rhs_single(&random_field(g, 2, &mut rng)).is_err());
        assert!(rhs_full(&random_vector(g, 2, &mut rng)).is_err());
    }

    #[test]
    fn full_rhs_matches_finite_differences() {
        // Taylor-Green-like flow with closed-form velocity and vorticity; the
        // oracle differentiates them with fourth-order central differences.
        let u_at = |x: [f64; 3]| {
            [
                x[0].sin() * x[1].cos() * x[2].cos(),
                -x[0].cos() * x[1].sin() * x[2].cos(),
                0.3 * (x[0] + x[1]).sin(),
            ]
        };
        let w_at = |x: [f64; 3]| {
            [
                0.3 * (x[0] + x[1]).cos() - x[0].cos() * x[1].sin() * x[2].sin(),
                -x[0].sin() * x[1].cos() * x[2].sin() - 0.3 * (x[0] + x[1]).cos(),
                2.0 * x[0].sin() * x[1].sin() * x[2].cos(),
            ]
        };
        let g = Grid::new(16, 2.0 * std::f64::consts::PI).unwrap();
        let omega = VectorField::from_fn(g, w_at);
        assert!(curl(&VectorField::from_fn(g, u_at)).sub(&omega).norm_linf() < 1e-12);
        let r = rhs_full(&omega).unwrap();
        let h = 1e-3;
        let d = |f: &dyn Fn([f64; 3]) -> [f64; 3], x: [f64; 3], j: usize| {
            let at = |s: f64| {
                let mut y = x;
                y[j] += s * h;
                f(y)
            };
            let (p2, p1, m1, m2) = (at(2.0), at(1.0), at(-1.0), at(-2.0));
            [0, 1, 2].map(|i| (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h))
        };
        let mut worst = 0.0f64;
        for idx in (0..g.len()).step_by(5) {
            let x = g.point(idx);
            let (uv, wv) = (u_at(x), w_at(x));
            let du = [0, 1, 2].map(|j| d(&u_at, x, j));
            let dw = [0, 1, 2].map(|j| d(&w_at, x, j));
            for i in 0..3 {
                let want: f64 = (0..3).map(|j| wv[j] * du[j][i] - uv[j] * dw[j][i]).sum();
                worst = worst.max((want - r.comp(i).value(idx)).abs());
            }
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn antisymmetric_vorticity_keeps_its_relations() {
        let g = Grid::new(12, 2.0).unwrap();
        let w1 = member(g, 3);
        let omega = reconstruct_vorticity_unchecked(&w1);
        let r = rhs_full(&omega).unwrap();
        for name in ["P12", "P13"] {
            let q = crate::symmetry::permutation(name).unwrap().to_map();
            let res = crate::pullback::symmetry_residual(&r, &q, -1.0).unwrap();
            assert!(res <= 1e-11, "{name} {res}");
        }
    }

    #[test]
    fn one_step_is_first_order_consistent() {
        let g = Grid::new(12, 2.0).unwrap();
        let w1 = dealias_keep_mean_zero(&member(g, 4));
        let k = rhs_single(&w1).unwrap();
        let s = TrajectoryState::new(w1.clone(), Mode::SingleComponent);
        let e = |dt: f64| {
            let next = step_rk4(&s, dt, true).unwrap();
            next.w1.unwrap().sub(&w1.axpy(dt, &k)).norm_l2()
        };
        let (a, b) = (e(1e-3), e(5e-4));
        assert!((a / b).log2() > 1.8, "{a} {b}");
    }

    #[test]
    fn zero_run_has_zero_diagnostics() {
        let cfg = SolverConfig {
            n: 8,
            length: 2.0,
            t_end: 0.5,
            dt: Some(0.1),
            initial: InitialConfig { family: InitialFamily::Zero, ..Default::default() },
            ..Default::default()
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.steps, 5);
        assert!(out.breakdown.is_none());
        for r in &out.records {
            assert_eq!((r.l2_velocity, r.hminus1_w1, r.linf_w1, r.bkm_integral, r.lambda), (0.0, 0.0, 0.0, 0.0, 0.0));
        }
        assert_eq!(out.final_state.t, 0.5);
    }

    #[test]
    fn nan_is_reported_as_breakdown() {
        let g = Grid::new(8, 2.0).unwrap();
        let mut w1 = member(g, 5);
        w1.samples_mut()[3] = f64::NAN;
        let s = TrajectoryState { t: 0.0, w1: Some(w1), omega: None };
        assert!(matches!(step_rk4(&s, 0.1, true), Err(Error::Breakdown { .. })));
    }

    #[test]
    fn config_round_trip_and_validation() {
        let text = "n = 16\nL = 4.0\nt_end = 0.5\ncfl = 0.4\nmode = \"both\"\n[initial]\nfamily = \"ring\"\nradius = 1.2\n";
        let c = SolverConfig::from_toml(text).unwrap();
        assert_eq!(c.mode, Mode::Both);
        assert_eq!(c.initial.family, InitialFamily::Ring);
        assert_eq!(c.initial.params.radius, 1.2);
        assert_eq!(SolverConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(SolverConfig::from_toml("n = 15").is_err());
        assert!(SolverConfig::from_toml("t_end = -1.0").is_err());
        assert!(SolverConfig::from_toml("bogus = 1").is_err());
        assert!(matches!(SolverConfig::from_toml("n = 15"), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn gradient_helper_matches_spectral_gradient() {
        let g = Grid::new(8, 2.0).unwrap();
        let f = member(g, 6);
        let a = gradient_samples(&g, f.spectral());
        let b = gradient(&f);
        for i in 0..3 {
            assert_eq!(a[i].as_slice(), b.comp(i).samples());
        }
    }
}
