//! Axisymmetric swirl-free constructions about a general axis, the rotation
//! carrying `e3` to the diagonal, relative vorticity, and the sign-condition
//! initial data.
//!
//! Conventions: a profile `phi(r, z)` about axis `v` gives the vorticity
//! `omega = -phi v x x`. For `v = sigma~` this makes
//! `omega_1 = phi (x2 - x3) / sqrt(3)`, so the relative vorticity
//! `zeta = omega_1 / (x2 - x3)` equals `phi / sqrt(3)`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::constraint::project_constraint;
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::pullback::{pullback, symmetry_residual};
use crate::spectral::{curl, leray};
use crate::symmetry::{mirror, sigma_unit, OrthogonalMap, ORTHOGONALITY_TOL};

/// Residual allowed when certifying that a field is axisymmetric.
pub const AXISYM_TOL: f64 = 1e-8;

/// Rotation angles about the axis used to sample axisymmetry. None of them
/// is a multiple of a quarter turn, so every check goes through interpolation.
pub const SAMPLE_ANGLES: [f64; 2] = [0.7, 2.3];

/// Right-handed orthonormal frame `{w, w~, v}` with axis `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisFrame {
    v: [f64; 3],
    w: [f64; 3],
    w_tilde: [f64; 3],
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

impl AxisFrame {
    pub fn new(w: [f64; 3], w_tilde: [f64; 3], v: [f64; 3]) -> Result<Self> {
        let m = Matrix3::from_columns(&[w, w_tilde, v].map(Vector3::from));
        let defect = (m.transpose() * m - Matrix3::identity()).abs().max();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::input(format!("frame is not orthonormal (defect {defect:e})")));
        }
        if (m.determinant() - 1.0).abs() > ORTHOGONALITY_TOL {
            return Err(Error::input("frame is left-handed"));
        }
        Ok(AxisFrame { v, w, w_tilde })
    }

    /// Frame about an arbitrary unit axis, completed by Gram-Schmidt.
    pub fn from_axis(v: [f64; 3]) -> Result<Self> {
        let norm = dot(v, v).sqrt();
        if (norm - 1.0).abs() > ORTHOGONALITY_TOL {
            return Err(Error::input(format!("axis must be a unit vector, |v| = {norm}")));
        }
        let pick = if v[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let d = dot(pick, v);
        let w = [pick[0] - d * v[0], pick[1] - d * v[1], pick[2] - d * v[2]];
        let wn = dot(w, w).sqrt();
        let w = w.map(|c| c / wn);
        Self::new(w, cross(v, w), v)
    }

    pub fn e3() -> Self {
        AxisFrame { v: [0.0, 0.0, 1.0], w: [1.0, 0.0, 0.0], w_tilde: [0.0, 1.0, 0.0] }
    }

    /// The columns of [`rotation_q`].
    pub fn sigma() -> Self {
        let q = rotation_q();
        let col = |c: usize| [0, 1, 2].map(|r| q.matrix()[(r, c)]);
        AxisFrame { w: col(0), w_tilde: col(1), v: col(2) }
    }

    pub fn axis(&self) -> [f64; 3] {
        self.v
    }

    pub fn w(&self) -> [f64; 3] {
        self.w
    }

    pub fn w_tilde(&self) -> [f64; 3] {
        self.w_tilde
    }

    /// Rotation by `angle` about the axis, flagged interpolating.
    pub fn rotation(&self, angle: f64) -> OrthogonalMap {
        let v = Vector3::from(self.v);
        let k = Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0);
        let r = Matrix3::identity() + angle.sin() * k + (1.0 - angle.cos()) * k * k;
        OrthogonalMap::new(r).expect("Rodrigues rotation is orthogonal").interpolating()
    }
}

/// Cylindrical coordinates of a point about a frame's axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylindrical {
    pub r: f64,
    pub z: f64,
    /// Radial unit vector, absent on the axis.
    pub e_r: Option<[f64; 3]>,
}

pub fn cylindrical_coords(x: [f64; 3], frame: &AxisFrame) -> Cylindrical {
    let v = frame.v;
    let z = dot(x, v);
    let xp = [x[0] - z * v[0], x[1] - z * v[1], x[2] - z * v[2]];
    let r = dot(xp, xp).sqrt();
    let e_r = (r > 0.0).then(|| xp.map(|c| c / r));
    Cylindrical { r, z, e_r }
}

/// A function of `(r, z)` with a label for manifests.
#[derive(Clone)]
pub struct AxisymProfile {
    label: String,
    phi: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// Whether `phi` is smooth as a function of `(r^2, z)`.
    pub smooth: bool,
}

impl fmt::Debug for AxisymProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AxisymProfile").field("label", &self.label).field("smooth", &self.smooth).finish()
    }
}

impl AxisymProfile {
    pub fn new(label: &str, phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        AxisymProfile { label: label.to_string(), phi: Arc::new(phi), smooth: true }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, r: f64, z: f64) -> f64 {
        (self.phi)(r, z)
    }

    pub fn zero() -> Self {
        Self::new("zero", |_, _| 0.0)
    }

    /// `a exp(-(r^2 + z^2) / width^2)`.
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::new("gaussian", move |r, z| amplitude * (-(r * r + z * z) / (width * width)).exp())
    }

    /// `3 z f(r^2 + z^2)`, the profile of the sign-condition data about the
    /// diagonal.
    pub fn from_envelope(env: Envelope) -> Self {
        let mut p = Self::new(env.name(), move |r, z| 3.0 * z * env.eval(r * r + z * z));
        p.smooth = true;
        p
    }

    /// `z (r^2 / w^2) exp(-(r^2 + z^2) / w^2)`, odd in `z`, which as a stream
    /// function yields a mirror-symmetric pair of rings.
    pub fn ring_pair(width: f64) -> Self {
        let w2 = width * width;
        Self::new("ring_pair", move |r, z| z * (r * r / w2) * (-(r * r + z * z) / w2).exp())
    }
}

/// Result of sampling an axisymmetric vorticity on a grid.
#[derive(Debug, Clone)]
pub struct AxisymBuild {
    pub omega: VectorField,
    /// Largest boundary sample over the largest sample of `|omega|`.
    pub boundary_ratio: f64,
    /// Set when the profile does not decay inside the box.
    pub warning: Option<String>,
}

/// Boundary decay threshold for profile samples.
pub const DECAY_TOL: f64 = 1e-6;

fn boundary_ratio(u: &VectorField) -> f64 {
    let g = u.grid();
    let n = g.n();
    let mut edge = 0.0f64;
    let mut peak = 0.0f64;
    for idx in 0..g.len() {
        let v = u.value(idx);
        let m = dot(v, v).sqrt();
        peak = peak.max(m);
        if g.unravel(idx).iter().any(|&i| i == 0 || i == n - 1) {
            edge = edge.max(m);
        }
    }
    if peak == 0.0 {
        0.0
    } else {
        edge / peak
    }
}

/// Samples `omega = -phi(r, z) v x x` and removes the small divergence left
/// by the periodic truncation.
pub fn build_axisym_vorticity(grid: Grid, profile: &AxisymProfile, frame: &AxisFrame) -> AxisymBuild {
    let v = frame.v;
    let raw = VectorField::from_fn(grid, |x| {
        let c = cylindrical_coords(x, frame);
        let p = profile.eval(c.r, c.z);
        cross(v, x).map(|t| -p * t)
    });
    let ratio = boundary_ratio(&raw);
    let warning = (ratio > DECAY_TOL).then(|| {
        format!("profile '{}' does not decay inside the box (boundary ratio {ratio:e})", profile.label)
    });
    AxisymBuild { omega: leray(&raw), boundary_ratio: ratio, warning }
}

/// Swirl-free velocity `curl(g(r, z) v x x)`, axisymmetric about `v` and
/// divergence-free by construction.
pub fn stream_velocity(grid: Grid, g: &AxisymProfile, frame: &AxisFrame) -> VectorField {
    let v = frame.v;
    let a = VectorField::from_fn(grid, |x| {
        let c = cylindrical_coords(x, frame);
        let s = g.eval(c.r, c.z);
        cross(v, x).map(|t| s * t)
    });
    curl(&a)
}

/// The rotation with columns `(1, -1, 0)/sqrt2`, `(1, 1, -2)/sqrt6` and
/// `(1, 1, 1)/sqrt3`, taking `e3` to `sigma~`.
pub fn rotation_q() -> OrthogonalMap {
    let a = FRAC_1_SQRT_2;
    let b = 1.0 / 6f64.sqrt();
    let c = 1.0 / 3f64.sqrt();
    let m = Matrix3::new(a, b, c, -a, b, c, 0.0, -2.0 * b, c);
    OrthogonalMap::new(m).expect("rotation Q is orthogonal").interpolating()
}

/// Largest relative residual of `u` under the sampled rotations about the
/// frame axis, together with the relative azimuthal component.
pub fn axisymmetry_residual(u: &VectorField, frame: &AxisFrame) -> Result<f64> {
    let mut worst = 0.0f64;
    for &angle in &SAMPLE_ANGLES {
        worst = worst.max(symmetry_residual(u, &frame.rotation(angle), 1.0)?);
    }
    Ok(worst.max(swirl(u, frame)))
}

/// `max |u . e_theta| / max |u|`.
fn swirl(u: &VectorField, frame: &AxisFrame) -> f64 {
    let g = u.grid();
    let peak = u.norm_linf();
    if peak == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for idx in 0..g.len() {
        let x = g.point(idx);
        let t = cross(frame.v, x);
        let r = dot(t, t).sqrt();
        if r > 0.0 {
            worst = worst.max(dot(u.value(idx), t).abs() / r);
        }
    }
    worst / peak
}

/// `u^Q` for a velocity that is axisymmetric and swirl-free about `e3`.
pub fn rotate_axisym(u: &VectorField) -> Result<VectorField> {
    let res = axisymmetry_residual(u, &AxisFrame::e3())?;
    if res > AXISYM_TOL {
        return Err(Error::input(format!(
            "input is not axisymmetric swirl-free about e3 (residual {res:e})"
        )));
    }
    pullback(u, &rotation_q())
}

/// Relative vorticity `w1 / (x2 - x3)` with its validity mask.
#[derive(Debug, Clone)]
pub struct Zeta {
    /// Zero at masked nodes.
    pub values: ScalarField,
    /// True where `|x2 - x3| >= epsilon`.
    pub mask: Vec<bool>,
    pub epsilon: f64,
}

pub fn zeta(w1: &ScalarField, epsilon: f64) -> Result<Zeta> {
    if !(epsilon > 0.0) {
        return Err(Error::input("zeta needs a positive epsilon"));
    }
    let g = *w1.grid();
    let mask: Vec<bool> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            (x[1] - x[2]).abs() >= epsilon
        })
        .collect();
    let samples = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            if mask[i] {
                w1.value(i) / (x[1] - x[2])
            } else {
                0.0
            }
        })
        .collect();
    Ok(Zeta { values: ScalarField::new(g, samples)?, mask, epsilon })
}

/// [`zeta`] with the default slab half-width of two grid spacings.
pub fn zeta_default(w1: &ScalarField) -> Zeta {
    zeta(w1, 2.0 * w1.grid().spacing()).expect("grid spacing is positive")
}

/// Nonnegative radial envelope `f(|x|^2)` of the sign-condition data.
#[derive(Clone)]
pub enum Envelope {
    /// `a exp(-s / w^2)`.
    Gaussian { amplitude: f64, width: f64 },
    /// `a t^p exp(-p (t - 1))` with `t = s / R^2` and `p = max(1, round(R^2 / 2w^2))`,
    /// a shell peaking at `|x| = R` with radial width about `w`.
    Ring { amplitude: f64, radius: f64, width: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Envelope {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Envelope::Gaussian { amplitude, width } => amplitude * (-s / (width * width)).exp(),
            Envelope::Ring { amplitude, radius, width } => {
                let p = (radius * radius / (2.0 * width * width)).round().max(1.0) as i32;
                let t = s / (radius * radius);
                amplitude * t.powi(p) * (-f64::from(p) * (t - 1.0)).exp()
            }
            Envelope::Custom(f) => f(s),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Envelope::Gaussian { .. } => "gaussian",
            Envelope::Ring { .. } => "ring",
            Envelope::Custom(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Ring,
    Perturbed,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Family::Gaussian),
            "ring" => Ok(Family::Ring),
            "perturbed" => Ok(Family::Perturbed),
            _ => Err(Error::input(format!("unknown family '{s}' (gaussian, ring, perturbed)"))),
        }
    }
}

/// Parameters of the sign-condition families. Unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyParams {
    pub amplitude: f64,
    pub width: f64,
    /// Shell radius of the ring family.
    pub radius: f64,
    /// Relative size of the non-axisymmetric part of the perturbed family.
    pub perturbation: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams { amplitude: 1.0, width: 1.0, radius: 1.0, perturbation: 0.3 }
    }
}

impl FamilyParams {
    pub fn envelope(&self, family: Family) -> Envelope {
        match family {
            Family::Ring => Envelope::Ring { amplitude: self.amplitude, radius: self.radius, width: self.width },
            _ => Envelope::Gaussian { amplitude: self.amplitude, width: self.width },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.amplitude) || !ok(self.width) || !ok(self.radius) {
            return Err(Error::input("amplitude, width and radius must be positive"));
        }
        if !self.perturbation.is_finite() || self.perturbation < 0.0 {
            return Err(Error::input("perturbation must be nonnegative"));
        }
        Ok(())
    }
}

/// `(sigma . x)(x2 - x3) f(|x|^2)`, rejecting envelopes that go negative on
/// the grid.
pub fn sign_condition_field(grid: Grid, env: &Envelope) -> Result<ScalarField> {
    let mut bad = None;
    let samples: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.point(i);
            let f = env.eval(dot(x, x));
            if !(f >= 0.0) && bad.is_none() {
                bad = Some((x, f));
            }
            (x[0] + x[1] + x[2]) * (x[1] - x[2]) * f
        })
        .collect();
    if let Some((x, f)) = bad {
        return Err(Error::input(format!(
            "envelope is negative or non-finite ({f}) at {x:?}, violating the sign condition"
        )));
    }
    ScalarField::new(grid, samples)
}

/// Sign-condition initial data, projected onto the constraint space.
///
/// The gaussian and ring families are axisymmetric about the diagonal and
/// already satisfy the constraint up to periodic truncation. The perturbed
/// family adds `eps a x1 (x2 - x3) exp(-|x - c|^2 / w^2)` with
/// `c = (w/2, 0, 0)`, odd under the 2-3 swap but not axisymmetric.
pub fn sign_condition_data(grid: Grid, family: Family, params: &FamilyParams) -> Result<ScalarField> {
    params.validate()?;
    let base = sign_condition_field(grid, &params.envelope(family))?;
    let f = match family {
        Family::Gaussian | Family::Ring => base,
        Family::Perturbed => {
            let (a, w, eps) = (params.amplitude, params.width, params.perturbation);
            let c = 0.5 * w;
            let bump = ScalarField::from_fn(grid, |x| {
                let d2 = (x[0] - c).powi(2) + x[1] * x[1] + x[2] * x[2];
                eps * a * x[0] * (x[1] - x[2]) * (-d2 / (w * w)).exp()
            });
            base.add(&bump)
        }
    };
    Ok(project_constraint(&f))
}

/// Residual of sigma-mirror symmetry of `u` and of the matching vorticity
/// anti-symmetry `omega = -omega^M`.
pub fn sigma_mirror_residuals(u: &VectorField) -> Result<(f64, f64)> {
    let m = mirror(sigma_unit())?.to_map();
    let ru = symmetry_residual(u, &m, 1.0)?;
    let rw = symmetry_residual(&curl(u), &m, -1.0)?;
    Ok((ru, rw))
}

/// Residuals of the identities satisfied on the symmetry planes and on the
/// diagonal axis by a permutation-symmetric velocity, each relative to the
/// field's maximum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PlaneResiduals {
    /// `u_a = u_b` on `x_a = x_b`.
    pub velocity: f64,
    /// The vorticity component normal to the pair vanishes, e.g. `omega_3 = 0`
    /// on `x1 = x2` and `omega_1 = 0` on `x2 = x3`.
    pub vorticity: f64,
    /// `omega = 0` and `u` parallel to `sigma` on `x1 = x2 = x3`.
    pub axis: f64,
}

impl PlaneResiduals {
    pub fn max(&self) -> f64 {
        self.velocity.max(self.vorticity).max(self.axis)
    }
}

pub fn plane_residuals(u: &VectorField) -> PlaneResiduals {
    let omega = curl(u);
    let g = u.grid();
    let (us, ws) = (u.norm_linf().max(1e-300), omega.norm_linf().max(1e-300));
    // (a, b, component that flips sign under the swap of a and b)
    const PAIRS: [(usize, usize, usize); 3] = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
    let mut out = PlaneResiduals::default();
    for idx in 0..g.len() {
        let ijk = g.unravel(idx);
        let uv = u.value(idx);
        let wv = omega.value(idx);
        for &(a, b, c) in &PAIRS {
            if ijk[a] == ijk[b] {
                out.velocity = out.velocity.max((uv[a] - uv[b]).abs() / us);
                out.vorticity = out.vorticity.max(wv[c].abs() / ws);
            }
        }
        if ijk[0] == ijk[1] && ijk[1] == ijk[2] {
            let wmax = wv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let spread = (uv[0] - uv[1]).abs().max((uv[1] - uv[2]).abs());
            out.axis = out.axis.max(wmax / ws).max(spread / us);
        }
    }
    out
}

/// Transport residual of the relative vorticity for a flow axisymmetric
/// about the diagonal.
///
/// With `w1 = zeta (x2 - x3)` the transport of `zeta` is equivalent to
/// `d_t w1 + u . grad w1 - zeta (u2 - u3) = 0`. Given the time derivative of
/// `w1` along a trajectory, this returns the largest value of
/// `|d_t w1 + u . grad w1 - zeta (u2 - u3)| / |x2 - x3|` over nodes with
/// `|x|_inf <= L/4` and `|x2 - x3| >= epsilon`, divided by
/// `max |zeta| * max |u|` over the same nodes.
pub fn zeta_transport_residual(
    w1: &ScalarField,
    dw1_dt: &ScalarField,
    u: &VectorField,
    epsilon: f64,
) -> Result<f64> {
    let g = *w1.grid();
    let grad = crate::spectral::gradient(w1);
    let z = zeta(w1, epsilon)?;
    let quarter = g.length() / 4.0;
    let mut num = 0.0f64;
    let (mut zmax, mut umax) = (0.0f64, 0.0f64);
    for idx in 0..g.len() {
        let x = g.point(idx);
        if !z.mask[idx] || x.iter().any(|c| c.abs() > quarter) {
            continue;
        }
        let uv = u.value(idx);
        let zv = z.values.value(idx);
        let adv = dot(uv, grad.value(idx));
        let r = dw1_dt.value(idx) + adv - zv * (uv[1] - uv[2]);
        num = num.max(r.abs() / (x[1] - x[2]).abs());
        zmax = zmax.max(zv.abs());
        umax = umax.max(dot(uv, uv).sqrt());
    }
    let scale = zmax * umax;
    Ok(if scale == 0.0 { 0.0 } else { num / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biot_savart::velocity_from_w1;
    use crate::constraint::constraint_residual;
    use crate::lambda::lambda_spectral;
    use crate::pullback::permutation_residual_max;
    use crate::spectral::divergence;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rotation_q_is_exact() {
        let q = rotation_q();
        let m = q.matrix();
        assert!((m.transpose() * m - Matrix3::identity()).abs().max() <= 1e-15);
        assert!((m.determinant() - 1.0).abs() <= 1e-15);
        let e3 = q.apply([0.0, 0.0, 1.0]);
        let s = sigma_unit();
        for a in 0..3 {
            assert!((e3[a] - s[a]).abs() <= 1e-15);
        }
        assert!(q.is_interpolating());
    }

    #[test]
    fn frames() {
        let s = AxisFrame::sigma();
        assert_eq!(s.axis(), rotation_q().apply([0.0, 0.0, 1.0]));
        let c = cross(s.w(), s.w_tilde());
        for a in 0..3 {
            assert!((c[a] - s.axis()[a]).abs() < 1e-15);
        }
        assert!(AxisFrame::new([0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]).is_err());
        assert!(AxisFrame::from_axis([1.0, 1.0, 0.0]).is_err());
        let f = AxisFrame::from_axis([0.6, 0.0, 0.8]).unwrap();
        assert_eq!(f.axis(), [0.6, 0.0, 0.8]);
    }

    #[test]
    fn cylindrical_examples() {
        let c = cylindrical_coords([1.0, 1.0, 1.0], &AxisFrame::sigma());
        assert!(c.r < 1e-15 && (c.z - 3f64.sqrt()).abs() < 1e-15);
        let c = cylindrical_coords([1.0, 0.0, 0.0], &AxisFrame::e3());
        assert_eq!((c.r, c.z, c.e_r), (1.0, 0.0, Some([1.0, 0.0, 0.0])));
        assert!(cylindrical_coords([0.0, 0.0, 2.0], &AxisFrame::e3()).e_r.is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = AxisFrame::sigma();
        for _ in 0..100 {
            let x = [0, 1, 2].map(|_| rng.gen_range(-3.0..3.0));
            let c = cylindrical_coords(x, &frame);
            assert!((c.r * c.r + c.z * c.z - dot(x, x)).abs() < 1e-12);
            if let Some(e) = c.e_r {
                for a in 0..3 {
                    assert!((c.r * e[a] + c.z * frame.axis()[a] - x[a]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_profile_gives_zero_vorticity() {
        let g = Grid::new(8, 4.0).unwrap();
        let b = build_axisym_vorticity(g, &AxisymProfile::zero(), &AxisFrame::e3());
        assert_eq!(b.omega.norm_linf(), 0.0);
        assert!(b.warning.is_none());
        let wide = build_axisym_vorticity(g, &AxisymProfile::gaussian(1.0, 10.0), &AxisFrame::e3());
        assert!(wide.warning.is_some());
    }

    #[test]
    fn sigma_build_matches_sign_condition_family() {
        let g = Grid::new(48, 12.0).unwrap();
        let env = Envelope::Gaussian { amplitude: 1.0, width: 1.0 };
        let b = build_axisym_vorticity(g, &AxisymProfile::from_envelope(env.clone()), &AxisFrame::sigma());
        let direct = sign_condition_field(g, &env).unwrap();
        let w1 = b.omega.comp(0);
        assert!(w1.sub(&direct).norm_linf() < 1e-10 * direct.norm_linf());
        assert!(divergence(&b.omega).norm_l2() < 1e-10 * b.omega.norm_l2());
        let u = crate::biot_savart::velocity_from_vorticity(&b.omega);
        assert!(permutation_residual_max(&u) < 1e-12);
    }

    #[test]
    fn zeta_recovers_profile() {
        let g = Grid::new(48, 12.0).unwrap();
        let env = Envelope::Gaussian { amplitude: 1.0, width: 1.2 };
        let profile = AxisymProfile::from_envelope(env);
        let b = build_axisym_vorticity(g, &profile, &AxisFrame::sigma());
        let z = zeta_default(b.omega.comp(0));
        let frame = AxisFrame::sigma();
        let mut worst = 0.0f64;
        for idx in 0..g.len() {
            let x = g.point(idx);
            assert_eq!(z.mask[idx], (x[1] - x[2]).abs() >= 2.0 * g.spacing());
            if z.mask[idx] {
                let c = cylindrical_coords(x, &frame);
                let want = profile.eval(c.r, c.z) / 3f64.sqrt();
                worst = worst.max((z.values.value(idx) - want).abs());
            } else {
                assert_eq!(z.values.value(idx), 0.0);
            }
        }
        assert!(worst < 1e-8, "{worst}");
        let zero = zeta_default(&ScalarField::zeros(g));
        assert_eq!(zero.values.norm_linf(), 0.0);
        assert!(zeta(&ScalarField::zeros(g), 0.0).is_err());
    }

    #[test]
    fn stream_velocity_is_solenoidal_and_axisymmetric() {
        let g = Grid::new(48, 8.0).unwrap();
        let u = stream_velocity(g, &AxisymProfile::ring_pair(0.75), &AxisFrame::e3());
        assert!(divergence(&u).norm_l2() < 1e-12 * u.norm_l2());
        assert!(axisymmetry_residual(&u, &AxisFrame::e3()).unwrap() < 1e-8);
    }

    #[test]
    fn rotated_rings_are_symmetric() {
        let g = Grid::new(48, 8.0).unwrap();
        let u = stream_velocity(g, &AxisymProfile::ring_pair(0.75), &AxisFrame::e3());
        let v = rotate_axisym(&u).unwrap();
        assert!(permutation_residual_max(&v) <= 1e-8);
        let (rm, rw) = sigma_mirror_residuals(&v).unwrap();
        assert!(rm <= 1e-8 && rw <= 1e-8, "{rm} {rw}");
        assert!((v.norm_l2() - u.norm_l2()).abs() <= 1e-12 * u.norm_l2());
        assert!(axisymmetry_residual(&v, &AxisFrame::sigma()).unwrap() < 1e-8);
        let skew = u.add(&VectorField::from_fn(g, |x| {
            let b = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
            [0.0, 0.0, x[0] * b]
        }));
        assert!(rotate_axisym(&skew).is_err());
    }

    #[test]
    fn families() {
        let g = Grid::new(48, 12.0).unwrap();
        let p = FamilyParams::default();
        let gauss = sign_condition_data(g, Family::Gaussian, &p).unwrap();
        for idx in 0..g.len() {
            let x = g.point(idx);
            let s = (x[0] + x[1] + x[2]) * (x[1] - x[2]);
            let v = gauss.value(idx);
            assert!(v * s >= 0.0 || v.abs() < 1e-12 * gauss.norm_linf());
        }
        assert!(lambda_spectral(&gauss) > 0.0);
        let ring = sign_condition_data(g, Family::Ring, &p).unwrap();
        assert!(lambda_spectral(&ring) > 0.0);
        let pert = sign_condition_data(g, Family::Perturbed, &p).unwrap();
        assert!(constraint_residual(&pert).max() <= 1e-12);
        assert!(lambda_spectral(&pert) > 0.0);
        let omega = crate::constraint::reconstruct_vorticity_unchecked(&pert);
        assert!(axisymmetry_residual(&omega, &AxisFrame::sigma()).unwrap() > 1e-3);
        let neg = Envelope::Custom(Arc::new(|s| 1.0 - s));
        assert!(sign_condition_field(g, &neg).is_err());
        assert!(sign_condition_data(g, Family::Gaussian, &FamilyParams { width: -1.0, ..p }).is_err());
        assert!("vortex".parse::<Family>().is_err());
    }

    #[test]
    fn plane_identities_for_symmetric_velocity() {
        let g = Grid::new(32, 8.0).unwrap();
        let w1 = sign_condition_data(g, Family::Perturbed, &FamilyParams::default()).unwrap();
        let u = velocity_from_w1(&w1).unwrap();
        assert!(plane_residuals(&u).max() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = crate::random::random_vector(g, 3, &mut rng);
        assert!(plane_residuals(&r).max() > 1e-2);
    }
}
