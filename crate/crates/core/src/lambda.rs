//! The scalar lambda fixing the velocity gradient at the origin, computed by
//! quadrature of its singular integral formulas and by spectral
//! differentiation, together with the strain eigenstructure.
//!
//! Each quadrature integrates the even kernel
//! `k_b(x) = (3/8pi)(s.x)(b.x)/|x|^5`, `s = (1,1,1)`, against a vorticity
//! component. The punctured trapezoid rule for that integrand has an error
//! expansion in even powers of the step, so sums at steps `h, 2h, 4h` on a
//! spectrally refined grid are combined to cancel the `h^2` and `h^4` terms.
//! The spectral value belongs to the periodic box, so the quadratures add
//! the smooth difference between the periodic and free-space kernels,
//! evaluated by Ewald summation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erf, erfc};

use crate::biot_savart::{gradient_at_origin, velocity_from_vorticity};
use crate::constraint::{reconstruct_vorticity_unchecked, require_member, MEMBERSHIP_TOL};
use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::spectral::refine;
use crate::symmetry::sigma_unit;

/// The directions `e2 - e3`, `e3 - e1`, `e1 - e2` paired with the three
/// vorticity components.
pub const DIRECTIONS: [[f64; 3]; 3] = [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]];

const SIGMA: [f64; 3] = [1.0, 1.0, 1.0];

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Free-space kernel `(3/8pi)(s.x)(b.x)/|x|^5`.
pub fn lambda_kernel(b: [f64; 3], x: [f64; 3]) -> f64 {
    let r2 = dot(x, x);
    if r2 == 0.0 {
        return 0.0;
    }
    3.0 / (8.0 * PI) * dot(SIGMA, x) * dot(b, x) / (r2 * r2 * r2.sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StrainReport {
    pub lambda_w1: f64,
    pub lambda_w2: f64,
    pub lambda_w3: f64,
    pub lambda_omega: f64,
    /// `-du_1/dx_2` at the origin from the spectral velocity.
    pub lambda_spectral: f64,
    /// The vorticity-form quadrature without the periodic-image correction,
    /// i.e. the free-space integral over the box.
    pub lambda_free_space: f64,
    pub grad_origin: [[f64; 3]; 3],
    pub strain_origin: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
    pub axis_alignment: f64,
}

impl StrainReport {
    /// The four quadrature values and the spectral value.
    pub fn lambdas(&self) -> [f64; 5] {
        [
            self.lambda_w1,
            self.lambda_w2,
            self.lambda_w3,
            self.lambda_omega,
            self.lambda_spectral,
        ]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Settings for the quadratures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaOptions {
    /// Spectral refinement factor; `None` picks `max(2, ceil(128 / n))`.
    pub refine: Option<usize>,
    /// Add the periodic-image correction.
    pub periodic: bool,
}

impl Default for LambdaOptions {
    fn default() -> Self {
        LambdaOptions {
            refine: None,
            periodic: true,
        }
    }
}

fn refine_factor(grid: &Grid, opts: &LambdaOptions) -> usize {
    opts.refine.unwrap_or_else(|| 2usize.max(128usize.div_ceil(grid.n())))
}

/// Richardson-extrapolated punctured trapezoid sum of `k_b f` over the box.
fn punctured_sum(f: &ScalarField, b: [f64; 3]) -> f64 {
    let g = *f.grid();
    let n = g.n();
    let c = n / 2;
    let h = g.spacing();
    let s = f.samples();
    let sums = [1usize, 2, 4].map(|step| {
        let total: f64 = (0..n)
            .into_par_iter()
            .filter(|k| (k + n - c) % step == 0)
            .map(|k| {
                let mut acc = 0.0;
                for j in (0..n).filter(|j| (j + n - c) % step == 0) {
                    for i in (0..n).filter(|i| (i + n - c) % step == 0) {
                        let idx = g.index(i, j, k);
                        acc += lambda_kernel(b, g.point(idx)) * s[idx];
                    }
                }
                acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        total * (step as f64 * h).powi(3)
    });
    (64.0 * sums[0] - 20.0 * sums[1] + sums[2]) / 45.0
}

/// Second derivative `(s.z)(b.z)(phi'' - phi'/r)/r^2` of a radial function
/// given `phi'' - phi'/r` divided by `r^2`.
fn radial_hessian_term(z: [f64; 3], b: [f64; 3], q: f64) -> f64 {
    dot(SIGMA, z) * dot(b, z) * q
}

/// `(phi'' - phi'/r)/r^2` for `phi = E(alpha r)/(4 pi r)` with
/// `E = erfc` (images) or `E = -erf` (the singular cell).
fn ewald_radial(r: f64, alpha: f64, singular_cell: bool) -> f64 {
    let c = 2.0 * alpha / PI.sqrt();
    if singular_cell && alpha * r < 0.5 {
        // -erf(a r)/(4 pi r) = sum_n a_n r^(2n); the operator maps r^(2n)
        // to 4 n (n - 1) r^(2n - 4)
        let mut total = 0.0;
        let mut fact = 1.0;
        for nn in 0..16usize {
            if nn > 0 {
                fact *= nn as f64;
            }
            if nn < 2 {
                continue;
            }
            let sign = if nn % 2 == 0 { 1.0 } else { -1.0 };
            let a_n = -c * sign * alpha.powi(2 * nn as i32) / (fact * (2 * nn + 1) as f64) / (4.0 * PI);
            total += 4.0 * (nn * (nn - 1)) as f64 * a_n * r.powi(2 * nn as i32 - 4);
        }
        return total;
    }
    let e = if singular_cell { -erf(alpha * r) } else { erfc(alpha * r) };
    let gauss = (-alpha * alpha * r * r).exp();
    let r2 = r * r;
    let q = 2.0 * c * alpha * alpha * gauss + 3.0 * c * gauss / r2 + 3.0 * e / (r2 * r);
    q / (4.0 * PI) / r2
}

/// `(1/2)(s.grad)(b.grad)[G_per - G_free]` at every node of `grid`.
fn periodic_correction(grid: &Grid, b: [f64; 3]) -> Vec<f64> {
    let l = grid.length();
    let alpha = 4.0 / l;
    let images: Vec<[f64; 3]> = (-1..=1)
        .flat_map(|i| (-1..=1).flat_map(move |j| (-1..=1).map(move |k| [i, j, k])))
        .map(|m: [i32; 3]| m.map(|v| f64::from(v) * l))
        .collect();

    let real: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let x = grid.point(idx);
            let mut total = 0.0;
            for shift in &images {
                let z = [x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]];
                let r = dot(z, z).sqrt();
                let central = shift.iter().all(|&v| v == 0.0);
                if central && r == 0.0 {
                    continue;
                }
                total += radial_hessian_term(z, b, ewald_radial(r, alpha, central));
            }
            0.5 * total
        })
        .collect();

    // reciprocal part: coefficients -(s.k)(b.k) exp(-pi^2 k^2/alpha^2)/(2 L^3 k^2)
    let mmax: i64 = 8;
    let coeff = |m: [i64; 3]| -> f64 {
        let k = m.map(|v| v as f64 / l);
        let k2 = dot(k, k);
        -dot(SIGMA, k) * dot(b, k) * (-PI * PI * k2 / (alpha * alpha)).exp() / (2.0 * l.powi(3) * k2)
    };
    let modes: Vec<[i64; 3]> = (-mmax..=mmax)
        .flat_map(|i| (-mmax..=mmax).flat_map(move |j| (-mmax..=mmax).map(move |k| [i, j, k])))
        .filter(|m| *m != [0, 0, 0])
        .collect();
    let recip: Vec<f64> = if grid.n() as i64 > 2 * mmax + 2 {
        let mut c = vec![Complex64::default(); grid.len()];
        for &m in &modes {
            let idx = m.map(|v| grid.freq_index(v).expect("mode fits"));
            c[grid.index(idx[0], idx[1], idx[2])] = Complex64::new(coeff(m), 0.0);
        }
        ScalarField::from_spectral(*grid, c).into_samples()
    } else {
        (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let x = grid.point(idx);
                modes
                    .iter()
                    .map(|m| {
                        let phase = 2.0 * PI * (0..3).map(|a| m[a] as f64 * x[a]).sum::<f64>() / l;
                        coeff(*m) * phase.cos()
                    })
                    .sum()
            })
            .collect()
    };
    real.iter().zip(&recip).map(|(a, r)| a + r).collect()
}

type CorrectionKey = (usize, u64, [u64; 3]);

static CORRECTIONS: Lazy<Mutex<HashMap<CorrectionKey, Arc<Vec<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn cached_correction(grid: &Grid, b: [f64; 3]) -> Arc<Vec<f64>> {
    let key = (grid.n(), grid.length().to_bits(), b.map(f64::to_bits));
    if let Some(v) = CORRECTIONS.lock().expect("cache poisoned").get(&key) {
        return v.clone();
    }
    let v = Arc::new(periodic_correction(grid, b));
    CORRECTIONS.lock().expect("cache poisoned").insert(key, v.clone());
    v
}

/// `int k_b f` over the box (plus the periodic correction when enabled).
pub fn kernel_integral(f: &ScalarField, b: [f64; 3], opts: &LambdaOptions) -> Result<f64> {
    let g = *f.grid();
    let factor = refine_factor(&g, opts);
    let fine = if factor > 1 { refine(f, factor)? } else { f.clone() };
    let mut total = punctured_sum(&fine, b);
    if opts.periodic {
        let corr = cached_correction(&g, b);
        let s: f64 = corr.iter().zip(f.samples()).map(|(c, v)| c * v).sum();
        total += s * g.cell_volume();
    }
    Ok(total)
}

/// The vorticity form `(1/8pi) int (s.x)/|x|^5 (x2-x3, x3-x1, x1-x2).omega`.
pub fn lambda_from_vorticity(omega: &VectorField, opts: &LambdaOptions) -> Result<f64> {
    let mut total = 0.0;
    for (a, b) in DIRECTIONS.iter().enumerate() {
        total += kernel_integral(omega.comp(a), *b, opts)? / 3.0;
    }
    Ok(total)
}

/// `omega - (1/3)(omega.s)s`.
pub fn omega_perp(omega: &VectorField) -> VectorField {
    let s = omega.comp(0).add(omega.comp(1)).add(omega.comp(2)).scaled(1.0 / 3.0);
    omega.map_comps(|c| c.sub(&s))
}

fn sorted_eigen(strain: &Matrix3<f64>) -> ([f64; 3], Vector3<f64>) {
    let eig = SymmetricEigen::new(*strain);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let v = eig.eigenvectors.column(order[0]).into_owned();
    (values, v)
}

/// Eigenvalues of the strain (ascending) and `|cos|` of the angle between
/// the most compressive eigenvector and `(1,1,1)/sqrt(3)`.
pub fn strain_eigenstructure(report: &StrainReport) -> ([f64; 3], f64) {
    let m = Matrix3::from_fn(|i, j| report.strain_origin[i][j]);
    let (values, v) = sorted_eigen(&m);
    let s = Vector3::from(sigma_unit());
    (values, v.dot(&s).abs() / v.norm())
}

/// Strain at the origin and every lambda evaluation, rejecting non-members.
pub fn lambda_diagnostics(w1: &ScalarField) -> Result<StrainReport> {
    require_member(w1, MEMBERSHIP_TOL)?;
    lambda_diagnostics_with(w1, &LambdaOptions::default())
}

/// Diagnostics without the membership check, for sanity checks on arbitrary
/// fields.
pub fn lambda_diagnostics_with(w1: &ScalarField, opts: &LambdaOptions) -> Result<StrainReport> {
    let omega = reconstruct_vorticity_unchecked(w1);
    let mut lam = [0.0; 3];
    for (a, b) in DIRECTIONS.iter().enumerate() {
        lam[a] = kernel_integral(omega.comp(a), *b, opts)?;
    }
    let lambda_omega = lambda_from_vorticity(&omega, opts)?;
    let free = LambdaOptions {
        periodic: false,
        ..*opts
    };
    let lambda_free_space = lambda_from_vorticity(&omega, &free)?;

    let u = velocity_from_vorticity(&omega);
    let grad = gradient_at_origin(&u);
    let gm = Matrix3::from_fn(|i, j| grad[i][j]);
    let sm = (gm + gm.transpose()) * 0.5;
    let strain = [0, 1, 2].map(|i| [0, 1, 2].map(|j| sm[(i, j)]));
    let mut report = StrainReport {
        lambda_w1: lam[0],
        lambda_w2: lam[1],
        lambda_w3: lam[2],
        lambda_omega,
        lambda_spectral: -grad[0][1],
        lambda_free_space,
        grad_origin: grad,
        strain_origin: strain,
        eigenvalues: [0.0; 3],
        axis_alignment: 0.0,
    };
    let (values, align) = strain_eigenstructure(&report);
    report.eigenvalues = values;
    report.axis_alignment = align;
    Ok(report)
}

/// `-du_1/dx_2(0)` from the spectral velocity, the cheap lambda used by the solver.
pub fn lambda_spectral(w1: &ScalarField) -> f64 {
    let u = crate::biot_savart::velocity_from_w1_unchecked(w1);
    -gradient_at_origin(&u)[0][1]
}
