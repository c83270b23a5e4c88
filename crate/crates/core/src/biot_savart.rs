//! Velocity from the first vorticity component, by the spectral
//! Biot-Savart law and by direct quadrature of the symmetry-reduced kernel.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::constraint::{reconstruct_vorticity_unchecked, require_member, MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::spectral::{biot_savart_coeffs, derivative_wavenumbers, evaluate_coeffs, refine};
use crate::symmetry::{PermName, PermutationElement};

/// `u = curl (-Delta)^{-1} omega` with `omega` rebuilt from `w1`, skipping
/// the membership check.
pub fn velocity_from_w1_unchecked(w1: &ScalarField) -> VectorField {
    let omega = reconstruct_vorticity_unchecked(w1);
    velocity_from_vorticity(&omega)
}

pub fn velocity_from_vorticity(omega: &VectorField) -> VectorField {
    let g = *omega.grid();
    VectorField::from_spectra(g, biot_savart_coeffs(&g, omega.spectra()))
}

/// Divergence-free, permutation-symmetric velocity whose vorticity has first
/// component `w1`.
pub fn velocity_from_w1(w1: &ScalarField) -> Result<VectorField> {
    w1.require_mean_zero("velocity_from_w1")?;
    require_member(w1, MEMBERSHIP_TOL)?;
    Ok(velocity_from_w1_unchecked(w1))
}

/// `grad[i][j] = d u_i / d x_j` at the origin node, summed spectrally.
pub fn gradient_at_origin(u: &VectorField) -> [[f64; 3]; 3] {
    let g = *u.grid();
    let k = derivative_wavenumbers(&g);
    let n = g.n();
    let s = u.spectra();
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate() {
            // value at x = 0 of the derivative is the sum of its coefficients
            let total: f64 = (0..g.len())
                .map(|idx| {
                    let kv = [k[idx % n], k[(idx / n) % n], k[idx / (n * n)]];
                    -kv[j] * s[i][idx].im
                })
                .sum();
            *entry = total;
        }
    }
    out
}

/// Settings for [`velocity_kernel_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOptions {
    /// Spectral refinement factor; `None` picks `max(2, ceil(128 / n))`.
    pub refine: Option<usize>,
    /// Radius of the Gaussian taper around each singularity, in native grid
    /// spacings.
    pub taper_cells: f64,
    /// Relative size `w1` may keep outside the inner half of the box.
    pub decay_tol: f64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions {
            refine: None,
            taper_cells: 3.0,
            decay_tol: 1e-10,
        }
    }
}

/// Largest `|w1|` outside the inner half of the box relative to its maximum.
pub fn outer_decay_ratio(w1: &ScalarField) -> f64 {
    let g = *w1.grid();
    let quarter = 0.25 * g.length();
    let max = w1.norm_linf();
    if max == 0.0 {
        return 0.0;
    }
    let outer = (0..g.len())
        .filter(|&i| g.point(i).iter().any(|v| v.abs() > quarter))
        .map(|i| w1.value(i).abs())
        .fold(0.0, f64::max);
    outer / max
}

/// The three kernel blocks as `(matrix A_j, permutation P_j)` with
/// `G_j(x, y) = A_j (x - P_j y) / |x - P_j y|^3`.
fn blocks() -> [(Matrix3<f64>, PermName); 3] {
    [
        (Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0), PermName::I),
        (Matrix3::new(0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0), PermName::P12),
        (Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0), PermName::P13),
    ]
}

/// Value, gradient and Hessian of the trigonometric interpolant at `x`.
fn taylor_data(w1: &ScalarField, x: [f64; 3]) -> (f64, Vector3<f64>, Matrix3<f64>) {
    let g = *w1.grid();
    let k = derivative_wavenumbers(&g);
    let n = g.n();
    let c = w1.spectral();
    let value = evaluate_coeffs(&g, c, x);
    let deriv = |axes: &[usize]| -> f64 {
        let coeffs: Vec<_> = c
            .iter()
            .enumerate()
            .map(|(idx, &z)| {
                let kv = [k[idx % n], k[(idx / n) % n], k[idx / (n * n)]];
                let mut z = z;
                for &a in axes {
                    z *= num_complex::Complex64::new(0.0, kv[a]);
                }
                z
            })
            .collect();
        evaluate_coeffs(&g, &coeffs, x)
    };
    let grad = Vector3::new(deriv(&[0]), deriv(&[1]), deriv(&[2]));
    let mut hess = Matrix3::zeros();
    for a in 0..3 {
        for b in a..3 {
            let v = deriv(&[a, b]);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    (value, grad, hess)
}

/// Velocity at `points` by quadrature of the symmetry-reduced Biot-Savart
/// kernel against `w1`, with default options.
pub fn velocity_kernel(w1: &ScalarField, points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    velocity_kernel_with(w1, points, &KernelOptions::default())
}

/// Kernel quadrature with singularity subtraction.
///
/// Each block is integrated in the variable `d = x - P_j y`. Near `d = 0`
/// the integrand is replaced by its second-order Taylor polynomial times a
/// Gaussian taper; the polynomial's odd parts integrate to zero and its
/// linear part is integrated exactly. The remainder is summed on a
/// spectrally refined grid.
pub fn velocity_kernel_with(
    w1: &ScalarField,
    points: &[[f64; 3]],
    opts: &KernelOptions,
) -> Result<Vec<[f64; 3]>> {
    let g = *w1.grid();
    if let Some(p) = points.iter().find(|p| !g.contains(**p)) {
        return Err(Error::input(format!("evaluation point {p:?} lies outside the box")));
    }
    let ratio = outer_decay_ratio(w1);
    if ratio > opts.decay_tol {
        return Err(Error::input(format!(
            "w1 does not decay inside the inner half of the box (outer/max = {ratio:e})"
        )));
    }
    if !(opts.taper_cells > 0.0) {
        return Err(Error::input("taper radius must be positive"));
    }
    let factor = opts.refine.unwrap_or_else(|| 2usize.max(128usize.div_ceil(g.n())));
    let fine_field = if factor > 1 { refine(w1, factor)? } else { w1.clone() };
    let fine = *fine_field.grid();
    let hf = fine.spacing();
    let rho = opts.taper_cells * g.spacing();
    let cutoff = 8.0 * rho;
    let samples = fine_field.samples();
    let nf = fine.n();

    let result = points
        .par_iter()
        .map(|&x| {
            let mut u = Vector3::zeros();
            for (a, p) in blocks() {
                let perm = PermutationElement::new(p);
                let center = perm.apply(x);
                let pm = perm.to_map();
                let pmat = *pm.matrix();
                let (g0, grad, hess) = taylor_data(w1, center);
                // derivatives of d -> w1(P (x - d)) at d = 0
                let gd = -(pmat * grad);
                let hd = pmat * hess * pmat;
                let xv = Vector3::from(x);
                let taylor = |d: &Vector3<f64>| -> f64 {
                    let r2 = d.norm_squared();
                    (-(r2) / (rho * rho)).exp() * (g0 + gd.dot(d) + 0.5 * d.dot(&(hd * d)))
                };
                let kernel = |d: &Vector3<f64>| -> Vector3<f64> {
                    let r = d.norm();
                    a * d / (r * r * r)
                };

                let mut acc = Vector3::zeros();
                for idx in 0..fine.len() {
                    let y = Vector3::from(fine.point(idx));
                    let d = xv - pmat * y;
                    let r = d.norm();
                    if r == 0.0 {
                        continue;
                    }
                    let mut v = samples[idx];
                    if r < cutoff {
                        v -= taylor(&d);
                    }
                    acc += kernel(&d) * v;
                }

                // taper nodes of the same lattice that fall outside the box
                let half = 0.5 * fine.length();
                let span = (cutoff / hf).ceil() as i64 + 1;
                let y0 = pmat.transpose() * xv;
                if y0.iter().all(|v| v.abs() + cutoff < half) {
                    u += acc * hf.powi(3) + a * gd * (4.0 * PI / 3.0) * (0.5 * rho * rho);
                    continue;
                }
                let base = y0.map(|v| ((v + half) / hf).round() as i64);
                for dk in -span..=span {
                    for dj in -span..=span {
                        for di in -span..=span {
                            let ijk = [base[0] + di, base[1] + dj, base[2] + dk];
                            if ijk.iter().all(|&c| (0..nf as i64).contains(&c)) {
                                continue;
                            }
                            let y = Vector3::new(
                                -half + ijk[0] as f64 * hf,
                                -half + ijk[1] as f64 * hf,
                                -half + ijk[2] as f64 * hf,
                            );
                            let d = xv - pmat * y;
                            let r = d.norm();
                            if r == 0.0 || r >= cutoff {
                                continue;
                            }
                            acc -= kernel(&d) * taylor(&d);
                        }
                    }
                }

                let analytic = a * gd * (4.0 * PI / 3.0) * (0.5 * rho * rho);
                u += acc * hf.powi(3) + analytic;
            }
            let u = u / (4.0 * PI);
            [u[0], u[1], u[2]]
        })
        .collect();
    Ok(result)
}

/// Convenience for tests and diagnostics: spectral velocity at scattered points.
pub fn velocity_spectral_at(w1: &ScalarField, points: &[[f64; 3]]) -> Result<Vec<[f64; 3]>> {
    let u = velocity_from_w1(w1)?;
    Ok(crate::spectral::evaluate_vector(&u, points))
}

/// Relative l^2 discrepancy between two lists of vectors.
pub fn relative_discrepancy(a: &[[f64; 3]], reference: &[[f64; 3]]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, q) in a.iter().zip(reference) {
        for k in 0..3 {
            num += (p[k] - q[k]).powi(2);
            den += q[k] * q[k];
        }
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
