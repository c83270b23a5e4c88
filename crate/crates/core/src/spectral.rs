//! Fourier multipliers: derivatives, Laplacian inversion, Leray projection,
//! dealiasing, Sobolev norms, spectral refinement and point evaluation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

/// Wavenumbers `2 pi m / L` along one axis in FFT order, with the Nyquist
/// entry set to zero so odd derivatives stay Hermitian.
pub fn derivative_wavenumbers(grid: &Grid) -> Vec<f64> {
    (0..grid.n())
        .map(|i| {
            let m = grid.freq(i);
            if grid.is_nyquist(m) {
                0.0
            } else {
                grid.wavenumber(m)
            }
        })
        .collect()
}

fn apply_multiplier<F>(grid: &Grid, coeffs: &[Complex64], f: F) -> Vec<Complex64>
where
    F: Fn([usize; 3]) -> Complex64 + Sync,
{
    let n = grid.n();
    coeffs
        .par_iter()
        .enumerate()
        .map(|(idx, &c)| {
            let ijk = [idx % n, (idx / n) % n, idx / (n * n)];
            c * f(ijk)
        })
        .collect()
}

/// Coefficients of `d f / d x_axis`.
pub fn derivative_coeffs(grid: &Grid, coeffs: &[Complex64], axis: usize) -> Vec<Complex64> {
    let k = derivative_wavenumbers(grid);
    apply_multiplier(grid, coeffs, |ijk| Complex64::new(0.0, k[ijk[axis]]))
}

pub fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField::from_spectral(*f.grid(), derivative_coeffs(f.grid(), f.spectral(), axis))
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    let c = f.spectral();
    VectorField::from_spectra(g, [0, 1, 2].map(|a| derivative_coeffs(&g, c, a)))
}

pub fn curl_coeffs(grid: &Grid, s: [&[Complex64]; 3]) -> [Vec<Complex64>; 3] {
    let k = derivative_wavenumbers(grid);
    let n = grid.n();
    let mut out = [
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
        vec![Complex64::default(); grid.len()],
    ];
    let [o0, o1, o2] = &mut out;
    o0.par_iter_mut()
        .zip(o1.par_iter_mut())
        .zip(o2.par_iter_mut())
        .enumerate()
        .for_each(|(idx, ((a, b), c))| {
            let (kx, ky, kz) = (k[idx % n], k[(idx / n) % n], k[idx / (n * n)]);
            let i = Complex64::i();
            *a = i * (ky * s[2][idx] - kz * s[1][idx]);
            *b = i * (kz * s[0][idx] - kx * s[2][idx]);
            *c = i * (kx * s[1][idx] - ky * s[0][idx]);
        });
    out
}

pub fn curl(u: &VectorField) -> VectorField {
    let g = *u.grid();
    VectorField::from_spectra(g, curl_coeffs(&g, u.spectra()))
}

pub fn divergence(u: &VectorField) -> ScalarField {
    let g = *u.grid();
    let k = derivative_wavenumbers(&g);
    let s = u.spectra();
    let n = g.n();
    let c: Vec<Complex64> = (0..g.len())
        .into_par_iter()
        .map(|idx| {
            let (kx, ky, kz) = (k[idx % n], k[(idx / n) % n], k[idx / (n * n)]);
            Complex64::i() * (kx * s[0][idx] + ky * s[1][idx] + kz * s[2][idx])
        })
        .collect();
    ScalarField::from_spectral(g, c)
}

/// Coefficients of `(-Delta)^{-1}`, with the zero mode set to zero.
pub fn inverse_laplacian_coeffs(grid: &Grid, coeffs: &[Complex64]) -> Vec<Complex64> {
    coeffs
        .par_iter()
        .enumerate()
        .map(|(idx, &c)| {
            if idx == 0 {
                Complex64::default()
            } else {
                c / grid.laplacian_symbol(idx)
            }
        })
        .collect()
}

pub fn inverse_laplacian(f: &ScalarField) -> Result<ScalarField> {
    f.require_mean_zero("inverse_laplacian")?;
    Ok(ScalarField::from_spectral(
        *f.grid(),
        inverse_laplacian_coeffs(f.grid(), f.spectral()),
    ))
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let c = f
        .spectral()
        .iter()
        .enumerate()
        .map(|(idx, &c)| -g.laplacian_symbol(idx) * c)
        .collect();
    ScalarField::from_spectral(g, c)
}

/// Velocity `curl (-Delta)^{-1} omega` from vorticity coefficients.
pub fn biot_savart_coeffs(grid: &Grid, omega: [&[Complex64]; 3]) -> [Vec<Complex64>; 3] {
    let psi = omega.map(|c| inverse_laplacian_coeffs(grid, c));
    curl_coeffs(grid, [&psi[0], &psi[1], &psi[2]])
}

/// Remove the gradient part of a vector field (and its mean).
pub fn leray(u: &VectorField) -> VectorField {
    let g = *u.grid();
    let k = derivative_wavenumbers(&g);
    let n = g.n();
    let s = u.spectra();
    let mut out = [
        s[0].to_vec(),
        s[1].to_vec(),
        s[2].to_vec(),
    ];
    for idx in 0..g.len() {
        let kv = [k[idx % n], k[(idx / n) % n], k[idx / (n * n)]];
        let k2: f64 = kv.iter().map(|v| v * v).sum();
        if k2 == 0.0 {
            // the mean, and modes whose only nonzero frequencies are Nyquist
            for c in out.iter_mut() {
                c[idx] = Complex64::default();
            }
            continue;
        }
        let dot = (0..3).map(|a| kv[a] * s[a][idx]).sum::<Complex64>() / k2;
        for a in 0..3 {
            out[a][idx] = s[a][idx] - kv[a] * dot;
        }
    }
    VectorField::from_spectra(g, out)
}

/// Whether the mode at FFT indices `ijk` survives dealiasing: `3|m_a| < n`
/// on every axis.
pub fn is_resolved(grid: &Grid, ijk: [usize; 3]) -> bool {
    let n = grid.n() as i64;
    ijk.iter().all(|&i| 3 * grid.freq(i).abs() < n)
}

pub fn dealias_coeffs(grid: &Grid, coeffs: &mut [Complex64]) {
    let n = grid.n();
    let keep: Vec<bool> = (0..n).map(|i| 3 * grid.freq(i).abs() < n as i64).collect();
    coeffs.par_iter_mut().enumerate().for_each(|(idx, c)| {
        if !(keep[idx % n] && keep[(idx / n) % n] && keep[idx / (n * n)]) {
            *c = Complex64::default();
        }
    });
}

pub fn dealias(f: &ScalarField) -> ScalarField {
    let mut c = f.spectral().to_vec();
    dealias_coeffs(f.grid(), &mut c);
    ScalarField::from_spectral(*f.grid(), c)
}

pub fn dealias_vector(u: &VectorField) -> VectorField {
    let g = *u.grid();
    let s = u.spectra();
    let out = s.map(|c| {
        let mut c = c.to_vec();
        dealias_coeffs(&g, &mut c);
        c
    });
    VectorField::from_spectra(g, out)
}

/// Which Sobolev-type norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// `H^s`, weight `(1 + 4 pi^2 |xi|^2)^s`.
    Hs,
    /// `Hdot^{-1}`, weight `1 / (4 pi^2 |xi|^2)`.
    HdotNeg1,
    /// `H^s cap Hdot^{-1}`, weight `(1 + 4 pi^2 |xi|^2)^(s+1) / (4 pi^2 |xi|^2)`.
    HsCapHdotNeg1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub s: f64,
}

impl NormSpec {
    pub fn new(s: f64) -> Self {
        NormSpec { s }
    }
}

fn norm_weight(k2: f64, s: f64, kind: NormKind) -> f64 {
    match kind {
        NormKind::Hs => (1.0 + k2).powf(s),
        NormKind::HdotNeg1 => 1.0 / k2,
        NormKind::HsCapHdotNeg1 => (1.0 + k2).powf(s + 1.0) / k2,
    }
}

fn sobolev_sum(f: &ScalarField, spec: NormSpec, kind: NormKind) -> Result<f64> {
    if !spec.s.is_finite() {
        return Err(Error::input("Sobolev index must be finite"));
    }
    if kind == NormKind::HsCapHdotNeg1 && spec.s <= -1.0 {
        return Err(Error::input(format!("combined norm needs s > -1, got {}", spec.s)));
    }
    if kind != NormKind::Hs {
        f.require_mean_zero("a homogeneous negative Sobolev norm")?;
    }
    let g = *f.grid();
    let c = f.spectral();
    let sum: f64 = (0..g.len())
        .map(|idx| {
            let a2 = c[idx].norm_sqr();
            if idx == 0 {
                if kind == NormKind::Hs {
                    a2
                } else {
                    0.0
                }
            } else {
                norm_weight(g.laplacian_symbol(idx), spec.s, kind) * a2
            }
        })
        .sum();
    Ok(sum * g.volume())
}

/// Discrete Sobolev norm `(L^3 sum_m w(m) |c_m|^2)^(1/2)`.
pub fn sobolev_norm(f: &ScalarField, spec: NormSpec, kind: NormKind) -> Result<f64> {
    Ok(sobolev_sum(f, spec, kind)?.sqrt())
}

/// Componentwise sum of squares of [`sobolev_norm`].
pub fn sobolev_norm_vector(u: &VectorField, spec: NormSpec, kind: NormKind) -> Result<f64> {
    u.spectra();
    let mut total = 0.0;
    for c in u.comps() {
        total += sobolev_sum(c, spec, kind)?;
    }
    Ok(total.sqrt())
}

/// Zero-pad the spectrum onto a grid `factor` times finer. Nyquist
/// coefficients are split evenly between `+n/2` and `-n/2`, which keeps the
/// refined field real and equal to the trigonometric interpolant.
pub fn refine_coeffs(grid: &Grid, coeffs: &[Complex64], factor: usize) -> Result<(Grid, Vec<Complex64>)> {
    let fine = grid.refined(factor)?;
    let n = grid.n();
    let mut out = vec![Complex64::default(); fine.len()];
    let targets = |i: usize| -> Vec<(usize, f64)> {
        let m = grid.freq(i);
        if grid.is_nyquist(m) {
            let nf = fine.n() as i64;
            vec![((m).rem_euclid(nf) as usize, 0.5), ((-m).rem_euclid(nf) as usize, 0.5)]
        } else {
            vec![(fine.freq_index(m).expect("coarse mode fits on fine grid"), 1.0)]
        }
    };
    let axis: Vec<Vec<(usize, f64)>> = (0..n).map(targets).collect();
    for (idx, &c) in coeffs.iter().enumerate() {
        if c == Complex64::default() {
            continue;
        }
        let [i, j, k] = grid.unravel(idx);
        for &(fi, wi) in &axis[i] {
            for &(fj, wj) in &axis[j] {
                for &(fk, wk) in &axis[k] {
                    out[fine.index(fi, fj, fk)] += c * (wi * wj * wk);
                }
            }
        }
    }
    Ok((fine, out))
}

pub fn refine(f: &ScalarField, factor: usize) -> Result<ScalarField> {
    let (fine, c) = refine_coeffs(f.grid(), f.spectral(), factor)?;
    Ok(ScalarField::from_spectral(fine, c))
}

pub fn refine_vector(u: &VectorField, factor: usize) -> Result<VectorField> {
    let g = *u.grid();
    let s = u.spectra();
    let mut fine = g;
    let mut out = Vec::with_capacity(3);
    for c in s {
        let (fg, fc) = refine_coeffs(&g, c, factor)?;
        fine = fg;
        out.push(fc);
    }
    let out: [Vec<Complex64>; 3] = out.try_into().expect("three components");
    Ok(VectorField::from_spectra(fine, out))
}

/// Per-axis phase tables `exp(2 pi i m x_a / L)` in FFT order.
fn phase_tables(grid: &Grid, x: [f64; 3]) -> [Vec<Complex64>; 3] {
    x.map(|xa| {
        (0..grid.n())
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * grid.freq(i) as f64 * xa / grid.length()))
            .collect()
    })
}

/// Value of the trigonometric interpolant at an arbitrary point (direct sum).
pub fn evaluate_coeffs(grid: &Grid, coeffs: &[Complex64], x: [f64; 3]) -> f64 {
    let n = grid.n();
    let [ex, ey, ez] = phase_tables(grid, x);
    let mut total = Complex64::default();
    for k in 0..n {
        let mut plane = Complex64::default();
        for j in 0..n {
            let row = &coeffs[n * (j + n * k)..n * (j + n * k) + n];
            let line: Complex64 = row.iter().zip(&ex).map(|(c, e)| c * e).sum();
            plane += line * ey[j];
        }
        total += plane * ez[k];
    }
    total.re
}

pub fn evaluate(f: &ScalarField, points: &[[f64; 3]]) -> Vec<f64> {
    let g = *f.grid();
    let c = f.spectral();
    points.par_iter().map(|&x| evaluate_coeffs(&g, c, x)).collect()
}

pub fn evaluate_vector(u: &VectorField, points: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let g = *u.grid();
    let s = u.spectra();
    points
        .par_iter()
        .map(|&x| s.map(|c| evaluate_coeffs(&g, c, x)))
        .collect()
}
