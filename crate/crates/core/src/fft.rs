//! Three-dimensional transforms between grid samples and Fourier-series
//! coefficients.
//!
//! For samples `f_j` on the centered grid the coefficients are
//! `c_m = n^-3 sum_j f_j exp(-2 pi i m.x_j / L)`, so that
//! `f(x) = sum_m c_m exp(2 pi i m.x / L)`. The centering contributes the
//! factor `(-1)^(m1+m2+m3)` relative to a plain DFT.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::grid::Grid;

type Plan = Arc<dyn Fft<f64>>;

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Plan>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Plan {
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
            FftPlanner::new().plan_fft(n, dir)
        })
        .clone()
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn lines(data: &mut [Complex64], n: usize, plan: &Plan) {
    let scratch_len = plan.get_inplace_scratch_len();
    data.par_chunks_mut(n * n).for_each_init(
        || vec![Complex64::default(); scratch_len],
        |scratch, slab| plan.process_with_scratch(slab, scratch),
    );
}

/// Unnormalized in-place 3D DFT of an `n^3` x-fastest array.
pub fn fft3(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n, "buffer does not match grid size");
    let p = plan(n, inverse);
    lines(data, n, &p);

    let scratch_len = p.get_inplace_scratch_len();
    data.par_chunks_mut(n * n).for_each_init(
        || (vec![Complex64::default(); n * n], vec![Complex64::default(); scratch_len]),
        |(buf, scratch), slab| {
            transpose(slab, buf, n, n);
            p.process_with_scratch(buf, scratch);
            transpose(buf, slab, n, n);
        },
    );

    let mut buf = vec![Complex64::default(); data.len()];
    transpose(data, &mut buf, n, n * n);
    lines(&mut buf, n, &p);
    transpose(&buf, data, n * n, n);
}

fn centering_sign(grid: &Grid, idx: usize) -> f64 {
    let [i, j, k] = grid.unravel(idx);
    if (i + j + k) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn to_coefficients(grid: &Grid, data: &mut [Complex64]) {
    fft3(data, grid.n(), false);
    let scale = 1.0 / grid.len() as f64;
    for (idx, c) in data.iter_mut().enumerate() {
        *c *= scale * centering_sign(grid, idx);
    }
}

fn to_samples(grid: &Grid, data: &mut [Complex64]) {
    for (idx, c) in data.iter_mut().enumerate() {
        *c *= centering_sign(grid, idx);
    }
    fft3(data, grid.n(), true);
}

/// Index of the mode `-m` given the index of `m`.
pub fn conjugate_index(grid: &Grid, idx: usize) -> usize {
    let n = grid.n();
    let [i, j, k] = grid.unravel(idx);
    grid.index((n - i) % n, (n - j) % n, (n - k) % n)
}

/// Coefficients of a complex sample array.
pub fn forward_complex(grid: &Grid, samples: &[Complex64]) -> Vec<Complex64> {
    let mut data = samples.to_vec();
    to_coefficients(grid, &mut data);
    data
}

/// Complex samples of a coefficient array.
pub fn inverse_complex(grid: &Grid, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    to_samples(grid, &mut data);
    data
}

pub fn forward_real(grid: &Grid, samples: &[f64]) -> Vec<Complex64> {
    let mut data: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    to_coefficients(grid, &mut data);
    data
}

/// Real part of the samples of a coefficient array. Exact for Hermitian input.
pub fn inverse_real(grid: &Grid, coeffs: &[Complex64]) -> Vec<f64> {
    inverse_complex(grid, coeffs).into_iter().map(|z| z.re).collect()
}

/// Transform two real arrays with one complex transform.
pub fn forward_pair(grid: &Grid, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut data: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    to_coefficients(grid, &mut data);
    let half = 0.5;
    let mut ca = vec![Complex64::default(); data.len()];
    let mut cb = vec![Complex64::default(); data.len()];
    for idx in 0..data.len() {
        let z = data[idx];
        let zc = data[conjugate_index(grid, idx)].conj();
        ca[idx] = (z + zc) * half;
        // (z - zc) / (2i)
        let d = (z - zc) * half;
        cb[idx] = Complex64::new(d.im, -d.re);
    }
    (ca, cb)
}

/// Inverse of [`forward_pair`] for Hermitian coefficient arrays.
pub fn inverse_pair(grid: &Grid, ca: &[Complex64], cb: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    let mut data: Vec<Complex64> = ca
        .iter()
        .zip(cb)
        .map(|(&x, &y)| x + Complex64::new(-y.im, y.re))
        .collect();
    to_samples(grid, &mut data);
    data.into_iter().map(|z| (z.re, z.im)).unzip()
}

/// Transform any number of real arrays, pairing them up.
pub fn forward_many(grid: &Grid, inputs: &[&[f64]]) -> Vec<Vec<Complex64>> {
    let mut out = Vec::with_capacity(inputs.len());
    for pair in inputs.chunks(2) {
        if let [a, b] = pair {
            let (ca, cb) = forward_pair(grid, a, b);
            out.push(ca);
            out.push(cb);
        } else {
            out.push(forward_real(grid, pair[0]));
        }
    }
    out
}

/// Inverse transform any number of Hermitian coefficient arrays, pairing them up.
pub fn inverse_many(grid: &Grid, inputs: &[&[Complex64]]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(inputs.len());
    for pair in inputs.chunks(2) {
        if let [a, b] = pair {
            let (ra, rb) = inverse_pair(grid, a, b);
            out.push(ra);
            out.push(rb);
        } else {
            out.push(inverse_real(grid, pair[0]));
        }
    }
    out
}
