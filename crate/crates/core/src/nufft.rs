//! Evaluation of a trigonometric polynomial at scattered points (a type-2
//! non-uniform FFT with the exponential-of-semicircle kernel).
//!
//! The coefficients are deconvolved by the kernel's Fourier transform,
//! transformed onto a grid twice as fine, and the result is convolved with
//! the compactly supported kernel at each target.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::fft;
use crate::grid::Grid;

const WIDTH: usize = 13;
const BETA_PER_WIDTH: f64 = 2.30;
const OVERSAMPLING: usize = 2;

fn kernel(z: f64, beta: f64) -> f64 {
    if z.abs() >= 1.0 {
        0.0
    } else {
        (beta * ((1.0 - z * z).sqrt() - 1.0)).exp()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; order];
    let mut w = vec![0.0; order];
    for i in 0..order.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = order as f64 * (z * p - p0) / (z * z - 1.0);
            let step = p / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[order - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[order - 1 - i] = wi;
    }
    (x, w)
}

/// Plan for evaluating coefficient arrays on one grid.
#[derive(Debug, Clone)]
pub struct Interpolator {
    grid: Grid,
    fine_n: usize,
    beta: f64,
    /// Kernel half-width in radians.
    alpha: f64,
    /// `1 / psi_hat(m)` per FFT index of the coarse grid.
    deconv: Vec<f64>,
}

impl Interpolator {
    pub fn new(grid: Grid) -> Self {
        let fine_n = OVERSAMPLING * grid.n();
        let beta = BETA_PER_WIDTH * WIDTH as f64;
        let alpha = WIDTH as f64 * PI / fine_n as f64;
        let (nodes, weights) = gauss_legendre(4 * WIDTH + 60);
        let psi_hat = |k: f64| -> f64 {
            alpha
                * nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&z, &wt)| wt * kernel(z, beta) * (k * alpha * z).cos())
                    .sum::<f64>()
        };
        let deconv = (0..grid.n()).map(|i| 1.0 / psi_hat(grid.freq(i) as f64)).collect();
        Interpolator {
            grid,
            fine_n,
            beta,
            alpha,
            deconv,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Fine-grid samples whose kernel convolution reproduces the field.
    fn fine_samples(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let g = &self.grid;
        let n = g.n();
        let nf = self.fine_n;
        let fine = Grid::new(nf, g.length()).expect("fine grid is valid");
        let mut buf = vec![Complex64::default(); fine.len()];
        let fi: Vec<usize> = (0..n).map(|i| g.freq(i).rem_euclid(nf as i64) as usize).collect();
        for (idx, &c) in coeffs.iter().enumerate() {
            let [i, j, k] = g.unravel(idx);
            // raw DFT coefficients carry the centering sign
            let sign = if (i + j + k) % 2 == 0 { 1.0 } else { -1.0 };
            let d = sign * self.deconv[i] * self.deconv[j] * self.deconv[k];
            buf[fine.index(fi[i], fi[j], fi[k])] = c * d;
        }
        fft::fft3(&mut buf, nf, true);
        buf.into_iter().map(|z| z.re).collect()
    }

    fn weights(&self, theta: f64) -> (i64, [f64; WIDTH + 1]) {
        let dt = 2.0 * PI / self.fine_n as f64;
        let t = theta / dt;
        let start = (t - 0.5 * WIDTH as f64).ceil() as i64;
        let mut w = [0.0; WIDTH + 1];
        for (s, wv) in w.iter_mut().enumerate() {
            let l = start + s as i64;
            *wv = kernel((theta - l as f64 * dt) / self.alpha, self.beta);
        }
        (start, w)
    }

    /// Evaluate several coefficient arrays at the same points.
    pub fn evaluate_many(&self, coeffs: &[&[Complex64]], points: &[[f64; 3]]) -> Vec<Vec<f64>> {
        let nf = self.fine_n;
        let l = self.grid.length();
        let fine: Vec<Vec<f64>> = coeffs.iter().map(|c| self.fine_samples(c)).collect();
        let scale = (2.0 * PI / nf as f64).powi(3);
        let values: Vec<Vec<f64>> = points
            .par_iter()
            .map(|x| {
                let theta = x.map(|v| 2.0 * PI * (v + 0.5 * l) / l);
                let (s0, w0) = self.weights(theta[0]);
                let (s1, w1) = self.weights(theta[1]);
                let (s2, w2) = self.weights(theta[2]);
                let wrap = |s: i64, o: usize| (s + o as i64).rem_euclid(nf as i64) as usize;
                let i0: Vec<usize> = (0..=WIDTH).map(|o| wrap(s0, o)).collect();
                let mut acc = vec![0.0; fine.len()];
                for (c, &wc) in w2.iter().enumerate() {
                    if wc == 0.0 {
                        continue;
                    }
                    let k = wrap(s2, c);
                    for (b, &wb) in w1.iter().enumerate() {
                        if wb == 0.0 {
                            continue;
                        }
                        let j = wrap(s1, b);
                        let row = nf * (j + nf * k);
                        let wbc = wb * wc;
                        for (f, a) in fine.iter().zip(acc.iter_mut()) {
                            let line: f64 = i0.iter().zip(&w0).map(|(&i, &wa)| wa * f[row + i]).sum();
                            *a += wbc * line;
                        }
                    }
                }
                acc.into_iter().map(|v| v * scale).collect()
            })
            .collect();
        (0..coeffs.len())
            .map(|c| values.iter().map(|v| v[c]).collect())
            .collect()
    }

    pub fn evaluate(&self, coeffs: &[Complex64], points: &[[f64; 3]]) -> Vec<f64> {
        self.evaluate_many(&[coeffs], points).pop().expect("one output")
    }
}
