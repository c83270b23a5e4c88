use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::Grid;

/// Relative size of the zero mode below which a field counts as mean-zero.
pub const MEAN_ZERO_TOL: f64 = 1e-10;

/// Real samples on a [`Grid`] with a lazily computed, cached spectrum.
///
/// The cache is dropped whenever samples are borrowed mutably.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Grid,
    samples: Vec<f64>,
    spectral: OnceLock<Vec<Complex64>>,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.samples == other.samples
    }
}

impl ScalarField {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::input(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite sample at index {pos}")));
        }
        Ok(Self::from_samples_unchecked(grid, samples))
    }

    pub(crate) fn from_samples_unchecked(grid: Grid, samples: Vec<f64>) -> Self {
        ScalarField {
            grid,
            samples,
            spectral: OnceLock::new(),
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::with_spectral(grid, vec![0.0; grid.len()], vec![Complex64::default(); grid.len()])
    }

    /// Sample a function of position at every node.
    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        let samples = (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect();
        Self::from_samples_unchecked(grid, samples)
    }

    /// Build from Fourier coefficients in FFT order. The samples are the real
    /// part of the inverse transform; the cached spectrum is the input.
    pub fn from_spectral(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len(), "coefficient array does not match grid");
        let samples = fft::inverse_real(&grid, &coeffs);
        let f = Self::from_samples_unchecked(grid, samples);
        let _ = f.spectral.set(coeffs);
        f
    }

    pub(crate) fn with_spectral(grid: Grid, samples: Vec<f64>, coeffs: Vec<Complex64>) -> Self {
        let f = Self::from_samples_unchecked(grid, samples);
        let _ = f.spectral.set(coeffs);
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [f64] {
        self.spectral.take();
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.samples[idx]
    }

    pub fn spectral(&self) -> &[Complex64] {
        self.spectral.get_or_init(|| fft::forward_real(&self.grid, &self.samples))
    }

    pub(crate) fn has_spectral(&self) -> bool {
        self.spectral.get().is_some()
    }

    pub(crate) fn set_spectral(&self, coeffs: Vec<Complex64>) {
        let _ = self.spectral.set(coeffs);
    }

    pub fn is_finite(&self) -> bool {
        self.samples.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        let samples = self.samples.par_iter().map(|&v| f(v)).collect();
        Self::from_samples_unchecked(self.grid, samples)
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64 + Sync) -> ScalarField {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let samples = self
            .samples
            .par_iter()
            .zip(other.samples.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_samples_unchecked(self.grid, samples)
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        self.map(|v| a * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |x, y| x + a * y)
    }

    /// Riemann-sum inner product over the box.
    pub fn inner(&self, other: &ScalarField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let s: f64 = self.samples.iter().zip(&other.samples).map(|(a, b)| a * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn norm_linf(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l1(&self) -> f64 {
        self.samples.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete `L^p` norm for finite `p >= 1`.
    pub fn norm_lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.norm_linf();
        }
        let s: f64 = self.samples.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// `|c_0| L^3 <= tol * integral |f|`.
    pub fn is_mean_zero(&self) -> bool {
        let c0 = self.spectral()[0].norm() * self.grid.volume();
        c0 <= MEAN_ZERO_TOL * self.norm_l1()
    }

    pub(crate) fn require_mean_zero(&self, what: &str) -> Result<()> {
        if self.is_mean_zero() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "{what} requires a mean-zero field (mean = {:e})",
                self.mean()
            )))
        }
    }
}

/// Three scalar components on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: [ScalarField; 3],
}

impl VectorField {
    pub fn new(a: ScalarField, b: ScalarField, c: ScalarField) -> Result<Self> {
        if a.grid() != b.grid() || a.grid() != c.grid() {
            return Err(Error::input("vector components live on different grids"));
        }
        Ok(VectorField { comps: [a, b, c] })
    }

    pub(crate) fn from_array(comps: [ScalarField; 3]) -> Self {
        debug_assert!(comps[0].grid() == comps[1].grid() && comps[0].grid() == comps[2].grid());
        VectorField { comps }
    }

    pub fn zeros(grid: Grid) -> Self {
        let z = ScalarField::zeros(grid);
        VectorField {
            comps: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn([f64; 3]) -> [f64; 3] + Sync,
    {
        let values: Vec<[f64; 3]> = (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect();
        let comp = |a: usize| {
            ScalarField::from_samples_unchecked(grid, values.iter().map(|v| v[a]).collect())
        };
        VectorField {
            comps: [comp(0), comp(1), comp(2)],
        }
    }

    /// Build from three coefficient arrays with paired inverse transforms.
    pub fn from_spectra(grid: Grid, spectra: [Vec<Complex64>; 3]) -> Self {
        let samples = fft::inverse_many(&grid, &[&spectra[0], &spectra[1], &spectra[2]]);
        let mut it = samples.into_iter().zip(spectra);
        let mut next = || {
            let (s, c) = it.next().expect("three components");
            ScalarField::with_spectral(grid, s, c)
        };
        VectorField {
            comps: [next(), next(), next()],
        }
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn comp(&self, a: usize) -> &ScalarField {
        &self.comps[a]
    }

    pub fn comp_mut(&mut self, a: usize) -> &mut ScalarField {
        &mut self.comps[a]
    }

    pub fn comps(&self) -> &[ScalarField; 3] {
        &self.comps
    }

    pub fn into_comps(self) -> [ScalarField; 3] {
        self.comps
    }

    /// Coefficient arrays of all components, computing missing ones in pairs.
    pub fn spectra(&self) -> [&[Complex64]; 3] {
        let missing: Vec<usize> = (0..3).filter(|&a| !self.comps[a].has_spectral()).collect();
        if missing.len() >= 2 {
            let grid = *self.grid();
            let inputs: Vec<&[f64]> = missing.iter().map(|&a| self.comps[a].samples()).collect();
            let out = fft::forward_many(&grid, &inputs);
            for (a, c) in missing.into_iter().zip(out) {
                self.comps[a].set_spectral(c);
            }
        }
        [self.comps[0].spectral(), self.comps[1].spectral(), self.comps[2].spectral()]
    }

    pub fn value(&self, idx: usize) -> [f64; 3] {
        [self.comps[0].value(idx), self.comps[1].value(idx), self.comps[2].value(idx)]
    }

    pub fn map_comps(&self, f: impl Fn(&ScalarField) -> ScalarField) -> VectorField {
        VectorField {
            comps: [f(&self.comps[0]), f(&self.comps[1]), f(&self.comps[2])],
        }
    }

    pub fn scaled(&self, a: f64) -> VectorField {
        self.map_comps(|c| c.scaled(a))
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: [0, 1, 2].map(|a| self.comps[a].add(&other.comps[a])),
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        VectorField {
            comps: [0, 1, 2].map(|a| self.comps[a].sub(&other.comps[a])),
        }
    }

    pub fn axpy(&self, a: f64, other: &VectorField) -> VectorField {
        VectorField {
            comps: [0, 1, 2].map(|c| self.comps[c].axpy(a, &other.comps[c])),
        }
    }

    pub fn inner(&self, other: &VectorField) -> f64 {
        (0..3).map(|a| self.comps[a].inner(&other.comps[a])).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Maximum pointwise Euclidean length.
    pub fn norm_linf(&self) -> f64 {
        let [a, b, c] = [0, 1, 2].map(|i| self.comps[i].samples());
        (0..a.len())
            .map(|i| (a[i] * a[i] + b[i] * b[i] + c[i] * c[i]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_invalidates_spectrum() {
        let g = Grid::new(4, 1.0).unwrap();
        let mut f = ScalarField::zeros(g);
        assert_eq!(f.spectral()[0], Complex64::default());
        f.samples_mut()[0] = 64.0;
        assert!((f.spectral()[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_samples() {
        let g = Grid::new(4, 1.0).unwrap();
        let mut s = vec![0.0; g.len()];
        s[3] = f64::NAN;
        assert!(ScalarField::new(g, s).is_err());
        assert!(ScalarField::new(g, vec![0.0; 5]).is_err());
    }

    #[test]
    fn constant_has_only_the_zero_mode() {
        let g = Grid::new(8, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |_| 3.5);
        let c = f.spectral();
        assert!((c[0].re - 3.5).abs() < 1e-14);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-14));
        assert!(!f.is_mean_zero());
    }

    #[test]
    fn vector_spectra_agree_with_components() {
        let g = Grid::new(8, 2.0).unwrap();
        let u = VectorField::from_fn(g, |x| [x[0].sin(), (x[1] * x[2]).cos(), x[2]]);
        let direct: Vec<Vec<Complex64>> = (0..3).map(|a| fft::forward_real(&g, u.comp(a).samples())).collect();
        let s = u.spectra();
        for a in 0..3 {
            for (p, q) in s[a].iter().zip(&direct[a]) {
                assert!((p - q).norm() < 1e-14);
            }
        }
    }
}
