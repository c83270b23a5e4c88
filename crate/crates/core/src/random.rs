//! Seeded random band-limited test fields.

use num_complex::Complex64;
use rand::Rng;

use crate::fft::conjugate_index;
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::pullback::pullback_exact;
use crate::spectral::leray;
use crate::symmetry::permutation_group;

fn random_coeffs<R: Rng + ?Sized>(grid: &Grid, kmax: usize, rng: &mut R) -> Vec<Complex64> {
    let kmax = kmax.min(grid.n() / 2 - 1) as i64;
    let mut c = vec![Complex64::default(); grid.len()];
    let mut count = 0usize;
    for (idx, slot) in c.iter_mut().enumerate() {
        let m = grid.freq3(idx);
        if m.iter().all(|v| v.abs() <= kmax) && idx != 0 {
            *slot = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            count += 1;
        }
    }
    let scale = 1.0 / (count.max(1) as f64).sqrt();
    (0..grid.len())
        .map(|idx| (c[idx] + c[conjugate_index(grid, idx)].conj()) * (0.5 * scale))
        .collect()
}

/// Real, mean-zero field with modes `|m_a| <= kmax` on every axis.
pub fn random_field<R: Rng + ?Sized>(grid: Grid, kmax: usize, rng: &mut R) -> ScalarField {
    ScalarField::from_spectral(grid, random_coeffs(&grid, kmax, rng))
}

pub fn random_vector<R: Rng + ?Sized>(grid: Grid, kmax: usize, rng: &mut R) -> VectorField {
    let spectra = [0, 1, 2].map(|_| random_coeffs(&grid, kmax, rng));
    VectorField::from_spectra(grid, spectra)
}

/// Divergence-free velocity invariant under all six permutations, obtained
/// by averaging a random field over the group and projecting.
pub fn random_symmetric_velocity<R: Rng + ?Sized>(grid: Grid, kmax: usize, rng: &mut R) -> VectorField {
    let u = random_vector(grid, kmax, rng);
    let mut acc = VectorField::zeros(grid);
    for p in permutation_group() {
        acc = acc.add(&pullback_exact(&u, &p.to_map()).expect("permutations remap exactly"));
    }
    leray(&acc.scaled(1.0 / 6.0))
}
