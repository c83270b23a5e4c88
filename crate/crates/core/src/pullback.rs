//! The action `u^Q(x) = Q u(Q^T x)` of orthogonal maps on fields.
//!
//! Signed permutations map grid nodes onto grid nodes, so their action is an
//! exact reindexing. Any other map must be flagged interpolating and is
//! applied by evaluating the trigonometric interpolant at the rotated nodes.
//! Rotated nodes that leave the box read zero: fields stand in for compactly
//! supported fields on R^3, not for their periodic extensions.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::nufft::Interpolator;
use crate::symmetry::OrthogonalMap;

/// Floor on the denominator of [`symmetry_residual`].
pub const RESIDUAL_FLOOR: f64 = 1e-300;

/// For each output node, the index of the node `Q^T x` for a signed permutation.
fn source_indices(grid: &Grid, sp: [(usize, i8); 3]) -> Vec<usize> {
    let n = grid.n() as i64;
    let half = n / 2;
    (0..grid.len())
        .map(|idx| {
            let ijk = grid.unravel(idx);
            let mut src = [0usize; 3];
            for (r, &(s, sign)) in sp.iter().enumerate() {
                let c = ijk[r] as i64 - half;
                src[s] = (i64::from(sign) * c + half).rem_euclid(n) as usize;
            }
            grid.index(src[0], src[1], src[2])
        })
        .collect()
}

fn remap(f: &ScalarField, src: &[usize], sign: f64) -> ScalarField {
    let s = f.samples();
    ScalarField::from_samples_unchecked(*f.grid(), src.iter().map(|&i| sign * s[i]).collect())
}

/// Nodes `Q^T x` that stay inside the box, with their output indices.
fn rotated_nodes(grid: &Grid, q: &OrthogonalMap) -> (Vec<usize>, Vec<[f64; 3]>) {
    let qt = q.transpose();
    (0..grid.len())
        .map(|i| (i, qt.apply(grid.point(i))))
        .filter(|(_, y)| grid.contains(*y))
        .unzip()
}

fn scatter(len: usize, idx: &[usize], values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (&i, &v) in idx.iter().zip(values) {
        out[i] = v;
    }
    out
}

/// Scalar composition `f(Q^T x)`.
pub fn scalar_pullback(f: &ScalarField, q: &OrthogonalMap) -> Result<ScalarField> {
    if let Some(sp) = q.as_signed_permutation() {
        let src = source_indices(f.grid(), sp);
        return Ok(remap(f, &src, 1.0));
    }
    require_interpolating(q)?;
    let g = *f.grid();
    let (idx, nodes) = rotated_nodes(&g, q);
    let values = Interpolator::new(g).evaluate(f.spectral(), &nodes);
    Ok(ScalarField::from_samples_unchecked(g, scatter(g.len(), &idx, &values)))
}

fn require_interpolating(q: &OrthogonalMap) -> Result<()> {
    if q.is_interpolating() {
        Ok(())
    } else {
        Err(Error::input(
            "map is not a signed permutation; flag it interpolating to resample",
        ))
    }
}

/// Exact pullback by a signed permutation.
pub fn pullback_exact(u: &VectorField, q: &OrthogonalMap) -> Result<VectorField> {
    let sp = q
        .as_signed_permutation()
        .ok_or_else(|| Error::input("exact pullback needs a signed permutation"))?;
    let src = source_indices(u.grid(), sp);
    Ok(VectorField::from_array(
        sp.map(|(s, sign)| remap(u.comp(s), &src, f64::from(sign))),
    ))
}

/// `u^Q(x) = Q u(Q^T x)`.
pub fn pullback(u: &VectorField, q: &OrthogonalMap) -> Result<VectorField> {
    if q.as_signed_permutation().is_some() {
        return pullback_exact(u, q);
    }
    require_interpolating(q)?;
    let g = *u.grid();
    let s = u.spectra();
    let (idx, nodes) = rotated_nodes(&g, q);
    let v = Interpolator::new(g).evaluate_many(&s, &nodes);
    let m = q.matrix();
    let comps = [0, 1, 2].map(|r| {
        let values: Vec<f64> = (0..idx.len())
            .map(|i| m[(r, 0)] * v[0][i] + m[(r, 1)] * v[1][i] + m[(r, 2)] * v[2][i])
            .collect();
        ScalarField::from_samples_unchecked(g, scatter(g.len(), &idx, &values))
    });
    Ok(VectorField::from_array(comps))
}

/// `||u - sign u^Q|| / max(||u||, floor)` in discrete L^2.
pub fn symmetry_residual(u: &VectorField, q: &OrthogonalMap, sign: f64) -> Result<f64> {
    let uq = pullback(u, q)?;
    let diff = u.axpy(-sign, &uq).norm_l2();
    Ok(diff / u.norm_l2().max(RESIDUAL_FLOOR))
}

/// Largest residual over the six permutations (all with sign +1).
pub fn permutation_residual_max(u: &VectorField) -> f64 {
    crate::symmetry::permutation_group()
        .iter()
        .map(|p| symmetry_residual(u, &p.to_map(), 1.0).expect("permutations remap exactly"))
        .fold(0.0, f64::max)
}
