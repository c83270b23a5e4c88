//! Membership, projection and reconstruction for the constraint space of
//! first vorticity components.
//!
//! A mean-zero `f` belongs to the space when `f(x) = -f(P23 x)` and
//! `m1 c(m) - m2 c(P12 m) - m3 c(P13 m) = 0` for every frequency `m`. Both
//! conditions only couple a frequency to its orbit under the permutation
//! group, so the orthogonal projection splits into independent orbit-sized
//! problems. Each orbit carries at most six unknowns and its constraint rows
//! have real coefficients, so one orthonormal row basis per orbit serves real
//! and imaginary parts alike and keeps the spectrum Hermitian.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::pullback::{permutation_residual_max, scalar_pullback};
use crate::spectral::{curl, derivative_wavenumbers, divergence};
use crate::symmetry::{PermName, PermutationElement};

/// Default tolerance for accepting a field as a constraint-space member.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Tolerance on symmetry and divergence accepted by [`extract_w1`].
pub const VELOCITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual {
    /// `||f + f o P23|| / ||f||` in discrete L^2.
    pub physical: f64,
    /// Relative l^2 size of `m1 c(m) - m2 c(P12 m) - m3 c(P13 m)`, measured
    /// against `(sum |m|^2 |c(m)|^2)^(1/2)`. Nyquist content counts in full.
    pub fourier: f64,
}

impl ConstraintResidual {
    pub fn max(&self) -> f64 {
        self.physical.max(self.fourier)
    }
}

fn perm_freq(p: PermName, m: [i64; 3]) -> [i64; 3] {
    let s = PermutationElement::new(p).row_sources();
    [m[s[0]], m[s[1]], m[s[2]]]
}

fn has_nyquist(grid: &Grid, m: [i64; 3]) -> bool {
    m.iter().any(|&v| grid.is_nyquist(v))
}

fn index_of(grid: &Grid, m: [i64; 3]) -> usize {
    let i = m.map(|v| grid.freq_index(v).expect("orbit stays on the grid"));
    grid.index(i[0], i[1], i[2])
}

pub fn constraint_residual(f: &ScalarField) -> ConstraintResidual {
    let g = *f.grid();
    let p23 = PermutationElement::new(PermName::P23).to_map();
    let swapped = scalar_pullback(f, &p23).expect("permutations remap exactly");
    let norm = f.norm_l2();
    let physical = if norm > 0.0 {
        f.add(&swapped).norm_l2() / norm
    } else {
        0.0
    };

    let c = f.spectral();
    let mut num = 0.0;
    let mut den = 0.0;
    for (idx, &cm) in c.iter().enumerate() {
        let m = g.freq3(idx);
        let m2: f64 = m.iter().map(|&v| (v * v) as f64).sum();
        den += m2 * cm.norm_sqr();
        if has_nyquist(&g, m) {
            num += m2 * cm.norm_sqr();
            continue;
        }
        let r = cm * m[0] as f64
            - c[index_of(&g, perm_freq(PermName::P12, m))] * m[1] as f64
            - c[index_of(&g, perm_freq(PermName::P13, m))] * m[2] as f64;
        num += r.norm_sqr();
    }
    let fourier = if den > 0.0 { (num / den).sqrt() } else { 0.0 };
    ConstraintResidual { physical, fourier }
}

/// One group orbit of frequencies and an orthonormal basis of its constraint rows.
#[derive(Debug)]
struct Orbit {
    indices: Vec<usize>,
    basis: Vec<Vec<f64>>,
}

#[derive(Debug)]
struct OrbitTable {
    orbits: Vec<Orbit>,
    nyquist: Vec<usize>,
}

static TABLES: Lazy<Mutex<HashMap<usize, Arc<OrbitTable>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn orbit_table(grid: &Grid) -> Arc<OrbitTable> {
    let mut cache = TABLES.lock().expect("orbit cache poisoned");
    cache
        .entry(grid.n())
        .or_insert_with(|| Arc::new(build_table(grid)))
        .clone()
}

fn orthonormal_rows(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for r in rows {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn == 0.0 {
            continue;
        }
        let mut v = r.clone();
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, y)| *x -= d * y);
            }
        }
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn > 1e-10 * rn {
            v.iter_mut().for_each(|x| *x /= vn);
            basis.push(v);
        }
    }
    basis
}

fn build_table(grid: &Grid) -> OrbitTable {
    let mut seen = vec![false; grid.len()];
    let mut orbits = Vec::new();
    let mut nyquist = Vec::new();
    for idx in 0..grid.len() {
        if seen[idx] {
            continue;
        }
        let m = grid.freq3(idx);
        if has_nyquist(grid, m) {
            seen[idx] = true;
            nyquist.push(idx);
            continue;
        }
        let mut pts: Vec<[i64; 3]> = Vec::with_capacity(6);
        for p in PermName::ALL {
            let q = perm_freq(p, m);
            if !pts.contains(&q) {
                pts.push(q);
            }
        }
        let pos = |q: [i64; 3]| pts.iter().position(|&x| x == q).expect("orbit is closed");
        let k = pts.len();
        let mut rows = Vec::with_capacity(2 * k);
        for &p in &pts {
            let mut r = vec![0.0; k];
            r[pos(p)] += 1.0;
            r[pos(perm_freq(PermName::P23, p))] += 1.0;
            rows.push(r);
            let mut r = vec![0.0; k];
            r[pos(p)] += p[0] as f64;
            r[pos(perm_freq(PermName::P12, p))] -= p[1] as f64;
            r[pos(perm_freq(PermName::P13, p))] -= p[2] as f64;
            rows.push(r);
        }
        let indices: Vec<usize> = pts.iter().map(|&q| index_of(grid, q)).collect();
        for &i in &indices {
            seen[i] = true;
        }
        orbits.push(Orbit {
            indices,
            basis: orthonormal_rows(&rows),
        });
    }
    OrbitTable { orbits, nyquist }
}

/// Project coefficients in place onto the constraint space.
pub fn project_coeffs(grid: &Grid, coeffs: &mut [Complex64]) {
    let table = orbit_table(grid);
    for &i in &table.nyquist {
        coeffs[i] = Complex64::default();
    }
    let mut x = [Complex64::default(); 6];
    for orbit in &table.orbits {
        let k = orbit.indices.len();
        for (slot, &i) in x.iter_mut().zip(&orbit.indices) {
            *slot = coeffs[i];
        }
        for q in &orbit.basis {
            let d: Complex64 = q.iter().zip(&x[..k]).map(|(a, b)| b * a).sum();
            for (xv, qv) in x[..k].iter_mut().zip(q) {
                *xv -= d * qv;
            }
        }
        for (&i, v) in orbit.indices.iter().zip(&x[..k]) {
            coeffs[i] = *v;
        }
    }
}

/// L^2-orthogonal projection onto the discrete constraint space.
pub fn project_constraint(f: &ScalarField) -> ScalarField {
    let mut c = f.spectral().to_vec();
    project_coeffs(f.grid(), &mut c);
    ScalarField::from_spectral(*f.grid(), c)
}

/// `omega = (w1, -w1 o P12, -w1 o P13)` without a membership check.
pub fn reconstruct_vorticity_unchecked(w1: &ScalarField) -> VectorField {
    let p12 = PermutationElement::new(PermName::P12).to_map();
    let p13 = PermutationElement::new(PermName::P13).to_map();
    let w2 = scalar_pullback(w1, &p12).expect("permutations remap exactly").scaled(-1.0);
    let w3 = scalar_pullback(w1, &p13).expect("permutations remap exactly").scaled(-1.0);
    VectorField::from_array([w1.clone(), w2, w3])
}

pub(crate) fn require_member(w1: &ScalarField, tol: f64) -> Result<()> {
    let r = constraint_residual(w1);
    if r.max() > tol {
        return Err(Error::input(format!(
            "field is not in the constraint space (physical {:e}, fourier {:e}, tolerance {:e})",
            r.physical, r.fourier, tol
        )));
    }
    Ok(())
}

/// Full vorticity from its first component, rejecting non-members.
pub fn reconstruct_vorticity(w1: &ScalarField, tol: f64) -> Result<VectorField> {
    require_member(w1, tol)?;
    Ok(reconstruct_vorticity_unchecked(w1))
}

/// `(L^3 sum |k|^2 |u_hat|^2)^(1/2)`, the L^2 norm of the velocity gradient.
fn gradient_norm(u: &VectorField) -> f64 {
    let g = *u.grid();
    let k = derivative_wavenumbers(&g);
    let n = g.n();
    let s = u.spectra();
    let mut total = 0.0;
    for idx in 0..g.len() {
        let k2 = k[idx % n].powi(2) + k[(idx / n) % n].powi(2) + k[idx / (n * n)].powi(2);
        total += k2 * s.iter().map(|c| c[idx].norm_sqr()).sum::<f64>();
    }
    (total * g.volume()).sqrt()
}

/// First vorticity component of a symmetric divergence-free velocity.
pub fn extract_w1(u: &VectorField) -> Result<ScalarField> {
    let scale = gradient_norm(u);
    if scale == 0.0 {
        return Ok(ScalarField::zeros(*u.grid()));
    }
    let div = divergence(u).norm_l2() / scale;
    if div > VELOCITY_TOL {
        return Err(Error::input(format!("velocity is not divergence-free (relative {div:e})")));
    }
    let sym = permutation_residual_max(u);
    if sym > VELOCITY_TOL {
        return Err(Error::input(format!("velocity is not permutation symmetric (residual {sym:e})")));
    }
    Ok(curl(u).into_comps()[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_field, random_symmetric_velocity};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(12, 2.0).unwrap()
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let r = constraint_residual(&ScalarField::zeros(grid()));
        assert_eq!((r.physical, r.fourier), (0.0, 0.0));
    }

    #[test]
    fn curl_component_of_symmetric_velocity_is_a_member() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_symmetric_velocity(grid(), 4, &mut rng);
        let w1 = extract_w1(&u).unwrap();
        let r = constraint_residual(&w1);
        assert!(r.max() < 1e-12, "{r:?}");
        let back = project_constraint(&w1);
        assert!(back.sub(&w1).norm_l2() <= 1e-13 * w1.norm_l2());
    }

    #[test]
    fn radial_gaussian_is_not_a_member() {
        let f = ScalarField::from_fn(grid(), |x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp());
        assert!(constraint_residual(&f).physical > 1.0);
    }

    #[test]
    fn orbit_sizes() {
        let g = Grid::new(8, 1.0).unwrap();
        let t = build_table(&g);
        let total: usize = t.orbits.iter().map(|o| o.indices.len()).sum::<usize>() + t.nyquist.len();
        assert_eq!(total, g.len());
        assert!(t.orbits.iter().all(|o| (1..=6).contains(&o.indices.len())));
    }

    #[test]
    fn projection_kills_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(grid(), 5, &mut rng);
        let p = project_constraint(&f);
        let r = constraint_residual(&p);
        assert!(r.max() < 1e-12, "{r:?}");
        assert!(reconstruct_vorticity(&f, MEMBERSHIP_TOL).is_err());
        assert!(reconstruct_vorticity(&p, MEMBERSHIP_TOL).is_ok());
    }

    #[test]
    fn reconstruction_is_antisymmetric_under_generators() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w1 = project_constraint(&random_field(grid(), 5, &mut rng));
        let w = reconstruct_vorticity(&w1, MEMBERSHIP_TOL).unwrap();
        for p in [PermName::P12, PermName::P13] {
            let q = PermutationElement::new(p).to_map();
            let r = crate::pullback::symmetry_residual(&w, &q, -1.0).unwrap();
            assert!(r < 1e-14);
        }
        assert!(divergence(&w).norm_l2() < 1e-10 * w.norm_l2() * 10.0);
    }

    #[test]
    fn extract_rejects_asymmetric_velocity() {
        let g = grid();
        let u = VectorField::from_fn(g, |x| {
            let t = 2.0 * std::f64::consts::PI * x[1] / g.length();
            [t.sin(), 0.0, 0.0]
        });
        assert!(extract_w1(&u).is_err());
    }
}
