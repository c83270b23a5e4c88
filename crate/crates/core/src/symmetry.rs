//! The finite symmetry layer: the six coordinate permutations, general
//! orthogonal maps, and mirror reflections.
//!
//! Permutation matrices are kept as exact integer tables with their parity
//! stored alongside, so nothing downstream depends on a floating point
//! determinant. General orthogonal maps are validated once, at construction.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Tolerance used to accept a real matrix as orthogonal.
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

/// Names of the six elements of the permutation group on three letters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PermName {
    I,
    P12,
    P13,
    P23,
    Pf,
    Pb,
}

impl PermName {
    pub const ALL: [PermName; 6] = [
        PermName::I,
        PermName::P12,
        PermName::P13,
        PermName::P23,
        PermName::Pf,
        PermName::Pb,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PermName::I => "I",
            PermName::P12 => "P12",
            PermName::P13 => "P13",
            PermName::P23 => "P23",
            PermName::Pf => "Pf",
            PermName::Pb => "Pb",
        }
    }
}

impl fmt::Display for PermName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PermName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PermName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::input(format!("unknown permutation name {s:?}")))
    }
}

/// A 3x3 permutation matrix with exact entries and stored parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PermutationElement {
    name: PermName,
    matrix: [[i8; 3]; 3],
    parity: i8,
}

impl PermutationElement {
    pub fn new(name: PermName) -> Self {
        let (matrix, parity) = match name {
            PermName::I => ([[1, 0, 0], [0, 1, 0], [0, 0, 1]], 1),
            PermName::P12 => ([[0, 1, 0], [1, 0, 0], [0, 0, 1]], -1),
            PermName::P13 => ([[0, 0, 1], [0, 1, 0], [1, 0, 0]], -1),
            PermName::P23 => ([[1, 0, 0], [0, 0, 1], [0, 1, 0]], -1),
            PermName::Pf => ([[0, 0, 1], [1, 0, 0], [0, 1, 0]], 1),
            PermName::Pb => ([[0, 1, 0], [0, 0, 1], [1, 0, 0]], 1),
        };
        PermutationElement {
            name,
            matrix,
            parity,
        }
    }

    pub fn name(&self) -> PermName {
        self.name
    }

    pub fn matrix(&self) -> [[i8; 3]; 3] {
        self.matrix
    }

    /// Determinant of the matrix, +1 or -1.
    pub fn parity(&self) -> i8 {
        self.parity
    }

    /// Column index of the single 1 in each row: `(P x)_r = x[image[r]]`.
    pub fn row_sources(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for (r, row) in self.matrix.iter().enumerate() {
            out[r] = row.iter().position(|&v| v == 1).expect("permutation row");
        }
        out
    }

    /// Exact matrix product `self * other`.
    pub fn compose(&self, other: &PermutationElement) -> PermutationElement {
        let mut m = [[0i8; 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, entry) in row.iter_mut().enumerate() {
                *entry = (0..3).map(|k| self.matrix[r][k] * other.matrix[k][c]).sum();
            }
        }
        let name = PermName::ALL
            .into_iter()
            .find(|&n| PermutationElement::new(n).matrix == m)
            .expect("group is closed under composition");
        PermutationElement::new(name)
    }

    pub fn transpose(&self) -> PermutationElement {
        let mut m = [[0i8; 3]; 3];
        for (r, row) in self.matrix.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                m[c][r] = v;
            }
        }
        let name = PermName::ALL
            .into_iter()
            .find(|&n| PermutationElement::new(n).matrix == m)
            .expect("inverse of a permutation is a permutation");
        PermutationElement::new(name)
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let s = self.row_sources();
        [x[s[0]], x[s[1]], x[s[2]]]
    }

    pub fn to_map(&self) -> OrthogonalMap {
        let m = Matrix3::from_fn(|r, c| f64::from(self.matrix[r][c]));
        OrthogonalMap {
            matrix: m,
            det: f64::from(self.parity),
            interpolating: false,
        }
    }
}

/// Look up a group element by its name ("I", "P12", "P13", "P23", "Pf", "Pb").
pub fn permutation(name: &str) -> Result<PermutationElement> {
    Ok(PermutationElement::new(name.parse()?))
}

/// All six elements in a fixed order.
pub fn permutation_group() -> [PermutationElement; 6] {
    PermName::ALL.map(PermutationElement::new)
}

/// A validated real orthogonal 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrthogonalMap {
    matrix: Matrix3<f64>,
    det: f64,
    interpolating: bool,
}

impl OrthogonalMap {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("orthogonal map has non-finite entries"));
        }
        let defect = (matrix.transpose() * matrix - Matrix3::identity()).abs().max();
        if defect > ORTHOGONALITY_TOL {
            return Err(Error::input(format!(
                "matrix is not orthogonal: max |Q^T Q - I| = {defect:e}"
            )));
        }
        let det = matrix.determinant();
        let det = if (det - 1.0).abs() <= ORTHOGONALITY_TOL {
            1.0
        } else if (det + 1.0).abs() <= ORTHOGONALITY_TOL {
            -1.0
        } else {
            return Err(Error::input(format!("determinant {det} is not +-1")));
        };
        Ok(OrthogonalMap {
            matrix,
            det,
            interpolating: false,
        })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn identity() -> Self {
        PermutationElement::new(PermName::I).to_map()
    }

    /// Mark the map as allowed to resample fields by trigonometric interpolation.
    pub fn interpolating(mut self) -> Self {
        self.interpolating = true;
        self
    }

    pub fn is_interpolating(&self) -> bool {
        self.interpolating
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn transpose(&self) -> OrthogonalMap {
        OrthogonalMap {
            matrix: self.matrix.transpose(),
            det: self.det,
            interpolating: self.interpolating,
        }
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let y = self.matrix * Vector3::from(x);
        [y[0], y[1], y[2]]
    }

    /// If every row holds a single +-1 (to 1e-14) and zeros elsewhere, return
    /// the signed permutation as `(source column, sign)` per row.
    pub fn as_signed_permutation(&self) -> Option<[(usize, i8); 3]> {
        let mut out = [(0usize, 0i8); 3];
        let mut used = [false; 3];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut found = None;
            for c in 0..3 {
                let v = self.matrix[(r, c)];
                if (v.abs() - 1.0).abs() <= 1e-14 {
                    if found.is_some() {
                        return None;
                    }
                    found = Some((c, if v > 0.0 { 1 } else { -1 }));
                } else if v.abs() > 1e-14 {
                    return None;
                }
            }
            let (c, s) = found?;
            if used[c] {
                return None;
            }
            used[c] = true;
            *slot = (c, s);
        }
        Some(out)
    }
}

impl From<PermutationElement> for OrthogonalMap {
    fn from(p: PermutationElement) -> Self {
        p.to_map()
    }
}

/// Matrix product `a * b`. The result is interpolating if either factor is.
pub fn compose(a: &OrthogonalMap, b: &OrthogonalMap) -> OrthogonalMap {
    OrthogonalMap {
        matrix: a.matrix * b.matrix,
        det: a.det * b.det,
        interpolating: a.interpolating || b.interpolating,
    }
}

/// Reflection `I - 2 v v^T` through the plane orthogonal to a unit vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorMatrix {
    axis: Vector3<f64>,
    matrix: Matrix3<f64>,
}

impl MirrorMatrix {
    pub fn axis(&self) -> [f64; 3] {
        [self.axis[0], self.axis[1], self.axis[2]]
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// The reflection as an orthogonal map. Coordinate reflections resample
    /// exactly; any other axis is flagged interpolating.
    pub fn to_map(&self) -> OrthogonalMap {
        let map = OrthogonalMap {
            matrix: self.matrix,
            det: -1.0,
            interpolating: false,
        };
        if map.as_signed_permutation().is_some() {
            map
        } else {
            map.interpolating()
        }
    }
}

/// Build the mirror matrix for a unit axis. Non-unit input is rejected.
pub fn mirror(v: [f64; 3]) -> Result<MirrorMatrix> {
    let axis = Vector3::from(v);
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > ORTHOGONALITY_TOL {
        return Err(Error::input(format!("mirror axis must be a unit vector, |v| = {norm}")));
    }
    let matrix = Matrix3::identity() - 2.0 * axis * axis.transpose();
    Ok(MirrorMatrix { axis, matrix })
}

/// The unit vector (1,1,1)/sqrt(3).
pub fn sigma_unit() -> [f64; 3] {
    let s = 1.0 / 3f64.sqrt();
    [s, s, s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_elements_have_expected_matrices() {
        let p12 = permutation("P12").unwrap();
        assert_eq!(p12.matrix(), [[0, 1, 0], [1, 0, 0], [0, 0, 1]]);
        assert_eq!(p12.parity(), -1);
        let id = permutation("I").unwrap();
        assert_eq!(id.matrix(), [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        assert_eq!(id.parity(), 1);
        let pb = permutation("Pb").unwrap();
        assert_eq!(pb.matrix(), [[0, 1, 0], [0, 0, 1], [1, 0, 0]]);
        assert_eq!(pb.parity(), 1);
        assert!(permutation("P21").is_err());
    }

    #[test]
    fn parity_is_the_determinant() {
        for p in permutation_group() {
            let det = p.to_map().matrix().determinant();
            assert_eq!(det, f64::from(p.parity()));
            for row in p.matrix() {
                assert_eq!(row.iter().filter(|&&v| v == 1).count(), 1);
            }
        }
    }

    #[test]
    fn generators_compose_to_the_rotations() {
        let p12 = PermutationElement::new(PermName::P12);
        let p13 = PermutationElement::new(PermName::P13);
        let pb = PermutationElement::new(PermName::Pb);
        assert_eq!(p12.compose(&p13).name(), PermName::Pb);
        assert_eq!(pb.compose(&pb).name(), PermName::Pf);

        let m = compose(&p12.to_map(), &p13.to_map());
        assert_eq!(m.matrix(), pb.to_map().matrix());
        assert_eq!(m.det(), 1.0);
    }

    #[test]
    fn closure_and_parity_table() {
        let g = permutation_group();
        for a in &g {
            for b in &g {
                let c = a.compose(b);
                assert_eq!(c.parity(), a.parity() * b.parity());
            }
        }
    }

    #[test]
    fn two_swaps_generate_the_group() {
        let gens = [
            PermutationElement::new(PermName::P12),
            PermutationElement::new(PermName::P13),
        ];
        let mut seen = vec![PermutationElement::new(PermName::I)];
        loop {
            let mut grew = false;
            for a in seen.clone() {
                for g in &gens {
                    let c = a.compose(g);
                    if !seen.contains(&c) {
                        seen.push(c);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn orthogonal_map_validation() {
        let q = OrthogonalMap::from_rows([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(q.det(), -1.0);
        assert!(OrthogonalMap::from_rows([[1.0, 0.1, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        let c = compose(&q, &q.transpose());
        assert!((c.matrix() - Matrix3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn mirror_examples() {
        let m = mirror([0.0, 0.0, 1.0]).unwrap();
        assert_eq!(*m.matrix(), Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0)));
        assert!(m.to_map().as_signed_permutation().is_some());

        let s = mirror(sigma_unit()).unwrap();
        let expect = Matrix3::from_fn(|r, c| if r == c { 1.0 / 3.0 } else { -2.0 / 3.0 });
        assert!((s.matrix() - expect).abs().max() < 1e-15);
        assert!(s.to_map().is_interpolating());
        assert!((s.matrix() * s.matrix() - Matrix3::identity()).abs().max() < 1e-14);

        assert!(mirror([1.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn signed_permutation_detection() {
        let inv = OrthogonalMap::from_rows([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]).unwrap();
        assert_eq!(inv.as_signed_permutation(), Some([(0, -1), (1, -1), (2, -1)]));
        let pf = PermutationElement::new(PermName::Pf).to_map();
        assert_eq!(pf.as_signed_permutation(), Some([(2, 1), (0, 1), (1, 1)]));
    }
}
