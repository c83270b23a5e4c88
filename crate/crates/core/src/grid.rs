use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic cubic lattice on the centered box `[-L/2, L/2)^3`.
///
/// Samples are stored x-fastest: `idx = i + n*(j + n*k)`. Spectral arrays use
/// the same layout in FFT order, so index `i` along an axis carries the
/// integer frequency returned by [`Grid::freq`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::input(format!("grid size must be even and at least 4, got {n}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::input(format!("box length must be positive, got {length}")));
        }
        Ok(Grid { n, length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    /// Coordinate of node `j` along one axis.
    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.spacing()
    }

    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        [self.node(i), self.node(j), self.node(k)]
    }

    /// Index of the node at the origin.
    pub fn origin_index(&self) -> usize {
        let c = self.n / 2;
        self.index(c, c, c)
    }

    /// Signed integer frequency of FFT index `i`, in `[-n/2, n/2)`.
    pub fn freq(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT index holding signed frequency `m`, if it is representable.
    pub fn freq_index(&self, m: i64) -> Option<usize> {
        let n = self.n as i64;
        if m < -n / 2 || m >= n / 2 {
            return None;
        }
        Some(m.rem_euclid(n) as usize)
    }

    pub fn freq3(&self, idx: usize) -> [i64; 3] {
        let [i, j, k] = self.unravel(idx);
        [self.freq(i), self.freq(j), self.freq(k)]
    }

    pub fn is_nyquist(&self, m: i64) -> bool {
        m == -(self.n as i64) / 2
    }

    /// Physical wavenumber `2 pi m / L` used by derivative multipliers.
    pub fn wavenumber(&self, m: i64) -> f64 {
        2.0 * std::f64::consts::PI * m as f64 / self.length
    }

    /// `4 pi^2 |xi|^2` for the mode at `idx`.
    pub fn laplacian_symbol(&self, idx: usize) -> f64 {
        let m = self.freq3(idx);
        m.iter().map(|&mi| self.wavenumber(mi).powi(2)).sum()
    }

    /// The same lattice with `factor` times as many points per axis.
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        Grid::new(self.n * factor, self.length)
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: [f64; 3]) -> bool {
        let half = 0.5 * self.length;
        x.iter().all(|v| v.is_finite() && v.abs() <= half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(7, 1.0).is_err());
        assert!(Grid::new(2, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, f64::NAN).is_err());
    }

    #[test]
    fn nodes_are_centered_and_inversion_closed() {
        let g = Grid::new(8, 4.0).unwrap();
        assert_eq!(g.node(0), -2.0);
        assert_eq!(g.node(4), 0.0);
        assert_eq!(g.point(g.origin_index()), [0.0, 0.0, 0.0]);
        // -x_j is the node (n - j) mod n under periodic wrap
        for j in 1..8 {
            assert_eq!(-g.node(j), g.node(8 - j));
        }
    }

    #[test]
    fn frequency_layout() {
        let g = Grid::new(8, 1.0).unwrap();
        let f: Vec<i64> = (0..8).map(|i| g.freq(i)).collect();
        assert_eq!(f, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for i in 0..8 {
            assert_eq!(g.freq_index(g.freq(i)), Some(i));
        }
        assert_eq!(g.freq_index(4), None);
        assert!(g.is_nyquist(-4));
    }

    #[test]
    fn unravel_inverts_index() {
        let g = Grid::new(6, 1.0).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.unravel(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
    }
}
