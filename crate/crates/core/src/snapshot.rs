//! Field snapshot files.
//!
//! Each file holds one scalar component: a TOML header, a line containing
//! only `---`, then `n^3` little-endian `f64` samples in x-fastest order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;

const SEPARATOR: &[u8] = b"---\n";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    /// What the samples represent, e.g. `w1`, `velocity`, `vorticity`.
    pub kind: String,
    /// Component index for vector fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<usize>,
    /// Symmetries the writer asserts, e.g. `permutation`, `constraint`.
    #[serde(default)]
    pub symmetry: Vec<String>,
    pub time: f64,
}

impl SnapshotHeader {
    pub fn new(grid: &Grid, kind: &str, time: f64) -> Self {
        SnapshotHeader {
            n: grid.n(),
            length: grid.length(),
            kind: kind.to_string(),
            component: None,
            symmetry: Vec::new(),
            time,
        }
    }

    pub fn with_symmetry(mut self, flags: &[&str]) -> Self {
        self.symmetry = flags.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.length)
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Snapshot { path: path.to_path_buf(), reason: reason.into() }
}

pub fn write_scalar(path: &Path, f: &ScalarField, header: &SnapshotHeader) -> Result<()> {
    if header.n != f.grid().n() || header.length != f.grid().length() {
        return Err(Error::input("snapshot header does not match the field grid"));
    }
    let text = toml::to_string(header).map_err(|e| malformed(path, e.to_string()))?;
    let mut buf = Vec::with_capacity(text.len() + 4 + 8 * f.samples().len());
    buf.extend_from_slice(text.as_bytes());
    buf.extend_from_slice(SEPARATOR);
    for v in f.samples() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Reads only the header of a snapshot.
pub fn read_header(path: &Path) -> Result<SnapshotHeader> {
    let bytes = fs::read(path)?;
    split(path, &bytes).map(|(h, _)| h)
}

fn split<'a>(path: &Path, bytes: &'a [u8]) -> Result<(SnapshotHeader, &'a [u8])> {
    let mut start = 0;
    loop {
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p + 1)
            .ok_or_else(|| malformed(path, "missing header separator"))?;
        if &bytes[start..end] == SEPARATOR {
            let text = std::str::from_utf8(&bytes[..start])
                .map_err(|_| malformed(path, "header is not UTF-8"))?;
            let header: SnapshotHeader =
                toml::from_str(text).map_err(|e| malformed(path, e.to_string()))?;
            return Ok((header, &bytes[end..]));
        }
        start = end;
    }
}

pub fn read_scalar(path: &Path) -> Result<(SnapshotHeader, ScalarField)> {
    let bytes = fs::read(path)?;
    let (header, body) = split(path, &bytes)?;
    let grid = header.grid().map_err(|e| malformed(path, e.to_string()))?;
    if body.len() != 8 * grid.len() {
        return Err(malformed(
            path,
            format!("expected {} samples, found {} bytes", grid.len(), body.len()),
        ));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let f = ScalarField::new(grid, samples).map_err(|e| malformed(path, e.to_string()))?;
    Ok((header, f))
}

/// Paths `<stem>.<a>.snap` used for the three components of a vector field.
pub fn component_paths(dir: &Path, stem: &str) -> [PathBuf; 3] {
    [0, 1, 2].map(|a| dir.join(format!("{stem}.{}.snap", a + 1)))
}

pub fn scalar_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.snap"))
}

pub fn write_vector(dir: &Path, stem: &str, u: &VectorField, header: &SnapshotHeader) -> Result<[PathBuf; 3]> {
    let paths = component_paths(dir, stem);
    for (a, p) in paths.iter().enumerate() {
        let h = SnapshotHeader { component: Some(a + 1), ..header.clone() };
        write_scalar(p, u.comp(a), &h)?;
    }
    Ok(paths)
}

pub fn read_vector(dir: &Path, stem: &str) -> Result<(SnapshotHeader, VectorField)> {
    let [a, b, c] = component_paths(dir, stem).map(|p| read_scalar(&p));
    let (h, a) = a?;
    let (_, b) = b?;
    let (_, c) = c?;
    let u = VectorField::new(a, b, c)?;
    Ok((SnapshotHeader { component: None, ..h }, u))
}
