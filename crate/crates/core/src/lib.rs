//! Spectral toolkit for permutation-symmetric solutions of the 3D
//! incompressible Euler equations on a periodic box.

pub mod axisym;
pub mod biot_savart;
pub mod cli;
pub mod constraint;
pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod lambda;
pub mod nufft;
pub mod pullback;
pub mod random;
pub mod snapshot;
pub mod solver;
pub mod spectral;
pub mod symmetry;
pub mod verify;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::Grid;
