//! Finite-element study of the mixed Dirichlet-Neumann (Zaremba) Laplace
//! eigenvalue problem on eccentric annuli.

pub mod checks;
pub mod eigensolver;
pub mod error;
pub mod export;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod radial_oracle;
pub mod shape;
pub mod spectral;
pub mod sweep;
pub mod symmetrize;
pub mod torsion;

pub use error::{Error, Result};
pub use fem::{Field, ProblemKind};
pub use geometry::{AnnularDomain, Point, Polarizer};
pub use mesh::{Mesh, Resolution};
