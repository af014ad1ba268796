//! Vector-field implicit surfaces.
//!
//! The crate covers the full pipeline from a triangle mesh to a reconstructed
//! mesh:
//!
//! - [`geometry`]: triangle meshes, closest-point queries, surface sampling, mesh IO.
//! - [`field`]: exact vector transform (VT), distance-vector transform (DVT),
//!   signed and unsigned distance oracles, dense field grids.
//! - [`grid_ops`]: discrete divergence, surface-cell detection, gradients.
//! - [`mc`]: marching cubes on scalar grids and on vector grids.
//! - [`neural`]: a small auto-decoder trained on oracle samples.
//! - [`eval`]: Chamfer distance, noise and partial-view protocols, benchmarks.

pub mod error;
pub mod eval;
pub mod field;
pub mod geometry;
pub mod grid_ops;
pub mod mc;
pub mod neural;

pub use error::{Error, Result};
pub use field::{FieldGrid, FieldKind, FieldOracle, FieldValue};
pub use geometry::{SpatialIndex, TriMesh, Vec3};
