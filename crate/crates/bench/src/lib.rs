//! Shared fixtures for the pipeline benchmarks.

use vecfield::field::{sample_field_grid, GridSpec};
use vecfield::geometry::shapes;
use vecfield::{FieldGrid, FieldKind, FieldOracle};

/// Oracle for one of the procedural shapes in [`shapes::NAMES`].
pub fn oracle(name: &str) -> FieldOracle {
    let mesh = shapes::by_name(name).unwrap_or_else(|| panic!("unknown shape {name}"));
    FieldOracle::new(mesh).expect("procedural shapes are non-empty")
}

/// Exact field grid of a procedural shape over `[-1, 1]^3`.
pub fn exact_grid(name: &str, kind: FieldKind, res: usize) -> FieldGrid {
    let spec = GridSpec::cube(res).expect("resolution >= 2");
    sample_field_grid(&oracle(name), kind, &spec).expect("kind valid for shape")
}
