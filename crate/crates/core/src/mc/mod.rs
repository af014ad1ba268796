//! Marching cubes on scalar grids and on vector grids.
//!
//! Both paths share one table-driven triangulator: the vector path first
//! turns the field into signed corner values, then triangulates like the
//! scalar path.

mod scalar;
pub mod tables;
mod vector;

use std::collections::HashMap;

use rayon::prelude::*;

pub use scalar::extract_mesh_scalar;
pub use vector::{
    cluster_cell, extract_mesh_vector, extract_mesh_vector_from, grow_orientation, CellClustering,
    Orientation, OrientationRule, SignedCornerGrid, VectorMcConfig, VectorMcOutput, VectorMcStats,
};

use crate::error::Result;
use crate::field::{FieldGrid, FieldKind, GridSpec};
use crate::geometry::TriMesh;
use crate::grid_ops::vt_from_udf;
use tables::{CORNERS, EDGES, EDGE_TABLE, TRI_TABLE};

/// Mesh extracted by [`extract_auto`], with vector-path statistics when the
/// vector path ran.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub mesh: TriMesh,
    pub stats: Option<VectorMcStats>,
}

/// Picks the extraction path from the grid kind: scalar MC at 0 for SDF,
/// vector MC for VT and DVT, vector MC on the negative UDF gradient for UDF.
pub fn extract_auto(grid: &FieldGrid, config: &VectorMcConfig) -> Result<Extraction> {
    let out = match grid.kind {
        FieldKind::Sdf => {
            return Ok(Extraction {
                mesh: extract_mesh_scalar(grid, 0.0)?,
                stats: None,
            })
        }
        FieldKind::Vt | FieldKind::Dvt => extract_mesh_vector(grid, config)?,
        FieldKind::Udf => extract_mesh_vector_from(&vt_from_udf(grid)?, FieldKind::Vt, config)?,
    };
    Ok(Extraction {
        mesh: out.mesh,
        stats: Some(out.stats),
    })
}

/// Vertex index of each corner of the cell whose lowest corner is `base`.
#[inline]
pub(crate) fn cell_corners(spec: &GridSpec, base: [usize; 3]) -> [usize; 8] {
    let mut out = [0; 8];
    for (c, off) in CORNERS.iter().enumerate() {
        out[c] = spec.index(base[0] + off[0], base[1] + off[1], base[2] + off[2]);
    }
    out
}

/// Case index: bit `c` set when corner `c` is below `iso`.
#[inline]
pub(crate) fn case_index(values: &[f64; 8], iso: f64) -> usize {
    let mut case = 0;
    for (c, v) in values.iter().enumerate() {
        if *v < iso {
            case |= 1 << c;
        }
    }
    case
}

/// Global key of the grid edge between corners `a` and `b` of a cell:
/// lower vertex index times three plus the axis.
#[inline]
fn edge_key(corners: &[usize; 8], e: usize) -> u64 {
    let [a, b] = EDGES[e];
    let (lo, axis) = {
        let (oa, ob) = (CORNERS[a], CORNERS[b]);
        let axis = (0..3)
            .find(|&k| oa[k] != ob[k])
            .expect("edge spans one axis");
        if oa[axis] < ob[axis] {
            (corners[a], axis)
        } else {
            (corners[b], axis)
        }
    };
    lo as u64 * 3 + axis as u64
}

/// Triangulates the given cells (by linear cell index, ascending) of the
/// vertex lattice `spec`.
///
/// `value(v)` is the corner value of vertex `v`; `crossing(a, b, va, vb)`
/// returns the parameter in `[0, 1]` of the surface point from `a` to `b`.
/// Output vertices are shared between cells and numbered in order of first
/// use, so the result does not depend on the thread schedule.
pub(crate) fn triangulate<V, C>(
    spec: &GridSpec,
    cells: &[usize],
    iso: f64,
    value: V,
    crossing: C,
) -> TriMesh
where
    V: Fn(usize) -> f64 + Sync,
    C: Fn(usize, usize, f64, f64) -> f64,
{
    let cell_spec = spec.cells();
    let chunks: Vec<Vec<[u64; 3]>> = cells
        .par_chunks(4096)
        .map(|chunk| {
            let mut tris = Vec::new();
            for &cell in chunk {
                let corners = cell_corners(spec, cell_spec.coords(cell));
                let vals = corners.map(&value);
                let case = case_index(&vals, iso);
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                for t in TRI_TABLE[case].chunks(3) {
                    if t[0] < 0 {
                        break;
                    }
                    // Table winding is clockwise seen from the low side; reversed here so
                    // normals point toward increasing values.
                    tris.push([
                        edge_key(&corners, t[0] as usize),
                        edge_key(&corners, t[2] as usize),
                        edge_key(&corners, t[1] as usize),
                    ]);
                }
            }
            tris
        })
        .collect();

    let strides = [1, spec.dims[0], spec.dims[0] * spec.dims[1]];
    let mut ids: HashMap<u64, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::with_capacity(chunks.iter().map(Vec::len).sum());
    for tri in chunks.into_iter().flatten() {
        let mut out = [0u32; 3];
        for (slot, key) in out.iter_mut().zip(tri) {
            *slot = *ids.entry(key).or_insert_with(|| {
                let a = (key / 3) as usize;
                let b = a + strides[(key % 3) as usize];
                let t = crossing(a, b, value(a), value(b)).clamp(0.0, 1.0);
                let [i, j, k] = spec.coords(a);
                let [i2, j2, k2] = spec.coords(b);
                let pa = spec.position(i, j, k);
                let pb = spec.position(i2, j2, k2);
                vertices.push(pa + (pb - pa) * t);
                (vertices.len() - 1) as u32
            });
        }
        triangles.push(out);
    }
    TriMesh {
        vertices,
        triangles,
    }
}

/// Linear interpolation parameter of `iso` between `va` and `vb`.
#[inline]
pub(crate) fn linear_crossing(iso: f64, va: f64, vb: f64) -> f64 {
    let d = vb - va;
    if d == 0.0 {
        0.5
    } else {
        (iso - va) / d
    }
}
