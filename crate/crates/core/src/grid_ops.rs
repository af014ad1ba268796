//! Discrete operators on vertex grids: cell divergence, surface-cell
//! detection, gradients.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{CellField, FieldGrid, FieldKind, GridSpec};
use crate::geometry::Vec3;

/// Cells with divergence at or below this value are surface cells.
pub const DEFAULT_SURFACE_THRESHOLD: f64 = -1.5;

/// Vector values at the vertices of a grid, in `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    pub spec: GridSpec,
    pub values: Vec<Vec3>,
}

impl VectorGrid {
    pub fn new(spec: GridSpec, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::DimensionMismatch {
                expected: spec.len(),
                got: values.len(),
            });
        }
        Ok(Self { spec, values })
    }

    pub fn from_field(grid: &FieldGrid) -> Result<Self> {
        Ok(Self {
            spec: grid.spec,
            values: grid.vectors()?,
        })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.values[self.spec.index(i, j, k)]
    }

    /// Stores the vectors as a field grid of the given vector kind.
    pub fn to_field(&self, kind: FieldKind) -> Result<FieldGrid> {
        if !kind.is_vector() {
            return Err(Error::FieldType(format!("{kind} is not a vector kind")));
        }
        let data = self
            .values
            .iter()
            .flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])
            .collect();
        FieldGrid::new(kind, self.spec, data)
    }
}

/// Per-cell divergence of a vector grid.
pub fn divergence(grid: &FieldGrid) -> Result<CellField> {
    Ok(divergence_of(&VectorGrid::from_field(grid)?))
}

/// Per-cell divergence: for each axis, the mean over the cell's four edges
/// along that axis of the component difference (far end minus near end),
/// summed over axes. Not divided by the spacing.
pub fn divergence_of(grid: &VectorGrid) -> CellField {
    let cells = grid.spec.cells();
    let [cx, cy, _] = cells.dims;
    let mut values = vec![0.0; cells.len()];
    values
        .par_chunks_mut(cx * cy)
        .enumerate()
        .for_each(|(k, out)| {
            for j in 0..cy {
                for i in 0..cx {
                    let c = |di, dj, dk| grid.at(i + di, j + dj, k + dk);
                    let v = [
                        c(0, 0, 0),
                        c(1, 0, 0),
                        c(1, 1, 0),
                        c(0, 1, 0),
                        c(0, 0, 1),
                        c(1, 0, 1),
                        c(1, 1, 1),
                        c(0, 1, 1),
                    ];
                    let dx = (v[1].x - v[0].x)
                        + (v[2].x - v[3].x)
                        + (v[5].x - v[4].x)
                        + (v[6].x - v[7].x);
                    let dy = (v[3].y - v[0].y)
                        + (v[2].y - v[1].y)
                        + (v[7].y - v[4].y)
                        + (v[6].y - v[5].y);
                    let dz = (v[4].z - v[0].z)
                        + (v[5].z - v[1].z)
                        + (v[6].z - v[2].z)
                        + (v[7].z - v[3].z);
                    out[i + cx * j] = 0.25 * (dx + dy + dz);
                }
            }
        });
    CellField {
        spec: cells,
        values,
    }
}

/// One flag per cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellMask {
    pub dims: [usize; 3],
    pub cells: Vec<bool>,
}

impl CellMask {
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.cells[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    /// Linear indices of the set cells, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| i)
            .collect()
    }

    /// Run-length text: a `dims` line, then `value:count` runs in x-fastest order.
    pub fn to_rle(&self) -> String {
        let mut s = format!("dims {} {} {}\n", self.dims[0], self.dims[1], self.dims[2]);
        let mut runs = Vec::new();
        let mut iter = self.cells.iter().copied();
        if let Some(mut cur) = iter.next() {
            let mut n = 1usize;
            for c in iter {
                if c == cur {
                    n += 1;
                } else {
                    runs.push((cur, n));
                    cur = c;
                    n = 1;
                }
            }
            runs.push((cur, n));
        }
        for (idx, (v, n)) in runs.iter().enumerate() {
            let sep = if idx == 0 { "" } else { " " };
            let _ = write!(s, "{sep}{}:{n}", u8::from(*v));
        }
        s.push('\n');
        s
    }

    pub fn from_rle(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let head: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("dims "))
            .ok_or_else(|| Error::Parse("missing dims line".into()))?
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("bad dimension {t:?}")))
            })
            .collect::<Result<_>>()?;
        if head.len() != 3 {
            return Err(Error::Parse("dims line needs three values".into()));
        }
        let mut cells = Vec::with_capacity(head.iter().product());
        for run in lines.flat_map(str::split_whitespace) {
            let (v, n) = run
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad run {run:?}")))?;
            let n: usize = n
                .parse()
                .map_err(|_| Error::Parse(format!("bad run {run:?}")))?;
            cells.extend(std::iter::repeat_n(v == "1", n));
        }
        if cells.len() != head.iter().product::<usize>() {
            return Err(Error::DimensionMismatch {
                expected: head.iter().product(),
                got: cells.len(),
            });
        }
        Ok(Self {
            dims: [head[0], head[1], head[2]],
            cells,
        })
    }
}

/// Cells whose divergence is at or below `threshold`.
pub fn surface_cells(div: &CellField, threshold: f64) -> CellMask {
    CellMask {
        dims: div.spec.dims,
        cells: div.values.iter().map(|&d| d <= threshold).collect(),
    }
}

/// Gradient of a scalar grid: central differences inside, one-sided at the
/// boundary, divided by the spacing.
pub fn gradient(grid: &FieldGrid) -> Result<VectorGrid> {
    let values = grid.scalars()?;
    let spec = grid.spec;
    let [nx, ny, nz] = spec.dims;
    let mut out = vec![Vec3::zeros(); spec.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(k, slab)| {
            for j in 0..ny {
                for i in 0..nx {
                    let at = |i, j, k| values[spec.index(i, j, k)];
                    let ijk = [i, j, k];
                    let n = [nx, ny, nz];
                    let mut g = Vec3::zeros();
                    for a in 0..3 {
                        let step = |d: isize| {
                            let mut p = ijk;
                            p[a] = (p[a] as isize + d) as usize;
                            at(p[0], p[1], p[2])
                        };
                        let h = spec.spacing[a];
                        g[a] = if ijk[a] == 0 {
                            (step(1) - step(0)) / h
                        } else if ijk[a] == n[a] - 1 {
                            (step(0) - step(-1)) / h
                        } else {
                            (step(1) - step(-1)) / (2.0 * h)
                        };
                    }
                    slab[i + nx * j] = g;
                }
            }
        });
    Ok(VectorGrid { spec, values: out })
}

/// Unit vectors; zero (or near-zero) vectors stay zero.
pub fn normalize(grid: &VectorGrid) -> VectorGrid {
    let values = grid
        .values
        .iter()
        .map(|v| {
            let n = v.norm();
            if n > 1e-12 {
                v / n
            } else {
                Vec3::zeros()
            }
        })
        .collect();
    VectorGrid {
        spec: grid.spec,
        values,
    }
}

/// Direction field `normalize(-grad(udf))` of an unsigned distance grid.
pub fn vt_from_udf(grid: &FieldGrid) -> Result<VectorGrid> {
    if grid.kind != FieldKind::Udf {
        return Err(Error::FieldType(format!(
            "expected a udf grid, got {}",
            grid.kind
        )));
    }
    let mut g = gradient(grid)?;
    for v in &mut g.values {
        *v = -*v;
    }
    Ok(normalize(&g))
}
