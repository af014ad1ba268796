use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{FieldKind, FieldOracle, PointFields};
use crate::error::{Error, Result};
use crate::geometry::{Aabb, Vec3};

const MAGIC: &[u8; 4] = b"VFG1";

/// Lattice geometry: vertex counts, position of vertex (0,0,0), and step per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub origin: Vec3,
    pub spacing: Vec3,
}

impl GridSpec {
    /// `res` vertices per axis spanning `bounds` corner to corner.
    pub fn from_bounds(bounds: &Aabb, res: [usize; 3]) -> Result<Self> {
        if res.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be >= 2 per axis, got {res:?}"
            )));
        }
        let ext = bounds.extent();
        if !(0..3).all(|a| ext[a] > 0.0 && ext[a].is_finite()) {
            return Err(Error::InvalidArgument(
                "grid bounds must have positive finite extent".into(),
            ));
        }
        let spacing = Vec3::new(
            ext.x / (res[0] - 1) as f64,
            ext.y / (res[1] - 1) as f64,
            ext.z / (res[2] - 1) as f64,
        );
        Ok(Self {
            dims: res,
            origin: bounds.min,
            spacing,
        })
    }

    /// `n^3` vertices over `[-1, 1]^3`.
    pub fn cube(n: usize) -> Result<Self> {
        Self::from_bounds(&Aabb::unit_cube(), [n; 3])
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin.x + i as f64 * self.spacing.x,
            self.origin.y + j as f64 * self.spacing.y,
            self.origin.z + k as f64 * self.spacing.z,
        )
    }

    /// Lattice of the cells between vertices, addressed by their lowest corner.
    pub fn cells(&self) -> GridSpec {
        GridSpec {
            dims: [self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1],
            origin: self.origin + self.spacing * 0.5,
            spacing: self.spacing,
        }
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::new(
            self.origin,
            self.position(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1),
        )
    }
}

/// Dense samples of one field kind at the vertices of a [`GridSpec`].
///
/// Values are stored as `f32`, x-fastest, vector components interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub kind: FieldKind,
    pub spec: GridSpec,
    data: Vec<f32>,
}

impl FieldGrid {
    pub fn new(kind: FieldKind, spec: GridSpec, data: Vec<f32>) -> Result<Self> {
        if spec.dims.iter().any(|&n| n < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be >= 2 per axis, got {:?}",
                spec.dims
            )));
        }
        let expected = spec.len() * kind.components();
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: data.len(),
            });
        }
        Ok(Self { kind, spec, data })
    }

    pub fn from_fn(kind: FieldKind, spec: GridSpec, f: impl Fn(Vec3) -> Vec<f64>) -> Result<Self> {
        let c = kind.components();
        let mut data = Vec::with_capacity(spec.len() * c);
        for k in 0..spec.dims[2] {
            for j in 0..spec.dims[1] {
                for i in 0..spec.dims[0] {
                    let v = f(spec.position(i, j, k));
                    if v.len() != c {
                        return Err(Error::DimensionMismatch {
                            expected: c,
                            got: v.len(),
                        });
                    }
                    data.extend(v.iter().map(|&x| x as f32));
                }
            }
        }
        Self::new(kind, spec, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.spec.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.spec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn scalar(&self, idx: usize) -> f64 {
        debug_assert!(!self.kind.is_vector());
        self.data[idx] as f64
    }

    #[inline]
    pub fn vector(&self, idx: usize) -> Vec3 {
        debug_assert!(self.kind.is_vector());
        let s = &self.data[3 * idx..3 * idx + 3];
        Vec3::new(s[0] as f64, s[1] as f64, s[2] as f64)
    }

    pub fn vectors(&self) -> Result<Vec<Vec3>> {
        if !self.kind.is_vector() {
            return Err(Error::FieldType(format!(
                "expected a vector grid, got {}",
                self.kind
            )));
        }
        Ok((0..self.len()).map(|i| self.vector(i)).collect())
    }

    pub fn scalars(&self) -> Result<Vec<f64>> {
        if self.kind.is_vector() {
            return Err(Error::FieldType(format!(
                "expected a scalar grid, got {}",
                self.kind
            )));
        }
        Ok(self.data.iter().map(|&v| v as f64).collect())
    }

    /// Min, max and mean of the scalar value or of the vector norm.
    pub fn stats(&self) -> (f64, f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..self.len() {
            let v = if self.kind.is_vector() {
                self.vector(i).norm()
            } else {
                self.scalar(i)
            };
            min = min.min(v);
            max = max.max(v);
            sum += v;
        }
        (min, max, sum / self.len() as f64)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 1 + 12 + 48 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.push(self.kind.code());
        for n in self.spec.dims {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in self.spec.origin.iter().chain(self.spec.spacing.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Parse("truncated grid header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Parse("not a VFG1 grid file".into()));
        }
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)
            .map_err(|_| Error::Parse("truncated grid header".into()))?;
        let kind = FieldKind::from_code(kind[0])?;
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)
                .map_err(|_| Error::Parse("truncated grid header".into()))?;
            *d = u32::from_le_bytes(b) as usize;
        }
        let mut f = [0.0f64; 6];
        for v in &mut f {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)
                .map_err(|_| Error::Parse("truncated grid header".into()))?;
            *v = f64::from_le_bytes(b);
        }
        let spec = GridSpec {
            dims,
            origin: Vec3::new(f[0], f[1], f[2]),
            spacing: Vec3::new(f[3], f[4], f[5]),
        };
        let expected = dims.iter().product::<usize>() * kind.components() * 4;
        if r.len() != expected {
            return Err(Error::Parse(format!(
                "grid payload is {} bytes, expected {expected}",
                r.len()
            )));
        }
        let data = r
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Self::new(kind, spec, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Plain-text dump: a header, then one `i j k value...` line per vertex.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let [nx, ny, nz] = self.spec.dims;
        let _ = writeln!(s, "# kind {} dims {nx} {ny} {nz}", self.kind);
        let o = self.spec.origin;
        let h = self.spec.spacing;
        let _ = writeln!(
            s,
            "# origin {} {} {} spacing {} {} {}",
            o.x, o.y, o.z, h.x, h.y, h.z
        );
        let c = self.kind.components();
        for idx in 0..self.len() {
            let [i, j, k] = self.spec.coords(idx);
            let _ = write!(s, "{i} {j} {k}");
            for v in &self.data[c * idx..c * idx + c] {
                let _ = write!(s, " {v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Scalar values per cell of a vertex grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    /// Cell lattice; `origin` is the center of cell (0,0,0).
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl CellField {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.spec.index(i, j, k)]
    }

    pub fn center(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.spec.coords(idx);
        self.spec.position(i, j, k)
    }
}

/// Exact oracle evaluated at every vertex of `spec`.
pub fn sample_field_grid(
    oracle: &FieldOracle,
    kind: FieldKind,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    Ok(sample_field_grids(oracle, &[kind], spec)?
        .pop()
        .expect("one kind requested"))
}

/// Several field kinds from one closest-point pass. Output order follows `kinds`.
///
/// Signs come from ray parity along each grid row; rows whose crossings are
/// inconsistent fall back to the per-point test. Parallel over z-slabs with a
/// schedule-independent result.
pub fn sample_field_grids(
    oracle: &FieldOracle,
    kinds: &[FieldKind],
    spec: &GridSpec,
) -> Result<Vec<FieldGrid>> {
    if spec.dims.iter().any(|&n| n < 2) {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be >= 2 per axis, got {:?}",
            spec.dims
        )));
    }
    let need_sign = kinds.contains(&FieldKind::Sdf);
    if need_sign && !oracle.is_watertight() {
        return Err(Error::SignUndefined);
    }
    let [nx, ny, _] = spec.dims;
    let slab = nx * ny;
    let mut fields = vec![
        PointFields {
            vt: Vec3::zeros(),
            distance: 0.0
        };
        spec.len()
    ];
    let mut inside = vec![false; if need_sign { spec.len() } else { 0 }];

    fields
        .par_chunks_mut(slab)
        .enumerate()
        .for_each(|(k, out)| {
            // Distance is 1-Lipschitz, so the previous vertex bounds the next query.
            for j in 0..ny {
                let mut prev = oracle.point_fields(&spec.position(0, j, k));
                out[nx * j] = prev;
                for i in 1..nx {
                    prev = oracle.point_fields_bounded(
                        &spec.position(i, j, k),
                        prev.distance + spec.spacing.x,
                    );
                    out[i + nx * j] = prev;
                }
            }
        });
    if need_sign {
        inside
            .par_chunks_mut(slab)
            .enumerate()
            .for_each(|(k, out)| {
                for j in 0..ny {
                    row_inside(oracle, spec, j, k, &mut out[nx * j..nx * (j + 1)]);
                }
            });
    }

    Ok(kinds
        .iter()
        .map(|&kind| {
            let mut data = Vec::with_capacity(fields.len() * kind.components());
            match kind {
                FieldKind::Vt => fields
                    .iter()
                    .for_each(|f| data.extend(f.vt.iter().map(|&c| c as f32))),
                FieldKind::Dvt => fields
                    .iter()
                    .for_each(|f| data.extend(f.dvt().iter().map(|&c| c as f32))),
                FieldKind::Udf => data.extend(fields.iter().map(|f| f.distance as f32)),
                FieldKind::Sdf => data.extend(
                    fields
                        .iter()
                        .zip(&inside)
                        .map(|(f, &ins)| (if ins { -f.distance } else { f.distance }) as f32),
                ),
            }
            FieldGrid {
                kind,
                spec: *spec,
                data,
            }
        })
        .collect())
}

fn row_inside(oracle: &FieldOracle, spec: &GridSpec, j: usize, k: usize, out: &mut [bool]) {
    let start = spec.position(0, j, k);
    let mesh_min = oracle.index().mesh().bounds().min.x;
    let origin = Vec3::new(start.x.min(mesh_min) - 1.0, start.y, start.z);
    let hits = oracle.index().ray_hits(&origin, &Vec3::x(), f64::INFINITY);
    let mut crossings = Vec::with_capacity(hits.len());
    let mut last = f64::NEG_INFINITY;
    for (t, _) in hits {
        if t - last > 1e-10 {
            crossings.push(origin.x + t);
        }
        last = t;
    }
    if crossings.len() % 2 == 1 {
        for (i, o) in out.iter_mut().enumerate() {
            *o = oracle.index().is_inside(&spec.position(i, j, k));
        }
        return;
    }
    let mut c = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let x = start.x + i as f64 * spec.spacing.x;
        while c < crossings.len() && crossings[c] < x {
            c += 1;
        }
        *o = c % 2 == 1;
    }
}
