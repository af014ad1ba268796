//! Triangle meshes, closest-point queries and surface sampling.

mod bvh;
pub mod io;
mod sampling;
pub mod shapes;
mod triangle;

use std::collections::HashMap;

pub use bvh::{ClosestPointResult, SpatialIndex};
pub use sampling::sample_surface_points;
pub use triangle::{closest_point_on_triangle, ray_triangle_intersect, TrianglePoint};

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Triangles with area at or below this are dropped by [`TriMesh::cleaned`].
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// The sampling domain used throughout the crate, `[-1, 1]^3`.
    pub fn unit_cube() -> Self {
        Self::new(Vec3::repeat(-1.0), Vec3::repeat(1.0))
    }

    pub fn empty() -> Self {
        Self::new(Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY))
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Squared distance from `p` to the box, zero inside.
    #[inline]
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let dx = (self.min.x - p.x).max(p.x - self.max.x).max(0.0);
        let dy = (self.min.y - p.y).max(p.y - self.max.y).max(0.0);
        let dz = (self.min.z - p.z).max(p.z - self.max.z).max(0.0);
        dx * dx + dy * dy + dz * dz
    }

    /// Slab test; returns the entry parameter when the ray hits the box
    /// within `[0, t_max]`.
    #[inline]
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf keeps the previous bound.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Scale and translation applied by [`TriMesh::normalize_to_unit_cube`].
///
/// `normalized = (original - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizeTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl NormalizeTransform {
    pub fn identity() -> Self {
        Self {
            center: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale + self.center
    }
}

/// Indexed triangle surface.
///
/// The surface may be open, non-watertight or non-orientable.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriMesh {
    /// Builds a mesh, checking that every index is in range.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&v| v as usize >= n) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {i} references vertex out of range (vertex count {n})"
                )));
            }
        }
        if self
            .vertices
            .iter()
            .any(|v| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized normal, `(b - a) x (c - a)`.
    pub fn face_normal_raw(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(&(c - a))
    }

    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let n = self.face_normal_raw(tri);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vec3::zeros()
        }
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        0.5 * self.face_normal_raw(tri).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(v);
        }
        b
    }

    /// Drops degenerate triangles (area <= [`DEGENERATE_AREA`] or repeated
    /// indices) and vertices no longer referenced.
    pub fn cleaned(&self) -> TriMesh {
        let keep: Vec<[u32; 3]> = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                t[0] != t[1]
                    && t[1] != t[2]
                    && t[0] != t[2]
                    && self.triangle_area(*i) > DEGENERATE_AREA
            })
            .map(|(_, t)| *t)
            .collect();
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::with_capacity(keep.len());
        for t in keep {
            let mut out = [0u32; 3];
            for (k, &v) in t.iter().enumerate() {
                let slot = &mut remap[v as usize];
                if *slot == u32::MAX {
                    *slot = vertices.len() as u32;
                    vertices.push(self.vertices[v as usize]);
                }
                out[k] = *slot;
            }
            triangles.push(out);
        }
        TriMesh {
            vertices,
            triangles,
        }
    }

    /// Concatenates two meshes.
    pub fn merged(&self, other: &TriMesh) -> TriMesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        TriMesh {
            vertices,
            triangles,
        }
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Scales and translates the mesh so its bounding box is centered at the
    /// origin and its longest side spans `2 * (1 - margin)`.
    pub fn normalize_to_unit_cube(&self, margin: f64) -> (TriMesh, NormalizeTransform) {
        let b = self.bounds();
        let longest = b.extent().max();
        if !longest.is_finite() || longest <= 0.0 {
            return (self.clone(), NormalizeTransform::identity());
        }
        let transform = NormalizeTransform {
            center: b.center(),
            scale: 2.0 * (1.0 - margin) / longest,
        };
        (self.transformed(|p| transform.apply(p)), transform)
    }

    /// Number of faces incident to each undirected edge.
    pub fn edge_face_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut counts = HashMap::with_capacity(self.triangles.len() * 3 / 2);
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Closed two-manifold check: every edge borders exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.is_empty() && self.edge_face_counts().values().all(|&c| c == 2)
    }

    /// Number of directed edges whose neighbor across the edge traverses it
    /// in the same direction, i.e. locally inconsistent face orientations.
    pub fn orientation_conflicts(&self) -> usize {
        let mut directed: HashMap<(u32, u32), usize> =
            HashMap::with_capacity(self.triangles.len() * 3);
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed.values().filter(|&&c| c > 1).map(|&c| c - 1).sum()
    }
}
