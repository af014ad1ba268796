//! Procedural test shapes. All are built with outward-facing triangles.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{TriMesh, Vec3};

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(radius: f64, level: u32) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vec3::new(v[0], v[1], v[2]).normalize())
    .collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    TriMesh {
        vertices: vertices.into_iter().map(|v| v * radius).collect(),
        triangles,
    }
}

/// Latitude/longitude sphere with `nu` segments around and `nv` rings.
pub fn uv_sphere(radius: f64, nu: usize, nv: usize) -> TriMesh {
    let mut vertices = vec![Vec3::new(0.0, 0.0, radius)];
    for j in 1..nv {
        let theta = PI * j as f64 / nv as f64;
        for i in 0..nu {
            let phi = 2.0 * PI * i as f64 / nu as f64;
            vertices.push(
                radius
                    * Vec3::new(
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ),
            );
        }
    }
    vertices.push(Vec3::new(0.0, 0.0, -radius));
    let south = (vertices.len() - 1) as u32;
    let ring = |j: usize, i: usize| (1 + (j - 1) * nu + i % nu) as u32;
    let mut triangles = Vec::new();
    for i in 0..nu {
        triangles.push([0, ring(1, i), ring(1, i + 1)]);
        triangles.push([south, ring(nv - 1, i + 1), ring(nv - 1, i)]);
    }
    for j in 1..nv - 1 {
        for i in 0..nu {
            let (a, b, c, d) = (
                ring(j, i),
                ring(j, i + 1),
                ring(j + 1, i),
                ring(j + 1, i + 1),
            );
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    TriMesh {
        vertices,
        triangles,
    }
}

/// Torus around the z axis with major radius `major` and tube radius `minor`.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriMesh {
        vertices,
        triangles,
    }
}

/// Axis-aligned box centered at the origin, each face split into `n x n` quads.
pub fn cuboid(half: Vec3, n: usize) -> TriMesh {
    let mut mesh = TriMesh::default();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [1.0, -1.0] {
            let mut face = TriMesh::default();
            for j in 0..=n {
                for i in 0..=n {
                    let mut p = Vec3::zeros();
                    p[axis] = sign * half[axis];
                    p[u] = half[u] * (2.0 * i as f64 / n as f64 - 1.0);
                    p[v] = half[v] * (2.0 * j as f64 / n as f64 - 1.0);
                    face.vertices.push(p);
                }
            }
            let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    // e_u x e_v = e_axis, so (a, b, c) faces +axis.
                    if sign > 0.0 {
                        face.triangles.push([a, b, c]);
                        face.triangles.push([a, c, d]);
                    } else {
                        face.triangles.push([a, c, b]);
                        face.triangles.push([a, d, c]);
                    }
                }
            }
            mesh = mesh.merged(&face);
        }
    }
    weld(&mesh, 1e-9)
}

/// Open square `[-half, half]^2` in the plane z = 0, `n x n` quads, normal +z.
pub fn square(half: f64, n: usize) -> TriMesh {
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::new(
                half * (2.0 * i as f64 / n as f64 - 1.0),
                half * (2.0 * j as f64 / n as f64 - 1.0),
                0.0,
            ));
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    TriMesh {
        vertices,
        triangles,
    }
}

/// Open circular disk of the given radius in the plane z = 0, normal +z.
pub fn disk(radius: f64, rings: usize, segments: usize) -> TriMesh {
    let mut vertices = vec![Vec3::zeros()];
    for r in 1..=rings {
        let rad = radius * r as f64 / rings as f64;
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(rad * a.cos(), rad * a.sin(), 0.0));
        }
    }
    let ring = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings {
        for s in 0..segments {
            let (a, b, c, d) = (
                ring(r, s),
                ring(r, s + 1),
                ring(r + 1, s),
                ring(r + 1, s + 1),
            );
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    TriMesh {
        vertices,
        triangles,
    }
}

/// Merges vertices closer than `eps` (by grid snapping) and drops collapsed triangles.
pub fn weld(mesh: &TriMesh, eps: f64) -> TriMesh {
    let key = |p: &Vec3| {
        (
            (p.x / eps).round() as i64,
            (p.y / eps).round() as i64,
            (p.z / eps).round() as i64,
        )
    };
    let mut map: HashMap<(i64, i64, i64), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = mesh
        .vertices
        .iter()
        .map(|p| {
            *map.entry(key(p)).or_insert_with(|| {
                vertices.push(*p);
                (vertices.len() - 1) as u32
            })
        })
        .collect();
    let triangles = mesh
        .triangles
        .iter()
        .map(|t| {
            [
                remap[t[0] as usize],
                remap[t[1] as usize],
                remap[t[2] as usize],
            ]
        })
        .filter(|t| t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    TriMesh {
        vertices,
        triangles,
    }
}

/// Named procedural shapes used by the benchmark and the CLI.
pub fn by_name(name: &str) -> Option<TriMesh> {
    match name {
        "sphere" => Some(icosphere(0.5, 4)),
        "torus" => Some(torus(0.5, 0.2, 96, 48)),
        "box" => Some(cuboid(Vec3::new(0.45, 0.35, 0.3), 8)),
        "disk" => Some(disk(0.8, 12, 96)),
        "square" => Some(square(0.8, 8)),
        _ => None,
    }
}

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 5] = ["sphere", "torus", "box", "disk", "square"];

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_volume(m: &TriMesh) -> f64 {
        (0..m.num_triangles())
            .map(|t| {
                let [a, b, c] = m.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn closed_shapes_are_watertight_and_outward() {
        for (mesh, volume) in [
            (icosphere(0.5, 4), 4.0 / 3.0 * PI * 0.125),
            (torus(0.5, 0.2, 96, 48), 2.0 * PI * PI * 0.5 * 0.04),
            (
                cuboid(Vec3::new(0.45, 0.35, 0.3), 8),
                8.0 * 0.45 * 0.35 * 0.3,
            ),
            (uv_sphere(1.0, 32, 16), 4.0 / 3.0 * PI),
        ] {
            assert!(mesh.is_watertight());
            assert_eq!(mesh.orientation_conflicts(), 0);
            let v = signed_volume(&mesh);
            assert!(
                v > 0.0 && (v / volume - 1.0).abs() < 0.02,
                "volume {v} vs {volume}"
            );
        }
    }

    #[test]
    fn open_shapes_are_flat() {
        for mesh in [square(1.0, 4), disk(0.8, 4, 32)] {
            assert!(!mesh.is_watertight());
            assert!(mesh.vertices.iter().all(|v| v.z == 0.0));
            assert!((0..mesh.num_triangles()).all(|t| mesh.face_normal(t).z > 0.99));
        }
    }
}
