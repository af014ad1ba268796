use super::{closest_point_on_triangle, ray_triangle_intersect, Aabb, TriMesh, Vec3};
use crate::error::{Error, Result};

const LEAF_SIZE: usize = 4;

/// Nearest surface point to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPointResult {
    /// Position on the surface.
    pub point: Vec3,
    /// Euclidean norm of `displacement`.
    pub distance: f64,
    pub triangle_id: usize,
    /// `point - query`.
    pub displacement: Vec3,
    /// Barycentric weights of `point` on `triangle_id`.
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle slot. Inner: index of the left child (right = left + 1).
    start: u32,
    /// Leaf: triangle count. Inner: zero.
    count: u32,
}

/// Bounding-volume hierarchy over a mesh's triangles.
///
/// Immutable after construction and safe to query from many threads.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    mesh: TriMesh,
    nodes: Vec<Node>,
    /// Triangle corners in leaf order.
    tris: Vec<[Vec3; 3]>,
    /// Bounding box for each slot of `tris`.
    tri_boxes: Vec<Aabb>,
    /// Original triangle id for each slot of `tris`.
    ids: Vec<u32>,
}

impl SpatialIndex {
    pub fn build(mesh: TriMesh) -> Result<Self> {
        mesh.validate()?;
        if mesh.is_empty() {
            return Err(Error::NoSurface);
        }
        let n = mesh.num_triangles();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let centroids: Vec<Vec3> = (0..n)
            .map(|t| {
                let [a, b, c] = mesh.corners(t);
                (a + b + c) / 3.0
            })
            .collect();
        let boxes: Vec<Aabb> = (0..n)
            .map(|t| {
                let mut bb = Aabb::empty();
                for p in mesh.corners(t) {
                    bb.grow(&p);
                }
                bb
            })
            .collect();

        let mut nodes = vec![Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        }];
        // (node index, range start, range end)
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((node, lo, hi)) = stack.pop() {
            let mut bounds = Aabb::empty();
            let mut cbounds = Aabb::empty();
            for &t in &order[lo..hi] {
                bounds = bounds.union(&boxes[t as usize]);
                cbounds.grow(&centroids[t as usize]);
            }
            nodes[node].bounds = bounds;
            if hi - lo <= LEAF_SIZE {
                nodes[node].start = lo as u32;
                nodes[node].count = (hi - lo) as u32;
                continue;
            }
            let ext = cbounds.extent();
            let axis = if ext.x >= ext.y && ext.x >= ext.z {
                0
            } else if ext.y >= ext.z {
                1
            } else {
                2
            };
            let mid = (lo + hi) / 2;
            order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes[node].start = left as u32;
            nodes[node].count = 0;
            stack.push((left + 1, mid, hi));
            stack.push((left, lo, mid));
        }

        let tris = order.iter().map(|&t| mesh.corners(t as usize)).collect();
        let tri_boxes = order.iter().map(|&t| boxes[t as usize]).collect();
        Ok(Self {
            mesh,
            nodes,
            tris,
            tri_boxes,
            ids: order,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    /// Globally nearest surface point. Equidistant candidates resolve to the
    /// lowest triangle id.
    pub fn closest_point(&self, query: &Vec3) -> ClosestPointResult {
        self.closest_point_within(query, f64::INFINITY)
            .expect("non-empty index always yields a closest point")
    }

    /// As [`closest_point`](Self::closest_point), but only searches up to
    /// `max_distance`. A tight bound (e.g. a neighbor's distance plus the step
    /// between the queries) prunes most of the tree.
    pub fn closest_point_within(
        &self,
        query: &Vec3,
        max_distance: f64,
    ) -> Option<ClosestPointResult> {
        let mut best_d2 = max_distance * max_distance;
        let mut best_slot = usize::MAX;
        let mut best = None;
        let mut stack: [(u32, f64); 64] = [(0, 0.0); 64];
        let mut top = 1;
        stack[0] = (0, self.nodes[0].bounds.distance_squared(query));
        while top > 0 {
            top -= 1;
            let (ni, box_d2) = stack[top];
            if box_d2 > best_d2 {
                continue;
            }
            let node = &self.nodes[ni as usize];
            if node.count > 0 {
                let start = node.start as usize;
                for slot in start..start + node.count as usize {
                    if self.tri_boxes[slot].distance_squared(query) > best_d2 {
                        continue;
                    }
                    let [a, b, c] = &self.tris[slot];
                    let r = closest_point_on_triangle(query, a, b, c);
                    let d2 = (r.point - query).norm_squared();
                    if d2 < best_d2
                        || (d2 == best_d2
                            && (best_slot == usize::MAX || self.ids[slot] < self.ids[best_slot]))
                    {
                        best_d2 = d2;
                        best_slot = slot;
                        best = Some(r);
                    }
                }
            } else {
                let l = node.start;
                let dl = self.nodes[l as usize].bounds.distance_squared(query);
                let dr = self.nodes[l as usize + 1].bounds.distance_squared(query);
                // Nearer child is popped first.
                let (first, second) = if dl <= dr {
                    ((l, dl), (l + 1, dr))
                } else {
                    ((l + 1, dr), (l, dl))
                };
                if second.1 <= best_d2 {
                    stack[top] = second;
                    top += 1;
                }
                if first.1 <= best_d2 {
                    stack[top] = first;
                    top += 1;
                }
            }
        }
        let r = best?;
        let displacement = r.point - query;
        Some(ClosestPointResult {
            point: r.point,
            distance: displacement.norm(),
            triangle_id: self.ids[best_slot] as usize,
            displacement,
            barycentric: r.barycentric,
        })
    }

    /// Brute-force scan over all triangles with the same tie-breaking rule.
    pub fn closest_point_brute_force(&self, query: &Vec3) -> ClosestPointResult {
        brute_force_closest(&self.mesh, query)
    }

    /// Sorted ray parameters of every triangle crossed by the ray.
    pub fn ray_hits(&self, origin: &Vec3, dir: &Vec3, t_max: f64) -> Vec<(f64, usize)> {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut hits = Vec::new();
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.start as usize;
                for slot in start..start + node.count as usize {
                    let [a, b, c] = &self.tris[slot];
                    if let Some(t) = ray_triangle_intersect(origin, dir, a, b, c) {
                        if t <= t_max {
                            hits.push((t, self.ids[slot] as usize));
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(node.start + 1);
            }
        }
        hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        hits
    }

    /// Whether the segment from `from` to `to` crosses any triangle before
    /// reaching `to - eps` along the segment.
    pub fn segment_occluded(&self, from: &Vec3, to: &Vec3, eps: f64) -> bool {
        let delta = to - from;
        let len = delta.norm();
        if len <= eps {
            return false;
        }
        let dir = delta / len;
        !self.ray_hits(from, &dir, len - eps).is_empty()
    }

    /// Ray-parity inside test, majority vote over three skewed directions.
    /// Only meaningful for watertight meshes.
    pub fn is_inside(&self, p: &Vec3) -> bool {
        const DIRS: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [-2.0, 2.236, 1.0], [0.13, -0.447, 0.885]];
        let mut votes = 0;
        for d in DIRS {
            let dir = Vec3::new(d[0], d[1], d[2]).normalize();
            let hits = self.ray_hits(p, &dir, f64::INFINITY);
            // Collapse hits on shared edges/vertices that land on the same parameter.
            let mut count = 0;
            let mut last = f64::NEG_INFINITY;
            for (t, _) in hits {
                if t - last > 1e-10 {
                    count += 1;
                }
                last = t;
            }
            votes += count % 2;
        }
        votes >= 2
    }
}

pub(crate) fn brute_force_closest(mesh: &TriMesh, query: &Vec3) -> ClosestPointResult {
    let mut best_d2 = f64::INFINITY;
    let mut best = None;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.corners(t);
        let r = closest_point_on_triangle(query, &a, &b, &c);
        let d2 = (r.point - query).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = Some((t, r));
        }
    }
    let (t, r) = best.expect("mesh must be non-empty");
    let displacement = r.point - query;
    ClosestPointResult {
        point: r.point,
        distance: displacement.norm(),
        triangle_id: t,
        displacement,
        barycentric: r.barycentric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_soup(n: usize, seed: u64) -> TriMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for i in 0..n {
            let c = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            for _ in 0..3 {
                vertices.push(
                    c + Vec3::new(
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                        rng.gen_range(-0.2..0.2),
                    ),
                );
            }
            let b = 3 * i as u32;
            triangles.push([b, b + 1, b + 2]);
        }
        TriMesh::new(vertices, triangles).unwrap()
    }

    #[test]
    fn empty_mesh_is_no_surface() {
        assert!(matches!(
            SpatialIndex::build(TriMesh::default()),
            Err(Error::NoSurface)
        ));
    }

    #[test]
    fn square_projection() {
        let idx = SpatialIndex::build(shapes::square(1.0, 1)).unwrap();
        let r = idx.closest_point(&Vec3::new(0.0, 0.0, 0.5));
        assert!((r.point - Vec3::zeros()).norm() < 1e-12);
        assert!((r.distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn icosphere_distance() {
        let idx = SpatialIndex::build(shapes::icosphere(1.0, 4)).unwrap();
        let r = idx.closest_point(&Vec3::new(2.0, 0.0, 0.0));
        assert!((r.distance - 1.0).abs() < 5e-3);
    }

    #[test]
    fn matches_brute_force_on_random_mesh() {
        let idx = SpatialIndex::build(random_soup(500, 7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q = Vec3::new(
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            );
            let a = idx.closest_point(&q);
            let b = idx.closest_point_brute_force(&q);
            assert!((a.distance - b.distance).abs() < 1e-9);
            assert_eq!(a.triangle_id, b.triangle_id);
        }
    }

    #[test]
    fn tie_resolves_to_lowest_triangle_id() {
        // Query directly above the shared diagonal of the two square triangles.
        let idx = SpatialIndex::build(shapes::square(1.0, 1)).unwrap();
        let q = Vec3::new(0.25, 0.25, 1.0);
        let r = idx.closest_point(&q);
        assert_eq!(r.triangle_id, idx.closest_point_brute_force(&q).triangle_id);
        assert!((r.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn result_invariants() {
        let idx = SpatialIndex::build(shapes::torus(0.5, 0.2, 32, 16)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let r = idx.closest_point(&q);
            assert!((r.distance - r.displacement.norm()).abs() < 1e-9);
            assert!(r
                .barycentric
                .iter()
                .all(|&w| (-1e-9..=1.0 + 1e-9).contains(&w)));
            assert!((r.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let [a, b, c] = idx.mesh().corners(r.triangle_id);
            let p = a * r.barycentric[0] + b * r.barycentric[1] + c * r.barycentric[2];
            assert!((p - r.point).norm() < 1e-9);
        }
    }

    #[test]
    fn inside_test_on_sphere_and_box() {
        let sphere = SpatialIndex::build(shapes::icosphere(0.5, 3)).unwrap();
        assert!(sphere.is_inside(&Vec3::zeros()));
        assert!(sphere.is_inside(&Vec3::new(0.3, -0.2, 0.1)));
        assert!(!sphere.is_inside(&Vec3::new(0.6, 0.0, 0.0)));
        let cube = SpatialIndex::build(shapes::cuboid(Vec3::new(0.4, 0.3, 0.2), 4)).unwrap();
        // Grid-aligned query that hits edges along axis-aligned rays.
        assert!(cube.is_inside(&Vec3::new(0.0, 0.0, 0.0)));
        assert!(!cube.is_inside(&Vec3::new(0.0, 0.0, 0.25)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn accelerated_equals_brute_force(seed in 0u64..1000, qx in -2.0..2.0f64, qy in -2.0..2.0f64, qz in -2.0..2.0f64) {
            let idx = SpatialIndex::build(random_soup(60, seed)).unwrap();
            let q = Vec3::new(qx, qy, qz);
            let a = idx.closest_point(&q);
            let b = idx.closest_point_brute_force(&q);
            prop_assert!((a.distance - b.distance).abs() < 1e-9);
        }

        #[test]
        fn distance_is_one_lipschitz(ax in -1.5..1.5f64, ay in -1.5..1.5f64, az in -1.5..1.5f64,
                                     bx in -1.5..1.5f64, by in -1.5..1.5f64, bz in -1.5..1.5f64) {
            let idx = SpatialIndex::build(shapes::torus(0.5, 0.2, 24, 12)).unwrap();
            let p = Vec3::new(ax, ay, az);
            let q = Vec3::new(bx, by, bz);
            let dp = idx.closest_point(&p).distance;
            let dq = idx.closest_point(&q).distance;
            prop_assert!((dp - dq).abs() <= (p - q).norm() + 1e-12);
        }
    }
}
