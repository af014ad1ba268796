use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Area-uniform surface samples: the triangle is drawn with probability
/// proportional to its area, the point uniformly inside it.
///
/// Bit-exact for a given mesh and seed.
pub fn sample_surface_points(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<Vec3>> {
    Ok(sample_surface_points_with_triangles(mesh, n, seed)?
        .into_iter()
        .map(|(p, _)| p)
        .collect())
}

/// As [`sample_surface_points`], also reporting the source triangle of each sample.
pub fn sample_surface_points_with_triangles(
    mesh: &TriMesh,
    n: usize,
    seed: u64,
) -> Result<Vec<(Vec3, usize)>> {
    if mesh.is_empty() {
        return Err(Error::NoSurface);
    }
    let mut cdf = Vec::with_capacity(mesh.num_triangles());
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        total += mesh.triangle_area(t);
        cdf.push(total);
    }
    if total <= 0.0 {
        return Err(Error::NoSurface);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = cdf.len() - 1;
    Ok((0..n)
        .map(|_| {
            let u = rng.gen::<f64>() * total;
            let t = cdf.partition_point(|&c| c <= u).min(last);
            let r1 = rng.gen::<f64>().sqrt();
            let r2 = rng.gen::<f64>();
            let [a, b, c] = mesh.corners(t);
            (a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2), t)
        })
        .collect())
}
