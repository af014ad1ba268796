use rayon::prelude::*;

use super::kdtree::KdTree;
use crate::error::{Error, Result};
use crate::field::jitter;
use crate::geometry::{sample_surface_points, TriMesh, Vec3};

/// Point-to-point distance used inside the Chamfer sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChamferMetric {
    /// Mean nearest-neighbor distance per direction.
    #[default]
    Euclidean,
    /// Mean squared nearest-neighbor distance per direction.
    Squared,
}

impl std::str::FromStr for ChamferMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" | "l2" => Ok(Self::Euclidean),
            "squared" | "l2sq" => Ok(Self::Squared),
            other => Err(Error::InvalidArgument(format!(
                "unknown chamfer metric {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for ChamferMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Euclidean => "euclidean",
            Self::Squared => "squared",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChamferConfig {
    pub n_points: usize,
    pub resamplings: usize,
    pub seed: u64,
}

impl Default for ChamferConfig {
    fn default() -> Self {
        Self {
            n_points: 30_000,
            resamplings: 3,
            seed: 0,
        }
    }
}

/// Symmetric Chamfer distance times 1000, under both point metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chamfer {
    pub euclidean: f64,
    pub squared: f64,
}

impl Chamfer {
    pub const INFINITE: Chamfer = Chamfer {
        euclidean: f64::INFINITY,
        squared: f64::INFINITY,
    };

    pub fn get(&self, metric: ChamferMetric) -> f64 {
        match metric {
            ChamferMetric::Euclidean => self.euclidean,
            ChamferMetric::Squared => self.squared,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.euclidean.is_finite()
    }
}

/// Symmetric Chamfer distance between two meshes, times 1000.
///
/// Each resampling `r` draws `n_points` area-uniform samples from both meshes
/// with seed `seed + r`, sums the two directed mean nearest-neighbor
/// distances, and the result is averaged over resamplings. An empty mesh
/// yields infinity.
pub fn chamfer(a: &TriMesh, b: &TriMesh, config: &ChamferConfig) -> Chamfer {
    if a.is_empty() || b.is_empty() || config.n_points == 0 || config.resamplings == 0 {
        return Chamfer::INFINITE;
    }
    let mut total = Chamfer {
        euclidean: 0.0,
        squared: 0.0,
    };
    for r in 0..config.resamplings as u64 {
        let seed = config.seed.wrapping_add(r);
        let (Ok(pa), Ok(pb)) = (
            sample_surface_points(a, config.n_points, seed),
            sample_surface_points(b, config.n_points, seed),
        ) else {
            return Chamfer::INFINITE;
        };
        let c = chamfer_points(&pa, &pb);
        total.euclidean += c.euclidean;
        total.squared += c.squared;
    }
    let n = config.resamplings as f64;
    Chamfer {
        euclidean: total.euclidean / n,
        squared: total.squared / n,
    }
}

/// Symmetric Chamfer distance between two point sets, times 1000.
pub fn chamfer_points(a: &[Vec3], b: &[Vec3]) -> Chamfer {
    if a.is_empty() || b.is_empty() {
        return Chamfer::INFINITE;
    }
    let (ea, sa) = directed(a, &KdTree::new(b));
    let (eb, sb) = directed(b, &KdTree::new(a));
    Chamfer {
        euclidean: 1000.0 * (ea + eb),
        squared: 1000.0 * (sa + sb),
    }
}

fn directed(from: &[Vec3], to: &KdTree) -> (f64, f64) {
    let d2: Vec<f64> = from.par_iter().map(|p| to.nearest_squared(p)).collect();
    let n = d2.len() as f64;
    let (e, s) = d2
        .iter()
        .fold((0.0, 0.0), |(e, s), &d| (e + d.sqrt(), s + d));
    (e / n, s / n)
}

/// Isotropic Gaussian noise on point coordinates; `sigma = 0` is the identity.
pub fn add_noise(points: &[Vec3], sigma: f64, seed: u64) -> Result<Vec<Vec3>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be finite and >= 0, got {sigma}"
        )));
    }
    Ok(jitter(points, sigma, seed))
}
