//! Exact field oracles (VT, DVT, SDF, UDF) over a triangle mesh, training
//! point generation, and dense field grids.

mod grid;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub use grid::{sample_field_grid, sample_field_grids, CellField, FieldGrid, GridSpec};

use crate::error::{Error, Result};
use crate::geometry::{
    sample_surface_points, Aabb, ClosestPointResult, SpatialIndex, TriMesh, Vec3,
};

/// Below this distance a query counts as lying on the surface.
pub const SURFACE_EPS: f64 = 1e-9;
/// Offset used to resolve the direction at a surface point.
pub const SURFACE_OFFSET: f64 = 1e-6;
/// Lower bound on the DVT norm.
pub const DVT_NORM_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldKind {
    Vt,
    Dvt,
    Sdf,
    Udf,
}

impl FieldKind {
    pub const ALL: [FieldKind; 4] = [
        FieldKind::Vt,
        FieldKind::Dvt,
        FieldKind::Sdf,
        FieldKind::Udf,
    ];

    /// Values per sample: 3 for vector kinds, 1 for distances.
    pub fn components(self) -> usize {
        if self.is_vector() {
            3
        } else {
            1
        }
    }

    pub fn is_vector(self) -> bool {
        matches!(self, FieldKind::Vt | FieldKind::Dvt)
    }

    pub fn code(self) -> u8 {
        match self {
            FieldKind::Vt => 0,
            FieldKind::Dvt => 1,
            FieldKind::Sdf => 2,
            FieldKind::Udf => 3,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Ok(match code {
            0 => FieldKind::Vt,
            1 => FieldKind::Dvt,
            2 => FieldKind::Sdf,
            3 => FieldKind::Udf,
            other => return Err(Error::Parse(format!("unknown field kind code {other}"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Vt => "vt",
            FieldKind::Dvt => "dvt",
            FieldKind::Sdf => "sdf",
            FieldKind::Udf => "udf",
        }
    }
}

impl std::fmt::Display for FieldKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vt" => Ok(FieldKind::Vt),
            "dvt" => Ok(FieldKind::Dvt),
            "sdf" => Ok(FieldKind::Sdf),
            "udf" => Ok(FieldKind::Udf),
            other => Err(Error::InvalidArgument(format!(
                "unknown field kind {other:?} (expected vt, dvt, sdf or udf)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector(Vec3),
}

impl FieldValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match *self {
            FieldValue::Scalar(s) => Some(s),
            FieldValue::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<Vec3> {
        match *self {
            FieldValue::Vector(v) => Some(v),
            FieldValue::Scalar(_) => None,
        }
    }

    /// Flattened components, 1 or 3 values.
    pub fn components(&self) -> Vec<f64> {
        match *self {
            FieldValue::Scalar(s) => vec![s],
            FieldValue::Vector(v) => vec![v.x, v.y, v.z],
        }
    }
}

/// Truncation of distance training targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub sdf: f64,
    pub udf: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self { sdf: 0.1, udf: 0.2 }
    }
}

impl Truncation {
    pub fn none() -> Self {
        Self {
            sdf: f64::INFINITY,
            udf: f64::INFINITY,
        }
    }

    pub fn apply(&self, kind: FieldKind, value: FieldValue) -> FieldValue {
        match (kind, value) {
            (FieldKind::Sdf, FieldValue::Scalar(s)) => {
                FieldValue::Scalar(s.clamp(-self.sdf, self.sdf))
            }
            (FieldKind::Udf, FieldValue::Scalar(s)) => FieldValue::Scalar(s.min(self.udf)),
            _ => value,
        }
    }
}

/// All four field values at one point, computed from a single closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFields {
    pub vt: Vec3,
    pub distance: f64,
}

impl PointFields {
    pub fn dvt(&self) -> Vec3 {
        self.vt * self.distance.max(DVT_NORM_FLOOR)
    }
}

/// Exact ground-truth fields of a mesh.
#[derive(Debug, Clone)]
pub struct FieldOracle {
    index: SpatialIndex,
    watertight: bool,
}

impl FieldOracle {
    pub fn new(mesh: TriMesh) -> Result<Self> {
        let watertight = mesh.is_watertight();
        Ok(Self {
            index: SpatialIndex::build(mesh)?,
            watertight,
        })
    }

    pub fn from_index(index: SpatialIndex) -> Self {
        let watertight = index.mesh().is_watertight();
        Self { index, watertight }
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn mesh(&self) -> &TriMesh {
        self.index.mesh()
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn closest(&self, x: &Vec3) -> ClosestPointResult {
        self.index.closest_point(x)
    }

    /// VT direction and unsigned distance at `x`.
    pub fn point_fields(&self, x: &Vec3) -> PointFields {
        let c = self.index.closest_point(x);
        PointFields {
            vt: self.direction(x, &c),
            distance: c.distance,
        }
    }

    /// As [`point_fields`](Self::point_fields), given an upper bound on the
    /// distance at `x`. The result is identical to the unbounded query.
    pub fn point_fields_bounded(&self, x: &Vec3, bound: f64) -> PointFields {
        match self
            .index
            .closest_point_within(x, bound * (1.0 + 1e-9) + 1e-12)
        {
            Some(c) => PointFields {
                vt: self.direction(x, &c),
                distance: c.distance,
            },
            None => self.point_fields(x),
        }
    }

    fn direction(&self, x: &Vec3, c: &ClosestPointResult) -> Vec3 {
        if c.distance >= SURFACE_EPS {
            return c.displacement / c.distance;
        }
        let n = self.mesh().face_normal(c.triangle_id);
        let shifted = x + n * SURFACE_OFFSET;
        let c2 = self.index.closest_point(&shifted);
        if c2.distance >= SURFACE_EPS {
            c2.displacement / c2.distance
        } else {
            -n
        }
    }

    pub fn vt_at(&self, x: &Vec3) -> Vec3 {
        self.point_fields(x).vt
    }

    pub fn dvt_at(&self, x: &Vec3) -> Vec3 {
        self.point_fields(x).dvt()
    }

    pub fn udf_at(&self, x: &Vec3) -> f64 {
        self.index.closest_point(x).distance
    }

    /// Signed distance, negative inside. Requires a watertight mesh.
    pub fn sdf_at(&self, x: &Vec3) -> Result<f64> {
        if !self.watertight {
            return Err(Error::SignUndefined);
        }
        let d = self.udf_at(x);
        Ok(if self.index.is_inside(x) { -d } else { d })
    }

    pub fn value_at(&self, kind: FieldKind, x: &Vec3) -> Result<FieldValue> {
        Ok(match kind {
            FieldKind::Vt => FieldValue::Vector(self.vt_at(x)),
            FieldKind::Dvt => FieldValue::Vector(self.dvt_at(x)),
            FieldKind::Sdf => FieldValue::Scalar(self.sdf_at(x)?),
            FieldKind::Udf => FieldValue::Scalar(self.udf_at(x)),
        })
    }
}

/// Training point with its oracle target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSample {
    pub position: Vec3,
    pub target: FieldValue,
}

/// Near-surface and uniform sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub n_near: usize,
    pub n_uniform: usize,
    pub sigma_near: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            n_near: 8000,
            n_uniform: 2000,
            sigma_near: 0.05,
        }
    }
}

/// `n_near` surface samples with isotropic Gaussian jitter of std `sigma_near`,
/// followed by `n_uniform` points uniform in `[-1, 1]^3`.
pub fn sample_training_points(
    mesh: &TriMesh,
    n_near: usize,
    n_uniform: usize,
    sigma_near: f64,
    seed: u64,
) -> Result<Vec<Vec3>> {
    if !(sigma_near >= 0.0 && sigma_near.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma_near must be finite and >= 0, got {sigma_near}"
        )));
    }
    let mut points = Vec::with_capacity(n_near + n_uniform);
    if n_near > 0 {
        let surface = sample_surface_points(mesh, n_near, seed)?;
        points.extend(jitter(&surface, sigma_near, seed ^ 0x6a09_e667_f3bc_c908));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbb67_ae85_84ca_a73b);
    let unit = Uniform::new_inclusive(-1.0, 1.0);
    for _ in 0..n_uniform {
        points.push(Vec3::new(
            unit.sample(&mut rng),
            unit.sample(&mut rng),
            unit.sample(&mut rng),
        ));
    }
    Ok(points)
}

/// Isotropic Gaussian perturbation; `sigma == 0` returns the input unchanged.
pub fn jitter(points: &[Vec3], sigma: f64, seed: u64) -> Vec<Vec3> {
    if sigma == 0.0 {
        return points.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked by caller");
    points
        .iter()
        .map(|p| {
            p + Vec3::new(
                normal.sample(&mut rng),
                normal.sample(&mut rng),
                normal.sample(&mut rng),
            )
        })
        .collect()
}

/// Oracle targets at the given positions, with distance truncation applied.
pub fn training_samples(
    oracle: &FieldOracle,
    positions: &[Vec3],
    kind: FieldKind,
    truncation: Truncation,
) -> Result<Vec<TrainingSample>> {
    if kind == FieldKind::Sdf && !oracle.is_watertight() {
        return Err(Error::SignUndefined);
    }
    positions
        .iter()
        .map(|p| {
            let target = truncation.apply(kind, oracle.value_at(kind, p)?);
            Ok(TrainingSample {
                position: *p,
                target,
            })
        })
        .collect()
}

/// The default sampling domain.
pub fn default_bounds() -> Aabb {
    Aabb::unit_cube()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use rand::Rng;

    fn plane() -> FieldOracle {
        FieldOracle::new(shapes::square(1.0, 4)).unwrap()
    }

    fn sphere() -> FieldOracle {
        FieldOracle::new(shapes::icosphere(1.0, 4)).unwrap()
    }

    fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
        (a.dot(b) / (a.norm() * b.norm()))
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees()
    }

    // VT jumps across the medial axis; a point is kept only when the
    // direction is stable in a small neighborhood.
    fn off_medial_axis(oracle: &FieldOracle, x: &Vec3, r: f64) -> bool {
        let v = oracle.vt_at(x);
        (0..6).all(|k| {
            let mut e = Vec3::zeros();
            e[k / 2] = if k % 2 == 0 { r } else { -r };
            angle_deg(&oracle.vt_at(&(x + e)), &v) < 0.5
        })
    }

    #[test]
    fn vt_examples() {
        let v = plane().vt_at(&Vec3::new(0.3, -0.2, 0.7));
        assert!((v - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        // Facet normals of the level-4 icosphere deviate from the sphere normal by a few degrees.
        let v = sphere().vt_at(&Vec3::new(0.0, 0.0, 0.25));
        assert!(angle_deg(&v, &Vec3::z()) < 3.0, "{v:?}");
    }

    #[test]
    fn vt_on_surface_uses_offset_side() {
        let o = plane();
        let v = o.vt_at(&Vec3::new(0.1, 0.2, 0.0));
        assert!((v - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-9);
        let d = o.dvt_at(&Vec3::new(0.1, 0.2, 0.0));
        assert!((d.norm() - DVT_NORM_FLOOR).abs() < 1e-18);
    }

    #[test]
    fn dvt_examples() {
        let d = plane().dvt_at(&Vec3::new(0.0, 0.0, 0.7));
        assert!((d - Vec3::new(0.0, 0.0, -0.7)).norm() < 1e-12);
    }

    #[test]
    fn sdf_and_udf() {
        let s = sphere();
        assert!((s.sdf_at(&Vec3::zeros()).unwrap() + 1.0).abs() < 5e-3);
        assert!(s.sdf_at(&Vec3::new(0.0, 0.0, 1.5)).unwrap() > 0.0);
        let p = plane();
        assert!((p.udf_at(&Vec3::new(0.0, 0.0, 0.4)) - 0.4).abs() < 1e-12);
        assert!(matches!(
            p.sdf_at(&Vec3::new(0.0, 0.0, 0.4)),
            Err(Error::SignUndefined)
        ));
    }

    // Independent oracle: nearest of a dense surface sampling.
    #[test]
    fn vt_matches_dense_sampling_oracle() {
        let mesh = shapes::torus(0.5, 0.2, 48, 24);
        let oracle = FieldOracle::new(mesh.clone()).unwrap();
        let dense = sample_surface_points(&mesh, 1_000_000, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 100 {
            let x = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            // Sample spacing of ~2e-3 bounds the oracle's angular error by ~1e-3 / d.
            if oracle.udf_at(&x) < 0.1 || !off_medial_axis(&oracle, &x, 1e-3) {
                continue;
            }
            let nearest = dense
                .iter()
                .min_by(|a, b| (*a - x).norm_squared().total_cmp(&(*b - x).norm_squared()))
                .unwrap();
            let v = oracle.vt_at(&x);
            assert!(angle_deg(&v, &(nearest - x)) < 1.0, "{x:?}");
            checked += 1;
        }
    }

    #[test]
    fn dvt_norm_matches_udf_and_vt_is_unit() {
        let oracle = FieldOracle::new(shapes::torus(0.5, 0.2, 32, 16)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let x = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let f = oracle.point_fields(&x);
            assert!((f.vt.norm() - 1.0).abs() < 1e-9);
            assert!(
                (oracle.dvt_at(&x).norm() - oracle.udf_at(&x).max(DVT_NORM_FLOOR)).abs() < 1e-12
            );
            let c = oracle.closest(&x);
            assert_eq!(oracle.udf_at(&x), (x - c.point).norm());
            if f.distance > DVT_NORM_FLOOR {
                let d = oracle.dvt_at(&x);
                assert!((d / d.norm() - f.vt).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn vt_converges_to_normal_near_surface() {
        for (oracle, normal_at) in [
            (
                plane(),
                Box::new(|_: &Vec3| Vec3::z()) as Box<dyn Fn(&Vec3) -> Vec3>,
            ),
            (sphere(), Box::new(|p: &Vec3| p.normalize())),
        ] {
            let samples = sample_surface_points(oracle.mesh(), 50, 5).unwrap();
            for s in samples {
                let c = oracle.closest(&s);
                let n = oracle.mesh().face_normal(c.triangle_id);
                let x = s + n * 1e-3;
                let v = oracle.vt_at(&x);
                assert!(angle_deg(&-v, &n) < 1.0);
                // The analytic normal differs from the facet normal only by the mesh approximation.
                assert!(angle_deg(&n, &normal_at(&s)) < 3.0);
            }
        }
    }

    #[test]
    fn vt_is_negative_udf_gradient() {
        let oracle = FieldOracle::new(shapes::torus(0.5, 0.2, 48, 24)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-4;
        let mut checked = 0;
        while checked < 200 {
            let x = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if oracle.udf_at(&x) <= 0.05 || !off_medial_axis(&oracle, &x, 1e-3) {
                continue;
            }
            let mut g = Vec3::zeros();
            for a in 0..3 {
                let mut e = Vec3::zeros();
                e[a] = h;
                g[a] = (oracle.udf_at(&(x + e)) - oracle.udf_at(&(x - e))) / (2.0 * h);
            }
            assert!(angle_deg(&oracle.vt_at(&x), &-g) < 1.0);
            checked += 1;
        }
    }

    #[test]
    fn training_points_uniform_in_cube() {
        let pts = sample_training_points(&shapes::icosphere(0.5, 2), 0, 1000, 0.05, 1).unwrap();
        assert_eq!(pts.len(), 1000);
        assert!(pts
            .iter()
            .all(|p| p.iter().all(|c| (-1.0..=1.0).contains(c))));
    }

    #[test]
    fn near_points_concentrate_at_surface() {
        let mesh = shapes::icosphere(0.5, 3);
        let oracle = FieldOracle::new(mesh.clone()).unwrap();
        let pts = sample_training_points(&mesh, 2000, 0, 0.05, 9).unwrap();
        let close = pts.iter().filter(|p| oracle.udf_at(p) < 0.15).count();
        assert!(close as f64 >= 0.95 * pts.len() as f64);
    }

    #[test]
    fn training_points_deterministic() {
        let mesh = shapes::icosphere(0.5, 2);
        let a = sample_training_points(&mesh, 300, 100, 0.05, 4).unwrap();
        let b = sample_training_points(&mesh, 300, 100, 0.05, 4).unwrap();
        assert_eq!(a, b);
        let c = sample_training_points(&mesh, 300, 100, 0.05, 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truncated_targets() {
        let oracle = sphere();
        let pts = [
            Vec3::zeros(),
            Vec3::new(0.0, 0.0, 1.05),
            Vec3::new(0.0, 0.0, 1.9),
        ];
        let s = training_samples(&oracle, &pts, FieldKind::Sdf, Truncation::default()).unwrap();
        assert_eq!(s[0].target, FieldValue::Scalar(-0.1));
        assert!((s[1].target.as_scalar().unwrap() - 0.05).abs() < 5e-3);
        assert_eq!(s[2].target, FieldValue::Scalar(0.1));
        let u = training_samples(&oracle, &pts, FieldKind::Udf, Truncation::default()).unwrap();
        assert_eq!(u[2].target, FieldValue::Scalar(0.2));
        assert!(training_samples(&plane(), &pts, FieldKind::Sdf, Truncation::default()).is_err());
    }

    #[test]
    fn kind_roundtrips() {
        for k in FieldKind::ALL {
            assert_eq!(FieldKind::from_code(k.code()).unwrap(), k);
            assert_eq!(k.name().parse::<FieldKind>().unwrap(), k);
        }
        assert!("occ".parse::<FieldKind>().is_err());
    }
}
