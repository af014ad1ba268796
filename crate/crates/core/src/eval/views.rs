use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{jitter, training_samples, FieldKind, FieldOracle, TrainingSample, Truncation};
use crate::geometry::{sample_surface_points, SpatialIndex, Vec3};

pub const VIEW_COUNT: u8 = 8;
pub const CAMERA_DISTANCE: f64 = 50.0;
pub const VISIBILITY_EPS: f64 = 1e-5;

/// One of eight cameras on an equatorial ring around the origin.
/// V1 looks from +x; each next view turns 45 degrees about +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewSpec {
    id: u8,
    pub distance: f64,
}

impl ViewSpec {
    pub fn new(id: u8) -> Result<Self> {
        if !(1..=VIEW_COUNT).contains(&id) {
            return Err(Error::InvalidArgument(format!(
                "view id must be in 1..=8, got {id}"
            )));
        }
        Ok(Self {
            id,
            distance: CAMERA_DISTANCE,
        })
    }

    pub fn all() -> impl Iterator<Item = ViewSpec> {
        (1..=VIEW_COUNT).map(|id| ViewSpec {
            id,
            distance: CAMERA_DISTANCE,
        })
    }

    pub fn id(&self) -> u8 {
        self.id
    }

    pub fn azimuth(&self) -> f64 {
        f64::from(self.id - 1) * std::f64::consts::FRAC_PI_4
    }

    pub fn camera(&self) -> Vec3 {
        let a = self.azimuth();
        Vec3::new(a.cos(), a.sin(), 0.0) * self.distance
    }
}

impl fmt::Display for ViewSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V{}", self.id)
    }
}

impl FromStr for ViewSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.strip_prefix(['V', 'v']).unwrap_or(s);
        let id = digits
            .parse::<u8>()
            .map_err(|_| Error::InvalidArgument(format!("bad view {s:?}, expected V1..V8")))?;
        Self::new(id)
    }
}

/// Points whose segment to `camera` crosses no triangle of `scene`.
/// Fails with [`Error::DegenerateView`] when none are left.
pub fn visible_points(scene: &SpatialIndex, points: &[Vec3], camera: &Vec3) -> Result<Vec<Vec3>> {
    let keep: Vec<bool> = points
        .par_iter()
        .map(|p| !scene.segment_occluded(camera, p, VISIBILITY_EPS))
        .collect();
    let visible: Vec<Vec3> = points
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(p, _)| *p)
        .collect();
    if visible.is_empty() {
        return Err(Error::DegenerateView);
    }
    Ok(visible)
}

/// Samples `n` surface points and keeps those visible from `view`.
pub fn visible_surface_points(
    scene: &SpatialIndex,
    view: &ViewSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec3>> {
    let samples = sample_surface_points(scene.mesh(), n, seed)?;
    visible_points(scene, &samples, &view.camera())
}

/// How observations are drawn around surface samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationConfig {
    /// Surface samples drawn before the visibility filter.
    pub n_surface: usize,
    pub sigma_near: f64,
    pub truncation: Truncation,
    pub seed: u64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        Self {
            n_surface: 8000,
            sigma_near: 0.05,
            truncation: Truncation::default(),
            seed: 0,
        }
    }
}

/// Oracle observations around the surface samples seen from `view`, or
/// around all surface samples when `view` is `None`.
pub fn visible_observations(
    oracle: &FieldOracle,
    view: Option<&ViewSpec>,
    kind: FieldKind,
    config: &ObservationConfig,
) -> Result<Vec<TrainingSample>> {
    if !(config.sigma_near >= 0.0 && config.sigma_near.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sigma_near must be finite and >= 0, got {}",
            config.sigma_near
        )));
    }
    let surface = match view {
        Some(v) => visible_surface_points(oracle.index(), v, config.n_surface, config.seed)?,
        None => sample_surface_points(oracle.mesh(), config.n_surface, config.seed)?,
    };
    let positions = jitter(
        &surface,
        config.sigma_near,
        config.seed ^ 0x6a09_e667_f3bc_c908,
    );
    training_samples(oracle, &positions, kind, config.truncation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{shapes, TriMesh};

    #[test]
    fn ring_layout() {
        let views: Vec<ViewSpec> = ViewSpec::all().collect();
        assert_eq!(views.len(), 8);
        assert!((views[0].camera() - Vec3::new(50.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((views[2].camera() - Vec3::new(0.0, 50.0, 0.0)).norm() < 1e-12);
        for w in views.windows(2) {
            let (a, b) = (w[0].camera().normalize(), w[1].camera().normalize());
            assert!((a.dot(&b).acos().to_degrees() - 45.0).abs() < 1e-9);
            assert_eq!(w[0].camera().z, 0.0);
        }
        assert_eq!("V3".parse::<ViewSpec>().unwrap().id(), 3);
        assert_eq!(ViewSpec::new(5).unwrap().to_string(), "V5");
        assert!("V9".parse::<ViewSpec>().is_err());
        assert!("V0".parse::<ViewSpec>().is_err());
    }

    #[test]
    fn sphere_shows_about_half() {
        let index = SpatialIndex::build(shapes::icosphere(0.5, 4)).unwrap();
        for view in ViewSpec::all() {
            let seen = visible_surface_points(&index, &view, 4000, 7).unwrap();
            let frac = seen.len() as f64 / 4000.0;
            assert!((frac - 0.5).abs() < 0.05 * 0.5, "{view}: {frac}");
            let cam = view.camera().normalize();
            assert!(seen.iter().all(|p| p.dot(&cam) > -0.02));
        }
    }

    fn facing_triangle(x: f64, half: f64) -> TriMesh {
        TriMesh::new(
            vec![
                Vec3::new(x, -half, -half),
                Vec3::new(x, half, -half),
                Vec3::new(x, 0.0, half),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn facing_triangle_fully_visible() {
        let index = SpatialIndex::build(facing_triangle(0.0, 0.3)).unwrap();
        let seen = visible_surface_points(&index, &ViewSpec::new(1).unwrap(), 500, 1).unwrap();
        assert_eq!(seen.len(), 500);
    }

    #[test]
    fn occluded_triangle_is_degenerate() {
        let target = facing_triangle(0.0, 0.3);
        let scene = SpatialIndex::build(target.merged(&facing_triangle(0.5, 2.0))).unwrap();
        let samples = sample_surface_points(&target, 500, 1).unwrap();
        let cam = ViewSpec::new(1).unwrap().camera();
        assert!(matches!(
            visible_points(&scene, &samples, &cam),
            Err(Error::DegenerateView)
        ));
        // Seen from behind, the target is unobstructed.
        let back = ViewSpec::new(5).unwrap().camera();
        assert_eq!(visible_points(&scene, &samples, &back).unwrap().len(), 500);
    }

    #[test]
    fn observations_stay_near_the_surface() {
        let oracle = FieldOracle::new(shapes::by_name("torus").unwrap()).unwrap();
        let cfg = ObservationConfig {
            n_surface: 2000,
            ..Default::default()
        };
        let obs = visible_observations(
            &oracle,
            Some(&ViewSpec::new(2).unwrap()),
            FieldKind::Udf,
            &cfg,
        )
        .unwrap();
        assert!(!obs.is_empty() && obs.len() < 2000);
        for s in &obs {
            let d = oracle.udf_at(&s.position);
            assert!(d < 6.0 * cfg.sigma_near);
            assert!((s.target.as_scalar().unwrap() - d.min(0.2)).abs() < 1e-12);
        }
        let full = visible_observations(&oracle, None, FieldKind::Vt, &cfg).unwrap();
        assert_eq!(full.len(), 2000);
        assert_eq!(
            full,
            visible_observations(&oracle, None, FieldKind::Vt, &cfg).unwrap()
        );
    }
}
