use std::fmt::Write as _;

use rayon::prelude::*;

use super::chamfer::{add_noise, chamfer, Chamfer, ChamferConfig, ChamferMetric};
use super::views::{visible_observations, ObservationConfig, ViewSpec};
use crate::error::{Error, Result};
use crate::field::{
    sample_field_grid, FieldGrid, FieldKind, FieldOracle, GridSpec, TrainingSample,
};
use crate::geometry::TriMesh;
use crate::mc::{extract_auto, VectorMcConfig};
use crate::neural::{neural_grid, optimize_latent, LatentConfig, TrainedModel};

/// What is reconstructed from what.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    /// Observations around the whole surface.
    Reconstruct,
    /// Observations around the part of the surface seen from one view.
    Complete(ViewSpec),
    /// Whole-surface observations with Gaussian noise on their coordinates.
    Noise(f64),
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Reconstruct => f.write_str("reconstruct"),
            Task::Complete(v) => write!(f, "complete-{v}"),
            Task::Noise(s) => write!(f, "noise-{s}"),
        }
    }
}

/// Where field grids come from.
#[derive(Debug, Clone, Copy)]
pub enum BenchMode<'a> {
    /// Exact oracle grids; only [`Task::Reconstruct`] applies.
    Exact,
    /// Trained networks, one per field kind, with a code fitted per shape.
    Neural {
        models: &'a [TrainedModel],
        latent: LatentConfig,
        observations: ObservationConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub resolution: usize,
    pub chamfer: ChamferConfig,
    pub mc: VectorMcConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            chamfer: ChamferConfig::default(),
            mc: VectorMcConfig::default(),
        }
    }
}

/// Outcome for one shape: a Chamfer value, or the error that stopped it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeResult {
    pub shape: String,
    pub chamfer: Option<Chamfer>,
    pub faces: usize,
    pub error: Option<String>,
}

impl ShapeResult {
    /// The reconstruction came out empty.
    pub fn is_empty_mesh(&self) -> bool {
        self.chamfer.is_some_and(|c| !c.is_finite())
    }
}

/// Per-shape Chamfer values (times 1000) for one representation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChamferReport {
    pub kind: FieldKind,
    pub task: Task,
    pub n_points: usize,
    pub n_resamplings: usize,
    /// Sorted by shape name.
    pub shapes: Vec<ShapeResult>,
}

impl ChamferReport {
    fn values(&self, metric: ChamferMetric) -> Vec<f64> {
        self.shapes
            .iter()
            .filter_map(|s| s.chamfer.map(|c| c.get(metric)))
            .collect()
    }

    /// Mean over shapes that produced a value; infinite if any mesh was empty.
    pub fn mean(&self, metric: ChamferMetric) -> Option<f64> {
        let v = self.values(metric);
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn median(&self, metric: ChamferMetric) -> Option<f64> {
        let mut v = self.values(metric);
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }

    pub fn get(&self, shape: &str) -> Option<&ShapeResult> {
        self.shapes.iter().find(|s| s.shape == shape)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Mean/median table, one row per report, plus failures.
pub fn report_table(reports: &[ChamferReport], metric: ChamferMetric) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<6} {:<14} {:>12} {:>12}  failed",
        "kind", "task", "mean", "median"
    );
    for r in reports {
        let failed: Vec<&str> = r
            .shapes
            .iter()
            .filter(|x| x.chamfer.is_none())
            .map(|x| x.shape.as_str())
            .collect();
        let _ = writeln!(
            s,
            "{:<6} {:<14} {:>12} {:>12}  {}",
            r.kind.to_string(),
            r.task.to_string(),
            fmt_opt(r.mean(metric)),
            fmt_opt(r.median(metric)),
            if failed.is_empty() {
                "-".to_string()
            } else {
                failed.join(",")
            }
        );
    }
    s
}

/// One line per shape and representation.
pub fn report_csv(reports: &[ChamferReport]) -> String {
    let mut s = String::from(
        "kind,task,shape,chamfer_euclidean,chamfer_squared,faces,n_points,n_resamplings,error\n",
    );
    for r in reports {
        for x in &r.shapes {
            let (e, q) = x.chamfer.map_or((String::new(), String::new()), |c| {
                (c.euclidean.to_string(), c.squared.to_string())
            });
            let err = x.error.as_deref().unwrap_or("").replace([',', '\n'], " ");
            let _ = writeln!(
                s,
                "{},{},{},{e},{q},{},{},{},{err}",
                r.kind, r.task, x.shape, x.faces, r.n_points, r.n_resamplings
            );
        }
    }
    s
}

/// Observations for a neural task.
pub fn task_observations(
    oracle: &FieldOracle,
    kind: FieldKind,
    task: &Task,
    config: &ObservationConfig,
) -> Result<Vec<TrainingSample>> {
    match task {
        Task::Reconstruct => visible_observations(oracle, None, kind, config),
        Task::Complete(view) => visible_observations(oracle, Some(view), kind, config),
        Task::Noise(sigma) => {
            let mut obs = visible_observations(oracle, None, kind, config)?;
            let positions: Vec<_> = obs.iter().map(|o| o.position).collect();
            let noisy = add_noise(&positions, *sigma, config.seed ^ 0x510e_527f_ade6_82d1)?;
            for (o, p) in obs.iter_mut().zip(noisy) {
                o.position = p;
            }
            Ok(obs)
        }
    }
}

fn shape_grid(
    oracle: &FieldOracle,
    kind: FieldKind,
    task: &Task,
    mode: &BenchMode,
    spec: &GridSpec,
) -> Result<FieldGrid> {
    match mode {
        BenchMode::Exact => sample_field_grid(oracle, kind, spec),
        BenchMode::Neural {
            models,
            latent,
            observations,
        } => {
            let model = models
                .iter()
                .find(|m| m.model.kind == kind)
                .ok_or_else(|| Error::InvalidArgument(format!("no trained model for {kind}")))?;
            let obs = task_observations(oracle, kind, task, observations)?;
            let fit = optimize_latent(&model.model, &obs, latent)?;
            neural_grid(&model.model, &fit.code, spec)
        }
    }
}

fn run_shape(
    name: &str,
    mesh: &TriMesh,
    kind: FieldKind,
    task: &Task,
    mode: &BenchMode,
    config: &BenchConfig,
) -> ShapeResult {
    let run = || -> Result<(Chamfer, usize)> {
        let oracle = FieldOracle::new(mesh.clone())?;
        let spec = GridSpec::cube(config.resolution)?;
        let grid = shape_grid(&oracle, kind, task, mode, &spec)?;
        let out = extract_auto(&grid, &config.mc)?;
        Ok((
            chamfer(&out.mesh, mesh, &config.chamfer),
            out.mesh.num_triangles(),
        ))
    };
    match run() {
        Ok((c, faces)) => ShapeResult {
            shape: name.to_string(),
            chamfer: Some(c),
            faces,
            error: None,
        },
        Err(e) => ShapeResult {
            shape: name.to_string(),
            chamfer: None,
            faces: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Reconstructs every shape under every representation and scores it
/// against the input mesh. Per-shape failures are recorded in the report.
pub fn run_benchmark(
    shapes: &[(String, TriMesh)],
    kinds: &[FieldKind],
    task: Task,
    mode: BenchMode,
    config: &BenchConfig,
) -> Result<Vec<ChamferReport>> {
    if shapes.is_empty() {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one shape".into(),
        ));
    }
    if kinds.is_empty() {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one representation".into(),
        ));
    }
    if matches!(mode, BenchMode::Exact) && task != Task::Reconstruct {
        return Err(Error::InvalidArgument(format!(
            "task {task} needs a trained model"
        )));
    }
    let mut order: Vec<&(String, TriMesh)> = shapes.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(kinds
        .iter()
        .map(|&kind| {
            let results: Vec<ShapeResult> = order
                .par_iter()
                .map(|(name, mesh)| run_shape(name, mesh, kind, &task, &mode, config))
                .collect();
            ChamferReport {
                kind,
                task,
                n_points: config.chamfer.n_points,
                n_resamplings: config.chamfer.resamplings,
                shapes: results,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use crate::neural::{train, TrainConfig};

    fn quick() -> BenchConfig {
        BenchConfig {
            resolution: 24,
            chamfer: ChamferConfig {
                n_points: 3000,
                resamplings: 1,
                seed: 0,
            },
            ..Default::default()
        }
    }

    fn four() -> Vec<(String, TriMesh)> {
        ["sphere", "torus", "box", "disk"]
            .iter()
            .map(|n| (n.to_string(), shapes::by_name(n).unwrap()))
            .collect()
    }

    #[test]
    fn exact_reconstruct_gates_sdf_on_open_disk() {
        let reports = run_benchmark(
            &four(),
            &[FieldKind::Vt, FieldKind::Dvt, FieldKind::Sdf],
            Task::Reconstruct,
            BenchMode::Exact,
            &quick(),
        )
        .unwrap();
        for r in &reports[..2] {
            for s in &r.shapes {
                let c = s
                    .chamfer
                    .unwrap_or_else(|| panic!("{} {}: {:?}", r.kind, s.shape, s.error));
                assert!(c.is_finite() && s.faces > 0);
            }
        }
        let sdf = &reports[2];
        assert!(sdf
            .get("disk")
            .unwrap()
            .error
            .as_ref()
            .unwrap()
            .contains("sign undefined"));
        assert!(sdf.get("sphere").unwrap().chamfer.is_some());
        let names: Vec<&str> = sdf.shapes.iter().map(|s| s.shape.as_str()).collect();
        assert_eq!(names, ["box", "disk", "sphere", "torus"]);
    }

    #[test]
    fn aggregates_match_per_shape_values() {
        let reports = run_benchmark(
            &four(),
            &[FieldKind::Dvt],
            Task::Reconstruct,
            BenchMode::Exact,
            &quick(),
        )
        .unwrap();
        let r = &reports[0];
        for metric in [ChamferMetric::Euclidean, ChamferMetric::Squared] {
            let mut v: Vec<f64> = r
                .shapes
                .iter()
                .map(|s| s.chamfer.unwrap().get(metric))
                .collect();
            assert!((r.mean(metric).unwrap() - v.iter().sum::<f64>() / 4.0).abs() < 1e-12);
            v.sort_by(f64::total_cmp);
            assert_eq!(r.median(metric).unwrap(), 0.5 * (v[1] + v[2]));
        }
        let one = run_benchmark(
            &four()[..1],
            &[FieldKind::Dvt],
            Task::Reconstruct,
            BenchMode::Exact,
            &quick(),
        )
        .unwrap();
        assert_eq!(one[0].shapes[0], *r.get("sphere").unwrap());
        let csv = report_csv(&reports);
        assert_eq!(csv.lines().count(), 5);
        assert!(report_table(&reports, ChamferMetric::Squared).contains("dvt"));
    }

    #[test]
    fn exact_mode_rejects_observation_tasks_and_empty_input() {
        let shapes = four();
        assert!(run_benchmark(
            &shapes,
            &[FieldKind::Vt],
            Task::Noise(0.1),
            BenchMode::Exact,
            &quick()
        )
        .is_err());
        assert!(run_benchmark(
            &[],
            &[FieldKind::Vt],
            Task::Reconstruct,
            BenchMode::Exact,
            &quick()
        )
        .is_err());
        assert!(
            run_benchmark(&shapes, &[], Task::Reconstruct, BenchMode::Exact, &quick()).is_err()
        );
    }

    #[test]
    fn neural_noise_at_zero_equals_reconstruct() {
        let shapes = vec![("sphere".to_string(), shapes::icosphere(0.5, 2))];
        let oracles = vec![(
            "sphere".to_string(),
            FieldOracle::new(shapes[0].1.clone()).unwrap(),
        )];
        let cfg = TrainConfig {
            latent_dim: 4,
            hidden: vec![16, 16],
            epochs: 20,
            points_per_batch: 256,
            n_near: 300,
            n_uniform: 100,
            ..Default::default()
        };
        let models = vec![train(&oracles, &cfg).unwrap()];
        let mode = BenchMode::Neural {
            models: &models,
            latent: LatentConfig {
                iters: 5,
                ..Default::default()
            },
            observations: ObservationConfig {
                n_surface: 300,
                ..Default::default()
            },
        };
        let a =
            run_benchmark(&shapes, &[FieldKind::Vt], Task::Reconstruct, mode, &quick()).unwrap();
        let b = run_benchmark(&shapes, &[FieldKind::Vt], Task::Noise(0.0), mode, &quick()).unwrap();
        assert_eq!(a[0].shapes, b[0].shapes);
        let missing = run_benchmark(
            &shapes,
            &[FieldKind::Sdf],
            Task::Reconstruct,
            mode,
            &quick(),
        )
        .unwrap();
        assert!(missing[0].shapes[0]
            .error
            .as_ref()
            .unwrap()
            .contains("no trained model"));
    }
}
