use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vecfield::eval::{
    chamfer, report_csv, report_table, run_benchmark, task_observations, BenchConfig, BenchMode,
    ChamferConfig, ChamferReport, ObservationConfig, Task,
};
use vecfield::field::{sample_field_grid, FieldGrid, GridSpec};
use vecfield::geometry::{io, shapes};
use vecfield::grid_ops::{divergence, surface_cells};
use vecfield::mc::{extract_auto, VectorMcConfig};
use vecfield::neural::{
    load_checkpoint, neural_grid, optimize_latent, save_checkpoint, train_with_progress,
    LatentConfig, TrainConfig, TrainedModel,
};
use vecfield::{FieldOracle, TriMesh};

use crate::{CompleteArgs, EvalArgs, ExtractArgs, FieldArgs, FitArgs, TaskArg};

/// 1 for failures inside a computation, 2 for everything caused by input.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<vecfield::Error>() {
        Some(vecfield::Error::Diverged { .. }) => 1,
        _ => 2,
    }
}

/// A procedural shape by name, otherwise a mesh file.
fn load_shape(spec: &str, normalize: bool) -> Result<(String, TriMesh)> {
    let (name, mesh) = match shapes::by_name(spec) {
        Some(m) => (spec.to_string(), m),
        None => {
            let path = Path::new(spec);
            if !path.exists() {
                bail!(
                    "{spec:?} is neither a mesh file nor one of {}",
                    shapes::NAMES.join(", ")
                );
            }
            let mesh = io::read_mesh(path).with_context(|| format!("reading {spec}"))?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(spec)
                .to_string();
            (stem, mesh)
        }
    };
    if mesh.is_empty() {
        return Err(vecfield::Error::NoSurface).with_context(|| format!("shape {spec}"));
    }
    Ok((
        name,
        if normalize {
            mesh.normalize_to_unit_cube(0.05).0
        } else {
            mesh
        },
    ))
}

fn grid_spec(res: u32) -> Result<GridSpec> {
    Ok(GridSpec::cube(res as usize)?)
}

pub fn field(a: &FieldArgs) -> Result<()> {
    println!("# vecfield field {a:?}");
    let (_, mesh) = load_shape(&a.mesh, a.normalize)?;
    let oracle = FieldOracle::new(mesh)?;
    let grid = sample_field_grid(&oracle, a.kind, &grid_spec(a.res)?)?;
    grid.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(text) = &a.text {
        std::fs::write(text, grid.to_text())
            .with_context(|| format!("writing {}", text.display()))?;
    }
    let (min, max, mean) = grid.stats();
    println!(
        "grid {} {}^3 values min {min:.6} max {max:.6} mean {mean:.6}",
        a.kind, a.res
    );
    Ok(())
}

pub fn extract(a: &ExtractArgs) -> Result<()> {
    let header = format!("vecfield extract {a:?}");
    println!("# {header}");
    let grid = FieldGrid::load(&a.grid).with_context(|| format!("reading {}", a.grid.display()))?;
    let config = VectorMcConfig {
        threshold: a.threshold,
        rule: a.rule,
        extend_band: !a.no_band,
    };
    if let Some(path) = &a.cells {
        if !grid.kind.is_vector() {
            bail!("--cells needs a vector grid, got {}", grid.kind);
        }
        let mask = surface_cells(&divergence(&grid)?, a.threshold);
        std::fs::write(path, mask.to_rle())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let out = extract_auto(&grid, &config)?;
    io::write_obj(&a.out, &out.mesh, Some(&header))?;
    match out.stats {
        Some(s) => println!(
            "path mcvector: active cells {} band cells {} clustered cells {} components {} faces {}",
            s.active_cells,
            s.band_cells,
            s.clustered_cells,
            s.components,
            out.mesh.num_triangles()
        ),
        None => println!("path mc: faces {}", out.mesh.num_triangles()),
    }
    Ok(())
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_kv(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => TrainConfig::default(),
    };
    if let Some(k) = a.kind {
        cfg.kind = k;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    println!("# vecfield fit {a:?}");
    for line in cfg.to_kv().lines() {
        println!("# {line}");
    }
    let shapes = a
        .shapes
        .iter()
        .map(|s| {
            let (name, mesh) = load_shape(s, a.normalize)?;
            Ok((name, FieldOracle::new(mesh)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let every = (cfg.epochs / 20).max(1);
    let model = train_with_progress(&shapes, &cfg, |epoch, loss| {
        if epoch % every == 0 || epoch + 1 == cfg.epochs {
            eprintln!("epoch {epoch} loss {loss:.6}");
        }
    })?;
    save_checkpoint(&a.out, &model)?;
    let trace = a
        .trace
        .clone()
        .unwrap_or_else(|| a.out.with_extension("loss.txt"));
    let mut text = String::new();
    for line in cfg.to_kv().lines() {
        let _ = writeln!(text, "# {line}");
    }
    for (i, l) in model.losses.iter().enumerate() {
        let _ = writeln!(text, "{i} {l}");
    }
    std::fs::write(&trace, text).with_context(|| format!("writing {}", trace.display()))?;
    let first = model.losses.first().copied().unwrap_or(f64::NAN);
    let last = model.losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} shapes: loss {first:.6} -> {last:.6}; wrote {} and {}",
        shapes.len(),
        a.out.display(),
        trace.display()
    );
    Ok(())
}

pub fn complete(a: &CompleteArgs) -> Result<()> {
    let header = format!("vecfield complete {a:?}");
    println!("# {header}");
    let model =
        load_checkpoint(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let (name, mesh) = load_shape(&a.shape, a.normalize)?;
    let oracle = FieldOracle::new(mesh)?;
    let kind = model.model.kind;
    let task = match (a.view, a.noise) {
        (Some(_), n) if n != 0.0 => bail!("--view and --noise cannot be combined"),
        (Some(v), _) => Task::Complete(v),
        (None, n) if n != 0.0 => Task::Noise(n),
        (None, _) => Task::Reconstruct,
    };
    let obs_cfg = ObservationConfig {
        n_surface: a.samples,
        seed: a.seed,
        ..Default::default()
    };
    let obs = task_observations(&oracle, kind, &task, &obs_cfg)?;
    let latent = LatentConfig {
        iters: a.iters,
        seed: a.seed,
        ..Default::default()
    };
    let fit = optimize_latent(&model.model, &obs, &latent)?;
    let grid = neural_grid(&model.model, &fit.code, &grid_spec(a.res)?)?;
    let out = extract_auto(&grid, &VectorMcConfig::default())?;
    io::write_obj(&a.out, &out.mesh, Some(&header))?;
    let cd = chamfer(
        &out.mesh,
        oracle.mesh(),
        &ChamferConfig {
            n_points: a.points,
            resamplings: 3,
            seed: a.seed,
        },
    );
    println!(
        "{name} {task} {kind}: {} observations, faces {}, chamfer x1000 {:.6} (squared {:.6})",
        obs.len(),
        out.mesh.num_triangles(),
        cd.euclidean,
        cd.squared
    );
    Ok(())
}

fn load_models(paths: &[PathBuf]) -> Result<Vec<TrainedModel>> {
    paths
        .iter()
        .map(|p| load_checkpoint(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    println!("# vecfield eval {a:?}");
    let shapes: Vec<(String, TriMesh)> = a
        .shapes
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| load_shape(s, a.normalize))
        .collect::<Result<_>>()?;
    if shapes.is_empty() {
        bail!("no shapes given");
    }
    if a.kinds.is_empty() {
        bail!("no representations given");
    }
    let models = load_models(&a.models)?;
    for k in &a.kinds {
        if !models.is_empty() && !models.iter().any(|m| m.model.kind == *k) {
            bail!("no checkpoint among --models predicts {k}");
        }
    }
    let mode = if models.is_empty() {
        BenchMode::Exact
    } else {
        BenchMode::Neural {
            models: &models,
            latent: LatentConfig {
                iters: a.iters,
                seed: a.seed,
                ..Default::default()
            },
            observations: ObservationConfig {
                seed: a.seed,
                ..Default::default()
            },
        }
    };
    let tasks: Vec<Task> = match a.task {
        TaskArg::Reconstruct => vec![Task::Reconstruct],
        TaskArg::Complete => vec![Task::Complete(a.view)],
        TaskArg::Noise => {
            if a.sigma.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                bail!("noise levels must be finite and >= 0");
            }
            a.sigma.iter().map(|&s| Task::Noise(s)).collect()
        }
    };
    if matches!(mode, BenchMode::Exact) && a.task != TaskArg::Reconstruct {
        bail!("the {:?} task needs trained --models", a.task);
    }
    let config = BenchConfig {
        resolution: a.res as usize,
        chamfer: ChamferConfig {
            n_points: a.points,
            resamplings: a.resamplings,
            seed: a.seed,
        },
        mc: VectorMcConfig::default(),
    };
    let mut reports: Vec<ChamferReport> = Vec::new();
    for task in tasks {
        reports.extend(run_benchmark(&shapes, &a.kinds, task, mode, &config)?);
    }
    println!(
        "chamfer x1000 ({}), {} points, {} resamplings",
        a.metric, a.points, a.resamplings
    );
    print!("{}", report_table(&reports, a.metric));
    for r in &reports {
        for s in &r.shapes {
            if let Some(e) = &s.error {
                println!("{} {} {}: {e}", r.kind, r.task, s.shape);
            }
        }
    }
    if let Some(path) = &a.csv {
        std::fs::write(path, report_csv(&reports))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
