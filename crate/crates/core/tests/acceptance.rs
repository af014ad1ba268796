//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so every line is printed. Pass substrings as
//! arguments to run a subset, e.g. `cargo test --test acceptance -- parity`.
//! Failures only set the exit status with `VECFIELD_ACCEPTANCE_STRICT=1`, so
//! a workspace test run still reaches the other test targets.
//! Absolute Chamfer thresholds apply to the squared-distance variant; the
//! unsquared value is printed alongside.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vecfield::eval::{
    chamfer, run_benchmark, visible_observations, BenchConfig, BenchMode, Chamfer, ChamferConfig,
    ChamferMetric, ObservationConfig, Task, ViewSpec,
};
use vecfield::field::{
    sample_field_grid, sample_field_grids, GridSpec, TrainingSample, Truncation,
};
use vecfield::geometry::{io::obj_string, sample_surface_points, shapes};
use vecfield::grid_ops::divergence;
use vecfield::mc::{extract_mesh_scalar, extract_mesh_vector, VectorMcConfig};
use vecfield::neural::{
    checkpoint_bytes, evaluate_loss, loss_and_gradients, loss_dvt, loss_vt, neural_grid,
    optimize_latent, train, Activation, LatentConfig, Mlp, TrainConfig, TrainedModel,
};
use vecfield::{Error, FieldKind, FieldOracle, FieldValue, TriMesh, Vec3};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

struct Suite {
    filters: Vec<String>,
    failed: usize,
    ran: usize,
}

impl Suite {
    fn wants(&self, id: &str) -> bool {
        self.filters.is_empty() || self.filters.iter().any(|f| id.contains(f.as_str()))
    }

    /// Runs one criterion; exceeding `limit` fails it.
    fn run(&mut self, id: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        if !self.wants(id) {
            return;
        }
        let start = Instant::now();
        let o = f();
        let took = start.elapsed();
        let pass = o.pass && took < limit;
        self.ran += 1;
        if !pass {
            self.failed += 1;
        }
        println!(
            "{} {id}: {} [{:.1}s, limit {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
}

fn mins(m: u64) -> Duration {
    Duration::from_secs(60 * m)
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn oracle(name: &str) -> FieldOracle {
    FieldOracle::new(shapes::by_name(name).expect("known shape")).expect("valid mesh")
}

fn plane_at(z: f64) -> TriMesh {
    shapes::square(1.0, 4).transformed(|p| p + Vec3::new(0.0, 0.0, z))
}

fn fmt_cd(c: &Chamfer) -> String {
    format!("sq {:.4} / l2 {:.2}", c.squared, c.euclidean)
}

// Divergence level set: on exact VT grids the cells with D <= -1.5 hug the
// surface, and cells close to the surface are all found.
fn divergence_level_set() -> Outcome {
    let spec = GridSpec::cube(64).expect("grid");
    let h = spec.spacing.x;
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, o) in [
        ("plane", FieldOracle::new(plane_at(0.0)).expect("plane")),
        ("sphere", oracle("sphere")),
        ("torus", oracle("torus")),
    ] {
        let grids = sample_field_grids(&o, &[FieldKind::Vt, FieldKind::Udf], &spec).expect("grids");
        let d = divergence(&grids[0]).expect("divergence");
        let udf = grids[1].scalars().expect("udf");
        let cells = d.spec;
        let (mut far, mut missed, mut near) = (0, 0, 0);
        let mut worst_missed = f64::NEG_INFINITY;
        for c in 0..cells.len() {
            let [i, j, k] = cells.coords(c);
            let corner_min = (0..8)
                .map(|b| udf[spec.index(i + (b & 1), j + ((b >> 1) & 1), k + (b >> 2))])
                .fold(f64::INFINITY, f64::min);
            let active = d.values[c] <= -1.5;
            // A center within 0.5h has every corner within (0.5 + sqrt(3)/2) h.
            if !active && corner_min > 1.37 * h {
                continue;
            }
            let dist = o.udf_at(&d.center(c));
            if active && dist > 2.0 * h {
                far += 1;
            }
            if dist <= 0.5 * h {
                near += 1;
                if !active {
                    missed += 1;
                    worst_missed = worst_missed.max(d.values[c]);
                }
            }
        }
        pass &= far == 0 && missed == 0;
        notes.push(format!("{name}: {far} active cells beyond 2h, {missed}/{near} near cells missed (max D {worst_missed:.2})"));
        if name == "plane" {
            // z = 0 runs through the middle cell layer.
            let k = cells.dims[2] / 2;
            let mut worst: f64 = 0.0;
            for j in 0..cells.dims[1] {
                for i in 0..cells.dims[0] {
                    worst = worst.max((d.get(i, j, k) + 2.0).abs());
                }
            }
            pass &= worst <= 1e-9;
            notes.push(format!("plane cells |D + 2| max {worst:.1e}"));
        }
    }
    outcome(pass, notes.join("; "))
}

// Two parallel planes: the medial plane between them has positive divergence.
fn medial_axis_positive() -> Outcome {
    let spec = GridSpec::cube(32).expect("grid");
    let o = FieldOracle::new(plane_at(-0.4).merged(&plane_at(0.4))).expect("planes");
    let d = divergence(&sample_field_grid(&o, FieldKind::Vt, &spec).expect("grid"))
        .expect("divergence");
    let cells = d.spec;
    // The medial plane z = 0 runs through the middle cell layer (dims odd).
    let k = cells.dims[2] / 2;
    let mut min = f64::INFINITY;
    for j in 0..cells.dims[1] {
        for i in 0..cells.dims[0] {
            min = min.min(d.get(i, j, k));
        }
    }
    outcome(
        min >= 1.5,
        format!(
            "min D on {} medial cells = {min:.6}",
            cells.dims[0] * cells.dims[1]
        ),
    )
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    (a.dot(b) / (a.norm() * b.norm()))
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

fn off_medial_axis(o: &FieldOracle, x: &Vec3, r: f64) -> bool {
    let v = o.vt_at(x);
    (0..6).all(|k| {
        let mut e = Vec3::zeros();
        e[k / 2] = if k % 2 == 0 { r } else { -r };
        angle_deg(&o.vt_at(&(x + e)), &v) < 0.5
    })
}

// VT equals the negative unsigned-distance gradient away from the surface
// and the medial axis.
fn vt_is_negative_udf_gradient() -> Outcome {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["torus", "sphere", "box"] {
        let o = oracle(name);
        let mut n = 0;
        while n < 334 && checked < 1000 {
            let x = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if o.udf_at(&x) <= 0.05 || !off_medial_axis(&o, &x, 1e-3) {
                continue;
            }
            let mut g = Vec3::zeros();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                g[k] = (o.udf_at(&(x + e)) - o.udf_at(&(x - e))) / (2.0 * h);
            }
            worst = worst.max(angle_deg(&o.vt_at(&x), &-g));
            n += 1;
            checked += 1;
        }
    }
    outcome(
        checked == 1000 && worst < 1.0,
        format!("{checked} points, max angle {worst:.2e} deg"),
    )
}

// MCvector on exact DVT against scalar MC on exact SDF at 128^3.
fn mc_parity() -> Outcome {
    let spec = GridSpec::cube(128).expect("grid");
    let cfg = ChamferConfig::default();
    let mut pass = true;
    let mut notes = Vec::new();
    for name in ["sphere", "torus", "box"] {
        let o = oracle(name);
        let grids =
            sample_field_grids(&o, &[FieldKind::Dvt, FieldKind::Sdf], &spec).expect("grids");
        let vector = extract_mesh_vector(&grids[0], &VectorMcConfig::default())
            .expect("mcvector")
            .mesh;
        let scalar = extract_mesh_scalar(&grids[1], 0.0).expect("mc");
        let cv = chamfer(&vector, o.mesh(), &cfg);
        let cs = chamfer(&scalar, o.mesh(), &cfg);
        pass &= cv.squared <= 2.0 * cs.squared && cv.squared <= 1.0 && cs.squared <= 1.0;
        notes.push(format!(
            "{name}: mcvector {} vs mc {}",
            fmt_cd(&cv),
            fmt_cd(&cs)
        ));
    }
    outcome(pass, notes.join("; "))
}

// Open disk: the vector path reconstructs it, the signed path refuses.
fn open_surface() -> Outcome {
    let o = oracle("disk");
    let spec = GridSpec::cube(128).expect("grid");
    let grid = sample_field_grid(&o, FieldKind::Vt, &spec).expect("vt grid");
    let mesh = extract_mesh_vector(&grid, &VectorMcConfig::default())
        .expect("mcvector")
        .mesh;
    let c = chamfer(&mesh, o.mesh(), &ChamferConfig::default());
    let sdf_grid = sample_field_grid(&o, FieldKind::Sdf, &spec);
    let refused = matches!(sdf_grid, Err(Error::SignUndefined))
        && matches!(o.sdf_at(&Vec3::zeros()), Err(Error::SignUndefined))
        && Error::SignUndefined.to_string().contains("sign undefined");
    outcome(
        !mesh.is_empty() && c.squared < 1.0 && refused,
        format!(
            "{} faces, {}, sdf refused: {refused}",
            mesh.num_triangles(),
            fmt_cd(&c)
        ),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm() > 0.1 && v.norm() < 1.0 {
            return v.normalize();
        }
    }
}

// Central differences against every analytic gradient.
fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..200 {
        let t = random_unit(&mut rng);
        let p = random_unit(&mut rng) * rng.gen_range(0.1..2.0);
        let d = rng.gen_range(1e-5..2.0);
        if (p.norm() - d).abs() < 1e-3 {
            continue;
        }
        let (_, gv) = loss_vt(&p, &t);
        let (_, gd) = loss_dvt(&p, &t, d);
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fv = (loss_vt(&(p + e), &t).0 - loss_vt(&(p - e), &t).0) / (2.0 * h);
            let fd = (loss_dvt(&(p + e), &t, d).0 - loss_dvt(&(p - e), &t, d).0) / (2.0 * h);
            worst = worst.max(rel_err(gv[k], fv)).max(rel_err(gd[k], fd));
        }
    }
    let none = Truncation::none();
    for seed in 0..4u64 {
        for kind in [FieldKind::Vt, FieldKind::Dvt] {
            let activation = if seed % 2 == 0 {
                Activation::Softplus { beta: 2.0 }
            } else {
                Activation::Tanh
            };
            let model = Mlp::new(kind, 3, &[8, 8], activation, seed).expect("model");
            let code: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let samples: Vec<TrainingSample> = (0..6)
                .map(|_| {
                    let position = random_unit(&mut rng) * rng.gen_range(0.0..1.0);
                    let dir = random_unit(&mut rng);
                    let target = if kind == FieldKind::Vt {
                        dir
                    } else {
                        dir * rng.gen_range(0.05..1.0)
                    };
                    TrainingSample {
                        position,
                        target: FieldValue::Vector(target),
                    }
                })
                .collect();
            let (_, grad, code_grad) =
                loss_and_gradients(&model, &code, &samples, &none).expect("gradients");
            let params = model.parameters();
            for (i, g) in grad.flat().iter().enumerate() {
                let mut m = model.clone();
                let mut q = params.clone();
                q[i] += h;
                m.set_parameters(&q).expect("params");
                let up = evaluate_loss(&m, &code, &samples, &none).expect("loss");
                q[i] -= 2.0 * h;
                m.set_parameters(&q).expect("params");
                let down = evaluate_loss(&m, &code, &samples, &none).expect("loss");
                worst = worst.max(rel_err(*g, (up - down) / (2.0 * h)));
            }
            for (i, g) in code_grad.iter().enumerate() {
                let mut c = code.clone();
                c[i] += h;
                let up = evaluate_loss(&model, &c, &samples, &none).expect("loss");
                c[i] -= 2.0 * h;
                let down = evaluate_loss(&model, &c, &samples, &none).expect("loss");
                worst = worst.max(rel_err(*g, (up - down) / (2.0 * h)));
            }
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn training_shapes() -> Vec<(String, FieldOracle)> {
    ["sphere", "torus", "box"]
        .iter()
        .map(|n| (n.to_string(), oracle(n)))
        .collect()
}

fn bench_shapes() -> Vec<(String, TriMesh)> {
    ["sphere", "torus", "box"]
        .iter()
        .map(|n| (n.to_string(), shapes::by_name(n).expect("shape")))
        .collect()
}

fn neural_mode(models: &[TrainedModel]) -> BenchMode<'_> {
    BenchMode::Neural {
        models,
        latent: LatentConfig::default(),
        observations: ObservationConfig::default(),
    }
}

fn mean_sq(models: &[TrainedModel], kind: FieldKind, task: Task) -> (f64, Vec<f64>) {
    let r = run_benchmark(
        &bench_shapes(),
        &[kind],
        task,
        neural_mode(models),
        &BenchConfig::default(),
    )
    .expect("benchmark")
    .remove(0);
    let per: Vec<f64> = r
        .shapes
        .iter()
        .map(|s| s.chamfer.map_or(f64::INFINITY, |c| c.squared))
        .collect();
    (r.mean(ChamferMetric::Squared).unwrap_or(f64::INFINITY), per)
}

// Auto-decoder on three shapes: held-in reconstructions, then the
// VT/DVT ordering on full and half-view observations.
fn desk_fit(models: &mut Vec<TrainedModel>) -> Outcome {
    let shapes = training_shapes();
    let spec = GridSpec::cube(64).expect("grid");
    let mut pass = true;
    let mut notes = Vec::new();
    for kind in [FieldKind::Vt, FieldKind::Dvt] {
        let cfg = TrainConfig {
            kind,
            ..TrainConfig::default()
        };
        let m = match train(&shapes, &cfg) {
            Ok(m) => m,
            Err(e) => return outcome(false, format!("{kind} training failed: {e}")),
        };
        let mut held = Vec::new();
        for (name, o) in &shapes {
            let grid = neural_grid(&m.model, m.code(name).expect("code"), &spec).expect("grid");
            let mesh = extract_mesh_vector(&grid, &VectorMcConfig::default())
                .expect("mcvector")
                .mesh;
            let c = chamfer(&mesh, o.mesh(), &ChamferConfig::default());
            pass &= c.squared < 5.0;
            held.push(format!("{name} {}", fmt_cd(&c)));
        }
        notes.push(format!("{kind} held-in [{}]", held.join(", ")));
        models.push(m);
    }
    let (vt_full, _) = mean_sq(models, FieldKind::Vt, Task::Reconstruct);
    let (dvt_full, _) = mean_sq(models, FieldKind::Dvt, Task::Reconstruct);
    let half = Task::Complete(ViewSpec::new(1).expect("view"));
    let (vt_half, _) = mean_sq(models, FieldKind::Vt, half);
    let (dvt_half, _) = mean_sq(models, FieldKind::Dvt, half);
    pass &= vt_full <= dvt_full && dvt_half <= vt_half;
    notes.push(format!("full: vt {vt_full:.4} <= dvt {dvt_full:.4}; half-view: dvt {dvt_half:.4} <= vt {vt_half:.4}"));
    outcome(pass, notes.join("; "))
}

// Chamfer grows with observation noise, one inversion allowed per shape.
fn noise_trend(models: &[TrainedModel]) -> Outcome {
    if models.is_empty() {
        return outcome(false, "no trained model (desk fit did not run)");
    }
    let sigmas = [0.0, 0.01, 0.05, 0.1];
    let per_sigma: Vec<Vec<f64>> = sigmas
        .iter()
        .map(|&s| mean_sq(models, FieldKind::Vt, Task::Noise(s)).1)
        .collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for (i, name) in ["box", "sphere", "torus"].iter().enumerate() {
        let series: Vec<f64> = per_sigma.iter().map(|v| v[i]).collect();
        let inversions = series.windows(2).filter(|w| w[1] < w[0]).count();
        pass &= inversions <= 1;
        let s: Vec<String> = series.iter().map(|v| format!("{v:.4}")).collect();
        notes.push(format!(
            "{name} [{}] {inversions} inversion(s)",
            s.join(", ")
        ));
    }
    outcome(pass, notes.join("; "))
}

fn stage_outputs() -> Vec<(&'static str, Vec<u8>)> {
    let mut out = Vec::new();
    let o = oracle("torus");
    let spec = GridSpec::cube(24).expect("grid");
    let pts = sample_surface_points(o.mesh(), 2000, 3).expect("samples");
    out.push(("surface samples", format!("{pts:?}").into_bytes()));
    let vt = sample_field_grid(&o, FieldKind::Vt, &spec).expect("vt");
    let sdf = sample_field_grid(&o, FieldKind::Sdf, &spec).expect("sdf");
    let dvt = sample_field_grid(&o, FieldKind::Dvt, &spec).expect("dvt");
    out.push(("vt grid", vt.to_bytes()));
    out.push(("sdf grid", sdf.to_bytes()));
    let d = divergence(&vt).expect("divergence");
    out.push((
        "divergence",
        d.values.iter().flat_map(|v| v.to_le_bytes()).collect(),
    ));
    out.push((
        "mc",
        obj_string(&extract_mesh_scalar(&sdf, 0.0).expect("mc"), None).into_bytes(),
    ));
    let mv = extract_mesh_vector(&dvt, &VectorMcConfig::default()).expect("mcvector");
    out.push(("mcvector", obj_string(&mv.mesh, None).into_bytes()));
    let c = chamfer(
        &mv.mesh,
        o.mesh(),
        &ChamferConfig {
            n_points: 5000,
            resamplings: 2,
            seed: 4,
        },
    );
    out.push(("chamfer", format!("{c:?}").into_bytes()));
    let view = ViewSpec::new(3).expect("view");
    let obs_cfg = ObservationConfig {
        n_surface: 1500,
        ..Default::default()
    };
    let obs = visible_observations(&o, Some(&view), FieldKind::Vt, &obs_cfg).expect("observations");
    out.push(("observations", format!("{obs:?}").into_bytes()));
    let cfg = TrainConfig {
        latent_dim: 8,
        hidden: vec![32, 32],
        epochs: 20,
        points_per_batch: 512,
        n_near: 800,
        n_uniform: 200,
        seed: 7,
        ..Default::default()
    };
    let m = train(&[("torus".to_string(), o.clone())], &cfg).expect("train");
    out.push(("checkpoint", checkpoint_bytes(&m)));
    out.push(("loss trace", format!("{:?}", m.losses).into_bytes()));
    let fit = optimize_latent(
        &m.model,
        &obs,
        &LatentConfig {
            iters: 10,
            ..Default::default()
        },
    )
    .expect("latent");
    out.push(("latent code", format!("{:?}", fit.code).into_bytes()));
    out.push((
        "neural grid",
        neural_grid(&m.model, &fit.code, &spec)
            .expect("grid")
            .to_bytes(),
    ));
    out
}

// Every stage twice with the same seeds and thread count.
fn determinism() -> Outcome {
    let run = || {
        rayon::ThreadPoolBuilder::new()
            .num_threads(2)
            .build()
            .expect("pool")
            .install(stage_outputs)
    };
    let (a, b) = (run(), run());
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0)
        .collect();
    let pass = differing.is_empty() && a.len() == b.len();
    outcome(
        pass,
        if pass {
            format!("{} stages byte-identical", a.len())
        } else {
            format!("differs: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let filters = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut suite = Suite {
        filters,
        failed: 0,
        ran: 0,
    };
    suite.run("divergence-level-set", secs(5), divergence_level_set);
    suite.run("medial-axis-positive", secs(1), medial_axis_positive);
    suite.run("vt-udf-gradient", secs(5), vt_is_negative_udf_gradient);
    suite.run("mc-parity", secs(60), mc_parity);
    suite.run("open-surface", secs(30), open_surface);
    suite.run("gradient-oracle", secs(10), gradient_oracle);
    let mut models = Vec::new();
    suite.run("desk-fit", mins(15), || desk_fit(&mut models));
    if suite.wants("noise-trend") && models.is_empty() {
        let shapes = training_shapes();
        if let Ok(m) = train(&shapes, &TrainConfig::default()) {
            models.push(m);
        }
    }
    suite.run("noise-trend", mins(10), || noise_trend(&models));
    suite.run("determinism", secs(120), determinism);
    println!("acceptance: {} run, {} failed", suite.ran, suite.failed);
    let strict = std::env::var_os("VECFIELD_ACCEPTANCE_STRICT").is_some_and(|v| v == "1");
    if suite.failed == 0 || !strict {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
