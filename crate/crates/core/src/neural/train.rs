use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::adam::Adam;
use super::config::{LatentConfig, TrainConfig};
use super::losses::batch_loss;
use super::mlp::{code_gradient, Mlp, MlpGrad};
use crate::error::{Error, Result};
use crate::field::{
    sample_training_points, training_samples, FieldGrid, FieldOracle, FieldValue, GridSpec,
    TrainingSample, Truncation,
};
use crate::geometry::Vec3;

/// Latent code of one training shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedCode {
    pub name: String,
    pub code: Vec<f64>,
}

/// Network, per-shape codes and the per-epoch mean loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: Mlp,
    pub codes: Vec<NamedCode>,
    pub losses: Vec<f64>,
}

impl TrainedModel {
    pub fn code(&self, name: &str) -> Option<&[f64]> {
        self.codes
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.code.as_slice())
    }
}

/// Result of test-time code optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFit {
    pub code: Vec<f64>,
    /// Mean loss before each iteration.
    pub losses: Vec<f64>,
}

pub(crate) fn shape_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

fn init_code(latent_dim: usize, std: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if std == 0.0 {
        return vec![0.0; latent_dim];
    }
    let normal = Normal::new(0.0, std).expect("std checked by caller");
    (0..latent_dim).map(|_| normal.sample(rng)).collect()
}

struct Chunk {
    loss: f64,
    grad: Option<MlpGrad>,
    code_grad: Vec<f64>,
}

/// Loss and gradients of `model` on `samples` with `code`, the loss
/// weighted by `weight` (the chunk's share of the batch).
fn chunk_gradient(
    model: &Mlp,
    code: &[f64],
    samples: &[&TrainingSample],
    truncation: &Truncation,
    weight: f64,
    with_params: bool,
) -> Result<Chunk> {
    let points: Vec<Vec3> = samples.iter().map(|s| s.position).collect();
    let targets: Vec<FieldValue> = samples.iter().map(|s| s.target).collect();
    let x = model.inputs(code, &points)?;
    let (out, cache) = model.forward_batch(x.view())?;
    let (loss, mut g_out) = batch_loss(model.kind, &out, &targets, truncation)?;
    g_out *= weight;
    let mut grad = with_params.then(|| model.zero_grad());
    let g_in = model.backward(&cache, &g_out, grad.as_mut());
    Ok(Chunk {
        loss: loss * weight,
        grad,
        code_grad: code_gradient(&g_in, model.latent_dim).to_vec(),
    })
}

/// Gradient of the Gaussian code prior `lambda * |code|^2`, scaled like the
/// data term. The reported loss stays the representation loss alone.
fn add_code_prior(chunk: &mut Chunk, code: &[f64], lambda: f64, weight: f64) {
    for (g, z) in chunk.code_grad.iter_mut().zip(code) {
        *g += weight * 2.0 * lambda * z;
    }
}

/// Oracle targets for every training shape, from each shape's own sampling seed.
pub fn training_sets(
    shapes: &[(String, FieldOracle)],
    config: &TrainConfig,
) -> Result<Vec<Vec<TrainingSample>>> {
    shapes
        .par_iter()
        .enumerate()
        .map(|(i, (_, oracle))| {
            let pts = sample_training_points(
                oracle.mesh(),
                config.n_near,
                config.n_uniform,
                config.sigma_near,
                shape_seed(config.seed, i),
            )?;
            training_samples(oracle, &pts, config.kind, config.truncation)
        })
        .collect()
}

/// Jointly fits the network and one code per shape.
pub fn train(shapes: &[(String, FieldOracle)], config: &TrainConfig) -> Result<TrainedModel> {
    train_with_progress(shapes, config, |_, _| {})
}

/// [`train`] with a callback after every epoch (`epoch`, mean loss).
pub fn train_with_progress(
    shapes: &[(String, FieldOracle)],
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainedModel> {
    config.validate()?;
    if shapes.is_empty() {
        return Err(Error::InvalidArgument(
            "training needs at least one shape".into(),
        ));
    }
    let sets = training_sets(shapes, config)?;
    train_on_samples(
        shapes.iter().map(|(n, _)| n.clone()).collect(),
        &sets,
        config,
        &mut progress,
    )
}

/// Training loop over precomputed samples, one set per named shape.
pub fn train_on_samples(
    names: Vec<String>,
    sets: &[Vec<TrainingSample>],
    config: &TrainConfig,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainedModel> {
    config.validate()?;
    if names.len() != sets.len() || sets.is_empty() || sets.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument(
            "every training shape needs samples".into(),
        ));
    }
    let mut model = Mlp::new(
        config.kind,
        config.latent_dim,
        &config.hidden,
        config.activation,
        config.seed,
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x3c6e_f372_fe94_f82b);
    let mut codes: Vec<Vec<f64>> = names
        .iter()
        .map(|_| init_code(config.latent_dim, config.code_std, &mut rng))
        .collect();
    let mut net_opt = Adam::new(model.num_parameters(), config.lr_net);
    let mut code_opts: Vec<Adam> = names
        .iter()
        .map(|_| Adam::new(config.latent_dim, config.lr_codes))
        .collect();

    let mut losses = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..names.len()).collect();
    for epoch in 0..config.epochs {
        // Fisher-Yates shuffle of the shape order.
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut epoch_loss = 0.0;
        let batches: Vec<Vec<usize>> = order
            .chunks(config.batch_shapes)
            .map(<[usize]>::to_vec)
            .collect();
        for batch in &batches {
            let per_shape = (config.points_per_batch / batch.len()).max(1);
            let picks: Vec<Vec<&TrainingSample>> = batch
                .iter()
                .map(|&s| {
                    (0..per_shape)
                        .map(|_| &sets[s][rng.gen_range(0..sets[s].len())])
                        .collect()
                })
                .collect();
            let weight = 1.0 / batch.len() as f64;
            let chunks: Vec<Chunk> = batch
                .par_iter()
                .zip(&picks)
                .map(|(&s, samples)| {
                    let mut c = chunk_gradient(
                        &model,
                        &codes[s],
                        samples,
                        &config.truncation,
                        weight,
                        true,
                    )?;
                    add_code_prior(&mut c, &codes[s], config.code_reg, weight);
                    Ok(c)
                })
                .collect::<Result<_>>()?;

            let mut grad = model.zero_grad();
            let mut loss = 0.0;
            for c in &chunks {
                loss += c.loss;
                for (g, cg) in grad
                    .layers
                    .iter_mut()
                    .zip(&c.grad.as_ref().expect("params requested").layers)
                {
                    g.weights += &cg.weights;
                    g.bias += &cg.bias;
                }
            }
            if !loss.is_finite() {
                return Err(Error::Diverged { step: epoch, loss });
            }
            let flat = grad.flat();
            net_opt.step(
                model
                    .layers
                    .iter_mut()
                    .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut())),
                flat.into_iter(),
            );
            for (&s, c) in batch.iter().zip(&chunks) {
                code_opts[s].step(codes[s].iter_mut(), c.code_grad.iter().copied());
            }
            epoch_loss += loss;
        }
        let mean = epoch_loss / batches.len() as f64;
        losses.push(mean);
        progress(epoch, mean);
    }
    let codes = names
        .into_iter()
        .zip(codes)
        .map(|(name, code)| NamedCode { name, code })
        .collect();
    Ok(TrainedModel {
        model,
        codes,
        losses,
    })
}

/// Mean loss over `samples` with its gradients in the network parameters
/// and in `code`.
pub fn loss_and_gradients(
    model: &Mlp,
    code: &[f64],
    samples: &[TrainingSample],
    truncation: &Truncation,
) -> Result<(f64, MlpGrad, Vec<f64>)> {
    let refs: Vec<&TrainingSample> = samples.iter().collect();
    let c = chunk_gradient(model, code, &refs, truncation, 1.0, true)?;
    Ok((c.loss, c.grad.expect("params requested"), c.code_grad))
}

/// Mean loss of `model` with `code` over all `samples`.
pub fn evaluate_loss(
    model: &Mlp,
    code: &[f64],
    samples: &[TrainingSample],
    truncation: &Truncation,
) -> Result<f64> {
    let refs: Vec<&TrainingSample> = samples.iter().collect();
    Ok(chunk_gradient(model, code, &refs, truncation, 1.0, false)?.loss)
}

/// Optimizes a fresh code against `observations` with the network frozen.
pub fn optimize_latent(
    model: &Mlp,
    observations: &[TrainingSample],
    config: &LatentConfig,
) -> Result<LatentFit> {
    if !(config.lr > 0.0 && config.code_std >= 0.0 && config.code_reg >= 0.0) {
        return Err(Error::InvalidArgument(
            "latent lr must be positive, code_std and code_reg >= 0".into(),
        ));
    }
    if !(config.lr_decay > 0.0 && config.lr_decay <= 1.0) {
        return Err(Error::InvalidArgument(
            "latent lr_decay must be in (0, 1]".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xa54f_f53a_5f1d_36f1);
    let mut code = init_code(model.latent_dim, config.code_std, &mut rng);
    if config.iters == 0 {
        return Ok(LatentFit {
            code,
            losses: Vec::new(),
        });
    }
    if observations.is_empty() {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let all: Vec<&TrainingSample> = observations.iter().collect();
    let mut opt = Adam::new(model.latent_dim, config.lr);
    let mut losses = Vec::with_capacity(config.iters);
    for step in 0..config.iters {
        if step == config.iters / 2 {
            opt.set_lr(config.lr * config.lr_decay);
        }
        let picked: Vec<&TrainingSample> = if observations.len() <= config.points_per_iter {
            all.clone()
        } else {
            (0..config.points_per_iter)
                .map(|_| all[rng.gen_range(0..all.len())])
                .collect()
        };
        let mut c = chunk_gradient(model, &code, &picked, &config.truncation, 1.0, false)?;
        add_code_prior(&mut c, &code, config.code_reg, 1.0);
        if !c.loss.is_finite() {
            return Err(Error::Diverged { step, loss: c.loss });
        }
        losses.push(c.loss);
        opt.step(code.iter_mut(), c.code_grad.into_iter());
    }
    Ok(LatentFit { code, losses })
}

/// Evaluates the network on every vertex of `spec`. VT outputs are unit
/// length. Slabs of constant z are evaluated independently so the result
/// does not depend on the thread count.
pub fn neural_grid(model: &Mlp, code: &[f64], spec: &GridSpec) -> Result<FieldGrid> {
    let slab = spec.dims[0] * spec.dims[1];
    let comps = model.kind.components();
    let parts: Vec<Vec<f32>> = (0..spec.dims[2])
        .into_par_iter()
        .map(|k| {
            let points: Vec<Vec3> = (0..slab)
                .map(|i| spec.position(i % spec.dims[0], i / spec.dims[0], k))
                .collect();
            let out: Array2<f64> = model.predict(code, &points)?;
            Ok(out.iter().map(|&v| v as f32).collect())
        })
        .collect::<Result<_>>()?;
    let data: Vec<f32> = parts.into_iter().flatten().collect();
    debug_assert_eq!(data.len(), spec.len() * comps);
    FieldGrid::new(model.kind, *spec, data)
}
