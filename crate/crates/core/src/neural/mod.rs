//! Auto-decoder: a fully connected network conditioned on a per-shape code.
//!
//! Training fits the network and all codes jointly on oracle samples; at test
//! time only a fresh code is optimized against observations.

mod adam;
mod checkpoint;
mod config;
mod losses;
mod mlp;
mod train;

pub use adam::Adam;
pub use checkpoint::{checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint};
pub use config::{LatentConfig, TrainConfig};
pub use losses::{batch_loss, loss_dvt, loss_scalar, loss_vt, DVT_PRED_NORM_FLOOR};
pub use mlp::{lipschitz_bound, Activation, ForwardCache, Layer, Mlp, MlpGrad};
pub use train::{
    evaluate_loss, loss_and_gradients, neural_grid, optimize_latent, train, train_on_samples,
    train_with_progress, training_sets, LatentFit, NamedCode, TrainedModel,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldKind, FieldValue, TrainingSample, Truncation};
    use crate::geometry::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(kind: FieldKind, n: usize, rng: &mut ChaCha8Rng) -> Vec<TrainingSample> {
        (0..n)
            .map(|_| {
                let position = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                let dir = Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                )
                .normalize();
                let target = match kind {
                    FieldKind::Vt => FieldValue::Vector(dir),
                    FieldKind::Dvt => FieldValue::Vector(dir * rng.gen_range(0.05..1.0)),
                    FieldKind::Sdf => FieldValue::Scalar(rng.gen_range(-1.0..1.0)),
                    FieldKind::Udf => FieldValue::Scalar(rng.gen_range(0.0..1.0)),
                };
                TrainingSample { position, target }
            })
            .collect()
    }

    // Central differences of the batch loss against backpropagation, for
    // every weight, bias and code entry of small random networks.
    #[test]
    fn parameter_and_code_gradients_match_finite_differences() {
        let none = Truncation::none();
        let h = 1e-6;
        for (seed, kind) in FieldKind::ALL.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
            for activation in [Activation::Tanh, Activation::Softplus { beta: 2.0 }] {
                let model = Mlp::new(kind, 3, &[8, 8], activation, seed as u64).unwrap();
                let code: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
                let samples = random_samples(kind, 5, &mut rng);
                let (_, grad, code_grad) =
                    loss_and_gradients(&model, &code, &samples, &none).unwrap();
                let params = model.parameters();
                let check = |analytic: f64, numeric: f64, what: &str| {
                    let err =
                        (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                    assert!(
                        err < 1e-4,
                        "{kind} {activation} {what}: {analytic} vs {numeric}"
                    );
                };
                for (i, g) in grad.flat().iter().enumerate() {
                    let mut m = model.clone();
                    let mut p = params.clone();
                    p[i] += h;
                    m.set_parameters(&p).unwrap();
                    let up = evaluate_loss(&m, &code, &samples, &none).unwrap();
                    p[i] -= 2.0 * h;
                    m.set_parameters(&p).unwrap();
                    let down = evaluate_loss(&m, &code, &samples, &none).unwrap();
                    check(*g, (up - down) / (2.0 * h), &format!("param {i}"));
                }
                for (i, g) in code_grad.iter().enumerate() {
                    let mut c = code.clone();
                    c[i] += h;
                    let up = evaluate_loss(&model, &c, &samples, &none).unwrap();
                    c[i] -= 2.0 * h;
                    let down = evaluate_loss(&model, &c, &samples, &none).unwrap();
                    check(*g, (up - down) / (2.0 * h), &format!("code {i}"));
                }
            }
        }
    }
}
