use ndarray::Array2;

use crate::error::{Error, Result};
use crate::field::{FieldKind, FieldValue, Truncation};
use crate::geometry::Vec3;

/// Below this prediction norm the direction term of the DVT loss has no gradient.
pub const DVT_PRED_NORM_FLOOR: f64 = 1e-8;

/// `‖target - pred‖²` and its gradient in `pred`.
pub fn loss_vt(pred: &Vec3, target: &Vec3) -> (f64, Vec3) {
    let r = pred - target;
    (r.norm_squared(), 2.0 * r)
}

/// `‖dir - pred/‖pred‖‖² + |dist - ‖pred‖|` and its gradient in `pred`.
pub fn loss_dvt(pred: &Vec3, target_dir: &Vec3, target_dist: f64) -> (f64, Vec3) {
    let n = pred.norm();
    if n < DVT_PRED_NORM_FLOOR {
        return (
            target_dir.norm_squared() + (target_dist - n).abs(),
            Vec3::zeros(),
        );
    }
    let u = pred / n;
    let dir_loss = (target_dir - u).norm_squared();
    let grad_dir = 2.0 * (u * u.dot(target_dir) - target_dir) / n;
    let r = target_dist - n;
    let grad_norm = -u * sign(r);
    (dir_loss + r.abs(), grad_dir + grad_norm)
}

/// `|clamp(pred) - target|` with `pred` clamped to `[lo, hi]`; no gradient
/// flows through the clamp.
pub fn loss_scalar(pred: f64, target: f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = pred.clamp(lo, hi);
    let r = c - target;
    let g = if pred > lo && pred < hi { sign(r) } else { 0.0 };
    (r.abs(), g)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean loss over a batch of raw outputs and the gradient of that mean
/// with respect to each output row.
pub fn batch_loss(
    kind: FieldKind,
    outputs: &Array2<f64>,
    targets: &[FieldValue],
    truncation: &Truncation,
) -> Result<(f64, Array2<f64>)> {
    if outputs.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: outputs.nrows(),
            got: targets.len(),
        });
    }
    if outputs.ncols() != kind.components() {
        return Err(Error::DimensionMismatch {
            expected: kind.components(),
            got: outputs.ncols(),
        });
    }
    let n = targets.len().max(1) as f64;
    let mut grad = Array2::zeros(outputs.raw_dim());
    let mut total = 0.0;
    for (i, target) in targets.iter().enumerate() {
        let row = outputs.row(i);
        match (kind, target) {
            (FieldKind::Vt, FieldValue::Vector(t)) | (FieldKind::Dvt, FieldValue::Vector(t)) => {
                let p = Vec3::new(row[0], row[1], row[2]);
                let (l, g) = if kind == FieldKind::Vt {
                    loss_vt(&p, t)
                } else {
                    let d = t.norm();
                    loss_dvt(&p, &(t / d), d)
                };
                total += l;
                for k in 0..3 {
                    grad[[i, k]] = g[k] / n;
                }
            }
            (FieldKind::Sdf, FieldValue::Scalar(t)) => {
                let (l, g) = loss_scalar(row[0], *t, -truncation.sdf, truncation.sdf);
                total += l;
                grad[[i, 0]] = g / n;
            }
            (FieldKind::Udf, FieldValue::Scalar(t)) => {
                let (l, g) = loss_scalar(row[0], *t, f64::NEG_INFINITY, truncation.udf);
                total += l;
                grad[[i, 0]] = g / n;
            }
            _ => {
                return Err(Error::FieldType(format!(
                    "target {target:?} does not match {kind}"
                )))
            }
        }
    }
    Ok((total / n, grad))
}
