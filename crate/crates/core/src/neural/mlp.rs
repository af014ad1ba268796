use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::field::FieldKind;
use crate::geometry::Vec3;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `ln(1 + exp(beta x)) / beta`.
    Softplus {
        beta: f64,
    },
    Tanh,
}

impl Default for Activation {
    fn default() -> Self {
        Activation::Softplus { beta: 100.0 }
    }
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softplus { beta } => {
                let z = beta * x;
                // ln(1 + e^z) without overflow.
                (z.max(0.0) + (-z.abs()).exp().ln_1p()) / beta
            }
            Activation::Tanh => x.tanh(),
        }
    }

    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus { beta } => {
                let z = beta * x;
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub(crate) fn code(self) -> (u8, f64) {
        match self {
            Activation::Softplus { beta } => (0, beta),
            Activation::Tanh => (1, 0.0),
        }
    }

    pub(crate) fn from_code(code: u8, beta: f64) -> Result<Self> {
        match code {
            0 => Ok(Activation::Softplus { beta }),
            1 => Ok(Activation::Tanh),
            c => Err(Error::Parse(format!("unknown activation code {c}"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Activation::Softplus { .. } => f.write_str("softplus"),
            Activation::Tanh => f.write_str("tanh"),
        }
    }
}

/// Dense layer `y = W x + b` with `W` of shape (out, in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Fully connected network mapping `[code; x]` to a field value.
///
/// Hidden layers use `activation`; the output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub kind: FieldKind,
    pub latent_dim: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

/// Gradients with the same layout as [`Mlp::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub layers: Vec<Layer>,
}

/// Intermediate values kept by [`Mlp::forward_batch`] for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Layer inputs; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

impl Mlp {
    /// Fan-in scaled Gaussian initialization, zero biases.
    pub fn new(
        kind: FieldKind,
        latent_dim: usize,
        hidden: &[usize],
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden layer sizes must be positive".into(),
            ));
        }
        let mut sizes = vec![latent_dim + 3];
        sizes.extend_from_slice(hidden);
        sizes.push(kind.components());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let normal = Normal::new(0.0, (2.0 / w[0] as f64).sqrt()).expect("positive std");
                let mut layer = Layer::zeros(w[0], w[1]);
                layer.weights.mapv_inplace(|_| normal.sample(&mut rng));
                layer
            })
            .collect();
        Ok(Self {
            kind,
            latent_dim,
            activation,
            layers,
        })
    }

    pub fn zeros(
        kind: FieldKind,
        latent_dim: usize,
        hidden: &[usize],
        activation: Activation,
    ) -> Self {
        let mut sizes = vec![latent_dim + 3];
        sizes.extend_from_slice(hidden);
        sizes.push(kind.components());
        let layers = sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self {
            kind,
            latent_dim,
            activation,
            layers,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.latent_dim + 3
    }

    pub fn output_dim(&self) -> usize {
        self.kind.components()
    }

    /// Layer widths from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![self.input_dim()];
        out.extend(self.layers.iter().map(Layer::outputs));
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    /// Builds the input rows `[code; x]`.
    pub fn inputs(&self, code: &[f64], points: &[Vec3]) -> Result<Array2<f64>> {
        if code.len() != self.latent_dim {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim,
                got: code.len(),
            });
        }
        let mut x = Array2::zeros((points.len(), self.input_dim()));
        for (mut row, p) in x.outer_iter_mut().zip(points) {
            for (slot, c) in row.iter_mut().zip(code) {
                *slot = *c;
            }
            row[self.latent_dim] = p.x;
            row[self.latent_dim + 1] = p.y;
            row[self.latent_dim + 2] = p.z;
        }
        Ok(x)
    }

    /// Raw network output for a batch of input rows.
    pub fn forward_batch(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        let mut inputs = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len() - 1);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = inputs[i].dot(&layer.weights.t()) + &layer.bias;
            if i == last {
                return Ok((z, ForwardCache { inputs, pre }));
            }
            let a = z.mapv(|v| self.activation.apply(v));
            pre.push(z);
            inputs.push(a);
        }
        unreachable!("network has at least one layer")
    }

    /// Backpropagates `grad_out` (d loss / d output, one row per sample).
    /// Accumulates parameter gradients into `grad` when given and returns
    /// d loss / d input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
        mut grad: Option<&mut MlpGrad>,
    ) -> Array2<f64> {
        let mut delta = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            if let Some(grad) = grad.as_deref_mut() {
                let g = &mut grad.layers[i];
                g.weights += &delta.t().dot(&cache.inputs[i]);
                g.bias += &delta.sum_axis(Axis(0));
            }
            let mut back = delta.dot(&self.layers[i].weights);
            if i > 0 {
                let act = self.activation;
                back.zip_mut_with(&cache.pre[i - 1], |b, &z| *b *= act.derivative(z));
            }
            delta = back;
        }
        delta
    }

    /// Raw output at one point.
    pub fn forward(&self, code: &[f64], x: &Vec3) -> Result<Vec<f64>> {
        let input = self.inputs(code, std::slice::from_ref(x))?;
        let (out, _) = self.forward_batch(input.view())?;
        Ok(out.row(0).to_vec())
    }

    /// Field values at `points`, one row per point. VT outputs are scaled to
    /// unit length; this happens at inference only.
    pub fn predict(&self, code: &[f64], points: &[Vec3]) -> Result<Array2<f64>> {
        let input = self.inputs(code, points)?;
        let (mut out, _) = self.forward_batch(input.view())?;
        if self.kind == FieldKind::Vt {
            for mut row in out.outer_iter_mut() {
                let n = row.dot(&row).sqrt();
                if n > 1e-12 {
                    row /= n;
                }
            }
        }
        Ok(out)
    }

    /// Sets all parameters from a flat slice, layer by layer, weights then bias.
    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::DimensionMismatch {
                expected: self.num_parameters(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter();
        for layer in &mut self.layers {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

impl MlpGrad {
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.weights *= s;
            l.bias *= s;
        }
    }
}

/// Upper bound on the Lipschitz constant of the network in its input: the
/// product of the layers' Frobenius norms (both activations have slope <= 1).
pub fn lipschitz_bound(model: &Mlp) -> f64 {
    model
        .layers
        .iter()
        .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>().sqrt())
        .product()
}

/// Sums the code columns of an input gradient over the batch.
pub(crate) fn code_gradient(grad_in: &Array2<f64>, latent_dim: usize) -> Array1<f64> {
    grad_in.slice(s![.., ..latent_dim]).sum_axis(Axis(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(FieldKind::Vt, 4, &[8, 8], Activation::default());
        assert_eq!(
            m.forward(&[0.3; 4], &Vec3::new(0.1, 0.2, 0.3)).unwrap(),
            vec![0.0; 3]
        );
    }

    #[test]
    fn identity_layer_passes_coordinates() {
        let mut m = Mlp::zeros(FieldKind::Vt, 2, &[], Activation::default());
        for k in 0..3 {
            m.layers[0].weights[[k, 2 + k]] = 1.0;
        }
        let out = m.forward(&[0.0, 0.0], &Vec3::new(0.1, -0.2, 0.3)).unwrap();
        assert_eq!(out, vec![0.1, -0.2, 0.3]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = Mlp::new(FieldKind::Sdf, 4, &[8], Activation::default(), 0).unwrap();
        assert!(matches!(
            m.forward(&[0.0; 3], &Vec3::zeros()),
            Err(Error::DimensionMismatch {
                expected: 4,
                got: 3
            })
        ));
        assert!(m.forward_batch(Array2::zeros((2, 6)).view()).is_err());
    }

    #[test]
    fn output_is_continuous() {
        let m = Mlp::new(FieldKind::Dvt, 8, &[32, 32], Activation::default(), 5).unwrap();
        let code = vec![0.01; 8];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lip = lipschitz_bound(&m);
        for _ in 0..100 {
            let x = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let a = m.forward(&code, &x).unwrap();
            let b = m
                .forward(&code, &(x + Vec3::new(1e-6, -1e-6, 1e-6)))
                .unwrap();
            let d = a
                .iter()
                .zip(&b)
                .map(|(p, q)| (p - q).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(d <= lip * 1e-6 * 3f64.sqrt() + 1e-15);
            assert!(d < 1e-3);
        }
    }

    #[test]
    fn vt_predictions_are_unit() {
        let m = Mlp::new(FieldKind::Vt, 4, &[16], Activation::Tanh, 2).unwrap();
        let pts: Vec<Vec3> = (0..50)
            .map(|i| Vec3::new(i as f64 / 50.0, 0.3, -0.2))
            .collect();
        for row in m
            .predict(&[0.1, 0.0, -0.1, 0.2], &pts)
            .unwrap()
            .outer_iter()
        {
            let n = row.dot(&row).sqrt();
            assert!((n - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn softplus_is_stable() {
        let a = Activation::Softplus { beta: 100.0 };
        assert_eq!(a.apply(50.0), 50.0);
        assert!(a.apply(-50.0) >= 0.0 && a.apply(-50.0) < 1e-300);
        assert!((a.apply(0.0) - 2f64.ln() / 100.0).abs() < 1e-15);
        assert!((a.derivative(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = Mlp::new(FieldKind::Vt, 4, &[8], Activation::default(), 1).unwrap();
        let b = Mlp::new(FieldKind::Vt, 4, &[8], Activation::default(), 1).unwrap();
        let c = Mlp::new(FieldKind::Vt, 4, &[8], Activation::default(), 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mut d = a.clone();
        d.set_parameters(&c.parameters()).unwrap();
        assert_eq!(d, c);
    }
}
