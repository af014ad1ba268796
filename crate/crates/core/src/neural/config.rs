use std::fmt::Write as _;

use super::mlp::Activation;
use crate::error::{Error, Result};
use crate::field::{FieldKind, Truncation};

/// Training hyperparameters. Stored as a plain `key=value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub kind: FieldKind,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Passes over the shape set; each pass takes one step per shape batch.
    pub epochs: usize,
    pub batch_shapes: usize,
    /// Points per step, split evenly over the shapes of the batch.
    pub points_per_batch: usize,
    pub lr_net: f64,
    pub lr_codes: f64,
    pub code_std: f64,
    /// Weight of the Gaussian prior `code_reg * |code|^2` on every code. It
    /// keeps the codes in a small ball around the test-time initialization.
    pub code_reg: f64,
    pub n_near: usize,
    pub n_uniform: usize,
    pub sigma_near: f64,
    pub truncation: Truncation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            kind: FieldKind::Vt,
            latent_dim: 64,
            hidden: vec![128; 4],
            activation: Activation::default(),
            epochs: 2000,
            batch_shapes: 3,
            points_per_batch: 3072,
            lr_net: 1e-3,
            lr_codes: 1e-3,
            code_std: 0.01,
            code_reg: 3.0,
            n_near: 8000,
            n_uniform: 2000,
            sigma_near: 0.05,
            truncation: Truncation::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Reference full-scale schedule: 2000 epochs, 64 shapes and 16384
    /// points per batch, 256-dimensional codes, 8 hidden layers of 512.
    pub fn reference() -> Self {
        Self {
            latent_dim: 256,
            hidden: vec![512; 8],
            batch_shapes: 64,
            points_per_batch: 16384,
            n_near: 200_000,
            n_uniform: 50_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.hidden.contains(&0) {
            return bad("hidden sizes must be positive");
        }
        if self.batch_shapes == 0 || self.points_per_batch == 0 {
            return bad("batch_shapes and points_per_batch must be positive");
        }
        if self.n_near + self.n_uniform == 0 {
            return bad("n_near + n_uniform must be positive");
        }
        for (name, v) in [("lr_net", self.lr_net), ("lr_codes", self.lr_codes)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(self.code_std >= 0.0 && self.code_reg >= 0.0 && self.sigma_near >= 0.0) {
            return bad("code_std, code_reg and sigma_near must be >= 0");
        }
        if !(self.truncation.sdf > 0.0 && self.truncation.udf > 0.0) {
            return bad("truncation thresholds must be positive");
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let hidden: Vec<String> = self.hidden.iter().map(usize::to_string).collect();
        let beta = match self.activation {
            Activation::Softplus { beta } => beta,
            Activation::Tanh => 0.0,
        };
        let _ = writeln!(s, "kind={}", self.kind);
        let _ = writeln!(s, "latent_dim={}", self.latent_dim);
        let _ = writeln!(s, "hidden={}", hidden.join(","));
        let _ = writeln!(s, "activation={}", self.activation);
        let _ = writeln!(s, "softplus_beta={beta}");
        let _ = writeln!(s, "epochs={}", self.epochs);
        let _ = writeln!(s, "batch_shapes={}", self.batch_shapes);
        let _ = writeln!(s, "points_per_batch={}", self.points_per_batch);
        let _ = writeln!(s, "lr_net={}", self.lr_net);
        let _ = writeln!(s, "lr_codes={}", self.lr_codes);
        let _ = writeln!(s, "code_std={}", self.code_std);
        let _ = writeln!(s, "code_reg={}", self.code_reg);
        let _ = writeln!(s, "n_near={}", self.n_near);
        let _ = writeln!(s, "n_uniform={}", self.n_uniform);
        let _ = writeln!(s, "sigma_near={}", self.sigma_near);
        let _ = writeln!(s, "truncation_sdf={}", self.truncation.sdf);
        let _ = writeln!(s, "truncation_udf={}", self.truncation.udf);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }

    /// Parses `key=value` lines over the defaults. Blank lines and lines
    /// starting with `#` are skipped; unknown keys are errors.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut activation = "softplus".to_string();
        let mut beta = 100.0;
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let err =
                |e: &dyn std::fmt::Display| Error::Parse(format!("line {}: {key}: {e}", n + 1));
            macro_rules! num {
                () => {
                    value.parse().map_err(|e| err(&e))?
                };
            }
            match key {
                "kind" => cfg.kind = value.parse()?,
                "latent_dim" => cfg.latent_dim = num!(),
                "hidden" => {
                    cfg.hidden = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse().map_err(|e| err(&e)))
                        .collect::<Result<_>>()?
                }
                "activation" => activation = value.to_string(),
                "softplus_beta" => beta = num!(),
                "epochs" => cfg.epochs = num!(),
                "batch_shapes" => cfg.batch_shapes = num!(),
                "points_per_batch" => cfg.points_per_batch = num!(),
                "lr_net" => cfg.lr_net = num!(),
                "lr_codes" => cfg.lr_codes = num!(),
                "code_std" => cfg.code_std = num!(),
                "code_reg" => cfg.code_reg = num!(),
                "n_near" => cfg.n_near = num!(),
                "n_uniform" => cfg.n_uniform = num!(),
                "sigma_near" => cfg.sigma_near = num!(),
                "truncation_sdf" => cfg.truncation.sdf = num!(),
                "truncation_udf" => cfg.truncation.udf = num!(),
                "seed" => cfg.seed = num!(),
                _ => return Err(Error::Parse(format!("line {}: unknown key {key:?}", n + 1))),
            }
        }
        cfg.activation = match activation.as_str() {
            "softplus" => Activation::Softplus { beta },
            "tanh" => Activation::Tanh,
            other => return Err(Error::Parse(format!("unknown activation {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Test-time code optimization settings; the network stays frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentConfig {
    pub iters: usize,
    pub lr: f64,
    /// Factor applied to `lr` from the halfway iteration on.
    pub lr_decay: f64,
    pub code_std: f64,
    /// Weight of the code prior, as in training.
    pub code_reg: f64,
    /// Observations per iteration; all of them when there are fewer.
    pub points_per_iter: usize,
    pub truncation: Truncation,
    pub seed: u64,
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            iters: 100,
            lr: 1e-2,
            lr_decay: 0.1,
            code_std: 0.01,
            code_reg: 3.0,
            points_per_iter: 2048,
            truncation: Truncation::default(),
            seed: 0,
        }
    }
}
