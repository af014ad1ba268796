//! `VFM1` checkpoints: little-endian header with layer sizes, f32 weights
//! and biases per layer, then the named codes.

use std::io::Read;
use std::path::Path;

use super::mlp::{Activation, Mlp};
use super::train::{NamedCode, TrainedModel};
use crate::error::{Error, Result};
use crate::field::FieldKind;

const MAGIC: &[u8; 4] = b"VFM1";

pub fn checkpoint_bytes(model: &TrainedModel) -> Vec<u8> {
    let m = &model.model;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(m.kind.code());
    let (act, beta) = m.activation.code();
    out.push(act);
    out.extend_from_slice(&beta.to_le_bytes());
    out.extend_from_slice(&(m.latent_dim as u32).to_le_bytes());
    let sizes = m.sizes();
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for s in &sizes {
        out.extend_from_slice(&(*s as u32).to_le_bytes());
    }
    for l in &m.layers {
        for v in l.weights.iter().chain(l.bias.iter()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.extend_from_slice(&(model.codes.len() as u32).to_le_bytes());
    for c in &model.codes {
        out.extend_from_slice(&(c.name.len() as u32).to_le_bytes());
        out.extend_from_slice(c.name.as_bytes());
        for v in &c.code {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|_| Error::Parse("truncated checkpoint".into()))?;
        Ok(b)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn f32(&mut self) -> Result<f64> {
        Ok(f64::from(f32::from_le_bytes(self.bytes()?)))
    }
}

/// Parses a checkpoint. The loss trace is not stored and comes back empty.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader(bytes);
    if &r.bytes::<4>()? != MAGIC {
        return Err(Error::Parse("not a VFM1 checkpoint".into()));
    }
    let kind = FieldKind::from_code(r.bytes::<1>()?[0])?;
    let act = r.bytes::<1>()?[0];
    let beta = f64::from_le_bytes(r.bytes()?);
    let activation = Activation::from_code(act, beta)?;
    let latent_dim = r.u32()?;
    let n_sizes = r.u32()?;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::Parse(format!("bad layer count {n_sizes}")));
    }
    let sizes: Vec<usize> = (0..n_sizes).map(|_| r.u32()).collect::<Result<_>>()?;
    if sizes[0] != latent_dim + 3 || sizes[n_sizes - 1] != kind.components() {
        return Err(Error::Parse(
            "layer sizes do not match latent size and field kind".into(),
        ));
    }
    if sizes.iter().any(|&s| s == 0 || s > 1 << 16) {
        return Err(Error::Parse("bad layer size".into()));
    }
    let mut model = Mlp::zeros(kind, latent_dim, &sizes[1..n_sizes - 1], activation);
    for l in &mut model.layers {
        for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
            *v = r.f32()?;
        }
    }
    let n_codes = r.u32()?;
    let mut codes = Vec::new();
    for _ in 0..n_codes {
        let len = r.u32()?;
        if len > r.0.len() {
            return Err(Error::Parse("truncated checkpoint".into()));
        }
        let (name, rest) = r.0.split_at(len);
        let name = String::from_utf8(name.to_vec())
            .map_err(|_| Error::Parse("code name is not UTF-8".into()))?;
        r.0 = rest;
        let code = (0..latent_dim).map(|_| r.f32()).collect::<Result<_>>()?;
        codes.push(NamedCode { name, code });
    }
    if !r.0.is_empty() {
        return Err(Error::Parse("trailing bytes after checkpoint".into()));
    }
    Ok(TrainedModel {
        model,
        codes,
        losses: Vec::new(),
    })
}

pub fn save_checkpoint(path: &Path, model: &TrainedModel) -> Result<()> {
    std::fs::write(path, checkpoint_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<TrainedModel> {
    checkpoint_from_bytes(&std::fs::read(path)?)
}
