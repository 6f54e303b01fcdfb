//! Binary model checkpoint.
//!
//! Layout (all integers `u32` little-endian, floats `f64` little-endian):
//!
//! ```text
//! "AMSF" | version | layer count L | layer_dims[L+1] | latent layer index
//!        | activation code per layer (u8 × L; 0 = tanh, 1 = identity)
//!        | per layer: weights (out × in, row-major), bias (out)
//! ```

use std::path::Path;

use super::model::{Activation, AutoencoderModel, DenseLayer};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"AMSF";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(model: &AutoencoderModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers().len() as u32).to_le_bytes());
    for d in model.layer_dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.latent_layer() as u32).to_le_bytes());
    out.extend(model.layers().iter().map(|l| l.activation.code()));
    for layer in model.layers() {
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::ingestion(self.path, format!("checkpoint truncated while reading {what} at byte {}", self.pos))
        })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(n.saturating_mul(8), what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<AutoencoderModel> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::ingestion(path, "not a checkpoint (missing AMSF magic)"));
    }
    let version = cur.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::ingestion(path, format!("unsupported checkpoint version {version}")));
    }
    let n_layers = cur.u32("layer count")? as usize;
    if n_layers == 0 || n_layers > 1024 {
        return Err(Error::ingestion(path, format!("implausible layer count {n_layers}")));
    }
    let dims = (0..=n_layers)
        .map(|_| cur.u32("layer dims").map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let latent = cur.u32("latent layer")? as usize;
    let codes = cur.take(n_layers, "activations")?;
    let activations = codes
        .iter()
        .map(|&c| Activation::from_code(c).ok_or_else(|| Error::ingestion(path, format!("unknown activation code {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(n_layers);
    for (l, act) in activations.into_iter().enumerate() {
        let (input, output) = (dims[l], dims[l + 1]);
        let w = cur.f64s(input.saturating_mul(output), "weights")?;
        let b = cur.f64s(output, "bias")?;
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters"));
        }
        layers.push(DenseLayer {
            weights: DenseMatrix::from_vec(output, input, w)?,
            bias: b,
            activation: act,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::ingestion(
            path,
            format!("{} trailing bytes after parameters", bytes.len() - cur.pos),
        ));
    }
    AutoencoderModel::from_layers(layers, latent).map_err(|e| Error::ingestion(path, e.to_string()))
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &AutoencoderModel) -> Result<()> {
    crate::io::write_bytes(path.as_ref(), &encode_checkpoint(model))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<AutoencoderModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
