//! Binary network checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"AMGA" | version: u32 | layers: u32 |
//!   per layer: in_dim: u32 | out_dim: u32 | weights: f32 × out·in (row-major, out × in) | bias: f32 × out
//! ```

use std::path::Path;

use amga::engine::{FFLayer, Network};
use amga::numerics::Matrix;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"AMGA";
pub const VERSION: u32 = 1;

pub fn encode(network: &Network<f32>) -> Vec<u8> {
    let floats: usize = network
        .layers
        .iter()
        .map(|l| l.weights.len() + l.bias.len())
        .sum();
    let mut out = Vec::with_capacity(12 + 8 * network.layers.len() + 4 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(network.layers.len() as u32).to_le_bytes());
    for layer in &network.layers {
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        for v in layer.weights.as_slice().iter().chain(layer.bias.as_slice()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Parses checkpoint bytes; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Network<f32>> {
    let fail = |detail: String| CliError::Checkpoint {
        path: path.to_path_buf(),
        detail,
    };
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4).ok_or_else(|| fail("shorter than the header".into()))?;
    if magic != MAGIC {
        return Err(fail(format!("bad magic {magic:?}")));
    }
    let version = r.u32().ok_or_else(|| fail("shorter than the header".into()))?;
    if version != VERSION {
        return Err(fail(format!("unsupported version {version}")));
    }
    let count = r.u32().ok_or_else(|| fail("shorter than the header".into()))? as usize;

    let mut layers = Vec::new();
    for i in 0..count {
        let (in_dim, out_dim) = match (r.u32(), r.u32()) {
            (Some(a), Some(b)) => (a as usize, b as usize),
            _ => return Err(fail(format!("truncated in the header of layer {i}"))),
        };
        if let Some(prev) = layers.last().map(|l: &FFLayer<f32>| l.out_dim()) {
            if prev != in_dim {
                return Err(fail(format!(
                    "layer {i} takes {in_dim} inputs but layer {} has {prev} outputs",
                    i - 1
                )));
            }
        }
        let weights = r
            .f32s(
                in_dim
                    .checked_mul(out_dim)
                    .ok_or_else(|| fail(format!("layer {i} is too large")))?,
            )
            .ok_or_else(|| fail(format!("truncated in the weights of layer {i}")))?;
        let bias = r
            .f32s(out_dim)
            .ok_or_else(|| fail(format!("truncated in the bias of layer {i}")))?;
        layers.push(FFLayer::from_params(
            Matrix::from_vec(out_dim, in_dim, weights)?,
            Matrix::from_vec(1, out_dim, bias)?,
            i,
        ));
    }
    if r.pos != bytes.len() {
        return Err(fail(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Network { layers })
}

pub fn save_checkpoint(network: &Network<f32>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(network)).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    decode(&bytes, path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Option<Vec<f32>> {
        let raw = self.take(n.checked_mul(4)?)?;
        Some(
            raw.chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        )
    }
}
