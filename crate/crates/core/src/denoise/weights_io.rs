//! `WDN1` weight files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"WDN1" | depth: u32 | channels: u32 | flags: u8
//! per layer l = 0..depth:
//!     kernel  f32[out][in][3][3]
//!     bias    f32[out]
//!     if layer has batch norm: gamma, beta, running_mean, running_var  (f32[out] each)
//! ```
//!
//! `flags` bit 0 marks batch norm on the hidden layers, bit 1 the extra
//! noise-level input channel. Values are stored as f32, so a round trip is
//! exact only up to f32 precision.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::cnn::{Architecture, BatchNorm, ConvLayer, DenoiserWeights};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WDN1";
const FLAG_BN: u8 = 1;
const FLAG_NOISE: u8 = 2;

fn put(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

pub fn encode_weights(w: &DenoiserWeights) -> Result<Vec<u8>> {
    w.validate()?;
    let mut out = Vec::with_capacity(13 + 4 * w.parameter_count() * 2);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(w.arch.depth as u32).to_le_bytes());
    out.extend_from_slice(&(w.arch.channels as u32).to_le_bytes());
    let flags = if w.arch.batch_norm { FLAG_BN } else { 0 } | if w.arch.noise_channel { FLAG_NOISE } else { 0 };
    out.push(flags);
    for layer in &w.layers {
        put(&mut out, layer.kernel.iter().copied());
        put(&mut out, layer.bias.iter().copied());
        if let Some(bn) = &layer.bn {
            for v in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                put(&mut out, v.iter().copied());
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format {
            what: "WDN1",
            detail: format!("truncated at byte {} (need {n} more)", self.pos),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 4)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect())
    }
}

pub fn decode_weights(bytes: &[u8]) -> Result<DenoiserWeights> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format { what: "WDN1", detail: "bad magic".into() });
    }
    let depth = c.u32()? as usize;
    let channels = c.u32()? as usize;
    let flags = c.take(1)?[0];
    if flags & !(FLAG_BN | FLAG_NOISE) != 0 {
        return Err(Error::Format { what: "WDN1", detail: format!("unknown flag bits {flags:#04x}") });
    }
    let arch = Architecture {
        depth,
        channels,
        batch_norm: flags & FLAG_BN != 0,
        noise_channel: flags & FLAG_NOISE != 0,
    };
    arch.validate()?;
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let (cin, cout, bn) = arch.layer_shape(l);
        let kernel = Array2::from_shape_vec((cout, cin * 9), c.f32s(cout * cin * 9)?).expect("sized read");
        let bias = Array1::from(c.f32s(cout)?);
        let bn = if bn {
            Some(BatchNorm {
                gamma: Array1::from(c.f32s(cout)?),
                beta: Array1::from(c.f32s(cout)?),
                running_mean: Array1::from(c.f32s(cout)?),
                running_var: Array1::from(c.f32s(cout)?),
            })
        } else {
            None
        };
        layers.push(ConvLayer { kernel, bias, bn });
    }
    if c.pos != bytes.len() {
        return Err(Error::Format { what: "WDN1", detail: format!("{} trailing bytes", bytes.len() - c.pos) });
    }
    Ok(DenoiserWeights { arch, layers })
}

pub fn save_weights(path: &Path, w: &DenoiserWeights) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_weights(w)?)?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<DenoiserWeights> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_weights(&bytes)
}
