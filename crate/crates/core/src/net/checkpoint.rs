//! Binary checkpoint container.
//!
//! Layout (little-endian):
//!
//! ```text
//! b"ADNC" | u32 version | u64 spec_len | spec JSON (spec_len bytes) | f64 values...
//! ```
//!
//! Values follow layer order: adder `p` then filters; conv filters; batch
//! norm `eps, momentum, γ, β, running mean, running var`. Floats are stored as
//! raw bits, so a round trip is exact.

use std::io::{Read, Write};
use std::path::Path;

use super::{Layer, Network, NetworkSpec};
use crate::error::{Error, Result};
use crate::layers::{AdderLayerParams, BatchNormParams, ConvLayerParams};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"ADNC";
pub const VERSION: u32 = 1;

pub fn to_bytes(net: &Network) -> Result<Vec<u8>> {
    let spec = serde_json::to_vec(net.spec()).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.len() as u64).to_le_bytes());
    out.extend_from_slice(&spec);
    let mut put = |vals: &[f64]| {
        for v in vals {
            out.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    };
    for layer in net.layers() {
        match layer {
            Layer::Adder(p) => {
                put(&[p.p()]);
                put(p.filters.data());
            }
            Layer::Conv(p) => put(p.filters.data()),
            Layer::BatchNorm(p) => {
                put(&[p.eps, p.momentum]);
                put(&p.gamma);
                put(&p.beta);
                put(&p.running_mean);
                put(&p.running_var);
            }
            Layer::Relu | Layer::MaxPool(_) | Layer::Flatten => {}
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader { buf: bytes };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let spec_len = u64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes"));
    let spec_len = usize::try_from(spec_len).map_err(|_| Error::Checkpoint("spec too large".into()))?;
    let spec: NetworkSpec = serde_json::from_slice(r.take(spec_len)?).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let shapes = spec.shapes()?;
    let mut prev = spec.input;
    let mut layers = Vec::with_capacity(spec.layers.len());
    for (ls, shape) in spec.layers.iter().zip(&shapes) {
        let layer = if let Some((c_out, g)) = ls.geometry() {
            let dims = [g.kernel, g.kernel, prev[2], c_out];
            let count = dims.iter().product();
            match ls {
                super::LayerSpec::Adder { .. } => {
                    let p = r.f64s(1)?[0];
                    let filters = Tensor::from_vec(&dims, r.f64s(count)?)?;
                    Layer::Adder(AdderLayerParams::new(filters, g, p)?)
                }
                _ => Layer::Conv(ConvLayerParams::new(Tensor::from_vec(&dims, r.f64s(count)?)?, g)?),
            }
        } else {
            match ls {
                super::LayerSpec::BatchNorm => {
                    let c = shape[2];
                    let head = r.f64s(2)?;
                    let p = BatchNormParams {
                        eps: head[0],
                        momentum: head[1],
                        gamma: r.f64s(c)?,
                        beta: r.f64s(c)?,
                        running_mean: r.f64s(c)?,
                        running_var: r.f64s(c)?,
                    };
                    p.validate()?;
                    Layer::BatchNorm(p)
                }
                super::LayerSpec::Relu => Layer::Relu,
                super::LayerSpec::MaxPool { size } => Layer::MaxPool(*size),
                _ => Layer::Flatten,
            }
        };
        layers.push(layer);
        prev = *shape;
    }
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", r.buf.len())));
    }
    Network::from_layers(spec, layers)
}

pub fn save(net: &Network, path: &Path) -> Result<()> {
    let bytes = to_bytes(net)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Network> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}
