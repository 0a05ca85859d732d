//! Portable parameter checkpoints.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic    b"FJNN"
//! version  u32
//! steps    u64
//! layers   u32
//! per layer:   kind u8 (0 dense, 1 relu, 2 batch_norm, 3 softmax, 4 power_norm),
//!              a u32, b u32, x f64   (dense: in, out; batch_norm: dim; power_norm: x = target)
//! per layer:   tensors u32, then per tensor rows u32, cols u32, rows·cols f64 (row-major)
//!              stats u8; if 1: n u32, n f64 running mean, n f64 running variance
//! ```
//!
//! A JSON sidecar (`<path>.json`) carries the layer specs, seed and step
//! count for humans and tooling.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{LayerParams, LayerSpec, Network, RunningStats};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FJNN";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub specs: Vec<LayerSpec>,
    pub seed: u64,
    pub steps: u64,
    pub param_count: usize,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s<'a>(buf: &mut Vec<u8>, vs: impl IntoIterator<Item = &'a f64>) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes `net` to bytes.
pub fn encode(net: &Network) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    put_u32(&mut buf, CHECKPOINT_VERSION);
    buf.extend_from_slice(&net.steps().to_le_bytes());
    put_u32(&mut buf, net.specs().len() as u32);
    for s in net.specs() {
        let (kind, a, b, x) = match *s {
            LayerSpec::Dense { input, output } => (0u8, input as u32, output as u32, 0.0),
            LayerSpec::Relu => (1, 0, 0, 0.0),
            LayerSpec::BatchNorm { dim } => (2, dim as u32, 0, 0.0),
            LayerSpec::Softmax => (3, 0, 0, 0.0),
            LayerSpec::PowerNorm { target_power } => (4, 0, 0, target_power),
        };
        buf.push(kind);
        put_u32(&mut buf, a);
        put_u32(&mut buf, b);
        buf.extend_from_slice(&x.to_le_bytes());
    }
    for (p, rs) in net.params().iter().zip(net.running_stats()) {
        put_u32(&mut buf, p.len() as u32);
        for t in p {
            put_u32(&mut buf, t.nrows() as u32);
            put_u32(&mut buf, t.ncols() as u32);
            put_f64s(&mut buf, t.iter());
        }
        match rs {
            None => buf.push(0),
            Some(rs) => {
                buf.push(1);
                put_u32(&mut buf, rs.mean.len() as u32);
                put_f64s(&mut buf, rs.mean.iter());
                put_f64s(&mut buf, rs.var.iter());
            }
        }
    }
    buf
}

struct Reader<'a>(Cursor<&'a [u8]>);

impl Reader<'_> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0
            .read_exact(&mut b)
            .map_err(|_| Error::Checkpoint("truncated checkpoint".into()))?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let remaining = self.0.get_ref().len() as u64 - self.0.position();
        if (n as u64).saturating_mul(8) > remaining {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Parses bytes produced by [`encode`].
pub fn decode(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader(Cursor::new(bytes));
    if &r.bytes::<4>()? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic; not a network checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let steps = r.u64()?;
    let n = r.u32()? as usize;
    let mut specs = Vec::with_capacity(n.min(1024));
    for i in 0..n {
        let (kind, a, b, x) = (r.u8()?, r.u32()? as usize, r.u32()? as usize, r.f64()?);
        specs.push(match kind {
            0 => LayerSpec::Dense { input: a, output: b },
            1 => LayerSpec::Relu,
            2 => LayerSpec::BatchNorm { dim: a },
            3 => LayerSpec::Softmax,
            4 => LayerSpec::PowerNorm { target_power: x },
            k => return Err(Error::Checkpoint(format!("layer {i} has unknown kind {k}"))),
        });
    }
    let mut params = Vec::with_capacity(n);
    let mut running = Vec::with_capacity(n);
    for _ in 0..n {
        let count = r.u32()? as usize;
        let mut layer: LayerParams = Vec::with_capacity(count.min(4));
        for _ in 0..count {
            let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
            let data = r.f64s(rows.saturating_mul(cols))?;
            layer.push(Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Checkpoint(e.to_string()))?);
        }
        params.push(layer);
        running.push(match r.u8()? {
            0 => None,
            1 => {
                let len = r.u32()? as usize;
                let mean = Array1::from(r.f64s(len)?);
                let var = Array1::from(r.f64s(len)?);
                Some(RunningStats { mean, var })
            }
            f => return Err(Error::Checkpoint(format!("bad running-stats flag {f}"))),
        });
    }
    if r.0.position() as usize != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
    }
    Network::from_parts(&specs, params, running, steps).map_err(|e| Error::Checkpoint(e.to_string()))
}

/// Writes `path` and its JSON sidecar.
pub fn save_checkpoint(net: &Network, path: &Path, seed: u64) -> Result<()> {
    fs::write(path, encode(net))?;
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        specs: net.specs().to_vec(),
        seed,
        steps: net.steps(),
        param_count: net.param_count(),
    };
    fs::write(sidecar(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

/// Reads a checkpoint; the sidecar is returned when present.
pub fn load_checkpoint(path: &Path) -> Result<(Network, Option<CheckpointMeta>)> {
    let net = decode(&fs::read(path)?)?;
    let side = sidecar(path);
    let meta = if side.exists() {
        Some(serde_json::from_str(&fs::read_to_string(side)?)?)
    } else {
        None
    };
    Ok((net, meta))
}
