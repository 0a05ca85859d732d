//! Floating-point operation counts for dense stacks.

use serde::Serialize;

use super::{LayerSpec, Network};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerFlops {
    pub input: usize,
    pub output: usize,
    /// `(2·in − 1)·out`: `in` multiplies and `in − 1` adds per output.
    pub text: u64,
    /// `2·in·out`: one multiply-add per weight, bias add included.
    pub table: u64,
}

/// Per-dense-layer counts under both conventions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    pub layers: Vec<LayerFlops>,
    pub text_total: u64,
    pub table_total: u64,
}

impl FlopReport {
    pub fn from_dense(dims: &[(usize, usize)]) -> Self {
        let layers: Vec<LayerFlops> = dims
            .iter()
            .map(|&(input, output)| LayerFlops {
                input,
                output,
                text: ((2 * input).saturating_sub(1) * output) as u64,
                table: (2 * input * output) as u64,
            })
            .collect();
        Self {
            text_total: layers.iter().map(|l| l.text).sum(),
            table_total: layers.iter().map(|l| l.table).sum(),
            layers,
        }
    }
}

/// Dense-layer FLOPs of `net` for one sample.
pub fn flops(net: &Network) -> FlopReport {
    let dims: Vec<(usize, usize)> = net
        .specs()
        .iter()
        .filter_map(|s| match *s {
            LayerSpec::Dense { input, output } => Some((input, output)),
            _ => None,
        })
        .collect();
    FlopReport::from_dense(&dims)
}
