//! Conv-stack arithmetic: weight counts, effective receptive fields and the
//! channel-doubling width schedule. Biases are not counted.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// `depth` stacked `filter_size × filter_size` convolutions with `channels`
/// input and output channels each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConvStackSpec {
    pub filter_size: u64,
    pub depth: u64,
    pub channels: u64,
    pub stride: u64,
}

impl ConvStackSpec {
    pub fn new(filter_size: u64, depth: u64, channels: u64) -> Result<Self> {
        Self::with_stride(filter_size, depth, channels, 1)
    }

    pub fn with_stride(filter_size: u64, depth: u64, channels: u64, stride: u64) -> Result<Self> {
        if filter_size == 0 || filter_size.is_multiple_of(2) {
            return Err(Error::Config(format!("filter size must be odd and positive, got {filter_size}")));
        }
        if depth == 0 || channels == 0 || stride == 0 {
            return Err(Error::Config("depth, channels and stride must be positive".into()));
        }
        Ok(ConvStackSpec {
            filter_size,
            depth,
            channels,
            stride,
        })
    }

    /// `d·k²`, the multiplier of `K²`.
    pub fn coefficient(&self) -> u64 {
        self.depth * self.filter_size * self.filter_size
    }

    /// E.g. `27K²` for three 3×3 layers.
    pub fn symbolic(&self) -> String {
        format!("{}K²", self.coefficient())
    }

    pub fn layers(&self) -> Vec<(u64, u64)> {
        vec![(self.filter_size, self.stride); self.depth as usize]
    }
}

impl fmt::Display for ConvStackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x {}x{} (K={}, stride {})",
            self.depth, self.filter_size, self.filter_size, self.channels, self.stride
        )
    }
}

/// `d · k² · K²`.
pub fn stack_params(s: &ConvStackSpec) -> u64 {
    s.coefficient() * s.channels * s.channels
}

/// `stack_params(b) / stack_params(a)`.
pub fn params_ratio(a: &ConvStackSpec, b: &ConvStackSpec) -> f64 {
    stack_params(b) as f64 / stack_params(a) as f64
}

/// `r₀ = 1`, `rᵢ = rᵢ₋₁ + (kᵢ − 1) · Πⱼ<ᵢ strideⱼ`.
pub fn effective_receptive_field(filters: &[(u64, u64)]) -> Result<u64> {
    if filters.is_empty() {
        return Err(Error::Config("receptive field needs at least one layer".into()));
    }
    let mut field = 1;
    let mut jump = 1;
    for &(k, stride) in filters {
        if k == 0 || stride == 0 {
            return Err(Error::Config("filter size and stride must be positive".into()));
        }
        field += (k - 1) * jump;
        jump *= stride;
    }
    Ok(field)
}

/// Channel widths after 0, 1, …, `pools` pooling layers: doubling from
/// `start`, saturating at `cap`.
pub fn width_schedule(start: u64, pools: usize, cap: u64) -> Result<Vec<u64>> {
    if start == 0 || cap < start {
        return Err(Error::Config(format!("need 1 <= start <= cap, got start {start}, cap {cap}")));
    }
    let mut widths = Vec::with_capacity(pools + 1);
    let mut w = start;
    for _ in 0..=pools {
        widths.push(w);
        w = w.saturating_mul(2).min(cap);
    }
    Ok(widths)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackRow {
    pub spec: ConvStackSpec,
    pub symbolic: String,
    pub params: u64,
    pub receptive_field: u64,
    /// Parameters relative to the first row.
    pub ratio_to_first: f64,
}

pub fn analyze(specs: &[ConvStackSpec]) -> Result<Vec<StackRow>> {
    let first = *specs
        .first()
        .ok_or_else(|| Error::Config("no conv stacks given".into()))?;
    specs
        .iter()
        .map(|s| {
            Ok(StackRow {
                spec: *s,
                symbolic: s.symbolic(),
                params: stack_params(s),
                receptive_field: effective_receptive_field(&s.layers())?,
                ratio_to_first: params_ratio(&first, s),
            })
        })
        .collect()
}

/// Three 3×3 layers against one 7×7 layer.
pub fn preset(name: &str, channels: u64) -> Result<Vec<ConvStackSpec>> {
    match name {
        "3x3-vs-7x7" => Ok(vec![
            ConvStackSpec::new(3, 3, channels)?,
            ConvStackSpec::new(7, 1, channels)?,
        ]),
        "3x3-vs-5x5" => Ok(vec![
            ConvStackSpec::new(3, 2, channels)?,
            ConvStackSpec::new(5, 1, channels)?,
        ]),
        other => Err(Error::Config(format!("unknown netspec preset {other:?}"))),
    }
}

/// Parses `k:d` or `k:d:stride` stack descriptors.
pub fn parse_stack(desc: &str, channels: u64) -> Result<ConvStackSpec> {
    let parts: Vec<&str> = desc.split(':').collect();
    let num = |s: &str| {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad stack descriptor {desc:?}")))
    };
    match parts.as_slice() {
        [k, d] => ConvStackSpec::new(num(k)?, num(d)?, channels),
        [k, d, s] => ConvStackSpec::with_stride(num(k)?, num(d)?, channels, num(s)?),
        _ => Err(Error::Config(format!("stack descriptor {desc:?} is not k:d[:stride]"))),
    }
}
