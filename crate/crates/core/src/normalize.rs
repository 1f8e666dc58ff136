//! Signature normalization: signed power, cross-cluster, then global l2.
//!
//! The cross-cluster step treats same-cluster blocks `(k, k)` and
//! cross-cluster blocks `(k, l≠k)` as two groups. Every component index
//! `(i, j)` is divided by the root-sum-square of that index over the blocks
//! of its group. Blocks are ragged, so a group sum at `(i, j)` only ranges
//! over blocks whose rank exceeds both `i` and `j`.

use alloc::format;
use alloc::vec;

use crate::aggregation::RawSignature;
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationConfig {
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// `s ← sign(s)·|s|^alpha` for every component.
pub fn power_normalize(values: &mut [f64], alpha: f64) {
    if alpha == 1.0 {
        return;
    }
    for v in values.iter_mut() {
        let m = libm::pow(libm::fabs(*v), alpha);
        *v = if *v < 0.0 { -m } else { m };
    }
}

/// Divides every component by the root-sum-square of its index `(i, j)` over
/// its block group (same-cluster or cross-cluster pairs).
pub fn cross_cluster_normalize(sig: &mut RawSignature, epsilon: f64) {
    let layout = sig.layout().clone();
    let r_max = layout.max_rank();
    let mut same = vec![0.0; r_max * r_max];
    let mut cross = vec![0.0; r_max * r_max];
    for (k, l) in layout.live_pairs() {
        let r = layout.rank(k, l);
        let acc = if k == l { &mut same } else { &mut cross };
        for (idx, v) in sig.block(k, l).iter().enumerate() {
            acc[(idx / r) * r_max + idx % r] += v * v;
        }
    }
    let same: alloc::vec::Vec<f64> = same.into_iter().map(libm::sqrt).collect();
    let cross: alloc::vec::Vec<f64> = cross.into_iter().map(libm::sqrt).collect();
    let values = sig.values_mut();
    for (k, l) in layout.live_pairs() {
        let r = layout.rank(k, l);
        let denom = if k == l { &same } else { &cross };
        for (idx, v) in values[layout.block_range(k, l)].iter_mut().enumerate() {
            let d = denom[(idx / r) * r_max + idx % r];
            if d >= epsilon {
                *v /= d;
            }
        }
    }
}

/// Scales `values` to unit l2 norm unless the norm is below `epsilon`.
pub fn l2_normalize(values: &mut [f64], epsilon: f64) {
    let n = crate::linalg::norm(values);
    if n > epsilon {
        values.iter_mut().for_each(|v| *v /= n);
    }
}

/// Power, cross-cluster and l2 normalization, in that order.
pub fn normalize_signature(sig: &mut RawSignature, config: &NormalizationConfig) -> Result<()> {
    config.validate()?;
    power_normalize(sig.values_mut(), config.alpha);
    cross_cluster_normalize(sig, config.epsilon);
    l2_normalize(sig.values_mut(), config.epsilon);
    Ok(())
}
