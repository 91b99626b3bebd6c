//! Weighted summaries of particle marginals.

use alloc::vec::Vec;

use crate::math;

/// Weighted mean; weights need not be normalized.
pub fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / total
}

pub fn weighted_sd(values: &[f64], weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let mean = weighted_mean(values, weights);
    let var = values.iter().zip(weights).map(|(v, w)| w * (v - mean) * (v - mean)).sum::<f64>() / total;
    math::sqrt(var.max(0.0))
}

/// Lower weighted quantiles: for each level `q`, the smallest value whose
/// cumulative normalized weight reaches `q`. `levels` must be ascending.
pub fn weighted_quantiles(values: &[f64], weights: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = order.iter().map(|&i| weights[i]).sum();
    let mut out = Vec::with_capacity(levels.len());
    let mut cum = 0.0;
    let mut idx = 0;
    for &q in levels {
        let target = q * total;
        while idx + 1 < order.len() && cum + weights[order[idx]] < target {
            cum += weights[order[idx]];
            idx += 1;
        }
        out.push(values[order[idx]]);
    }
    out
}
