//! Group-size sweep of a single layer: MACs, arithmetic intensity and the
//! implied memory traffic (`1 / AI`), normalized to the depthwise case.

use serde::Serialize;

use crate::model::{layer_cost, LayerSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Channels per group, `G = m / g`.
    pub group_size: u64,
    pub groups: u64,
    pub mc: u64,
    pub ai: f64,
    pub mc_norm: f64,
    pub ai_norm: f64,
    pub mem_access_norm: f64,
}

/// One row per divisor `G` of `m` for which `g = m / G` also divides `n`,
/// in increasing `G`. Rows are normalized to the smallest valid `G` (the
/// depthwise layer `G = 1` whenever `m` divides `n`).
///
/// The layer has unit stride, no bias and no batch-norm. Normalized values
/// are formed from exact integer ratios with a single final division.
pub fn sweep_group_sizes(n: u64, m: u64, dk: u64, h: u64, w: u64) -> Vec<SweepRow> {
    let mut rows: Vec<(u64, u64, u64, u64)> = Vec::new();
    for group_size in (1..=m).filter(|d| m.is_multiple_of(*d)) {
        let g = m / group_size;
        if !n.is_multiple_of(g) {
            continue;
        }
        let mut layer = LayerSpec::conv("sweep", m, n, dk, h, 1, g).without_batchnorm();
        layer.w = w;
        let Ok(c) = layer_cost(&layer) else { continue };
        rows.push((group_size, g, c.mc, c.footprint()));
    }
    let Some(&(_, _, base_mc, base_fp)) = rows.first() else {
        return Vec::new();
    };
    rows.into_iter()
        .map(|(group_size, groups, mc, fp)| {
            let ai_norm =
                (mc as u128 * base_fp as u128) as f64 / (base_mc as u128 * fp as u128) as f64;
            SweepRow {
                group_size,
                groups,
                mc,
                ai: mc as f64 / fp as f64,
                mc_norm: mc as f64 / base_mc as f64,
                ai_norm,
                mem_access_norm: 1.0 / ai_norm,
            }
        })
        .collect()
}
