//! Layer tables for MobileNet-V1 and ResNeXt-50 (32x4d).
//!
//! MobileNet-V1: a stride-2 3x3 stem followed by thirteen depthwise-separable
//! blocks (depthwise 3x3 + pointwise 1x1), global pooling and a 1000-way
//! classifier. ResNeXt-50: a 7x7 stem, four stages of 3/4/6/3 bottlenecks
//! with grouped widths 128/256/512/1024 (32 groups), stride 2 on the grouped
//! 3x3 of the first block of stages 2-4, and a 1000-way classifier.
//!
//! Every conv layer carries a batch-norm; only the classifier has a bias.
//! Pooling layers have no cost and are not represented.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::BlueprintError;
use crate::model::{network_cost, CostBreakdown, LayerSpec, NetworkSpec};
use crate::planner::{plan, GroupingStrategy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    MobilenetV1,
    Resnext50_32x4d,
}

impl Architecture {
    pub const ALL: [Architecture; 2] = [Architecture::MobilenetV1, Architecture::Resnext50_32x4d];

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::MobilenetV1 => "mobilenet_v1",
            Architecture::Resnext50_32x4d => "resnext50_32x4d",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = BlueprintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mobilenet_v1" => Ok(Architecture::MobilenetV1),
            "resnext50_32x4d" | "resnext50" => Ok(Architecture::Resnext50_32x4d),
            other => Err(BlueprintError::Unknown(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlueprintId {
    pub arch: Architecture,
    pub input_resolution: u64,
    /// MobileNet-V1 only.
    pub width_multiplier: f64,
}

impl BlueprintId {
    pub fn new(arch: Architecture) -> Self {
        BlueprintId {
            arch,
            input_resolution: 224,
            width_multiplier: 1.0,
        }
    }
}

impl From<Architecture> for BlueprintId {
    fn from(arch: Architecture) -> Self {
        BlueprintId::new(arch)
    }
}

fn scaled(channels: u64, multiplier: f64) -> Result<u64, BlueprintError> {
    let v = channels as f64 * multiplier;
    let r = v.round();
    if r < 1.0 || (v - r).abs() > 1e-9 {
        return Err(BlueprintError::Width {
            multiplier,
            channels,
        });
    }
    Ok(r as u64)
}

/// Canonical network for `id`: depthwise blocks for MobileNet-V1, 32 groups
/// for ResNeXt-50.
pub fn generate(id: BlueprintId) -> Result<NetworkSpec, BlueprintError> {
    let r = id.input_resolution;
    if r == 0 || !r.is_multiple_of(32) {
        return Err(BlueprintError::Resolution(r));
    }
    match id.arch {
        Architecture::MobilenetV1 => mobilenet_v1(r, id.width_multiplier),
        Architecture::Resnext50_32x4d => {
            if id.width_multiplier != 1.0 {
                return Err(BlueprintError::WidthUnsupported);
            }
            Ok(resnext50_32x4d(r))
        }
    }
}

// (out channels, stride) of each depthwise-separable block
const MOBILENET_BLOCKS: [(u64, u64); 13] = [
    (64, 1),
    (128, 2),
    (128, 1),
    (256, 2),
    (256, 1),
    (512, 2),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (512, 1),
    (1024, 2),
    (1024, 1),
];

fn mobilenet_v1(resolution: u64, alpha: f64) -> Result<NetworkSpec, BlueprintError> {
    let mut net = NetworkSpec::new(Architecture::MobilenetV1.name());
    let mut hw = resolution / 2;
    let mut m = scaled(32, alpha)?;
    net.layers.push(LayerSpec::conv("conv1", 3, m, 3, hw, 2, 1));
    for (i, &(out, stride)) in MOBILENET_BLOCKS.iter().enumerate() {
        let n = scaled(out, alpha)?;
        hw /= stride;
        let dw = format!("block{}.dw", i + 1);
        let pw = format!("block{}.pw", i + 1);
        net.layers
            .push(LayerSpec::conv(&dw, m, m, 3, hw, stride, m));
        net.layers.push(LayerSpec::conv(&pw, m, n, 1, hw, 1, 1));
        net.substitution_sites.push((dw, pw));
        m = n;
    }
    net.layers.push(LayerSpec::fully_connected("fc", m, 1000));
    Ok(net)
}

// (blocks, grouped width, out channels, first-block stride)
const RESNEXT_STAGES: [(usize, u64, u64, u64); 4] = [
    (3, 128, 256, 1),
    (4, 256, 512, 2),
    (6, 512, 1024, 2),
    (3, 1024, 2048, 2),
];
const RESNEXT_GROUPS: u64 = 32;

fn resnext50_32x4d(resolution: u64) -> NetworkSpec {
    let mut net = NetworkSpec::new(Architecture::Resnext50_32x4d.name());
    net.layers
        .push(LayerSpec::conv("conv1", 3, 64, 7, resolution / 2, 2, 1));
    // after the stride-2 max pool
    let mut hw = resolution / 4;
    let mut in_channels = 64;
    let mut block_input = "conv1".to_string();
    for (s, &(blocks, width, out, first_stride)) in RESNEXT_STAGES.iter().enumerate() {
        for b in 0..blocks {
            let stride = if b == 0 { first_stride } else { 1 };
            let in_hw = hw;
            hw /= stride;
            let prefix = format!("layer{}.{}", s + 1, b);
            let reduce = format!("{prefix}.conv1");
            let grouped = format!("{prefix}.conv2");
            let expand = format!("{prefix}.conv3");
            net.layers
                .push(LayerSpec::conv(&reduce, in_channels, width, 1, in_hw, 1, 1));
            net.layers.push(LayerSpec::conv(
                &grouped,
                width,
                width,
                3,
                hw,
                stride,
                RESNEXT_GROUPS,
            ));
            net.layers
                .push(LayerSpec::conv(&expand, width, out, 1, hw, 1, 1));
            if b == 0 {
                net.layers.push(
                    LayerSpec::conv(
                        format!("{prefix}.downsample"),
                        in_channels,
                        out,
                        1,
                        hw,
                        stride,
                        1,
                    )
                    .with_input(&block_input),
                );
            }
            net.substitution_sites.push((grouped, expand.clone()));
            block_input = expand;
            in_channels = out;
        }
    }
    net.layers
        .push(LayerSpec::fully_connected("fc", in_channels, 1000));
    net
}

/// The eleven strategies compared per architecture: E2GC with
/// `G in {1,2,4,8,16,32}` and FgGC with `g in {2,4,8,16,32}`.
pub fn table_strategies() -> Vec<GroupingStrategy> {
    let e2gc = [1, 2, 4, 8, 16, 32].map(|group_size| GroupingStrategy::E2gc { group_size });
    let fggc = [2, 4, 8, 16, 32].map(|groups| GroupingStrategy::Fggc { groups });
    e2gc.into_iter().chain(fggc).collect()
}

pub fn variant(id: BlueprintId, strategy: GroupingStrategy) -> Result<NetworkSpec, BlueprintError> {
    Ok(plan(&generate(id)?, strategy)?)
}

pub fn variant_table(
    id: BlueprintId,
) -> Result<Vec<(GroupingStrategy, CostBreakdown)>, BlueprintError> {
    table_strategies()
        .into_iter()
        .map(|s| {
            let net = variant(id, s)?;
            let cost = network_cost(&net).expect("planned variants are valid");
            Ok((s, cost.total))
        })
        .collect()
}

/// `<architecture>/<strategy segment>`, e.g. `mobilenet_v1/e2gc/G=8`.
pub fn config_id(arch: Architecture, strategy: GroupingStrategy) -> String {
    format!("{}/{}", arch.name(), strategy.config_segment())
}

pub fn parse_config_id(id: &str) -> Result<(Architecture, GroupingStrategy), BlueprintError> {
    let bad = || BlueprintError::ConfigId(id.to_string());
    let (arch, rest) = id.split_once('/').ok_or_else(bad)?;
    let arch = arch.parse()?;
    let strategy = GroupingStrategy::from_config_segment(rest).map_err(|_| bad())?;
    Ok((arch, strategy))
}

/// Network totals for a config id, at the default resolution.
pub fn config_cost(id: &str) -> Result<CostBreakdown, BlueprintError> {
    let (arch, strategy) = parse_config_id(id)?;
    let net = variant(arch.into(), strategy)?;
    Ok(network_cost(&net)
        .expect("planned variants are valid")
        .total)
}

/// Published parameter and MAC totals for one table row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub arch: Architecture,
    pub strategy: GroupingStrategy,
    pub params: f64,
    pub macs: f64,
}

const MOBILENET_REFERENCE: [(f64, f64); 11] = [
    (4.20, 568.74),
    (4.25, 586.13),
    (4.34, 620.90),
    (4.52, 690.44),
    (4.87, 829.53),
    (5.59, 1107.71),
    (16.72, 2690.06),
    (10.44, 1620.71),
    (7.30, 1086.03),
    (5.73, 818.69),
    (4.95, 685.02),
];

const RESNEXT_REFERENCE: [(f64, f64); 11] = [
    (23.61, 4.02),
    (23.68, 4.05),
    (23.82, 4.10),
    (24.09, 4.20),
    (24.63, 4.40),
    (25.72, 4.80),
    (46.18, 7.70),
    (34.86, 5.85),
    (29.20, 4.92),
    (26.37, 4.46),
    (24.96, 4.23),
];

/// Published Params/MACs cells in [`table_strategies`] order.
pub fn reference_rows(arch: Architecture) -> Vec<ReferenceRow> {
    let (cells, mac_unit) = match arch {
        Architecture::MobilenetV1 => (MOBILENET_REFERENCE, 1e6),
        Architecture::Resnext50_32x4d => (RESNEXT_REFERENCE, 1e9),
    };
    table_strategies()
        .into_iter()
        .zip(cells)
        .map(|(strategy, (p, mc))| ReferenceRow {
            arch,
            strategy,
            params: p * 1e6,
            macs: mc * mac_unit,
        })
        .collect()
}

/// Measured energy per frame for all 22 configurations on two GPUs at three
/// batch sizes, in the measurement CSV format.
pub const BUNDLED_EPF_CSV: &str = include_str!("../data/epf_measurements.csv");
