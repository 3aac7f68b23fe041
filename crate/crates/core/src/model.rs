//! Layer and network data model together with the exact cost algebra for
//! (grouped) convolution layers.
//!
//! All counts are per frame and computed in integer arithmetic:
//!
//! * MACs: `n * m * kh * kw * h * w / g`
//! * weights: `n * m * kh * kw / g`, plus `n` for a bias and `2n` for a
//!   batch-norm affine pair
//! * activations: input feature map plus output feature map. For a layer with
//!   stride `s` the input map is taken as `(s*h) x (s*w)`, which reduces to
//!   `(n + m) * h * w` for unit stride.
//! * arithmetic intensity: `mc / (params + activations)`

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    FullyConnected,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Conv => f.write_str("conv"),
            LayerKind::FullyConnected => f.write_str("fully_connected"),
        }
    }
}

/// One convolution (or fully connected) layer.
///
/// `h` and `w` are the *output* feature-map dimensions. A fully connected
/// layer is a 1x1 convolution over a 1x1 map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub id: String,
    pub kind: LayerKind,
    /// Input channels.
    pub m: u64,
    /// Output channels.
    pub n: u64,
    pub dk_h: u64,
    pub dk_w: u64,
    pub h: u64,
    pub w: u64,
    pub stride: u64,
    pub padding: u64,
    pub g: u64,
    pub has_bias: bool,
    pub has_batchnorm: bool,
    /// Id of the layer whose output feeds this one. `None` means the
    /// immediately preceding layer in the network's layer list.
    pub input: Option<String>,
}

impl LayerSpec {
    /// A square-kernel conv layer with `padding = (k - 1) / 2`, no bias and a
    /// batch-norm after it.
    pub fn conv(
        id: impl Into<String>,
        m: u64,
        n: u64,
        k: u64,
        hw: u64,
        stride: u64,
        g: u64,
    ) -> Self {
        LayerSpec {
            id: id.into(),
            kind: LayerKind::Conv,
            m,
            n,
            dk_h: k,
            dk_w: k,
            h: hw,
            w: hw,
            stride,
            padding: k.saturating_sub(1) / 2,
            g,
            has_bias: false,
            has_batchnorm: true,
            input: None,
        }
    }

    /// A classifier layer with bias and no batch-norm.
    pub fn fully_connected(id: impl Into<String>, m: u64, n: u64) -> Self {
        LayerSpec {
            id: id.into(),
            kind: LayerKind::FullyConnected,
            m,
            n,
            dk_h: 1,
            dk_w: 1,
            h: 1,
            w: 1,
            stride: 1,
            padding: 0,
            g: 1,
            has_bias: true,
            has_batchnorm: false,
            input: None,
        }
    }

    pub fn with_input(mut self, input: impl Into<String>) -> Self {
        self.input = Some(input.into());
        self
    }

    pub fn without_batchnorm(mut self) -> Self {
        self.has_batchnorm = false;
        self
    }

    /// Channels seen by each filter, `m / g`.
    pub fn group_size(&self) -> u64 {
        self.m / self.g
    }

    pub fn is_pointwise(&self) -> bool {
        self.dk_h == 1 && self.dk_w == 1
    }

    /// Per-layer invariant violations (dimensions, divisibility, FC shape).
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let dims = [
            ("m", self.m),
            ("n", self.n),
            ("dk_h", self.dk_h),
            ("dk_w", self.dk_w),
            ("h", self.h),
            ("w", self.w),
            ("stride", self.stride),
            ("g", self.g),
        ];
        for (name, v) in dims {
            if v == 0 {
                out.push(Diagnostic::new(&self.id, Rule::ZeroDimension(name)));
            }
        }
        if self.g != 0 {
            if !self.m.is_multiple_of(self.g) {
                out.push(Diagnostic::new(&self.id, Rule::GroupsDivideInput));
            }
            if !self.n.is_multiple_of(self.g) {
                out.push(Diagnostic::new(&self.id, Rule::GroupsDivideOutput));
            }
        }
        if self.kind == LayerKind::FullyConnected
            && (self.h != 1 || self.w != 1 || self.dk_h != 1 || self.dk_w != 1)
        {
            out.push(Diagnostic::new(&self.id, Rule::FullyConnectedShape));
        }
        out
    }
}

/// A network as an ordered list of layers plus its substitution sites, each
/// a `(grouped kxk, pointwise 1x1)` pair of layer ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub substitution_sites: Vec<(String, String)>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>) -> Self {
        NetworkSpec {
            name: name.into(),
            layers: Vec::new(),
            substitution_sites: Vec::new(),
        }
    }

    pub fn layer(&self, id: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.id == id)
    }

    pub fn layer_index(&self, id: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.id == id)
    }

    /// Ids of the grouped layers at substitution sites, in site order.
    pub fn site_layers(&self) -> impl Iterator<Item = &str> {
        self.substitution_sites
            .iter()
            .map(|(grouped, _)| grouped.as_str())
    }
}

/// Cost of one layer or an aggregate of layers.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub mc: u64,
    pub params: u64,
    pub activations: u64,
    pub ai: f64,
}

impl CostBreakdown {
    pub fn from_counts(mc: u64, params: u64, activations: u64) -> Self {
        CostBreakdown {
            mc,
            params,
            activations,
            ai: arithmetic_intensity(mc, params, activations),
        }
    }

    /// `params + activations`, the memory footprint in elements.
    pub fn footprint(&self) -> u64 {
        self.params + self.activations
    }
}

impl std::ops::Add for CostBreakdown {
    type Output = CostBreakdown;

    fn add(self, rhs: CostBreakdown) -> CostBreakdown {
        CostBreakdown::from_counts(
            self.mc + rhs.mc,
            self.params + rhs.params,
            self.activations + rhs.activations,
        )
    }
}

impl std::iter::Sum for CostBreakdown {
    fn sum<I: Iterator<Item = CostBreakdown>>(iter: I) -> Self {
        iter.fold(CostBreakdown::default(), |acc, c| acc + c)
    }
}

pub fn arithmetic_intensity(mc: u64, params: u64, activations: u64) -> f64 {
    let denom = params + activations;
    if denom == 0 {
        0.0
    } else {
        mc as f64 / denom as f64
    }
}

fn checked_product(id: &str, factors: &[u64]) -> Result<u64, ModelError> {
    factors
        .iter()
        .try_fold(1u64, |acc, &f| acc.checked_mul(f))
        .ok_or_else(|| ModelError::Overflow {
            layer: id.to_string(),
        })
}

/// Exact cost of a single layer.
pub fn layer_cost(layer: &LayerSpec) -> Result<CostBreakdown, ModelError> {
    if let Some(d) = layer.diagnostics().into_iter().next() {
        return Err(ModelError::Invalid(d));
    }
    let id = layer.id.as_str();
    let dense_weights = checked_product(id, &[layer.n, layer.m, layer.dk_h, layer.dk_w])?;
    let weights = dense_weights / layer.g;
    let mc = checked_product(id, &[weights, layer.h, layer.w])?;

    let mut params = weights;
    if layer.has_bias {
        params += layer.n;
    }
    if layer.has_batchnorm {
        params += 2 * layer.n;
    }

    let s = layer.stride;
    let ifmap = checked_product(id, &[layer.m, s * layer.h, s * layer.w])?;
    let ofmap = checked_product(id, &[layer.n, layer.h, layer.w])?;

    Ok(CostBreakdown::from_counts(mc, params, ifmap + ofmap))
}

/// Per-layer costs and their totals.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkCost {
    pub total: CostBreakdown,
    pub layers: Vec<(String, CostBreakdown)>,
}

pub fn network_cost(net: &NetworkSpec) -> Result<NetworkCost, ModelError> {
    let layers = net
        .layers
        .iter()
        .map(|l| layer_cost(l).map(|c| (l.id.clone(), c)))
        .collect::<Result<Vec<_>, _>>()?;
    let total = layers.iter().map(|(_, c)| *c).sum();
    Ok(NetworkCost { total, layers })
}

/// The invariant a [`Diagnostic`] reports as violated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    ZeroDimension(&'static str),
    GroupsDivideInput,
    GroupsDivideOutput,
    FullyConnectedShape,
    DuplicateId,
    UnknownInput(String),
    Chaining { expected: u64, found: u64 },
    SiteUnknownLayer(String),
    SiteNotPointwise(String),
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::ZeroDimension(name) => write!(f, "{name} must be at least 1"),
            Rule::GroupsDivideInput => f.write_str("g does not divide m"),
            Rule::GroupsDivideOutput => f.write_str("g does not divide n"),
            Rule::FullyConnectedShape => {
                f.write_str("fully_connected layer must have 1x1 kernel and 1x1 ofmap")
            }
            Rule::DuplicateId => f.write_str("duplicate layer id"),
            Rule::UnknownInput(id) => write!(f, "input layer `{id}` does not precede this layer"),
            Rule::Chaining { expected, found } => write!(
                f,
                "chaining: m = {found} but the producing layer has n = {expected}"
            ),
            Rule::SiteUnknownLayer(id) => {
                write!(f, "substitution site references unknown layer `{id}`")
            }
            Rule::SiteNotPointwise(id) => {
                write!(f, "substitution site second layer `{id}` is not 1x1")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub layer_id: String,
    pub rule: Rule,
}

impl Diagnostic {
    pub fn new(layer_id: &str, rule: Rule) -> Self {
        Diagnostic {
            layer_id: layer_id.to_string(),
            rule,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "layer `{}`: {}", self.layer_id, self.rule)
    }
}

/// Checks every layer and site invariant. An empty result means the network
/// is valid.
///
/// A layer is chained to the layer named by its `input`, or to its
/// predecessor in list order when `input` is unset. The first layer has no
/// producer and is not chain-checked.
pub fn validate(net: &NetworkSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();

    for (i, layer) in net.layers.iter().enumerate() {
        out.extend(layer.diagnostics());
        if !seen.insert(layer.id.as_str()) {
            out.push(Diagnostic::new(&layer.id, Rule::DuplicateId));
        }

        let producer = match &layer.input {
            Some(src) => match net.layers[..i].iter().find(|l| &l.id == src) {
                Some(p) => Some(p),
                None => {
                    out.push(Diagnostic::new(&layer.id, Rule::UnknownInput(src.clone())));
                    None
                }
            },
            None if i > 0 => Some(&net.layers[i - 1]),
            None => None,
        };
        if let Some(p) = producer {
            if p.n != layer.m {
                out.push(Diagnostic::new(
                    &layer.id,
                    Rule::Chaining {
                        expected: p.n,
                        found: layer.m,
                    },
                ));
            }
        }
    }

    for (grouped, pointwise) in &net.substitution_sites {
        if net.layer(grouped).is_none() {
            out.push(Diagnostic::new(
                grouped,
                Rule::SiteUnknownLayer(grouped.clone()),
            ));
        }
        match net.layer(pointwise) {
            None => out.push(Diagnostic::new(
                pointwise,
                Rule::SiteUnknownLayer(pointwise.clone()),
            )),
            Some(l) if !l.is_pointwise() => out.push(Diagnostic::new(
                pointwise,
                Rule::SiteNotPointwise(pointwise.clone()),
            )),
            Some(_) => {}
        }
    }
    out
}
