//! C ABI over `e2gc-core`.
//!
//! Networks are opaque handles created by `e2gc_network_from_*` or
//! `e2gc_network_plan` and released with `e2gc_network_free`. Every fallible
//! call returns an [`E2gcStatus`]; on failure the message is available through
//! `e2gc_last_error_message` on the same thread. Strings returned to the
//! caller must be released with `e2gc_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use e2gc_core::blueprints::{self, Architecture, BlueprintId};
use e2gc_core::model::{self, CostBreakdown, LayerKind, LayerSpec, NetworkSpec};
use e2gc_core::netjson;
use e2gc_core::planner::{self, EnergyModelParams, GroupingStrategy};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum E2gcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// A network, layer or parameter failed validation.
    Validation = 3,
    /// Malformed network JSON.
    Parse = 4,
    UnknownBlueprint = 5,
    OutOfRange = 6,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum E2gcStrategyKind {
    /// Constant group size; `value` is `G`.
    E2gc = 0,
    /// Constant group count; `value` is `g`.
    Fggc = 1,
    Sconv = 2,
    Dwconv = 3,
}

/// Per-frame cost of a layer or network.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct E2gcCost {
    pub mc: u64,
    pub params: u64,
    pub activations: u64,
    pub ai: f64,
}

impl From<CostBreakdown> for E2gcCost {
    fn from(c: CostBreakdown) -> Self {
        E2gcCost {
            mc: c.mc,
            params: c.params,
            activations: c.activations,
            ai: c.ai,
        }
    }
}

/// A conv layer; `h`/`w` are output feature-map sizes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct E2gcLayer {
    pub m: u64,
    pub n: u64,
    pub dk_h: u64,
    pub dk_w: u64,
    pub h: u64,
    pub w: u64,
    pub stride: u64,
    pub g: u64,
    pub has_bias: bool,
    pub has_batchnorm: bool,
}

impl From<&E2gcLayer> for LayerSpec {
    fn from(l: &E2gcLayer) -> Self {
        LayerSpec {
            id: "layer".into(),
            kind: LayerKind::Conv,
            m: l.m,
            n: l.n,
            dk_h: l.dk_h,
            dk_w: l.dk_w,
            h: l.h,
            w: l.w,
            stride: l.stride,
            padding: 0,
            g: l.g,
            has_bias: l.has_bias,
            has_batchnorm: l.has_batchnorm,
            input: None,
        }
    }
}

/// Opaque network handle.
pub struct E2gcNetwork {
    inner: NetworkSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

struct Failure(E2gcStatus, String);

fn fail<T>(status: E2gcStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> E2gcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            E2gcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            E2gcStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(E2gcStatus::NullPointer, "null string");
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(E2gcStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn network<'a>(p: *const E2gcNetwork) -> Result<&'a NetworkSpec, Failure> {
    match p.as_ref() {
        Some(n) => Ok(&n.inner),
        None => fail(E2gcStatus::NullPointer, "null network handle"),
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return fail(E2gcStatus::NullPointer, "null output pointer");
    }
    out.write(value);
    Ok(())
}

fn boxed(net: NetworkSpec) -> *mut E2gcNetwork {
    Box::into_raw(Box::new(E2gcNetwork { inner: net }))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next call into this library on the thread.
#[no_mangle]
pub extern "C" fn e2gc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn e2gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a blueprint (`mobilenet_v1` or `resnext50_32x4d`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_from_blueprint(
    name: *const c_char,
    input_resolution: u64,
    width_multiplier: f64,
    out: *mut *mut E2gcNetwork,
) -> E2gcStatus {
    guard(|| {
        let arch: Architecture = read_str(name)?
            .parse()
            .or_else(|e| fail(E2gcStatus::UnknownBlueprint, format!("{e}")))?;
        let net = blueprints::generate(BlueprintId {
            arch,
            input_resolution,
            width_multiplier,
        })
        .or_else(|e| fail(E2gcStatus::Validation, e.to_string()))?;
        write_out(out, boxed(net))
    })
}

/// Parses a network from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_from_json(
    json: *const c_char,
    out: *mut *mut E2gcNetwork,
) -> E2gcStatus {
    guard(|| {
        let net = netjson::from_json_str(read_str(json)?)
            .or_else(|e| fail(E2gcStatus::Parse, e.to_string()))?;
        write_out(out, boxed(net))
    })
}

/// Canonical JSON of a network; release with `e2gc_string_free`.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_to_json(
    net: *const E2gcNetwork,
    out: *mut *mut c_char,
) -> E2gcStatus {
    guard(|| {
        let text = netjson::to_json_string(network(net)?);
        let c = CString::new(text).or_else(|_| fail(E2gcStatus::InvalidUtf8, "NUL in output"))?;
        write_out(out, c.into_raw())
    })
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn e2gc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `net` must be a handle from this library or null; it must not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_free(net: *mut E2gcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of validation diagnostics; zero means valid. The diagnostics are
/// joined into the last-error message when non-zero.
///
/// # Safety
/// `net` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_validate(
    net: *const E2gcNetwork,
    count: *mut usize,
) -> E2gcStatus {
    let mut joined = String::new();
    let status = guard(|| {
        let diags = model::validate(network(net)?);
        joined = diags
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join("\n");
        write_out(count, diags.len())
    });
    if status == E2gcStatus::Ok && !joined.is_empty() {
        set_error(joined);
    }
    status
}

/// Rewrites the substitution sites of `net` into a new handle.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_plan(
    net: *const E2gcNetwork,
    kind: E2gcStrategyKind,
    value: u64,
    out: *mut *mut E2gcNetwork,
) -> E2gcStatus {
    guard(|| {
        let strategy = match kind {
            E2gcStrategyKind::E2gc => GroupingStrategy::E2gc { group_size: value },
            E2gcStrategyKind::Fggc => GroupingStrategy::Fggc { groups: value },
            E2gcStrategyKind::Sconv => GroupingStrategy::Sconv,
            E2gcStrategyKind::Dwconv => GroupingStrategy::Dwconv,
        };
        let planned = planner::plan(network(net)?, strategy).or_else(|e| {
            let detail: Vec<String> = e.diagnostics().iter().map(|d| d.to_string()).collect();
            fail(
                E2gcStatus::Validation,
                format!("{e}: {}", detail.join("; ")),
            )
        })?;
        write_out(out, boxed(planned))
    })
}

/// Network totals.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_cost(
    net: *const E2gcNetwork,
    out: *mut E2gcCost,
) -> E2gcStatus {
    guard(|| {
        let cost = model::network_cost(network(net)?)
            .or_else(|e| fail(E2gcStatus::Validation, e.to_string()))?;
        write_out(out, cost.total.into())
    })
}

/// Number of layers, or 0 for a null handle.
///
/// # Safety
/// `net` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_layer_count(net: *const E2gcNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.inner.layers.len())
}

/// Cost of the layer at `index`.
///
/// # Safety
/// `net` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn e2gc_network_layer_cost(
    net: *const E2gcNetwork,
    index: usize,
    out: *mut E2gcCost,
) -> E2gcStatus {
    guard(|| {
        let n = network(net)?;
        let Some(layer) = n.layers.get(index) else {
            return fail(
                E2gcStatus::OutOfRange,
                format!("layer index {index} of {}", n.layers.len()),
            );
        };
        let cost =
            model::layer_cost(layer).or_else(|e| fail(E2gcStatus::Validation, e.to_string()))?;
        write_out(out, cost.into())
    })
}

/// Cost of a standalone conv layer.
///
/// # Safety
/// `layer` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn e2gc_layer_cost(
    layer: *const E2gcLayer,
    out: *mut E2gcCost,
) -> E2gcStatus {
    guard(|| {
        let Some(layer) = layer.as_ref() else {
            return fail(E2gcStatus::NullPointer, "null layer");
        };
        let cost = model::layer_cost(&LayerSpec::from(layer))
            .or_else(|e| fail(E2gcStatus::Validation, e.to_string()))?;
        write_out(out, cost.into())
    })
}

/// Continuous balanced group count for `layer`.
///
/// # Safety
/// `layer` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn e2gc_balanced_groups(
    layer: *const E2gcLayer,
    beta: f64,
    gamma: f64,
    out: *mut f64,
) -> E2gcStatus {
    guard(|| {
        let Some(layer) = layer.as_ref() else {
            return fail(E2gcStatus::NullPointer, "null layer");
        };
        let params = EnergyModelParams::default()
            .with_beta(beta)
            .with_gamma(gamma);
        params
            .validate()
            .or_else(|e| fail(E2gcStatus::Validation, e.to_string()))?;
        write_out(
            out,
            planner::balanced_groups(&LayerSpec::from(layer), &params),
        )
    })
}

/// Common divisor of `m` and `n` nearest to `g_star` in log space.
#[no_mangle]
pub extern "C" fn e2gc_round_to_valid(g_star: f64, m: u64, n: u64) -> u64 {
    planner::round_to_valid(g_star, m, n)
}

/// `scale_k * mc^(1 - beta) * (params + activations)^beta`.
///
/// # Safety
/// `cost` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn e2gc_energy_proxy(
    cost: *const E2gcCost,
    beta: f64,
    scale_k: f64,
    out: *mut f64,
) -> E2gcStatus {
    guard(|| {
        let Some(c) = cost.as_ref() else {
            return fail(E2gcStatus::NullPointer, "null cost");
        };
        let params = EnergyModelParams::default()
            .with_beta(beta)
            .with_scale(scale_k);
        params
            .validate()
            .or_else(|e| fail(E2gcStatus::Validation, e.to_string()))?;
        let breakdown = CostBreakdown::from_counts(c.mc, c.params, c.activations);
        write_out(out, planner::energy_proxy(&breakdown, &params))
    })
}
