//! Analytical planning toolkit for grouped convolution.
//!
//! * [`model`]: layer/network data model and exact per-frame cost algebra
//! * [`planner`]: compute/memory balance model, energy proxy, E2GC/FgGC
//!   rewriting and calibration
//! * [`blueprints`]: MobileNet-V1 and ResNeXt-50 layer tables
//! * [`kernels`]: instrumented reference grouped convolution
//! * [`cli`]: the `e2gc` command line

pub mod blueprints;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod measurements;
pub mod model;
pub mod netjson;
pub mod planner;
pub mod report;
pub mod sweep;

pub use error::{
    BlueprintError, CalibrationError, FormatError, KernelError, ModelError, PlanError,
};
pub use model::{
    layer_cost, network_cost, validate, CostBreakdown, LayerKind, LayerSpec, NetworkSpec,
};
