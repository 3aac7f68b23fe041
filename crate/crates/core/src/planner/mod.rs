//! Group-size planning: the compute/data-movement balance model, the energy
//! proxy, E2GC/FgGC network rewriting and calibration against measured
//! energy per frame.

mod balance;
mod calibrate;
mod energy;
mod params;
mod strategy;

pub use balance::{
    balance_level, balanced_groups, constant_group_size_derivation, round_to_valid,
    suggest_group_size, SiteBalance,
};
pub use calibrate::{calibrate, Calibration, FitReport, MeasurementRecord, ResidualRow};
pub use energy::{energy_proxy, network_energy};
pub use params::EnergyModelParams;
pub use strategy::{plan, GroupingStrategy};
