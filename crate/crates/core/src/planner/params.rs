use serde::{Deserialize, Serialize};

use crate::error::PlanError;

/// Constants of the balance model and the energy proxy.
///
/// `gamma` is the balance level `const * alpha^-beta`. `scale_k` multiplies
/// the proxy; when fitted it absorbs `alpha^beta`, since the two are not
/// separately identifiable from energy measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyModelParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub target_group_size: u64,
    pub scale_k: f64,
}

impl Default for EnergyModelParams {
    fn default() -> Self {
        EnergyModelParams {
            alpha: 1.0,
            beta: 0.5,
            gamma: 1.0,
            target_group_size: 1,
            scale_k: 1.0,
        }
    }
}

impl EnergyModelParams {
    pub fn new(
        alpha: f64,
        beta: f64,
        gamma: f64,
        target_group_size: u64,
        scale_k: f64,
    ) -> Result<Self, PlanError> {
        let p = EnergyModelParams {
            alpha,
            beta,
            gamma,
            target_group_size,
            scale_k,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_beta(self, beta: f64) -> Self {
        EnergyModelParams { beta, ..self }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        EnergyModelParams { gamma, ..self }
    }

    pub fn with_scale(self, scale_k: f64) -> Self {
        EnergyModelParams { scale_k, ..self }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(PlanError::Params(format!(
                "alpha = {} not in (0, 1]",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(PlanError::Params(format!(
                "beta = {} not in (0, 1)",
                self.beta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(PlanError::Params(format!(
                "gamma = {} must be positive",
                self.gamma
            )));
        }
        if self.target_group_size == 0 {
            return Err(PlanError::Params(
                "target group size must be at least 1".into(),
            ));
        }
        if !(self.scale_k > 0.0 && self.scale_k.is_finite()) {
            return Err(PlanError::Params(format!(
                "scale_k = {} must be positive",
                self.scale_k
            )));
        }
        Ok(())
    }
}
