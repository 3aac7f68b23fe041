use crate::model::{CostBreakdown, NetworkCost};

use super::EnergyModelParams;

/// `scale_k * mc^(1 - beta) * (activations + params)^beta`.
pub fn energy_proxy(cost: &CostBreakdown, params: &EnergyModelParams) -> f64 {
    let beta = params.beta;
    params.scale_k * (cost.mc as f64).powf(1.0 - beta) * (cost.footprint() as f64).powf(beta)
}

/// Network proxy as the sum of per-layer proxies.
pub fn network_energy(cost: &NetworkCost, params: &EnergyModelParams) -> f64 {
    cost.layers
        .iter()
        .map(|(_, c)| energy_proxy(c, params))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depthwise_example() {
        let c = CostBreakdown::from_counts(903_168, 4_608, 200_704);
        let e = energy_proxy(&c, &EnergyModelParams::default());
        // sqrt(903168 * 205312), evaluated with mpmath at 50 digits
        let expected = 430_617.264_419_344_9;
        assert!((e - expected).abs() / expected < 1e-12, "{e}");
    }

    #[test]
    fn exponent_limits() {
        let c = CostBreakdown::from_counts(1_000_000, 300, 40_000);
        let lo = energy_proxy(
            &c,
            &EnergyModelParams::default()
                .with_beta(1e-12)
                .with_scale(3.0),
        );
        assert!((lo / 3e6 - 1.0).abs() < 1e-9);
        let hi = energy_proxy(
            &c,
            &EnergyModelParams::default()
                .with_beta(1.0 - 1e-12)
                .with_scale(3.0),
        );
        assert!((hi / (3.0 * 40_300.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_cost_is_zero() {
        assert_eq!(
            energy_proxy(&CostBreakdown::default(), &EnergyModelParams::default()),
            0.0
        );
    }
}
