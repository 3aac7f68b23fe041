use serde::Serialize;

use crate::error::PlanError;
use crate::model::{LayerKind, LayerSpec, NetworkSpec};

use super::EnergyModelParams;

/// Two log distances closer than this are treated as a tie.
const LOG_TIE_EPS: f64 = 1e-12;

/// Continuous group count that balances compute against weight traffic:
/// `g* = m * n * kh * kw * (h * w)^(1 - beta) / gamma`.
///
/// The activation term is dropped since it does not depend on `g`.
pub fn balanced_groups(layer: &LayerSpec, params: &EnergyModelParams) -> f64 {
    let dense = layer.m as f64 * layer.n as f64 * layer.dk_h as f64 * layer.dk_w as f64;
    let area = layer.h as f64 * layer.w as f64;
    dense * area.powf(1.0 - params.beta) / params.gamma
}

/// `mc(g)^(1 - beta) * P(g)^beta` with weights only, for a real-valued `g`.
/// At `g = balanced_groups(..)` this equals `gamma`.
pub fn balance_level(layer: &LayerSpec, g: f64, beta: f64) -> f64 {
    let weights = layer.m as f64 * layer.n as f64 * layer.dk_h as f64 * layer.dk_w as f64 / g;
    let mc = weights * layer.h as f64 * layer.w as f64;
    mc.powf(1.0 - beta) * weights.powf(beta)
}

fn divisors(x: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1;
    while d * d <= x {
        if x.is_multiple_of(d) {
            small.push(d);
            if d * d != x {
                large.push(x / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// The common divisor of `m` and `n` nearest to `g_star` in log space.
/// Ties go to the smaller divisor.
pub fn round_to_valid(g_star: f64, m: u64, n: u64) -> u64 {
    let common = gcd(m.max(1), n.max(1));
    if !g_star.is_finite() || g_star <= 0.0 {
        return if g_star.is_infinite() && g_star > 0.0 {
            common
        } else {
            1
        };
    }
    let target = g_star.ln();
    let mut best = 1u64;
    let mut best_dist = f64::INFINITY;
    // ascending order, so a tie keeps the earlier (smaller) divisor
    for d in divisors(common) {
        let dist = ((d as f64).ln() - target).abs();
        if dist < best_dist - LOG_TIE_EPS {
            best = d;
            best_dist = dist;
        }
    }
    best
}

/// Balance solution at one layer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SiteBalance {
    pub layer_id: String,
    pub m: u64,
    pub n: u64,
    pub ofmap: u64,
    /// Continuous balanced group count.
    pub g_star: f64,
    /// Implied group size `m / g*`.
    pub group_size_star: f64,
    /// `g_star` rounded to a valid common divisor of `m` and `n`.
    pub g_rounded: u64,
}

/// Balanced `g*` and implied `G* = m / g*` for the grouped layer of every
/// substitution site, or for every conv layer when the network has no sites.
///
/// With `beta = 0.5` and square ofmaps, `G* = gamma / (n * kh * kw * d_f)`,
/// so networks that double `n` whenever `d_f` halves get a layer-constant `G*`.
pub fn constant_group_size_derivation(
    net: &NetworkSpec,
    params: &EnergyModelParams,
) -> Result<Vec<SiteBalance>, PlanError> {
    params.validate()?;
    let layers: Vec<&LayerSpec> = if net.substitution_sites.is_empty() {
        net.layers
            .iter()
            .filter(|l| l.kind == LayerKind::Conv)
            .collect()
    } else {
        net.site_layers()
            .map(|id| {
                net.layer(id).ok_or_else(|| {
                    PlanError::Invalid(vec![crate::model::Diagnostic::new(
                        id,
                        crate::model::Rule::SiteUnknownLayer(id.to_string()),
                    )])
                })
            })
            .collect::<Result<_, _>>()?
    };

    layers
        .into_iter()
        .map(|layer| {
            if layer.h != layer.w {
                return Err(PlanError::NonSquareOfmap {
                    layer: layer.id.clone(),
                    h: layer.h,
                    w: layer.w,
                });
            }
            let g_star = balanced_groups(layer, params);
            Ok(SiteBalance {
                layer_id: layer.id.clone(),
                m: layer.m,
                n: layer.n,
                ofmap: layer.h,
                g_star,
                group_size_star: layer.m as f64 / g_star,
                g_rounded: round_to_valid(g_star, layer.m, layer.n),
            })
        })
        .collect()
}

/// A single constant group size for the whole network: the common divisor of
/// every site's `m` nearest (in log space) to the geometric mean of `G*`.
pub fn suggest_group_size(balances: &[SiteBalance]) -> Option<u64> {
    if balances.is_empty() {
        return None;
    }
    let common = balances.iter().fold(0, |acc, b| gcd(acc, b.m));
    let mean_log =
        balances.iter().map(|b| b.group_size_star.ln()).sum::<f64>() / balances.len() as f64;
    Some(round_to_valid(mean_log.exp(), common, common))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(m: u64, n: u64, k: u64, hw: u64) -> LayerSpec {
        LayerSpec::conv("l", m, n, k, hw, 1, 1)
    }

    #[test]
    fn all_ones_layer() {
        let p = EnergyModelParams::default();
        assert_eq!(balanced_groups(&layer(1, 1, 1, 1), &p), 1.0);
    }

    #[test]
    fn sweep_layer_balances_at_32() {
        let p = EnergyModelParams::default().with_gamma(1_032_192.0);
        let l = layer(512, 512, 3, 14);
        let g = balanced_groups(&l, &p);
        assert!((g - 32.0).abs() < 1e-12);
        let level = balance_level(&l, g, 0.5);
        assert!(((level - 1_032_192.0) / 1_032_192.0).abs() < 1e-10);
    }

    #[test]
    fn doubling_gamma_halves_g() {
        let l = layer(96, 192, 3, 28);
        let p = EnergyModelParams::default()
            .with_gamma(1234.5)
            .with_beta(0.3);
        let a = balanced_groups(&l, &p);
        let b = balanced_groups(&l, &p.with_gamma(2469.0));
        assert!((a / b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to_valid(32.0, 512, 512), 32);
        assert_eq!(round_to_valid(3.0, 64, 64), 4);
        assert_eq!(round_to_valid(2f64.sqrt(), 8, 8), 1);
        assert_eq!(round_to_valid(1e9, 24, 36), 12);
        assert_eq!(round_to_valid(0.01, 24, 36), 1);
        assert_eq!(round_to_valid(5.0, 24, 36), 6);
    }

    #[test]
    fn rounding_is_idempotent_on_divisors() {
        for m in [1u64, 12, 30, 64, 96, 1024] {
            for d in divisors(m) {
                assert_eq!(round_to_valid(d as f64, m, m), d);
            }
        }
    }

    #[test]
    fn divisor_listing() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(divisors(16), vec![1, 2, 4, 8, 16]);
        assert_eq!(divisors(1), vec![1]);
    }

    #[test]
    fn non_square_rejected() {
        let mut net = NetworkSpec::new("t");
        let mut l = layer(8, 8, 3, 4);
        l.w = 5;
        net.layers.push(l);
        let err = constant_group_size_derivation(&net, &EnergyModelParams::default()).unwrap_err();
        assert!(matches!(err, PlanError::NonSquareOfmap { .. }));
    }
}
