use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::model::{validate, Diagnostic, NetworkSpec, Rule};

/// How the grouped layer of every substitution site is configured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupingStrategy {
    /// Constant group size `G`: `g = m / G` per layer.
    E2gc { group_size: u64 },
    /// Constant number of groups `g`.
    Fggc { groups: u64 },
    /// `g = 1`.
    Sconv,
    /// `g = m`.
    Dwconv,
}

impl GroupingStrategy {
    /// Path form used inside config ids, e.g. `e2gc/G=8`.
    pub fn config_segment(&self) -> String {
        self.to_string().replace(':', "/")
    }

    pub fn from_config_segment(s: &str) -> Result<Self, PlanError> {
        s.replacen('/', ":", 1).parse()
    }
}

impl fmt::Display for GroupingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupingStrategy::E2gc { group_size } => write!(f, "e2gc:G={group_size}"),
            GroupingStrategy::Fggc { groups } => write!(f, "fggc:g={groups}"),
            GroupingStrategy::Sconv => f.write_str("sconv"),
            GroupingStrategy::Dwconv => f.write_str("dwconv"),
        }
    }
}

impl FromStr for GroupingStrategy {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            PlanError::Strategy(format!(
                "`{s}` (expected e2gc:G=<int>, fggc:g=<int>, sconv or dwconv)"
            ))
        };
        let value = |v: &str| -> Result<u64, PlanError> {
            match v.parse::<u64>() {
                Ok(0) => Err(PlanError::Strategy(format!(
                    "`{s}`: value must be at least 1"
                ))),
                Ok(x) => Ok(x),
                Err(_) => Err(bad()),
            }
        };
        match s {
            "sconv" => Ok(GroupingStrategy::Sconv),
            "dwconv" => Ok(GroupingStrategy::Dwconv),
            _ => {
                if let Some(v) = s.strip_prefix("e2gc:G=") {
                    Ok(GroupingStrategy::E2gc {
                        group_size: value(v)?,
                    })
                } else if let Some(v) = s.strip_prefix("fggc:g=") {
                    Ok(GroupingStrategy::Fggc { groups: value(v)? })
                } else {
                    Err(bad())
                }
            }
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest common divisor `d` of `m` and `n` with `d * min(G, m) <= m`.
fn e2gc_groups(m: u64, n: u64, group_size: u64) -> u64 {
    let clamped = group_size.min(m);
    if m.is_multiple_of(clamped) && n.is_multiple_of(m / clamped) {
        return m / clamped;
    }
    let common = gcd(m, n);
    (1..=common)
        .rev()
        .find(|d| common.is_multiple_of(*d) && d * clamped <= m)
        .unwrap_or(1)
}

/// Rewrites the grouped layer of every substitution site according to
/// `strategy`. Pointwise layers and layers outside sites are left untouched.
///
/// For E2GC, a site where `G` does not divide `m` (or `G > m`) falls back to
/// the largest common divisor of `m` and `n` not exceeding `m / min(G, m)`.
pub fn plan(net: &NetworkSpec, strategy: GroupingStrategy) -> Result<NetworkSpec, PlanError> {
    match strategy {
        GroupingStrategy::E2gc { group_size: 0 } | GroupingStrategy::Fggc { groups: 0 } => {
            return Err(PlanError::Strategy(format!(
                "{strategy}: value must be at least 1"
            )));
        }
        _ => {}
    }
    let diagnostics = validate(net);
    if !diagnostics.is_empty() {
        return Err(PlanError::Invalid(diagnostics));
    }

    let mut out = net.clone();
    let mut failures: Vec<Diagnostic> = Vec::new();
    for (site, _) in &net.substitution_sites {
        let idx = out.layer_index(site).expect("validated site");
        let layer = &mut out.layers[idx];
        let (m, n) = (layer.m, layer.n);
        let g = match strategy {
            GroupingStrategy::E2gc { group_size } => e2gc_groups(m, n, group_size),
            GroupingStrategy::Fggc { groups } => groups,
            GroupingStrategy::Sconv => 1,
            GroupingStrategy::Dwconv => m,
        };
        if m % g != 0 {
            failures.push(Diagnostic::new(&layer.id, Rule::GroupsDivideInput));
        }
        if n % g != 0 {
            failures.push(Diagnostic::new(&layer.id, Rule::GroupsDivideOutput));
        }
        layer.g = g;
    }
    if !failures.is_empty() {
        return Err(PlanError::Invalid(failures));
    }
    let after = validate(&out);
    if !after.is_empty() {
        return Err(PlanError::Invalid(after));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerSpec;

    fn two_sites() -> NetworkSpec {
        let mut net = NetworkSpec::new("t");
        net.layers = vec![
            LayerSpec::conv("stem", 3, 16, 3, 8, 1, 1),
            LayerSpec::conv("dw1", 16, 16, 3, 8, 1, 16),
            LayerSpec::conv("pw1", 16, 48, 1, 8, 1, 1),
            LayerSpec::conv("dw2", 48, 48, 3, 4, 2, 48),
            LayerSpec::conv("pw2", 48, 96, 1, 4, 1, 1),
        ];
        net.substitution_sites = vec![("dw1".into(), "pw1".into()), ("dw2".into(), "pw2".into())];
        net
    }

    #[test]
    fn grammar_round_trips() {
        for s in ["e2gc:G=8", "fggc:g=32", "sconv", "dwconv"] {
            assert_eq!(s.parse::<GroupingStrategy>().unwrap().to_string(), s);
        }
        for bad in ["e2gc:g=8", "fggc:G=2", "e2gc:G=0", "conv", "fggc:g=x", ""] {
            assert!(bad.parse::<GroupingStrategy>().is_err(), "{bad}");
        }
        let s = GroupingStrategy::E2gc { group_size: 4 };
        assert_eq!(s.config_segment(), "e2gc/G=4");
        assert_eq!(
            GroupingStrategy::from_config_segment("e2gc/G=4").unwrap(),
            s
        );
    }

    #[test]
    fn e2gc_sets_constant_group_size() {
        let out = plan(&two_sites(), GroupingStrategy::E2gc { group_size: 8 }).unwrap();
        assert_eq!(out.layer("dw1").unwrap().g, 2);
        assert_eq!(out.layer("dw2").unwrap().g, 6);
        assert_eq!(out.layer("pw1").unwrap().g, 1);
        assert_eq!(
            out.layer("stem").unwrap(),
            two_sites().layer("stem").unwrap()
        );
    }

    #[test]
    fn e2gc_fallback_when_group_size_exceeds_or_misses() {
        // G = 32 > m = 16 clamps to standard conv at dw1; 48 % 32 != 0 at dw2
        let out = plan(&two_sites(), GroupingStrategy::E2gc { group_size: 32 }).unwrap();
        assert_eq!(out.layer("dw1").unwrap().g, 1);
        assert_eq!(out.layer("dw2").unwrap().g, 1);
        let out = plan(&two_sites(), GroupingStrategy::E2gc { group_size: 5 }).unwrap();
        // 16 / 5 = 3.2 -> largest divisor of 16 not above it is 2; 48/5 = 9.6 -> 8
        assert_eq!(out.layer("dw1").unwrap().g, 2);
        assert_eq!(out.layer("dw2").unwrap().g, 8);
    }

    #[test]
    fn fggc_and_degenerate_strategies() {
        let out = plan(&two_sites(), GroupingStrategy::Fggc { groups: 4 }).unwrap();
        assert_eq!(out.layer("dw1").unwrap().g, 4);
        assert_eq!(out.layer("dw2").unwrap().g, 4);
        let out = plan(&two_sites(), GroupingStrategy::Sconv).unwrap();
        assert_eq!(out.layer("dw2").unwrap().g, 1);
        let out = plan(&two_sites(), GroupingStrategy::Dwconv).unwrap();
        assert_eq!(out.layer("dw2").unwrap().g, 48);
    }

    #[test]
    fn fggc_divisibility_failure_lists_layers() {
        let err = plan(&two_sites(), GroupingStrategy::Fggc { groups: 32 }).unwrap_err();
        let d = err.diagnostics();
        assert!(d.iter().all(|d| d.layer_id == "dw1" || d.layer_id == "dw2"));
        assert!(d
            .iter()
            .any(|d| d.layer_id == "dw1" && d.rule == Rule::GroupsDivideInput));
        assert!(d
            .iter()
            .any(|d| d.layer_id == "dw2" && d.rule == Rule::GroupsDivideOutput));
    }

    #[test]
    fn invalid_input_rejected() {
        let mut net = two_sites();
        net.layers[2].m = 15;
        assert!(matches!(
            plan(&net, GroupingStrategy::Sconv),
            Err(PlanError::Invalid(_))
        ));
    }
}
