//! Network JSON format.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "...",
//!   "layers": [{"id": "...", "kind": "conv", "in_channels": 32, "out_channels": 32,
//!               "kernel": [3, 3], "stride": 1, "padding": 1, "ofmap": [112, 112],
//!               "groups": 32, "bias": false, "batchnorm": true}],
//!   "substitution_sites": [["block1.dw", "block1.pw"]]
//! }
//! ```
//!
//! A layer may carry an optional `"input"` naming its producing layer when
//! that is not the previous entry (branches such as residual projections).
//! Unknown keys are rejected. Emission is canonical: fixed key order,
//! two-space indentation, trailing newline.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::model::{LayerKind, LayerSpec, NetworkSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    schema_version: u32,
    name: String,
    layers: Vec<LayerEntry>,
    #[serde(default)]
    substitution_sites: Vec<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    id: String,
    kind: LayerKind,
    in_channels: u64,
    out_channels: u64,
    kernel: [u64; 2],
    stride: u64,
    padding: u64,
    ofmap: [u64; 2],
    groups: u64,
    bias: bool,
    batchnorm: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<String>,
}

impl From<&LayerSpec> for LayerEntry {
    fn from(l: &LayerSpec) -> Self {
        LayerEntry {
            id: l.id.clone(),
            kind: l.kind,
            in_channels: l.m,
            out_channels: l.n,
            kernel: [l.dk_h, l.dk_w],
            stride: l.stride,
            padding: l.padding,
            ofmap: [l.h, l.w],
            groups: l.g,
            bias: l.has_bias,
            batchnorm: l.has_batchnorm,
            input: l.input.clone(),
        }
    }
}

impl From<LayerEntry> for LayerSpec {
    fn from(e: LayerEntry) -> Self {
        LayerSpec {
            id: e.id,
            kind: e.kind,
            m: e.in_channels,
            n: e.out_channels,
            dk_h: e.kernel[0],
            dk_w: e.kernel[1],
            h: e.ofmap[0],
            w: e.ofmap[1],
            stride: e.stride,
            padding: e.padding,
            g: e.groups,
            has_bias: e.bias,
            has_batchnorm: e.batchnorm,
            input: e.input,
        }
    }
}

pub fn from_json_str(s: &str) -> Result<NetworkSpec, FormatError> {
    let de = &mut serde_json::Deserializer::from_str(s);
    let file: NetworkFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        FormatError::Json {
            path,
            message: e.into_inner().to_string(),
        }
    })?;

    if file.schema_version != SCHEMA_VERSION {
        return Err(FormatError::SchemaVersion(file.schema_version));
    }
    let mut seen = HashSet::new();
    for l in &file.layers {
        if !seen.insert(l.id.as_str()) {
            return Err(FormatError::DuplicateId(l.id.clone()));
        }
    }
    Ok(NetworkSpec {
        name: file.name,
        layers: file.layers.into_iter().map(LayerSpec::from).collect(),
        substitution_sites: file
            .substitution_sites
            .into_iter()
            .map(|[a, b]| (a, b))
            .collect(),
    })
}

pub fn to_json_string(net: &NetworkSpec) -> String {
    let file = NetworkFile {
        schema_version: SCHEMA_VERSION,
        name: net.name.clone(),
        layers: net.layers.iter().map(LayerEntry::from).collect(),
        substitution_sites: net
            .substitution_sites
            .iter()
            .map(|(a, b)| [a.clone(), b.clone()])
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("network serializes");
    s.push('\n');
    s
}

pub fn parse_network_json(path: impl AsRef<Path>) -> Result<NetworkSpec, FormatError> {
    from_json_str(&std::fs::read_to_string(path)?)
}

pub fn emit_network_json(net: &NetworkSpec, path: impl AsRef<Path>) -> Result<(), FormatError> {
    std::fs::write(path, to_json_string(net))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
  "schema_version": 1,
  "name": "tiny",
  "layers": [
    {"id": "a", "kind": "conv", "in_channels": 3, "out_channels": 64, "kernel": [3, 3],
     "stride": 1, "padding": 1, "ofmap": [8, 8], "groups": 1, "bias": false, "batchnorm": true},
    {"id": "b", "kind": "conv", "in_channels": 64, "out_channels": 64, "kernel": [3, 3],
     "stride": 1, "padding": 1, "ofmap": [8, 8], "groups": 3, "bias": false, "batchnorm": true}
  ],
  "substitution_sites": []
}"#;

    #[test]
    fn parses_invalid_but_well_formed_network() {
        let net = from_json_str(SMALL).unwrap();
        assert_eq!(net.layers[1].g, 3);
        let d = crate::model::validate(&net);
        assert!(d.iter().all(|d| d.layer_id == "b"));
        assert!(d
            .iter()
            .any(|d| d.rule.to_string() == "g does not divide m"));
    }

    #[test]
    fn missing_layers_key_named() {
        let err = from_json_str(r#"{"schema_version": 1, "name": "x"}"#).unwrap_err();
        assert!(err.to_string().contains("layers"), "{err}");
    }

    #[test]
    fn unknown_key_path() {
        let bad = SMALL.replace(
            "\"bias\": false, \"batchnorm\": true},",
            "\"bias\": false, \"batchnorm\": true, \"dilation\": 2},",
        );
        match from_json_str(&bad).unwrap_err() {
            FormatError::Json { path, .. } => assert_eq!(path, "layers[0].dilation"),
            other => panic!("{other}"),
        }
        let bad = SMALL.replacen("\"name\"", "\"extra\": 1, \"name\"", 1);
        match from_json_str(&bad).unwrap_err() {
            FormatError::Json { path, .. } => assert_eq!(path, "extra"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn duplicate_ids_and_version() {
        let dup = SMALL.replace("\"id\": \"b\"", "\"id\": \"a\"");
        assert!(matches!(
            from_json_str(&dup),
            Err(FormatError::DuplicateId(_))
        ));
        let v2 = SMALL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(
            from_json_str(&v2),
            Err(FormatError::SchemaVersion(2))
        ));
        assert!(matches!(from_json_str("{"), Err(FormatError::Json { .. })));
    }

    #[test]
    fn optional_input_survives() {
        let mut net = from_json_str(SMALL).unwrap();
        net.layers[1].input = Some("a".into());
        let s = to_json_string(&net);
        assert!(s.contains("\"input\": \"a\""));
        assert_eq!(from_json_str(&s).unwrap(), net);
    }
}
