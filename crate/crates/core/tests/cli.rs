use std::fs;

use e2gc_core::blueprints::{self, Architecture, BlueprintId};
use e2gc_core::cli::run_with;
use e2gc_core::netjson;
use e2gc_core::planner::GroupingStrategy;
use e2gc_core::report::read_report_csv;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("e2gc").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn analyze_totals_only() {
    let (code, out, err) = run(&[
        "analyze",
        "--net",
        "resnext50_32x4d",
        "--strategy",
        "e2gc:G=8",
        "--totals-only",
    ]);
    assert_eq!(code, 0, "{err}");
    let rows = read_report_csv(out.as_bytes()).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].layer_id, "TOTAL");
    assert_eq!(rows[0].config_id, "resnext50_32x4d/e2gc/G=8");
    assert_eq!((rows[0].mc, rows[0].params), (4_197_965_824, 24_157_992));
    assert!(err.contains("batch-norm"));
}

#[test]
fn analyze_per_layer_sums_to_total() {
    let (code, out, _) = run(&["analyze", "--net", "mobilenet_v1"]);
    assert_eq!(code, 0);
    let rows = read_report_csv(out.as_bytes()).unwrap();
    let (total, layers): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.layer_id == "TOTAL");
    assert_eq!(total.len(), 1);
    assert_eq!(layers.iter().map(|r| r.mc).sum::<u64>(), total[0].mc);
    assert_eq!(
        layers.iter().map(|r| r.params).sum::<u64>(),
        total[0].params
    );
}

#[test]
fn tables_json_has_every_configuration() {
    let (code, out, _) = run(&["tables", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 22);
}

#[test]
fn tables_compare_within_one_percent() {
    let (code, out, _) = run(&["tables", "--compare", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 22);
    for r in rows {
        for key in ["params_rel_err", "mc_rel_err"] {
            assert!(r[key].as_f64().unwrap().abs() <= 0.01, "{r}");
        }
    }
}

#[test]
fn invalid_grouping_exits_2_with_diagnostics() {
    let (code, _, err) = run(&[
        "transform",
        "--net",
        "mobilenet_v1",
        "--strategy",
        "fggc:g=3",
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("block1.dw"), "{err}");
    assert!(err.contains("does not divide"), "{err}");
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["frobnicate"]).0, 64);
    assert_eq!(run(&["analyze"]).0, 64);
    assert_eq!(
        run(&["analyze", "--net", "mobilenet_v1", "--strategy", "e2gc:G=0"]).0,
        64
    );
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn transform_writes_file_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    let (code, out, _) = run(&[
        "transform",
        "--net",
        "mobilenet_v1",
        "--strategy",
        "e2gc:G=4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(out.is_empty());
    let net = netjson::parse_network_json(&path).unwrap();
    assert_eq!(net.layer("block1.dw").unwrap().g, 8);

    let (code, out, _) = run(&["analyze", "--net", path.to_str().unwrap(), "--totals-only"]);
    assert_eq!(code, 0);
    let rows = read_report_csv(out.as_bytes()).unwrap();
    let planned = blueprints::variant(
        BlueprintId::new(Architecture::MobilenetV1),
        GroupingStrategy::E2gc { group_size: 4 },
    )
    .unwrap();
    let expected = e2gc_core::network_cost(&planned).unwrap().total;
    assert_eq!((rows[0].mc, rows[0].params), (expected.mc, expected.params));
}

#[test]
fn malformed_network_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"schema_version": 1, "name": "x", "layers": [], "extra": 0}"#,
    )
    .unwrap();
    let (code, _, err) = run(&["analyze", "--net", path.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(err.contains("extra"), "{err}");
}

#[test]
fn missing_file_exits_1() {
    let (code, _, _) = run(&["calibrate", "--measurements", "/nonexistent/epf.csv"]);
    assert_eq!(code, 1);
}

#[test]
fn sweep_json() {
    let (code, out, _) = run(&["sweep", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[9]["mc_norm"].as_f64(), Some(512.0));
}

#[test]
fn calibrate_bundled_and_filtered() {
    let (code, out, err) = run(&["calibrate", "--format", "json"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let beta = v["beta"].as_f64().unwrap();
    assert!(beta > 0.0 && beta < 1.0);
    assert_eq!(v["records_used"].as_u64(), Some(132));

    let (code, out, _) = run(&[
        "calibrate",
        "--device",
        "P100",
        "--batch-size",
        "16",
        "--net",
        "mobilenet_v1",
    ]);
    assert_eq!(code, 0);
    let rows = read_report_csv(out.as_bytes()).unwrap();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.epf_measured_mj.is_some()));
}

#[test]
fn calibration_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("epf.csv");
    fs::write(
        &path,
        "config_id,batch_size,device,epf_millijoule\nmobilenet_v1/e2gc/G=1,1,X,10\n",
    )
    .unwrap();
    assert_eq!(
        run(&["calibrate", "--measurements", path.to_str().unwrap()]).0,
        3
    );
}

#[test]
fn optimize_reports_group_size() {
    let (code, out, err) = run(&[
        "optimize",
        "--net",
        "mobilenet_v1",
        "--gamma",
        "1e5",
        "--format",
        "json",
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v.is_object(), "{v}");
    assert!(err.to_lowercase().contains("g"), "{err}");
}

#[test]
fn verify_kernels_passes() {
    let (code, out, _) = run(&["verify-kernels", "--configs", "25", "--format", "json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["configs"].as_u64(), Some(25));
}
