use std::ffi::{CStr, CString};
use std::ptr;

use e2gc_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(e2gc_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

fn blueprint(name: &str) -> *mut E2gcNetwork {
    let name = CString::new(name).unwrap();
    let mut net = ptr::null_mut();
    let status = unsafe { e2gc_network_from_blueprint(name.as_ptr(), 224, 1.0, &mut net) };
    assert_eq!(status, E2gcStatus::Ok, "{}", last_error());
    assert!(!net.is_null());
    net
}

#[test]
fn mobilenet_table_cell_through_abi() {
    let base = blueprint("mobilenet_v1");
    let mut planned = ptr::null_mut();
    unsafe {
        assert_eq!(
            e2gc_network_plan(base, E2gcStrategyKind::E2gc, 8, &mut planned),
            E2gcStatus::Ok
        );
        let mut cost = E2gcCost::default();
        assert_eq!(e2gc_network_cost(planned, &mut cost), E2gcStatus::Ok);
        let reference_macs = 690.44e6_f64;
        assert!(
            (cost.mc as f64 - reference_macs).abs() / reference_macs < 0.01,
            "{}",
            cost.mc
        );
        assert!(e2gc_network_layer_count(planned) > 20);
        e2gc_network_free(planned);
        e2gc_network_free(base);
    }
}

#[test]
fn json_round_trip_is_byte_identical() {
    let net = blueprint("resnext50_32x4d");
    unsafe {
        let mut text = ptr::null_mut();
        assert_eq!(e2gc_network_to_json(net, &mut text), E2gcStatus::Ok);
        let first = CStr::from_ptr(text).to_owned();
        let mut again = ptr::null_mut();
        assert_eq!(e2gc_network_from_json(text, &mut again), E2gcStatus::Ok);
        let mut text2 = ptr::null_mut();
        assert_eq!(e2gc_network_to_json(again, &mut text2), E2gcStatus::Ok);
        assert_eq!(first.as_c_str(), CStr::from_ptr(text2));

        let mut count = usize::MAX;
        assert_eq!(e2gc_network_validate(again, &mut count), E2gcStatus::Ok);
        assert_eq!(count, 0);

        e2gc_string_free(text);
        e2gc_string_free(text2);
        e2gc_network_free(again);
        e2gc_network_free(net);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            e2gc_network_from_blueprint(ptr::null(), 224, 1.0, &mut out),
            E2gcStatus::NullPointer
        );

        let name = CString::new("vgg16").unwrap();
        assert_eq!(
            e2gc_network_from_blueprint(name.as_ptr(), 224, 1.0, &mut out),
            E2gcStatus::UnknownBlueprint
        );
        assert!(!last_error().is_empty());

        let bad = CString::new("{\"schema_version\": 1}").unwrap();
        assert_eq!(
            e2gc_network_from_json(bad.as_ptr(), &mut out),
            E2gcStatus::Parse
        );
        assert!(
            last_error().contains("name") || last_error().contains("layers"),
            "{}",
            last_error()
        );

        let invalid_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            e2gc_network_from_json(invalid_utf8.as_ptr().cast(), &mut out),
            E2gcStatus::InvalidUtf8
        );

        let net = blueprint("mobilenet_v1");
        let mut planned = ptr::null_mut();
        assert_eq!(
            e2gc_network_plan(net, E2gcStrategyKind::Fggc, 3, &mut planned),
            E2gcStatus::Validation
        );
        assert!(planned.is_null());
        assert!(last_error().contains("block1.dw"), "{}", last_error());

        let mut cost = E2gcCost::default();
        assert_eq!(
            e2gc_network_layer_cost(net, 10_000, &mut cost),
            E2gcStatus::OutOfRange
        );
        assert_eq!(
            e2gc_network_cost(net, ptr::null_mut()),
            E2gcStatus::NullPointer
        );
        assert_eq!(e2gc_network_cost(net, &mut cost), E2gcStatus::Ok);
        assert_eq!(last_error(), "");

        assert_eq!(e2gc_network_layer_count(ptr::null()), 0);
        e2gc_network_free(ptr::null_mut());
        e2gc_string_free(ptr::null_mut());
        e2gc_network_free(net);
    }
}

#[test]
fn layer_helpers() {
    let dw = E2gcLayer {
        m: 512,
        n: 512,
        dk_h: 3,
        dk_w: 3,
        h: 14,
        w: 14,
        stride: 1,
        g: 512,
        has_bias: false,
        has_batchnorm: false,
    };
    unsafe {
        let mut cost = E2gcCost::default();
        assert_eq!(e2gc_layer_cost(&dw, &mut cost), E2gcStatus::Ok);
        assert_eq!(
            (cost.mc, cost.params, cost.activations),
            (903_168, 4_608, 200_704)
        );

        let bad = E2gcLayer { g: 7, ..dw };
        assert_eq!(e2gc_layer_cost(&bad, &mut cost), E2gcStatus::Validation);

        let mut g_star = 0.0;
        assert_eq!(
            e2gc_balanced_groups(&dw, 0.5, 1.0, &mut g_star),
            E2gcStatus::Ok
        );
        let expected = 512.0 * 512.0 * 9.0 * 14.0;
        assert!((g_star - expected).abs() / expected < 1e-12);
        assert_eq!(
            e2gc_balanced_groups(&dw, 1.5, 1.0, &mut g_star),
            E2gcStatus::Validation
        );

        let unit = E2gcCost {
            mc: 1,
            params: 1,
            activations: 2,
            ai: 1.0 / 3.0,
        };
        let mut e = 0.0;
        assert_eq!(e2gc_energy_proxy(&unit, 0.5, 2.0, &mut e), E2gcStatus::Ok);
        assert!((e - 2.0 * 3f64.sqrt()).abs() < 1e-12);
    }
    assert_eq!(e2gc_round_to_valid(10.0, 512, 512), 8);
    assert_eq!(e2gc_round_to_valid(12.0, 512, 512), 16);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/e2gc.h");
    for symbol in [
        "e2gc_last_error_message",
        "e2gc_version",
        "e2gc_network_from_blueprint",
        "e2gc_network_from_json",
        "e2gc_network_to_json",
        "e2gc_string_free",
        "e2gc_network_free",
        "e2gc_network_validate",
        "e2gc_network_plan",
        "e2gc_network_cost",
        "e2gc_network_layer_count",
        "e2gc_network_layer_cost",
        "e2gc_layer_cost",
        "e2gc_balanced_groups",
        "e2gc_round_to_valid",
        "e2gc_energy_proxy",
        "typedef struct E2gcNetwork E2gcNetwork",
        "E2GC_STATUS_OK = 0",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
    let version = unsafe { CStr::from_ptr(e2gc_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
