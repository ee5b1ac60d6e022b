use geodp_wasm::{sensitivity_view, spd_view, sphere_view};
use serde_json::Value;

#[test]
fn sphere_view_has_every_release() {
    let v: Value = serde_json::from_str(&sphere_view(30, 0.001, 0.5, 0.5, 4, 1).unwrap()).unwrap();
    assert_eq!(v["y"].as_array().unwrap().len(), 30);
    assert_eq!(v["releases"].as_array().unwrap().len(), 4);
    for rel in v["releases"].as_array().unwrap() {
        for p in rel["curve"].as_array().unwrap() {
            let norm: f64 = p.as_array().unwrap().iter().map(|c| c.as_f64().unwrap().powi(2)).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        assert!(rel["mse"].as_f64().unwrap() >= v["baseline_mse"].as_f64().unwrap());
    }
    assert!(v["warnings"].as_array().unwrap().iter().any(|w| w.as_str().unwrap().contains("differential privacy")));
    assert_eq!(sphere_view(30, 0.001, 0.5, 0.5, 4, 1).unwrap(), sphere_view(30, 0.001, 0.5, 0.5, 4, 1).unwrap());
}

#[test]
fn sensitivity_curves_agree_at_zero_and_split_by_curvature() {
    let v: Value = serde_json::from_str(&sensitivity_view(50, 0.5, 1.0, 11).unwrap()).unwrap();
    let curves = v["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 3);
    let last = |c: &Value, key: &str| c[key].as_array().unwrap().last().unwrap().as_f64().unwrap();
    // positive and flat bounds coincide; the negative-curvature bound is larger
    assert_eq!(last(&curves[0], "delta_p"), last(&curves[1], "delta_p"));
    assert!(last(&curves[2], "delta_p") > last(&curves[1], "delta_p"));
    assert!((last(&curves[1], "delta_p") - 2.0 / 50.0).abs() < 1e-15);
    assert!(sensitivity_view(0, 0.5, 1.0, 11).is_err());
}

#[test]
fn spd_view_outlines_are_closed() {
    let v: Value = serde_json::from_str(&spd_view(12, 0.01, 1.0, 2).unwrap()).unwrap();
    assert_eq!(v["data"].as_array().unwrap().len(), 12);
    for e in v["fit"].as_array().unwrap().iter().chain(v["private"].as_array().unwrap()) {
        let outline = e["outline"].as_array().unwrap();
        let (a, b) = (&outline[0], outline.last().unwrap());
        assert!((a[0].as_f64().unwrap() - b[0].as_f64().unwrap()).abs() < 1e-12);
        assert!((a[1].as_f64().unwrap() - b[1].as_f64().unwrap()).abs() < 1e-12);
    }
    assert!(spd_view(12, 0.01, -1.0, 2).is_err());
}
