use kdiv_wasm::{hierarchy, scan, trace, Grid, HierarchyRequest, Model, ScanRequest, TraceRequest};

#[test]
fn eternal_trace_shows_increase() {
    let req: TraceRequest = serde_json::from_str(
        r#"{"model": "eternal", "grid": {"t_max": 0.5, "step": 0.01},
            "phi1": [0.0025, 0.5106, 0.4298, 0.0571], "phi2": [0.0430, 0.0543, 0.0084, 0.8943],
            "p": 0.7025, "k": 2}"#,
    )
    .unwrap();
    let t = trace(&req).unwrap();
    assert_eq!(t.times.len(), 51);
    assert!(!t.violations.is_empty());
    assert!(t.max_increase > 1e-4);
}

#[test]
fn semigroup_trace_is_monotone() {
    let req = TraceRequest {
        model: Model::Semigroup { rates: [0.3, 0.2, 0.5] },
        grid: Grid { t_max: 1.0, step: 0.05 },
        phi1: [1.0, 0.0, 0.0, 0.0],
        phi2: [0.25, 0.25, 0.25, 0.25],
        p: 0.5,
        k: 2,
        seed: 0,
    };
    assert!(trace(&req).unwrap().violations.is_empty());
}

#[test]
fn hierarchy_of_identity_and_depolarizing() {
    let h = hierarchy(&HierarchyRequest {
        phi1: [1.0, 0.0, 0.0, 0.0],
        phi2: [0.25, 0.25, 0.25, 0.25],
        p: 0.5,
        seed: 0,
    })
    .unwrap();
    assert!((h.values[0] - 0.5).abs() < 1e-9 && (h.values[1] - 0.75).abs() < 1e-9);
    assert_eq!(h.input_ranks[1], 2);
}

#[test]
fn eternal_scan_k2_violates() {
    let r = scan(&ScanRequest {
        model: Model::Eternal,
        grid: Grid { t_max: 0.5, step: 0.05 },
        k: 2,
        seed: 0,
    })
    .unwrap();
    assert!(r.violation[1..].iter().all(|&v| v));
    assert!(r.halted_at.is_none());
}

#[test]
fn bad_requests_are_errors() {
    let req = ScanRequest {
        model: Model::Eternal,
        grid: Grid { t_max: 100.0, step: 0.001 },
        k: 2,
        seed: 0,
    };
    assert!(scan(&req).is_err());
    let h = HierarchyRequest {
        phi1: [0.5, 0.6, 0.0, 0.0],
        phi2: [1.0, 0.0, 0.0, 0.0],
        p: 0.5,
        seed: 0,
    };
    assert!(hierarchy(&h).is_err());
}
