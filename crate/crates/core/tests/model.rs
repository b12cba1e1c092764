mod common;

use common::{build, shipped_json};
use pdmp_core::model::{assess_model, epsilon_interior, shipped, validate_model, value_bound};
use pdmp_core::{Error, ModelSpec, Numerics, Point};
use serde_json::json;

#[test]
fn shipped_models_validate_and_round_trip() {
    let num = Numerics::default();
    for (name, text) in shipped::ALL {
        let spec = ModelSpec::from_json(text).unwrap();
        let report = validate_model(&spec, &num).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(report.pass, "{name}");
        let back = ModelSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec, "{name}");
    }
}

#[test]
fn epsilon_of_m_det_is_the_reset_distance() {
    let spec = shipped::load("m_det");
    let eps = epsilon_interior(&spec, &Numerics::default()).unwrap();
    // hit rule: signed distance within the boundary tolerance
    assert!((eps - 0.5).abs() < 2e-9, "{eps}");
}

#[test]
fn epsilon_is_infinite_when_atoms_never_reach_the_boundary() {
    let spec = shipped::load("m_rate");
    assert_eq!(epsilon_interior(&spec, &Numerics::default()).unwrap(), f64::INFINITY);
    let bound = value_bound(&spec, f64::INFINITY);
    assert!((bound - (spec.running_bound / spec.delta + spec.boundary_bound)).abs() < 1e-15);
}

#[test]
fn value_bound_formula() {
    let spec = shipped::load("m_2a");
    // M_f = 1.5, M_c = 1, delta = 1, eps = 0.5
    assert!((value_bound(&spec, 0.5) - (1.5 + 3.0)).abs() < 1e-12);
}

#[test]
fn nonpositive_discount_is_rejected() {
    let mut v = shipped_json("m_det");
    v["discount"] = 0.0.into();
    let spec = build(&v).unwrap();
    assert!(matches!(validate_model(&spec, &Numerics::default()), Err(Error::NonpositiveDiscount(_))));
}

#[test]
fn kernel_weights_must_sum_to_one() {
    let mut v = shipped_json("m_det");
    v["kernels"]["interior"] = json!([{ "action": "go", "atoms": [[0.5, 0.7]] }]);
    let spec = build(&v).unwrap();
    assert!(matches!(validate_model(&spec, &Numerics::default()), Err(Error::MalformedKernel(_))));
}

#[test]
fn boundary_reset_atom_violates_h0() {
    let mut v = shipped_json("m_det");
    v["kernels"]["boundary"] = json!([{ "action": "reset", "atoms": [[1.0, 1.0]] }]);
    let spec = build(&v).unwrap();
    assert!(matches!(validate_model(&spec, &Numerics::default()), Err(Error::H0Violation(_))));
}

#[test]
fn declared_epsilon_above_the_measured_one_fails() {
    let mut v = shipped_json("m_det");
    v["h0_epsilon"] = 0.6.into();
    let spec = build(&v).unwrap();
    let report = assess_model(&spec, &Numerics::default()).unwrap();
    assert!(!report.pass);
    assert!(report.checks.iter().any(|c| c.name == "h0" && !c.pass));
}

#[test]
fn running_cost_above_its_bound_fails() {
    let mut v = shipped_json("m_det");
    v["costs"]["running"]["go"] = json!({ "type": "affine", "offset": 0.0, "coeffs": [2.0] });
    v["costs"]["running_bound"] = 1.0.into();
    let spec = build(&v).unwrap();
    assert!(matches!(validate_model(&spec, &Numerics::default()), Err(Error::BoundViolation(_))));
}

#[test]
fn nonpositive_randomization_weight_fails() {
    let mut v = shipped_json("m_det");
    v["randomization"]["lambda0"]["go"] = 0.0.into();
    let spec = build(&v).unwrap();
    assert!(matches!(validate_model(&spec, &Numerics::default()), Err(Error::NonpositiveRandomization(_))));
}

#[test]
fn unknown_labels_and_missing_functions_are_malformed() {
    let mut v = shipped_json("m_det");
    v["dynamics"]["drift"] = json!({ "stop": [{ "type": "constant", "value": 1.0 }] });
    assert!(matches!(build(&v), Err(Error::Json(_)) | Err(Error::MalformedModel(_))));
    let mut v = shipped_json("m_det");
    v["kernels"]["interior"] = json!([{ "action": "go", "atoms": [[1.5, 1.0]] }]);
    let spec = build(&v);
    assert!(spec.is_err() || validate_model(&spec.unwrap(), &Numerics::default()).is_err());
}

#[test]
fn wildcard_entries_cover_every_action() {
    let spec = shipped::load("m_2a");
    let x = Point::from_slice(&[0.4]);
    assert_eq!(spec.rate_at(&x, 0), 1.0);
    assert_eq!(spec.rate_at(&x, 1), 1.0);
    assert_eq!(spec.drift_at(&x, 1)[0], 1.0);
    assert_eq!(spec.interior_index("boost"), Some(1));
    assert_eq!(spec.boundary_index("dear"), Some(1));
}

#[test]
fn per_cell_kernel_entries_override_the_default() {
    let mut v = shipped_json("m_det");
    v["geometry"]["cells"] = json!({ "breaks": [[0.5]] });
    v["kernels"]["interior"] = json!([
        { "action": "go", "atoms": [[0.5, 1.0]] },
        { "cell": 1, "action": "go", "atoms": [[0.2, 0.5], [0.3, 0.5]] }
    ]);
    let spec = build(&v).unwrap();
    assert_eq!(spec.q.atoms(0, 0).len(), 1);
    assert_eq!(spec.q.atoms(1, 0).len(), 2);
    let back = ModelSpec::from_json(&spec.to_json().unwrap()).unwrap();
    assert_eq!(back, spec);
}
