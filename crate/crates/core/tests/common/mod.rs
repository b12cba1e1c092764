#![allow(dead_code)]

use pdmp_core::model::shipped;
use pdmp_core::ModelSpec;
use serde_json::Value;

/// Parsed JSON of a shipped model, for tests that tweak one field.
pub fn shipped_json(name: &str) -> Value {
    let text = shipped::ALL.iter().find(|(n, _)| *n == name).expect("shipped model").1;
    serde_json::from_str(text).unwrap()
}

pub fn build(v: &Value) -> pdmp_core::Result<ModelSpec> {
    ModelSpec::from_json(&v.to_string())
}

/// M-DET with a second, dearer boundary action sharing the reset kernel.
pub fn m_det_two_gamma() -> ModelSpec {
    let mut v = shipped_json("m_det");
    v["actions"]["boundary"] = serde_json::json!([{ "label": "g1" }, { "label": "g2" }]);
    v["kernels"]["boundary"] = serde_json::json!([
        { "action": "g1", "atoms": [[0.5, 1.0]] },
        { "action": "g2", "atoms": [[0.5, 1.0]] }
    ]);
    v["costs"]["boundary"] = serde_json::json!({
        "g1": { "type": "constant", "value": 1.0 },
        "g2": { "type": "constant", "value": 2.0 }
    });
    v["costs"]["boundary_bound"] = 2.0.into();
    v["randomization"]["lambda_gamma"] = serde_json::json!({ "g1": 1.0, "g2": 1.0 });
    build(&v).unwrap()
}

/// Exact M-DET value `exp(-delta (1 - x)) / (1 - exp(-delta / 2))`.
pub fn m_det_value(x: f64, delta: f64) -> f64 {
    (-delta * (1.0 - x)).exp() / (1.0 - (-delta / 2.0).exp())
}
