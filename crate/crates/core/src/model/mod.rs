//! Model definition, JSON serialization and assumption checks.

mod functions;
mod geometry;
mod kernel;
mod point;
mod spec;
mod validate;

pub use functions::{Monomial, ScalarFn};
pub use geometry::{CellPartition, DomainGeometry};
pub use kernel::{Atom, DiscreteKernel};
pub use point::{Point, MAX_DIM};
pub use spec::{Action, ActionSets, ModelSpec, ANY_ACTION};
pub use validate::{
    assess_model, epsilon_interior, value_bound, validate_model, AssumptionCheck, ValidationReport,
};

/// Models distributed with the crate.
pub mod shipped {
    use super::ModelSpec;

    pub const M_DET: &str = include_str!("../../models/m_det.json");
    pub const M_CONST: &str = include_str!("../../models/m_const.json");
    pub const M_2A: &str = include_str!("../../models/m_2a.json");
    pub const M_RATE: &str = include_str!("../../models/m_rate.json");
    pub const M_STATE_RATE: &str = include_str!("../../models/m_state_rate.json");

    pub const ALL: [(&str, &str); 5] = [
        ("m_det", M_DET),
        ("m_const", M_CONST),
        ("m_2a", M_2A),
        ("m_rate", M_RATE),
        ("m_state_rate", M_STATE_RATE),
    ];

    pub fn load(name: &str) -> ModelSpec {
        let text = ALL.iter().find(|(n, _)| *n == name).unwrap_or_else(|| panic!("no shipped model {name}")).1;
        ModelSpec::from_json(text).expect("shipped models parse")
    }
}
