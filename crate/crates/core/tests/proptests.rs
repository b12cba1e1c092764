use std::sync::OnceLock;

use pdmp_core::model::{shipped, DomainGeometry};
use pdmp_core::solver::{DualOperator, Grid, PrimalOperator, ValueField};
use pdmp_core::{ModelSpec, Numerics, Point};
use proptest::prelude::*;

const N: usize = 20;

fn setup() -> &'static (ModelSpec, Numerics) {
    static S: OnceLock<(ModelSpec, Numerics)> = OnceLock::new();
    S.get_or_init(|| (shipped::load("m_2a"), Numerics { grid_n: N, ..Numerics::default() }))
}

fn primal() -> &'static PrimalOperator<'static> {
    static OP: OnceLock<PrimalOperator<'static>> = OnceLock::new();
    OP.get_or_init(|| {
        let (spec, num) = setup();
        PrimalOperator::new(spec, num, N).unwrap()
    })
}

fn dual() -> &'static DualOperator<'static> {
    static OP: OnceLock<DualOperator<'static>> = OnceLock::new();
    OP.get_or_init(|| {
        let (spec, num) = setup();
        DualOperator::new(spec, num, N).unwrap()
    })
}

fn field(base: ValueField, values: &[f64]) -> ValueField {
    ValueField { values: values.to_vec(), ..base }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_operator_is_monotone(v in prop::collection::vec(0.0f64..5.0, N + 1),
                                    bump in prop::collection::vec(0.0f64..1.0, N + 1)) {
        let op = primal();
        let w: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let gv = op.apply(&field(op.zero_field(), &v));
        let gw = op.apply(&field(op.zero_field(), &w));
        for (a, b) in gv.values.iter().zip(&gw.values) {
            prop_assert!(a <= &(b + 1e-12));
        }
    }

    #[test]
    fn one_step_growth_is_bounded(v in prop::collection::vec(0.0f64..5.0, N + 1)) {
        let (spec, _) = setup();
        let op = primal();
        let top = v.iter().copied().fold(0.0, f64::max);
        let gv = op.apply(&field(op.zero_field(), &v));
        let cap = spec.running_bound / spec.delta + spec.boundary_bound + top;
        for a in &gv.values {
            prop_assert!(*a >= 0.0 && *a <= cap + 1e-9, "{a} vs {cap}");
        }
    }

    #[test]
    fn iterates_from_zero_stay_under_the_bound(k in 1usize..60) {
        let op = primal();
        let mut v = op.zero_field();
        for _ in 0..k {
            v = op.apply(&v);
        }
        prop_assert!(v.min() >= 0.0 && v.max() <= op.bound, "{} vs {}", v.max(), op.bound);
    }

    #[test]
    fn penalized_operator_is_monotone(v in prop::collection::vec(0.0f64..5.0, 4 * (N + 1)),
                                      bump in prop::collection::vec(0.0f64..1.0, 4 * (N + 1)),
                                      level in 1.0f64..64.0) {
        let op = dual();
        let zero = ValueField::constant(op.grid.clone(), op.space(), 0.0);
        let w: Vec<f64> = v.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let tv = op.apply(&field(zero.clone(), &v), level);
        let tw = op.apply(&field(zero, &w), level);
        for (a, b) in tv.values.iter().zip(&tw.values) {
            prop_assert!(a <= &(b + 1e-9));
        }
    }

    #[test]
    fn stencil_weights_form_a_partition_of_unity(x in -0.5f64..2.5, y in -1.5f64..1.5, n in 1usize..30) {
        let geom = DomainGeometry::new(vec![0.0, -1.0], vec![2.0, 1.0], 1e-9);
        let g = Grid::new(&geom, n);
        let st = g.stencil(&Point::from_slice(&[x, y]));
        let total: f64 = st.w[..st.len as usize].iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(st.w[..st.len as usize].iter().all(|w| *w >= 0.0));
    }
}
