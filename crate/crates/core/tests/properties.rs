//! Property tests of the feasibility arithmetic and spectrum metrics.

use proptest::prelude::*;

use optiplan_core::impairment::evaluate_mode;
use optiplan_core::ingest::SpectrumPolicy;
use optiplan_core::model::{
    FiberGraph, FiberLink, GridKind, GridSpec, LinkId, MarginStack, ModeId, NodeId, NodeSite,
    PathMetrics, RoadmClass, Span, TransponderMode,
};
use optiplan_core::spectrum::SpectrumState;

fn mode(reach: f64, req: f64, penalty: f64) -> TransponderMode {
    TransponderMode {
        id: ModeId::from("m"),
        line_rate_gbps: 100.0,
        modulation: "QPSK".into(),
        slot_width_ghz: 37.5,
        required_osnr_db: req,
        max_reach_km: reach,
        roadm_passthrough_penalty_db: penalty,
        cost_units: 1.0,
        power_w: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Raising any margin never turns an infeasible mode feasible.
    #[test]
    fn margin_increase_never_helps(
        osnr in 5.0f64..40.0,
        length in 10.0f64..3000.0,
        passthrough in 0u32..6,
        req in 5.0f64..25.0,
        penalty in 0.0f64..1.0,
        aging in 0.0f64..5.0,
        repair in 0.0f64..5.0,
        operator in 0.0f64..5.0,
        bump in 0.0f64..5.0,
    ) {
        let metrics = PathMetrics {
            total_length_km: length,
            span_count: 10,
            roadm_passthrough_count: passthrough,
            osnr_db: osnr,
            effective_required_osnr_db: 0.0,
        };
        let m = mode(2000.0, req, penalty);
        let lo = MarginStack {
            aging_margin_db: aging,
            span_repair_margin_db: repair,
            operator_margin_db: operator,
        };
        let hi = MarginStack { aging_margin_db: aging + bump, ..lo };
        let vlo = evaluate_mode(&metrics, &m, &lo);
        let vhi = evaluate_mode(&metrics, &m, &hi);
        prop_assert!(!(vhi.feasible && !vlo.feasible));
    }

    /// The effective requirement is exactly the stated sum.
    #[test]
    fn effective_requirement_is_additive(
        passthrough in 0u32..8,
        req in 5.0f64..25.0,
        penalty in 0.0f64..1.0,
        aging in 0.0f64..5.0,
    ) {
        let metrics = PathMetrics {
            total_length_km: 100.0,
            span_count: 2,
            roadm_passthrough_count: passthrough,
            osnr_db: 30.0,
            effective_required_osnr_db: 0.0,
        };
        let margins = MarginStack { aging_margin_db: aging, ..Default::default() };
        let v = evaluate_mode(&metrics, &mode(2000.0, req, penalty), &margins);
        let want = req + f64::from(passthrough) * penalty + aging;
        prop_assert!((v.metrics.effective_required_osnr_db - want).abs() < 1e-9);
    }

    /// Fragmentation stays within [0,1] for any assignment pattern.
    #[test]
    fn fragmentation_is_bounded(ops in proptest::collection::vec((0u32..14, 1u32..3), 0..12)) {
        let g = FiberGraph::new(
            vec![
                NodeSite { id: NodeId::from("A"), name: "A".into(), roadm_class: RoadmClass::Fixed },
                NodeSite { id: NodeId::from("B"), name: "B".into(), roadm_class: RoadmClass::Fixed },
            ],
            vec![FiberLink {
                id: LinkId::from("AB"),
                a: NodeId::from("A"),
                b: NodeId::from("B"),
                length_km: 80.0,
                spans: vec![Span { length_km: 80.0, loss_db: 20.0 }],
                fiber_count: 1,
            }],
        );
        let grid = GridSpec {
            kind: GridKind::Flex,
            channel_count: 96,
            slot_granularity_ghz: 12.5,
            total_slots: 16,
        };
        let mut s = SpectrumState::new(&g, grid);
        let l = LinkId::from("AB");
        for (_, width) in ops {
            let _ = s.assign(std::slice::from_ref(&l), width, SpectrumPolicy::FirstFit);
            let f = s.fragmentation(&l, 0);
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
