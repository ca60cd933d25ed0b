//! End-to-end composition of the planning phases, plus the grooming
//! threshold sweep that reuses the candidate-lightpath graph across runs.

use serde::{Deserialize, Serialize};

use crate::allocate::route_demands;
use crate::bom::{fit_equipment, summarize};
use crate::clp::{build_clp_graph, ClpGraph};
use crate::grooming::design_virtual_topology;
use crate::ingest::Catalog;
use crate::model::{Demand, FiberGraph};
use crate::plan::Plan;
use crate::spectrum::SpectrumState;

/// A finished plan together with the states the plan was computed from,
/// for rendering and further queries.
#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub plan: Plan,
    pub clp: ClpGraph,
    pub spectrum: SpectrumState,
}

/// Runs candidate enumeration, grooming, demand routing, spectrum
/// assignment and equipment fitting on loaded inputs.
pub fn plan_network(graph: &FiberGraph, demands: &[Demand], catalog: &Catalog) -> PlanOutcome {
    let clp = build_clp_graph(graph, catalog);
    plan_with_clp(graph, demands, catalog, clp)
}

/// Same as `plan_network` with a precomputed candidate graph; the sweep
/// reuses one CLP across thresholds since enumeration ignores them.
pub fn plan_with_clp(
    graph: &FiberGraph,
    demands: &[Demand],
    catalog: &Catalog,
    clp: ClpGraph,
) -> PlanOutcome {
    let vt = design_virtual_topology(&clp, demands, catalog);
    let mut spectrum = SpectrumState::new(graph, catalog.grid);
    let outcome = route_demands(vt, demands, catalog, &clp, graph, &mut spectrum);

    let bom = fit_equipment(
        &outcome.virtual_links,
        &outcome.lightpaths,
        graph,
        catalog,
        &spectrum,
    );
    let metrics = summarize(
        &outcome.virtual_links,
        &outcome.lightpaths,
        outcome.demand_routes.len() as u32,
        &outcome.unserved,
        &outcome.restoration_gaps,
        &bom,
        &spectrum,
    );
    let plan = Plan {
        virtual_topology: outcome.virtual_links,
        demand_routes: outcome.demand_routes,
        lightpaths: outcome.lightpaths,
        bom,
        metrics,
        unserved: outcome.unserved,
        restoration_gaps: outcome.restoration_gaps,
    };
    PlanOutcome { plan, clp, spectrum }
}

/// One row of the grooming-threshold sensitivity sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub grooming_threshold: f64,
    pub transponder_count: u32,
    pub lightpath_count: u32,
    pub cost_units: f64,
    pub avg_fragmentation: f64,
    pub unserved_count: u32,
}

/// Plans once per threshold, sharing the candidate graph, and reports the
/// comparison metrics per threshold in input order.
pub fn sweep(
    graph: &FiberGraph,
    demands: &[Demand],
    catalog: &Catalog,
    thresholds: &[f64],
) -> Vec<SweepRow> {
    let clp = build_clp_graph(graph, catalog);
    thresholds
        .iter()
        .map(|&t| {
            let mut c = catalog.clone();
            c.planner_params.grooming_threshold = t;
            let outcome = plan_with_clp(graph, demands, &c, clp.clone());
            SweepRow {
                grooming_threshold: t,
                transponder_count: outcome.plan.metrics.transponder_count,
                lightpath_count: outcome.plan.metrics.lightpath_count,
                cost_units: outcome.plan.metrics.cost_units,
                avg_fragmentation: outcome.plan.metrics.avg_fragmentation,
                unserved_count: outcome.plan.metrics.unserved_count,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PlannerParams;
    use crate::model::{
        DemandId, FiberLink, GridSpec, LinkId, MarginStack, ModeId, NodeId, NodeSite,
        ProtectionClass, RoadmClass, ServiceType, Span, TransponderMode,
    };

    fn node(id: &str) -> NodeSite {
        NodeSite { id: NodeId::from(id), name: id.to_owned(), roadm_class: RoadmClass::Fixed }
    }

    fn link(id: &str, a: &str, b: &str, len: f64) -> FiberLink {
        let n = (len / 80.0).ceil().max(1.0) as usize;
        let per = len / n as f64;
        FiberLink {
            id: LinkId::from(id),
            a: NodeId::from(a),
            b: NodeId::from(b),
            length_km: len,
            spans: (0..n).map(|_| Span { length_km: per, loss_db: 0.25 * per }).collect(),
            fiber_count: 1,
        }
    }

    fn triangle() -> FiberGraph {
        FiberGraph::new(
            vec![node("A"), node("B"), node("C")],
            vec![
                link("AB", "A", "B", 400.0),
                link("BC", "B", "C", 400.0),
                link("AC", "A", "C", 900.0),
            ],
        )
    }

    fn catalog() -> Catalog {
        Catalog {
            modes: vec![TransponderMode {
                id: ModeId::from("100G"),
                line_rate_gbps: 100.0,
                modulation: "QPSK".into(),
                slot_width_ghz: 37.5,
                required_osnr_db: 12.0,
                max_reach_km: 2000.0,
                roadm_passthrough_penalty_db: 0.5,
                cost_units: 1.0,
                power_w: 50.0,
            }],
            grid: GridSpec::flex(),
            margins: MarginStack::default(),
            cost_table: Default::default(),
            planner_params: PlannerParams { k_grooming: 1, ..Default::default() },
            constants: Default::default(),
            slots_per_shelf: 12,
        }
    }

    fn demands() -> Vec<Demand> {
        vec![Demand {
            id: DemandId::from("d1"),
            src: NodeId::from("A"),
            dst: NodeId::from("C"),
            service_type: ServiceType::Ethernet,
            bitrate_gbps: Some(60.0),
            count: None,
            protection: ProtectionClass::Unprotected,
            explicit_route: None,
        }]
    }

    #[test]
    fn triangle_plan_installs_one_bypass_lightpath() {
        let outcome = plan_network(&triangle(), &demands(), &catalog());
        let p = &outcome.plan;
        assert_eq!(p.lightpaths.len(), 1);
        assert!(p.unserved.is_empty());
        assert_eq!(p.metrics.transponder_count, 2);
        assert_eq!(p.metrics.served_count, 1);
        assert_eq!(p.metrics.total_allocated_gbps, 60.0);
    }

    #[test]
    fn plan_document_round_trips_and_is_stable() {
        let a = plan_network(&triangle(), &demands(), &catalog()).plan;
        let b = plan_network(&triangle(), &demands(), &catalog()).plan;
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(Plan::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn sweep_rows_match_individual_plans() {
        let g = triangle();
        let c = catalog();
        let d = demands();
        let thresholds = [0.1, 0.5, 1.0];
        let rows = sweep(&g, &d, &c, &thresholds);
        assert_eq!(rows.len(), 3);
        for row in &rows {
            let mut ct = c.clone();
            ct.planner_params.grooming_threshold = row.grooming_threshold;
            let p = plan_network(&g, &d, &ct).plan;
            assert_eq!(row.lightpath_count, p.metrics.lightpath_count);
            assert_eq!(row.cost_units, p.metrics.cost_units);
            assert_eq!(row.unserved_count, p.metrics.unserved_count);
        }
    }
}
