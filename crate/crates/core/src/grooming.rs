//! Virtual topology design: a candidate lightpath becomes a grooming link
//! when its potential grooming load clears the threshold fraction of the
//! best feasible line rate; the rest are deleted. One-hop candidates are
//! exempt so every demand keeps an opaque fallback route.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::Catalog;
use crate::model::{
    CandidateLightpath, ClpId, Demand, DemandId, FiberGraph, FiberLink, LinkId, NodeSite,
    RoadmClass, Span, TransponderMode, VirtualLink, VirtualLinkId,
};
use crate::clp::ClpGraph;
use crate::paths::k_shortest_paths;

/// Potential grooming load per candidate, plus demands with no CLP route.
pub type GroomingLoadTable = BTreeMap<ClpId, f64>;

/// One trace line of the deletion loop, for the sweep tool.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroomingTraceRow {
    pub round: u32,
    pub clp_id: ClpId,
    pub load_gbps: f64,
    pub capacity_gbps: f64,
    pub kept: bool,
}

/// The CLP layer as a unit-weight graph for grooming-path computation.
/// Each candidate edge becomes a link whose id is the candidate id.
fn aux_graph(edges: &[CandidateLightpath]) -> FiberGraph {
    let mut nodes: Vec<NodeSite> = Vec::new();
    for e in edges {
        for n in [&e.endpoints.0, &e.endpoints.1] {
            if !nodes.iter().any(|s| &s.id == n) {
                nodes.push(NodeSite {
                    id: n.clone(),
                    name: n.as_str().to_owned(),
                    roadm_class: RoadmClass::Fixed,
                });
            }
        }
    }
    let links = edges
        .iter()
        .map(|e| FiberLink {
            id: LinkId::new(e.id.as_str()),
            a: e.endpoints.0.clone(),
            b: e.endpoints.1.clone(),
            length_km: 1.0,
            spans: vec![Span { length_km: 1.0, loss_db: 0.25 }],
            fiber_count: 1,
        })
        .collect();
    FiberGraph::new(nodes, links)
}

/// Sums each demand's bitrate over its k candidate grooming paths on the
/// CLP layer (hop-count weight). With `load_split` the bitrate is divided
/// equally over the paths found. Returns the load table and the demands
/// that have no CLP route at all.
pub fn potential_loads(
    edges: &[CandidateLightpath],
    demands: &[Demand],
    k_grooming: u32,
    load_split: bool,
) -> (GroomingLoadTable, Vec<DemandId>) {
    let (table, unroutable, _) = loads_and_protected(edges, demands, k_grooming, load_split);
    (table, unroutable)
}

/// Load table plus the set of candidates traversed by any protected
/// demand's grooming paths (those couple protection pairs into units).
fn loads_and_protected(
    edges: &[CandidateLightpath],
    demands: &[Demand],
    k_grooming: u32,
    load_split: bool,
) -> (GroomingLoadTable, Vec<DemandId>, std::collections::BTreeSet<ClpId>) {
    let aux = aux_graph(edges);
    let mut table: GroomingLoadTable = edges.iter().map(|e| (e.id.clone(), 0.0)).collect();
    let mut unroutable = Vec::new();
    let mut protected_touched = std::collections::BTreeSet::new();
    for d in demands {
        let paths = if aux.contains_node(&d.src) && aux.contains_node(&d.dst) {
            k_shortest_paths(&aux, &d.src, &d.dst, k_grooming, crate::ingest::AdminWeight::Hops)
                .unwrap_or_default()
        } else {
            Vec::new()
        };
        if paths.is_empty() {
            unroutable.push(d.id.clone());
            continue;
        }
        let share = if load_split {
            d.effective_bitrate_gbps() / paths.len() as f64
        } else {
            d.effective_bitrate_gbps()
        };
        for p in &paths {
            for clp_link in &p.links {
                let id = ClpId::new(clp_link.as_str());
                *table.get_mut(&id).unwrap() += share;
                if d.protection.wants_protection() {
                    protected_touched.insert(id);
                }
            }
        }
    }
    (table, unroutable, protected_touched)
}

/// The mode installed on a grooming link: highest feasible line rate, ties
/// broken by lowest cost then mode id.
pub fn best_mode<'a>(edge: &CandidateLightpath, catalog: &'a Catalog) -> &'a TransponderMode {
    edge.feasible_modes
        .iter()
        .filter_map(|(id, _)| catalog.mode(id))
        .max_by(|a, b| {
            a.line_rate_gbps
                .partial_cmp(&b.line_rate_gbps)
                .unwrap()
                .then_with(|| b.cost_units.partial_cmp(&a.cost_units).unwrap())
                .then_with(|| b.id.cmp(&a.id))
        })
        .expect("feasible_modes non-empty")
}

pub fn design_virtual_topology(
    clp: &ClpGraph,
    demands: &[Demand],
    catalog: &Catalog,
) -> Vec<VirtualLink> {
    design_with_trace(clp, demands, catalog).0
}

/// Iterative threshold deletion to a fixpoint (or a single pass when
/// configured). Survivors become capacity-zero virtual links.
pub fn design_with_trace(
    clp: &ClpGraph,
    demands: &[Demand],
    catalog: &Catalog,
) -> (Vec<VirtualLink>, Vec<GroomingTraceRow>) {
    let params = &catalog.planner_params;
    let threshold = params.grooming_threshold;
    let mut surviving: Vec<CandidateLightpath> = clp.edges.clone();
    let mut trace = Vec::new();
    let mut round = 0u32;

    loop {
        round += 1;
        let (loads, _, protected_touched) =
            loads_and_protected(&surviving, demands, params.k_grooming, params.load_split);
        let clears: BTreeMap<&ClpId, bool> = surviving
            .iter()
            .map(|e| {
                let cap = best_mode(e, catalog).line_rate_gbps;
                let load = loads[&e.id];
                (&e.id, e.is_one_hop() || load + 1e-9 >= threshold * cap)
            })
            .collect();
        // A protection pair traversed by a protected demand survives or is
        // deleted as a unit: keeping one member keeps its partner.
        let keep: Vec<bool> = surviving
            .iter()
            .map(|e| {
                if clears[&e.id] {
                    return true;
                }
                match &e.partner_id {
                    Some(p)
                        if protected_touched.contains(&e.id) || protected_touched.contains(p) =>
                    {
                        clears.get(p).copied().unwrap_or(false)
                    }
                    _ => false,
                }
            })
            .collect();
        for (e, &kept) in surviving.iter().zip(&keep) {
            trace.push(GroomingTraceRow {
                round,
                clp_id: e.id.clone(),
                load_gbps: loads[&e.id],
                capacity_gbps: best_mode(e, catalog).line_rate_gbps,
                kept,
            });
        }
        let before = surviving.len();
        let mut it = keep.iter();
        surviving.retain(|_| *it.next().unwrap());
        if surviving.len() == before || params.single_pass {
            break;
        }
    }

    let links = surviving
        .iter()
        .map(|e| {
            let mode = best_mode(e, catalog);
            let protection_route = e
                .partner_id
                .as_ref()
                .and_then(|p| clp.edge(p))
                .map(|p| p.route.clone());
            VirtualLink {
                id: VirtualLinkId::new(format!("vl--{}", e.id)),
                clp_id: e.id.clone(),
                endpoints: e.endpoints.clone(),
                route: e.route.clone(),
                route_nodes: e.route_nodes.clone(),
                selected_mode: mode.id.clone(),
                line_rate_gbps: mode.line_rate_gbps,
                protection_route,
                lightpath_ids: Vec::new(),
                allocated_gbps: 0.0,
            }
        })
        .collect();
    (links, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clp::build_clp_graph;
    use crate::ingest::PlannerParams;
    use crate::model::{GridSpec, MarginStack, ModeId, NodeId, ProtectionClass, ServiceType};

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

    fn mode100() -> TransponderMode {
        TransponderMode {
            id: ModeId::from("100G"),
            line_rate_gbps: 100.0,
            modulation: "QPSK".into(),
            slot_width_ghz: 37.5,
            required_osnr_db: 12.0,
            max_reach_km: 2000.0,
            roadm_passthrough_penalty_db: 0.5,
            cost_units: 1.0,
            power_w: 50.0,
        }
    }

    fn catalog(threshold: f64, k_grooming: u32) -> Catalog {
        Catalog {
            modes: vec![mode100()],
            grid: GridSpec::flex(),
            margins: MarginStack::default(),
            cost_table: Default::default(),
            planner_params: PlannerParams {
                grooming_threshold: threshold,
                k_grooming,
                ..Default::default()
            },
            constants: Default::default(),
            slots_per_shelf: 12,
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

    fn demand(id: &str, src: &str, dst: &str, gbps: f64) -> Demand {
        Demand {
            id: DemandId::from(id),
            src: NodeId::from(src),
            dst: NodeId::from(dst),
            service_type: ServiceType::Ethernet,
            bitrate_gbps: Some(gbps),
            count: None,
            protection: ProtectionClass::Unprotected,
            explicit_route: None,
        }
    }

    #[test]
    fn single_path_load_accrues_fully() {
        let g = triangle();
        let c = catalog(0.5, 1);
        let clp = build_clp_graph(&g, &c);
        let demands = vec![demand("d1", "A", "C", 60.0)];
        let (loads, unroutable) = potential_loads(&clp.edges, &demands, 1, true);
        assert!(unroutable.is_empty());
        // the single grooming path is one CLP hop; the tie between the two
        // A-C candidates resolves to the first-sorted one (the 800 km bypass)
        let bypass = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("C"))
            .find(|e| e.route.len() == 2)
            .unwrap();
        let direct = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("C"))
            .find(|e| e.route == vec![LinkId::from("AC")])
            .unwrap();
        assert_eq!(loads[&bypass.id], 60.0);
        assert_eq!(loads[&direct.id], 0.0);
    }

    #[test]
    fn equal_split_across_two_grooming_paths() {
        let g = triangle();
        let c = catalog(0.5, 2);
        let clp = build_clp_graph(&g, &c);
        let demands = vec![demand("d1", "A", "C", 60.0)];
        let (loads, _) = potential_loads(&clp.edges, &demands, 2, true);
        // both 1-CLP-hop A-C candidates (bypass and direct fiber) are the
        // two shortest grooming paths; the demand splits equally
        let ac: Vec<_> = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("C"))
            .collect();
        assert_eq!(ac.len(), 2);
        assert_eq!(loads[&ac[0].id], 30.0);
        assert_eq!(loads[&ac[1].id], 30.0);
        let ab = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("B"))
            .find(|e| e.route == vec![LinkId::from("AB")])
            .unwrap();
        assert_eq!(loads[&ab.id], 0.0);
    }

    #[test]
    fn no_demands_means_zero_loads() {
        let g = triangle();
        let c = catalog(0.5, 2);
        let clp = build_clp_graph(&g, &c);
        let (loads, _) = potential_loads(&clp.edges, &[], 2, true);
        assert!(loads.values().all(|&v| v == 0.0));
    }

    #[test]
    fn bypass_link_selected_when_load_clears_threshold() {
        let g = triangle();
        let c = catalog(0.5, 1);
        let clp = build_clp_graph(&g, &c);
        let demands = vec![demand("d1", "A", "C", 60.0)];
        let vt = design_virtual_topology(&clp, &demands, &c);
        // the loaded A-B-C bypass survives (60 >= 50)
        assert!(vt
            .iter()
            .any(|v| v.route == vec![LinkId::from("AB"), LinkId::from("BC")]));
        // unloaded multi-hop candidates of the other pairs are deleted
        assert!(!vt
            .iter()
            .any(|v| v.route.len() == 2 && v.route != vec![LinkId::from("AB"), LinkId::from("BC")]));
        // one-hop fallbacks survive regardless of load
        for l in ["AB", "BC", "AC"] {
            assert!(vt.iter().any(|v| v.route == vec![LinkId::from(l)]));
        }
    }

    #[test]
    fn tiny_demands_leave_an_opaque_topology() {
        let g = triangle();
        let c = catalog(1.0, 2);
        let clp = build_clp_graph(&g, &c);
        let demands = vec![demand("d1", "A", "C", 1.0)];
        let vt = design_virtual_topology(&clp, &demands, &c);
        assert!(!vt.is_empty());
        assert!(vt.iter().all(|v| v.route.len() == 1));
    }

    #[test]
    fn termination_and_trace_rounds_are_bounded() {
        let g = triangle();
        let c = catalog(1.0, 2);
        let clp = build_clp_graph(&g, &c);
        let demands = vec![demand("d1", "A", "C", 10.0)];
        let (_, trace) = design_with_trace(&clp, &demands, &c);
        let max_round = trace.iter().map(|r| r.round).max().unwrap();
        assert!(max_round as usize <= clp.edges.len() + 1);
    }
}
