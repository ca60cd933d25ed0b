//! Candidate-lightpath auxiliary graph construction: route enumeration per
//! node pair, feasibility filtering, and deduplication with merged kind
//! tags.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::impairment::filter_modes;
use crate::ingest::Catalog;
use crate::model::{CandidateLightpath, ClpId, FiberGraph, NodeId, RouteKind};
use crate::paths::{
    k_shortest_paths, path_cmp, restoration_paths, shortest_disjoint_pair, FiberPath,
};

/// The auxiliary graph: parallel candidate edges per node pair, all
/// carrying at least one feasible transponder mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClpGraph {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<CandidateLightpath>,
    /// One line per node pair left without any feasible candidate.
    pub diagnostics: Vec<String>,
}

impl ClpGraph {
    pub fn edge(&self, id: &ClpId) -> Option<&CandidateLightpath> {
        self.edges.iter().find(|e| &e.id == id)
    }

    pub fn edges_between(
        &self,
        a: &NodeId,
        b: &NodeId,
    ) -> impl Iterator<Item = &CandidateLightpath> {
        let (a, b) = (a.clone(), b.clone());
        self.edges.iter().filter(move |e| {
            (e.endpoints.0 == a && e.endpoints.1 == b)
                || (e.endpoints.0 == b && e.endpoints.1 == a)
        })
    }
}

struct RawCandidate {
    path: FiberPath,
    kinds: BTreeSet<RouteKind>,
    partner: Option<usize>,
}

/// Enumerates routes for every unordered node pair (k-shortest, disjoint
/// protection pair, one-hop fallbacks, optional per-failure restoration
/// paths), filters them by optical feasibility and drops infeasible ones.
pub fn build_clp_graph(graph: &FiberGraph, catalog: &Catalog) -> ClpGraph {
    let params = &catalog.planner_params;
    let weight = params.admin_weight;

    let mut node_ids: Vec<NodeId> = graph.nodes.iter().map(|n| n.id.clone()).collect();
    node_ids.sort();

    let mut edges = Vec::new();
    let mut diagnostics = Vec::new();

    for (i, a) in node_ids.iter().enumerate() {
        for b in node_ids.iter().skip(i + 1) {
            let mut raw: Vec<RawCandidate> = Vec::new();
            let add = |raw: &mut Vec<RawCandidate>, path: FiberPath, kind: RouteKind| -> usize {
                if let Some(pos) = raw.iter().position(|r| r.path.links == path.links) {
                    raw[pos].kinds.insert(kind);
                    pos
                } else {
                    raw.push(RawCandidate {
                        path,
                        kinds: [kind].into_iter().collect(),
                        partner: None,
                    });
                    raw.len() - 1
                }
            };

            let ksp = k_shortest_paths(graph, a, b, params.k_paths, weight)
                .expect("valid endpoints");
            for (rank, p) in ksp.iter().enumerate() {
                add(&mut raw, p.clone(), RouteKind::KthShortest(rank as u32 + 1));
            }

            if let Some((p1, p2)) =
                shortest_disjoint_pair(graph, a, b, params.disjointness, weight)
                    .expect("valid endpoints")
            {
                let i1 = add(&mut raw, p1, RouteKind::DisjointProtectionPairMember);
                let i2 = add(&mut raw, p2, RouteKind::DisjointProtectionPairMember);
                if i1 != i2 {
                    raw[i1].partner = Some(i2);
                    raw[i2].partner = Some(i1);
                }
            }

            // One-hop fallback per direct fiber link, so grooming always
            // has an opaque route to fall back on.
            for link in graph.links.iter().filter(|l| l.touches(a) && l.touches(b)) {
                let path = FiberPath {
                    links: vec![link.id.clone()],
                    nodes: vec![a.clone(), b.clone()],
                    weight: match weight {
                        crate::ingest::AdminWeight::Hops => 1.0,
                        crate::ingest::AdminWeight::LengthKm => link.length_km,
                    },
                };
                add(&mut raw, path, RouteKind::OneHop);
            }

            if params.enable_restoration_precompute {
                for primary in &ksp {
                    for failed in &primary.links {
                        let rp = restoration_paths(graph, a, b, failed, 1, weight)
                            .expect("known link");
                        if let Some(p) = rp.into_iter().next() {
                            add(&mut raw, p, RouteKind::Restoration(failed.clone()));
                        }
                    }
                }
            }

            // Deterministic per-pair ordering, then the feasibility filter.
            let mut order: Vec<usize> = (0..raw.len()).collect();
            order.sort_by(|&x, &y| path_cmp(&raw[x].path, &raw[y].path));

            let mut assigned: Vec<Option<ClpId>> = vec![None; raw.len()];
            let mut pair_edges: Vec<(usize, CandidateLightpath)> = Vec::new();
            let mut next = 0usize;
            for &idx in &order {
                let cand = &raw[idx];
                let feasible_modes = filter_modes(&cand.path, graph, catalog);
                if feasible_modes.is_empty() {
                    continue;
                }
                let id = ClpId::new(format!("{a}--{b}--{next}"));
                next += 1;
                assigned[idx] = Some(id.clone());
                pair_edges.push((
                    idx,
                    CandidateLightpath {
                        id,
                        endpoints: (a.clone(), b.clone()),
                        route: cand.path.links.clone(),
                        route_nodes: cand.path.nodes.clone(),
                        kinds: cand.kinds.iter().cloned().collect(),
                        feasible_modes,
                        partner_id: None,
                    },
                ));
            }
            // Partner links only survive when both members survived.
            for (idx, edge) in &mut pair_edges {
                if let Some(p) = raw[*idx].partner {
                    edge.partner_id = assigned[p].clone();
                }
            }

            if pair_edges.is_empty() {
                diagnostics.push(format!("pair {a}–{b}: no feasible candidate lightpath"));
            }
            edges.extend(pair_edges.into_iter().map(|(_, e)| e));
        }
    }

    ClpGraph {
        nodes: graph.nodes.iter().map(|n| n.id.clone()).collect(),
        edges,
        diagnostics,
    }
}

/// Keeps exactly the edges that still carry at least one feasible mode.
/// Idempotent; partner references to dropped edges are cleared.
pub fn remove_infeasible(clp: &ClpGraph, _catalog: &Catalog) -> ClpGraph {
    let kept: Vec<CandidateLightpath> = clp
        .edges
        .iter()
        .filter(|e| !e.feasible_modes.is_empty())
        .cloned()
        .collect();
    let surviving: BTreeSet<&ClpId> = kept.iter().map(|e| &e.id).collect();
    let edges = kept
        .iter()
        .map(|e| {
            let mut e = e.clone();
            if let Some(p) = &e.partner_id {
                if !surviving.contains(p) {
                    e.partner_id = None;
                }
            }
            e
        })
        .collect();
    ClpGraph {
        nodes: clp.nodes.clone(),
        edges,
        diagnostics: clp.diagnostics.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::PlannerParams;
    use crate::model::{
        FiberLink, GridSpec, LinkId, MarginStack, ModeId, NodeSite, RoadmClass, Span,
        TransponderMode,
    };

    fn node(id: &str) -> NodeSite {
        NodeSite {
            id: NodeId::from(id),
            name: id.to_owned(),
            roadm_class: RoadmClass::Fixed,
        }
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

    fn mode(id: &str, rate: f64, reach: f64) -> TransponderMode {
        TransponderMode {
            id: ModeId::from(id),
            line_rate_gbps: rate,
            modulation: "QPSK".into(),
            slot_width_ghz: 37.5,
            required_osnr_db: 12.0,
            max_reach_km: reach,
            roadm_passthrough_penalty_db: 0.5,
            cost_units: 1.0,
            power_w: 50.0,
        }
    }

    fn catalog(modes: Vec<TransponderMode>, k_paths: u32) -> Catalog {
        Catalog {
            modes,
            grid: GridSpec::flex(),
            margins: MarginStack::default(),
            cost_table: Default::default(),
            planner_params: PlannerParams { k_paths, ..Default::default() },
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

    #[test]
    fn triangle_all_feasible_builds_pairs_with_disjoint_tags() {
        let g = triangle();
        let c = catalog(vec![mode("100G", 100.0, 2000.0)], 2);
        let clp = build_clp_graph(&g, &c);
        assert!(clp.diagnostics.is_empty());

        let ac: Vec<_> = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("C"))
            .collect();
        assert_eq!(ac.len(), 2);
        // sorted: A-B-C (800) before A-C (900)
        assert_eq!(ac[0].route, vec![LinkId::from("AB"), LinkId::from("BC")]);
        assert!(ac[0].kinds.contains(&RouteKind::KthShortest(1)));
        assert!(ac[0].kinds.contains(&RouteKind::DisjointProtectionPairMember));
        assert_eq!(ac[1].route, vec![LinkId::from("AC")]);
        assert!(ac[1].kinds.contains(&RouteKind::KthShortest(2)));
        assert!(ac[1].kinds.contains(&RouteKind::OneHop));
        // partners reference each other
        assert_eq!(ac[0].partner_id.as_ref(), Some(&ac[1].id));
        assert_eq!(ac[1].partner_id.as_ref(), Some(&ac[0].id));
    }

    #[test]
    fn infeasible_long_route_is_dropped_and_pair_loses_partner() {
        let g = triangle();
        // reach 850: the 900 km direct A-C route is infeasible
        let c = catalog(vec![mode("100G", 100.0, 850.0)], 2);
        let clp = build_clp_graph(&g, &c);
        let ac: Vec<_> = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("C"))
            .collect();
        assert_eq!(ac.len(), 1);
        assert_eq!(ac[0].route, vec![LinkId::from("AB"), LinkId::from("BC")]);
        assert_eq!(ac[0].partner_id, None);
    }

    #[test]
    fn two_node_graph_has_single_one_hop_candidate() {
        let g = FiberGraph::new(
            vec![node("A"), node("B")],
            vec![link("AB", "A", "B", 100.0)],
        );
        let c = catalog(vec![mode("100G", 100.0, 2000.0)], 3);
        let clp = build_clp_graph(&g, &c);
        assert_eq!(clp.edges.len(), 1);
        assert!(clp.edges[0].kinds.contains(&RouteKind::KthShortest(1)));
        assert!(clp.edges[0].kinds.contains(&RouteKind::OneHop));
    }

    #[test]
    fn restoration_candidates_carry_the_failed_link() {
        let g = triangle();
        let mut c = catalog(vec![mode("100G", 100.0, 2000.0)], 1);
        c.planner_params.enable_restoration_precompute = true;
        let clp = build_clp_graph(&g, &c);
        let ab: Vec<_> = clp
            .edges_between(&NodeId::from("A"), &NodeId::from("B"))
            .collect();
        // shortest A-B plus the A-C-B restoration route for failure of AB
        assert_eq!(ab.len(), 2);
        assert!(ab
            .iter()
            .any(|e| e.kinds.contains(&RouteKind::Restoration(LinkId::from("AB")))));
    }

    #[test]
    fn remove_infeasible_is_idempotent() {
        let g = triangle();
        let c = catalog(vec![mode("100G", 100.0, 2000.0)], 2);
        let clp = build_clp_graph(&g, &c);
        let once = remove_infeasible(&clp, &c);
        let twice = remove_infeasible(&once, &c);
        assert_eq!(once, clp); // build already filtered
        assert_eq!(twice, once);
    }

    #[test]
    fn pair_without_candidates_is_reported() {
        let g = triangle();
        // nothing reaches anywhere
        let c = catalog(vec![mode("100G", 100.0, 10.0)], 2);
        let clp = build_clp_graph(&g, &c);
        assert!(clp.edges.is_empty());
        assert_eq!(clp.diagnostics.len(), 3);
        assert!(clp.diagnostics[0].contains("no feasible candidate lightpath"));
    }
}
