//! Demand routing over the designed virtual topology, capacity allocation
//! on grooming links, and lightpath installation (with spectrum assignment
//! and fiber overbuild) whenever a link runs out of installed capacity.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::clp::ClpGraph;
use crate::ingest::{Catalog, DemandOrder};
use crate::model::{
    Demand, DemandId, Lightpath, LightpathId, LinkId, NodeId, RestorationGap, RouteKind,
    UnservedDemand, UnservedReason, VirtualLink, VirtualLinkId,
};
use crate::spectrum::{SpectrumError, SpectrumState};

const CAP_EPS: f64 = 1e-9;

/// Result of routing the whole demand set.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationOutcome {
    pub virtual_links: Vec<VirtualLink>,
    pub lightpaths: Vec<Lightpath>,
    pub demand_routes: BTreeMap<DemandId, Vec<VirtualLinkId>>,
    pub unserved: Vec<UnservedDemand>,
    pub restoration_gaps: Vec<RestorationGap>,
}

/// Capacity bookkeeping per virtual link, split by protection class:
/// 1+1-protected demands ride only lightpaths installed with protection
/// spectrum; everything else rides plain lightpaths.
#[derive(Clone, Copy, Default)]
struct Pools {
    cap_plain: f64,
    alloc_plain: f64,
    cap_protected: f64,
    alloc_protected: f64,
}

impl Pools {
    fn residual(&self, protected: bool) -> f64 {
        if protected {
            self.cap_protected - self.alloc_protected
        } else {
            self.cap_plain - self.alloc_plain
        }
    }

    fn add_capacity(&mut self, protected: bool, gbps: f64) {
        if protected {
            self.cap_protected += gbps;
        } else {
            self.cap_plain += gbps;
        }
    }

    fn allocate(&mut self, protected: bool, gbps: f64) {
        if protected {
            self.alloc_protected += gbps;
        } else {
            self.alloc_plain += gbps;
        }
    }
}

/// Assigns spectrum on a route, overbuilding bottleneck links when allowed.
/// The route itself is never changed, only fiber instances are added.
pub fn assign_with_overbuild(
    state: &mut SpectrumState,
    route: &[LinkId],
    width: u32,
    catalog: &Catalog,
) -> Result<crate::model::SpectrumAssignment, SpectrumError> {
    let params = &catalog.planner_params;
    let mut overbuilt: BTreeSet<LinkId> = BTreeSet::new();
    loop {
        match state.assign(route, width, params.spectrum_policy) {
            Ok(a) => return Ok(a),
            Err(SpectrumError::NoCommonSpectrum { .. }) => {
                if !params.enable_overbuild {
                    return Err(SpectrumError::NoCommonSpectrum { width });
                }
                // Prefer a link with no free block anywhere; otherwise walk
                // the route so repeated misalignment cannot loop forever.
                let target = route
                    .iter()
                    .find(|l| state.is_exhausted_for(l, width) && !overbuilt.contains(l))
                    .or_else(|| route.iter().find(|l| !overbuilt.contains(l)));
                match target {
                    Some(l) => {
                        state.overbuild(l, true)?;
                        overbuilt.insert(l.clone());
                    }
                    None => return Err(SpectrumError::NoCommonSpectrum { width }),
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Installs one more lightpath on a grooming link, raising its capacity by
/// the selected mode's line rate. A protected install additionally takes
/// spectrum on the link's disjoint partner route (1+1).
pub fn install_lightpath(
    link: &mut VirtualLink,
    catalog: &Catalog,
    state: &mut SpectrumState,
    lp_seq: &mut u32,
    protected: bool,
) -> Result<Lightpath, SpectrumError> {
    let mode = catalog.mode(&link.selected_mode).expect("selected mode in catalog");
    let width = catalog.grid.width_units(mode.slot_width_ghz);
    let spectrum = assign_with_overbuild(state, &link.route, width, catalog)?;
    let protection_spectrum = match (protected, &link.protection_route) {
        (true, Some(route)) => match assign_with_overbuild(state, route, width, catalog) {
            Ok(p) => Some(p),
            Err(e) => {
                state.release(&spectrum);
                return Err(e);
            }
        },
        _ => None,
    };
    let id = LightpathId::new(format!("lp-{lp_seq}"));
    *lp_seq += 1;
    let lp = Lightpath {
        id: id.clone(),
        virtual_link_id: link.id.clone(),
        spectrum,
        protection_spectrum,
    };
    link.lightpath_ids.push(id);
    Ok(lp)
}

struct VtView<'a> {
    nodes: Vec<NodeId>,
    links: &'a [VirtualLink],
}

impl<'a> VtView<'a> {
    fn new(links: &'a [VirtualLink]) -> Self {
        let mut nodes: Vec<NodeId> = Vec::new();
        for l in links {
            for n in [&l.endpoints.0, &l.endpoints.1] {
                if !nodes.contains(n) {
                    nodes.push(n.clone());
                }
            }
        }
        nodes.sort();
        VtView { nodes, links }
    }

    /// Shortest path by (hop count, underlying fiber length), deterministic
    /// tie-breaking by node and link ids. `usable` filters links.
    fn shortest_path(
        &self,
        src: &NodeId,
        dst: &NodeId,
        graph_len: &impl Fn(&VirtualLink) -> f64,
        usable: &impl Fn(&VirtualLink) -> bool,
    ) -> Option<Vec<usize>> {
        let idx = |n: &NodeId| self.nodes.iter().position(|m| m == n);
        let (s, t) = (idx(src)?, idx(dst)?);
        let n = self.nodes.len();
        #[derive(Clone, Copy, PartialEq)]
        struct Dist(u32, f64);
        impl Dist {
            fn less(&self, other: &Dist) -> bool {
                self.0 < other.0 || (self.0 == other.0 && self.1 < other.1 - CAP_EPS)
            }
        }
        let mut dist = vec![Dist(u32::MAX, f64::INFINITY); n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n]; // (node, link idx)
        let mut done = vec![false; n];
        dist[s] = Dist(0, 0.0);
        loop {
            let mut u = None;
            for v in 0..n {
                if !done[v]
                    && dist[v].0 != u32::MAX
                    && u.map(|b: usize| dist[v].less(&dist[b])).unwrap_or(true)
                {
                    u = Some(v);
                }
            }
            let u = match u {
                Some(u) => u,
                None => break,
            };
            done[u] = true;
            if u == t {
                break;
            }
            for (li, l) in self.links.iter().enumerate() {
                if !usable(l) {
                    continue;
                }
                let v = if self.nodes[u] == l.endpoints.0 {
                    idx(&l.endpoints.1)
                } else if self.nodes[u] == l.endpoints.1 {
                    idx(&l.endpoints.0)
                } else {
                    None
                };
                let v = match v {
                    Some(v) => v,
                    None => continue,
                };
                if done[v] {
                    continue;
                }
                let nd = Dist(dist[u].0 + 1, dist[u].1 + graph_len(l));
                let better = nd.less(&dist[v])
                    || (nd == dist[v]
                        && parent[v]
                            .map(|(_, pl)| self.links[li].id < self.links[pl].id)
                            .unwrap_or(false));
                if better {
                    dist[v] = nd;
                    parent[v] = Some((u, li));
                }
            }
        }
        if dist[t].0 == u32::MAX {
            return None;
        }
        let mut seq = Vec::new();
        let mut cur = t;
        while cur != s {
            let (p, li) = parent[cur]?;
            seq.push(li);
            cur = p;
        }
        seq.reverse();
        Some(seq)
    }
}

fn order_demands(demands: &[Demand], order: DemandOrder) -> Vec<&Demand> {
    let mut out: Vec<&Demand> = demands.iter().collect();
    match order {
        DemandOrder::Input => {}
        DemandOrder::Desc => out.sort_by(|a, b| {
            b.effective_bitrate_gbps()
                .partial_cmp(&a.effective_bitrate_gbps())
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        }),
        DemandOrder::Asc => out.sort_by(|a, b| {
            a.effective_bitrate_gbps()
                .partial_cmp(&b.effective_bitrate_gbps())
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        }),
    }
    out
}

/// Maps an explicit node sequence to a virtual link sequence, preferring
/// the shortest (then lowest-id) parallel link per hop.
fn map_explicit_route(
    route: &[NodeId],
    links: &[VirtualLink],
    graph_len: &impl Fn(&VirtualLink) -> f64,
    protected: bool,
) -> Result<Vec<usize>, UnservedReason> {
    let mut seq = Vec::new();
    for pair in route.windows(2) {
        let candidates: Vec<usize> = links
            .iter()
            .enumerate()
            .filter(|(_, l)| {
                (l.endpoints.0 == pair[0] && l.endpoints.1 == pair[1])
                    || (l.endpoints.0 == pair[1] && l.endpoints.1 == pair[0])
            })
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            return Err(UnservedReason::ExplicitRouteUnmappable);
        }
        let usable: Vec<usize> = if protected {
            candidates
                .iter()
                .copied()
                .filter(|&i| links[i].protection_route.is_some())
                .collect()
        } else {
            candidates.clone()
        };
        if usable.is_empty() {
            return Err(UnservedReason::NoProtectedPath);
        }
        let best = usable
            .into_iter()
            .min_by(|&a, &b| {
                graph_len(&links[a])
                    .partial_cmp(&graph_len(&links[b]))
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| links[a].id.cmp(&links[b].id))
            })
            .unwrap();
        seq.push(best);
    }
    Ok(seq)
}

/// Routes all demands over the virtual topology in the configured order,
/// allocating capacity and installing lightpaths as needed.
pub fn route_demands(
    vt: Vec<VirtualLink>,
    demands: &[Demand],
    catalog: &Catalog,
    clp: &ClpGraph,
    graph: &crate::model::FiberGraph,
    state: &mut SpectrumState,
) -> AllocationOutcome {
    let mut links = vt;
    let mut pools: Vec<Pools> = vec![Pools::default(); links.len()];
    let mut lightpaths: Vec<Lightpath> = Vec::new();
    let mut demand_routes = BTreeMap::new();
    let mut unserved = Vec::new();
    let mut restoration_gaps = Vec::new();
    let mut lp_seq = 0u32;

    let graph_len = |l: &VirtualLink| -> f64 {
        l.route
            .iter()
            .map(|id| graph.link(id).map(|fl| fl.length_km).unwrap_or(0.0))
            .sum()
    };

    for demand in order_demands(demands, catalog.planner_params.demand_order) {
        let need = demand.effective_bitrate_gbps();
        let protected = demand.protection.wants_protection();

        let path: Result<Vec<usize>, UnservedReason> = if let Some(er) = &demand.explicit_route {
            map_explicit_route(er, &links, &graph_len, protected)
        } else {
            let view = VtView::new(&links);
            let usable_any = |_: &VirtualLink| true;
            let usable_protected = |l: &VirtualLink| l.protection_route.is_some();
            if protected {
                match view.shortest_path(&demand.src, &demand.dst, &graph_len, &usable_protected) {
                    Some(p) => Ok(p),
                    None => {
                        // distinguish "no path at all" from "no protected path"
                        if view
                            .shortest_path(&demand.src, &demand.dst, &graph_len, &usable_any)
                            .is_some()
                        {
                            Err(UnservedReason::NoProtectedPath)
                        } else {
                            Err(UnservedReason::NoVirtualPath)
                        }
                    }
                }
            } else {
                view.shortest_path(&demand.src, &demand.dst, &graph_len, &usable_any)
                    .ok_or(UnservedReason::NoVirtualPath)
            }
        };

        let path = match path {
            Ok(p) => p,
            Err(reason) => {
                unserved.push(UnservedDemand { demand_id: demand.id.clone(), reason });
                continue;
            }
        };

        // Allocate on every hop, installing lightpaths while short.
        let mut allocated_on: Vec<usize> = Vec::new();
        let mut failed = false;
        for &li in &path {
            while pools[li].residual(protected) + CAP_EPS < need {
                match install_lightpath(&mut links[li], catalog, state, &mut lp_seq, protected) {
                    Ok(lp) => {
                        pools[li].add_capacity(protected, links[li].line_rate_gbps);
                        lightpaths.push(lp);
                    }
                    Err(_) => {
                        failed = true;
                        break;
                    }
                }
            }
            if failed {
                break;
            }
            pools[li].allocate(protected, need);
            links[li].allocated_gbps += need;
            allocated_on.push(li);
        }
        if failed {
            for li in allocated_on {
                pools[li].allocate(protected, -need);
                links[li].allocated_gbps -= need;
            }
            unserved.push(UnservedDemand {
                demand_id: demand.id.clone(),
                reason: UnservedReason::SpectrumExhausted,
            });
            continue;
        }

        // Restoration coverage: every single-link failure on every
        // traversed virtual link needs a precomputed restoration candidate.
        if demand.protection.wants_restoration() {
            for &li in &path {
                let l = &links[li];
                for failed_link in &l.route {
                    let covered = clp
                        .edges_between(&l.endpoints.0, &l.endpoints.1)
                        .any(|e| {
                            e.kinds.contains(&RouteKind::Restoration(failed_link.clone()))
                        });
                    if !covered {
                        restoration_gaps.push(RestorationGap {
                            demand_id: demand.id.clone(),
                            virtual_link_id: l.id.clone(),
                            failed_link_id: failed_link.clone(),
                        });
                    }
                }
            }
        }

        demand_routes.insert(
            demand.id.clone(),
            path.iter().map(|&li| links[li].id.clone()).collect(),
        );
    }

    AllocationOutcome {
        virtual_links: links,
        lightpaths,
        demand_routes,
        unserved,
        restoration_gaps,
    }
}
