//! Pure graph algorithms over the fiber layer: k-shortest simple paths,
//! shortest disjoint path pairs and per-failure recomputation.
//!
//! All outputs are deterministic: equal-weight paths are ordered by the
//! lexicographic node-id sequence, then by the link-id sequence (relevant
//! with parallel fiber links).

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AdminWeight, Disjointness};
use crate::model::{FiberGraph, LinkId, NodeId};

/// A simple path through the fiber graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberPath {
    pub links: Vec<LinkId>,
    pub nodes: Vec<NodeId>,
    pub weight: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("source and destination are the same node: {0}")]
    SameEndpoints(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
}

/// Total order on paths: weight, then node sequence, then link sequence.
pub fn path_cmp(a: &FiberPath, b: &FiberPath) -> Ordering {
    a.weight
        .partial_cmp(&b.weight)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.nodes.cmp(&b.nodes))
        .then_with(|| a.links.cmp(&b.links))
}

/// Internal indexed view of the fiber graph.
struct Adj {
    node_ids: Vec<NodeId>,
    // one entry per fiber link: (a, b, weight, link id)
    edges: Vec<(usize, usize, f64, LinkId)>,
    incident: Vec<Vec<usize>>,
}

impl Adj {
    fn build(g: &FiberGraph, weight: AdminWeight) -> Adj {
        let node_ids: Vec<NodeId> = g.nodes.iter().map(|n| n.id.clone()).collect();
        let index = |id: &NodeId| node_ids.iter().position(|n| n == id).unwrap();
        let mut edges = Vec::with_capacity(g.links.len());
        let mut incident = vec![Vec::new(); node_ids.len()];
        for l in &g.links {
            let a = index(&l.a);
            let b = index(&l.b);
            let w = match weight {
                AdminWeight::Hops => 1.0,
                AdminWeight::LengthKm => l.length_km,
            };
            let e = edges.len();
            edges.push((a, b, w, l.id.clone()));
            incident[a].push(e);
            incident[b].push(e);
        }
        Adj {
            node_ids,
            edges,
            incident,
        }
    }

    fn node_index(&self, id: &NodeId) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    fn other(&self, edge: usize, from: usize) -> usize {
        let (a, b, _, _) = self.edges[edge];
        if a == from {
            b
        } else {
            a
        }
    }

    fn to_fiber_path(&self, edge_seq: &[usize], start: usize) -> FiberPath {
        let mut nodes = vec![self.node_ids[start].clone()];
        let mut links = Vec::with_capacity(edge_seq.len());
        let mut cur = start;
        let mut weight = 0.0;
        for &e in edge_seq {
            let next = self.other(e, cur);
            weight += self.edges[e].2;
            links.push(self.edges[e].3.clone());
            nodes.push(self.node_ids[next].clone());
            cur = next;
        }
        FiberPath { links, nodes, weight }
    }
}

#[derive(PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: min-heap on (dist, node)
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the undirected multigraph with edges/nodes masked out.
/// Returns the edge sequence of one shortest path, or `None`.
fn shortest_path(
    adj: &Adj,
    src: usize,
    dst: usize,
    banned_edges: &BTreeSet<usize>,
    banned_nodes: &BTreeSet<usize>,
) -> Option<Vec<usize>> {
    let n = adj.node_ids.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent_edge: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapEntry(0.0, src));
    while let Some(HeapEntry(d, u)) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        if u == dst {
            break;
        }
        for &e in &adj.incident[u] {
            if banned_edges.contains(&e) {
                continue;
            }
            let v = adj.other(e, u);
            if banned_nodes.contains(&v) || done[v] {
                continue;
            }
            let nd = d + adj.edges[e].2;
            if nd < dist[v] {
                dist[v] = nd;
                parent_edge[v] = Some(e);
                heap.push(HeapEntry(nd, v));
            }
        }
    }
    if !dist[dst].is_finite() {
        return None;
    }
    let mut seq = Vec::new();
    let mut cur = dst;
    while cur != src {
        let e = parent_edge[cur]?;
        seq.push(e);
        cur = adj.other(e, cur);
    }
    seq.reverse();
    Some(seq)
}

fn nodes_of(adj: &Adj, edge_seq: &[usize], start: usize) -> Vec<usize> {
    let mut nodes = vec![start];
    let mut cur = start;
    for &e in edge_seq {
        cur = adj.other(e, cur);
        nodes.push(cur);
    }
    nodes
}

/// Yen's algorithm, extended to pull in the entire final weight-tie class so
/// the returned order matches the (weight, node-seq, link-seq) total order
/// exactly.
fn yen(
    adj: &Adj,
    src: usize,
    dst: usize,
    k: usize,
    extra_banned: &BTreeSet<usize>,
) -> Vec<FiberPath> {
    let first = match shortest_path(adj, src, dst, extra_banned, &BTreeSet::new()) {
        Some(p) => p,
        None => return Vec::new(),
    };
    let mut accepted: Vec<Vec<usize>> = vec![first];
    let mut candidates: Vec<Vec<usize>> = Vec::new();

    let path_weight =
        |seq: &[usize]| -> f64 { seq.iter().fold(0.0, |acc, &e| acc + adj.edges[e].2) };
    let kth_weight = |acc: &[Vec<usize>]| -> f64 {
        let mut ws: Vec<f64> = acc.iter().map(|p| path_weight(p)).collect();
        ws.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        ws[k.min(ws.len()) - 1]
    };

    loop {
        let prev = accepted.last().unwrap().clone();
        let prev_nodes = nodes_of(adj, &prev, src);
        for i in 0..prev.len() {
            let spur_node = prev_nodes[i];
            let root = &prev[..i];
            let mut banned_edges = extra_banned.clone();
            for p in &accepted {
                if p.len() > i && p[..i] == *root {
                    banned_edges.insert(p[i]);
                }
            }
            let banned_nodes: BTreeSet<usize> = prev_nodes[..i].iter().copied().collect();
            if let Some(spur) = shortest_path(adj, spur_node, dst, &banned_edges, &banned_nodes) {
                let mut total = root.to_vec();
                total.extend(spur);
                if !accepted.contains(&total) && !candidates.contains(&total) {
                    candidates.push(total);
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        // pop the minimal candidate by weight (ties by node/link sequence)
        let min_idx = (0..candidates.len())
            .min_by(|&a, &b| {
                let pa = adj.to_fiber_path(&candidates[a], src);
                let pb = adj.to_fiber_path(&candidates[b], src);
                path_cmp(&pa, &pb)
            })
            .unwrap();
        let next = candidates.swap_remove(min_idx);
        let next_w = path_weight(&next);
        if accepted.len() >= k && next_w > kth_weight(&accepted) {
            break;
        }
        accepted.push(next);
    }

    let mut paths: Vec<FiberPath> = accepted
        .iter()
        .map(|seq| adj.to_fiber_path(seq, src))
        .collect();
    paths.sort_by(path_cmp);
    paths.truncate(k);
    paths
}

fn endpoints(
    adj: &Adj,
    src: &NodeId,
    dst: &NodeId,
) -> Result<(usize, usize), PathError> {
    if src == dst {
        return Err(PathError::SameEndpoints(src.clone()));
    }
    let s = adj
        .node_index(src)
        .ok_or_else(|| PathError::UnknownNode(src.clone()))?;
    let t = adj
        .node_index(dst)
        .ok_or_else(|| PathError::UnknownNode(dst.clone()))?;
    Ok((s, t))
}

/// The k lightest simple paths between two nodes, sorted ascending.
/// Returns fewer than k (possibly zero) when the graph runs out of paths.
pub fn k_shortest_paths(
    graph: &FiberGraph,
    src: &NodeId,
    dst: &NodeId,
    k: u32,
    weight: AdminWeight,
) -> Result<Vec<FiberPath>, PathError> {
    let adj = Adj::build(graph, weight);
    let (s, t) = endpoints(&adj, src, dst)?;
    Ok(yen(&adj, s, t, k as usize, &BTreeSet::new()))
}

/// k-shortest paths on the graph with one fiber link failed.
pub fn restoration_paths(
    graph: &FiberGraph,
    src: &NodeId,
    dst: &NodeId,
    failed_link: &LinkId,
    k: u32,
    weight: AdminWeight,
) -> Result<Vec<FiberPath>, PathError> {
    let adj = Adj::build(graph, weight);
    let (s, t) = endpoints(&adj, src, dst)?;
    let failed = adj
        .edges
        .iter()
        .position(|(_, _, _, id)| id == failed_link)
        .ok_or_else(|| PathError::UnknownLink(failed_link.clone()))?;
    let banned: BTreeSet<usize> = [failed].into_iter().collect();
    Ok(yen(&adj, s, t, k as usize, &banned))
}

// Directed residual graph used by the disjoint-pair computation.
struct Arc {
    from: usize,
    to: usize,
    weight: f64,
    // Some(edge index) for fiber arcs, None for node-split arcs.
    link: Option<usize>,
}

/// Minimum-total-weight pair of link- or node-disjoint paths
/// (Bhandari's algorithm: shortest path, then a second pass over the
/// residual graph with negated path arcs, then overlap cancellation).
pub fn shortest_disjoint_pair(
    graph: &FiberGraph,
    src: &NodeId,
    dst: &NodeId,
    disjointness: Disjointness,
    weight: AdminWeight,
) -> Result<Option<(FiberPath, FiberPath)>, PathError> {
    let adj = Adj::build(graph, weight);
    let (s, t) = endpoints(&adj, src, dst)?;

    // Build the directed working graph; under node disjointness every node
    // is split into in/out halves joined by a zero-weight arc.
    let (arcs, start, goal, n_vertices) = match disjointness {
        Disjointness::Link => {
            let mut arcs = Vec::new();
            for (e, (a, b, w, _)) in adj.edges.iter().enumerate() {
                arcs.push(Arc { from: *a, to: *b, weight: *w, link: Some(e) });
                arcs.push(Arc { from: *b, to: *a, weight: *w, link: Some(e) });
            }
            (arcs, s, t, adj.node_ids.len())
        }
        Disjointness::Node => {
            // vertex 2v = v_in, 2v+1 = v_out
            let mut arcs = Vec::new();
            for v in 0..adj.node_ids.len() {
                arcs.push(Arc { from: 2 * v, to: 2 * v + 1, weight: 0.0, link: None });
            }
            for (e, (a, b, w, _)) in adj.edges.iter().enumerate() {
                arcs.push(Arc { from: 2 * a + 1, to: 2 * b, weight: *w, link: Some(e) });
                arcs.push(Arc { from: 2 * b + 1, to: 2 * a, weight: *w, link: Some(e) });
            }
            (arcs, 2 * s + 1, 2 * t, 2 * adj.node_ids.len())
        }
    };

    let sp = |removed: &BTreeSet<usize>, extra: &[Arc]| -> Option<Vec<usize>> {
        // Bellman-Ford: the residual graph carries negative arcs. `extra`
        // arcs get indices past the base arc list.
        let all: Vec<&Arc> = arcs.iter().chain(extra.iter()).collect();
        let mut dist = vec![f64::INFINITY; n_vertices];
        let mut parent: Vec<Option<usize>> = vec![None; n_vertices];
        dist[start] = 0.0;
        for _ in 0..n_vertices {
            let mut changed = false;
            for (i, arc) in all.iter().enumerate() {
                if removed.contains(&i) || !dist[arc.from].is_finite() {
                    continue;
                }
                let nd = dist[arc.from] + arc.weight;
                if nd < dist[arc.to] - 1e-12 {
                    dist[arc.to] = nd;
                    parent[arc.to] = Some(i);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[goal].is_finite() {
            return None;
        }
        let mut seq = Vec::new();
        let mut cur = goal;
        while cur != start {
            let i = parent[cur]?;
            seq.push(i);
            cur = all[i].from;
        }
        seq.reverse();
        Some(seq)
    };

    let p1 = match sp(&BTreeSet::new(), &[]) {
        Some(p) => p,
        None => return Ok(None),
    };

    // Residual: drop both directions of every P1 fiber arc (and the split
    // arc under node disjointness); add the reversed arcs with negative
    // weight.
    let mut removed = BTreeSet::new();
    let mut extra = Vec::new();
    for &i in &p1 {
        let arc = &arcs[i];
        removed.insert(i);
        if let Some(link) = arc.link {
            // the opposite direction of the same fiber link
            for (j, other) in arcs.iter().enumerate() {
                if other.link == Some(link) && j != i {
                    removed.insert(j);
                }
            }
        }
        extra.push(Arc {
            from: arc.to,
            to: arc.from,
            weight: -arc.weight,
            link: arc.link,
        });
    }

    let p2 = match sp(&removed, &extra) {
        Some(p) => p,
        None => return Ok(None),
    };

    // Overlap cancellation on fiber links: a link traversed forward by P1
    // and backward by P2 drops out of both. Arc directions are kept so the
    // recombination walk below cannot mis-pair segments at shared nodes.
    let to_orig = |v: usize| match disjointness {
        Disjointness::Link => v,
        Disjointness::Node => v / 2,
    };
    let mut p1_arcs: Vec<(usize, usize, usize)> = p1
        .iter()
        .filter_map(|&i| {
            arcs[i]
                .link
                .map(|l| (to_orig(arcs[i].from), to_orig(arcs[i].to), l))
        })
        .collect();
    let mut p2_arcs: Vec<(usize, usize, usize)> = Vec::new();
    for &i in &p2 {
        let arc = if i < arcs.len() { &arcs[i] } else { &extra[i - arcs.len()] };
        if let Some(link) = arc.link {
            if i >= arcs.len() {
                // reverse arc: cancels one use of the link in P1
                if let Some(pos) = p1_arcs.iter().position(|&(_, _, l)| l == link) {
                    p1_arcs.remove(pos);
                    continue;
                }
            }
            p2_arcs.push((to_orig(arc.from), to_orig(arc.to), link));
        }
    }

    // The surviving directed arcs form two disjoint s->t paths (the union
    // is acyclic by flow optimality). Walk from the source twice, taking
    // the out-arc toward the smaller (node id, link id) continuation.
    let mut pool: Vec<(usize, usize, usize)> = p1_arcs.into_iter().chain(p2_arcs).collect();
    let mut result = Vec::new();
    for _ in 0..2 {
        let mut cur = s;
        let mut seq = Vec::new();
        while cur != t {
            let mut best: Option<usize> = None; // pool position
            for (pos, &(from, to, e)) in pool.iter().enumerate() {
                if from != cur {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some(bpos) => {
                        let (_, bto, be) = pool[bpos];
                        (&adj.node_ids[to], &adj.edges[e].3)
                            < (&adj.node_ids[bto], &adj.edges[be].3)
                    }
                };
                if better {
                    best = Some(pos);
                }
            }
            match best {
                Some(pos) => {
                    let (_, to, e) = pool.remove(pos);
                    seq.push(e);
                    cur = to;
                }
                None => return Ok(None), // degenerate; should not happen
            }
        }
        result.push(adj.to_fiber_path(&seq, s));
    }

    result.sort_by(path_cmp);
    let mut it = result.into_iter();
    Ok(Some((it.next().unwrap(), it.next().unwrap())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FiberLink, NodeSite, RoadmClass, Span};

    fn node(id: &str) -> NodeSite {
        NodeSite {
            id: NodeId::from(id),
            name: id.to_owned(),
            roadm_class: RoadmClass::Fixed,
        }
    }

    fn link(id: &str, a: &str, b: &str, len: f64) -> FiberLink {
        FiberLink {
            id: LinkId::from(id),
            a: NodeId::from(a),
            b: NodeId::from(b),
            length_km: len,
            spans: vec![Span { length_km: len, loss_db: 0.25 * len }],
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

    fn node_seq(p: &FiberPath) -> Vec<&str> {
        p.nodes.iter().map(|n| n.as_str()).collect()
    }

    #[test]
    fn triangle_two_shortest() {
        let g = triangle();
        let ps =
            k_shortest_paths(&g, &NodeId::from("A"), &NodeId::from("C"), 2, AdminWeight::LengthKm)
                .unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(node_seq(&ps[0]), ["A", "B", "C"]);
        assert_eq!(ps[0].weight, 800.0);
        assert_eq!(node_seq(&ps[1]), ["A", "C"]);
        assert_eq!(ps[1].weight, 900.0);
    }

    #[test]
    fn k_larger_than_path_count_returns_all() {
        let g = triangle();
        let ps =
            k_shortest_paths(&g, &NodeId::from("A"), &NodeId::from("C"), 5, AdminWeight::LengthKm)
                .unwrap();
        assert_eq!(ps.len(), 2);
    }

    #[test]
    fn same_endpoints_rejected() {
        let g = triangle();
        let err = k_shortest_paths(&g, &NodeId::from("A"), &NodeId::from("A"), 1, AdminWeight::Hops)
            .unwrap_err();
        assert_eq!(err, PathError::SameEndpoints(NodeId::from("A")));
    }

    #[test]
    fn disconnected_pair_yields_empty() {
        let g = FiberGraph::new(
            vec![node("A"), node("B"), node("C"), node("D")],
            vec![link("AB", "A", "B", 100.0), link("CD", "C", "D", 100.0)],
        );
        let ps =
            k_shortest_paths(&g, &NodeId::from("A"), &NodeId::from("C"), 3, AdminWeight::Hops)
                .unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn triangle_disjoint_pair() {
        let g = triangle();
        let (p1, p2) = shortest_disjoint_pair(
            &g,
            &NodeId::from("A"),
            &NodeId::from("C"),
            Disjointness::Link,
            AdminWeight::LengthKm,
        )
        .unwrap()
        .unwrap();
        assert_eq!(p1.weight + p2.weight, 1700.0);
        assert_eq!(node_seq(&p1), ["A", "B", "C"]);
        assert_eq!(node_seq(&p2), ["A", "C"]);
    }

    #[test]
    fn path_graph_has_no_disjoint_pair() {
        let g = FiberGraph::new(
            vec![node("A"), node("B"), node("C")],
            vec![link("AB", "A", "B", 100.0), link("BC", "B", "C", 100.0)],
        );
        let r = shortest_disjoint_pair(
            &g,
            &NodeId::from("A"),
            &NodeId::from("C"),
            Disjointness::Link,
            AdminWeight::LengthKm,
        )
        .unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn ring_node_disjoint_pair() {
        let g = FiberGraph::new(
            vec![node("A"), node("B"), node("C"), node("D")],
            vec![
                link("AB", "A", "B", 100.0),
                link("BC", "B", "C", 100.0),
                link("CD", "C", "D", 100.0),
                link("DA", "D", "A", 100.0),
            ],
        );
        let (p1, p2) = shortest_disjoint_pair(
            &g,
            &NodeId::from("A"),
            &NodeId::from("C"),
            Disjointness::Node,
            AdminWeight::LengthKm,
        )
        .unwrap()
        .unwrap();
        assert_eq!(node_seq(&p1), ["A", "B", "C"]);
        assert_eq!(node_seq(&p2), ["A", "D", "C"]);
    }

    #[test]
    fn trap_topology_needs_the_rerouted_first_path() {
        // Classic Bhandari trap: the shortest path blocks every disjoint
        // mate unless its middle edge is given back.
        let g = FiberGraph::new(
            vec![node("A"), node("B"), node("C"), node("D")],
            vec![
                link("AB", "A", "B", 1.0),
                link("BC", "B", "C", 1.0),
                link("AC", "A", "C", 4.0),
                link("BD", "B", "D", 4.0),
                link("CD", "C", "D", 1.0),
            ],
        );
        // shortest A->D is A-B-C-D (3); disjoint optimum is {A-B-D, A-C-D}.
        let (p1, p2) = shortest_disjoint_pair(
            &g,
            &NodeId::from("A"),
            &NodeId::from("D"),
            Disjointness::Link,
            AdminWeight::LengthKm,
        )
        .unwrap()
        .unwrap();
        assert_eq!(p1.weight + p2.weight, 10.0);
        let all: BTreeSet<&str> =
            p1.links.iter().chain(p2.links.iter()).map(|l| l.as_str()).collect();
        assert_eq!(all, ["AB", "AC", "BD", "CD"].into_iter().collect());
    }

    #[test]
    fn restoration_removes_the_failed_link() {
        let g = triangle();
        let ps = restoration_paths(
            &g,
            &NodeId::from("A"),
            &NodeId::from("C"),
            &LinkId::from("AC"),
            1,
            AdminWeight::LengthKm,
        )
        .unwrap();
        assert_eq!(ps.len(), 1);
        assert_eq!(node_seq(&ps[0]), ["A", "B", "C"]);
    }

    #[test]
    fn restoration_on_cut_link_disconnects() {
        let g = FiberGraph::new(
            vec![node("A"), node("B"), node("C")],
            vec![link("AB", "A", "B", 100.0), link("BC", "B", "C", 100.0)],
        );
        let ps = restoration_paths(
            &g,
            &NodeId::from("A"),
            &NodeId::from("C"),
            &LinkId::from("BC"),
            2,
            AdminWeight::Hops,
        )
        .unwrap();
        assert!(ps.is_empty());
    }

    #[test]
    fn restoration_unknown_link_errors() {
        let g = triangle();
        let err = restoration_paths(
            &g,
            &NodeId::from("A"),
            &NodeId::from("C"),
            &LinkId::from("XX"),
            1,
            AdminWeight::Hops,
        )
        .unwrap_err();
        assert_eq!(err, PathError::UnknownLink(LinkId::from("XX")));
    }
}
