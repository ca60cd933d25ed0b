//! Input parsing: topology, demand matrix and equipment catalog documents.
//!
//! All three inputs are JSON documents; schemas mirror the structures below.
//! Loading is deterministic and order preserving.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_topology, Demand, FiberGraph, FiberLink, GridSpec, LinkId, MarginStack, NodeId,
    NodeSite, RoadmClass, Span, TransponderMode,
};

/// Default amplifier spacing used when a link file omits spans.
const DEFAULT_SPAN_KM: f64 = 80.0;
/// Default fiber attenuation incl. connectors, dB per km.
const DEFAULT_LOSS_DB_PER_KM: f64 = 0.25;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
    #[error("validation error in {path}: {message}")]
    Validation { path: String, message: String },
}

impl IngestError {
    fn validation(path: &Path, message: impl Into<String>) -> Self {
        IngestError::Validation {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disjointness {
    Link,
    Node,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdminWeight {
    Hops,
    LengthKm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumPolicy {
    FirstFit,
    ExactFit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandOrder {
    Desc,
    Asc,
    Input,
}

/// Tunables of the planning heuristics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub k_paths: u32,
    pub k_grooming: u32,
    pub grooming_threshold: f64,
    pub disjointness: Disjointness,
    pub enable_restoration_precompute: bool,
    pub admin_weight: AdminWeight,
    pub spectrum_policy: SpectrumPolicy,
    pub demand_order: DemandOrder,
    pub single_pass: bool,
    pub load_split: bool,
    pub enable_overbuild: bool,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            k_paths: 3,
            k_grooming: 2,
            grooming_threshold: 0.5,
            disjointness: Disjointness::Link,
            enable_restoration_precompute: false,
            admin_weight: AdminWeight::LengthKm,
            spectrum_policy: SpectrumPolicy::FirstFit,
            demand_order: DemandOrder::Desc,
            single_pass: false,
            load_split: true,
            enable_overbuild: true,
        }
    }
}

/// Cost and power of one equipment kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostEntry {
    #[serde(default)]
    pub cost_units: f64,
    #[serde(default)]
    pub power_w: f64,
}

/// Link-budget constants, overridable per catalog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpairmentConstants {
    /// OSNR of a zero-loss span at the reference bandwidth (0 dBm launch,
    /// 0.1 nm).
    pub osnr_reference_db: f64,
    /// Amplifier noise figure in dB.
    pub noise_figure_db: f64,
}

impl Default for ImpairmentConstants {
    fn default() -> Self {
        ImpairmentConstants {
            osnr_reference_db: 58.0,
            noise_figure_db: 6.0,
        }
    }
}

/// The equipment catalog: transponder modes, grid, margins, prices and
/// planner parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub modes: Vec<TransponderMode>,
    pub grid: GridSpec,
    #[serde(default)]
    pub margins: MarginStack,
    #[serde(default)]
    pub cost_table: BTreeMap<String, CostEntry>,
    #[serde(default)]
    pub planner_params: PlannerParams,
    #[serde(default)]
    pub constants: ImpairmentConstants,
    #[serde(default = "Catalog::default_slots_per_shelf")]
    pub slots_per_shelf: u32,
}

impl Catalog {
    fn default_slots_per_shelf() -> u32 {
        12
    }

    pub fn mode(&self, id: &crate::model::ModeId) -> Option<&TransponderMode> {
        self.modes.iter().find(|m| &m.id == id)
    }

    pub fn cost_entry(&self, kind: &str) -> CostEntry {
        self.cost_table.get(kind).copied().unwrap_or_default()
    }

    /// Cost kind name for a ROADM degree of the given node class.
    pub fn roadm_degree_kind(class: RoadmClass) -> String {
        format!("roadm_degree_{}", class.as_str())
    }
}

// Raw document shapes; converted to model types with validation.

#[derive(Deserialize)]
struct TopologyDoc {
    nodes: Vec<NodeDoc>,
    links: Vec<LinkDoc>,
}

#[derive(Deserialize)]
struct NodeDoc {
    id: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    roadm_class: Option<RoadmClass>,
}

#[derive(Deserialize)]
struct LinkDoc {
    id: String,
    a: String,
    b: String,
    length_km: f64,
    #[serde(default)]
    spans: Option<Vec<Span>>,
    #[serde(default)]
    fiber_count: Option<u32>,
}

#[derive(Deserialize)]
struct DemandsDoc {
    demands: Vec<Demand>,
}

fn read_to_string(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, IngestError> {
    serde_json::from_str(text).map_err(|e| IngestError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Equal spans of at most 80 km, 0.25 dB/km loss.
fn auto_spans(length_km: f64) -> Vec<Span> {
    let n = (length_km / DEFAULT_SPAN_KM).ceil().max(1.0) as usize;
    let per = length_km / n as f64;
    (0..n)
        .map(|_| Span {
            length_km: per,
            loss_db: DEFAULT_LOSS_DB_PER_KM * per,
        })
        .collect()
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<FiberGraph, IngestError> {
    let path = path.as_ref();
    let doc: TopologyDoc = parse_json(path, &read_to_string(path)?)?;

    let nodes = doc
        .nodes
        .into_iter()
        .map(|n| NodeSite {
            name: n.name.unwrap_or_else(|| n.id.clone()),
            id: NodeId::new(n.id),
            roadm_class: n.roadm_class.unwrap_or(RoadmClass::Fixed),
        })
        .collect();
    let links = doc
        .links
        .into_iter()
        .map(|l| {
            let spans = match l.spans {
                Some(spans) if !spans.is_empty() => spans,
                _ => auto_spans(l.length_km),
            };
            FiberLink {
                id: LinkId::new(l.id),
                a: NodeId::new(l.a),
                b: NodeId::new(l.b),
                length_km: l.length_km,
                spans,
                fiber_count: l.fiber_count.unwrap_or(1).max(1),
            }
        })
        .collect();

    let graph = FiberGraph::new(nodes, links);
    let diags = validate_topology(&graph);
    if !diags.is_empty() {
        let listing: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        return Err(IngestError::validation(path, listing.join("; ")));
    }
    Ok(graph)
}

pub fn load_demands(
    path: impl AsRef<Path>,
    topology: &FiberGraph,
) -> Result<Vec<Demand>, IngestError> {
    let path = path.as_ref();
    let doc: DemandsDoc = parse_json(path, &read_to_string(path)?)?;

    let mut seen = BTreeMap::new();
    for d in &doc.demands {
        if seen.insert(d.id.clone(), ()).is_some() {
            return Err(IngestError::validation(
                path,
                format!("duplicate demand id {}", d.id),
            ));
        }
        for n in [&d.src, &d.dst] {
            if !topology.contains_node(n) {
                return Err(IngestError::validation(
                    path,
                    format!("demand {}: unknown node {}", d.id, n),
                ));
            }
        }
        if d.src == d.dst {
            return Err(IngestError::validation(
                path,
                format!("demand {}: src equals dst", d.id),
            ));
        }
        if d.service_type.is_tdm() {
            if d.count.is_none() || d.bitrate_gbps.is_some() {
                return Err(IngestError::validation(
                    path,
                    format!("demand {}: TDM service takes a count, not a bitrate", d.id),
                ));
            }
        } else if d.bitrate_gbps.is_none() || d.count.is_some() {
            return Err(IngestError::validation(
                path,
                format!("demand {}: packet service takes a bitrate, not a count", d.id),
            ));
        }
        if d.effective_bitrate_gbps() <= 0.0 {
            return Err(IngestError::validation(
                path,
                format!("demand {}: non-positive effective bitrate", d.id),
            ));
        }
        if let Some(route) = &d.explicit_route {
            if route.first() != Some(&d.src) || route.last() != Some(&d.dst) {
                return Err(IngestError::validation(
                    path,
                    format!("demand {}: explicit route must start at src and end at dst", d.id),
                ));
            }
            for n in route {
                if !topology.contains_node(n) {
                    return Err(IngestError::validation(
                        path,
                        format!("demand {}: unknown node {} in explicit route", d.id, n),
                    ));
                }
            }
        }
    }
    Ok(doc.demands)
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, IngestError> {
    let path = path.as_ref();
    let catalog: Catalog = parse_json(path, &read_to_string(path)?)?;

    if catalog.modes.is_empty() {
        return Err(IngestError::validation(path, "catalog has no transponder modes"));
    }
    let mut seen = BTreeMap::new();
    for m in &catalog.modes {
        if seen.insert(m.id.clone(), ()).is_some() {
            return Err(IngestError::validation(path, format!("duplicate mode id {}", m.id)));
        }
        if m.line_rate_gbps <= 0.0 {
            return Err(IngestError::validation(
                path,
                format!("mode {}: line_rate_gbps must be positive", m.id),
            ));
        }
        if m.max_reach_km <= 0.0 {
            return Err(IngestError::validation(
                path,
                format!("mode {}: max_reach_km must be positive", m.id),
            ));
        }
        if m.roadm_passthrough_penalty_db < 0.0 {
            return Err(IngestError::validation(
                path,
                format!("mode {}: negative pass-through penalty", m.id),
            ));
        }
        if catalog.grid.kind == crate::model::GridKind::Flex {
            let ratio = m.slot_width_ghz / catalog.grid.slot_granularity_ghz;
            if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
                return Err(IngestError::validation(
                    path,
                    format!(
                        "mode {}: slot_width_ghz {} is not a multiple of the {} GHz granularity",
                        m.id, m.slot_width_ghz, catalog.grid.slot_granularity_ghz
                    ),
                ));
            }
        }
    }
    let m = &catalog.margins;
    if m.aging_margin_db < 0.0 || m.span_repair_margin_db < 0.0 || m.operator_margin_db < 0.0 {
        return Err(IngestError::validation(path, "negative margin"));
    }
    for (kind, entry) in &catalog.cost_table {
        if entry.cost_units < 0.0 || entry.power_w < 0.0 {
            return Err(IngestError::validation(path, format!("negative cost for {kind}")));
        }
    }
    let p = &catalog.planner_params;
    if !(p.grooming_threshold > 0.0 && p.grooming_threshold <= 1.0) {
        return Err(IngestError::validation(path, "threshold out of range (0,1]"));
    }
    if p.k_paths == 0 || p.k_grooming == 0 {
        return Err(IngestError::validation(path, "k_paths and k_grooming must be positive"));
    }
    Ok(catalog)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GridKind, ServiceType};
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const TRIANGLE: &str = r#"{
        "nodes": [
            {"id": "A"}, {"id": "B"}, {"id": "C", "roadm_class": "directionless"}
        ],
        "links": [
            {"id": "AB", "a": "A", "b": "B", "length_km": 400},
            {"id": "BC", "a": "B", "b": "C", "length_km": 400},
            {"id": "AC", "a": "A", "b": "C", "length_km": 900}
        ]
    }"#;

    #[test]
    fn triangle_parses_with_auto_spans() {
        let f = write_tmp(TRIANGLE);
        let g = load_topology(f.path()).unwrap();
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.links.len(), 3);
        // 400 km -> 5 spans of 80 km
        assert_eq!(g.link(&LinkId::from("AB")).unwrap().spans.len(), 5);
        let span = &g.link(&LinkId::from("AB")).unwrap().spans[0];
        assert!((span.length_km - 80.0).abs() < 1e-9);
        assert!((span.loss_db - 20.0).abs() < 1e-9);
    }

    #[test]
    fn missing_length_is_a_parse_error_naming_the_file() {
        let f = write_tmp(r#"{"nodes":[{"id":"A"},{"id":"B"}],"links":[{"id":"AB","a":"A","b":"B"}]}"#);
        let err = load_topology(f.path()).unwrap_err();
        assert!(matches!(err, IngestError::Parse { .. }), "{err}");
        assert!(err.to_string().contains("length_km"));
    }

    #[test]
    fn duplicate_node_id_is_a_validation_error() {
        let f = write_tmp(r#"{"nodes":[{"id":"A"},{"id":"A"}],"links":[]}"#);
        let err = load_topology(f.path()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn demands_parse_and_check_nodes() {
        let topo = load_topology(write_tmp(TRIANGLE).path()).unwrap();
        let f = write_tmp(
            r#"{"demands":[
                {"id":"d1","src":"A","dst":"C","service_type":"ethernet","bitrate_gbps":100,"protection":"unprotected"},
                {"id":"d2","src":"A","dst":"C","service_type":"odu2","count":3,"protection":"unprotected"}
            ]}"#,
        );
        let demands = load_demands(f.path(), &topo).unwrap();
        assert_eq!(demands.len(), 2);
        assert_eq!(demands[0].bitrate_gbps, Some(100.0));
        assert_eq!(demands[1].count, Some(3));
        assert_eq!(demands[1].effective_bitrate_gbps(), 30.0);
        assert_eq!(demands[1].service_type, ServiceType::Odu2);
    }

    #[test]
    fn unknown_node_in_demand_is_rejected() {
        let topo = load_topology(write_tmp(TRIANGLE).path()).unwrap();
        let f = write_tmp(
            r#"{"demands":[{"id":"d1","src":"A","dst":"Z","service_type":"ethernet","bitrate_gbps":10,"protection":"unprotected"}]}"#,
        );
        let err = load_demands(f.path(), &topo).unwrap_err();
        assert!(err.to_string().contains("unknown node Z"));
    }

    #[test]
    fn tdm_demand_with_bitrate_is_rejected() {
        let topo = load_topology(write_tmp(TRIANGLE).path()).unwrap();
        let f = write_tmp(
            r#"{"demands":[{"id":"d1","src":"A","dst":"C","service_type":"odu1","bitrate_gbps":10,"protection":"unprotected"}]}"#,
        );
        assert!(load_demands(f.path(), &topo).is_err());
    }

    const CATALOG: &str = r#"{
        "modes": [
            {"id": "100G-QPSK", "line_rate_gbps": 100, "modulation": "DP-QPSK",
             "slot_width_ghz": 37.5, "required_osnr_db": 12, "max_reach_km": 2000,
             "roadm_passthrough_penalty_db": 0.5, "cost_units": 1, "power_w": 50}
        ],
        "grid": {"kind": "flex"}
    }"#;

    #[test]
    fn catalog_defaults_apply() {
        let f = write_tmp(CATALOG);
        let c = load_catalog(f.path()).unwrap();
        assert_eq!(c.planner_params.k_paths, 3);
        assert_eq!(c.planner_params.grooming_threshold, 0.5);
        assert_eq!(c.grid.kind, GridKind::Flex);
        assert_eq!(c.grid.total_slots, 384);
        assert_eq!(c.constants.osnr_reference_db, 58.0);
        assert_eq!(c.slots_per_shelf, 12);
    }

    #[test]
    fn out_of_range_threshold_is_rejected() {
        let doc = CATALOG.replace(
            "\"grid\": {\"kind\": \"flex\"}",
            "\"grid\": {\"kind\": \"flex\"}, \"planner_params\": {\"grooming_threshold\": 1.2}",
        );
        let f = write_tmp(&doc);
        let err = load_catalog(f.path()).unwrap_err();
        assert!(err.to_string().contains("threshold out of range"));
    }

    #[test]
    fn empty_mode_list_is_rejected() {
        let f = write_tmp(r#"{"modes": [], "grid": {"kind": "fixed"}}"#);
        assert!(load_catalog(f.path()).is_err());
    }
}
