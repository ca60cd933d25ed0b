//! Equipment fitting: turns a finished allocation into a priced bill of
//! material and summary quality metrics.
//!
//! Counting rules: two transponders per lightpath (one per end) plus one
//! protection module per 1+1 lightpath; one ROADM degree per incident
//! fiber instance, priced by node class; `span_count + 1` amplifiers per
//! used fiber instance (inline between spans plus two terminal); fiber km
//! over all live instances including overbuild; shelves per node sized by
//! the transponders terminating there.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::Catalog;
use crate::model::{
    FiberGraph, GridKind, Lightpath, LinkId, ModeId, NodeId, RestorationGap, UnservedDemand,
    VirtualLink,
};
use crate::spectrum::SpectrumState;

/// One priced line of the bill of material. Quantity is a count for every
/// kind except `fiber_km`, where it is a length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BomLine {
    pub kind: String,
    pub quantity: f64,
    pub unit_cost: f64,
    pub unit_power: f64,
}

impl BomLine {
    pub fn total_cost(&self) -> f64 {
        self.quantity * self.unit_cost
    }

    pub fn total_power(&self) -> f64 {
        self.quantity * self.unit_power
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BillOfMaterial {
    pub lines: Vec<BomLine>,
    pub total_cost_units: f64,
    pub total_power_w: f64,
}

impl BillOfMaterial {
    fn from_lines(lines: Vec<BomLine>) -> Self {
        let total_cost_units = lines.iter().map(BomLine::total_cost).sum();
        let total_power_w = lines.iter().map(BomLine::total_power).sum();
        BillOfMaterial { lines, total_cost_units, total_power_w }
    }
}

/// Summary quality metrics of a plan, for cross-plan comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanMetrics {
    pub transponder_count: u32,
    pub lightpath_count: u32,
    pub served_count: u32,
    pub unserved_count: u32,
    pub total_allocated_gbps: f64,
    pub avg_link_occupancy: f64,
    pub max_link_occupancy: f64,
    pub avg_fragmentation: f64,
    /// False on a fixed grid, where fragmentation is not meaningful.
    pub fragmentation_applicable: bool,
    pub restoration_gap_count: u32,
    pub cost_units: f64,
    pub power_w: f64,
}

fn endpoints_of<'a>(
    lp: &Lightpath,
    virtual_links: &'a [VirtualLink],
) -> Option<&'a (NodeId, NodeId)> {
    virtual_links
        .iter()
        .find(|v| v.id == lp.virtual_link_id)
        .map(|v| &v.endpoints)
}

/// Prices the equipment realizing an allocation.
pub fn fit_equipment(
    virtual_links: &[VirtualLink],
    lightpaths: &[Lightpath],
    graph: &FiberGraph,
    catalog: &Catalog,
    state: &SpectrumState,
) -> BillOfMaterial {
    let mut lines = Vec::new();

    // Transponders, per mode: one pair per lightpath.
    let mut per_mode: BTreeMap<ModeId, u32> = BTreeMap::new();
    let mut protected_lp = 0u32;
    for lp in lightpaths {
        if let Some(v) = virtual_links.iter().find(|v| v.id == lp.virtual_link_id) {
            *per_mode.entry(v.selected_mode.clone()).or_insert(0) += 2;
        }
        if lp.protection_spectrum.is_some() {
            protected_lp += 1;
        }
    }
    for (mode_id, qty) in &per_mode {
        let mode = catalog.mode(mode_id).expect("mode in catalog");
        lines.push(BomLine {
            kind: format!("transponder_{mode_id}"),
            quantity: f64::from(*qty),
            unit_cost: mode.cost_units,
            unit_power: mode.power_w,
        });
    }
    if protected_lp > 0 {
        let e = catalog.cost_entry("protection_module");
        lines.push(BomLine {
            kind: "protection_module".to_owned(),
            quantity: f64::from(protected_lp),
            unit_cost: e.cost_units,
            unit_power: e.power_w,
        });
    }

    // ROADM degrees: one per incident live fiber instance, priced by class.
    let mut per_class: BTreeMap<String, u32> = BTreeMap::new();
    for node in &graph.nodes {
        let degrees: u32 = graph
            .links_at(&node.id)
            .map(|l| state.instance_count(&l.id))
            .sum();
        *per_class
            .entry(Catalog::roadm_degree_kind(node.roadm_class))
            .or_insert(0) += degrees;
    }
    for (kind, qty) in &per_class {
        if *qty == 0 {
            continue;
        }
        let e = catalog.cost_entry(kind);
        lines.push(BomLine {
            kind: kind.clone(),
            quantity: f64::from(*qty),
            unit_cost: e.cost_units,
            unit_power: e.power_w,
        });
    }

    // Amplifiers on used fiber instances: span_count - 1 inline + 2 terminal.
    let mut used: BTreeSet<(LinkId, u32)> = BTreeSet::new();
    for lp in lightpaths {
        for spectrum in std::iter::once(&lp.spectrum).chain(lp.protection_spectrum.iter()) {
            for (l, i) in &spectrum.fiber_instances {
                used.insert((l.clone(), *i));
            }
        }
    }
    let amplifiers: u32 = used
        .iter()
        .filter_map(|(l, _)| graph.link(l))
        .map(|l| l.spans.len() as u32 + 1)
        .sum();
    if amplifiers > 0 {
        let e = catalog.cost_entry("amplifier");
        lines.push(BomLine {
            kind: "amplifier".to_owned(),
            quantity: f64::from(amplifiers),
            unit_cost: e.cost_units,
            unit_power: e.power_w,
        });
    }

    // Fiber length over all live instances, overbuild at full link length.
    let fiber_km: f64 = graph
        .links
        .iter()
        .map(|l| l.length_km * f64::from(state.instance_count(&l.id)))
        .sum();
    if fiber_km > 0.0 {
        let e = catalog.cost_entry("fiber_km");
        lines.push(BomLine {
            kind: "fiber_km".to_owned(),
            quantity: fiber_km,
            unit_cost: e.cost_units,
            unit_power: e.power_w,
        });
    }

    // Shelves: transponders terminating at each node, slots_per_shelf each.
    let mut at_node: BTreeMap<NodeId, u32> = BTreeMap::new();
    for lp in lightpaths {
        if let Some((a, b)) = endpoints_of(lp, virtual_links) {
            *at_node.entry(a.clone()).or_insert(0) += 1;
            *at_node.entry(b.clone()).or_insert(0) += 1;
        }
    }
    let shelves: u32 = at_node
        .values()
        .map(|&t| t.div_ceil(catalog.slots_per_shelf.max(1)))
        .sum();
    if shelves > 0 {
        let e = catalog.cost_entry("shelf");
        lines.push(BomLine {
            kind: "shelf".to_owned(),
            quantity: f64::from(shelves),
            unit_cost: e.cost_units,
            unit_power: e.power_w,
        });
    }

    BillOfMaterial::from_lines(lines)
}

/// Computes the plan quality metrics from the allocation result, the bill
/// of material and the final spectrum state.
pub fn summarize(
    virtual_links: &[VirtualLink],
    lightpaths: &[Lightpath],
    served_count: u32,
    unserved: &[UnservedDemand],
    restoration_gaps: &[RestorationGap],
    bom: &BillOfMaterial,
    state: &SpectrumState,
) -> PlanMetrics {
    let link_count = state.link_ids().count();
    let occupancies: Vec<f64> = state.link_ids().map(|l| state.link_occupancy(l)).collect();
    let avg_link_occupancy = if link_count > 0 {
        occupancies.iter().sum::<f64>() / link_count as f64
    } else {
        0.0
    };
    let max_link_occupancy = occupancies.iter().cloned().fold(0.0, f64::max);

    let fragmentation_applicable = state.grid().kind == GridKind::Flex;
    let avg_fragmentation = if fragmentation_applicable {
        let mut sum = 0.0;
        let mut n = 0usize;
        let ids: Vec<LinkId> = state.link_ids().cloned().collect();
        for l in &ids {
            for i in 0..state.instance_count(l) {
                sum += state.fragmentation(l, i);
                n += 1;
            }
        }
        if n > 0 { sum / n as f64 } else { 0.0 }
    } else {
        0.0
    };

    PlanMetrics {
        transponder_count: 2 * lightpaths.len() as u32,
        lightpath_count: lightpaths.len() as u32,
        served_count,
        unserved_count: unserved.len() as u32,
        total_allocated_gbps: virtual_links.iter().map(|v| v.allocated_gbps).sum(),
        avg_link_occupancy,
        max_link_occupancy,
        avg_fragmentation,
        fragmentation_applicable,
        restoration_gap_count: restoration_gaps.len() as u32,
        cost_units: bom.total_cost_units,
        power_w: bom.total_power_w,
    }
}
