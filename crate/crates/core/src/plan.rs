//! The full planning result: virtual topology, demand routes, lightpaths,
//! bill of material and metrics, serialized as the plan document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bom::{BillOfMaterial, PlanMetrics};
use crate::model::{
    DemandId, Lightpath, RestorationGap, UnservedDemand, VirtualLink, VirtualLinkId,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub virtual_topology: Vec<VirtualLink>,
    pub demand_routes: BTreeMap<DemandId, Vec<VirtualLinkId>>,
    pub lightpaths: Vec<Lightpath>,
    pub bom: BillOfMaterial,
    pub metrics: PlanMetrics,
    pub unserved: Vec<UnservedDemand>,
    pub restoration_gaps: Vec<RestorationGap>,
}

impl Plan {
    /// Deterministic pretty-printed JSON document. All contained maps are
    /// ordered, so identical plans serialize byte-identically.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("plan serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Plan, serde_json::Error> {
        serde_json::from_str(text)
    }
}
