//! Shared domain types: the physical fiber layer, demands, transponder
//! catalog entries, candidate lightpaths and the planned entities built
//! on top of them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Tolerance for the span-sum-vs-link-length consistency check, in km.
pub const SPAN_SUM_TOLERANCE_KM: f64 = 1e-6;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_type!(NodeId);
id_type!(LinkId);
id_type!(DemandId);
id_type!(ModeId);
id_type!(ClpId);
id_type!(VirtualLinkId);
id_type!(LightpathId);

/// ROADM architecture at a node site. Only affects equipment pricing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadmClass {
    Fixed,
    Directionless,
    ColorlessDirectionless,
}

impl RoadmClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RoadmClass::Fixed => "fixed",
            RoadmClass::Directionless => "directionless",
            RoadmClass::ColorlessDirectionless => "colorless_directionless",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSite {
    pub id: NodeId,
    pub name: String,
    pub roadm_class: RoadmClass,
}

/// One amplifier section of a fiber link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub length_km: f64,
    pub loss_db: f64,
}

/// A bidirectional fiber link between two node sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberLink {
    pub id: LinkId,
    pub a: NodeId,
    pub b: NodeId,
    pub length_km: f64,
    pub spans: Vec<Span>,
    /// Parallel fibers available on this route before overbuild kicks in.
    pub fiber_count: u32,
}

impl FiberLink {
    pub fn touches(&self, n: &NodeId) -> bool {
        &self.a == n || &self.b == n
    }

    /// The far endpoint when entering from `n`; `None` if `n` is not an endpoint.
    pub fn other_end(&self, n: &NodeId) -> Option<&NodeId> {
        if &self.a == n {
            Some(&self.b)
        } else if &self.b == n {
            Some(&self.a)
        } else {
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceType {
    Ethernet,
    IpMpls,
    Odu0,
    Odu1,
    Odu2,
}

impl ServiceType {
    /// Nominal per-container bitrate for TDM service types.
    pub fn odu_rate_gbps(self) -> Option<f64> {
        match self {
            ServiceType::Odu0 => Some(1.25),
            ServiceType::Odu1 => Some(2.5),
            ServiceType::Odu2 => Some(10.0),
            ServiceType::Ethernet | ServiceType::IpMpls => None,
        }
    }

    pub fn is_tdm(self) -> bool {
        self.odu_rate_gbps().is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtectionClass {
    Unprotected,
    OpticalProtection,
    OpticalRestoration,
    ProtectionAndRestoration,
}

impl ProtectionClass {
    pub fn wants_protection(self) -> bool {
        matches!(
            self,
            ProtectionClass::OpticalProtection | ProtectionClass::ProtectionAndRestoration
        )
    }

    pub fn wants_restoration(self) -> bool {
        matches!(
            self,
            ProtectionClass::OpticalRestoration | ProtectionClass::ProtectionAndRestoration
        )
    }
}

/// A traffic request between two node sites. Packet services carry a
/// bitrate; TDM (ODU) services carry a container count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: DemandId,
    pub src: NodeId,
    pub dst: NodeId,
    pub service_type: ServiceType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bitrate_gbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    pub protection: ProtectionClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_route: Option<Vec<NodeId>>,
}

impl Demand {
    /// Capacity the demand consumes, in Gbps.
    pub fn effective_bitrate_gbps(&self) -> f64 {
        match self.service_type.odu_rate_gbps() {
            Some(rate) => rate * f64::from(self.count.unwrap_or(0)),
            None => self.bitrate_gbps.unwrap_or(0.0),
        }
    }
}

/// A transponder operating mode from the equipment catalog.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransponderMode {
    pub id: ModeId,
    pub line_rate_gbps: f64,
    pub modulation: String,
    /// Occupied spectral width; on a flex grid this must be a multiple of
    /// the slot granularity. On a fixed grid a mode always takes one channel.
    pub slot_width_ghz: f64,
    /// Back-to-back OSNR requirement at the reference bandwidth.
    pub required_osnr_db: f64,
    pub max_reach_km: f64,
    /// Extra OSNR requirement per traversed intermediate ROADM.
    #[serde(default)]
    pub roadm_passthrough_penalty_db: f64,
    #[serde(default)]
    pub cost_units: f64,
    #[serde(default)]
    pub power_w: f64,
}

/// End-of-life feasibility cushions, all subtracted from available OSNR.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarginStack {
    #[serde(default)]
    pub aging_margin_db: f64,
    #[serde(default)]
    pub span_repair_margin_db: f64,
    #[serde(default)]
    pub operator_margin_db: f64,
}

impl MarginStack {
    pub fn total_db(&self) -> f64 {
        self.aging_margin_db + self.span_repair_margin_db + self.operator_margin_db
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Fixed,
    Flex,
}

/// WDM channel plan: uniform fixed channels or flex-grid slots.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: GridKind,
    #[serde(default = "GridSpec::default_channel_count")]
    pub channel_count: u32,
    #[serde(default = "GridSpec::default_slot_granularity_ghz")]
    pub slot_granularity_ghz: f64,
    #[serde(default = "GridSpec::default_total_slots")]
    pub total_slots: u32,
}

impl GridSpec {
    fn default_channel_count() -> u32 {
        96
    }
    fn default_slot_granularity_ghz() -> f64 {
        12.5
    }
    fn default_total_slots() -> u32 {
        384
    }

    pub fn fixed() -> Self {
        GridSpec {
            kind: GridKind::Fixed,
            channel_count: Self::default_channel_count(),
            slot_granularity_ghz: Self::default_slot_granularity_ghz(),
            total_slots: Self::default_total_slots(),
        }
    }

    pub fn flex() -> Self {
        GridSpec {
            kind: GridKind::Flex,
            ..Self::fixed()
        }
    }

    /// Number of allocation units (channels or slots) per fiber.
    pub fn unit_count(&self) -> u32 {
        match self.kind {
            GridKind::Fixed => self.channel_count,
            GridKind::Flex => self.total_slots,
        }
    }

    /// Allocation width in units for a mode of the given spectral width.
    pub fn width_units(&self, slot_width_ghz: f64) -> u32 {
        match self.kind {
            GridKind::Fixed => 1,
            GridKind::Flex => (slot_width_ghz / self.slot_granularity_ghz).round().max(1.0) as u32,
        }
    }
}

/// Why a route was enumerated into the candidate lightpath graph.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    KthShortest(u32),
    /// Single-fiber-link route kept unconditionally so grooming always has
    /// an opaque fallback.
    OneHop,
    DisjointProtectionPairMember,
    Restoration(LinkId),
}

/// Cascaded optical metrics of one fiber route, plus the effective
/// requirement once a transponder mode's penalties and margins are applied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathMetrics {
    pub total_length_km: f64,
    pub span_count: u32,
    pub roadm_passthrough_count: u32,
    pub osnr_db: f64,
    pub effective_required_osnr_db: f64,
}

/// One edge of the auxiliary graph: a concrete fiber route with the
/// transponder modes that survive the feasibility filter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateLightpath {
    pub id: ClpId,
    pub endpoints: (NodeId, NodeId),
    pub route: Vec<LinkId>,
    pub route_nodes: Vec<NodeId>,
    pub kinds: Vec<RouteKind>,
    pub feasible_modes: Vec<(ModeId, PathMetrics)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner_id: Option<ClpId>,
}

impl CandidateLightpath {
    pub fn is_one_hop(&self) -> bool {
        self.route.len() == 1
    }
}

/// Channel (fixed grid) or slot interval (flex grid) of an assignment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRange {
    FixedChannel { channel_index: u32 },
    FlexSlots { lo: u32, hi: u32 },
}

impl ChannelRange {
    pub fn start(&self) -> u32 {
        match *self {
            ChannelRange::FixedChannel { channel_index } => channel_index,
            ChannelRange::FlexSlots { lo, .. } => lo,
        }
    }

    pub fn width(&self) -> u32 {
        match *self {
            ChannelRange::FixedChannel { .. } => 1,
            ChannelRange::FlexSlots { lo, hi } => hi - lo,
        }
    }
}

/// Spectrum occupied by one lightpath: the same channel/slot range on every
/// link of the route, with a fiber instance chosen per link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAssignment {
    pub channel: ChannelRange,
    pub fiber_instances: Vec<(LinkId, u32)>,
}

/// An installed wavelength-carrying entity on a virtual link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lightpath {
    pub id: LightpathId,
    pub virtual_link_id: VirtualLinkId,
    pub spectrum: SpectrumAssignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protection_spectrum: Option<SpectrumAssignment>,
}

/// A selected grooming link of the virtual topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub id: VirtualLinkId,
    pub clp_id: ClpId,
    pub endpoints: (NodeId, NodeId),
    pub route: Vec<LinkId>,
    pub route_nodes: Vec<NodeId>,
    pub selected_mode: ModeId,
    pub line_rate_gbps: f64,
    /// Disjoint partner route for 1+1 installs, when the candidate has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protection_route: Option<Vec<LinkId>>,
    pub lightpath_ids: Vec<LightpathId>,
    pub allocated_gbps: f64,
}

impl VirtualLink {
    pub fn installed_capacity_gbps(&self) -> f64 {
        self.line_rate_gbps * self.lightpath_ids.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnservedReason {
    NoVirtualPath,
    SpectrumExhausted,
    ExplicitRouteUnmappable,
    NoProtectedPath,
}

impl fmt::Display for UnservedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            UnservedReason::NoVirtualPath => "no virtual path",
            UnservedReason::SpectrumExhausted => "spectrum exhausted",
            UnservedReason::ExplicitRouteUnmappable => "explicit route unmappable",
            UnservedReason::NoProtectedPath => "no protected path",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnservedDemand {
    pub demand_id: DemandId,
    pub reason: UnservedReason,
}

/// A restoration-coverage hole: a traversed virtual link has no precomputed
/// restoration candidate for one of its single-link failures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestorationGap {
    pub demand_id: DemandId,
    pub virtual_link_id: VirtualLinkId,
    pub failed_link_id: LinkId,
}

/// The physical layer: node sites and fiber links with id lookups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberGraph {
    pub nodes: Vec<NodeSite>,
    pub links: Vec<FiberLink>,
    #[serde(skip)]
    node_index: BTreeMap<NodeId, usize>,
    #[serde(skip)]
    link_index: BTreeMap<LinkId, usize>,
}

impl FiberGraph {
    pub fn new(nodes: Vec<NodeSite>, links: Vec<FiberLink>) -> Self {
        let mut g = FiberGraph {
            nodes,
            links,
            node_index: BTreeMap::new(),
            link_index: BTreeMap::new(),
        };
        g.rebuild_indices();
        g
    }

    /// Indices are skipped by serde; call after deserializing.
    pub fn rebuild_indices(&mut self) {
        self.node_index = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        self.link_index = self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeSite> {
        self.node_index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn link(&self, id: &LinkId) -> Option<&FiberLink> {
        self.link_index.get(id).map(|&i| &self.links[i])
    }

    pub fn contains_node(&self, id: &NodeId) -> bool {
        self.node_index.contains_key(id)
    }

    /// Links incident to a node, in file order.
    pub fn links_at<'a>(&'a self, n: &'a NodeId) -> impl Iterator<Item = &'a FiberLink> {
        self.links.iter().filter(move |l| l.touches(n))
    }

    /// Total fiber length of a link route.
    pub fn route_length_km(&self, route: &[LinkId]) -> f64 {
        route
            .iter()
            .map(|id| self.link(id).map(|l| l.length_km).unwrap_or(0.0))
            .sum()
    }
}

/// A structural problem found by topology validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub entity: String,
    pub rule: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.entity, self.rule, self.message)
    }
}

/// Checks all structural invariants of the fiber graph. Empty result means
/// the topology is well formed and connected.
pub fn validate_topology(g: &FiberGraph) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let diag = |entity: &str, rule: &str, message: String| Diagnostic {
        entity: entity.to_owned(),
        rule: rule.to_owned(),
        message,
    };

    let mut seen_nodes = BTreeMap::new();
    for n in &g.nodes {
        if seen_nodes.insert(n.id.clone(), ()).is_some() {
            out.push(diag(n.id.as_str(), "duplicate id", format!("duplicate node id {}", n.id)));
        }
    }
    let mut seen_links = BTreeMap::new();
    for l in &g.links {
        if seen_links.insert(l.id.clone(), ()).is_some() {
            out.push(diag(l.id.as_str(), "duplicate id", format!("duplicate link id {}", l.id)));
        }
        for end in [&l.a, &l.b] {
            if !seen_nodes.contains_key(end) {
                out.push(diag(
                    l.id.as_str(),
                    "unknown endpoint",
                    format!("link {} references unknown node {}", l.id, end),
                ));
            }
        }
        if l.a == l.b {
            out.push(diag(l.id.as_str(), "self loop", format!("link {} is a self loop", l.id)));
        }
        if l.spans.is_empty() {
            out.push(diag(l.id.as_str(), "no spans", format!("link {} has no spans", l.id)));
        } else {
            let span_sum: f64 = l.spans.iter().map(|s| s.length_km).sum();
            if (span_sum - l.length_km).abs() > SPAN_SUM_TOLERANCE_KM {
                out.push(diag(
                    l.id.as_str(),
                    "span sum mismatch",
                    format!(
                        "link {} spans sum to {} km but length_km is {}",
                        l.id, span_sum, l.length_km
                    ),
                ));
            }
            for (i, s) in l.spans.iter().enumerate() {
                if s.length_km <= 0.0 {
                    out.push(diag(
                        l.id.as_str(),
                        "non-positive span length",
                        format!("link {} span {} has length {}", l.id, i, s.length_km),
                    ));
                }
                if s.loss_db <= 0.0 {
                    out.push(diag(
                        l.id.as_str(),
                        "non-positive span loss",
                        format!("link {} span {} has loss {}", l.id, i, s.loss_db),
                    ));
                }
            }
        }
        if l.length_km < 0.0 {
            out.push(diag(
                l.id.as_str(),
                "negative length",
                format!("link {} has negative length", l.id),
            ));
        }
        if l.fiber_count < 1 {
            out.push(diag(
                l.id.as_str(),
                "zero fiber count",
                format!("link {} has fiber_count 0", l.id),
            ));
        }
    }

    // Connectivity over well-formed links only.
    if g.nodes.len() > 1 {
        let mut reached: BTreeMap<&NodeId, bool> = g.nodes.iter().map(|n| (&n.id, false)).collect();
        let mut stack = vec![&g.nodes[0].id];
        *reached.get_mut(&g.nodes[0].id).unwrap() = true;
        while let Some(n) = stack.pop() {
            for l in g.links_at(n) {
                if let Some(m) = l.other_end(n) {
                    if let Some(r) = reached.get_mut(m) {
                        if !*r {
                            *r = true;
                            stack.push(m);
                        }
                    }
                }
            }
        }
        if reached.values().any(|r| !r) {
            out.push(diag("topology", "graph not connected", "graph not connected".to_owned()));
        }
    }

    out
}
