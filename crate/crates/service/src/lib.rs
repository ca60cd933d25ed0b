//! Stateful provisioning service: exposes the validated candidate
//! lightpaths as abstract links, answers on-demand path queries with
//! tentative spectrum reservations, and commits or releases provisions
//! against a live spectrum ledger.
//!
//! Every provisioned request owns its lightpath(s) exclusively; oversize
//! requests (above any single mode's line rate) are refused rather than
//! bonded across lightpaths.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use optiplan_core::allocate::assign_with_overbuild;
use optiplan_core::clp::{build_clp_graph, ClpGraph};
use optiplan_core::grooming::best_mode;
use optiplan_core::ingest::Catalog;
use optiplan_core::model::{
    CandidateLightpath, ClpId, FiberGraph, Lightpath, LightpathId, ModeId, NodeId,
    ProtectionClass, VirtualLinkId,
};
use optiplan_core::spectrum::SpectrumState;

const CAP_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
pub struct ServiceConfig {
    /// How long a path offer's tentative reservation stays valid.
    pub offer_ttl: Duration,
    /// Whether abstract links expose their underlying fiber route.
    pub expose_routes: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { offer_ttl: Duration::from_secs(60), expose_routes: false }
    }
}

/// Parameters of a provisioning request.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DemandParams {
    pub src: NodeId,
    pub dst: NodeId,
    pub bitrate_gbps: f64,
    pub protection: ProtectionClass,
}

/// One candidate lightpath projected as an advertised abstract link.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbstractLink {
    pub clp_id: ClpId,
    pub endpoints: (NodeId, NodeId),
    pub modes: Vec<AbstractMode>,
    pub residual_capacity_gbps: f64,
    pub route_length_km: f64,
    pub protected_capable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Vec<optiplan_core::model::LinkId>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AbstractMode {
    pub mode_id: ModeId,
    pub line_rate_gbps: f64,
    pub slot_width_ghz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvisionStatus {
    Active,
    Released,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProvisionRecord {
    pub id: String,
    pub offer_id: String,
    pub demand: DemandParams,
    pub clp_sequence: Vec<ClpId>,
    pub lightpaths: Vec<Lightpath>,
    pub status: ProvisionStatus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathOffer {
    pub offer_id: String,
    pub clp_sequence: Vec<ClpId>,
    pub modes: Vec<ModeId>,
    pub lightpaths: Vec<Lightpath>,
    pub expires_in_ms: u64,
}

struct Offer {
    created: Instant,
    demand: DemandParams,
    clp_sequence: Vec<ClpId>,
    modes: Vec<ModeId>,
    lightpaths: Vec<Lightpath>,
}

struct Inner {
    graph: FiberGraph,
    catalog: Catalog,
    clp: ClpGraph,
    spectrum: SpectrumState,
    offers: BTreeMap<String, Offer>,
    expired_offers: BTreeSet<String>,
    provisions: BTreeMap<String, ProvisionRecord>,
    offer_seq: u64,
    provision_seq: u64,
    lp_seq: u32,
}

/// The shared service state behind the REST interface. All mutations are
/// serialized through one mutex; reads take snapshots under the same lock.
pub struct Service {
    inner: Mutex<Inner>,
    config: ServiceConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Refusal {
    pub reason: String,
}

/// Persistable part of the ledger; offers are transient and not included.
#[derive(Serialize, Deserialize)]
pub struct Snapshot {
    pub spectrum: SpectrumState,
    pub provisions: BTreeMap<String, ProvisionRecord>,
    pub lp_seq: u32,
    pub provision_seq: u64,
}

impl Service {
    pub fn new(graph: FiberGraph, catalog: Catalog, config: ServiceConfig) -> Arc<Service> {
        let clp = build_clp_graph(&graph, &catalog);
        let spectrum = SpectrumState::new(&graph, catalog.grid);
        Arc::new(Service {
            inner: Mutex::new(Inner {
                graph,
                catalog,
                clp,
                spectrum,
                offers: BTreeMap::new(),
                expired_offers: BTreeSet::new(),
                provisions: BTreeMap::new(),
                offer_seq: 0,
                provision_seq: 0,
                lp_seq: 0,
            }),
            config,
        })
    }

    pub fn snapshot(&self) -> Snapshot {
        let inner = self.inner.lock();
        Snapshot {
            spectrum: inner.spectrum.clone(),
            provisions: inner.provisions.clone(),
            lp_seq: inner.lp_seq,
            provision_seq: inner.provision_seq,
        }
    }

    /// Replaces the ledger with a snapshot; any open offers are dropped.
    pub fn restore(&self, snapshot: Snapshot) {
        let mut inner = self.inner.lock();
        for (id, offer) in std::mem::take(&mut inner.offers) {
            let _ = offer;
            inner.expired_offers.insert(id);
        }
        inner.spectrum = snapshot.spectrum;
        inner.provisions = snapshot.provisions;
        inner.lp_seq = snapshot.lp_seq;
        inner.provision_seq = snapshot.provision_seq;
    }
}

impl Inner {
    fn sweep_expired(&mut self, ttl: Duration) {
        let now = Instant::now();
        let stale: Vec<String> = self
            .offers
            .iter()
            .filter(|(_, o)| now.duration_since(o.created) >= ttl)
            .map(|(id, _)| id.clone())
            .collect();
        for id in stale {
            if let Some(o) = self.offers.remove(&id) {
                for lp in &o.lightpaths {
                    self.spectrum.release(&lp.spectrum);
                    if let Some(p) = &lp.protection_spectrum {
                        self.spectrum.release(p);
                    }
                }
            }
            self.expired_offers.insert(id);
        }
    }

    /// Shortest path over the candidate edges by (hops, underlying fiber
    /// length), ties by edge id — the same rule the batch planner uses on
    /// its virtual topology.
    fn shortest_clp_path(&self, src: &NodeId, dst: &NodeId, protected_only: bool) -> Option<Vec<usize>> {
        let edges = &self.clp.edges;
        let usable: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| !protected_only || e.partner_id.is_some())
            .map(|(i, _)| i)
            .collect();
        let mut nodes: Vec<&NodeId> = Vec::new();
        for &i in &usable {
            for n in [&edges[i].endpoints.0, &edges[i].endpoints.1] {
                if !nodes.contains(&n) {
                    nodes.push(n);
                }
            }
        }
        nodes.sort();
        let idx = |n: &NodeId| nodes.iter().position(|m| *m == n);
        let (s, t) = (idx(src)?, idx(dst)?);
        let n = nodes.len();
        let mut dist: Vec<(u32, f64)> = vec![(u32::MAX, f64::INFINITY); n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut done = vec![false; n];
        dist[s] = (0, 0.0);
        let less = |a: (u32, f64), b: (u32, f64)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1 - CAP_EPS);
        loop {
            let mut u = None;
            for v in 0..n {
                if !done[v]
                    && dist[v].0 != u32::MAX
                    && u.map(|b: usize| less(dist[v], dist[b])).unwrap_or(true)
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
            for &ei in &usable {
                let e = &edges[ei];
                let v = if *nodes[u] == e.endpoints.0 {
                    idx(&e.endpoints.1)
                } else if *nodes[u] == e.endpoints.1 {
                    idx(&e.endpoints.0)
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
                let len = self.graph.route_length_km(&e.route);
                let nd = (dist[u].0 + 1, dist[u].1 + len);
                let better = less(nd, dist[v])
                    || (nd == dist[v]
                        && parent[v]
                            .map(|(_, pe)| edges[ei].id < edges[pe].id)
                            .unwrap_or(false));
                if better {
                    dist[v] = nd;
                    parent[v] = Some((u, ei));
                }
            }
        }
        if dist[t].0 == u32::MAX {
            return None;
        }
        let mut seq = Vec::new();
        let mut cur = t;
        while cur != s {
            let (p, ei) = parent[cur]?;
            seq.push(ei);
            cur = p;
        }
        seq.reverse();
        Some(seq)
    }

    fn abstract_link(&self, e: &CandidateLightpath, expose_routes: bool) -> AbstractLink {
        let best = best_mode(e, &self.catalog);
        let width = self.catalog.grid.width_units(best.slot_width_ghz);
        // Residual capacity: how many more channels of the best mode the
        // route can take on the current ledger, times the line rate.
        let mut trial = self.spectrum.clone();
        let mut channels = 0u32;
        let policy = self.catalog.planner_params.spectrum_policy;
        while trial.assign(&e.route, width, policy).is_ok() {
            channels += 1;
            if channels >= self.catalog.grid.unit_count() {
                break;
            }
        }
        AbstractLink {
            clp_id: e.id.clone(),
            endpoints: e.endpoints.clone(),
            modes: e
                .feasible_modes
                .iter()
                .filter_map(|(id, _)| self.catalog.mode(id))
                .map(|m| AbstractMode {
                    mode_id: m.id.clone(),
                    line_rate_gbps: m.line_rate_gbps,
                    slot_width_ghz: m.slot_width_ghz,
                })
                .collect(),
            residual_capacity_gbps: f64::from(channels) * best.line_rate_gbps,
            route_length_km: self.graph.route_length_km(&e.route),
            protected_capable: e.partner_id.is_some(),
            route: expose_routes.then(|| e.route.clone()),
        }
    }
}

/// Why a provision or release call could not proceed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProvisionError {
    /// The offer's TTL elapsed and its reservation was returned to the pool.
    OfferExpired,
    /// No offer with that id was ever made.
    UnknownOffer,
    /// No provision record with that id exists.
    UnknownProvision,
}

impl ProvisionError {
    pub fn reason(self) -> &'static str {
        match self {
            ProvisionError::OfferExpired => "offer expired",
            ProvisionError::UnknownOffer => "unknown offer",
            ProvisionError::UnknownProvision => "unknown provision",
        }
    }

    fn status(self) -> StatusCode {
        match self {
            ProvisionError::OfferExpired => StatusCode::GONE,
            ProvisionError::UnknownOffer | ProvisionError::UnknownProvision => {
                StatusCode::NOT_FOUND
            }
        }
    }
}

impl Service {
    pub fn abstract_links(&self) -> Vec<AbstractLink> {
        let mut inner = self.inner.lock();
        inner.sweep_expired(self.config.offer_ttl);
        let inner = &*inner;
        inner
            .clp
            .edges
            .iter()
            .map(|e| inner.abstract_link(e, self.config.expose_routes))
            .collect()
    }

    /// Computes the least-cost path for a demand and reserves spectrum for
    /// it tentatively. The offer stays valid for the configured TTL.
    pub fn query(&self, demand: &DemandParams) -> Result<PathOffer, Refusal> {
        let mut inner = self.inner.lock();
        inner.sweep_expired(self.config.offer_ttl);

        if demand.src == demand.dst || demand.bitrate_gbps <= 0.0 {
            return Err(Refusal { reason: "invalid request".to_owned() });
        }
        let protected = demand.protection.wants_protection();
        let path = match inner.shortest_clp_path(&demand.src, &demand.dst, protected) {
            Some(p) => p,
            None => {
                let reason = if protected
                    && inner
                        .shortest_clp_path(&demand.src, &demand.dst, false)
                        .is_some()
                {
                    "no protected path"
                } else {
                    "no virtual path"
                };
                return Err(Refusal { reason: reason.to_owned() });
            }
        };

        // One request maps to one lightpath per hop; no bonding.
        let modes: Vec<ModeId> = path
            .iter()
            .map(|&ei| best_mode(&inner.clp.edges[ei], &inner.catalog).id.clone())
            .collect();
        for (&ei, mode_id) in path.iter().zip(&modes) {
            let _ = ei;
            let mode = inner.catalog.mode(mode_id).expect("mode in catalog");
            if demand.bitrate_gbps > mode.line_rate_gbps + CAP_EPS {
                return Err(Refusal {
                    reason: "bitrate exceeds single lightpath capacity".to_owned(),
                });
            }
        }

        // Tentative reservation: assign spectrum now, release on expiry.
        let mut lightpaths = Vec::new();
        let mut assigned = Vec::new();
        for (&ei, mode_id) in path.iter().zip(&modes) {
            let edge = inner.clp.edges[ei].clone();
            let mode = inner.catalog.mode(mode_id).expect("mode in catalog").clone();
            let width = inner.catalog.grid.width_units(mode.slot_width_ghz);
            let catalog = inner.catalog.clone();
            let working = match assign_with_overbuild(&mut inner.spectrum, &edge.route, width, &catalog) {
                Ok(a) => a,
                Err(_) => {
                    for a in &assigned {
                        inner.spectrum.release(a);
                    }
                    return Err(Refusal { reason: "spectrum exhausted".to_owned() });
                }
            };
            assigned.push(working.clone());
            let protection = if protected {
                let partner = edge
                    .partner_id
                    .as_ref()
                    .and_then(|p| inner.clp.edge(p))
                    .map(|p| p.route.clone())
                    .expect("protected path edges have partners");
                match assign_with_overbuild(&mut inner.spectrum, &partner, width, &catalog) {
                    Ok(a) => {
                        assigned.push(a.clone());
                        Some(a)
                    }
                    Err(_) => {
                        for a in &assigned {
                            inner.spectrum.release(a);
                        }
                        return Err(Refusal { reason: "spectrum exhausted".to_owned() });
                    }
                }
            } else {
                None
            };
            let id = LightpathId::new(format!("lp-{}", inner.lp_seq));
            inner.lp_seq += 1;
            lightpaths.push(Lightpath {
                id,
                virtual_link_id: VirtualLinkId::new(format!("vl--{}", edge.id)),
                spectrum: working,
                protection_spectrum: protection,
            });
        }

        let offer_id = format!("offer-{}", inner.offer_seq);
        inner.offer_seq += 1;
        let clp_sequence: Vec<ClpId> =
            path.iter().map(|&ei| inner.clp.edges[ei].id.clone()).collect();
        let offer = PathOffer {
            offer_id: offer_id.clone(),
            clp_sequence: clp_sequence.clone(),
            modes: modes.clone(),
            lightpaths: lightpaths.clone(),
            expires_in_ms: self.config.offer_ttl.as_millis() as u64,
        };
        inner.offers.insert(
            offer_id,
            Offer {
                created: Instant::now(),
                demand: demand.clone(),
                clp_sequence,
                modes,
                lightpaths,
            },
        );
        Ok(offer)
    }

    /// Commits an offer into a provision record; idempotent per offer.
    pub fn provision(&self, offer_id: &str) -> Result<ProvisionRecord, ProvisionError> {
        let mut inner = self.inner.lock();
        inner.sweep_expired(self.config.offer_ttl);

        // Idempotent: re-provisioning the same offer returns the record.
        if let Some(existing) = inner
            .provisions
            .values()
            .find(|r| r.offer_id == offer_id && r.status == ProvisionStatus::Active)
        {
            return Ok(existing.clone());
        }
        let offer = match inner.offers.remove(offer_id) {
            Some(o) => o,
            None => {
                return Err(if inner.expired_offers.contains(offer_id) {
                    ProvisionError::OfferExpired
                } else {
                    ProvisionError::UnknownOffer
                });
            }
        };
        let id = format!("pr-{}", inner.provision_seq);
        inner.provision_seq += 1;
        let record = ProvisionRecord {
            id: id.clone(),
            offer_id: offer_id.to_owned(),
            demand: offer.demand,
            clp_sequence: offer.clp_sequence,
            lightpaths: offer.lightpaths,
            status: ProvisionStatus::Active,
        };
        let _ = offer.modes;
        inner.provisions.insert(id, record.clone());
        Ok(record)
    }

    /// Frees a record's spectrum and marks it released; idempotent.
    pub fn release(&self, record_id: &str) -> Result<ProvisionRecord, ProvisionError> {
        let mut inner = self.inner.lock();
        inner.sweep_expired(self.config.offer_ttl);
        let record = match inner.provisions.get(record_id).cloned() {
            Some(r) => r,
            None => return Err(ProvisionError::UnknownProvision),
        };
        if record.status == ProvisionStatus::Released {
            return Ok(record); // repeated release is a no-op
        }
        for lp in &record.lightpaths {
            inner.spectrum.release(&lp.spectrum);
            if let Some(p) = &lp.protection_spectrum {
                inner.spectrum.release(p);
            }
        }
        let record = inner.provisions.get_mut(record_id).unwrap();
        record.status = ProvisionStatus::Released;
        Ok(record.clone())
    }

    pub fn provisions(&self) -> Vec<ProvisionRecord> {
        self.inner.lock().provisions.values().cloned().collect()
    }
}

// REST layer.

async fn get_abstract_links(State(svc): State<Arc<Service>>) -> Json<Vec<AbstractLink>> {
    Json(svc.abstract_links())
}

async fn post_query(
    State(svc): State<Arc<Service>>,
    Json(demand): Json<DemandParams>,
) -> Response {
    match svc.query(&demand) {
        Ok(offer) => (StatusCode::OK, Json(offer)).into_response(),
        Err(refusal) => (StatusCode::CONFLICT, Json(refusal)).into_response(),
    }
}

#[derive(Deserialize)]
struct ProvisionRequest {
    offer_id: String,
}

async fn post_provision(
    State(svc): State<Arc<Service>>,
    Json(req): Json<ProvisionRequest>,
) -> Response {
    match svc.provision(&req.offer_id) {
        Ok(record) => (StatusCode::CREATED, Json(record)).into_response(),
        Err(e) => (
            e.status(),
            Json(Refusal { reason: e.reason().to_owned() }),
        )
            .into_response(),
    }
}

async fn get_provisions(State(svc): State<Arc<Service>>) -> Json<Vec<ProvisionRecord>> {
    Json(svc.provisions())
}

async fn get_provision(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Response {
    match svc.inner.lock().provisions.get(&id) {
        Some(r) => (StatusCode::OK, Json(r.clone())).into_response(),
        None => (
            StatusCode::NOT_FOUND,
            Json(Refusal { reason: "unknown provision".to_owned() }),
        )
            .into_response(),
    }
}

async fn delete_provision(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Response {
    match svc.release(&id) {
        Ok(record) => (StatusCode::OK, Json(record)).into_response(),
        Err(e) => (
            e.status(),
            Json(Refusal { reason: e.reason().to_owned() }),
        )
            .into_response(),
    }
}

async fn get_snapshot(State(svc): State<Arc<Service>>) -> Json<Snapshot> {
    Json(svc.snapshot())
}

async fn post_restore(
    State(svc): State<Arc<Service>>,
    Json(snapshot): Json<Snapshot>,
) -> StatusCode {
    svc.restore(snapshot);
    StatusCode::NO_CONTENT
}

/// The REST router over a shared service state.
pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/topology/abstract-links", get(get_abstract_links))
        .route("/paths/query", post(post_query))
        .route("/provisions", post(post_provision).get(get_provisions))
        .route(
            "/provisions/:id",
            get(get_provision).delete(delete_provision),
        )
        .route("/state/snapshot", get(get_snapshot))
        .route("/state/restore", post(post_restore))
        .with_state(service)
}
