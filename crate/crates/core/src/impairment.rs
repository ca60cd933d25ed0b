//! Optical feasibility: cascaded link-budget metrics per route and the
//! per-transponder-mode check against the threshold vector with margins.
//!
//! The OSNR estimate is a plain link budget: each span contributes
//! `osnr_reference_db - span_loss_db - noise_figure_db`, spans cascade as
//! inverse linear sums. Nonlinear and filtering effects are folded into the
//! per-mode required OSNR and ROADM pass-through penalty.

use serde::{Deserialize, Serialize};

use crate::ingest::{Catalog, ImpairmentConstants};
use crate::model::{FiberGraph, MarginStack, ModeId, PathMetrics, TransponderMode};
use crate::paths::FiberPath;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingConstraint {
    None,
    Reach,
    Osnr,
}

/// Outcome of checking one transponder mode on one route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub mode_id: ModeId,
    pub feasible: bool,
    pub metrics: PathMetrics,
    pub binding_constraint: BindingConstraint,
}

fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Cascaded metrics of a fiber route. The effective requirement field is
/// mode dependent and left at zero here; `evaluate_mode` fills it in.
pub fn path_metrics(
    route: &FiberPath,
    graph: &FiberGraph,
    constants: &ImpairmentConstants,
) -> PathMetrics {
    let mut total_length_km = 0.0;
    let mut span_count = 0u32;
    let mut inv_osnr_sum = 0.0;
    for link_id in &route.links {
        let link = graph.link(link_id).expect("route link in graph");
        total_length_km += link.length_km;
        for span in &link.spans {
            span_count += 1;
            let span_osnr_db = constants.osnr_reference_db - span.loss_db - constants.noise_figure_db;
            inv_osnr_sum += 1.0 / db_to_lin(span_osnr_db);
        }
    }
    let osnr_db = if inv_osnr_sum > 0.0 {
        lin_to_db(1.0 / inv_osnr_sum)
    } else {
        f64::INFINITY
    };
    PathMetrics {
        total_length_km,
        span_count,
        roadm_passthrough_count: route.nodes.len().saturating_sub(2) as u32,
        osnr_db,
        effective_required_osnr_db: 0.0,
    }
}

/// Checks one mode against the route metrics. The first violated check in
/// the order (reach, OSNR) becomes the binding constraint.
pub fn evaluate_mode(
    route_metrics: &PathMetrics,
    mode: &TransponderMode,
    margins: &MarginStack,
) -> FeasibilityVerdict {
    let effective_required = mode.required_osnr_db
        + f64::from(route_metrics.roadm_passthrough_count) * mode.roadm_passthrough_penalty_db
        + margins.total_db();
    let metrics = PathMetrics {
        effective_required_osnr_db: effective_required,
        ..*route_metrics
    };
    let binding = if route_metrics.total_length_km > mode.max_reach_km {
        BindingConstraint::Reach
    } else if route_metrics.osnr_db < effective_required {
        BindingConstraint::Osnr
    } else {
        BindingConstraint::None
    };
    FeasibilityVerdict {
        mode_id: mode.id.clone(),
        feasible: binding == BindingConstraint::None,
        metrics,
        binding_constraint: binding,
    }
}

/// The transponder modes feasible on a route, in catalog order, each with
/// its per-mode metrics. Empty result means the route is unusable.
pub fn filter_modes(
    route: &FiberPath,
    graph: &FiberGraph,
    catalog: &Catalog,
) -> Vec<(ModeId, PathMetrics)> {
    let base = path_metrics(route, graph, &catalog.constants);
    catalog
        .modes
        .iter()
        .filter_map(|mode| {
            let verdict = evaluate_mode(&base, mode, &catalog.margins);
            verdict
                .feasible
                .then_some((mode.id.clone(), verdict.metrics))
        })
        .collect()
}
