//! Batch planner entry points: full plan runs, grooming-threshold sweeps,
//! and rendering of the wavelength-allocation table from a plan document.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use optiplan_core::clp::build_clp_graph;
use optiplan_core::grooming::design_with_trace;
use optiplan_core::ingest::{
    load_catalog, load_demands, load_topology, Catalog, DemandOrder, SpectrumPolicy,
};
use optiplan_core::model::{GridSpec, LinkId};
use optiplan_core::pipeline::{plan_with_clp, sweep, SweepRow};
use optiplan_core::plan::Plan;

const EXIT_VALIDATION: u8 = 2;
const EXIT_UNSERVED: u8 = 3;

#[derive(Parser)]
#[command(name = "optiplan", about = "Multilayer optical transport network planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the network once and write the plan document.
    Plan(PlanArgs),
    /// Plan across a list or range of grooming thresholds and emit a CSV.
    Sweep(SweepArgs),
    /// Render the wavelength-allocation table of a plan document.
    Render(RenderArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GridArg {
    Fixed,
    Flex,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    FirstFit,
    ExactFit,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Desc,
    Asc,
    Input,
}

#[derive(Args)]
struct InputArgs {
    /// Topology document (JSON).
    #[arg(long)]
    topology: PathBuf,
    /// Demand matrix document (JSON).
    #[arg(long)]
    demands: PathBuf,
    /// Equipment catalog document (JSON).
    #[arg(long)]
    catalog: PathBuf,
    /// Override the catalog's grooming threshold.
    #[arg(long)]
    grooming_threshold: Option<f64>,
    /// Override the number of k-shortest candidate routes per node pair.
    #[arg(long)]
    k_paths: Option<u32>,
    /// Override the number of grooming paths per demand.
    #[arg(long)]
    k_grooming: Option<u32>,
    /// Override the WDM grid kind from the catalog.
    #[arg(long, value_enum)]
    grid: Option<GridArg>,
    /// Spectrum assignment policy.
    #[arg(long, value_enum)]
    spectrum_policy: Option<PolicyArg>,
    /// Demand processing order.
    #[arg(long, value_enum)]
    demand_order: Option<OrderArg>,
    /// Run the grooming deletion loop for a single round only.
    #[arg(long)]
    single_pass: bool,
    /// Count each demand's full bitrate on every grooming path.
    #[arg(long)]
    no_load_split: bool,
    /// Fail instead of lighting extra fibers on exhausted links.
    #[arg(long)]
    disable_overbuild: bool,
}

impl InputArgs {
    fn load(&self) -> Result<(optiplan_core::model::FiberGraph, Vec<optiplan_core::model::Demand>, Catalog), String> {
        let graph = load_topology(&self.topology).map_err(|e| format!("ingest: {e}"))?;
        let demands = load_demands(&self.demands, &graph).map_err(|e| format!("ingest: {e}"))?;
        let mut catalog = load_catalog(&self.catalog).map_err(|e| format!("ingest: {e}"))?;

        let p = &mut catalog.planner_params;
        if let Some(t) = self.grooming_threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err("ingest: threshold out of range (0,1]".to_owned());
            }
            p.grooming_threshold = t;
        }
        if let Some(k) = self.k_paths {
            if k == 0 {
                return Err("ingest: k_paths must be positive".to_owned());
            }
            p.k_paths = k;
        }
        if let Some(k) = self.k_grooming {
            if k == 0 {
                return Err("ingest: k_grooming must be positive".to_owned());
            }
            p.k_grooming = k;
        }
        if let Some(policy) = self.spectrum_policy {
            p.spectrum_policy = match policy {
                PolicyArg::FirstFit => SpectrumPolicy::FirstFit,
                PolicyArg::ExactFit => SpectrumPolicy::ExactFit,
            };
        }
        if let Some(order) = self.demand_order {
            p.demand_order = match order {
                OrderArg::Desc => DemandOrder::Desc,
                OrderArg::Asc => DemandOrder::Asc,
                OrderArg::Input => DemandOrder::Input,
            };
        }
        if self.single_pass {
            p.single_pass = true;
        }
        if self.no_load_split {
            p.load_split = false;
        }
        if self.disable_overbuild {
            p.enable_overbuild = false;
        }
        if let Some(grid) = self.grid {
            catalog.grid = match grid {
                GridArg::Fixed => GridSpec { kind: optiplan_core::model::GridKind::Fixed, ..catalog.grid },
                GridArg::Flex => GridSpec { kind: optiplan_core::model::GridKind::Flex, ..catalog.grid },
            };
        }
        Ok((graph, demands, catalog))
    }
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Plan document output path.
    #[arg(long, default_value = "plan.json")]
    out: PathBuf,
    /// Write the per-round grooming trace as CSV to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the bill of material as a standalone CSV to this path.
    #[arg(long)]
    bom_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    inputs: InputArgs,
    /// Comma-separated grooming thresholds, e.g. 0.1,0.5,1.0.
    #[arg(long, value_delimiter = ',', conflicts_with = "threshold_range")]
    thresholds: Option<Vec<f64>>,
    /// Threshold range start:end:step, e.g. 0.1:1.0:0.1.
    #[arg(long)]
    threshold_range: Option<String>,
    /// Sweep CSV output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Plan document to render.
    #[arg(long)]
    plan: PathBuf,
    /// Write the table as CSV instead of aligned text.
    #[arg(long)]
    csv: bool,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn write_out(path: Option<&PathBuf>, content: &str) -> Result<(), String> {
    match path {
        Some(p) => std::fs::write(p, content).map_err(|e| format!("io: {p:?}: {e}")),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn bom_csv(plan: &Plan) -> String {
    let mut out = String::from("kind,quantity,unit_cost,total_cost,unit_power,total_power\n");
    for l in &plan.bom.lines {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            l.kind,
            l.quantity,
            l.unit_cost,
            l.total_cost(),
            l.unit_power,
            l.total_power()
        ));
    }
    out
}

fn cmd_plan(args: &PlanArgs) -> Result<u8, String> {
    let (graph, demands, catalog) = args.inputs.load()?;
    let clp = build_clp_graph(&graph, &catalog);

    if let Some(trace_path) = &args.trace {
        let (_, trace) = design_with_trace(&clp, &demands, &catalog);
        let mut out = String::from("round,clp_id,load_gbps,capacity_gbps,kept\n");
        for r in &trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.round, r.clp_id, r.load_gbps, r.capacity_gbps, r.kept
            ));
        }
        std::fs::write(trace_path, out).map_err(|e| format!("io: {trace_path:?}: {e}"))?;
    }

    let outcome = plan_with_clp(&graph, &demands, &catalog, clp);
    let plan = &outcome.plan;
    std::fs::write(&args.out, plan.to_json()).map_err(|e| format!("io: {:?}: {e}", args.out))?;
    if let Some(p) = &args.bom_csv {
        std::fs::write(p, bom_csv(plan)).map_err(|e| format!("io: {p:?}: {e}"))?;
    }

    let m = &plan.metrics;
    println!("plan written to {}", args.out.display());
    println!(
        "lightpaths: {}  transponders: {}  served: {}  unserved: {}",
        m.lightpath_count, m.transponder_count, m.served_count, m.unserved_count
    );
    println!(
        "cost: {:.3} units  power: {:.1} W  allocated: {:.1} Gbps",
        m.cost_units, m.power_w, m.total_allocated_gbps
    );
    if m.fragmentation_applicable {
        println!("avg fragmentation: {:.4}", m.avg_fragmentation);
    } else {
        println!("avg fragmentation: n/a (fixed grid)");
    }
    if m.restoration_gap_count > 0 {
        println!("restoration gaps: {}", m.restoration_gap_count);
    }
    for u in &plan.unserved {
        println!("unserved {}: {}", u.demand_id, u.reason);
    }

    Ok(if plan.unserved.is_empty() { 0 } else { EXIT_UNSERVED })
}

fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("sweep: bad range {spec:?}, expected start:end:step"));
    }
    let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("sweep: {s:?}: {e}"));
    let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
    if step <= 0.0 || start <= 0.0 || end < start {
        return Err(format!("sweep: bad range {spec:?}"));
    }
    let mut out = Vec::new();
    let mut i = 0u32;
    loop {
        let t = start + f64::from(i) * step;
        if t > end + 1e-9 {
            break;
        }
        out.push((t * 1e9).round() / 1e9);
        i += 1;
    }
    Ok(out)
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "grooming_threshold,transponder_count,lightpath_count,cost_units,avg_fragmentation,unserved_count\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.grooming_threshold,
            r.transponder_count,
            r.lightpath_count,
            r.cost_units,
            r.avg_fragmentation,
            r.unserved_count
        ));
    }
    out
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8, String> {
    let (graph, demands, catalog) = args.inputs.load()?;
    let thresholds = match (&args.thresholds, &args.threshold_range) {
        (Some(list), _) if !list.is_empty() => list.clone(),
        (_, Some(range)) => parse_range(range)?,
        _ => return Err("sweep: provide --thresholds or --threshold-range".to_owned()),
    };
    for t in &thresholds {
        if !(*t > 0.0 && *t <= 1.0) {
            return Err(format!("sweep: threshold {t} out of range (0,1]"));
        }
    }
    let rows = sweep(&graph, &demands, &catalog, &thresholds);
    write_out(args.out.as_ref(), &sweep_csv(&rows))?;
    Ok(0)
}

/// Builds the allocation table: one row per (link, fiber instance) used or
/// referenced by the plan, one column per channel/slot index.
fn render_table(plan: &Plan) -> (Vec<String>, Vec<Vec<String>>, u32) {
    // cells[(link, instance)][unit] = lightpath id
    let mut cells: BTreeMap<(LinkId, u32), BTreeMap<u32, String>> = BTreeMap::new();
    let mut width = 0u32;
    for vl in &plan.virtual_topology {
        for l in &vl.route {
            cells.entry((l.clone(), 0)).or_default();
        }
    }
    for lp in &plan.lightpaths {
        for s in std::iter::once(&lp.spectrum).chain(lp.protection_spectrum.iter()) {
            let lo = s.channel.start();
            let hi = lo + s.channel.width();
            width = width.max(hi);
            for (l, i) in &s.fiber_instances {
                let row = cells.entry((l.clone(), *i)).or_default();
                for u in lo..hi {
                    row.insert(u, lp.id.as_str().to_owned());
                }
            }
        }
    }
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for ((l, i), row) in &cells {
        labels.push(if *i == 0 { l.to_string() } else { format!("{l}:{i}") });
        rows.push(
            (0..width)
                .map(|u| row.get(&u).cloned().unwrap_or_default())
                .collect(),
        );
    }
    (labels, rows, width)
}

fn cmd_render(args: &RenderArgs) -> Result<u8, String> {
    let text = std::fs::read_to_string(&args.plan)
        .map_err(|e| format!("io: {:?}: {e}", args.plan))?;
    let plan = Plan::from_json(&text).map_err(|e| format!("render: malformed plan: {e}"))?;
    let (labels, rows, width) = render_table(&plan);

    let mut out = String::new();
    if args.csv {
        out.push_str("link");
        for u in 0..width {
            out.push_str(&format!(",{u}"));
        }
        out.push('\n');
        for (label, row) in labels.iter().zip(&rows) {
            out.push_str(label);
            for cell in row {
                out.push(',');
                out.push_str(cell);
            }
            out.push('\n');
        }
    } else {
        let label_w = labels.iter().map(|l| l.len()).max().unwrap_or(4).max(4);
        let cell_w = rows
            .iter()
            .flatten()
            .map(|c| c.len())
            .max()
            .unwrap_or(1)
            .max(format!("{}", width.saturating_sub(1)).len());
        out.push_str(&format!("{:label_w$}", "link"));
        for u in 0..width {
            out.push_str(&format!(" {u:>cell_w$}"));
        }
        out.push('\n');
        for (label, row) in labels.iter().zip(&rows) {
            out.push_str(&format!("{label:label_w$}"));
            for cell in row {
                out.push_str(&format!(" {cell:>cell_w$}"));
            }
            out.push('\n');
        }
    }
    write_out(args.out.as_ref(), &out)?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Render(args) => cmd_render(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(message) => {
            eprintln!("{message}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
