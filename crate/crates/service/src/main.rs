use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use optiplan_service::{router, Service, ServiceConfig, Snapshot};

struct Args {
    topology: PathBuf,
    catalog: PathBuf,
    listen: String,
    offer_ttl_secs: u64,
    snapshot: Option<PathBuf>,
    expose_routes: bool,
}

fn usage() -> ! {
    eprintln!(
        "usage: optiplan-serve --topology FILE --catalog FILE [--listen ADDR] \
         [--offer-ttl SECS] [--snapshot FILE] [--expose-routes]"
    );
    std::process::exit(2);
}

fn parse_args() -> Args {
    let mut topology = None;
    let mut catalog = None;
    let mut listen = "127.0.0.1:8080".to_owned();
    let mut offer_ttl_secs = 60;
    let mut snapshot = None;
    let mut expose_routes = false;
    let mut it = std::env::args().skip(1);
    while let Some(flag) = it.next() {
        let mut value = || it.next().unwrap_or_else(|| usage());
        match flag.as_str() {
            "--topology" => topology = Some(PathBuf::from(value())),
            "--catalog" => catalog = Some(PathBuf::from(value())),
            "--listen" => listen = value(),
            "--offer-ttl" => {
                offer_ttl_secs = value().parse().unwrap_or_else(|_| usage())
            }
            "--snapshot" => snapshot = Some(PathBuf::from(value())),
            "--expose-routes" => expose_routes = true,
            _ => usage(),
        }
    }
    match (topology, catalog) {
        (Some(topology), Some(catalog)) => Args {
            topology,
            catalog,
            listen,
            offer_ttl_secs,
            snapshot,
            expose_routes,
        },
        _ => usage(),
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = parse_args();
    let graph = match optiplan_core::ingest::load_topology(&args.topology) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let catalog = match optiplan_core::ingest::load_catalog(&args.catalog) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let config = ServiceConfig {
        offer_ttl: Duration::from_secs(args.offer_ttl_secs),
        expose_routes: args.expose_routes,
    };
    let service = Service::new(graph, catalog, config);

    if let Some(path) = &args.snapshot {
        if path.exists() {
            match std::fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|s| {
                    serde_json::from_str::<Snapshot>(&s).map_err(|e| e.to_string())
                }) {
                Ok(snapshot) => {
                    service.restore(snapshot);
                    eprintln!("restored state from {}", path.display());
                }
                Err(e) => {
                    eprintln!("error: snapshot {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            }
        }
    }

    let listener = match tokio::net::TcpListener::bind(&args.listen).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: bind {}: {e}", args.listen);
            return ExitCode::from(2);
        }
    };
    eprintln!("listening on {}", args.listen);

    let app = router(service.clone());
    let snapshot_path = args.snapshot.clone();
    let shutdown_service = service.clone();
    let result = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    if let Err(e) = result {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    if let Some(path) = snapshot_path {
        let snapshot = shutdown_service.snapshot();
        match serde_json::to_string_pretty(&snapshot) {
            Ok(body) => {
                if let Err(e) = std::fs::write(&path, body + "\n") {
                    eprintln!("error: writing snapshot {}: {e}", path.display());
                    return ExitCode::from(1);
                }
                eprintln!("saved state to {}", path.display());
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
    }
    ExitCode::SUCCESS
}
