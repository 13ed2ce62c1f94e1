use std::path::PathBuf;

use anyhow::Context;
use dungeon_service::{serve, Service, ServiceConfig};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();
    let path = std::env::args().nth(1).or_else(|| std::env::var("DUNGEON_CONFIG").ok()).map(PathBuf::from);
    let config = ServiceConfig::load(path.as_deref()).context("loading configuration")?;
    let port = config.port;
    let service = tokio::task::spawn_blocking(move || Service::open(config)).await??;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await.with_context(|| format!("binding port {port}"))?;
    serve(listener, service).await
}
