//! Consultation service: a JSON-over-HTTP front end to live classification
//! sessions, with an append-only journal so sessions survive restarts.

pub mod api;
pub mod journal;
pub mod store;

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::Arc;

use axum::Router;
use tower_http::services::ServeDir;

pub use api::router;
pub use store::Store;

pub const ENV_PORT: &str = "CLASSTREE_PORT";
pub const ENV_DATA: &str = "CLASSTREE_DATA";
pub const ENV_UI: &str = "CLASSTREE_UI";
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    pub host: IpAddr,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Built UI bundle served at `/` when present.
    pub ui_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("data"),
            ui_dir: None,
        }
    }
}

impl ServiceConfig {
    /// Defaults overridden by `CLASSTREE_PORT`, `CLASSTREE_DATA` and
    /// `CLASSTREE_UI`.
    pub fn from_env() -> Result<Self, String> {
        let mut config = Self::default();
        if let Ok(port) = std::env::var(ENV_PORT) {
            config.port = port
                .parse()
                .map_err(|_| format!("{ENV_PORT}={port:?} is not a port number"))?;
        }
        if let Ok(dir) = std::env::var(ENV_DATA) {
            config.data_dir = dir.into();
        }
        if let Ok(dir) = std::env::var(ENV_UI) {
            config.ui_dir = Some(dir.into());
        }
        Ok(config)
    }
}

/// Router with the API and, if configured, the static UI as fallback.
pub fn app(store: Arc<Store>, ui_dir: Option<&PathBuf>) -> Router {
    let api = router(store);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Opens the journal, binds and serves until the process is stopped.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let store = Arc::new(Store::open(&config.data_dir)?);
    let listener = tokio::net::TcpListener::bind(SocketAddr::new(config.host, config.port)).await?;
    eprintln!(
        "listening on http://{} (data in {})",
        listener.local_addr()?,
        config.data_dir.display()
    );
    axum::serve(listener, app(store, config.ui_dir.as_ref())).await
}
