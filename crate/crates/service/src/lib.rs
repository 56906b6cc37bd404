//! HTTP API over the workbench: datasets, recommendation, evaluation and
//! AutoML jobs, stored results, and questions about them.

pub mod config;
pub mod error;
pub mod jobs;
pub mod routes;
pub mod state;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::Router;
use tokio::net::TcpListener;

pub use config::{ConfigError, ServiceConfig};
pub use error::{codes, ApiError};
pub use jobs::{Job, JobKind, JobStatus};
pub use routes::router;
pub use state::{AppState, ServiceError};

/// A bound, not yet serving, instance.
pub struct Server {
    listener: TcpListener,
    router: Router,
    state: Arc<AppState>,
}

impl Server {
    /// Builds the state and binds `config.listen`. Must run inside a tokio runtime.
    pub async fn bind(config: ServiceConfig) -> Result<Self, ServiceError> {
        let listen = config.listen.clone();
        let state = AppState::new(config)?;
        let listener = TcpListener::bind(&listen).await?;
        Ok(Self { listener, router: router(Arc::clone(&state)), state })
    }

    pub fn local_addr(&self) -> std::io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    pub async fn run(self) -> std::io::Result<()> {
        axum::serve(self.listener, self.router).await
    }

    pub async fn run_until(self, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
        axum::serve(self.listener, self.router).with_graceful_shutdown(shutdown).await
    }
}
