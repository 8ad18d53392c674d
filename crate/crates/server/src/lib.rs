//! HTTP service that provisions REST endpoints and their OpenAPI document
//! from the metamodels in a repository directory, without restarts.

pub mod config;
pub mod http;
pub mod provisioning;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::thread;

use modelforge_core::{AtomicFileStore, Repository};
use parking_lot::RwLock;
use thiserror::Error;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;
use tracing::warn;

pub use config::ServeConfig;
use http::AppState;
use provisioning::{Poller, Provisioner, Watcher};

#[derive(Debug, Error)]
pub enum StartError {
    #[error("repository directory {0} is not a readable directory")]
    RepoDir(String),
    #[error("cannot listen on {addr}: {cause}")]
    Bind { addr: String, cause: std::io::Error },
}

/// A running server. Dropping it leaves the listener running until the
/// runtime shuts down; call [`Server::shutdown`] to stop it explicitly.
#[derive(Debug)]
pub struct Server {
    addr: SocketAddr,
    state: AppState,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
    _watcher: Option<Watcher>,
}

impl Server {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn provisioner(&self) -> &Arc<Provisioner> {
        self.state.provisioner()
    }

    pub async fn shutdown(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        (&mut self.task).await.unwrap_or_else(|e| Err(std::io::Error::other(e)))
    }
}

fn start_watching(dir: &Path, config: &ServeConfig, provisioner: &Arc<Provisioner>) -> Option<Watcher> {
    match provisioning::watch(dir, config.debounce) {
        Ok((watcher, events)) => {
            let provisioner = Arc::clone(provisioner);
            thread::Builder::new()
                .name("provision".into())
                .spawn(move || {
                    for event in events {
                        provisioner.apply_change(&event);
                    }
                })
                .ok()?;
            Some(watcher)
        }
        Err(e) => {
            warn!(error = %e, "falling back to checking for metamodel changes on each request");
            None
        }
    }
}

/// Loads the repository, provisions every metamodel found and starts
/// listening. Metamodel changes are picked up while the server runs.
pub async fn start(config: &ServeConfig) -> Result<Server, StartError> {
    let dir = &config.repo_dir;
    if !dir.is_dir() {
        return Err(StartError::RepoDir(dir.display().to_string()));
    }
    let repo = Arc::new(RwLock::new(Repository::new(dir.clone(), Arc::new(AtomicFileStore))));
    let provisioner = Arc::new(Provisioner::new(repo, config.base_path.clone()));

    let watcher = if config.watch { start_watching(dir, config, &provisioner) } else { None };
    let poller = if watcher.is_some() {
        provisioner.provision_all(dir).map_err(|e| StartError::RepoDir(e.to_string()))?;
        None
    } else {
        Some(Poller::new(dir.clone()))
    };
    let state = AppState::new(config.base_path.clone(), Arc::clone(&provisioner), poller);
    state.poll();

    let addr = format!("{}:{}", config.host, config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|cause| StartError::Bind { addr: addr.clone(), cause })?;
    let local = listener.local_addr().map_err(|cause| StartError::Bind { addr, cause })?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = http::router(state.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(Server { addr: local, state, shutdown: Some(tx), task, _watcher: watcher })
}
