//! Turns metamodel files into live registry entries, routes and API
//! documentation while the service keeps running.

pub mod openapi;
pub mod routes;
pub mod watch;

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arc_swap::ArcSwap;
use modelforge_core::xmi::parse_metamodel;
use modelforge_core::{LoadError, MetamodelRegistry, RegistrySnapshot, Repository, RepositoryError};
use parking_lot::{Mutex, RwLock};
use tracing::{info, warn};

pub use openapi::build_api_document;
pub use routes::{build_route_table, Method, OperationKind, Route, RouteTable};
pub use watch::{watch, Poller, Watcher, WatcherUnavailable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    Added,
    Modified,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeEvent {
    pub kind: ChangeKind,
    pub package_name: String,
    pub source_path: PathBuf,
}

impl ChangeEvent {
    /// Event for a metamodel file path of the form `<dir>/<dir>.ecore`.
    pub fn for_path(kind: ChangeKind, path: &Path) -> Self {
        let package_name =
            path.parent().and_then(|d| d.file_name()).and_then(|n| n.to_str()).unwrap_or_default().to_owned();
        ChangeEvent { kind, package_name, source_path: path.to_owned() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProvisionOutcome {
    Swapped(u64),
    Rejected(Vec<String>),
    Removed(u64),
}

impl ProvisionOutcome {
    pub fn name(&self) -> &'static str {
        match self {
            ProvisionOutcome::Swapped(_) => "Swapped",
            ProvisionOutcome::Rejected(_) => "Rejected",
            ProvisionOutcome::Removed(_) => "Removed",
        }
    }
}

impl fmt::Display for ProvisionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProvisionOutcome::Rejected(defects) => write!(f, "Rejected({})", defects.join("; ")),
            ProvisionOutcome::Swapped(g) | ProvisionOutcome::Removed(g) => write!(f, "{}({g})", self.name()),
        }
    }
}

/// `*.ecore` files one level below `base`, sorted.
pub fn scan(base: &Path) -> Result<Vec<PathBuf>, RepositoryError> {
    let unreadable = |e: std::io::Error| RepositoryError::DirectoryUnreadable { path: base.to_owned(), cause: e.to_string() };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(base).map_err(unreadable)? {
        let dir = entry.map_err(unreadable)?.path();
        if !dir.is_dir() {
            continue;
        }
        let Ok(files) = std::fs::read_dir(&dir) else { continue };
        for file in files.filter_map(|f| f.ok()).map(|f| f.path()) {
            if file.extension().is_some_and(|e| e == "ecore") && file.is_file() {
                out.push(file);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Everything a request needs from one generation, published as a unit.
#[derive(Debug)]
pub struct Published {
    pub registry: RegistrySnapshot,
    pub routes: RouteTable,
    pub document: Vec<u8>,
}

impl Published {
    pub fn build(registry: RegistrySnapshot, base_path: &str) -> Self {
        let routes = build_route_table(&registry);
        let document = serde_json::to_vec(&openapi::describe(&registry, &routes, base_path)).expect("document serializes");
        Published { registry, routes, document }
    }

    pub fn generation(&self) -> u64 {
        self.registry.generation()
    }
}

/// Single writer for the registry. Holds the repository lock while swapping
/// so that readers see models and routes of the same generation.
#[derive(Debug)]
pub struct Provisioner {
    base_path: String,
    registry: Mutex<MetamodelRegistry>,
    repo: Arc<RwLock<Repository>>,
    published: ArcSwap<Published>,
    last_load_errors: Mutex<Vec<LoadError>>,
}

impl Provisioner {
    pub fn new(repo: Arc<RwLock<Repository>>, base_path: impl Into<String>) -> Self {
        let base_path = base_path.into();
        let registry = MetamodelRegistry::new();
        let published = ArcSwap::from_pointee(Published::build(registry.snapshot(), &base_path));
        Provisioner { base_path, registry: Mutex::new(registry), repo, published, last_load_errors: Mutex::new(Vec::new()) }
    }

    pub fn repository(&self) -> &Arc<RwLock<Repository>> {
        &self.repo
    }

    /// The current generation. Take the repository lock first when the
    /// models must match it.
    pub fn published(&self) -> Arc<Published> {
        self.published.load_full()
    }

    /// Load errors from the most recent swap.
    pub fn last_load_errors(&self) -> Vec<LoadError> {
        self.last_load_errors.lock().clone()
    }

    pub fn apply_change(&self, event: &ChangeEvent) -> ProvisionOutcome {
        let mut registry = self.registry.lock();
        let outcome = match event.kind {
            ChangeKind::Added | ChangeKind::Modified => self.swap(&mut registry, event),
            ChangeKind::Removed => self.remove(&mut registry, &event.package_name),
        };
        let generation = registry.generation();
        match &outcome {
            ProvisionOutcome::Rejected(defects) => {
                warn!(package = %event.package_name, outcome = outcome.name(), generation, defects = ?defects, "provision")
            }
            _ => info!(package = %event.package_name, outcome = outcome.name(), generation, "provision"),
        }
        outcome
    }

    fn swap(&self, registry: &mut MetamodelRegistry, event: &ChangeEvent) -> ProvisionOutcome {
        let expected = &event.package_name;
        let stem = event.source_path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        if stem != expected {
            return ProvisionOutcome::Rejected(vec![format!("metamodel file must be named {expected}.ecore")]);
        }
        let bytes = match std::fs::read(&event.source_path) {
            Ok(b) => b,
            Err(e) => return ProvisionOutcome::Rejected(vec![format!("cannot read {}: {e}", event.source_path.display())]),
        };
        let metamodel = match parse_metamodel(&bytes) {
            Ok(m) => m,
            Err(e) => return ProvisionOutcome::Rejected(vec![e.to_string()]),
        };
        if &metamodel.package_name != expected {
            return ProvisionOutcome::Rejected(vec![format!(
                "package `{}` must live in a directory named `{}`",
                metamodel.package_name, metamodel.package_name
            )]);
        }

        let mut next = registry.clone();
        let generation = next.insert(metamodel);
        let snapshot = next.snapshot();
        let published = Arc::new(Published::build(snapshot.clone(), &self.base_path));
        let mut repo = self.repo.write();
        let errors = match repo.reload_package(&snapshot, expected) {
            Ok(errors) => errors,
            Err(e) => {
                warn!(package = %expected, error = %e, "cannot read package directory");
                Vec::new()
            }
        };
        for e in &errors {
            warn!(package = %expected, error = %e, "model offline");
        }
        self.published.store(published);
        drop(repo);
        *registry = next;
        *self.last_load_errors.lock() = errors;
        ProvisionOutcome::Swapped(generation)
    }

    fn remove(&self, registry: &mut MetamodelRegistry, package: &str) -> ProvisionOutcome {
        if !registry.contains(package) {
            return ProvisionOutcome::Rejected(vec![format!("package `{package}` is not registered")]);
        }
        let mut next = registry.clone();
        next.remove(package);
        let generation = next.generation();
        let published = Arc::new(Published::build(next.snapshot(), &self.base_path));
        let mut repo = self.repo.write();
        repo.drop_package(package);
        self.published.store(published);
        drop(repo);
        *registry = next;
        ProvisionOutcome::Removed(generation)
    }

    /// Applies an `Added` event for every metamodel currently on disk.
    pub fn provision_all(&self, base: &Path) -> Result<Vec<ProvisionOutcome>, RepositoryError> {
        Ok(scan(base)?.iter().map(|p| self.apply_change(&ChangeEvent::for_path(ChangeKind::Added, p))).collect())
    }
}
