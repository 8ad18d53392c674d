//! On-disk model store and the CRUD operations over it.
//!
//! Layout: `{base}/{package}/{package}.ecore` next to any number of
//! `{base}/{package}/{model}.xmi`. Every mutation works on a draft copy of the
//! resource, is validated, serialized, written atomically and only then
//! swapped in, so a failed operation leaves memory and disk untouched.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;
use tracing::{debug, warn};

use crate::metamodel::{is_identifier, MetaClass, Metamodel, MetamodelError, Reference, RegistrySnapshot};
use crate::model::{ModelResource, ObjectId, Value};
use crate::validator::{validate_resource, ValidationReport};
use crate::xmi::{parse_model, serialize_model, FragmentPath, XmiError};

/// Where committed model bytes go. Swappable so tests can inject failures.
pub trait ModelStore: Send + Sync + fmt::Debug {
    fn write(&self, path: &Path, contents: &[u8]) -> io::Result<()>;
    fn remove(&self, path: &Path) -> io::Result<()>;
}

/// Writes a temp file in the target directory and renames it over the target.
#[derive(Debug, Default, Clone, Copy)]
pub struct AtomicFileStore;

impl ModelStore for AtomicFileStore {
    fn write(&self, path: &Path, contents: &[u8]) -> io::Result<()> {
        write_atomic(path, contents)
    }

    fn remove(&self, path: &Path) -> io::Result<()> {
        fs::remove_file(path)
    }
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new().prefix(".modelforge-").suffix(".tmp").tempfile_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoadCause {
    #[error("cannot read file: {0}")]
    Io(String),
    #[error("{0}")]
    Parse(XmiError),
    #[error("model does not conform ({} violations)", .0.violations.len())]
    Invalid(ValidationReport),
    #[error("no registered metamodel for this directory")]
    UnregisteredPackage,
    #[error("file stem is not an identifier")]
    BadModelName,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{}: {cause}", path.display())]
pub struct LoadError {
    pub package_name: String,
    pub model_name: Option<String>,
    pub path: PathBuf,
    pub cause: LoadCause,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RepositoryError {
    #[error("cannot read directory {}: {cause}", path.display())]
    DirectoryUnreadable { path: PathBuf, cause: String },
    #[error("unknown package `{0}`")]
    UnknownPackage(String),
    #[error("unknown class `{class}` in package `{package}`")]
    UnknownClass { package: String, class: String },
    #[error("unknown model `{model}` in package `{package}`")]
    UnknownModel { package: String, model: String },
    #[error("class `{class}` has no {kind} `{feature}`")]
    UnknownFeature { class: String, feature: String, kind: &'static str },
    #[error("{0}")]
    UnknownContainment(String),
    #[error("class `{0}` is abstract and cannot be instantiated")]
    AbstractClass(String),
    #[error("cannot parse `{raw}` as a value of `{feature}`")]
    ValueParse { feature: String, raw: String },
    #[error("no `{class}` matches {selector}")]
    ParentNotFound { class: String, selector: String },
    #[error("more than one `{class}` matches {selector}")]
    AmbiguousParent { class: String, selector: String },
    #[error("{0}")]
    AmbiguousContainment(String),
    #[error("no `{class}` matches {selector}")]
    TargetNotFound { class: String, selector: String },
    #[error("more than one `{class}` matches {selector}")]
    AmbiguousTarget { class: String, selector: String },
    #[error("`{class}` has no reference to `{field_type}` with an opposite")]
    NoOppositeReference { class: String, field_type: String },
    #[error("`{class}` has several references to `{field_type}` with an opposite")]
    AmbiguousReference { class: String, field_type: String },
    #[error("every `{class}` in `{containment}` is already referenced through `{feature}`")]
    NoCandidate { class: String, containment: String, feature: String },
    #[error("model root is a `{actual}`, not a `{expected}`")]
    RootClassMismatch { expected: String, actual: String },
    #[error("the model root cannot be deleted by attribute; delete the model instead")]
    RootDeletionForbidden,
    #[error("model `{model}` is offline: {cause}")]
    ModelOffline { model: String, cause: LoadCause },
    #[error("mutation rejected by validation ({} violations)", .0.violations.len())]
    ValidationRejected(ValidationReport),
    #[error("cannot write {}: {cause}", path.display())]
    IoFailure { path: PathBuf, cause: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl RepositoryError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RepositoryError::DirectoryUnreadable { .. } => "DIRECTORY_UNREADABLE",
            RepositoryError::UnknownPackage(_) => "UNKNOWN_PACKAGE",
            RepositoryError::UnknownClass { .. } => "UNKNOWN_CLASS",
            RepositoryError::UnknownModel { .. } => "UNKNOWN_MODEL",
            RepositoryError::UnknownFeature { .. } => "UNKNOWN_FEATURE",
            RepositoryError::UnknownContainment(_) => "UNKNOWN_CONTAINMENT",
            RepositoryError::AbstractClass(_) => "ABSTRACT_CLASS",
            RepositoryError::ValueParse { .. } => "VALUE_PARSE",
            RepositoryError::ParentNotFound { .. } => "PARENT_NOT_FOUND",
            RepositoryError::AmbiguousParent { .. } => "AMBIGUOUS_PARENT",
            RepositoryError::AmbiguousContainment(_) => "AMBIGUOUS_CONTAINMENT",
            RepositoryError::TargetNotFound { .. } => "TARGET_NOT_FOUND",
            RepositoryError::AmbiguousTarget { .. } => "AMBIGUOUS_TARGET",
            RepositoryError::NoOppositeReference { .. } => "NO_OPPOSITE_REFERENCE",
            RepositoryError::AmbiguousReference { .. } => "AMBIGUOUS_REFERENCE",
            RepositoryError::NoCandidate { .. } => "NO_CANDIDATE",
            RepositoryError::RootClassMismatch { .. } => "ROOT_CLASS_MISMATCH",
            RepositoryError::RootDeletionForbidden => "ROOT_DELETION_FORBIDDEN",
            RepositoryError::ModelOffline { .. } => "MODEL_OFFLINE",
            RepositoryError::ValidationRejected(_) => "VALIDATION_REJECTED",
            RepositoryError::IoFailure { .. } => "IO_FAILURE",
            RepositoryError::Internal(_) => "INTERNAL",
        }
    }
}

impl From<MetamodelError> for RepositoryError {
    fn from(e: MetamodelError) -> Self {
        match e {
            MetamodelError::UnknownPackage(p) => RepositoryError::UnknownPackage(p),
            MetamodelError::UnknownClass { package, class } => RepositoryError::UnknownClass { package, class },
            other => RepositoryError::Internal(other.to_string()),
        }
    }
}

pub type Result<T, E = RepositoryError> = std::result::Result<T, E>;

/// One object found by a read operation.
#[derive(Debug, Clone)]
pub struct Found<'r> {
    pub resource: &'r ModelResource,
    pub id: ObjectId,
    pub path: FragmentPath,
}

impl Found<'_> {
    pub fn model_name(&self) -> &str {
        self.resource.model_name()
    }
}

/// `(attributeName, attributeValue)` used to pick one instance.
pub type Selector<'a> = Option<(&'a str, &'a str)>;

type Key = (String, String);

#[derive(Debug)]
pub struct Repository {
    base_dir: PathBuf,
    resources: BTreeMap<Key, ModelResource>,
    offline: BTreeMap<Key, LoadError>,
    store: Arc<dyn ModelStore>,
}

/// Loads every registered package's models from `base_dir`.
pub fn load_repository(base_dir: &Path, snapshot: &RegistrySnapshot) -> Result<(Repository, Vec<LoadError>)> {
    Repository::load(base_dir, snapshot, Arc::new(AtomicFileStore))
}

fn key(package: &str, model: &str) -> Key {
    (package.to_owned(), model.to_owned())
}

fn unreadable(path: &Path, e: io::Error) -> RepositoryError {
    RepositoryError::DirectoryUnreadable { path: path.to_owned(), cause: e.to_string() }
}

/// Model files directly inside `dir`, sorted by name.
fn model_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "xmi") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn selector_text(selector: Selector<'_>) -> String {
    match selector {
        Some((attr, value)) => format!("{attr}={value:?}"),
        None => "without a selector".to_owned(),
    }
}

impl Repository {
    pub fn new(base_dir: impl Into<PathBuf>, store: Arc<dyn ModelStore>) -> Self {
        Repository { base_dir: base_dir.into(), resources: BTreeMap::new(), offline: BTreeMap::new(), store }
    }

    pub fn load(base_dir: &Path, snapshot: &RegistrySnapshot, store: Arc<dyn ModelStore>) -> Result<(Self, Vec<LoadError>)> {
        let mut repo = Repository::new(base_dir, store);
        let mut errors = Vec::new();
        let mut dirs: Vec<PathBuf> = Vec::new();
        for entry in fs::read_dir(base_dir).map_err(|e| unreadable(base_dir, e))? {
            let path = entry.map_err(|e| unreadable(base_dir, e))?.path();
            if path.is_dir() {
                dirs.push(path);
            }
        }
        dirs.sort();
        for dir in dirs {
            let Some(package) = dir.file_name().and_then(|n| n.to_str()).map(str::to_owned) else { continue };
            if snapshot.metamodel(&package).is_ok() {
                errors.extend(repo.reload_package(snapshot, &package)?);
                continue;
            }
            for path in model_files(&dir).map_err(|e| unreadable(&dir, e))? {
                let model_name = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned);
                errors.push(LoadError { package_name: package.clone(), model_name, path, cause: LoadCause::UnregisteredPackage });
            }
        }
        Ok((repo, errors))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn model_path(&self, package: &str, model: &str) -> PathBuf {
        self.base_dir.join(package).join(format!("{model}.xmi"))
    }

    /// Re-reads every model of `package` against its current metamodel.
    /// Files that fail to parse or validate are kept offline.
    pub fn reload_package(&mut self, snapshot: &RegistrySnapshot, package: &str) -> Result<Vec<LoadError>> {
        self.drop_package(package);
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        let dir = self.base_dir.join(package);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut errors = Vec::new();
        for path in model_files(&dir).map_err(|e| unreadable(&dir, e))? {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_owned();
            let fail = |cause| LoadError {
                package_name: package.to_owned(),
                model_name: Some(stem.clone()),
                path: path.clone(),
                cause,
            };
            if !is_identifier(&stem) {
                errors.push(fail(LoadCause::BadModelName));
                continue;
            }
            let loaded = fs::read(&path)
                .map_err(|e| LoadCause::Io(e.to_string()))
                .and_then(|bytes| parse_model(&bytes, &metamodel, &stem).map_err(LoadCause::Parse))
                .and_then(|resource| {
                    let report = validate_resource(&resource, &metamodel, snapshot.generation());
                    if report.is_clean() {
                        Ok(resource)
                    } else {
                        Err(LoadCause::Invalid(report))
                    }
                });
            match loaded {
                Ok(resource) => {
                    debug!(package, model = %stem, "model loaded");
                    self.resources.insert(key(package, &stem), resource);
                }
                Err(cause) => {
                    let error = fail(cause);
                    warn!(package, model = %stem, error = %error, "model offline");
                    self.offline.insert(key(package, &stem), error.clone());
                    errors.push(error);
                }
            }
        }
        Ok(errors)
    }

    /// Forgets a package's models; files are left alone.
    pub fn drop_package(&mut self, package: &str) {
        self.resources.retain(|(p, _), _| p != package);
        self.offline.retain(|(p, _), _| p != package);
    }

    pub fn resource(&self, package: &str, model: &str) -> Option<&ModelResource> {
        self.resources.get(&key(package, model))
    }

    pub fn offline_error(&self, package: &str, model: &str) -> Option<&LoadError> {
        self.offline.get(&key(package, model))
    }

    /// Online models of a package in name order.
    pub fn models<'a>(&'a self, package: &str) -> impl Iterator<Item = &'a ModelResource> + 'a {
        let package = package.to_owned();
        self.resources.iter().filter(move |((p, _), _)| *p == package).map(|(_, r)| r)
    }

    pub fn model_count(&self, package: &str) -> usize {
        self.models(package).count()
    }

    pub fn offline_models<'a>(&'a self, package: &str) -> impl Iterator<Item = &'a LoadError> + 'a {
        let package = package.to_owned();
        self.offline.iter().filter(move |((p, _), _)| *p == package).map(|(_, e)| e)
    }

    fn online(&self, package: &str, model: &str) -> Result<&ModelResource> {
        let model = model.strip_suffix(".xmi").unwrap_or(model);
        if let Some(resource) = self.resources.get(&key(package, model)) {
            return Ok(resource);
        }
        match self.offline.get(&key(package, model)) {
            Some(e) => Err(RepositoryError::ModelOffline { model: model.to_owned(), cause: e.cause.clone() }),
            None => Err(RepositoryError::UnknownModel { package: package.to_owned(), model: model.to_owned() }),
        }
    }

    // ---- reads -----------------------------------------------------------

    /// Every instance of `class` (or a subtype) across the package's models,
    /// by model name and then document order.
    pub fn read_all_instances<'r>(&'r self, snapshot: &RegistrySnapshot, package: &str, class: &str) -> Result<Vec<Found<'r>>> {
        snapshot.resolve_class(package, class)?;
        let mut out = Vec::new();
        for resource in self.models(package) {
            for (id, path) in resource.instances_of(class) {
                out.push(Found { resource, id, path });
            }
        }
        Ok(out)
    }

    /// Instances of `class` held directly in a containment slot named
    /// `containment` whose `attribute` renders canonically as `value`.
    pub fn search<'r>(
        &'r self,
        snapshot: &RegistrySnapshot,
        package: &str,
        class: &str,
        containment: &str,
        attribute: &str,
        value: &str,
    ) -> Result<Vec<Found<'r>>> {
        let metamodel = snapshot.metamodel(package)?;
        let meta_class = snapshot.resolve_class(package, class)?;
        require_attribute(metamodel, meta_class, attribute)?;
        let declared = metamodel.classes.iter().any(|c| {
            c.references.iter().any(|r| r.containment && r.name == containment && metamodel.is_subtype_of(meta_class, &r.target))
        });
        if !declared {
            return Err(RepositoryError::UnknownContainment(format!(
                "no containment `{containment}` in package `{package}` holds `{class}`"
            )));
        }
        let mut out = Vec::new();
        for resource in self.models(package) {
            for (id, path) in resource.instances_of(class) {
                let in_slot = path.last().is_some_and(|s| s.feature == containment);
                let hit = resource.object(id).and_then(|o| o.attribute(attribute)).is_some_and(|v| v.matches(value));
                if in_slot && hit {
                    out.push(Found { resource, id, path });
                }
            }
        }
        Ok(out)
    }

    // ---- mutations -------------------------------------------------------

    /// Creates a `child_class` object inside a `parent_class` instance.
    #[allow(clippy::too_many_arguments)]
    pub fn add_new_element(
        &mut self,
        snapshot: &RegistrySnapshot,
        package: &str,
        parent_class: &str,
        child_class: &str,
        model: &str,
        attributes: &[(String, String)],
        parent_selector: Selector<'_>,
        containment: Option<&str>,
    ) -> Result<FragmentPath> {
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        let parent_meta = metamodel.resolve_class(parent_class).map_err(|_| unknown_class(package, parent_class))?;
        let child_meta = concrete(&metamodel, package, child_class)?;
        let resource = self.online(package, model)?;
        let values = parse_attributes(&metamodel, child_meta, attributes)?;
        let slot = pick_containment(&metamodel, parent_meta, child_meta, containment)?;
        let parent = match parent_selector {
            None if resource.class_of(resource.root_id()).is_some_and(|c| metamodel.is_subtype_of(c, parent_class)) => {
                resource.root_id()
            }
            _ => select_one(&metamodel, resource, parent_meta, parent_selector, Pick::Parent)?,
        };

        let mut draft = resource.clone();
        let (_, path) = attach_new(&mut draft, &metamodel, parent, slot, child_class, values);
        self.commit_draft(snapshot, draft)?;
        Ok(path)
    }

    /// Links the first unreferenced `child_class` object found in the root's
    /// `child_containment` into `parent_reference` of the matched instance.
    #[allow(clippy::too_many_arguments)]
    pub fn add_existing(
        &mut self,
        snapshot: &RegistrySnapshot,
        package: &str,
        class: &str,
        model: &str,
        parent_reference: &str,
        match_attribute: &str,
        match_value: &str,
        child_class: &str,
        child_containment: &str,
    ) -> Result<FragmentPath> {
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        let meta_class = metamodel.resolve_class(class).map_err(|_| unknown_class(package, class))?;
        metamodel.resolve_class(child_class).map_err(|_| unknown_class(package, child_class))?;
        let resource = self.online(package, model)?;
        require_attribute(&metamodel, meta_class, match_attribute)?;
        let reference = metamodel
            .feature(meta_class, parent_reference)
            .ok()
            .flatten()
            .and_then(|f| f.as_cross_reference())
            .ok_or_else(|| RepositoryError::UnknownFeature {
                class: class.to_owned(),
                feature: parent_reference.to_owned(),
                kind: "non-containment reference",
            })?;
        let root_class = resource.class_of(resource.root_id()).ok_or_else(|| RepositoryError::Internal("root class vanished".into()))?;
        let holds = metamodel.feature(root_class, child_containment).ok().flatten().and_then(|f| f.as_containment()).is_some();
        if !holds {
            return Err(RepositoryError::UnknownContainment(format!(
                "root class `{}` has no containment `{child_containment}`",
                root_class.name
            )));
        }
        let parent = select_one(&metamodel, resource, meta_class, Some((match_attribute, match_value)), Pick::Parent)?;

        let referenced: HashSet<ObjectId> = resource
            .document_order()
            .iter()
            .filter_map(|(o, _)| resource.object(*o))
            .flat_map(|o| o.referenced(&reference.name).iter().copied())
            .collect();
        let candidate = resource
            .root()
            .contained(child_containment)
            .iter()
            .copied()
            .filter(|&id| resource.class_of(id).is_some_and(|c| metamodel.is_subtype_of(c, child_class)))
            .find(|id| !referenced.contains(id))
            .ok_or_else(|| RepositoryError::NoCandidate {
                class: child_class.to_owned(),
                containment: child_containment.to_owned(),
                feature: reference.name.clone(),
            })?;

        let mut draft = resource.clone();
        link(&mut draft, &metamodel, parent, reference, candidate);
        let path = draft.path_of(parent).expect("parent is reachable");
        self.commit_draft(snapshot, draft)?;
        Ok(path)
    }

    /// Creates a `child_class` object whose opposite-bearing reference to
    /// `field_type` points at the selected `parent_class` instance.
    #[allow(clippy::too_many_arguments)]
    pub fn add_with_opposite(
        &mut self,
        snapshot: &RegistrySnapshot,
        package: &str,
        parent_class: &str,
        child_class: &str,
        model: &str,
        field_type: &str,
        attributes: &[(String, String)],
        target_selector: Selector<'_>,
    ) -> Result<FragmentPath> {
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        let target_meta = metamodel.resolve_class(parent_class).map_err(|_| unknown_class(package, parent_class))?;
        let child_meta = concrete(&metamodel, package, child_class)?;
        let resource = self.online(package, model)?;
        let values = parse_attributes(&metamodel, child_meta, attributes)?;

        let features = metamodel.all_features(child_meta)?;
        let candidates: Vec<&Reference> = features
            .iter()
            .filter_map(|f| f.as_cross_reference())
            .filter(|r| r.target == field_type && r.opposite.is_some())
            .collect();
        let no_opposite = || RepositoryError::NoOppositeReference { class: child_class.to_owned(), field_type: field_type.to_owned() };
        let reference = match candidates.as_slice() {
            [] => return Err(no_opposite()),
            [one] => *one,
            _ => return Err(RepositoryError::AmbiguousReference { class: child_class.to_owned(), field_type: field_type.to_owned() }),
        };
        if !metamodel.is_subtype_of(target_meta, field_type) {
            return Err(no_opposite());
        }
        let opposite = opposite_reference(&metamodel, reference).ok_or_else(no_opposite)?;
        let target = select_one(&metamodel, resource, target_meta, target_selector, Pick::Target)?;

        let (parent, slot) = if opposite.containment {
            (target, opposite)
        } else {
            let root = resource.root_id();
            let root_meta = resource.class_of(root).expect("root class resolves");
            match pick_containment(&metamodel, root_meta, child_meta, None) {
                Ok(slot) => (root, slot),
                Err(RepositoryError::UnknownContainment(_)) => (target, pick_containment(&metamodel, target_meta, child_meta, None)?),
                Err(e) => return Err(e),
            }
        };

        let mut draft = resource.clone();
        let (child, path) = attach_new(&mut draft, &metamodel, parent, slot, child_class, values);
        if !opposite.containment {
            link(&mut draft, &metamodel, child, reference, target);
        }
        self.commit_draft(snapshot, draft)?;
        Ok(path)
    }

    /// Sets `attribute` to `updated` on every instance whose current value
    /// matches `value`. Nothing is written when nothing matches.
    #[allow(clippy::too_many_arguments)]
    pub fn update_by_attribute(
        &mut self,
        snapshot: &RegistrySnapshot,
        package: &str,
        class: &str,
        model: &str,
        attribute: &str,
        value: &str,
        updated: &str,
    ) -> Result<usize> {
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        let meta_class = metamodel.resolve_class(class).map_err(|_| unknown_class(package, class))?;
        let resource = self.online(package, model)?;
        let data_type = require_attribute(&metamodel, meta_class, attribute)?;
        let new_value = Value::parse(data_type, updated)
            .map_err(|_| RepositoryError::ValueParse { feature: attribute.to_owned(), raw: updated.to_owned() })?;
        let hits = matching(resource, class, attribute, value);
        if hits.is_empty() {
            return Ok(0);
        }
        let mut draft = resource.clone();
        for id in &hits {
            draft.object_mut(*id).expect("hit exists").attributes.insert(attribute.to_owned(), new_value.clone());
        }
        draft.mark_dirty();
        self.commit_draft(snapshot, draft)?;
        Ok(hits.len())
    }

    /// Removes every matching instance with its containment subtree and
    /// scrubs all references to removed objects.
    pub fn delete_by_attribute(
        &mut self,
        snapshot: &RegistrySnapshot,
        package: &str,
        class: &str,
        model: &str,
        attribute: &str,
        value: &str,
    ) -> Result<usize> {
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        let meta_class = metamodel.resolve_class(class).map_err(|_| unknown_class(package, class))?;
        let resource = self.online(package, model)?;
        require_attribute(&metamodel, meta_class, attribute)?;
        let hits = matching(resource, class, attribute, value);
        if hits.contains(&resource.root_id()) {
            return Err(RepositoryError::RootDeletionForbidden);
        }
        if hits.is_empty() {
            return Ok(0);
        }
        let mut draft = resource.clone();
        draft.delete_subtrees(&hits);
        draft.mark_dirty();
        self.commit_draft(snapshot, draft)?;
        Ok(hits.len())
    }

    /// Deletes a model file whose root is a `class`.
    pub fn delete_model(&mut self, snapshot: &RegistrySnapshot, package: &str, class: &str, model: &str) -> Result<String> {
        let metamodel = Arc::clone(snapshot.metamodel(package)?);
        metamodel.resolve_class(class).map_err(|_| unknown_class(package, class))?;
        let resource = self.online(package, model)?;
        let actual = &resource.root().class_name;
        if !metamodel.is_subtype_name_of(actual, class) {
            return Err(RepositoryError::RootClassMismatch { expected: class.to_owned(), actual: actual.clone() });
        }
        let name = resource.model_name().to_owned();
        let path = self.model_path(package, &name);
        self.store.remove(&path).map_err(|e| RepositoryError::IoFailure { path: path.clone(), cause: e.to_string() })?;
        self.resources.remove(&key(package, &name));
        Ok(name)
    }

    /// Writes a dirty resource back to disk. Clean resources are left alone.
    pub fn commit(&mut self, package: &str, model: &str) -> Result<bool> {
        let resource = self.online(package, model)?;
        if !resource.is_dirty() {
            return Ok(false);
        }
        let text = serialize_model(resource).map_err(|e| RepositoryError::Internal(e.to_string()))?;
        let path = self.model_path(package, resource.model_name());
        self.store.write(&path, text.as_bytes()).map_err(|e| RepositoryError::IoFailure { path, cause: e.to_string() })?;
        let name = resource.model_name().to_owned();
        self.resources.get_mut(&key(package, &name)).expect("resource present").mark_clean();
        Ok(true)
    }

    /// Direct access for callers that stage their own edits before [`Repository::commit`].
    pub fn resource_mut(&mut self, package: &str, model: &str) -> Option<&mut ModelResource> {
        self.resources.get_mut(&key(package, model))
    }

    /// Validate, serialize, write, then swap in the re-parsed canonical form.
    fn commit_draft(&mut self, snapshot: &RegistrySnapshot, draft: ModelResource) -> Result<()> {
        let metamodel = Arc::clone(draft.metamodel());
        let report = validate_resource(&draft, &metamodel, snapshot.generation());
        if !report.is_clean() {
            return Err(RepositoryError::ValidationRejected(report));
        }
        let text = serialize_model(&draft).map_err(|e| RepositoryError::Internal(e.to_string()))?;
        let canonical =
            parse_model(text.as_bytes(), &metamodel, draft.model_name()).map_err(|e| RepositoryError::Internal(e.to_string()))?;
        let package = draft.package_name().to_owned();
        let path = self.model_path(&package, draft.model_name());
        self.store
            .write(&path, text.as_bytes())
            .map_err(|e| RepositoryError::IoFailure { path: path.clone(), cause: e.to_string() })?;
        self.resources.insert(key(&package, draft.model_name()), canonical);
        Ok(())
    }
}

fn unknown_class(package: &str, class: &str) -> RepositoryError {
    RepositoryError::UnknownClass { package: package.to_owned(), class: class.to_owned() }
}

fn concrete<'m>(metamodel: &'m Metamodel, package: &str, class: &str) -> Result<&'m MetaClass> {
    let meta = metamodel.resolve_class(class).map_err(|_| unknown_class(package, class))?;
    if meta.is_abstract {
        return Err(RepositoryError::AbstractClass(class.to_owned()));
    }
    Ok(meta)
}

fn require_attribute(metamodel: &Metamodel, class: &MetaClass, name: &str) -> Result<crate::metamodel::DataType> {
    metamodel
        .feature(class, name)?
        .and_then(|f| f.as_attribute())
        .map(|a| a.data_type)
        .ok_or_else(|| RepositoryError::UnknownFeature { class: class.name.clone(), feature: name.to_owned(), kind: "attribute" })
}

fn parse_attributes(metamodel: &Metamodel, class: &MetaClass, raw: &[(String, String)]) -> Result<Vec<(String, Value)>> {
    raw.iter()
        .map(|(name, text)| {
            let data_type = require_attribute(metamodel, class, name)?;
            let value = Value::parse(data_type, text)
                .map_err(|_| RepositoryError::ValueParse { feature: name.clone(), raw: text.clone() })?;
            Ok((name.clone(), value))
        })
        .collect()
}

/// The containment of `parent` that receives a `child`: the named one, or the
/// single one whose element type accepts the child.
fn pick_containment<'m>(
    metamodel: &'m Metamodel,
    parent: &'m MetaClass,
    child: &MetaClass,
    named: Option<&str>,
) -> Result<&'m Reference> {
    let features = metamodel.all_features(parent)?;
    let accepting: Vec<&Reference> = features
        .iter()
        .filter_map(|f| f.as_containment())
        .filter(|r| metamodel.is_subtype_of(child, &r.target))
        .filter(|r| named.is_none_or(|n| r.name == n))
        .collect();
    match (accepting.as_slice(), named) {
        ([one], _) => Ok(one),
        ([], Some(n)) => Err(RepositoryError::UnknownContainment(format!(
            "`{}` has no containment `{n}` accepting `{}`",
            parent.name, child.name
        ))),
        ([], None) => Err(RepositoryError::UnknownContainment(format!(
            "no containment of `{}` accepts `{}`",
            parent.name, child.name
        ))),
        (many, _) => Err(RepositoryError::AmbiguousContainment(format!(
            "`{}` can hold `{}` in {}; name one with `_containment`",
            parent.name,
            child.name,
            many.iter().map(|r| format!("`{}`", r.name)).collect::<Vec<_>>().join(", ")
        ))),
    }
}

#[derive(Clone, Copy)]
enum Pick {
    Parent,
    Target,
}

/// The unique instance of `class`, optionally filtered by an attribute match.
fn select_one(
    metamodel: &Metamodel,
    resource: &ModelResource,
    class: &MetaClass,
    selector: Selector<'_>,
    pick: Pick,
) -> Result<ObjectId> {
    if let Some((attribute, _)) = selector {
        require_attribute(metamodel, class, attribute)?;
    }
    let hits: Vec<ObjectId> = match selector {
        Some((attribute, value)) => matching(resource, &class.name, attribute, value),
        None => resource.instances_of(&class.name).into_iter().map(|(id, _)| id).collect(),
    };
    let (class, selector) = (class.name.clone(), selector_text(selector));
    match (hits.as_slice(), pick) {
        ([one], _) => Ok(*one),
        ([], Pick::Parent) => Err(RepositoryError::ParentNotFound { class, selector }),
        ([], Pick::Target) => Err(RepositoryError::TargetNotFound { class, selector }),
        (_, Pick::Parent) => Err(RepositoryError::AmbiguousParent { class, selector }),
        (_, Pick::Target) => Err(RepositoryError::AmbiguousTarget { class, selector }),
    }
}

/// Reachable instances of `class` whose `attribute` matches `value`, in document order.
fn matching(resource: &ModelResource, class: &str, attribute: &str, value: &str) -> Vec<ObjectId> {
    resource
        .instances_of(class)
        .into_iter()
        .map(|(id, _)| id)
        .filter(|id| resource.object(*id).and_then(|o| o.attribute(attribute)).is_some_and(|v| v.matches(value)))
        .collect()
}

fn opposite_reference<'m>(metamodel: &'m Metamodel, reference: &Reference) -> Option<&'m Reference> {
    let target = metamodel.class(&reference.target)?;
    metamodel.feature(target, reference.opposite.as_deref()?).ok().flatten()?.as_reference()
}

/// Creates a child in `slot` of `parent`, sets the container's back-reference
/// if the containment has an opposite, and returns the child's path.
fn attach_new(
    draft: &mut ModelResource,
    metamodel: &Metamodel,
    parent: ObjectId,
    slot: &Reference,
    class: &str,
    values: Vec<(String, Value)>,
) -> (ObjectId, FragmentPath) {
    let child = draft.create_object(class);
    draft.object_mut(child).expect("fresh object").attributes.extend(values);
    let parent_obj = draft.object_mut(parent).expect("parent exists");
    let siblings = parent_obj.slot_mut(&slot.name, true);
    siblings.push(child);
    let index = siblings.len() - 1;
    if let Some(back) = opposite_reference(metamodel, slot) {
        draft.object_mut(child).expect("fresh object").slot_mut(&back.name, false).push(parent);
    }
    draft.mark_dirty();
    let path = draft.path_of(parent).expect("parent is reachable").child(&slot.name, index);
    (child, path)
}

/// Appends `target` to `source.reference` and `source` to the opposite slot.
fn link(draft: &mut ModelResource, metamodel: &Metamodel, source: ObjectId, reference: &Reference, target: ObjectId) {
    draft.object_mut(source).expect("source exists").slot_mut(&reference.name, false).push(target);
    if let Some(back) = opposite_reference(metamodel, reference) {
        let slot = draft.object_mut(target).expect("target exists").slot_mut(&back.name, back.containment);
        if !slot.contains(&source) {
            slot.push(source);
        }
    }
    draft.mark_dirty();
}
