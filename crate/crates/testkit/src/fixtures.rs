//! Metamodel and model documents shared by the test suites.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use modelforge_core::xmi::{parse_metamodel, parse_model};
use modelforge_core::{Metamodel, ModelResource};

pub const LIBRARY_ECORE: &str = include_str!("../../core/fixtures/library.ecore");
pub const ALEXANDRIA_XMI: &str = include_str!("../../core/fixtures/alexandria.xmi");
/// Library with `Library.name` required.
pub const LIBRARY_STRICT_ECORE: &str = include_str!("../../core/fixtures/library_strict.ecore");
/// Library plus a `Magazine` class held in `Library.magazines`.
pub const LIBRARY_V2_ECORE: &str = include_str!("../../core/fixtures/library_v2.ecore");
/// Library where `Book` and `Member` extend each other.
pub const LIBRARY_CYCLIC_ECORE: &str = include_str!("../../core/fixtures/library_cyclic.ecore");
/// Abstract `Item`, `Novel extends Book`, and two `Member` containments.
pub const BRANCH_ECORE: &str = include_str!("../../core/fixtures/branch.ecore");
pub const DOWNTOWN_XMI: &str = include_str!("../../core/fixtures/downtown.xmi");
pub const ZOO_ECORE: &str = include_str!("../../core/fixtures/zoo.ecore");
pub const SAVANNA_XMI: &str = include_str!("../../core/fixtures/savanna.xmi");

pub fn metamodel(text: &str) -> Arc<Metamodel> {
    Arc::new(parse_metamodel(text.as_bytes()).expect("fixture metamodel parses"))
}

pub fn library() -> Arc<Metamodel> {
    metamodel(LIBRARY_ECORE)
}

pub fn alexandria() -> ModelResource {
    parse_model(ALEXANDRIA_XMI.as_bytes(), &library(), "alexandria").expect("fixture model parses")
}

/// Writes `{base}/{package}/{package}.ecore`.
pub fn write_metamodel(base: &Path, package: &str, text: &str) {
    let dir = base.join(package);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(format!("{package}.ecore")), text).unwrap();
}

/// Writes `{base}/{package}/{model}.xmi`.
pub fn write_model(base: &Path, package: &str, model: &str, text: &str) {
    let dir = base.join(package);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(format!("{model}.xmi")), text).unwrap();
}

/// A fresh directory holding the library package and the alexandria model.
pub fn library_repo() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_metamodel(dir.path(), "library", LIBRARY_ECORE);
    write_model(dir.path(), "library", "alexandria", ALEXANDRIA_XMI);
    dir
}
