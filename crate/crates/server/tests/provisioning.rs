mod common;

use std::fs;
use std::process::Command;
use std::time::Duration;

use common::{config, serve, titles, wait_for};
use modelforge_server::provisioning::ProvisionOutcome;
use modelforge_server::{start, StartError};
use modelforge_testkit::fixtures::{
    library_repo, write_metamodel, write_model, ALEXANDRIA_XMI, LIBRARY_CYCLIC_ECORE, LIBRARY_ECORE, LIBRARY_V2_ECORE,
    SAVANNA_XMI, ZOO_ECORE,
};
use serde_json::json;

#[tokio::test(flavor = "multi_thread")]
async fn metamodel_edits_change_routes_without_restart() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), false).await;
    assert_eq!(api.get("/library/Magazine/all").await.code(), "UNKNOWN_CLASS");

    write_metamodel(dir.path(), "library", LIBRARY_V2_ECORE);
    let r = api.get("/library/Magazine/all").await;
    assert_eq!((r.status, r.generation()), (200, 2));
    let r = api.post("/library/Library/Magazine/alexandria/newElement", &json!({"title": "Byte", "issue": "7"})).await;
    assert_eq!((r.status, r.header("location")), (201, Some("//@magazines.0")), "{}", r.body);

    // Going back drops the route; the stored magazine now makes the model invalid.
    write_metamodel(dir.path(), "library", LIBRARY_ECORE);
    let r = api.get("/library/Magazine/all").await;
    assert_eq!((r.status, r.code(), r.generation()), (404, "UNKNOWN_CLASS", 3));
    assert!(api.get("/library/Book/all").await.array().is_empty());
    assert_eq!(server.provisioner().last_load_errors().len(), 1);
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn removing_a_package_removes_its_routes() {
    let dir = library_repo();
    write_metamodel(dir.path(), "zoo", ZOO_ECORE);
    write_model(dir.path(), "zoo", "savanna", SAVANNA_XMI);
    let (server, api) = serve(dir.path(), false).await;
    assert_eq!(api.get("/zoo/Animal/all").await.array().len(), 2);

    fs::remove_dir_all(dir.path().join("zoo")).unwrap();
    let r = api.get("/zoo/Animal/all").await;
    assert_eq!(r.code(), "UNKNOWN_PACKAGE");
    let docs = api.get("/api-docs").await;
    let paths = docs.body["paths"].as_object().unwrap();
    assert!(paths.keys().all(|p| !p.starts_with("/zoo/")));
    assert!(paths.contains_key("/library/Book/all"));
    assert_eq!(titles(&api.get("/library/Book/all").await), ["Ulysses", "Dune"]);
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn defective_metamodels_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (server, api) = serve(dir.path(), false).await;
    // Package name must match its directory.
    write_metamodel(dir.path(), "books", LIBRARY_ECORE);
    write_metamodel(dir.path(), "library", LIBRARY_CYCLIC_ECORE);
    let r = api.get("/packages").await;
    assert_eq!((r.body.clone(), r.generation()), (json!([]), 0));

    let outcome = server.provisioner().apply_change(&modelforge_server::provisioning::ChangeEvent::for_path(
        modelforge_server::provisioning::ChangeKind::Added,
        &dir.path().join("library/library.ecore"),
    ));
    assert!(matches!(outcome, ProvisionOutcome::Rejected(ref d) if !d.is_empty()), "{outcome}");
    let outcome = server.provisioner().apply_change(&modelforge_server::provisioning::ChangeEvent::for_path(
        modelforge_server::provisioning::ChangeKind::Removed,
        &dir.path().join("zoo/zoo.ecore"),
    ));
    assert!(matches!(outcome, ProvisionOutcome::Rejected(_)), "{outcome}");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn watcher_provisions_new_packages() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), true).await;
    assert_eq!(api.get("/library/Book/all").await.array().len(), 2);

    write_model(dir.path(), "zoo", "savanna", SAVANNA_XMI);
    write_metamodel(dir.path(), "zoo", ZOO_ECORE);
    let served = wait_for(Duration::from_secs(3), || {
        let api = api.clone();
        async move { (api.get("/zoo/Keeper/all").await.status == 200).then_some(()) }
    })
    .await;
    assert!(served.is_some(), "zoo never appeared");

    // Model commits in a watched package do not re-provision it.
    let generation = api.get("/packages").await.generation();
    api.post("/library/Library/Book/alexandria/newElement", &json!({"title": "Emma"})).await;
    tokio::time::sleep(Duration::from_millis(400)).await;
    assert_eq!(api.get("/packages").await.generation(), generation);

    fs::remove_file(dir.path().join("zoo/zoo.ecore")).unwrap();
    let gone = wait_for(Duration::from_secs(3), || {
        let api = api.clone();
        async move { (api.get("/zoo/Keeper/all").await.code() == "UNKNOWN_PACKAGE").then_some(()) }
    })
    .await;
    assert!(gone.is_some(), "zoo never went away");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn unreadable_repository_fails_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    assert!(matches!(start(&config(&missing, true)).await, Err(StartError::RepoDir(_))));
}

#[test]
fn cli_requires_a_repository() {
    let out = Command::new(env!("CARGO_BIN_EXE_modelforge")).arg("serve").env_remove("MODELFORGE_REPO_DIR").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--repo-dir"));
    let out = Command::new(env!("CARGO_BIN_EXE_modelforge")).arg("--help").output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).contains("serve"));
}

#[test]
fn model_files_load_with_the_metamodel() {
    let dir = tempfile::tempdir().unwrap();
    write_model(dir.path(), "library", "alexandria", ALEXANDRIA_XMI);
    write_model(dir.path(), "library", "stray", "<library:Library xmlns:library=\"urn:x\"><shelves/></library:Library>");
    write_metamodel(dir.path(), "library", LIBRARY_ECORE);
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(async {
        let (server, api) = serve(dir.path(), false).await;
        assert_eq!(api.get("/packages").await.body[0]["modelCount"], 1);
        assert_eq!(server.provisioner().last_load_errors().len(), 1);
        server.shutdown().await.unwrap();
    });
}
