mod common;

use std::fs;

use common::{serve, titles, Resp};
use modelforge_testkit::fixtures::{
    library_repo, write_metamodel, write_model, ALEXANDRIA_XMI, BRANCH_ECORE, LIBRARY_ECORE, SAVANNA_XMI, ZOO_ECORE,
};
use reqwest::Method;
use serde_json::{json, Value};

fn assert_error(r: &Resp, status: u16, code: &str) {
    assert_eq!((r.status, r.code()), (status, code), "{}", r.body);
    let keys: Vec<&str> = r.body.as_object().unwrap().keys().map(String::as_str).collect();
    assert!(keys == ["error", "message"] || keys == ["error", "message", "details"], "{keys:?}");
    assert!(!r.body["message"].as_str().unwrap().is_empty());
    assert_eq!(r.header("content-type"), Some("application/json; charset=utf-8"));
    assert!(r.header("x-generation").is_some());
}

#[tokio::test(flavor = "multi_thread")]
async fn route_misses_are_uniform_404s() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), false).await;
    assert_error(&api.get("/nosuch/Book/all").await, 404, "UNKNOWN_PACKAGE");
    assert_error(&api.get("/library/Shelf/all").await, 404, "UNKNOWN_CLASS");
    assert_error(&api.get("/library/Book/shelves").await, 404, "ROUTE_NOT_FOUND");
    assert_error(&api.get("/library").await, 404, "ROUTE_NOT_FOUND");
    assert_error(&api.put("/library/Book/all").await, 404, "ROUTE_NOT_FOUND");
    assert_error(&api.call(Method::PATCH, "/library/Book/all", None).await, 404, "ROUTE_NOT_FOUND");

    let outside = reqwest::get(format!("{}/elsewhere/library/Book/all", api.root)).await.unwrap();
    assert_eq!(outside.status(), 404);
    let body: Value = outside.json().await.unwrap();
    assert_eq!(body["error"], "ROUTE_NOT_FOUND");

    // Abstract classes and non-containable children get no creation route.
    write_metamodel(dir.path(), "branch", BRANCH_ECORE);
    assert_error(&api.post("/branch/Library/Item/x/newElement", &json!({})).await, 404, "ROUTE_NOT_FOUND");
    assert_error(&api.post("/library/Book/Member/alexandria/newElement", &json!({})).await, 404, "ROUTE_NOT_FOUND");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn routed_responses_carry_route_and_generation() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), false).await;
    let r = api.get("/library/Book/books/search?attributeName=title&attributeValue=Dune").await;
    assert_eq!(r.header("x-route"), Some("/library/Book/books/search"));
    assert_eq!(r.generation(), 1);
    assert_eq!(r.header("content-type"), Some("application/json; charset=utf-8"));
    assert_eq!(
        String::from_utf8(r.raw).unwrap(),
        r#"[{"_class":"Book","_path":"//@books.1","_model":"alexandria","title":"Dune","pages":412,"borrowedBy":["//@members.0"]}]"#
    );
    let r = api.get("/library/Library/all").await;
    assert_eq!(r.body[0]["books"], json!([{"_class":"Book","_path":"//@books.0","title":"Ulysses","pages":730},
        {"_class":"Book","_path":"//@books.1","title":"Dune","pages":412,"borrowedBy":["//@members.0"]}]));
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn api_docs_are_cacheable_per_generation() {
    let dir = tempfile::tempdir().unwrap();
    let (server, api) = serve(dir.path(), false).await;
    let empty = api.get("/api-docs").await;
    let paths: Vec<&str> = empty.body["paths"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(paths, ["/api-docs", "/packages"]);
    assert_eq!(empty.header("etag"), Some("\"0\""));

    write_model(dir.path(), "library", "alexandria", ALEXANDRIA_XMI);
    write_metamodel(dir.path(), "library", LIBRARY_ECORE);
    let first = api.get("/api-docs").await;
    let second = api.get("/api-docs").await;
    assert_eq!(first.raw, second.raw);
    assert_eq!(first.header("etag"), Some("\"1\""));
    assert_eq!(second.header("etag"), Some("\"1\""));
    assert!(first.body["paths"].get("/library/Book/all").is_some());
    assert_eq!(first.body["servers"][0]["url"], "/api/v1");
    assert_eq!(first.body["info"]["version"], "1");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn packages_listing() {
    let dir = library_repo();
    write_metamodel(dir.path(), "zoo", ZOO_ECORE);
    write_model(dir.path(), "zoo", "savanna", SAVANNA_XMI);
    write_model(dir.path(), "zoo", "broken", "<zoo:Zoo");
    let (server, api) = serve(dir.path(), false).await;
    let r = api.get("/packages").await;
    let g = r.generation();
    assert_eq!(
        r.body,
        json!([
            {"packageName": "library", "generation": g, "classCount": 3, "modelCount": 1},
            {"packageName": "zoo", "generation": g, "classCount": 3, "modelCount": 1},
        ])
    );
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn views_use_typed_scalars() {
    let dir = tempfile::tempdir().unwrap();
    write_metamodel(dir.path(), "zoo", ZOO_ECORE);
    write_model(dir.path(), "zoo", "savanna", SAVANNA_XMI);
    let (server, api) = serve(dir.path(), false).await;
    let r = api.get("/zoo/Animal/all").await;
    assert_eq!(r.body[0]["weight"], json!(190.5));
    assert_eq!(r.body[0]["vaccinated"], json!(true));
    assert_eq!(r.body[0]["keeper"], json!(["//@keepers.0"]));
    assert_eq!(r.body[1]["weight"], json!(1200.0));
    assert_eq!(r.body[1]["age"], json!(4));
    // Matching uses the shortest round-trip rendering.
    let r = api.get("/zoo/Animal/animals/search?attributeName=weight&attributeValue=1200").await;
    assert_eq!(r.array().len(), 1, "{}", r.body);
    assert!(api.get("/zoo/Animal/animals/search?attributeName=weight&attributeValue=1200.0").await.array().is_empty());
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn creation_bodies_are_checked() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), false).await;
    let url = "/library/Library/Book/alexandria/newElement";
    let raw = api.client.post(format!("{}{}{url}", api.root, common::BASE)).body("{not json").send().await.unwrap();
    assert_eq!(raw.status(), 400);
    assert_error(&api.post(url, &json!(["title"])).await, 400, "BAD_REQUEST");
    assert_error(&api.post(url, &json!({"pages": 12})).await, 400, "BAD_REQUEST");
    assert_error(&api.post(url, &json!({"_shelf": "x"})).await, 400, "BAD_REQUEST");
    assert_error(&api.post(url, &json!({"_parentAttribute": "name"})).await, 400, "BAD_REQUEST");
    assert_error(&api.post(url, &json!({"_containment": "shelves"})).await, 404, "UNKNOWN_CONTAINMENT");
    assert_error(&api.post("/library/Library/Book/ghost/newElement", &json!({})).await, 404, "UNKNOWN_MODEL");

    let r = api.post(url, &json!({"title": "Emma", "_parentAttribute": "name", "_parentValue": "Alexandria", "_containment": "books"})).await;
    assert_eq!((r.status, r.header("location")), (201, Some("//@books.2")), "{}", r.body);
    assert_eq!(r.body, json!({"_class": "Book", "_path": "//@books.2", "title": "Emma"}));
    let r = api.post(url, &json!({"title": "Emma", "_parentAttribute": "name", "_parentValue": "Nowhere"})).await;
    assert_error(&r, 404, "PARENT_NOT_FOUND");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn rejected_commit_reports_violations() {
    let dir = tempfile::tempdir().unwrap();
    let capped = LIBRARY_ECORE.replacen("name=\"books\" upperBound=\"-1\"", "name=\"books\" upperBound=\"2\"", 1);
    write_metamodel(dir.path(), "library", &capped);
    write_model(dir.path(), "library", "alexandria", ALEXANDRIA_XMI);
    let (server, api) = serve(dir.path(), false).await;
    let r = api.post("/library/Library/Book/alexandria/newElement", &json!({"title": "Hyperion"})).await;
    assert_error(&r, 422, "VALIDATION_REJECTED");
    let details = r.body["details"].as_array().unwrap();
    assert_eq!(details[0]["code"], "VAL_MULT_UPPER");
    assert_eq!(details[0]["feature"], "books");
    assert_eq!(fs::read_to_string(dir.path().join("library/alexandria.xmi")).unwrap(), ALEXANDRIA_XMI);
    assert_eq!(titles(&api.get("/library/Book/all").await), ["Ulysses", "Dune"]);
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn offline_models_are_isolated() {
    let dir = library_repo();
    write_model(dir.path(), "library", "broken", "<library:Library name=\"half");
    let (server, api) = serve(dir.path(), false).await;
    assert_eq!(titles(&api.get("/library/Book/all").await), ["Ulysses", "Dune"]);
    let r = api.put("/library/Book/broken/update?attributeName=title&attributeValue=Dune&updatedValue=X").await;
    assert_error(&r, 409, "MODEL_OFFLINE");
    assert!(r.body["details"].is_object() || r.body["details"].is_string() || r.body["details"].is_array(), "{}", r.body);
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn query_values_are_decoded() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), false).await;
    let r = api.put("/library/Book/alexandria/update?attributeName=title&attributeValue=Dune&updatedValue=Dune%20%26%20Sons%2F1").await;
    assert_eq!(r.body, json!({"updated": 1}));
    let r = api.get("/library/Book/books/search?attributeName=title&attributeValue=Dune+%26+Sons/1").await;
    assert_eq!(titles(&r), ["Dune & Sons/1"]);
    let file = fs::read_to_string(dir.path().join("library/alexandria.xmi")).unwrap();
    assert!(file.contains(r#"title="Dune &amp; Sons/1""#), "{file}");
    server.shutdown().await.unwrap();
}

#[tokio::test(flavor = "multi_thread")]
async fn mutations_survive_a_restart() {
    let dir = library_repo();
    let (server, api) = serve(dir.path(), false).await;
    api.post("/library/Library/Book/alexandria/newElement", &json!({"title": "Hyperion", "pages": "482"})).await;
    api.post("/library/Member/Book/alexandria/newEopposite?fieldType=Member", &json!({"title": "Foundation"})).await;
    let before = api.get("/library/Library/all").await.raw;
    server.shutdown().await.unwrap();

    let (server, api) = serve(dir.path(), false).await;
    assert_eq!(api.get("/library/Library/all").await.raw, before);
    server.shutdown().await.unwrap();
}
