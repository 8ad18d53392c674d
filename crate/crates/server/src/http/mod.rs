//! HTTP front end. Every request goes through one dispatcher that looks the
//! path up in the current route table.

pub mod error;
mod handlers;
pub mod view;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use axum::body::{Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::Response;
use axum::Router;
use parking_lot::Mutex;
use percent_encoding::percent_decode_str;
use tracing::info;

use crate::provisioning::{Method, Poller, Provisioner, Published, Route};
pub use error::ApiError;

/// Largest accepted request body.
const MAX_BODY: usize = 1 << 20;

pub const JSON: &str = "application/json; charset=utf-8";

#[derive(Debug, Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug)]
struct Inner {
    base_path: String,
    provisioner: Arc<Provisioner>,
    poller: Option<Mutex<Poller>>,
}

impl AppState {
    pub fn new(base_path: impl Into<String>, provisioner: Arc<Provisioner>, poller: Option<Poller>) -> Self {
        AppState { inner: Arc::new(Inner { base_path: base_path.into(), provisioner, poller: poller.map(Mutex::new) }) }
    }

    pub fn provisioner(&self) -> &Arc<Provisioner> {
        &self.inner.provisioner
    }

    /// Applies pending metamodel changes when running without a watcher.
    pub fn poll(&self) {
        if let Some(poller) = &self.inner.poller {
            let mut poller = poller.lock();
            for event in poller.poll() {
                self.inner.provisioner.apply_change(&event);
            }
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new().fallback(dispatch).with_state(state)
}

/// What a handler produced, before headers are attached.
pub(crate) struct Reply {
    status: StatusCode,
    body: Vec<u8>,
    location: Option<String>,
    etag: bool,
}

impl Reply {
    fn json(status: StatusCode, value: &serde_json::Value) -> Self {
        Reply { status, body: serde_json::to_vec(value).expect("json serializes"), location: None, etag: false }
    }
}

impl From<ApiError> for Reply {
    fn from(e: ApiError) -> Self {
        Reply::json(e.status, &e.body())
    }
}

/// A request reduced to what the handlers need.
pub(crate) struct Call<'a> {
    route: &'a Route,
    model: Option<String>,
    query: HashMap<String, String>,
    body: Bytes,
}

impl Call<'_> {
    fn param(&self, name: &str) -> Result<&str, ApiError> {
        self.query.get(name).map(String::as_str).ok_or_else(|| ApiError::bad_request(format!("missing query parameter `{name}`")))
    }
}

fn parse_query(query: Option<&str>) -> HashMap<String, String> {
    let mut out = HashMap::new();
    for (k, v) in form_urlencoded::parse(query.unwrap_or_default().as_bytes()) {
        out.entry(k.into_owned()).or_insert_with(|| v.into_owned());
    }
    out
}

fn decode_segments(path: &str) -> Result<Vec<String>, ApiError> {
    let trimmed = path.strip_prefix('/').unwrap_or(path);
    trimmed
        .split('/')
        .map(|s| {
            percent_decode_str(s)
                .decode_utf8()
                .map(|c| c.into_owned())
                .map_err(|_| ApiError::bad_request("path is not valid UTF-8"))
        })
        .collect()
}

fn route_miss(published: &Published, segments: &[String]) -> ApiError {
    let registry = &published.registry;
    if let [package, class, ..] = segments {
        match registry.metamodel(package) {
            Err(_) => return ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_PACKAGE", format!("unknown package `{package}`")),
            Ok(mm) if mm.class(class).is_none() => {
                return ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_CLASS", format!("unknown class `{class}` in package `{package}`"))
            }
            Ok(_) => {}
        }
    }
    ApiError::route_not_found(format!("no route for /{}", segments.join("/")))
}

impl AppState {
    fn relative<'p>(&self, path: &'p str) -> Option<&'p str> {
        let rest = path.strip_prefix(self.inner.base_path.as_str())?;
        (rest.is_empty() || rest.starts_with('/')).then_some(rest)
    }

    /// Runs one request against a single generation. Returns the reply, the
    /// generation it was served from and the matched route template.
    fn handle(&self, method: &axum::http::Method, path: &str, query: Option<&str>, body: Bytes) -> (Reply, u64, Option<String>) {
        let provisioner = &self.inner.provisioner;
        let miss = |e: ApiError| (Reply::from(e), provisioner.published().generation(), None);
        let Some(rel) = self.relative(path) else { return miss(ApiError::route_not_found(format!("no route for {path}"))) };
        let segments = match decode_segments(rel) {
            Ok(s) => s,
            Err(e) => return miss(e),
        };
        let Some(method) = Method::from_http(method) else {
            return miss(ApiError::route_not_found(format!("no {method} routes")));
        };
        let query = parse_query(query);

        let repo_lock = provisioner.repository();
        if method == Method::Get {
            let repo = repo_lock.read();
            let published = provisioner.published();
            let generation = published.generation();
            let Some((route, model)) = published.routes.lookup(method, &segments) else {
                return (route_miss(&published, &segments).into(), generation, None);
            };
            let call = Call { route, model, query, body };
            let reply = handlers::read(&repo, &published, &call).unwrap_or_else(Reply::from);
            (reply, generation, Some(route.template.clone()))
        } else {
            let mut repo = repo_lock.write();
            let published = provisioner.published();
            let generation = published.generation();
            let Some((route, model)) = published.routes.lookup(method, &segments) else {
                return (route_miss(&published, &segments).into(), generation, None);
            };
            let call = Call { route, model, query, body };
            let reply = handlers::write(&mut repo, &published, &call).unwrap_or_else(Reply::from);
            (reply, generation, Some(route.template.clone()))
        }
    }
}

async fn dispatch(State(app): State<AppState>, request: Request) -> Response {
    let started = Instant::now();
    let (parts, body) = request.into_parts();
    let (reply, generation, template) = match axum::body::to_bytes(body, MAX_BODY).await {
        Err(_) => {
            let e = ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "BAD_REQUEST", "request body is too large or unreadable");
            (Reply::from(e), app.provisioner().published().generation(), None)
        }
        Ok(bytes) => {
            let app = app.clone();
            let method = parts.method.clone();
            let uri = parts.uri.clone();
            tokio::task::spawn_blocking(move || {
                app.poll();
                app.handle(&method, uri.path(), uri.query(), bytes)
            })
            .await
            .unwrap_or_else(|e| {
                let e = ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", format!("handler failed: {e}"));
                (Reply::from(e), 0, None)
            })
        }
    };

    let status = reply.status;
    let mut builder = Response::builder()
        .status(status)
        .header(header::CONTENT_TYPE, JSON)
        .header("x-generation", generation.to_string());
    if let Some(location) = reply.location.as_deref().and_then(|l| HeaderValue::from_str(l).ok()) {
        builder = builder.header(header::LOCATION, location);
    }
    if reply.etag {
        builder = builder.header(header::ETAG, format!("\"{generation}\""));
    }
    if let Some(t) = template.as_deref().and_then(|t| HeaderValue::from_str(t).ok()) {
        builder = builder.header("x-route", t);
    }
    let response = builder.body(Body::from(reply.body)).expect("valid response");
    info!(
        target: "access",
        method = %parts.method,
        path = %parts.uri.path(),
        status = status.as_u16(),
        generation,
        duration_ms = started.elapsed().as_secs_f64() * 1000.0,
    );
    response
}
