#![allow(dead_code)]

use std::future::Future;
use std::path::Path;
use std::time::{Duration, Instant};

use modelforge_server::{start, ServeConfig, Server};
use reqwest::Method;
use serde_json::Value;

pub const BASE: &str = "/api/v1";

pub struct Resp {
    pub status: u16,
    pub headers: reqwest::header::HeaderMap,
    pub body: Value,
    pub raw: Vec<u8>,
}

impl Resp {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.get(name).and_then(|v| v.to_str().ok())
    }

    pub fn generation(&self) -> u64 {
        self.header("x-generation").and_then(|g| g.parse().ok()).expect("x-generation header")
    }

    pub fn code(&self) -> &str {
        self.body["error"].as_str().unwrap_or_default()
    }

    pub fn array(&self) -> &[Value] {
        self.body.as_array().map(Vec::as_slice).unwrap_or_default()
    }
}

#[derive(Clone)]
pub struct Api {
    pub client: reqwest::Client,
    pub root: String,
}

impl Api {
    pub fn new(root: String) -> Self {
        Api { client: reqwest::Client::new(), root }
    }

    /// `path` is relative to the base path and may carry a query string.
    pub async fn call(&self, method: Method, path: &str, body: Option<&Value>) -> Resp {
        let mut request = self.client.request(method, format!("{}{BASE}{path}", self.root));
        if let Some(b) = body {
            request = request.header("content-type", "application/json").body(serde_json::to_vec(b).unwrap());
        }
        let response = request.send().await.expect("request sent");
        let status = response.status().as_u16();
        let headers = response.headers().clone();
        let raw = response.bytes().await.expect("body").to_vec();
        let body = serde_json::from_slice(&raw).unwrap_or(Value::Null);
        Resp { status, headers, body, raw }
    }

    pub async fn get(&self, path: &str) -> Resp {
        self.call(Method::GET, path, None).await
    }

    pub async fn post(&self, path: &str, body: &Value) -> Resp {
        self.call(Method::POST, path, Some(body)).await
    }

    pub async fn put(&self, path: &str) -> Resp {
        self.call(Method::PUT, path, None).await
    }

    pub async fn delete(&self, path: &str) -> Resp {
        self.call(Method::DELETE, path, None).await
    }
}

pub fn config(dir: &Path, watch: bool) -> ServeConfig {
    let mut config = ServeConfig::new(dir);
    config.port = 0;
    config.watch = watch;
    config.debounce = Duration::from_millis(100);
    config.log_level = "warn".into();
    config
}

pub async fn serve(dir: &Path, watch: bool) -> (Server, Api) {
    let server = start(&config(dir, watch)).await.expect("server starts");
    let api = Api::new(format!("http://{}", server.addr()));
    (server, api)
}

/// Polls `probe` until it yields a value or `limit` runs out.
pub async fn wait_for<T, F, Fut>(limit: Duration, mut probe: F) -> Option<T>
where
    F: FnMut() -> Fut,
    Fut: Future<Output = Option<T>>,
{
    let end = Instant::now() + limit;
    loop {
        if let Some(v) = probe().await {
            return Some(v);
        }
        if Instant::now() >= end {
            return None;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

pub fn titles(resp: &Resp) -> Vec<String> {
    resp.array().iter().map(|v| v["title"].as_str().unwrap_or_default().to_owned()).collect()
}
