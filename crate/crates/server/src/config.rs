//! Command line and environment configuration.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub const ENV_PREFIX: &str = "MODELFORGE_";

#[derive(Debug, Parser)]
#[command(name = "modelforge", version, about = "REST API provisioned at runtime from metamodel files")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the repository directory over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    /// Directory holding one subdirectory per package.
    #[arg(long)]
    pub repo_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "/api/v1")]
    pub base_path: String,
    /// Watch the repository for metamodel changes (default).
    #[arg(long, overrides_with = "no_watch")]
    pub watch: bool,
    /// Check for metamodel changes on each request instead of watching.
    #[arg(long, overrides_with = "watch")]
    pub no_watch: bool,
    #[arg(long, default_value_t = 200)]
    pub debounce_ms: u64,
    #[arg(long, default_value = "info")]
    pub log_level: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub repo_dir: PathBuf,
    pub host: String,
    pub port: u16,
    pub base_path: String,
    pub watch: bool,
    pub debounce: Duration,
    pub log_level: String,
}

impl ServeConfig {
    pub fn new(repo_dir: impl Into<PathBuf>) -> Self {
        ServeConfig {
            repo_dir: repo_dir.into(),
            host: "127.0.0.1".into(),
            port: 8080,
            base_path: "/api/v1".into(),
            watch: true,
            debounce: Duration::from_millis(200),
            log_level: "info".into(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("--repo-dir (or {ENV_PREFIX}REPO_DIR) is required")]
    MissingRepoDir,
    #[error("invalid value {value:?} for {name}")]
    Invalid { name: String, value: String },
}

/// `/api/v1/` and `api/v1` both become `/api/v1`; `/` becomes the empty prefix.
pub fn normalize_base_path(raw: &str) -> Result<String, ConfigError> {
    let trimmed = raw.trim().trim_end_matches('/');
    if trimmed.contains(['?', '#', ' ']) {
        return Err(ConfigError::Invalid { name: "base path".into(), value: raw.into() });
    }
    Ok(match trimmed {
        "" => String::new(),
        t if t.starts_with('/') => t.to_owned(),
        t => format!("/{t}"),
    })
}

fn parse_bool(name: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Invalid { name: name.into(), value: value.into() }),
    }
}

impl ServeArgs {
    /// Combines flags with `MODELFORGE_*` variables; variables win.
    pub fn resolve(self, env: impl Fn(&str) -> Option<String>) -> Result<ServeConfig, ConfigError> {
        let var = |key: &str| env(&format!("{ENV_PREFIX}{key}")).filter(|v| !v.is_empty());
        let invalid = |key: &str, value: String| ConfigError::Invalid { name: format!("{ENV_PREFIX}{key}"), value };

        let repo_dir = var("REPO_DIR").map(PathBuf::from).or(self.repo_dir).ok_or(ConfigError::MissingRepoDir)?;
        let port = match var("PORT") {
            Some(v) => v.parse().map_err(|_| invalid("PORT", v))?,
            None => self.port,
        };
        let debounce_ms = match var("DEBOUNCE_MS") {
            Some(v) => v.parse().map_err(|_| invalid("DEBOUNCE_MS", v))?,
            None => self.debounce_ms,
        };
        let watch = match var("WATCH") {
            Some(v) => parse_bool(&format!("{ENV_PREFIX}WATCH"), &v)?,
            None => !self.no_watch,
        };
        Ok(ServeConfig {
            repo_dir,
            host: var("HOST").unwrap_or(self.host),
            port,
            base_path: normalize_base_path(&var("BASE_PATH").unwrap_or(self.base_path))?,
            watch,
            debounce: Duration::from_millis(debounce_ms),
            log_level: var("LOG_LEVEL").unwrap_or(self.log_level),
        })
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;

    fn parse(args: &[&str]) -> ServeArgs {
        let mut full = vec!["modelforge", "serve"];
        full.extend_from_slice(args);
        match Cli::try_parse_from(full).unwrap().command {
            Command::Serve(a) => a,
        }
    }

    fn env(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let map: HashMap<String, String> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| map.get(k).cloned()
    }

    #[test]
    fn defaults() {
        let c = parse(&["--repo-dir", "/srv/models"]).resolve(env(&[])).unwrap();
        assert_eq!(c, ServeConfig::new("/srv/models"));
    }

    #[test]
    fn flags() {
        let c = parse(&["--repo-dir", "r", "--port", "9000", "--base-path", "/x/", "--no-watch", "--debounce-ms", "50"])
            .resolve(env(&[]))
            .unwrap();
        assert_eq!((c.port, c.base_path.as_str(), c.watch, c.debounce), (9000, "/x", false, Duration::from_millis(50)));
        assert!(parse(&["--repo-dir", "r", "--no-watch", "--watch"]).resolve(env(&[])).unwrap().watch);
    }

    #[test]
    fn environment_overrides_flags() {
        let c = parse(&["--repo-dir", "r", "--port", "9000"])
            .resolve(env(&[("MODELFORGE_PORT", "7000"), ("MODELFORGE_WATCH", "false"), ("MODELFORGE_BASE_PATH", "/")]))
            .unwrap();
        assert_eq!((c.port, c.watch, c.base_path.as_str()), (7000, false, ""));
        let c = parse(&[]).resolve(env(&[("MODELFORGE_REPO_DIR", "/data")])).unwrap();
        assert_eq!(c.repo_dir, PathBuf::from("/data"));
    }

    #[test]
    fn errors() {
        assert_eq!(parse(&[]).resolve(env(&[])), Err(ConfigError::MissingRepoDir));
        assert!(parse(&["--repo-dir", "r"]).resolve(env(&[("MODELFORGE_PORT", "http")])).is_err());
        assert!(normalize_base_path("/a b").is_err());
        assert_eq!(normalize_base_path("api").unwrap(), "/api");
    }
}
