//! Metamodel file change detection: a debounced filesystem watcher and a
//! stat-based poller used when no watcher is available.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant, SystemTime};

use notify::{RecursiveMode, Watcher as _};
use thiserror::Error;
use tracing::{debug, warn};

use super::{ChangeEvent, ChangeKind};

#[derive(Debug, Error)]
#[error("filesystem watcher unavailable: {0}")]
pub struct WatcherUnavailable(String);

/// `base/<pkg>/<pkg>.ecore` for every package directory that has one.
fn package_files(base: &Path) -> BTreeSet<PathBuf> {
    let Ok(entries) = std::fs::read_dir(base) else { return BTreeSet::new() };
    entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let dir = e.path();
            let name = dir.file_name()?.to_str()?.to_owned();
            let file = dir.join(format!("{name}.ecore"));
            file.is_file().then_some(file)
        })
        .collect()
}

/// The package a path belongs to, when the path is a package directory or
/// its metamodel file; the flag is set for the file.
fn package_of(base: &Path, path: &Path) -> Option<(String, bool)> {
    let rel = path.strip_prefix(base).ok()?;
    let parts: Vec<&str> = rel.iter().map(|p| p.to_str()).collect::<Option<_>>()?;
    match parts.as_slice() {
        [dir] => Some(((*dir).to_owned(), false)),
        [dir, file] if *file == format!("{dir}.ecore") => Some(((*dir).to_owned(), true)),
        _ => None,
    }
}

fn metamodel_path(base: &Path, package: &str) -> PathBuf {
    base.join(package).join(format!("{package}.ecore"))
}

/// Turns the current state of a package's metamodel file into an event,
/// given whether the package was known before. Events seen only on the
/// package directory cannot mean the file changed in place.
fn classify(known: &mut BTreeSet<PathBuf>, base: &Path, package: &str, file_touched: bool) -> Option<ChangeEvent> {
    let path = metamodel_path(base, package);
    let kind = match (path.is_file(), known.contains(&path)) {
        (true, true) if file_touched => ChangeKind::Modified,
        (true, true) => return None,
        (true, false) => {
            known.insert(path.clone());
            ChangeKind::Added
        }
        (false, true) => {
            known.remove(&path);
            ChangeKind::Removed
        }
        (false, false) => return None,
    };
    Some(ChangeEvent { kind, package_name: package.to_owned(), source_path: path })
}

/// Keeps the OS watcher alive; dropping it ends the event stream.
pub struct Watcher {
    _inner: notify::RecommendedWatcher,
}

impl std::fmt::Debug for Watcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Watcher")
    }
}

/// Watches `base` for metamodel changes. Bursts of filesystem events for one
/// package are coalesced until the package has been quiet for `debounce`.
pub fn watch(base: &Path, debounce: Duration) -> Result<(Watcher, mpsc::Receiver<ChangeEvent>), WatcherUnavailable> {
    let base = base.canonicalize().map_err(|e| WatcherUnavailable(e.to_string()))?;
    let (raw_tx, raw_rx) = mpsc::channel::<notify::Result<notify::Event>>();
    let mut inner = notify::recommended_watcher(raw_tx).map_err(|e| WatcherUnavailable(e.to_string()))?;
    inner.watch(&base, RecursiveMode::Recursive).map_err(|e| WatcherUnavailable(e.to_string()))?;

    let (tx, rx) = mpsc::channel();
    let mut known = package_files(&base);
    thread::Builder::new()
        .name("metamodel-watch".into())
        .spawn(move || {
            let mut pending: HashMap<String, (Instant, bool)> = HashMap::new();
            loop {
                let timeout = pending.values().map(|(t, _)| (*t + debounce).saturating_duration_since(Instant::now())).min();
                let received = match timeout {
                    Some(t) => raw_rx.recv_timeout(t),
                    None => raw_rx.recv().map_err(|_| mpsc::RecvTimeoutError::Disconnected),
                };
                match received {
                    // Reads, including our own, are not changes.
                    Ok(Ok(event)) if event.kind.is_access() => {}
                    Ok(Ok(event)) => {
                        for path in &event.paths {
                            if let Some((package, is_file)) = package_of(&base, path) {
                                debug!(package, kind = ?event.kind, "metamodel file event");
                                let entry = pending.entry(package).or_insert((Instant::now(), false));
                                *entry = (Instant::now(), entry.1 || is_file);
                            }
                        }
                    }
                    Ok(Err(e)) => warn!(error = %e, "watcher error"),
                    Err(mpsc::RecvTimeoutError::Timeout) => {}
                    Err(mpsc::RecvTimeoutError::Disconnected) => break,
                }
                let now = Instant::now();
                let mut due: Vec<String> = pending.iter().filter(|(_, (t, _))| now >= *t + debounce).map(|(p, _)| p.clone()).collect();
                due.sort();
                for package in due {
                    let Some((_, file_touched)) = pending.remove(&package) else { continue };
                    if let Some(event) = classify(&mut known, &base, &package, file_touched) {
                        if tx.send(event).is_err() {
                            return;
                        }
                    }
                }
            }
        })
        .map_err(|e| WatcherUnavailable(e.to_string()))?;
    Ok((Watcher { _inner: inner }, rx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Stamp {
    modified: Option<SystemTime>,
    len: u64,
}

fn stamp(path: &Path) -> Option<Stamp> {
    let meta = std::fs::metadata(path).ok()?;
    Some(Stamp { modified: meta.modified().ok(), len: meta.len() })
}

/// Detects metamodel changes by comparing file stamps between calls.
#[derive(Debug)]
pub struct Poller {
    base: PathBuf,
    seen: BTreeMap<PathBuf, Stamp>,
}

impl Poller {
    /// A poller that reports every existing metamodel as added on its first poll.
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Poller { base: base.into(), seen: BTreeMap::new() }
    }

    pub fn poll(&mut self) -> Vec<ChangeEvent> {
        let current: BTreeMap<PathBuf, Stamp> =
            package_files(&self.base).into_iter().filter_map(|p| stamp(&p).map(|s| (p, s))).collect();
        let mut events = Vec::new();
        let package = |p: &Path| p.parent().and_then(|d| d.file_name()).and_then(|n| n.to_str()).unwrap_or_default().to_owned();
        for (path, s) in &current {
            let kind = match self.seen.get(path) {
                None => ChangeKind::Added,
                Some(old) if old != s => ChangeKind::Modified,
                Some(_) => continue,
            };
            events.push(ChangeEvent { kind, package_name: package(path), source_path: path.clone() });
        }
        for path in self.seen.keys().filter(|p| !current.contains_key(*p)) {
            events.push(ChangeEvent { kind: ChangeKind::Removed, package_name: package(path), source_path: path.clone() });
        }
        self.seen = current;
        events
    }
}

#[cfg(test)]
mod tests {
    use std::fs;

    use super::*;

    const LIBRARY: &str = include_str!("../../../core/fixtures/library.ecore");

    fn drain(rx: &mpsc::Receiver<ChangeEvent>, wait: Duration) -> Vec<ChangeEvent> {
        let mut out = Vec::new();
        let end = Instant::now() + wait;
        while let Ok(e) = rx.recv_timeout(end.saturating_duration_since(Instant::now())) {
            out.push(e);
        }
        out
    }

    #[test]
    fn package_paths() {
        let base = Path::new("/r");
        assert_eq!(package_of(base, Path::new("/r/library")), Some(("library".into(), false)));
        assert_eq!(package_of(base, Path::new("/r/library/library.ecore")), Some(("library".into(), true)));
        assert_eq!(package_of(base, Path::new("/r/library/alexandria.xmi")), None);
        assert_eq!(package_of(base, Path::new("/r/library/other.ecore")), None);
        assert_eq!(package_of(base, Path::new("/r/README")), Some(("README".into(), false)));
    }

    #[test]
    fn burst_is_one_event_and_delete_is_removed() {
        let dir = tempfile::tempdir().unwrap();
        let (_w, rx) = watch(dir.path(), Duration::from_millis(200)).unwrap();
        fs::create_dir(dir.path().join("library")).unwrap();
        let file = dir.path().join("library/library.ecore");
        fs::write(&file, "partial").unwrap();
        thread::sleep(Duration::from_millis(50));
        fs::write(&file, LIBRARY).unwrap();
        let events = drain(&rx, Duration::from_millis(900));
        assert_eq!(events.len(), 1, "{events:?}");
        assert_eq!(events[0].kind, ChangeKind::Added);
        assert_eq!(events[0].package_name, "library");

        fs::write(&file, LIBRARY).unwrap();
        let events = drain(&rx, Duration::from_millis(600));
        assert_eq!(events.iter().map(|e| e.kind).collect::<Vec<_>>(), [ChangeKind::Modified]);

        fs::remove_file(&file).unwrap();
        let events = drain(&rx, Duration::from_millis(600));
        assert_eq!(events.iter().map(|e| e.kind).collect::<Vec<_>>(), [ChangeKind::Removed]);
    }

    #[test]
    fn unrelated_files_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("library")).unwrap();
        fs::write(dir.path().join("library/library.ecore"), LIBRARY).unwrap();
        let (_w, rx) = watch(dir.path(), Duration::from_millis(100)).unwrap();
        fs::write(dir.path().join("README"), "hello").unwrap();
        fs::write(dir.path().join("library/alexandria.xmi"), "x").unwrap();
        fs::write(dir.path().join("library/notes.txt"), "x").unwrap();
        let e = drain(&rx, Duration::from_millis(500)); assert!(e.is_empty(), "{e:?}");
    }

    #[test]
    fn reading_is_not_a_change() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("library")).unwrap();
        let file = dir.path().join("library/library.ecore");
        fs::write(&file, LIBRARY).unwrap();
        let (_w, rx) = watch(dir.path(), Duration::from_millis(100)).unwrap();
        for _ in 0..3 {
            assert_eq!(fs::read_to_string(&file).unwrap(), LIBRARY);
            let _ = fs::read_dir(dir.path().join("library")).unwrap().count();
        }
        let e = drain(&rx, Duration::from_millis(400));
        assert!(e.is_empty(), "{e:?}");
    }

    #[test]
    fn poller_reports_changes() {
        let dir = tempfile::tempdir().unwrap();
        let mut poller = Poller::new(dir.path());
        assert!(poller.poll().is_empty());
        fs::create_dir(dir.path().join("library")).unwrap();
        fs::write(dir.path().join("library/library.ecore"), LIBRARY).unwrap();
        let kinds = |events: Vec<ChangeEvent>| events.into_iter().map(|e| e.kind).collect::<Vec<_>>();
        assert_eq!(kinds(poller.poll()), [ChangeKind::Added]);
        assert!(poller.poll().is_empty());
        fs::write(dir.path().join("library/library.ecore"), format!("{LIBRARY}\n")).unwrap();
        assert_eq!(kinds(poller.poll()), [ChangeKind::Modified]);
        fs::remove_dir_all(dir.path().join("library")).unwrap();
        assert_eq!(kinds(poller.poll()), [ChangeKind::Removed]);
    }
}
