use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::metamodel::is_identifier;

/// One `@feature.index` step into a containment slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathSegment {
    pub feature: String,
    pub index: usize,
}

/// Intra-document object address, `/` for the root or `//@feat.0/@feat.2`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FragmentPath {
    segments: Vec<PathSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed fragment path `{0}`")]
pub struct FragmentPathError(pub String);

impl FragmentPath {
    pub fn root() -> Self {
        FragmentPath::default()
    }

    pub fn is_root(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[PathSegment] {
        &self.segments
    }

    pub fn from_segments(segments: Vec<PathSegment>) -> Self {
        FragmentPath { segments }
    }

    pub fn child(&self, feature: &str, index: usize) -> Self {
        let mut segments = self.segments.clone();
        segments.push(PathSegment { feature: feature.to_owned(), index });
        FragmentPath { segments }
    }

    pub fn parent(&self) -> Option<FragmentPath> {
        let (_, rest) = self.segments.split_last()?;
        Some(FragmentPath { segments: rest.to_vec() })
    }

    pub fn last(&self) -> Option<&PathSegment> {
        self.segments.last()
    }

    /// True if `self` equals `other` or lies inside its subtree.
    pub fn starts_with(&self, other: &FragmentPath) -> bool {
        self.segments.starts_with(&other.segments)
    }
}

impl fmt::Display for FragmentPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.segments.is_empty() {
            return f.write_str("/");
        }
        f.write_str("/")?;
        for segment in &self.segments {
            write!(f, "/@{}.{}", segment.feature, segment.index)?;
        }
        Ok(())
    }
}

impl FromStr for FragmentPath {
    type Err = FragmentPathError;

    /// A segment without an index (`//@owner`) addresses position 0.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || FragmentPathError(s.to_owned());
        if s == "/" {
            return Ok(FragmentPath::root());
        }
        let body = s.strip_prefix("//").ok_or_else(malformed)?;
        let mut segments = Vec::new();
        for raw in body.split('/') {
            let raw = raw.strip_prefix('@').ok_or_else(malformed)?;
            let (feature, index) = match raw.rsplit_once('.') {
                Some((feature, index)) => {
                    if index.is_empty() || !index.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(malformed());
                    }
                    (feature, index.parse().map_err(|_| malformed())?)
                }
                None => (raw, 0),
            };
            if !is_identifier(feature) {
                return Err(malformed());
            }
            segments.push(PathSegment { feature: feature.to_owned(), index });
        }
        Ok(FragmentPath { segments })
    }
}
