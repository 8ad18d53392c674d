//! Reading and writing the XMI dialect used for metamodel (`.ecore`) and
//! model (`.xmi`) files.
//!
//! Metamodels use a subset of Ecore: one `ecore:EPackage` root holding
//! `eClassifiers` of type `ecore:EClass`, whose `eStructuralFeatures` are
//! `ecore:EAttribute`s over `EString`/`EInt`/`EBoolean`/`EDouble` or
//! `ecore:EReference`s inside the same package.
//!
//! Models are a containment tree rooted at `{nsPrefix}:{Class}`. Attribute
//! values and cross references are XML attributes; contained objects are
//! nested elements named after their containment feature. Cross references
//! are written as space-separated [`FragmentPath`]s, and for every opposite
//! pair only one end is written (see [`serialize_model`]).

mod fragment;
mod metamodel_io;
mod model_io;
mod raw;

pub use fragment::{FragmentPath, FragmentPathError, PathSegment};
pub use metamodel_io::{parse_metamodel, serialize_metamodel, ECORE_NS_URI};
pub use model_io::{fragment_path_of, parse_model, resolve_fragment_path, serialize_model, SerializeError};
pub use raw::{parse_document, RawDocument, RawElement};

use thiserror::Error;

use crate::metamodel::MetamodelDefect;

pub const XMI_NS_URI: &str = "http://www.omg.org/XMI";
pub const XSI_NS_URI: &str = "http://www.w3.org/2001/XMLSchema-instance";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XmiError {
    #[error("malformed XML at byte {position}: {message}")]
    MalformedXml { position: u64, message: String },
    #[error("dialect violation in <{element}>: {reason}")]
    DialectViolation { element: String, reason: String },
    #[error("invalid metamodel: {0}")]
    MetamodelDefect(MetamodelDefect),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` has no feature `{feature}`")]
    UnknownFeature { class: String, feature: String },
    #[error("cannot parse `{raw}` as a value of feature `{feature}`")]
    ValueParse { feature: String, raw: String },
    #[error("fragment path `{0}` does not resolve")]
    DanglingPath(String),
    #[error("class `{0}` is abstract and cannot be instantiated")]
    AbstractInstantiation(String),
}

impl XmiError {
    pub(crate) fn dialect(element: &str, reason: impl Into<String>) -> Self {
        XmiError::DialectViolation { element: element.to_owned(), reason: reason.into() }
    }
}
