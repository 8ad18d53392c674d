//! Reflective metamodels, the XMI dialect for metamodels and models,
//! structural validation and the file-backed model repository.

pub mod metamodel;
pub mod model;
pub mod repository;
pub mod validator;
pub mod xmi;

pub use metamodel::{
    Attribute, DataType, DefectCode, Feature, FeatureKind, MetaClass, Metamodel, MetamodelDefect, MetamodelError,
    MetamodelRegistry, Multiplicity, Reference, RegistrySnapshot,
};
pub use model::{ModelObject, ModelResource, ObjectId, Value};
pub use repository::{
    load_repository, AtomicFileStore, Found, LoadCause, LoadError, ModelStore, Repository, RepositoryError,
};
pub use validator::{validate_resource, ValidationReport, Violation, ViolationCode};
pub use xmi::{FragmentPath, XmiError};
