//! Reflective metamodel type system.
//!
//! A [`Metamodel`] is a package of [`MetaClass`]es carrying typed attributes
//! and references. Everything downstream (XMI parsing, validation, routing,
//! OpenAPI generation) queries metamodels through the reflective helpers
//! defined here rather than through generated code.
//!
//! The [`MetamodelRegistry`] maps package names to metamodels and stamps every
//! change with a generation number. Snapshots taken from it are immutable and
//! cheap to clone, so request handlers can hold one for their whole lifetime.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// The four primitive data types an attribute may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    String,
    Int,
    Boolean,
    Double,
}

impl DataType {
    pub const ALL: [DataType; 4] = [DataType::String, DataType::Int, DataType::Boolean, DataType::Double];

    /// Name of the matching Ecore data type (`EString`, `EInt`, ...).
    pub fn ecore_name(self) -> &'static str {
        match self {
            DataType::String => "EString",
            DataType::Int => "EInt",
            DataType::Boolean => "EBoolean",
            DataType::Double => "EDouble",
        }
    }

    pub fn from_ecore_name(name: &str) -> Option<Self> {
        DataType::ALL.into_iter().find(|t| t.ecore_name() == name)
    }
}

/// Cardinality bounds of a feature. `upper == -1` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Multiplicity {
    pub lower: i32,
    pub upper: i32,
}

impl Multiplicity {
    pub const UNBOUNDED: i32 = -1;
    pub const OPTIONAL: Multiplicity = Multiplicity { lower: 0, upper: 1 };
    pub const REQUIRED: Multiplicity = Multiplicity { lower: 1, upper: 1 };
    pub const MANY: Multiplicity = Multiplicity { lower: 0, upper: Self::UNBOUNDED };

    pub const fn new(lower: i32, upper: i32) -> Self {
        Multiplicity { lower, upper }
    }

    pub fn is_valid(&self) -> bool {
        self.lower >= 0 && (self.upper == Self::UNBOUNDED || self.upper >= self.lower)
    }

    pub fn is_unbounded(&self) -> bool {
        self.upper == Self::UNBOUNDED
    }

    pub fn is_many(&self) -> bool {
        self.is_unbounded() || self.upper > 1
    }

    pub fn below_lower(&self, count: usize) -> bool {
        (count as i64) < i64::from(self.lower)
    }

    pub fn above_upper(&self, count: usize) -> bool {
        !self.is_unbounded() && (count as i64) > i64::from(self.upper)
    }
}

impl Default for Multiplicity {
    fn default() -> Self {
        Multiplicity::OPTIONAL
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_unbounded() {
            write!(f, "{}..*", self.lower)
        } else {
            write!(f, "{}..{}", self.lower, self.upper)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub data_type: DataType,
    pub multiplicity: Multiplicity,
}

impl Attribute {
    pub fn new(name: impl Into<String>, data_type: DataType) -> Self {
        Attribute { name: name.into(), data_type, multiplicity: Multiplicity::OPTIONAL }
    }

    pub fn with_multiplicity(mut self, multiplicity: Multiplicity) -> Self {
        self.multiplicity = multiplicity;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reference {
    pub name: String,
    pub target: String,
    pub containment: bool,
    pub opposite: Option<String>,
    pub multiplicity: Multiplicity,
}

impl Reference {
    pub fn new(name: impl Into<String>, target: impl Into<String>) -> Self {
        Reference {
            name: name.into(),
            target: target.into(),
            containment: false,
            opposite: None,
            multiplicity: Multiplicity::OPTIONAL,
        }
    }

    pub fn containment(name: impl Into<String>, target: impl Into<String>) -> Self {
        Reference { containment: true, multiplicity: Multiplicity::MANY, ..Reference::new(name, target) }
    }

    pub fn with_opposite(mut self, opposite: impl Into<String>) -> Self {
        self.opposite = Some(opposite.into());
        self
    }

    pub fn with_multiplicity(mut self, multiplicity: Multiplicity) -> Self {
        self.multiplicity = multiplicity;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaClass {
    pub name: String,
    pub is_abstract: bool,
    pub super_types: Vec<String>,
    pub attributes: Vec<Attribute>,
    pub references: Vec<Reference>,
}

impl MetaClass {
    pub fn new(name: impl Into<String>) -> Self {
        MetaClass {
            name: name.into(),
            is_abstract: false,
            super_types: Vec::new(),
            attributes: Vec::new(),
            references: Vec::new(),
        }
    }

    pub fn abstract_class(mut self) -> Self {
        self.is_abstract = true;
        self
    }

    pub fn extends(mut self, super_type: impl Into<String>) -> Self {
        self.super_types.push(super_type.into());
        self
    }

    pub fn attribute(mut self, attribute: Attribute) -> Self {
        self.attributes.push(attribute);
        self
    }

    pub fn reference(mut self, reference: Reference) -> Self {
        self.references.push(reference);
        self
    }
}

/// A structural feature seen through its declaring class.
#[derive(Debug, Clone, Copy)]
pub struct Feature<'a> {
    pub owner: &'a MetaClass,
    pub kind: FeatureKind<'a>,
}

#[derive(Debug, Clone, Copy)]
pub enum FeatureKind<'a> {
    Attribute(&'a Attribute),
    Reference(&'a Reference),
}

impl<'a> Feature<'a> {
    pub fn name(&self) -> &'a str {
        match self.kind {
            FeatureKind::Attribute(a) => &a.name,
            FeatureKind::Reference(r) => &r.name,
        }
    }

    pub fn multiplicity(&self) -> Multiplicity {
        match self.kind {
            FeatureKind::Attribute(a) => a.multiplicity,
            FeatureKind::Reference(r) => r.multiplicity,
        }
    }

    pub fn as_attribute(&self) -> Option<&'a Attribute> {
        match self.kind {
            FeatureKind::Attribute(a) => Some(a),
            FeatureKind::Reference(_) => None,
        }
    }

    pub fn as_reference(&self) -> Option<&'a Reference> {
        match self.kind {
            FeatureKind::Reference(r) => Some(r),
            FeatureKind::Attribute(_) => None,
        }
    }

    pub fn as_containment(&self) -> Option<&'a Reference> {
        self.as_reference().filter(|r| r.containment)
    }

    pub fn as_cross_reference(&self) -> Option<&'a Reference> {
        self.as_reference().filter(|r| !r.containment)
    }
}

impl PartialEq for Feature<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.owner.name == other.owner.name && self.name() == other.name()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetamodelError {
    #[error("unknown package `{0}`")]
    UnknownPackage(String),
    #[error("unknown class `{class}` in package `{package}`")]
    UnknownClass { package: String, class: String },
    #[error("duplicate feature `{0}` after inheritance flattening")]
    DuplicateFeature(String),
    #[error("supertype cycle through {}", .0.join(" -> "))]
    SupertypeCycle(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefectCode {
    UnresolvedType,
    OppositeAsymmetry,
    SupertypeCycle,
    DuplicateClass,
    DuplicateFeature,
    BadMultiplicity,
}

impl DefectCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DefectCode::UnresolvedType => "UNRESOLVED_TYPE",
            DefectCode::OppositeAsymmetry => "OPPOSITE_ASYMMETRY",
            DefectCode::SupertypeCycle => "SUPERTYPE_CYCLE",
            DefectCode::DuplicateClass => "DUPLICATE_CLASS",
            DefectCode::DuplicateFeature => "DUPLICATE_FEATURE",
            DefectCode::BadMultiplicity => "BAD_MULTIPLICITY",
        }
    }
}

impl fmt::Display for DefectCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A broken metamodel invariant, located by qualified name (`pkg.Class.feature`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetamodelDefect {
    pub code: DefectCode,
    pub element: String,
    pub message: String,
}

impl fmt::Display for MetamodelDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.element, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metamodel {
    pub package_name: String,
    pub ns_uri: String,
    pub ns_prefix: String,
    pub classes: Vec<MetaClass>,
}

impl Metamodel {
    pub fn new(package_name: impl Into<String>, ns_uri: impl Into<String>, ns_prefix: impl Into<String>) -> Self {
        Metamodel {
            package_name: package_name.into(),
            ns_uri: ns_uri.into(),
            ns_prefix: ns_prefix.into(),
            classes: Vec::new(),
        }
    }

    pub fn with_class(mut self, class: MetaClass) -> Self {
        self.classes.push(class);
        self
    }

    pub fn class(&self, name: &str) -> Option<&MetaClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Looks a class up by its case-sensitive name.
    pub fn resolve_class(&self, name: &str) -> Result<&MetaClass, MetamodelError> {
        self.class(name).ok_or_else(|| MetamodelError::UnknownClass {
            package: self.package_name.clone(),
            class: name.to_owned(),
        })
    }

    /// Flattens inherited and own features of `class`.
    ///
    /// Supertypes are visited depth-first in declaration order, each class at
    /// most once, and contribute their features before the subtype. Own
    /// features follow: attributes first, then references.
    pub fn all_features<'a>(&'a self, class: &'a MetaClass) -> Result<Vec<Feature<'a>>, MetamodelError> {
        let mut out = Vec::new();
        let mut visiting = Vec::new();
        let mut done = HashSet::new();
        self.collect_features(class, &mut visiting, &mut done, &mut out)?;

        let mut seen = HashSet::new();
        for feature in &out {
            if !seen.insert(feature.name()) {
                return Err(MetamodelError::DuplicateFeature(feature.name().to_owned()));
            }
        }
        Ok(out)
    }

    fn collect_features<'a>(
        &'a self,
        class: &'a MetaClass,
        visiting: &mut Vec<&'a str>,
        done: &mut HashSet<&'a str>,
        out: &mut Vec<Feature<'a>>,
    ) -> Result<(), MetamodelError> {
        if let Some(pos) = visiting.iter().position(|n| *n == class.name) {
            let mut cycle: Vec<String> = visiting[pos..].iter().map(|s| s.to_string()).collect();
            cycle.push(class.name.clone());
            return Err(MetamodelError::SupertypeCycle(cycle));
        }
        if done.contains(class.name.as_str()) {
            return Ok(());
        }
        visiting.push(&class.name);
        for super_name in &class.super_types {
            let super_class = self.resolve_class(super_name)?;
            self.collect_features(super_class, visiting, done, out)?;
        }
        visiting.pop();
        done.insert(&class.name);

        out.extend(class.attributes.iter().map(|a| Feature { owner: class, kind: FeatureKind::Attribute(a) }));
        out.extend(class.references.iter().map(|r| Feature { owner: class, kind: FeatureKind::Reference(r) }));
        Ok(())
    }

    /// Finds a feature by name among the flattened features of `class`.
    pub fn feature<'a>(&'a self, class: &'a MetaClass, name: &str) -> Result<Option<Feature<'a>>, MetamodelError> {
        Ok(self.all_features(class)?.into_iter().find(|f| f.name() == name))
    }

    /// Reflexive, transitive supertype check. Unresolvable names never match.
    pub fn is_subtype_of(&self, sub: &MetaClass, super_name: &str) -> bool {
        let mut queue = VecDeque::from([sub]);
        let mut seen = HashSet::new();
        while let Some(class) = queue.pop_front() {
            if class.name == super_name {
                return true;
            }
            if !seen.insert(class.name.as_str()) {
                continue;
            }
            queue.extend(class.super_types.iter().filter_map(|n| self.class(n)));
        }
        false
    }

    /// Same as [`Metamodel::is_subtype_of`] but takes the subtype by name.
    pub fn is_subtype_name_of(&self, sub_name: &str, super_name: &str) -> bool {
        self.class(sub_name).is_some_and(|c| self.is_subtype_of(c, super_name))
    }

    /// Concrete classes assignable to `name` (including itself), in declaration order.
    pub fn concrete_subtypes_of(&self, name: &str) -> Vec<&MetaClass> {
        self.classes.iter().filter(|c| !c.is_abstract && self.is_subtype_of(c, name)).collect()
    }

    /// Checks every metamodel invariant and returns the broken ones in
    /// declaration order. An empty list means the metamodel is usable.
    pub fn validate(&self) -> Vec<MetamodelDefect> {
        let mut defects = Vec::new();
        let pkg = &self.package_name;
        let mut class_names = HashSet::new();

        for class in &self.classes {
            let qualified = format!("{pkg}.{}", class.name);
            if !class_names.insert(class.name.as_str()) {
                defects.push(defect(DefectCode::DuplicateClass, &qualified, "class name declared twice"));
            }
            for super_name in &class.super_types {
                if self.class(super_name).is_none() {
                    defects.push(defect(
                        DefectCode::UnresolvedType,
                        &qualified,
                        format!("supertype `{super_name}` does not exist"),
                    ));
                }
            }
            for attribute in &class.attributes {
                if !attribute.multiplicity.is_valid() {
                    defects.push(defect(
                        DefectCode::BadMultiplicity,
                        &format!("{qualified}.{}", attribute.name),
                        format!("invalid bounds {}", attribute.multiplicity),
                    ));
                }
            }
            for reference in &class.references {
                let element = format!("{qualified}.{}", reference.name);
                if !reference.multiplicity.is_valid() {
                    defects.push(defect(
                        DefectCode::BadMultiplicity,
                        &element,
                        format!("invalid bounds {}", reference.multiplicity),
                    ));
                }
                if self.class(&reference.target).is_none() {
                    defects.push(defect(
                        DefectCode::UnresolvedType,
                        &element,
                        format!("reference type `{}` does not exist", reference.target),
                    ));
                }
            }
            if self.on_supertype_cycle(class) {
                defects.push(defect(DefectCode::SupertypeCycle, &qualified, "class inherits from itself"));
                continue;
            }
            // Unresolved supertypes are already reported above.
            if let Err(MetamodelError::DuplicateFeature(name)) = self.all_features(class) {
                defects.push(defect(
                    DefectCode::DuplicateFeature,
                    &format!("{qualified}.{name}"),
                    format!("feature `{name}` is declared more than once"),
                ));
            }
            for reference in &class.references {
                if let Some(message) = self.opposite_problem(class, reference) {
                    defects.push(defect(
                        DefectCode::OppositeAsymmetry,
                        &format!("{qualified}.{}", reference.name),
                        message,
                    ));
                }
            }
        }
        defects
    }

    fn on_supertype_cycle(&self, class: &MetaClass) -> bool {
        let mut stack: Vec<&MetaClass> = class.super_types.iter().filter_map(|n| self.class(n)).collect();
        let mut seen = HashSet::new();
        while let Some(current) = stack.pop() {
            if current.name == class.name {
                return true;
            }
            if seen.insert(current.name.as_str()) {
                stack.extend(current.super_types.iter().filter_map(|n| self.class(n)));
            }
        }
        false
    }

    fn opposite_problem(&self, owner: &MetaClass, reference: &Reference) -> Option<String> {
        let opposite_name = reference.opposite.as_deref()?;
        let Some(target) = self.class(&reference.target) else {
            return Some(format!("opposite `{opposite_name}` declared on an unresolved type"));
        };
        let Ok(Some(opposite)) = self.feature(target, opposite_name) else {
            return Some(format!("`{}` has no feature `{opposite_name}`", target.name));
        };
        let Some(opposite) = opposite.as_reference() else {
            return Some(format!("`{}.{opposite_name}` is an attribute", target.name));
        };
        if opposite.opposite.as_deref() != Some(reference.name.as_str()) {
            return Some(format!(
                "`{}.{opposite_name}` does not name `{}` as its opposite",
                target.name, reference.name
            ));
        }
        if !self.is_subtype_of(owner, &opposite.target) {
            return Some(format!(
                "`{}.{opposite_name}` points at `{}`, not at `{}`",
                target.name, opposite.target, owner.name
            ));
        }
        if reference.containment && opposite.containment {
            return Some("both ends of the opposite pair are containments".to_owned());
        }
        None
    }
}

fn defect(code: DefectCode, element: &str, message: impl Into<String>) -> MetamodelDefect {
    MetamodelDefect { code, element: element.to_owned(), message: message.into() }
}

/// Identifier rule shared by package, class and feature names.
///
/// Leading underscores are excluded so that names never collide with the
/// reserved `_`-prefixed keys of the JSON views.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Mutable, generation-stamped map from package name to metamodel.
///
/// Every successful insert or removal bumps the generation. Snapshots share
/// storage with the registry and are never affected by later mutations.
#[derive(Debug, Clone, Default)]
pub struct MetamodelRegistry {
    entries: Arc<BTreeMap<String, Arc<Metamodel>>>,
    generation: u64,
}

impl MetamodelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Adds or replaces the package entry; returns the new generation.
    pub fn insert(&mut self, metamodel: Metamodel) -> u64 {
        Arc::make_mut(&mut self.entries).insert(metamodel.package_name.clone(), Arc::new(metamodel));
        self.generation += 1;
        self.generation
    }

    pub fn remove(&mut self, package_name: &str) -> Option<Arc<Metamodel>> {
        let removed = Arc::make_mut(&mut self.entries).remove(package_name)?;
        self.generation += 1;
        Some(removed)
    }

    pub fn contains(&self, package_name: &str) -> bool {
        self.entries.contains_key(package_name)
    }

    pub fn snapshot(&self) -> RegistrySnapshot {
        RegistrySnapshot { entries: Arc::clone(&self.entries), generation: self.generation }
    }
}

/// Immutable view of the registry at one generation.
#[derive(Debug, Clone, Default)]
pub struct RegistrySnapshot {
    entries: Arc<BTreeMap<String, Arc<Metamodel>>>,
    generation: u64,
}

impl RegistrySnapshot {
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Registered metamodels ordered by package name.
    pub fn metamodels(&self) -> impl Iterator<Item = &Arc<Metamodel>> {
        self.entries.values()
    }

    pub fn metamodel(&self, package_name: &str) -> Result<&Arc<Metamodel>, MetamodelError> {
        self.entries
            .get(package_name)
            .ok_or_else(|| MetamodelError::UnknownPackage(package_name.to_owned()))
    }

    pub fn resolve_class(&self, package_name: &str, class_name: &str) -> Result<&MetaClass, MetamodelError> {
        self.metamodel(package_name)?.resolve_class(class_name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn library() -> Metamodel {
        Metamodel::new("library", "http://www.example.org/library", "library")
            .with_class(
                MetaClass::new("Library")
                    .attribute(Attribute::new("name", DataType::String))
                    .reference(Reference::containment("books", "Book"))
                    .reference(Reference::containment("members", "Member")),
            )
            .with_class(
                MetaClass::new("Book")
                    .attribute(Attribute::new("title", DataType::String))
                    .attribute(Attribute::new("pages", DataType::Int))
                    .reference(Reference::new("borrowedBy", "Member").with_opposite("borrowed")),
            )
            .with_class(
                MetaClass::new("Member")
                    .attribute(Attribute::new("memberName", DataType::String))
                    .reference(
                        Reference::new("borrowed", "Book")
                            .with_opposite("borrowedBy")
                            .with_multiplicity(Multiplicity::MANY),
                    ),
            )
    }

    fn names(features: &[Feature<'_>]) -> Vec<String> {
        features.iter().map(|f| f.name().to_owned()).collect()
    }

    #[test]
    fn resolve_class_is_case_sensitive() {
        let mut registry = MetamodelRegistry::new();
        registry.insert(library());
        let snapshot = registry.snapshot();
        assert_eq!(snapshot.resolve_class("library", "Book").unwrap().name, "Book");
        assert_eq!(
            snapshot.resolve_class("library", "book"),
            Err(MetamodelError::UnknownClass { package: "library".into(), class: "book".into() })
        );
        assert_eq!(
            snapshot.resolve_class("nosuch", "Book"),
            Err(MetamodelError::UnknownPackage("nosuch".into()))
        );
    }

    #[test]
    fn features_without_inheritance_keep_declaration_order() {
        let mm = library();
        let book = mm.class("Book").unwrap();
        assert_eq!(names(&mm.all_features(book).unwrap()), ["title", "pages", "borrowedBy"]);
    }

    #[test]
    fn multiple_inheritance_linearizes_supertypes_first() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(MetaClass::new("A").attribute(Attribute::new("x", DataType::Int)))
            .with_class(MetaClass::new("B").attribute(Attribute::new("y", DataType::Int)))
            .with_class(
                MetaClass::new("C").extends("A").extends("B").attribute(Attribute::new("z", DataType::Int)),
            );
        let c = mm.class("C").unwrap();
        assert_eq!(names(&mm.all_features(c).unwrap()), ["x", "y", "z"]);
        assert!(mm.validate().is_empty());
    }

    #[test]
    fn diamond_contributes_shared_supertype_once() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(MetaClass::new("Root").attribute(Attribute::new("id", DataType::Int)))
            .with_class(MetaClass::new("L").extends("Root").attribute(Attribute::new("l", DataType::Int)))
            .with_class(MetaClass::new("R").extends("Root").attribute(Attribute::new("r", DataType::Int)))
            .with_class(MetaClass::new("D").extends("L").extends("R"));
        let d = mm.class("D").unwrap();
        assert_eq!(names(&mm.all_features(d).unwrap()), ["id", "l", "r"]);
    }

    #[test]
    fn inherited_name_clash_is_reported() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(MetaClass::new("A").attribute(Attribute::new("x", DataType::Int)))
            .with_class(MetaClass::new("C").extends("A").attribute(Attribute::new("x", DataType::String)));
        let c = mm.class("C").unwrap();
        assert_eq!(mm.all_features(c).unwrap_err(), MetamodelError::DuplicateFeature("x".into()));
        let defects = mm.validate();
        assert_eq!(defects.len(), 1);
        assert_eq!(defects[0].code, DefectCode::DuplicateFeature);
        assert_eq!(defects[0].element, "p.C.x");
    }

    #[test]
    fn supertype_cycle_is_an_error() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(MetaClass::new("A").extends("B"))
            .with_class(MetaClass::new("B").extends("A"));
        let a = mm.class("A").unwrap();
        assert!(matches!(mm.all_features(a), Err(MetamodelError::SupertypeCycle(_))));
        let codes: Vec<_> = mm.validate().iter().map(|d| d.code).collect();
        assert_eq!(codes, [DefectCode::SupertypeCycle, DefectCode::SupertypeCycle]);
    }

    #[test]
    fn subtype_checks() {
        let mm = library()
            .with_class(MetaClass::new("Novel").extends("Book"))
            .with_class(MetaClass::new("Epic").extends("Novel"));
        let book = mm.class("Book").unwrap();
        let novel = mm.class("Novel").unwrap();
        let epic = mm.class("Epic").unwrap();
        assert!(mm.is_subtype_of(book, "Book"));
        assert!(mm.is_subtype_of(novel, "Book"));
        assert!(mm.is_subtype_of(epic, "Book"));
        assert!(!mm.is_subtype_of(book, "Member"));
        assert!(!mm.is_subtype_of(book, "Novel"));
    }

    #[test]
    fn library_is_valid() {
        assert_eq!(library().validate(), Vec::new());
    }

    #[test]
    fn unresolved_reference_type() {
        let mut mm = library();
        mm.classes[1].references.push(Reference::new("ghost", "Ghost"));
        let defects = mm.validate();
        assert_eq!(defects.len(), 1);
        assert_eq!(defects[0].code, DefectCode::UnresolvedType);
        assert_eq!(defects[0].element, "library.Book.ghost");
    }

    #[test]
    fn one_sided_opposite() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(MetaClass::new("A").reference(Reference::new("r", "B").with_opposite("s")))
            .with_class(MetaClass::new("B").reference(Reference::new("s", "A")));
        let defects = mm.validate();
        assert_eq!(defects.len(), 1);
        assert_eq!(defects[0].code, DefectCode::OppositeAsymmetry);
        assert_eq!(defects[0].element, "p.A.r");
    }

    #[test]
    fn containment_on_both_ends_is_rejected() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(MetaClass::new("A").reference(Reference::containment("r", "B").with_opposite("s")))
            .with_class(MetaClass::new("B").reference(Reference::containment("s", "A").with_opposite("r")));
        let codes: Vec<_> = mm.validate().iter().map(|d| d.code).collect();
        assert_eq!(codes, [DefectCode::OppositeAsymmetry, DefectCode::OppositeAsymmetry]);
    }

    #[test]
    fn bad_multiplicity_and_duplicate_class() {
        let mm = Metamodel::new("p", "urn:p", "p")
            .with_class(
                MetaClass::new("A").attribute(Attribute::new("a", DataType::Int).with_multiplicity(Multiplicity::new(2, 1))),
            )
            .with_class(MetaClass::new("A"));
        let codes: Vec<_> = mm.validate().iter().map(|d| (d.code, d.element.clone())).collect();
        assert_eq!(
            codes,
            [(DefectCode::BadMultiplicity, "p.A.a".to_owned()), (DefectCode::DuplicateClass, "p.A".to_owned())]
        );
    }

    #[test]
    fn snapshots_are_value_stable() {
        let mut registry = MetamodelRegistry::new();
        assert_eq!(registry.insert(library()), 1);
        let before = registry.snapshot();
        registry.remove("library");
        let mut changed = library();
        changed.classes.pop();
        registry.insert(changed);
        assert_eq!(registry.generation(), 3);
        assert_eq!(before.generation(), 1);
        assert!(before.resolve_class("library", "Member").is_ok());
        assert!(registry.snapshot().resolve_class("library", "Member").is_err());
    }

    #[test]
    fn removing_unknown_package_keeps_generation() {
        let mut registry = MetamodelRegistry::new();
        assert!(registry.remove("nothing").is_none());
        assert_eq!(registry.generation(), 0);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("Book"));
        assert!(is_identifier("a_1"));
        assert!(!is_identifier(""));
        assert!(!is_identifier("_class"));
        assert!(!is_identifier("1abc"));
        assert!(!is_identifier("a-b"));
    }
}
