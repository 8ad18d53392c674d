//! Structural conformance of a model against its metamodel.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::metamodel::{Feature, Metamodel};
use crate::model::{ModelObject, ModelResource, ObjectId};
use crate::xmi::FragmentPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationCode {
    Type,
    MultLower,
    MultUpper,
    Abstract,
    Dangling,
    Opposite,
    Tree,
    UnknownFeature,
}

impl ViolationCode {
    pub const ALL: [ViolationCode; 8] = [
        ViolationCode::Type,
        ViolationCode::MultLower,
        ViolationCode::MultUpper,
        ViolationCode::Abstract,
        ViolationCode::Dangling,
        ViolationCode::Opposite,
        ViolationCode::Tree,
        ViolationCode::UnknownFeature,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::Type => "VAL_TYPE",
            ViolationCode::MultLower => "VAL_MULT_LOWER",
            ViolationCode::MultUpper => "VAL_MULT_UPPER",
            ViolationCode::Abstract => "VAL_ABSTRACT",
            ViolationCode::Dangling => "VAL_DANGLING",
            ViolationCode::Opposite => "VAL_OPPOSITE",
            ViolationCode::Tree => "VAL_TREE",
            ViolationCode::UnknownFeature => "VAL_UNKNOWN_FEATURE",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub object_path: FragmentPath,
    pub feature: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub package_name: String,
    pub model_name: String,
    pub generation: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        self.violations.iter().map(|v| v.code).collect()
    }
}

struct Checker<'a> {
    resource: &'a ModelResource,
    metamodel: &'a Metamodel,
    reachable: HashSet<ObjectId>,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn report(&mut self, code: ViolationCode, path: &FragmentPath, feature: Option<&str>, message: String) {
        self.out.push(Violation { code, object_path: path.clone(), feature: feature.map(str::to_owned), message });
    }

    fn check_object(&mut self, object: &ModelObject, path: &FragmentPath, contained: &mut HashSet<ObjectId>) {
        let Some(class) = self.metamodel.class(&object.class_name) else {
            self.report(ViolationCode::Type, path, None, format!("unknown class `{}`", object.class_name));
            return;
        };
        if class.is_abstract {
            self.report(ViolationCode::Abstract, path, None, format!("class `{}` is abstract", class.name));
        }
        let features = match self.metamodel.all_features(class) {
            Ok(f) => f,
            Err(e) => {
                self.report(ViolationCode::Type, path, None, e.to_string());
                return;
            }
        };
        let by_name: HashMap<&str, Feature<'_>> = features.iter().map(|f| (f.name(), *f)).collect();

        // Slot keys and value kinds.
        for (name, value) in &object.attributes {
            match by_name.get(name.as_str()).map(|f| f.as_attribute()) {
                None => self.unknown(path, name, &class.name),
                Some(None) => self.report(ViolationCode::Type, path, Some(name), format!("`{name}` is not an attribute")),
                Some(Some(a)) if a.data_type != value.data_type() => self.report(
                    ViolationCode::Type,
                    path,
                    Some(name),
                    format!("`{name}` expects {:?}, found {:?}", a.data_type, value.data_type()),
                ),
                Some(Some(_)) => {}
            }
        }
        for (slots, containment) in [(&object.containments, true), (&object.references, false)] {
            for name in slots.keys() {
                match by_name.get(name.as_str()).map(|f| f.as_reference()) {
                    None => self.unknown(path, name, &class.name),
                    Some(Some(r)) if r.containment == containment => {}
                    _ => {
                        let kind = if containment { "containment" } else { "cross reference" };
                        self.report(ViolationCode::Type, path, Some(name), format!("`{name}` is not a {kind}"));
                    }
                }
            }
        }

        for feature in &features {
            let name = feature.name();
            let count = match feature.as_reference() {
                Some(r) => object.slot(name, r.containment).len(),
                None => usize::from(object.attributes.contains_key(name)),
            };
            let m = feature.multiplicity();
            if m.below_lower(count) {
                self.report(ViolationCode::MultLower, path, Some(name), format!("`{name}` has {count} values, needs at least {}", m.lower));
            }
            if m.above_upper(count) {
                self.report(ViolationCode::MultUpper, path, Some(name), format!("`{name}` has {count} values, allows at most {}", m.upper));
            }

            let Some(reference) = feature.as_reference() else { continue };
            let opposite = reference.opposite.as_deref();
            for &target in object.slot(name, reference.containment) {
                if !self.reachable.contains(&target) {
                    self.report(ViolationCode::Dangling, path, Some(name), format!("`{name}` refers to an object outside the model"));
                    continue;
                }
                let target_obj = self.resource.object(target).expect("reachable object exists");
                if !self.metamodel.is_subtype_name_of(&target_obj.class_name, &reference.target) {
                    self.report(
                        ViolationCode::Type,
                        path,
                        Some(name),
                        format!("`{name}` holds a `{}`, expected `{}`", target_obj.class_name, reference.target),
                    );
                }
                if let Some(opposite) = opposite {
                    let back = target_obj.containments.get(opposite).or_else(|| target_obj.references.get(opposite));
                    if !back.is_some_and(|ids| ids.contains(&object.id())) {
                        self.report(
                            ViolationCode::Opposite,
                            path,
                            Some(name),
                            format!("target of `{name}` does not list this object in `{opposite}`"),
                        );
                    }
                }
                if reference.containment && !contained.insert(target) {
                    self.report(ViolationCode::Tree, path, Some(name), format!("`{name}` holds an object that already has a container"));
                }
            }
        }
    }

    fn unknown(&mut self, path: &FragmentPath, name: &str, class: &str) {
        self.report(ViolationCode::UnknownFeature, path, Some(name), format!("class `{class}` has no feature `{name}`"));
    }
}

/// Checks `resource` against `metamodel` and reports every violation, object
/// by object in document order.
pub fn validate_resource(resource: &ModelResource, metamodel: &Metamodel, generation: u64) -> ValidationReport {
    let order = resource.document_order();
    let mut checker = Checker {
        resource,
        metamodel,
        reachable: order.iter().map(|(id, _)| *id).collect(),
        out: Vec::new(),
    };
    // The root counts as contained so that any slot holding it is a tree violation.
    let mut contained = HashSet::from([resource.root_id()]);
    for (id, path) in &order {
        let object = resource.object(*id).expect("ordered object exists");
        checker.check_object(object, path, &mut contained);
    }
    ValidationReport {
        package_name: resource.package_name().to_owned(),
        model_name: resource.model_name().to_owned(),
        generation,
        violations: checker.out,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::metamodel::Multiplicity;
    use crate::model::Value;
    use crate::xmi::{parse_metamodel, parse_model};

    const LIBRARY: &str = include_str!("../fixtures/library.ecore");
    const ALEXANDRIA: &str = include_str!("../fixtures/alexandria.xmi");

    fn alexandria() -> ModelResource {
        let mm = Arc::new(parse_metamodel(LIBRARY.as_bytes()).unwrap());
        parse_model(ALEXANDRIA.as_bytes(), &mm, "alexandria").unwrap()
    }

    fn at(r: &ModelResource, path: &str) -> ObjectId {
        r.resolve(&path.parse().unwrap()).unwrap()
    }

    fn validate(r: &ModelResource) -> ValidationReport {
        validate_resource(r, r.metamodel(), 1)
    }

    #[test]
    fn fixture_is_clean() {
        let r = alexandria();
        let report = validate(&r);
        assert!(report.is_clean(), "{report:?}");
        assert_eq!(report.model_name, "alexandria");
    }

    #[test]
    fn upper_bound_on_single_valued_reference() {
        let mut r = alexandria();
        let root = r.root_id();
        let second = r.create_object("Member");
        r.object_mut(root).unwrap().slot_mut("members", true).push(second);
        let ada = at(&r, "//@members.0");
        let dune = at(&r, "//@books.1");
        r.object_mut(dune).unwrap().slot_mut("borrowedBy", false).push(second);
        r.object_mut(second).unwrap().slot_mut("borrowed", false).push(dune);
        assert_eq!(r.object(dune).unwrap().referenced("borrowedBy"), &[ada, second]);

        let report = validate(&r);
        assert_eq!(report.codes(), vec![ViolationCode::MultUpper]);
        assert_eq!(report.violations[0].object_path.to_string(), "//@books.1");
        assert_eq!(report.violations[0].feature.as_deref(), Some("borrowedBy"));
    }

    #[test]
    fn required_attribute_missing() {
        let mut mm = parse_metamodel(LIBRARY.as_bytes()).unwrap();
        mm.classes[0].attributes[0].multiplicity = Multiplicity::REQUIRED;
        let mm = Arc::new(mm);
        let r = ModelResource::new("m", Arc::clone(&mm), "Library");
        let report = validate_resource(&r, &mm, 3);
        assert_eq!(report.codes(), vec![ViolationCode::MultLower]);
        assert_eq!(report.generation, 3);
        assert!(report.violations[0].object_path.is_root());
    }

    #[test]
    fn one_sided_opposite() {
        let mut r = alexandria();
        let dune = at(&r, "//@books.1");
        r.object_mut(dune).unwrap().references.remove("borrowedBy");
        let report = validate(&r);
        assert_eq!(report.codes(), vec![ViolationCode::Opposite]);
        assert_eq!(report.violations[0].object_path.to_string(), "//@members.0");
    }

    #[test]
    fn dangling_and_tree() {
        let mut r = alexandria();
        let ghost = r.create_object("Book");
        let ada = at(&r, "//@members.0");
        r.object_mut(ada).unwrap().slot_mut("borrowed", false).push(ghost);
        assert_eq!(validate(&r).codes(), vec![ViolationCode::Dangling]);

        let mut r = alexandria();
        let ulysses = at(&r, "//@books.0");
        let root = r.root_id();
        r.object_mut(root).unwrap().slot_mut("books", true).push(ulysses);
        let report = validate(&r);
        assert_eq!(report.codes(), vec![ViolationCode::Tree]);
        assert!(report.violations[0].object_path.is_root());
    }

    #[test]
    fn kinds_and_unknown_slots() {
        let mut r = alexandria();
        let dune = at(&r, "//@books.1");
        let book = r.object_mut(dune).unwrap();
        book.attributes.insert("pages".into(), Value::String("412".into()));
        book.attributes.insert("isbn".into(), Value::String("x".into()));
        let report = validate(&r);
        assert_eq!(report.codes(), vec![ViolationCode::UnknownFeature, ViolationCode::Type]);

        let mut r = alexandria();
        let root = r.root_id();
        r.object_mut(root).unwrap().class_name = "Book".into();
        assert!(validate(&r).codes().contains(&ViolationCode::UnknownFeature));
    }

    #[test]
    fn idempotent() {
        let mut r = alexandria();
        let dune = at(&r, "//@books.1");
        r.object_mut(dune).unwrap().references.clear();
        assert_eq!(validate(&r), validate(&r));
    }
}
