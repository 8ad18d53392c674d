use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use thiserror::Error;

use super::raw::{parse_document, RawElement, XmlWriter};
use super::{FragmentPath, XmiError, XMI_NS_URI, XSI_NS_URI};
use crate::metamodel::{Feature, MetaClass, Metamodel, Reference};
use crate::model::{ModelResource, ObjectId, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("object at `{0}` is not part of a containment tree")]
    NotATree(String),
    #[error("object at `{object}` references an object outside the tree through `{feature}`")]
    DanglingReference { object: String, feature: String },
    #[error("object at `{object}` has unknown class `{class}`")]
    UnknownClass { object: String, class: String },
    #[error("object at `{object}` has a slot `{feature}` its class does not declare")]
    UnknownFeature { object: String, feature: String },
}

struct PendingRefs {
    object: ObjectId,
    feature: String,
    raw: String,
}

/// Parses a model document against `metamodel`.
///
/// Only type-level conformance is checked here; multiplicities and opposite
/// coherence are left to the validator. Cross references are resolved after
/// the whole tree is built, then missing opposite ends are filled in.
pub fn parse_model(bytes: &[u8], metamodel: &Arc<Metamodel>, model_name: &str) -> Result<ModelResource, XmiError> {
    let doc = parse_document(bytes)?;
    let root = &doc.root;
    let (prefix, class_name) = root
        .name
        .split_once(':')
        .ok_or_else(|| XmiError::dialect(&root.name, "root element must be `{nsPrefix}:{Class}`"))?;
    if prefix != metamodel.ns_prefix {
        return Err(XmiError::dialect(
            &root.name,
            format!("prefix `{prefix}` does not match package prefix `{}`", metamodel.ns_prefix),
        ));
    }
    let declared = root.attr(&format!("xmlns:{prefix}"));
    if declared != Some(metamodel.ns_uri.as_str()) {
        return Err(XmiError::dialect(&root.name, format!("`xmlns:{prefix}` must be `{}`", metamodel.ns_uri)));
    }
    let class = metamodel.class(class_name).ok_or_else(|| XmiError::UnknownClass(class_name.to_owned()))?;
    if class.is_abstract {
        return Err(XmiError::AbstractInstantiation(class.name.clone()));
    }

    let mut resource = ModelResource::new(model_name, Arc::clone(metamodel), class_name);
    let mut pending = Vec::new();
    let root_id = resource.root_id();
    fill(&mut resource, metamodel, root_id, class, root, &mut pending)?;

    for refs in pending {
        let mut targets = Vec::new();
        for token in refs.raw.split_ascii_whitespace() {
            let path: FragmentPath = token
                .parse()
                .map_err(|_| XmiError::ValueParse { feature: refs.feature.clone(), raw: refs.raw.clone() })?;
            let target = resource.resolve(&path).map_err(|_| XmiError::DanglingPath(token.to_owned()))?;
            targets.push(target);
        }
        if !targets.is_empty() {
            resource.object_mut(refs.object).expect("pending object exists").references.insert(refs.feature, targets);
        }
    }

    reconcile_opposites(&mut resource);
    Ok(resource)
}

fn is_reserved(key: &str) -> bool {
    key == "xmlns" || key.starts_with("xmlns:") || key.starts_with("xmi:") || key.starts_with("xsi:")
}

fn fill(
    resource: &mut ModelResource,
    metamodel: &Metamodel,
    id: ObjectId,
    class: &MetaClass,
    elem: &RawElement,
    pending: &mut Vec<PendingRefs>,
) -> Result<(), XmiError> {
    let features = metamodel
        .all_features(class)
        .map_err(|e| XmiError::dialect(&elem.name, e.to_string()))?;
    let lookup = |name: &str| -> Result<Feature<'_>, XmiError> {
        features
            .iter()
            .find(|f| f.name() == name)
            .copied()
            .ok_or_else(|| XmiError::UnknownFeature { class: class.name.clone(), feature: name.to_owned() })
    };

    for (key, raw) in &elem.attributes {
        if is_reserved(key) {
            continue;
        }
        let feature = lookup(key)?;
        if let Some(attribute) = feature.as_attribute() {
            let value = Value::parse(attribute.data_type, raw)
                .map_err(|_| XmiError::ValueParse { feature: key.clone(), raw: raw.clone() })?;
            resource.object_mut(id).expect("object exists").attributes.insert(key.clone(), value);
        } else if feature.as_cross_reference().is_some() {
            pending.push(PendingRefs { object: id, feature: key.clone(), raw: raw.clone() });
        } else {
            return Err(XmiError::dialect(&elem.name, format!("containment `{key}` must be written as child elements")));
        }
    }

    for child in &elem.children {
        let feature = lookup(&child.name)?;
        let containment = feature
            .as_containment()
            .ok_or_else(|| XmiError::dialect(&child.name, "only containment features may be nested"))?;
        let child_class = child_class(metamodel, containment, child)?;
        let child_id = resource.create_object(child_class.name.clone());
        resource.object_mut(id).expect("object exists").slot_mut(&containment.name, true).push(child_id);
        fill(resource, metamodel, child_id, child_class, child, pending)?;
    }
    Ok(())
}

fn child_class<'m>(metamodel: &'m Metamodel, containment: &Reference, elem: &RawElement) -> Result<&'m MetaClass, XmiError> {
    let class = match elem.attr("xsi:type") {
        None => metamodel.class(&containment.target).ok_or_else(|| XmiError::UnknownClass(containment.target.clone()))?,
        Some(raw) => {
            let name = match raw.split_once(':') {
                Some((prefix, name)) if prefix == metamodel.ns_prefix => name,
                _ => return Err(XmiError::dialect(&elem.name, format!("`xsi:type` must be `{}:{{Class}}`", metamodel.ns_prefix))),
            };
            let class = metamodel.class(name).ok_or_else(|| XmiError::UnknownClass(name.to_owned()))?;
            if !metamodel.is_subtype_of(class, &containment.target) {
                return Err(XmiError::dialect(
                    &elem.name,
                    format!("`{name}` is not assignable to `{}`", containment.target),
                ));
            }
            class
        }
    };
    if class.is_abstract {
        return Err(XmiError::AbstractInstantiation(class.name.clone()));
    }
    Ok(class)
}

/// Resolves the opposite of `reference` on its target class.
pub(crate) fn opposite_of<'m>(metamodel: &'m Metamodel, reference: &Reference) -> Option<Feature<'m>> {
    let name = reference.opposite.as_deref()?;
    let target = metamodel.class(&reference.target)?;
    metamodel.feature(target, name).ok().flatten().filter(|f| f.as_reference().is_some())
}

/// Appends the missing non-containment end of every opposite pair, visiting
/// sources in document order.
fn reconcile_opposites(resource: &mut ModelResource) {
    let metamodel = Arc::clone(resource.metamodel());
    let mut additions: Vec<(ObjectId, String, ObjectId)> = Vec::new();
    for (id, _) in resource.document_order() {
        let object = resource.object(id).expect("ordered object exists");
        let Some(class) = metamodel.class(&object.class_name) else { continue };
        let Ok(features) = metamodel.all_features(class) else { continue };
        for feature in features {
            let Some(reference) = feature.as_reference() else { continue };
            let Some(opposite) = opposite_of(&metamodel, reference) else { continue };
            let opposite_ref = opposite.as_reference().expect("opposite is a reference");
            if opposite_ref.containment {
                continue;
            }
            for &target in object.slot(&reference.name, reference.containment) {
                let accepts = resource
                    .class_of(target)
                    .and_then(|c| metamodel.feature(c, &opposite_ref.name).ok().flatten())
                    .is_some_and(|f| f.as_cross_reference().is_some());
                if accepts {
                    additions.push((target, opposite_ref.name.clone(), id));
                }
            }
        }
    }
    for (target, feature, source) in additions {
        let slot = resource.object_mut(target).expect("target exists").slot_mut(&feature, false);
        if !slot.contains(&source) {
            slot.push(source);
        }
    }
}

/// Decides which end of an opposite pair is written: the end declared by the
/// lexicographically smaller class name, ties broken by feature name. The
/// non-containment end of a containment pair is implied by nesting and never
/// written.
pub(crate) fn is_serialized_end(metamodel: &Metamodel, owner: &MetaClass, reference: &Reference) -> bool {
    if reference.containment {
        return true;
    }
    let Some(opposite) = opposite_of(metamodel, reference) else { return true };
    if opposite.as_reference().is_some_and(|r| r.containment) {
        return false;
    }
    (owner.name.as_str(), reference.name.as_str()) <= (opposite.owner.name.as_str(), opposite.name())
}

/// Renders a resource in the model dialect.
///
/// Features are written in linearization order; for an opposite pair only the
/// end chosen by [`is_serialized_end`] appears in the document, and parsing
/// restores the other.
pub fn serialize_model(resource: &ModelResource) -> Result<String, SerializeError> {
    let metamodel = resource.metamodel();
    let order = tree_order(resource)?;
    let paths: HashMap<ObjectId, String> = order.iter().map(|(id, p)| (*id, p.to_string())).collect();

    let mut writer = XmlWriter::new();
    let root = resource.root();
    let root_name = format!("{}:{}", metamodel.ns_prefix, root.class_name);
    let xmlns_prefix = format!("xmlns:{}", metamodel.ns_prefix);
    let header = [
        ("xmi:version", "2.0"),
        ("xmlns:xmi", XMI_NS_URI),
        ("xmlns:xsi", XSI_NS_URI),
        (xmlns_prefix.as_str(), metamodel.ns_uri.as_str()),
    ];
    write_object(resource, &paths, resource.root_id(), &root_name, None, &header, 0, &mut writer)?;
    Ok(writer.finish())
}

/// Document order plus a check that every containment slot forms a tree over
/// existing objects.
fn tree_order(resource: &ModelResource) -> Result<Vec<(ObjectId, FragmentPath)>, SerializeError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut stack = vec![(resource.root_id(), FragmentPath::root())];
    while let Some((id, path)) = stack.pop() {
        if !seen.insert(id) {
            return Err(SerializeError::NotATree(path.to_string()));
        }
        let object = resource.object(id).ok_or_else(|| SerializeError::NotATree(path.to_string()))?;
        let mut children = Vec::new();
        for feature in resource.containment_order(object) {
            for (index, child) in object.contained(&feature).iter().enumerate() {
                children.push((*child, path.child(&feature, index)));
            }
        }
        out.push((id, path));
        stack.extend(children.into_iter().rev());
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn write_object(
    resource: &ModelResource,
    paths: &HashMap<ObjectId, String>,
    id: ObjectId,
    element: &str,
    xsi_type: Option<String>,
    header: &[(&str, &str)],
    depth: usize,
    writer: &mut XmlWriter,
) -> Result<(), SerializeError> {
    let metamodel = resource.metamodel();
    let object = resource.object(id).expect("tree object exists");
    let path = &paths[&id];
    let class = metamodel
        .class(&object.class_name)
        .ok_or_else(|| SerializeError::UnknownClass { object: path.clone(), class: object.class_name.clone() })?;
    let features = metamodel
        .all_features(class)
        .map_err(|_| SerializeError::UnknownClass { object: path.clone(), class: object.class_name.clone() })?;

    let declared: HashSet<&str> = features.iter().map(Feature::name).collect();
    let undeclared = object
        .attributes
        .keys()
        .chain(object.containments.keys())
        .chain(object.references.keys())
        .find(|k| !declared.contains(k.as_str()));
    if let Some(feature) = undeclared {
        return Err(SerializeError::UnknownFeature { object: path.clone(), feature: feature.clone() });
    }

    let mut owned: Vec<(String, String)> = Vec::new();
    if let Some(t) = xsi_type {
        owned.push(("xsi:type".to_owned(), t));
    }
    let mut nested = Vec::new();
    for feature in &features {
        if let Some(attribute) = feature.as_attribute() {
            if let Some(value) = object.attribute(&attribute.name) {
                owned.push((attribute.name.clone(), value.canonical()));
            }
        } else if let Some(reference) = feature.as_containment() {
            nested.push(reference);
        } else if let Some(reference) = feature.as_cross_reference() {
            let targets = object.referenced(&reference.name);
            if targets.is_empty() || !is_serialized_end(metamodel, feature.owner, reference) {
                continue;
            }
            let rendered = targets
                .iter()
                .map(|t| paths.get(t).map(String::as_str))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| SerializeError::DanglingReference { object: path.clone(), feature: reference.name.clone() })?;
            owned.push((reference.name.clone(), rendered.join(" ")));
        }
    }

    let mut attrs: Vec<(&str, &str)> = header.to_vec();
    attrs.extend(owned.iter().map(|(k, v)| (k.as_str(), v.as_str())));
    let has_children = nested.iter().any(|r| !object.contained(&r.name).is_empty());
    if !has_children {
        writer.empty(depth, element, &attrs);
        return Ok(());
    }
    writer.open(depth, element, &attrs);
    for reference in nested {
        for &child in object.contained(&reference.name) {
            let child_class = &resource.object(child).expect("tree object exists").class_name;
            let xsi_type = (*child_class != reference.target).then(|| format!("{}:{child_class}", metamodel.ns_prefix));
            write_object(resource, paths, child, &reference.name, xsi_type, &[], depth + 1, writer)?;
        }
    }
    writer.close(depth, element);
    Ok(())
}

/// `/` yields the root; each segment steps into a containment slot.
pub fn resolve_fragment_path(resource: &ModelResource, path: &FragmentPath) -> Result<ObjectId, XmiError> {
    resource.resolve(path).map_err(|e| XmiError::DanglingPath(e.0))
}

pub fn fragment_path_of(resource: &ModelResource, object: ObjectId) -> Option<FragmentPath> {
    resource.path_of(object)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::xmi::parse_metamodel;

    const LIBRARY: &str = include_str!("../../fixtures/library.ecore");
    const ALEXANDRIA: &str = include_str!("../../fixtures/alexandria.xmi");

    fn library() -> Arc<Metamodel> {
        Arc::new(parse_metamodel(LIBRARY.as_bytes()).unwrap())
    }

    fn title(resource: &ModelResource, id: ObjectId) -> String {
        resource.object(id).unwrap().attribute("title").unwrap().canonical()
    }

    #[test]
    fn alexandria_parses_with_reconciled_opposites() {
        let r = parse_model(ALEXANDRIA.as_bytes(), &library(), "alexandria").unwrap();
        assert_eq!(r.document_order().len(), 4);
        let ada = r.resolve(&"//@members.0".parse().unwrap()).unwrap();
        let dune = r.resolve(&"//@books.1".parse().unwrap()).unwrap();
        assert_eq!(title(&r, dune), "Dune");
        assert_eq!(r.object(ada).unwrap().referenced("borrowed"), &[dune]);
        assert_eq!(r.object(dune).unwrap().referenced("borrowedBy"), &[ada]);
        assert_eq!(r.object(dune).unwrap().attribute("pages"), Some(&Value::Int(412)));
    }

    #[test]
    fn fragment_paths_are_inverse() {
        let r = parse_model(ALEXANDRIA.as_bytes(), &library(), "alexandria").unwrap();
        assert_eq!(resolve_fragment_path(&r, &FragmentPath::root()).unwrap(), r.root_id());
        let ulysses = resolve_fragment_path(&r, &"//@books.0".parse().unwrap()).unwrap();
        assert_eq!(title(&r, ulysses), "Ulysses");
        for (id, path) in r.document_order() {
            assert_eq!(fragment_path_of(&r, id), Some(path.clone()));
            assert_eq!(resolve_fragment_path(&r, &path).unwrap(), id);
        }
        let err = resolve_fragment_path(&r, &"//@members.0/@borrowed.0".parse().unwrap()).unwrap_err();
        assert!(matches!(err, XmiError::DanglingPath(_)));
    }

    #[test]
    fn sibling_deletion_shifts_paths() {
        let mut r = parse_model(ALEXANDRIA.as_bytes(), &library(), "alexandria").unwrap();
        let ulysses = r.resolve(&"//@books.0".parse().unwrap()).unwrap();
        let dune = r.resolve(&"//@books.1".parse().unwrap()).unwrap();
        r.delete_subtrees(&[ulysses]);
        assert_eq!(fragment_path_of(&r, dune).unwrap().to_string(), "//@books.0");
    }

    #[test]
    fn serializes_the_smaller_owner_side() {
        let r = parse_model(ALEXANDRIA.as_bytes(), &library(), "alexandria").unwrap();
        let text = serialize_model(&r).unwrap();
        assert!(text.contains(r#"<books title="Dune" pages="412" borrowedBy="//@members.0"/>"#), "{text}");
        assert!(text.contains(r#"<members memberName="Ada"/>"#), "{text}");
        assert!(!text.contains("borrowed=\""), "{text}");
    }

    #[test]
    fn exact_layout() {
        let r = parse_model(ALEXANDRIA.as_bytes(), &library(), "alexandria").unwrap();
        let expected = concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<library:Library xmi:version=\"2.0\" xmlns:xmi=\"http://www.omg.org/XMI\" ",
            "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" ",
            "xmlns:library=\"http://www.example.org/library\" name=\"Alexandria\">\n",
            "  <books title=\"Ulysses\" pages=\"730\"/>\n",
            "  <books title=\"Dune\" pages=\"412\" borrowedBy=\"//@members.0\"/>\n",
            "  <members memberName=\"Ada\"/>\n",
            "</library:Library>\n",
        );
        assert_eq!(serialize_model(&r).unwrap(), expected);
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let mm = library();
        let r = parse_model(ALEXANDRIA.as_bytes(), &mm, "alexandria").unwrap();
        let once = serialize_model(&r).unwrap();
        let again = parse_model(once.as_bytes(), &mm, "alexandria").unwrap();
        assert_eq!(serialize_model(&again).unwrap(), once);
        let ada = again.resolve(&"//@members.0".parse().unwrap()).unwrap();
        assert_eq!(again.object(ada).unwrap().referenced("borrowed").len(), 1);
    }

    #[test]
    fn minimal_document() {
        let mm = library();
        let r = ModelResource::new("empty", Arc::clone(&mm), "Library");
        let text = serialize_model(&r).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().ends_with("/>"));
        assert_eq!(parse_model(text.as_bytes(), &mm, "empty").unwrap().document_order().len(), 1);
    }

    type Case = (&'static str, fn(&XmiError) -> bool);

    #[test]
    fn type_level_failures() {
        let mm = library();
        let cases: [Case; 7] = [
            ("<library:Shelf xmlns:library=\"http://www.example.org/library\"/>", |e| {
                matches!(e, XmiError::UnknownClass(c) if c == "Shelf")
            }),
            ("<library:Library xmlns:library=\"http://www.example.org/library\" isbn=\"1\"/>", |e| {
                matches!(e, XmiError::UnknownFeature { feature, .. } if feature == "isbn")
            }),
            ("<library:Library xmlns:library=\"http://www.example.org/library\"><books pages=\"many\"/></library:Library>", |e| {
                matches!(e, XmiError::ValueParse { feature, raw } if feature == "pages" && raw == "many")
            }),
            (
                "<library:Library xmlns:library=\"http://www.example.org/library\"><books/><books/><members borrowed=\"//@books.9\"/></library:Library>",
                |e| matches!(e, XmiError::DanglingPath(p) if p == "//@books.9"),
            ),
            ("<other:Library xmlns:other=\"http://www.example.org/library\"/>", |e| {
                matches!(e, XmiError::DialectViolation { .. })
            }),
            ("<library:Library xmlns:library=\"urn:wrong\"/>", |e| matches!(e, XmiError::DialectViolation { .. })),
            (
                "<library:Library xmlns:library=\"http://www.example.org/library\"><books xsi:type=\"library:Member\"/></library:Library>",
                |e| matches!(e, XmiError::DialectViolation { .. }),
            ),
        ];
        for (doc, check) in cases {
            let err = parse_model(doc.as_bytes(), &mm, "m").unwrap_err();
            assert!(check(&err), "{doc} -> {err:?}");
        }
    }

    #[test]
    fn abstract_and_polymorphic_children() {
        use crate::metamodel::{Attribute, DataType, MetaClass, Reference};
        let mm = Arc::new(
            Metamodel::new("shop", "urn:shop", "shop")
                .with_class(MetaClass::new("Shop").reference(Reference::containment("items", "Item")))
                .with_class(MetaClass::new("Item").abstract_class().attribute(Attribute::new("sku", DataType::String)))
                .with_class(MetaClass::new("Tool").extends("Item").attribute(Attribute::new("weight", DataType::Double))),
        );
        let doc = "<shop:Shop xmlns:shop=\"urn:shop\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\">\
                   <items xsi:type=\"shop:Tool\" sku=\"a\" weight=\"1e3\"/></shop:Shop>";
        let r = parse_model(doc.as_bytes(), &mm, "m").unwrap();
        let text = serialize_model(&r).unwrap();
        assert!(text.contains(r#"<items xsi:type="shop:Tool" sku="a" weight="1000"/>"#), "{text}");

        let bare = "<shop:Shop xmlns:shop=\"urn:shop\"><items sku=\"a\"/></shop:Shop>";
        assert_eq!(parse_model(bare.as_bytes(), &mm, "m").unwrap_err(), XmiError::AbstractInstantiation("Item".into()));
    }

    #[test]
    fn not_a_tree_is_refused() {
        let mm = library();
        let mut r = parse_model(ALEXANDRIA.as_bytes(), &mm, "alexandria").unwrap();
        let dune = r.resolve(&"//@books.1".parse().unwrap()).unwrap();
        let root = r.root_id();
        r.object_mut(root).unwrap().slot_mut("books", true).push(dune);
        assert_eq!(serialize_model(&r).unwrap_err(), SerializeError::NotATree("//@books.2".into()));
    }

    #[test]
    fn unset_versus_empty_string() {
        let mm = library();
        let doc = "<library:Library xmlns:library=\"http://www.example.org/library\"><books title=\"\"/><books/></library:Library>";
        let r = parse_model(doc.as_bytes(), &mm, "m").unwrap();
        let text = serialize_model(&r).unwrap();
        assert!(text.contains("<books title=\"\"/>\n  <books/>"), "{text}");
    }
}
