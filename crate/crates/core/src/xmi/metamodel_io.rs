use crate::metamodel::{is_identifier, Attribute, DataType, MetaClass, Metamodel, Multiplicity, Reference};

use super::raw::{parse_document, RawElement, XmlWriter};
use super::{XmiError, XMI_NS_URI, XSI_NS_URI};

pub const ECORE_NS_URI: &str = "http://www.eclipse.org/emf/2002/Ecore";

const PACKAGE_TAG: &str = "ecore:EPackage";
const CLASSIFIER_TAG: &str = "eClassifiers";
const FEATURE_TAG: &str = "eStructuralFeatures";
const ANNOTATION_TAG: &str = "eAnnotations";

/// Parses an `.ecore` document. The result has passed
/// [`Metamodel::validate`]; otherwise the first defect is returned.
pub fn parse_metamodel(bytes: &[u8]) -> Result<Metamodel, XmiError> {
    let doc = parse_document(bytes)?;
    let root = &doc.root;
    if root.name != PACKAGE_TAG {
        return Err(XmiError::dialect(&root.name, format!("root element must be `{PACKAGE_TAG}`")));
    }
    let mut metamodel = Metamodel::new(
        identifier(root, "name")?,
        root.require_attr("nsURI")?,
        identifier(root, "nsPrefix")?,
    );

    // (owner, feature, class named in eOpposite) checked once all classes exist.
    let mut opposite_owners = Vec::new();
    for child in &root.children {
        match child.name.as_str() {
            CLASSIFIER_TAG => {
                let class = parse_class(child, &mut opposite_owners)?;
                metamodel.classes.push(class);
            }
            ANNOTATION_TAG => {}
            other => return Err(XmiError::dialect(other, "unexpected element in package")),
        }
    }

    if let Some(defect) = metamodel.validate().into_iter().next() {
        return Err(XmiError::MetamodelDefect(defect));
    }
    for (owner, feature, declared_on) in opposite_owners {
        let reference = metamodel
            .class(&owner)
            .and_then(|c| c.references.iter().find(|r| r.name == feature))
            .expect("collected from the parsed classes");
        let target = metamodel.class(&reference.target).expect("validated");
        if !metamodel.is_subtype_of(target, &declared_on) {
            return Err(XmiError::dialect(
                FEATURE_TAG,
                format!("eOpposite of `{owner}.{feature}` names `{declared_on}`, which is not a supertype of `{}`", target.name),
            ));
        }
    }
    Ok(metamodel)
}

fn identifier(elem: &RawElement, attr: &str) -> Result<String, XmiError> {
    let value = elem.require_attr(attr)?;
    if !is_identifier(value) {
        return Err(XmiError::dialect(&elem.name, format!("`{attr}` value `{value}` is not a valid identifier")));
    }
    Ok(value.to_owned())
}

fn flag(elem: &RawElement, attr: &str) -> Result<bool, XmiError> {
    match elem.attr(attr) {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(other) => Err(XmiError::dialect(&elem.name, format!("`{attr}` must be true or false, got `{other}`"))),
    }
}

fn bound(elem: &RawElement, attr: &str, default: i32) -> Result<i32, XmiError> {
    match elem.attr(attr) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|_| XmiError::dialect(&elem.name, format!("`{attr}` must be an integer, got `{raw}`"))),
    }
}

/// `#//Name` → `Name`.
fn local_class_ref<'a>(elem: &RawElement, raw: &'a str) -> Result<&'a str, XmiError> {
    let name = raw.strip_prefix("#//").ok_or_else(|| {
        XmiError::dialect(&elem.name, format!("`{raw}` is not a local type reference; cross-package references are not supported"))
    })?;
    if !is_identifier(name) {
        return Err(XmiError::dialect(&elem.name, format!("`{raw}` is not a valid type reference")));
    }
    Ok(name)
}

fn parse_class(elem: &RawElement, opposite_owners: &mut Vec<(String, String, String)>) -> Result<MetaClass, XmiError> {
    match elem.attr("xsi:type") {
        Some("ecore:EClass") => {}
        Some(other) => return Err(XmiError::dialect(CLASSIFIER_TAG, format!("unsupported classifier type `{other}`"))),
        None => return Err(XmiError::dialect(CLASSIFIER_TAG, "missing `xsi:type`")),
    }
    let mut class = MetaClass::new(identifier(elem, "name")?);
    class.is_abstract = flag(elem, "abstract")?;
    if let Some(supers) = elem.attr("eSuperTypes") {
        for raw in supers.split_whitespace() {
            class.super_types.push(local_class_ref(elem, raw)?.to_owned());
        }
    }
    for child in &elem.children {
        match child.name.as_str() {
            FEATURE_TAG => match child.attr("xsi:type") {
                Some("ecore:EAttribute") => class.attributes.push(parse_attribute(child)?),
                Some("ecore:EReference") => {
                    let (reference, declared_on) = parse_reference(child)?;
                    if let Some(declared_on) = declared_on {
                        opposite_owners.push((class.name.clone(), reference.name.clone(), declared_on));
                    }
                    class.references.push(reference);
                }
                Some(other) => return Err(XmiError::dialect(FEATURE_TAG, format!("unsupported feature type `{other}`"))),
                None => return Err(XmiError::dialect(FEATURE_TAG, "missing `xsi:type`")),
            },
            ANNOTATION_TAG => {}
            other => return Err(XmiError::dialect(other, format!("unexpected element in class `{}`", class.name))),
        }
    }
    Ok(class)
}

fn parse_attribute(elem: &RawElement) -> Result<Attribute, XmiError> {
    let name = identifier(elem, "name")?;
    let e_type = elem.require_attr("eType")?;
    let type_name = e_type
        .rsplit_once("#//")
        .map(|(_, suffix)| suffix)
        .ok_or_else(|| XmiError::dialect(FEATURE_TAG, format!("`{e_type}` is not an Ecore data type reference")))?;
    let data_type = DataType::from_ecore_name(type_name)
        .ok_or_else(|| XmiError::dialect(FEATURE_TAG, format!("unsupported data type `{type_name}`")))?;
    let multiplicity = Multiplicity::new(bound(elem, "lowerBound", 0)?, bound(elem, "upperBound", 1)?);
    if multiplicity.is_many() {
        return Err(XmiError::dialect(FEATURE_TAG, format!("multi-valued attribute `{name}` is not supported")));
    }
    Ok(Attribute { name, data_type, multiplicity })
}

fn parse_reference(elem: &RawElement) -> Result<(Reference, Option<String>), XmiError> {
    let name = identifier(elem, "name")?;
    let target = local_class_ref(elem, elem.require_attr("eType")?)?.to_owned();
    let containment = flag(elem, "containment")?;
    let (opposite, declared_on) = match elem.attr("eOpposite") {
        None => (None, None),
        Some(raw) => {
            let (class, feature) = raw
                .strip_prefix("#//")
                .and_then(|rest| rest.split_once('/'))
                .filter(|(class, feature)| is_identifier(class) && is_identifier(feature))
                .ok_or_else(|| XmiError::dialect(FEATURE_TAG, format!("`{raw}` is not a valid eOpposite reference")))?;
            (Some(feature.to_owned()), Some(class.to_owned()))
        }
    };
    let multiplicity = Multiplicity::new(bound(elem, "lowerBound", 0)?, bound(elem, "upperBound", 1)?);
    Ok((Reference { name, target, containment, opposite, multiplicity }, declared_on))
}

/// Renders a metamodel with two-space indentation and the attribute order
/// `name`, `eType`, `containment`, `eOpposite`, `lowerBound`, `upperBound`.
/// Bounds equal to the defaults (0 and 1) are omitted.
pub fn serialize_metamodel(metamodel: &Metamodel) -> String {
    let mut w = XmlWriter::new();
    let root_attrs = [
        ("xmi:version", "2.0"),
        ("xmlns:xmi", XMI_NS_URI),
        ("xmlns:xsi", XSI_NS_URI),
        ("xmlns:ecore", ECORE_NS_URI),
        ("name", metamodel.package_name.as_str()),
        ("nsURI", metamodel.ns_uri.as_str()),
        ("nsPrefix", metamodel.ns_prefix.as_str()),
    ];
    if metamodel.classes.is_empty() {
        w.empty(0, PACKAGE_TAG, &root_attrs);
        return w.finish();
    }
    w.open(0, PACKAGE_TAG, &root_attrs);
    for class in &metamodel.classes {
        let supers = class.super_types.iter().map(|s| format!("#//{s}")).collect::<Vec<_>>().join(" ");
        let mut attrs = vec![("xsi:type", "ecore:EClass"), ("name", class.name.as_str())];
        if class.is_abstract {
            attrs.push(("abstract", "true"));
        }
        if !supers.is_empty() {
            attrs.push(("eSuperTypes", &supers));
        }
        if class.attributes.is_empty() && class.references.is_empty() {
            w.empty(1, CLASSIFIER_TAG, &attrs);
            continue;
        }
        w.open(1, CLASSIFIER_TAG, &attrs);
        for attribute in &class.attributes {
            let e_type = format!("ecore:EDataType {ECORE_NS_URI}#//{}", attribute.data_type.ecore_name());
            let (lower, upper) = bounds(attribute.multiplicity);
            let mut attrs = vec![("xsi:type", "ecore:EAttribute"), ("name", attribute.name.as_str()), ("eType", &e_type)];
            push_bounds(&mut attrs, &lower, &upper);
            w.empty(2, FEATURE_TAG, &attrs);
        }
        for reference in &class.references {
            let e_type = format!("#//{}", reference.target);
            let opposite = reference.opposite.as_ref().map(|o| format!("#//{}/{o}", reference.target));
            let (lower, upper) = bounds(reference.multiplicity);
            let mut attrs = vec![("xsi:type", "ecore:EReference"), ("name", reference.name.as_str()), ("eType", &e_type)];
            if reference.containment {
                attrs.push(("containment", "true"));
            }
            if let Some(opposite) = &opposite {
                attrs.push(("eOpposite", opposite));
            }
            push_bounds(&mut attrs, &lower, &upper);
            w.empty(2, FEATURE_TAG, &attrs);
        }
        w.close(1, CLASSIFIER_TAG);
    }
    w.close(0, PACKAGE_TAG);
    w.finish()
}

fn bounds(m: Multiplicity) -> (Option<String>, Option<String>) {
    ((m.lower != 0).then(|| m.lower.to_string()), (m.upper != 1).then(|| m.upper.to_string()))
}

fn push_bounds<'a>(attrs: &mut Vec<(&'a str, &'a str)>, lower: &'a Option<String>, upper: &'a Option<String>) {
    if let Some(lower) = lower {
        attrs.push(("lowerBound", lower));
    }
    if let Some(upper) = upper {
        attrs.push(("upperBound", upper));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metamodel::DefectCode;

    const LIBRARY: &str = include_str!("../../fixtures/library.ecore");

    #[test]
    fn parses_library_fixture_field_by_field() {
        let mm = parse_metamodel(LIBRARY.as_bytes()).unwrap();
        assert_eq!(mm.package_name, "library");
        assert_eq!(mm.ns_uri, "http://www.example.org/library");
        assert_eq!(mm.ns_prefix, "library");
        let names: Vec<_> = mm.classes.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["Library", "Book", "Member"]);

        let library = &mm.classes[0];
        assert!(!library.is_abstract);
        assert_eq!(library.attributes, [Attribute::new("name", DataType::String)]);
        assert_eq!(library.references, [Reference::containment("books", "Book"), Reference::containment("members", "Member")]);

        let book = &mm.classes[1];
        assert_eq!(book.attributes, [Attribute::new("title", DataType::String), Attribute::new("pages", DataType::Int)]);
        assert_eq!(book.references, [Reference::new("borrowedBy", "Member").with_opposite("borrowed")]);

        let member = &mm.classes[2];
        assert_eq!(member.attributes, [Attribute::new("memberName", DataType::String)]);
        assert_eq!(
            member.references,
            [Reference::new("borrowed", "Book").with_opposite("borrowedBy").with_multiplicity(Multiplicity::MANY)]
        );
    }

    #[test]
    fn wrong_root_is_a_dialect_violation() {
        let err = parse_metamodel(b"<ecore:EClass name=\"x\"/>").unwrap_err();
        assert!(matches!(err, XmiError::DialectViolation { ref element, .. } if element == "ecore:EClass"), "{err:?}");
    }

    #[test]
    fn unsupported_data_type() {
        let doc = LIBRARY.replace("#//EInt", "#//EDate");
        match parse_metamodel(doc.as_bytes()).unwrap_err() {
            XmiError::DialectViolation { reason, .. } => assert!(reason.starts_with("unsupported data type"), "{reason}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defects_fail_the_parse() {
        let doc = LIBRARY.replace("eType=\"#//Member\" eOpposite", "eType=\"#//Ghost\" eOpposite");
        match parse_metamodel(doc.as_bytes()).unwrap_err() {
            XmiError::MetamodelDefect(d) => assert_eq!(d.code, DefectCode::UnresolvedType),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cross_package_references_are_rejected() {
        let doc = LIBRARY.replace("eType=\"#//Book\"", "eType=\"other.ecore#//Book\"");
        assert!(matches!(parse_metamodel(doc.as_bytes()), Err(XmiError::DialectViolation { .. })));
    }

    #[test]
    fn multi_valued_attributes_are_rejected() {
        let doc = LIBRARY.replace("name=\"pages\"", "name=\"pages\" upperBound=\"-1\"");
        assert!(matches!(parse_metamodel(doc.as_bytes()), Err(XmiError::DialectViolation { .. })));
    }

    #[test]
    fn round_trips_library() {
        let mm = parse_metamodel(LIBRARY.as_bytes()).unwrap();
        let text = serialize_metamodel(&mm);
        assert_eq!(parse_metamodel(text.as_bytes()).unwrap(), mm);
        // Serializing is a fixed point after one pass.
        assert_eq!(serialize_metamodel(&parse_metamodel(text.as_bytes()).unwrap()), text);
    }

    #[test]
    fn empty_package_has_no_children() {
        let mm = Metamodel::new("empty", "urn:empty", "empty");
        let text = serialize_metamodel(&mm);
        let doc = parse_document(text.as_bytes()).unwrap();
        assert_eq!(doc.root.name, "ecore:EPackage");
        assert!(doc.root.children.is_empty());
        assert_eq!(parse_metamodel(text.as_bytes()).unwrap(), mm);
    }

    #[test]
    fn abstract_flag_is_emitted() {
        let mm = Metamodel::new("p", "urn:p", "p").with_class(MetaClass::new("Shape").abstract_class());
        let text = serialize_metamodel(&mm);
        assert!(text.contains(r#"<eClassifiers xsi:type="ecore:EClass" name="Shape" abstract="true"/>"#), "{text}");
        assert_eq!(parse_metamodel(text.as_bytes()).unwrap(), mm);
    }

    #[test]
    fn layout_is_two_space_indented() {
        let mm = parse_metamodel(LIBRARY.as_bytes()).unwrap();
        let text = serialize_metamodel(&mm);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        assert!(lines[2].starts_with("  <eClassifiers xsi:type=\"ecore:EClass\" name=\"Library\""));
        assert!(lines[3].starts_with("    <eStructuralFeatures xsi:type=\"ecore:EAttribute\" name=\"name\""));
        assert!(text.contains(
            r##"<eStructuralFeatures xsi:type="ecore:EReference" name="books" eType="#//Book" containment="true" upperBound="-1"/>"##
        ));
        assert!(text.contains(
            r##"<eStructuralFeatures xsi:type="ecore:EReference" name="borrowedBy" eType="#//Member" eOpposite="#//Member/borrowed"/>"##
        ));
    }

    #[test]
    fn eopposite_must_name_the_target_hierarchy() {
        let doc = LIBRARY.replace("eOpposite=\"#//Member/borrowed\"", "eOpposite=\"#//Library/borrowed\"");
        assert!(matches!(parse_metamodel(doc.as_bytes()), Err(XmiError::DialectViolation { .. })));
    }
}
