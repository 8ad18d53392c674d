//! JSON rendering of model objects.

use std::collections::HashMap;

use modelforge_core::{FragmentPath, ModelResource, ObjectId, Value};
use serde_json::{json, Map, Value as Json};

fn scalar(value: &Value) -> Json {
    match value {
        Value::String(s) => json!(s),
        Value::Int(i) => json!(i),
        Value::Boolean(b) => json!(b),
        Value::Double(d) => serde_json::Number::from_f64(*d).map_or_else(|| json!(value.canonical()), Json::Number),
    }
}

/// Renders objects of one resource; reference targets are looked up once.
pub struct Renderer<'r> {
    resource: &'r ModelResource,
    paths: HashMap<ObjectId, FragmentPath>,
}

impl<'r> Renderer<'r> {
    pub fn new(resource: &'r ModelResource) -> Self {
        Renderer { resource, paths: resource.document_order().into_iter().collect() }
    }

    /// `_class`, `_path`, optionally `_model`, then attributes, containments
    /// and non-empty references in feature order.
    pub fn view(&self, id: ObjectId, with_model: bool) -> Json {
        let path = self.paths.get(&id).cloned().unwrap_or_else(FragmentPath::root);
        self.render(id, &path, with_model)
    }

    fn render(&self, id: ObjectId, path: &FragmentPath, with_model: bool) -> Json {
        let mut out = Map::new();
        let Some(object) = self.resource.object(id) else { return Json::Object(out) };
        out.insert("_class".into(), json!(object.class_name));
        out.insert("_path".into(), json!(path.to_string()));
        if with_model {
            out.insert("_model".into(), json!(self.resource.model_name()));
        }
        let mm = self.resource.metamodel();
        let features = mm.class(&object.class_name).and_then(|c| mm.all_features(c).ok()).unwrap_or_default();
        for f in &features {
            if let Some(value) = f.as_attribute().and_then(|a| object.attribute(&a.name)) {
                out.insert(f.name().to_owned(), scalar(value));
            }
        }
        for f in features.iter().filter(|f| f.as_containment().is_some()) {
            let children: Vec<Json> = object
                .contained(f.name())
                .iter()
                .enumerate()
                .map(|(i, child)| self.render(*child, &path.child(f.name(), i), false))
                .collect();
            out.insert(f.name().to_owned(), Json::Array(children));
        }
        for f in features.iter().filter(|f| f.as_cross_reference().is_some()) {
            let targets: Vec<Json> =
                object.referenced(f.name()).iter().filter_map(|t| self.paths.get(t)).map(|p| json!(p.to_string())).collect();
            if !targets.is_empty() {
                out.insert(f.name().to_owned(), Json::Array(targets));
            }
        }
        Json::Object(out)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use modelforge_core::xmi::{parse_metamodel, parse_model};

    use super::*;

    #[test]
    fn alexandria_views() {
        let mm = Arc::new(parse_metamodel(include_str!("../../../core/fixtures/library.ecore").as_bytes()).unwrap());
        let r = parse_model(include_str!("../../../core/fixtures/alexandria.xmi").as_bytes(), &mm, "alexandria").unwrap();
        let renderer = Renderer::new(&r);
        let dune = r.resolve(&"//@books.1".parse().unwrap()).unwrap();
        assert_eq!(
            serde_json::to_string(&renderer.view(dune, true)).unwrap(),
            r#"{"_class":"Book","_path":"//@books.1","_model":"alexandria","title":"Dune","pages":412,"borrowedBy":["//@members.0"]}"#
        );
        let root = renderer.view(r.root_id(), false);
        let keys: Vec<&String> = root.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["_class", "_path", "name", "books", "members"]);
        assert_eq!(root["books"][0]["_path"], "//@books.0");
        assert!(root["books"][0].get("borrowedBy").is_none());
        assert_eq!(root["members"][0]["borrowed"][0], "//@books.1");
    }

    #[test]
    fn typed_scalars() {
        let mm = Arc::new(parse_metamodel(include_str!("../../../core/fixtures/zoo.ecore").as_bytes()).unwrap());
        let r = parse_model(include_str!("../../../core/fixtures/savanna.xmi").as_bytes(), &mm, "savanna").unwrap();
        let renderer = Renderer::new(&r);
        let zara = r.resolve(&"//@animals.1".parse().unwrap()).unwrap();
        let view = renderer.view(zara, false);
        assert_eq!(view["weight"], json!(1200.0));
        assert_eq!(view["vaccinated"], json!(false));
        assert_eq!(view["age"], json!(4));
    }
}
