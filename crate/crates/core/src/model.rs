//! Instance graphs: typed objects arranged in a containment tree, plus cross
//! references between them.
//!
//! Objects live in an arena owned by their [`ModelResource`] and are addressed
//! by [`ObjectId`]. Containment slots hold child ids; the tree shape is derived
//! from those slots rather than stored as parent pointers, so a corrupted
//! resource can still be inspected by the validator.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::metamodel::{DataType, Feature, MetaClass, Metamodel};
use crate::xmi::FragmentPath;

/// Scalar attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    String(String),
    Int(i32),
    Boolean(bool),
    Double(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{raw}` is not a valid {expected:?} literal")]
pub struct ValueParseError {
    pub expected: DataType,
    pub raw: String,
}

impl Value {
    /// Parses a literal: `true`/`false`, decimal integers with an optional
    /// leading `-`, and finite decimal or exponent-form doubles.
    pub fn parse(data_type: DataType, raw: &str) -> Result<Value, ValueParseError> {
        let err = || ValueParseError { expected: data_type, raw: raw.to_owned() };
        match data_type {
            DataType::String => Ok(Value::String(raw.to_owned())),
            DataType::Boolean => match raw {
                "true" => Ok(Value::Boolean(true)),
                "false" => Ok(Value::Boolean(false)),
                _ => Err(err()),
            },
            DataType::Int => {
                let digits = raw.strip_prefix('-').unwrap_or(raw);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(err());
                }
                raw.parse().map(Value::Int).map_err(|_| err())
            }
            DataType::Double => {
                let allowed = |b: u8| b.is_ascii_digit() || matches!(b, b'-' | b'+' | b'.' | b'e' | b'E');
                if !raw.bytes().any(|b| b.is_ascii_digit()) || !raw.bytes().all(allowed) || raw.starts_with('+') {
                    return Err(err());
                }
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Value::Double(v)),
                    _ => Err(err()),
                }
            }
        }
    }

    pub fn data_type(&self) -> DataType {
        match self {
            Value::String(_) => DataType::String,
            Value::Int(_) => DataType::Int,
            Value::Boolean(_) => DataType::Boolean,
            Value::Double(_) => DataType::Double,
        }
    }

    /// Canonical text used for matching and serialization.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    /// True if the canonical rendering equals `raw` exactly.
    pub fn matches(&self, raw: &str) -> bool {
        match self {
            Value::String(s) => s == raw,
            other => other.canonical() == raw,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String(s) => f.write_str(s),
            Value::Int(i) => write!(f, "{i}"),
            Value::Boolean(b) => write!(f, "{b}"),
            // Shortest representation that parses back to the same f64.
            Value::Double(d) => write!(f, "{d}"),
        }
    }
}

/// Opaque identifier of an object within one resource.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(u64);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelObject {
    id: ObjectId,
    pub class_name: String,
    /// Set attributes; an absent key means unset.
    pub attributes: BTreeMap<String, Value>,
    pub containments: BTreeMap<String, Vec<ObjectId>>,
    pub references: BTreeMap<String, Vec<ObjectId>>,
}

impl ModelObject {
    pub fn id(&self) -> ObjectId {
        self.id
    }

    pub fn attribute(&self, name: &str) -> Option<&Value> {
        self.attributes.get(name)
    }

    pub fn contained(&self, feature: &str) -> &[ObjectId] {
        self.containments.get(feature).map_or(&[], Vec::as_slice)
    }

    pub fn referenced(&self, feature: &str) -> &[ObjectId] {
        self.references.get(feature).map_or(&[], Vec::as_slice)
    }

    /// Containment or cross-reference slot, whichever holds `feature`.
    pub fn slot(&self, feature: &str, containment: bool) -> &[ObjectId] {
        if containment {
            self.contained(feature)
        } else {
            self.referenced(feature)
        }
    }

    pub fn slot_mut(&mut self, feature: &str, containment: bool) -> &mut Vec<ObjectId> {
        let map = if containment { &mut self.containments } else { &mut self.references };
        map.entry(feature.to_owned()).or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("fragment path `{0}` does not resolve")]
pub struct DanglingPath(pub String);

/// One model file: an object arena with a distinguished root.
#[derive(Debug, Clone)]
pub struct ModelResource {
    model_name: String,
    metamodel: Arc<Metamodel>,
    root: ObjectId,
    objects: BTreeMap<ObjectId, ModelObject>,
    next_id: u64,
    dirty: bool,
}

impl ModelResource {
    pub fn new(model_name: impl Into<String>, metamodel: Arc<Metamodel>, root_class: impl Into<String>) -> Self {
        let mut resource = ModelResource {
            model_name: model_name.into(),
            metamodel,
            root: ObjectId(0),
            objects: BTreeMap::new(),
            next_id: 0,
            dirty: false,
        };
        resource.root = resource.create_object(root_class);
        resource
    }

    pub fn model_name(&self) -> &str {
        &self.model_name
    }

    pub fn package_name(&self) -> &str {
        &self.metamodel.package_name
    }

    pub fn metamodel(&self) -> &Arc<Metamodel> {
        &self.metamodel
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn mark_dirty(&mut self) {
        self.dirty = true;
    }

    pub(crate) fn mark_clean(&mut self) {
        self.dirty = false;
    }

    pub fn root_id(&self) -> ObjectId {
        self.root
    }

    pub fn root(&self) -> &ModelObject {
        &self.objects[&self.root]
    }

    pub fn object(&self, id: ObjectId) -> Option<&ModelObject> {
        self.objects.get(&id)
    }

    pub fn object_mut(&mut self, id: ObjectId) -> Option<&mut ModelObject> {
        self.objects.get_mut(&id)
    }

    /// Arena size, including objects not reachable from the root.
    pub fn arena_len(&self) -> usize {
        self.objects.len()
    }

    /// Allocates a detached object; attach it through a containment slot.
    pub fn create_object(&mut self, class_name: impl Into<String>) -> ObjectId {
        let id = ObjectId(self.next_id);
        self.next_id += 1;
        self.objects.insert(
            id,
            ModelObject {
                id,
                class_name: class_name.into(),
                attributes: BTreeMap::new(),
                containments: BTreeMap::new(),
                references: BTreeMap::new(),
            },
        );
        id
    }

    /// Drops an object from the arena without touching slots that mention it.
    pub fn remove_object(&mut self, id: ObjectId) -> Option<ModelObject> {
        if id == self.root {
            return None;
        }
        self.objects.remove(&id)
    }

    /// Names of the containment slots of `object` in traversal order:
    /// declared containment features in linearization order, then any
    /// undeclared slot keys in key order.
    pub fn containment_order(&self, object: &ModelObject) -> Vec<String> {
        let mut order: Vec<String> = self
            .metamodel
            .class(&object.class_name)
            .and_then(|c| self.metamodel.all_features(c).ok())
            .map(|features| {
                features
                    .iter()
                    .filter_map(Feature::as_containment)
                    .filter(|r| object.containments.contains_key(&r.name))
                    .map(|r| r.name.clone())
                    .collect()
            })
            .unwrap_or_default();
        for key in object.containments.keys() {
            if !order.contains(key) {
                order.push(key.clone());
            }
        }
        order
    }

    /// Reachable objects in document (pre-)order with their paths. An object
    /// reachable through more than one slot is listed once, at its first
    /// occurrence.
    pub fn document_order(&self) -> Vec<(ObjectId, FragmentPath)> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.walk(self.root, FragmentPath::root(), &mut seen, &mut out);
        out
    }

    fn walk(&self, id: ObjectId, path: FragmentPath, seen: &mut HashSet<ObjectId>, out: &mut Vec<(ObjectId, FragmentPath)>) {
        if !seen.insert(id) {
            return;
        }
        let Some(object) = self.objects.get(&id) else { return };
        out.push((id, path.clone()));
        for feature in self.containment_order(object) {
            for (index, child) in object.contained(&feature).iter().enumerate() {
                if self.objects.contains_key(child) {
                    self.walk(*child, path.child(&feature, index), seen, out);
                }
            }
        }
    }

    /// Follows containment slots from the root.
    pub fn resolve(&self, path: &FragmentPath) -> Result<ObjectId, DanglingPath> {
        let mut current = self.root;
        for segment in path.segments() {
            current = self.objects[&current]
                .contained(&segment.feature)
                .get(segment.index)
                .copied()
                .filter(|id| self.objects.contains_key(id))
                .ok_or_else(|| DanglingPath(path.to_string()))?;
        }
        Ok(current)
    }

    pub fn path_of(&self, id: ObjectId) -> Option<FragmentPath> {
        self.document_order().into_iter().find(|(o, _)| *o == id).map(|(_, p)| p)
    }

    /// The containing object and slot of `id`, if it is contained anywhere.
    pub fn container_of(&self, id: ObjectId) -> Option<(ObjectId, &str)> {
        self.objects.values().find_map(|o| {
            o.containments.iter().find(|(_, ids)| ids.contains(&id)).map(|(feature, _)| (o.id, feature.as_str()))
        })
    }

    /// Class of an object, if both the object and its class exist.
    pub fn class_of(&self, id: ObjectId) -> Option<&MetaClass> {
        self.objects.get(&id).and_then(|o| self.metamodel.class(&o.class_name))
    }

    /// Reachable instances of `class_name` or its subtypes, in document order.
    pub fn instances_of(&self, class_name: &str) -> Vec<(ObjectId, FragmentPath)> {
        self.document_order()
            .into_iter()
            .filter(|(id, _)| self.class_of(*id).is_some_and(|c| self.metamodel.is_subtype_of(c, class_name)))
            .collect()
    }

    /// Removes `ids` and their containment subtrees, then scrubs every slot
    /// that still mentions a removed object. Returns the removed ids.
    pub fn delete_subtrees(&mut self, ids: &[ObjectId]) -> HashSet<ObjectId> {
        let mut removed = HashSet::new();
        let mut stack: Vec<ObjectId> = ids.to_vec();
        while let Some(id) = stack.pop() {
            if id == self.root || !removed.insert(id) {
                continue;
            }
            if let Some(object) = self.objects.get(&id) {
                stack.extend(object.containments.values().flatten().copied());
            }
        }
        for id in &removed {
            self.objects.remove(id);
        }
        for object in self.objects.values_mut() {
            for slot in object.containments.values_mut().chain(object.references.values_mut()) {
                slot.retain(|id| !removed.contains(id));
            }
        }
        removed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_literals() {
        assert_eq!(Value::parse(DataType::Int, "730"), Ok(Value::Int(730)));
        assert_eq!(Value::parse(DataType::Int, "-5"), Ok(Value::Int(-5)));
        assert_eq!(Value::parse(DataType::Int, "007"), Ok(Value::Int(7)));
        for bad in ["", "-", "+5", "many", "1.0", " 1", "99999999999"] {
            assert!(Value::parse(DataType::Int, bad).is_err(), "{bad:?}");
        }
        assert!(Value::Int(7).matches("7"));
        assert!(!Value::Int(7).matches("007"));
    }

    #[test]
    fn double_literals() {
        assert_eq!(Value::parse(DataType::Double, "1.5"), Ok(Value::Double(1.5)));
        assert_eq!(Value::parse(DataType::Double, "-2e3"), Ok(Value::Double(-2000.0)));
        assert_eq!(Value::parse(DataType::Double, "1E-2"), Ok(Value::Double(0.01)));
        assert_eq!(Value::parse(DataType::Double, ".5"), Ok(Value::Double(0.5)));
        for bad in ["", "NaN", "inf", "infinity", "1e400", "+1", "1.0f", "e5"] {
            assert!(Value::parse(DataType::Double, bad).is_err(), "{bad:?}");
        }
        assert_eq!(Value::Double(2000.0).canonical(), "2000");
        assert_eq!(Value::Double(0.1).canonical(), "0.1");
    }

    #[test]
    fn boolean_literals() {
        assert_eq!(Value::parse(DataType::Boolean, "true"), Ok(Value::Boolean(true)));
        assert!(Value::parse(DataType::Boolean, "True").is_err());
        assert!(Value::parse(DataType::Boolean, "1").is_err());
    }

    #[test]
    fn empty_string_is_a_value() {
        assert_eq!(Value::parse(DataType::String, ""), Ok(Value::String(String::new())));
    }
}
