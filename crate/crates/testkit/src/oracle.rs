//! A deliberately naive reference interpreter.
//!
//! Models are copied into plain vectors of nodes, and every query is a linear
//! scan. Inheritance, linearization and paths are recomputed here from the raw
//! metamodel fields instead of going through the production helpers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use modelforge_core::{DataType, Metamodel, ModelResource, ObjectId, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Slot {
    Attribute(DataType),
    Containment { target: String, opposite: Option<String> },
    Cross { target: String, opposite: Option<String> },
}

/// Supertype closure of `class`, including itself.
pub fn ancestors(mm: &Metamodel, class: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![class.to_owned()];
    while let Some(name) = stack.pop() {
        if !out.insert(name.clone()) {
            continue;
        }
        for c in &mm.classes {
            if c.name == name {
                stack.extend(c.super_types.iter().cloned());
            }
        }
    }
    out
}

pub fn is_a(mm: &Metamodel, class: &str, ancestor: &str) -> bool {
    ancestors(mm, class).contains(ancestor)
}

/// Inherited features first (depth-first over supertypes, each class once),
/// then own attributes, then own references.
pub fn features(mm: &Metamodel, class: &str) -> Vec<(String, Slot)> {
    fn visit(mm: &Metamodel, class: &str, done: &mut Vec<String>, out: &mut Vec<(String, Slot)>) {
        if done.iter().any(|d| d == class) {
            return;
        }
        done.push(class.to_owned());
        let Some(c) = mm.classes.iter().find(|c| c.name == class) else { return };
        for s in &c.super_types {
            visit(mm, s, done, out);
        }
        for a in &c.attributes {
            out.push((a.name.clone(), Slot::Attribute(a.data_type)));
        }
        for r in &c.references {
            let slot = if r.containment {
                Slot::Containment { target: r.target.clone(), opposite: r.opposite.clone() }
            } else {
                Slot::Cross { target: r.target.clone(), opposite: r.opposite.clone() }
            };
            out.push((r.name.clone(), slot));
        }
    }
    let mut out = Vec::new();
    visit(mm, class, &mut Vec::new(), &mut out);
    out
}

pub fn slot_of(mm: &Metamodel, class: &str, feature: &str) -> Option<Slot> {
    features(mm, class).into_iter().find(|(n, _)| n == feature).map(|(_, s)| s)
}

pub fn render(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        Value::Int(i) => i.to_string(),
        Value::Boolean(b) => b.to_string(),
        Value::Double(d) => format!("{d}"),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlainNode {
    pub class: String,
    pub alive: bool,
    pub attrs: BTreeMap<String, String>,
    pub children: BTreeMap<String, Vec<usize>>,
    pub refs: BTreeMap<String, Vec<usize>>,
}

/// One model as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainModel {
    pub name: String,
    pub nodes: Vec<PlainNode>,
}

/// A node as seen from outside: path, class, attributes, and reference
/// targets as sorted path lists.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DumpEntry {
    pub path: String,
    pub class: String,
    pub attrs: Vec<(String, String)>,
    pub refs: Vec<(String, Vec<String>)>,
}

impl PlainModel {
    /// Copies the containment tree reachable from the root.
    pub fn from_resource(resource: &ModelResource) -> Self {
        let mut index: HashMap<ObjectId, usize> = HashMap::new();
        let mut order = vec![resource.root_id()];
        let mut i = 0;
        index.insert(resource.root_id(), 0);
        while i < order.len() {
            let object = resource.object(order[i]).expect("reachable object");
            for ids in object.containments.values() {
                for id in ids {
                    if !index.contains_key(id) && resource.object(*id).is_some() {
                        index.insert(*id, order.len());
                        order.push(*id);
                    }
                }
            }
            i += 1;
        }
        let nodes = order
            .iter()
            .map(|id| {
                let o = resource.object(*id).unwrap();
                let map = |slots: &BTreeMap<String, Vec<ObjectId>>| {
                    slots
                        .iter()
                        .map(|(k, ids)| (k.clone(), ids.iter().filter_map(|t| index.get(t).copied()).collect()))
                        .collect()
                };
                PlainNode {
                    class: o.class_name.clone(),
                    alive: true,
                    attrs: o.attributes.iter().map(|(k, v)| (k.clone(), render(v))).collect(),
                    children: map(&o.containments),
                    refs: map(&o.references),
                }
            })
            .collect();
        PlainModel { name: resource.model_name().to_owned(), nodes }
    }

    /// Live nodes in pre-order with their rendered paths.
    pub fn order(&self, mm: &Metamodel) -> Vec<(usize, String)> {
        let mut out = Vec::new();
        self.walk(mm, 0, String::new(), &mut out);
        out
    }

    fn walk(&self, mm: &Metamodel, node: usize, prefix: String, out: &mut Vec<(usize, String)>) {
        let path = if prefix.is_empty() { "/".to_owned() } else { prefix.clone() };
        out.push((node, path));
        let n = &self.nodes[node];
        let mut names: Vec<String> = features(mm, &n.class)
            .into_iter()
            .filter(|(_, s)| matches!(s, Slot::Containment { .. }))
            .map(|(name, _)| name)
            .collect();
        names.extend(n.children.keys().filter(|k| !names.contains(k)).cloned().collect::<Vec<_>>());
        for name in names {
            let live: Vec<usize> = n.children.get(&name).map_or(Vec::new(), |c| c.iter().copied().filter(|c| self.nodes[*c].alive).collect());
            for (i, child) in live.into_iter().enumerate() {
                let base = if prefix.is_empty() { "/".to_owned() } else { prefix.clone() };
                self.walk(mm, child, format!("{base}/@{name}.{i}"), out);
            }
        }
    }

    pub fn path_of(&self, mm: &Metamodel, node: usize) -> Option<String> {
        self.order(mm).into_iter().find(|(n, _)| *n == node).map(|(_, p)| p)
    }

    pub fn dump(&self, mm: &Metamodel) -> Vec<DumpEntry> {
        let order = self.order(mm);
        let paths: HashMap<usize, String> = order.iter().cloned().collect();
        order
            .iter()
            .map(|(node, path)| {
                let n = &self.nodes[*node];
                let refs = n
                    .refs
                    .iter()
                    .map(|(k, ids)| {
                        let mut targets: Vec<String> = ids.iter().filter_map(|t| paths.get(t).cloned()).collect();
                        targets.sort();
                        (k.clone(), targets)
                    })
                    .filter(|(_, t)| !t.is_empty())
                    .collect();
                DumpEntry {
                    path: path.clone(),
                    class: n.class.clone(),
                    attrs: n.attrs.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
                    refs,
                }
            })
            .collect()
    }

    /// Live instances of `class` in pre-order.
    pub fn instances(&self, mm: &Metamodel, class: &str) -> Vec<(usize, String)> {
        self.order(mm).into_iter().filter(|(n, _)| is_a(mm, &self.nodes[*n].class, class)).collect()
    }

    pub fn matches(&self, mm: &Metamodel, class: &str, attr: &str, value: &str) -> Vec<usize> {
        self.instances(mm, class)
            .into_iter()
            .filter(|(n, _)| self.nodes[*n].attrs.get(attr).is_some_and(|v| v == value))
            .map(|(n, _)| n)
            .collect()
    }

    pub fn search(&self, mm: &Metamodel, class: &str, containment: &str, attr: &str, value: &str) -> Vec<String> {
        let wanted: Vec<usize> = self.matches(mm, class, attr, value);
        self.order(mm)
            .into_iter()
            .filter(|(n, p)| wanted.contains(n) && p.rsplit('/').next().is_some_and(|seg| seg.strip_prefix('@').and_then(|s| s.rsplit_once('.')).is_some_and(|(f, _)| f == containment)))
            .map(|(_, p)| p)
            .collect()
    }

    pub fn update(&mut self, mm: &Metamodel, class: &str, attr: &str, value: &str, updated: &str) -> usize {
        let hits = self.matches(mm, class, attr, value);
        for n in &hits {
            self.nodes[*n].attrs.insert(attr.to_owned(), updated.to_owned());
        }
        hits.len()
    }

    /// `None` when the root matches.
    pub fn delete(&mut self, mm: &Metamodel, class: &str, attr: &str, value: &str) -> Option<usize> {
        let hits = self.matches(mm, class, attr, value);
        if hits.contains(&0) {
            return None;
        }
        let mut doomed = Vec::new();
        let mut stack = hits.clone();
        while let Some(n) = stack.pop() {
            if doomed.contains(&n) {
                continue;
            }
            doomed.push(n);
            stack.extend(self.nodes[n].children.values().flatten().copied());
        }
        for n in &doomed {
            self.nodes[*n].alive = false;
        }
        for node in &mut self.nodes {
            for ids in node.children.values_mut().chain(node.refs.values_mut()) {
                ids.retain(|t| !doomed.contains(t));
            }
        }
        Some(hits.len())
    }

    /// Appends a new node under `parent.containment` and returns its path.
    pub fn add_child(&mut self, mm: &Metamodel, parent: usize, containment: &str, class: &str, attrs: &[(String, String)]) -> String {
        let id = self.nodes.len();
        self.nodes.push(PlainNode {
            class: class.to_owned(),
            alive: true,
            attrs: attrs.iter().cloned().collect(),
            children: BTreeMap::new(),
            refs: BTreeMap::new(),
        });
        self.nodes[parent].children.entry(containment.to_owned()).or_default().push(id);
        if let Some(Slot::Containment { opposite: Some(back), .. }) = slot_of(mm, &self.nodes[parent].class, containment) {
            self.nodes[id].refs.entry(back).or_default().push(parent);
        }
        self.path_of(mm, id).expect("new node is reachable")
    }

    /// Adds `target` to `source.feature` and the reverse link if the feature
    /// has an opposite.
    pub fn link(&mut self, mm: &Metamodel, source: usize, feature: &str, target: usize) {
        self.nodes[source].refs.entry(feature.to_owned()).or_default().push(target);
        if let Some(Slot::Cross { opposite: Some(back), .. }) = slot_of(mm, &self.nodes[source].class, feature) {
            let slot = self.nodes[target].refs.entry(back).or_default();
            if !slot.contains(&source) {
                slot.push(source);
            }
        }
    }

    /// Number of live non-root nodes in `node.containment`.
    pub fn slot_len(&self, node: usize, feature: &str) -> usize {
        let n = &self.nodes[node];
        n.children.get(feature).or_else(|| n.refs.get(feature)).map_or(0, |ids| ids.iter().filter(|t| self.nodes[**t].alive).count())
    }
}

/// Every instance of `class` across `models`, by model name then pre-order.
pub fn read_all(mm: &Metamodel, models: &[PlainModel], class: &str) -> Vec<(String, String)> {
    let mut sorted: Vec<&PlainModel> = models.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    sorted
        .into_iter()
        .flat_map(|m| m.instances(mm, class).into_iter().map(move |(_, p)| (m.name.clone(), p)))
        .collect()
}

/// Checks that every opposite pair is mirrored and that the containment
/// relation is a tree rooted at node 0.
pub fn structural_faults(mm: &Metamodel, model: &PlainModel) -> Vec<String> {
    let mut faults = Vec::new();
    let order = model.order(mm);
    let live: BTreeSet<usize> = order.iter().map(|(n, _)| *n).collect();
    let mut containers: BTreeMap<usize, usize> = BTreeMap::new();
    for (n, path) in &order {
        let node = &model.nodes[*n];
        for ids in node.children.values() {
            for c in ids {
                *containers.entry(*c).or_default() += 1;
            }
        }
        for (feature, _) in features(mm, &node.class) {
            let (targets, opposite) = match slot_of(mm, &node.class, &feature) {
                Some(Slot::Containment { opposite: Some(o), .. }) => (node.children.get(&feature), o),
                Some(Slot::Cross { opposite: Some(o), .. }) => (node.refs.get(&feature), o),
                _ => continue,
            };
            for t in targets.into_iter().flatten() {
                if !live.contains(t) {
                    faults.push(format!("{path}.{feature} points outside the tree"));
                    continue;
                }
                let target = &model.nodes[*t];
                let back = target.children.get(&opposite).or_else(|| target.refs.get(&opposite));
                if !back.is_some_and(|b| b.contains(n)) {
                    faults.push(format!("{path}.{feature} is not mirrored by {opposite}"));
                }
            }
        }
    }
    for n in &live {
        let expected = usize::from(*n != 0);
        let actual = containers.get(n).copied().unwrap_or(0);
        if actual != expected {
            faults.push(format!("node {n} has {actual} containers"));
        }
    }
    faults
}
