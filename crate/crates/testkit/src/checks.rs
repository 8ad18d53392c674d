//! Seeded property checks. Each returns `Err` with a description of the
//! first divergence so callers can report the failing seed.

use std::collections::BTreeMap;
use std::fs;
use std::sync::Arc;

use modelforge_core::xmi::{parse_metamodel, parse_model, serialize_metamodel, serialize_model};
use modelforge_core::{
    validate_resource, DataType, Metamodel, MetamodelRegistry, ModelResource, ObjectId, Repository, RepositoryError,
    Value, ViolationCode,
};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::fixtures;
use crate::gen::{self, Seeded};
use crate::oracle::{self, read_all, structural_faults, PlainModel, Slot};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// parse(serialize(m)) == m for a generated metamodel, and the text is a
/// fixed point.
pub fn metamodel_roundtrip(seed: u64) -> Result<(), String> {
    let mut rng = gen::rng(seed);
    let mm = gen::metamodel(&mut rng, 6);
    let text = serialize_metamodel(&mm);
    let parsed = parse_metamodel(text.as_bytes()).map_err(|e| format!("reparse failed: {e}\n{text}"))?;
    ensure!(parsed == mm, "structure changed:\n{mm:#?}\nvs\n{parsed:#?}");
    ensure!(serialize_metamodel(&parsed) == text, "text is not a fixed point");
    Ok(())
}

type RefTriple = (String, String, String);

fn attribute_multiset(model: &PlainModel, mm: &Metamodel) -> Vec<(String, String, String)> {
    let mut out: Vec<_> = model
        .order(mm)
        .into_iter()
        .flat_map(|(n, _)| {
            let node = &model.nodes[n];
            node.attrs.iter().map(|(k, v)| (node.class.clone(), k.clone(), v.clone())).collect::<Vec<_>>()
        })
        .collect();
    out.sort();
    out
}

fn reference_relation(model: &PlainModel, mm: &Metamodel) -> Vec<RefTriple> {
    let mut out: Vec<RefTriple> = model
        .dump(mm)
        .into_iter()
        .flat_map(|e| {
            e.refs
                .into_iter()
                .flat_map(move |(f, targets)| {
                    let path = e.path.clone();
                    targets.into_iter().map(move |t| (path.clone(), f.clone(), t))
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort();
    out
}

/// parse(serialize(r)) keeps object count, attribute multiset and the
/// reference relation as path pairs; the text is a fixed point.
pub fn model_roundtrip(seed: u64) -> Result<(), String> {
    let mut rng = gen::rng(seed);
    let mm = Arc::new(gen::metamodel(&mut rng, 6));
    let original = gen::model(&mut rng, &mm, "sample", 30);
    let text = serialize_model(&original).map_err(|e| e.to_string())?;
    let parsed = parse_model(text.as_bytes(), &mm, "sample").map_err(|e| format!("reparse failed: {e}\n{text}"))?;

    let (a, b) = (PlainModel::from_resource(&original), PlainModel::from_resource(&parsed));
    ensure!(a.order(&mm).len() == b.order(&mm).len(), "object count changed");
    ensure!(attribute_multiset(&a, &mm) == attribute_multiset(&b, &mm), "attributes changed\n{text}");
    ensure!(reference_relation(&a, &mm) == reference_relation(&b, &mm), "references changed\n{text}");
    ensure!(a.dump(&mm) == b.dump(&mm), "graph changed\n{text}");
    let report = validate_resource(&parsed, &mm, 0);
    ensure!(report.is_clean(), "reparsed model does not validate: {report:?}");
    ensure!(serialize_model(&parsed).map_err(|e| e.to_string())? == text, "text is not a fixed point");
    Ok(())
}

fn err_code<T: std::fmt::Debug>(result: &Result<T, RepositoryError>) -> Result<&'static str, String> {
    match result {
        Err(e) => Ok(e.code()),
        Ok(v) => Err(format!("expected an error, got {v:?}")),
    }
}

fn attributes_of(mm: &Metamodel, class: &str) -> Vec<(String, DataType)> {
    oracle::features(mm, class)
        .into_iter()
        .filter_map(|(n, s)| match s {
            Slot::Attribute(t) => Some((n, t)),
            _ => None,
        })
        .collect()
}

fn upper_of(mm: &Metamodel, class: &str, feature: &str) -> i32 {
    oracle::ancestors(mm, class)
        .iter()
        .filter_map(|c| mm.classes.iter().find(|k| &k.name == c))
        .flat_map(|c| c.references.iter())
        .find(|r| r.name == feature)
        .map_or(1, |r| r.multiplicity.upper)
}

/// True when the opposite of a cross reference is a containment, so the
/// reference points at the container.
fn container_side(mm: &Metamodel, target: &str, opposite: Option<&str>) -> bool {
    opposite.is_some_and(|o| matches!(oracle::slot_of(mm, target, o), Some(Slot::Containment { .. })))
}

fn exceeds(upper: i32, count: usize) -> bool {
    upper >= 0 && count > upper as usize
}

/// Picks a value that some instance of `class` holds for `attr`, or a fresh one.
fn probe_value(rng: &mut Seeded, mm: &Metamodel, model: &PlainModel, class: &str, attr: &str, data_type: DataType) -> String {
    let held: Vec<String> = model
        .instances(mm, class)
        .into_iter()
        .filter_map(|(n, _)| model.nodes[n].attrs.get(attr).cloned())
        .collect();
    if !held.is_empty() && rng.random_bool(0.8) {
        held.choose(rng).unwrap().clone()
    } else {
        oracle::render(&gen::random_value(rng, data_type))
    }
}

struct OracleRun<'a> {
    rng: Seeded,
    mm: Arc<Metamodel>,
    repo: Repository,
    snapshot: modelforge_core::RegistrySnapshot,
    models: Vec<PlainModel>,
    dir: &'a std::path::Path,
    checks: usize,
}

impl OracleRun<'_> {
    fn compare_state(&mut self, index: usize) -> Result<(), String> {
        let name = self.models[index].name.clone();
        let resource = self.repo.resource("gen", &name).ok_or("model vanished")?;
        let expected = self.models[index].dump(&self.mm);
        ensure!(PlainModel::from_resource(resource).dump(&self.mm) == expected, "in-memory state diverged for {name}");
        let bytes = fs::read(self.dir.join("gen").join(format!("{name}.xmi"))).map_err(|e| e.to_string())?;
        let on_disk = parse_model(&bytes, &self.mm, &name).map_err(|e| e.to_string())?;
        ensure!(PlainModel::from_resource(&on_disk).dump(&self.mm) == expected, "on-disk state diverged for {name}");
        self.checks += 2;
        Ok(())
    }

    fn reads(&mut self) -> Result<(), String> {
        let mm = Arc::clone(&self.mm);
        for class in &mm.classes {
            let got: Vec<(String, String)> = self
                .repo
                .read_all_instances(&self.snapshot, "gen", &class.name)
                .map_err(|e| e.to_string())?
                .iter()
                .map(|f| (f.model_name().to_owned(), f.path.to_string()))
                .collect();
            ensure!(got == read_all(&mm, &self.models, &class.name), "read_all({}) diverged", class.name);
            self.checks += 1;

            let attrs = attributes_of(&mm, &class.name);
            let containments: Vec<String> =
                mm.classes.iter().flat_map(|c| c.references.iter().filter(|r| r.containment).map(|r| r.name.clone())).collect();
            for containment in &containments {
                let Some((attr, data_type)) = attrs.choose(&mut self.rng).cloned() else { break };
                let probe_model = self.models.choose(&mut self.rng).unwrap().clone();
                let value = probe_value(&mut self.rng, &mm, &probe_model, &class.name, &attr, data_type);
                let declared = mm.classes.iter().any(|c| {
                    c.references.iter().any(|r| r.containment && &r.name == containment && oracle::is_a(&mm, &class.name, &r.target))
                });
                let result = self.repo.search(&self.snapshot, "gen", &class.name, containment, &attr, &value);
                if !declared {
                    ensure!(err_code(&result)? == "UNKNOWN_CONTAINMENT", "search should reject `{containment}`");
                } else {
                    let got: Vec<(String, String)> =
                        result.map_err(|e| e.to_string())?.iter().map(|f| (f.model_name().to_owned(), f.path.to_string())).collect();
                    let mut sorted = self.models.clone();
                    sorted.sort_by(|a, b| a.name.cmp(&b.name));
                    let expected: Vec<(String, String)> = sorted
                        .iter()
                        .flat_map(|m| m.search(&mm, &class.name, containment, &attr, &value).into_iter().map(|p| (m.name.clone(), p)))
                        .collect();
                    ensure!(got == expected, "search({}, {containment}, {attr}={value:?}) diverged: {got:?} vs {expected:?}", class.name);
                }
                self.checks += 1;
            }
            let bogus = self.repo.search(&self.snapshot, "gen", &class.name, "nope", "nope", "x");
            ensure!(bogus.is_err(), "search with unknown names succeeded");
        }
        Ok(())
    }

    fn update_or_delete(&mut self, index: usize, delete: bool) -> Result<(), String> {
        let mm = Arc::clone(&self.mm);
        let class = mm.classes.choose(&mut self.rng).unwrap().name.clone();
        let Some((attr, data_type)) = attributes_of(&mm, &class).choose(&mut self.rng).cloned() else { return Ok(()) };
        let value = probe_value(&mut self.rng, &mm, &self.models[index].clone(), &class, &attr, data_type);
        let name = self.models[index].name.clone();
        if delete {
            let expected = self.models[index].delete(&mm, &class, &attr, &value);
            let got = self.repo.delete_by_attribute(&self.snapshot, "gen", &class, &name, &attr, &value);
            match expected {
                None => ensure!(err_code(&got)? == "ROOT_DELETION_FORBIDDEN", "root deletion was not refused"),
                Some(n) => ensure!(got.as_ref().ok() == Some(&n), "delete count {got:?} vs {n}"),
            }
        } else {
            let updated = oracle::render(&gen::random_value(&mut self.rng, data_type));
            let expected = self.models[index].update(&mm, &class, &attr, &value, &updated);
            let got = self.repo.update_by_attribute(&self.snapshot, "gen", &class, &name, &attr, &value, &updated);
            ensure!(got.as_ref().ok() == Some(&expected), "update count {got:?} vs {expected}");
        }
        self.compare_state(index)
    }

    fn add(&mut self, index: usize) -> Result<(), String> {
        let mm = Arc::clone(&self.mm);
        let root_class = self.models[index].nodes[0].class.clone();
        let options: Vec<(String, String)> = oracle::features(&mm, &root_class)
            .into_iter()
            .filter_map(|(n, s)| match s {
                Slot::Containment { target, .. } => Some((n, target)),
                _ => None,
            })
            .flat_map(|(n, target)| {
                mm.classes
                    .iter()
                    .filter(|c| !c.is_abstract && oracle::is_a(&mm, &c.name, &target))
                    .map(|c| (n.clone(), c.name.clone()))
                    .collect::<Vec<_>>()
            })
            .collect();
        let Some((containment, class)) = options.choose(&mut self.rng).cloned() else { return Ok(()) };
        let mut attrs: Vec<(String, String)> = Vec::new();
        for (n, t) in attributes_of(&mm, &class) {
            if self.rng.random_bool(0.8) {
                attrs.push((n, oracle::render(&gen::random_value(&mut self.rng, t))));
            }
        }
        let required_missing = mm
            .classes
            .iter()
            .filter(|c| oracle::is_a(&mm, &class, &c.name))
            .flat_map(|c| c.attributes.iter())
            .any(|a| a.multiplicity.lower > 0 && !attrs.iter().any(|(n, _)| n == &a.name));
        let name = self.models[index].name.clone();
        let got = self.repo.add_new_element(&self.snapshot, "gen", &root_class, &class, &name, &attrs, None, Some(&containment));
        let over = exceeds(upper_of(&mm, &root_class, &containment), self.models[index].slot_len(0, &containment) + 1);
        if over || required_missing {
            ensure!(err_code(&got)? == "VALIDATION_REJECTED", "invalid add was not rejected");
        } else {
            let expected = self.models[index].add_child(&mm, 0, &containment, &class, &attrs);
            let got = got.map_err(|e| format!("add failed: {e}"))?;
            ensure!(got.to_string() == expected, "add path {got} vs {expected}");
        }
        self.compare_state(index)
    }

    fn link(&mut self, index: usize) -> Result<(), String> {
        let mm = Arc::clone(&self.mm);
        let model = self.models[index].clone();
        let root_class = model.nodes[0].class.clone();
        let mut options = Vec::new();
        for class in &mm.classes {
            for (feature, slot) in oracle::features(&mm, &class.name) {
                if let Slot::Cross { target, opposite } = slot {
                    if !container_side(&mm, &target, opposite.as_deref()) {
                        options.push((class.name.clone(), feature, target));
                    }
                }
            }
        }
        let Some((class, feature, target)) = options.choose(&mut self.rng).cloned() else { return Ok(()) };
        let Some((attr, data_type)) = attributes_of(&mm, &class).choose(&mut self.rng).cloned() else { return Ok(()) };
        let containments: Vec<String> = oracle::features(&mm, &root_class)
            .into_iter()
            .filter(|(_, s)| matches!(s, Slot::Containment { .. }))
            .map(|(n, _)| n)
            .collect();
        let Some(holder) = containments.choose(&mut self.rng).cloned() else { return Ok(()) };
        let value = probe_value(&mut self.rng, &mm, &model, &class, &attr, data_type);

        let got = self.repo.add_existing(&self.snapshot, "gen", &class, &model.name, &feature, &attr, &value, &target, &holder);
        let hits = model.matches(&mm, &class, &attr, &value);
        let expected: Result<usize, &str> = match hits.as_slice() {
            [] => Err("PARENT_NOT_FOUND"),
            [_, _, ..] => Err("AMBIGUOUS_PARENT"),
            [parent] => {
                let referenced = |c: usize| model.order(&mm).iter().any(|(n, _)| model.nodes[*n].refs.get(&feature).is_some_and(|r| r.contains(&c)));
                let candidate = model.nodes[0]
                    .children
                    .get(&holder)
                    .into_iter()
                    .flatten()
                    .copied()
                    .filter(|c| model.nodes[*c].alive && oracle::is_a(&mm, &model.nodes[*c].class, &target))
                    .find(|c| !referenced(*c));
                match candidate {
                    None => Err("NO_CANDIDATE"),
                    Some(_) if exceeds(upper_of(&mm, &model.nodes[*parent].class, &feature), model.slot_len(*parent, &feature) + 1) => {
                        Err("VALIDATION_REJECTED")
                    }
                    Some(c) => {
                        self.models[index].link(&mm, *parent, &feature, c);
                        Ok(*parent)
                    }
                }
            }
        };
        match expected {
            Err(code) => ensure!(err_code(&got)? == code, "link expected {code}, got {got:?}"),
            Ok(parent) => {
                let path = self.models[index].path_of(&mm, parent).unwrap();
                ensure!(got.as_ref().map(|p| p.to_string()).ok() == Some(path.clone()), "link returned {got:?}, expected {path}");
            }
        }
        self.compare_state(index)
    }
}

/// Runs reads and a short mutation sequence on a generated repository,
/// comparing every answer and post-state with the naive interpreter.
/// Returns the number of comparisons made.
pub fn oracle_case(seed: u64) -> Result<usize, String> {
    let mut rng = gen::rng(seed);
    let mm = Arc::new(gen::metamodel(&mut rng, 6));
    let count = rng.random_range(1..=3);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    fixtures::write_metamodel(dir.path(), "gen", &serialize_metamodel(&mm));
    let mut models = Vec::new();
    for i in 0..count {
        let name = format!("m{i}");
        let resource = gen::model(&mut rng, &mm, &name, 50 / count);
        fixtures::write_model(dir.path(), "gen", &name, &serialize_model(&resource).map_err(|e| e.to_string())?);
        models.push(PlainModel::from_resource(&resource));
    }
    let mut registry = MetamodelRegistry::new();
    registry.insert((*mm).clone());
    let snapshot = registry.snapshot();
    let (repo, errors) = modelforge_core::load_repository(dir.path(), &snapshot).map_err(|e| e.to_string())?;
    ensure!(errors.is_empty(), "load errors: {errors:?}");

    let mut run = OracleRun { rng, mm, repo, snapshot, models, dir: dir.path(), checks: 0 };
    run.reads()?;
    for _ in 0..6 {
        let index = run.rng.random_range(0..run.models.len());
        match run.rng.random_range(0..4) {
            0 => run.update_or_delete(index, false)?,
            1 => run.update_or_delete(index, true)?,
            2 => run.add(index)?,
            _ => run.link(index)?,
        }
    }
    run.reads()?;
    Ok(run.checks)
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct SoakSummary {
    pub operations: usize,
    pub committed: usize,
    pub refused: BTreeMap<&'static str, usize>,
}

/// Random mutation stream against the library fixture. After every
/// operation the in-memory model must have coherent opposites and a proper
/// containment tree, and refused operations must leave model and file intact.
pub fn soak(seed: u64, operations: usize) -> Result<SoakSummary, String> {
    const TITLES: [&str; 6] = ["Dune", "Emma", "Ulysses", "Hyperion", "Solaris", "Beloved"];
    const NAMES: [&str; 4] = ["Ada", "Grace", "Alan", "Edsger"];

    let mut rng = gen::rng(seed);
    let dir = fixtures::library_repo();
    let mm = fixtures::library();
    let mut registry = MetamodelRegistry::new();
    registry.insert((*mm).clone());
    let snap = registry.snapshot();
    let (mut repo, errors) = modelforge_core::load_repository(dir.path(), &snap).map_err(|e| e.to_string())?;
    ensure!(errors.is_empty(), "load errors: {errors:?}");
    let file = dir.path().join("library/alexandria.xmi");
    let mut summary = SoakSummary::default();

    for step in 0..operations {
        let before_text = serialize_model(repo.resource("library", "alexandria").unwrap()).map_err(|e| e.to_string())?;
        let before_file = fs::read(&file).map_err(|e| e.to_string())?;
        let title = *TITLES.choose(&mut rng).unwrap();
        let name = *NAMES.choose(&mut rng).unwrap();
        let pages = if rng.random_bool(0.05) { "many".to_owned() } else { rng.random_range(1..2000).to_string() };
        let attrs = |pairs: &[(&str, &str)]| pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect::<Vec<_>>();

        let outcome: Result<(), RepositoryError> = match rng.random_range(0..10) {
            0 | 1 => repo
                .add_new_element(&snap, "library", "Library", "Book", "alexandria", &attrs(&[("title", title), ("pages", &pages)]), None, None)
                .map(drop),
            2 => repo.add_new_element(&snap, "library", "Library", "Member", "alexandria", &attrs(&[("memberName", name)]), None, None).map(drop),
            3 | 4 => repo.add_existing(&snap, "library", "Member", "alexandria", "borrowed", "memberName", name, "Book", "books").map(drop),
            5 => repo
                .add_with_opposite(&snap, "library", "Member", "Book", "alexandria", "Member", &attrs(&[("title", title)]), Some(("memberName", name)))
                .map(drop),
            6 => repo.update_by_attribute(&snap, "library", "Book", "alexandria", "title", title, TITLES.choose(&mut rng).unwrap()).map(drop),
            7 => repo.update_by_attribute(&snap, "library", "Book", "alexandria", "pages", &pages, "100").map(drop),
            8 => repo.delete_by_attribute(&snap, "library", "Book", "alexandria", "title", title).map(drop),
            _ => repo.delete_by_attribute(&snap, "library", "Member", "alexandria", "memberName", name).map(drop),
        };
        summary.operations += 1;

        let resource = repo.resource("library", "alexandria").unwrap();
        let faults = structural_faults(&mm, &PlainModel::from_resource(resource));
        ensure!(faults.is_empty(), "step {step}: {faults:?}");
        match outcome {
            Ok(()) => summary.committed += 1,
            Err(e) => {
                *summary.refused.entry(e.code()).or_default() += 1;
                ensure!(serialize_model(resource).map_err(|e| e.to_string())? == before_text, "step {step}: refused op changed memory");
                ensure!(fs::read(&file).map_err(|e| e.to_string())? == before_file, "step {step}: refused op changed the file");
            }
        }
    }

    let bytes = fs::read(&file).map_err(|e| e.to_string())?;
    let reloaded = parse_model(&bytes, &mm, "alexandria").map_err(|e| e.to_string())?;
    let report = validate_resource(&reloaded, &mm, 0);
    ensure!(report.is_clean(), "final file does not validate: {report:?}");
    ensure!(structural_faults(&mm, &PlainModel::from_resource(&reloaded)).is_empty(), "final file breaks invariants");
    ensure!(
        serialize_model(repo.resource("library", "alexandria").unwrap()).map_err(|e| e.to_string())?.into_bytes() == bytes,
        "memory and disk disagree at the end"
    );
    Ok(summary)
}

fn pick<T: Clone>(rng: &mut Seeded, items: &[T]) -> Option<T> {
    items.choose(rng).cloned()
}

/// Injects one defect of a randomly chosen kind into a generated model and
/// checks that the validator reports exactly that code at that object.
/// Returns `None` when the generated model offers no spot for the kind.
pub fn validator_injection(seed: u64) -> Result<Option<ViolationCode>, String> {
    let mut rng = gen::rng(seed);
    let mm = Arc::new(gen::metamodel(&mut rng, 6));
    let mut r = gen::model(&mut rng, &mm, "victim", 30);
    let code = *ViolationCode::ALL.choose(&mut rng).unwrap();
    let order = r.document_order();
    let objects: Vec<ObjectId> = order.iter().map(|(id, _)| *id).collect();
    let class_of = |r: &ModelResource, id: ObjectId| r.object(id).unwrap().class_name.clone();

    // Every accepted spot: (object, paths where the violation may be reported).
    let expected_at: Vec<String> = match code {
        ViolationCode::Type => {
            let spots: Vec<(ObjectId, String)> =
                objects.iter().flat_map(|id| r.object(*id).unwrap().attributes.keys().map(|k| (*id, k.clone())).collect::<Vec<_>>()).collect();
            let Some((id, attr)) = pick(&mut rng, &spots) else { return Ok(None) };
            let wrong = match r.object(id).unwrap().attributes[&attr] {
                Value::String(_) => Value::Int(1),
                _ => Value::String("wrong".into()),
            };
            r.object_mut(id).unwrap().attributes.insert(attr, wrong);
            vec![r.path_of(id).unwrap().to_string()]
        }
        ViolationCode::UnknownFeature => {
            let id = pick(&mut rng, &objects).unwrap();
            r.object_mut(id).unwrap().attributes.insert("zzUndeclared".into(), Value::Boolean(true));
            vec![r.path_of(id).unwrap().to_string()]
        }
        ViolationCode::MultLower => {
            let spots: Vec<(ObjectId, String)> = objects
                .iter()
                .flat_map(|id| {
                    let class = class_of(&r, *id);
                    let required: Vec<(ObjectId, String)> = mm
                        .classes
                        .iter()
                        .filter(|c| oracle::is_a(&mm, &class, &c.name))
                        .flat_map(|c| c.attributes.iter().filter(|a| a.multiplicity.lower > 0).map(|a| (*id, a.name.clone())))
                        .collect();
                    required
                })
                .collect();
            let Some((id, attr)) = pick(&mut rng, &spots) else { return Ok(None) };
            r.object_mut(id).unwrap().attributes.remove(&attr);
            vec![r.path_of(id).unwrap().to_string()]
        }
        ViolationCode::MultUpper | ViolationCode::Dangling => {
            // Plain cross references without an opposite.
            let mut spots = Vec::new();
            for id in &objects {
                for (feature, slot) in oracle::features(&mm, &class_of(&r, *id)) {
                    if let Slot::Cross { target, opposite: None } = slot {
                        let upper = upper_of(&mm, &class_of(&r, *id), &feature);
                        let len = r.object(*id).unwrap().referenced(&feature).len();
                        let targets: Vec<ObjectId> = objects.iter().copied().filter(|t| oracle::is_a(&mm, &class_of(&r, *t), &target)).collect();
                        let fits = if code == ViolationCode::Dangling { !exceeds(upper, len + 1) } else { upper >= 0 && !targets.is_empty() };
                        if fits {
                            spots.push((*id, feature, target, upper, targets));
                        }
                    }
                }
            }
            let Some((id, feature, target, upper, targets)) = pick(&mut rng, &spots) else { return Ok(None) };
            if code == ViolationCode::Dangling {
                let orphan = r.create_object(target);
                r.object_mut(id).unwrap().slot_mut(&feature, false).push(orphan);
            } else {
                while r.object(id).unwrap().referenced(&feature).len() <= upper as usize {
                    let t = *targets.choose(&mut rng).unwrap();
                    r.object_mut(id).unwrap().slot_mut(&feature, false).push(t);
                }
            }
            vec![r.path_of(id).unwrap().to_string()]
        }
        ViolationCode::Opposite => {
            let mut spots = Vec::new();
            for id in &objects {
                for (feature, slot) in oracle::features(&mm, &class_of(&r, *id)) {
                    let (containment, opposite) = match slot {
                        Slot::Cross { target, opposite: Some(o) } if !container_side(&mm, &target, Some(&o)) => (false, o),
                        Slot::Containment { opposite: Some(o), .. } => (true, o),
                        _ => continue,
                    };
                    for t in r.object(*id).unwrap().slot(&feature, containment) {
                        if t != id {
                            spots.push((*id, *t, opposite.clone()));
                        }
                    }
                }
            }
            let Some((id, t, opposite)) = pick(&mut rng, &spots) else { return Ok(None) };
            let target = r.object_mut(t).unwrap();
            for slot in target.containments.get_mut(&opposite).into_iter().chain(target.references.get_mut(&opposite)) {
                slot.retain(|x| *x != id);
            }
            vec![r.path_of(id).unwrap().to_string()]
        }
        ViolationCode::Tree => {
            let mut spots = Vec::new();
            for q in &objects {
                for (feature, slot) in oracle::features(&mm, &class_of(&r, *q)) {
                    let Slot::Containment { target, opposite: None } = slot else { continue };
                    let upper = upper_of(&mm, &class_of(&r, *q), &feature);
                    let len = r.object(*q).unwrap().contained(&feature).len();
                    if exceeds(upper, len + 1) {
                        continue;
                    }
                    for o in objects.iter().skip(1) {
                        if oracle::is_a(&mm, &class_of(&r, *o), &target) {
                            spots.push((*q, feature.clone(), *o));
                        }
                    }
                }
            }
            let Some((q, feature, o)) = pick(&mut rng, &spots) else { return Ok(None) };
            let (p, _) = r.container_of(o).unwrap();
            let p = p.to_owned();
            r.object_mut(q).unwrap().slot_mut(&feature, true).push(o);
            vec![r.path_of(q).unwrap().to_string(), r.path_of(p).unwrap().to_string()]
        }
        ViolationCode::Abstract => {
            let abstract_classes: Vec<String> = mm.classes.iter().filter(|c| c.is_abstract).map(|c| c.name.clone()).collect();
            let mut spots = Vec::new();
            for q in &objects {
                for (feature, slot) in oracle::features(&mm, &class_of(&r, *q)) {
                    let Slot::Containment { target, opposite } = slot else { continue };
                    let upper = upper_of(&mm, &class_of(&r, *q), &feature);
                    if opposite.is_some() || exceeds(upper, r.object(*q).unwrap().contained(&feature).len() + 1) {
                        continue;
                    }
                    for a in &abstract_classes {
                        let required = mm
                            .classes
                            .iter()
                            .filter(|c| oracle::is_a(&mm, a, &c.name))
                            .any(|c| c.attributes.iter().any(|x| x.multiplicity.lower > 0));
                        if oracle::is_a(&mm, a, &target) && !required {
                            spots.push((*q, feature.clone(), a.clone()));
                        }
                    }
                }
            }
            let Some((q, feature, class)) = pick(&mut rng, &spots) else { return Ok(None) };
            let o = r.create_object(class);
            r.object_mut(q).unwrap().slot_mut(&feature, true).push(o);
            vec![r.path_of(o).unwrap().to_string()]
        }
    };

    let report = validate_resource(&r, &mm, 0);
    ensure!(report.codes() == vec![code], "injected {code} but got {:?}", report.violations);
    let at = report.violations[0].object_path.to_string();
    ensure!(expected_at.contains(&at), "injected {code} reported at {at}, expected one of {expected_at:?}");
    ensure!(report == validate_resource(&r, &mm, 0), "validation is not idempotent");
    Ok(Some(code))
}
