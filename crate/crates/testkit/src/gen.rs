//! Seeded generators for valid metamodels and conforming models.

use std::sync::Arc;

use modelforge_core::{
    validate_resource, Attribute, DataType, MetaClass, Metamodel, ModelResource, Multiplicity, ObjectId, Reference, Value,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Seeded = ChaCha8Rng;

pub fn rng(seed: u64) -> Seeded {
    ChaCha8Rng::seed_from_u64(seed)
}

const CLASS_NAMES: [&str; 12] =
    ["Atlas", "Beacon", "Cask", "Delta", "Ember", "Fjord", "Grove", "Harbor", "Iris", "Juniper", "Kite", "Lumen"];

fn multiplicity(rng: &mut Seeded) -> Multiplicity {
    match rng.random_range(0..4) {
        0 => Multiplicity::OPTIONAL,
        1 => Multiplicity::new(0, rng.random_range(2..4)),
        _ => Multiplicity::MANY,
    }
}

/// A valid metamodel with 1 to `max_classes` classes. The first class is
/// concrete and plays the role of the model root.
pub fn metamodel(rng: &mut Seeded, max_classes: usize) -> Metamodel {
    let count = rng.random_range(1..=max_classes.max(1));
    let mut names: Vec<&str> = CLASS_NAMES.to_vec();
    names.shuffle(rng);
    names.truncate(count);

    let mut classes: Vec<MetaClass> = names.iter().map(|n| MetaClass::new(*n)).collect();
    let mut feature_id = 0usize;
    let mut fresh = |prefix: &str| {
        feature_id += 1;
        format!("{prefix}{feature_id}")
    };

    for i in 1..count {
        if rng.random_bool(0.25) {
            classes[i].is_abstract = true;
        }
        for j in 1..i {
            if rng.random_bool(0.3) && classes[i].super_types.len() < 2 {
                let name = classes[j].name.clone();
                classes[i].super_types.push(name);
            }
        }
    }

    for i in 0..count {
        for _ in 0..rng.random_range(0..=3) {
            let data_type = *DataType::ALL.choose(rng).unwrap();
            let mult = if rng.random_bool(0.15) { Multiplicity::REQUIRED } else { Multiplicity::OPTIONAL };
            classes[i].attributes.push(Attribute::new(fresh("a"), data_type).with_multiplicity(mult));
        }
        for _ in 0..rng.random_range(0..=2) {
            let j = rng.random_range(0..count);
            let name = fresh("c");
            let mut containment = Reference::containment(&name, classes[j].name.clone()).with_multiplicity(multiplicity(rng));
            if rng.random_bool(0.3) {
                let back = fresh("up");
                containment = containment.with_opposite(&back);
                let owner = classes[i].name.clone();
                classes[j].references.push(Reference::new(back, owner).with_opposite(name));
            }
            classes[i].references.push(containment);
        }
        for _ in 0..rng.random_range(0..=2) {
            let j = rng.random_range(0..count);
            let name = fresh("r");
            let mut reference = Reference::new(&name, classes[j].name.clone()).with_multiplicity(multiplicity(rng));
            if i == j && rng.random_bool(0.2) {
                reference = reference.with_opposite(&name);
            } else if rng.random_bool(0.5) {
                let back = fresh("r");
                reference = reference.with_opposite(&back);
                let owner = classes[i].name.clone();
                classes[j].references.push(Reference::new(back, owner).with_opposite(name).with_multiplicity(multiplicity(rng)));
            }
            classes[i].references.push(reference);
        }
    }

    let mut metamodel = Metamodel::new("gen", "urn:modelforge:gen", "gen");
    metamodel.classes = classes;
    let defects = metamodel.validate();
    assert!(defects.is_empty(), "generator produced an invalid metamodel: {defects:?}");
    metamodel
}

fn random_string(rng: &mut Seeded) -> String {
    const POOL: [&str; 12] = ["", "plain", "two words", "quote\"d", "apos'", "<tag>", "a&b", "line\nbreak", "tab\there", "ünï©ødé", "  padded  ", "x"];
    if rng.random_bool(0.5) {
        (*POOL.choose(rng).unwrap()).to_owned()
    } else {
        format!("v{}", rng.random_range(0..6))
    }
}

pub fn random_value(rng: &mut Seeded, data_type: DataType) -> Value {
    match data_type {
        DataType::String => Value::String(random_string(rng)),
        DataType::Int => Value::Int(match rng.random_range(0..3) {
            0 => rng.random_range(-3..4),
            1 => rng.random(),
            _ => *[i32::MIN, i32::MAX, 0].choose(rng).unwrap(),
        }),
        DataType::Boolean => Value::Boolean(rng.random()),
        DataType::Double => Value::Double(match rng.random_range(0..4) {
            0 => f64::from(rng.random_range(-4..5)) / 4.0,
            1 => rng.random::<f64>() * 10f64.powi(rng.random_range(-30..30)),
            2 => -rng.random::<f64>() * 1e300,
            _ => *[0.0, -0.0, 0.1, f64::MIN_POSITIVE, f64::MAX, 5e-324].choose(rng).unwrap(),
        }),
    }
}

fn cap(m: Multiplicity) -> usize {
    if m.is_unbounded() {
        3
    } else {
        m.upper as usize
    }
}

/// A model conforming to `metamodel` with at most `max_objects` objects,
/// rooted at the first class.
pub fn model(rng: &mut Seeded, metamodel: &Arc<Metamodel>, name: &str, max_objects: usize) -> ModelResource {
    let mm = metamodel.as_ref();
    let root_class = mm.classes[0].name.clone();
    let mut resource = ModelResource::new(name, Arc::clone(metamodel), root_class);
    let mut budget = max_objects.saturating_sub(1);
    let mut queue = std::collections::VecDeque::from([resource.root_id()]);
    let mut all: Vec<ObjectId> = Vec::new();

    while let Some(id) = queue.pop_front() {
        all.push(id);
        let class = mm.class(&resource.object(id).unwrap().class_name).unwrap();
        let features = mm.all_features(class).unwrap();
        for feature in &features {
            if let Some(attribute) = feature.as_attribute() {
                if attribute.multiplicity.lower > 0 || rng.random_bool(0.7) {
                    let value = random_value(rng, attribute.data_type);
                    resource.object_mut(id).unwrap().attributes.insert(attribute.name.clone(), value);
                }
            } else if let Some(containment) = feature.as_containment() {
                let choices = mm.concrete_subtypes_of(&containment.target);
                if choices.is_empty() {
                    continue;
                }
                let n = rng.random_range(0..=cap(containment.multiplicity).min(budget));
                for _ in 0..n {
                    let child_class = choices.choose(rng).unwrap().name.clone();
                    let child = resource.create_object(child_class);
                    resource.object_mut(id).unwrap().slot_mut(&containment.name, true).push(child);
                    if let Some(back) = containment.opposite.as_deref() {
                        resource.object_mut(child).unwrap().slot_mut(back, false).push(id);
                    }
                    queue.push_back(child);
                    budget -= 1;
                }
            }
        }
    }

    // Cross references, both ends of an opposite pair at once.
    for &source in &all {
        let class = mm.class(&resource.object(source).unwrap().class_name).unwrap();
        let features = mm.all_features(class).unwrap();
        for feature in features {
            let Some(reference) = feature.as_cross_reference() else { continue };
            let opposite = reference.opposite.as_deref().and_then(|o| {
                let target = mm.class(&reference.target)?;
                mm.feature(target, o).ok().flatten()
            });
            if opposite.is_some_and(|o| o.as_containment().is_some()) {
                continue;
            }
            if let Some(opp) = opposite {
                if (feature.owner.name.as_str(), reference.name.as_str()) > (opp.owner.name.as_str(), opp.name()) {
                    continue;
                }
            }
            let candidates: Vec<ObjectId> = all
                .iter()
                .copied()
                .filter(|t| mm.is_subtype_name_of(&resource.object(*t).unwrap().class_name, &reference.target))
                .collect();
            for _ in 0..rng.random_range(0..=cap(reference.multiplicity)) {
                let Some(&target) = candidates.choose(rng) else { break };
                let source_slot = resource.object(source).unwrap().referenced(&reference.name);
                if source_slot.contains(&target) || source_slot.len() >= cap(reference.multiplicity) {
                    continue;
                }
                if let Some(opp) = opposite {
                    let back = resource.object(target).unwrap().referenced(opp.name());
                    let upper = cap(opp.multiplicity());
                    if back.len() >= upper {
                        continue;
                    }
                    resource.object_mut(source).unwrap().slot_mut(&reference.name, false).push(target);
                    let back = resource.object_mut(target).unwrap().slot_mut(opp.name(), false);
                    if !back.contains(&source) {
                        back.push(source);
                    }
                } else {
                    resource.object_mut(source).unwrap().slot_mut(&reference.name, false).push(target);
                }
            }
        }
    }

    let report = validate_resource(&resource, mm, 0);
    assert!(report.is_clean(), "generator produced a non-conforming model: {report:?}");
    resource
}
