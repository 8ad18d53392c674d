//! OpenAPI 3.0 description of a route table.

use modelforge_core::{DataType, MetaClass, Metamodel, RegistrySnapshot};
use serde_json::{json, Map, Value};

use super::routes::{build_route_table, OperationKind, Route, RouteTable, MODEL_PARAM};

pub const OPENAPI_VERSION: &str = "3.0.3";

/// Component name of a class schema. Qualified by package so that equal
/// class names in different packages do not collide.
pub fn schema_name(package: &str, class: &str) -> String {
    format!("{package}.{class}")
}

fn schema_ref(name: &str) -> Value {
    json!({ "$ref": format!("#/components/schemas/{name}") })
}

fn json_type(data_type: DataType) -> &'static str {
    match data_type {
        DataType::String => "string",
        DataType::Int => "integer",
        DataType::Boolean => "boolean",
        DataType::Double => "number",
    }
}

fn class_schema(mm: &Metamodel, class: &MetaClass) -> Value {
    let mut properties = Map::new();
    properties.insert("_class".into(), json!({ "type": "string" }));
    properties.insert("_path".into(), json!({ "type": "string", "description": "Fragment path within the model" }));
    properties.insert("_model".into(), json!({ "type": "string", "description": "Model name (collection reads only)" }));
    let features = mm.all_features(class).unwrap_or_default();
    for f in &features {
        if let Some(a) = f.as_attribute() {
            let mut schema = json!({ "type": json_type(a.data_type) });
            if a.data_type == DataType::Int {
                schema["format"] = json!("int32");
            }
            if a.data_type == DataType::Double {
                schema["format"] = json!("double");
            }
            properties.insert(a.name.clone(), schema);
        }
    }
    for f in &features {
        if let Some(r) = f.as_containment() {
            properties.insert(r.name.clone(), json!({ "type": "array", "items": schema_ref(&schema_name(&mm.package_name, &r.target)) }));
        }
    }
    for f in &features {
        if let Some(r) = f.as_cross_reference() {
            properties.insert(
                r.name.clone(),
                json!({ "type": "array", "items": { "type": "string" }, "description": format!("Fragment paths of `{}` objects", r.target) }),
            );
        }
    }
    let description = if class.is_abstract {
        format!("`{}` is abstract and not directly instantiable; instances are of concrete subtypes.", class.name)
    } else {
        format!("An instance of `{}`.", class.name)
    };
    json!({
        "type": "object",
        "description": description,
        "required": ["_class", "_path"],
        "properties": properties,
    })
}

fn query(name: &str) -> Value {
    json!({ "name": name, "in": "query", "required": true, "schema": { "type": "string" } })
}

fn json_content(schema: Value) -> Value {
    json!({ "application/json": { "schema": schema } })
}

fn creation_body(mm: &Metamodel, child: &MetaClass, reserved: &[&str]) -> Value {
    let mut properties = Map::new();
    for f in mm.all_features(child).unwrap_or_default() {
        if let Some(a) = f.as_attribute() {
            properties.insert(a.name.clone(), json!({ "type": "string", "description": format!("{} value as text", json_type(a.data_type)) }));
        }
    }
    for key in reserved {
        properties.insert((*key).to_owned(), json!({ "type": "string" }));
    }
    json!({
        "required": false,
        "content": json_content(json!({ "type": "object", "properties": properties, "additionalProperties": false })),
    })
}

fn ok(status: &str, description: &str, schema: Value) -> Value {
    json!({ status: { "description": description, "content": json_content(schema) } })
}

fn operation(snapshot: &RegistrySnapshot, route: &Route) -> Value {
    let b = &route.binding;
    let mm = b.package.as_deref().and_then(|p| snapshot.metamodel(p).ok());
    let class_ref = || schema_ref(&schema_name(b.package.as_deref().unwrap_or_default(), b.class.as_deref().unwrap_or_default()));
    let child_ref = || schema_ref(&schema_name(b.package.as_deref().unwrap_or_default(), b.child.as_deref().unwrap_or_default()));
    let count = |key: &str| json!({ "type": "object", "required": [key], "properties": { key: { "type": "integer" } } });
    let class = b.class.as_deref().unwrap_or_default();

    let (summary, mut responses, body) = match b.kind {
        OperationKind::ApiDocs => ("This document", ok("200", "OpenAPI document", json!({ "type": "object" })), None),
        OperationKind::Packages => (
            "Registered packages",
            ok("200", "One entry per package", json!({ "type": "array", "items": schema_ref("PackageInfo") })),
            None,
        ),
        OperationKind::ReadAll => (
            "Every instance of the class across the package's models",
            ok("200", "Instances in model then document order", json!({ "type": "array", "items": class_ref() })),
            None,
        ),
        OperationKind::Search => (
            "Instances held in the containment whose attribute matches exactly",
            ok("200", "Matches", json!({ "type": "array", "items": class_ref() })),
            None,
        ),
        OperationKind::NewElement => {
            let child = mm.and_then(|m| m.class(b.child.as_deref()?).map(|c| (m, c)));
            (
                "Create an element inside a parent instance",
                ok("201", "Created element; Location holds its fragment path", child_ref()),
                child.map(|(m, c)| creation_body(m, c, &["_parentAttribute", "_parentValue", "_containment"])),
            )
        }
        OperationKind::AddExisting => (
            "Link the first unreferenced candidate into a reference of the matched instance",
            ok("200", "Updated instance", class_ref()),
            None,
        ),
        OperationKind::NewOpposite => {
            let child = mm.and_then(|m| m.class(b.child.as_deref()?).map(|c| (m, c)));
            (
                "Create an element whose bidirectional reference points at an instance",
                ok("201", "Created element; Location holds its fragment path", child_ref()),
                child.map(|(m, c)| creation_body(m, c, &["_targetAttribute", "_targetValue"])),
            )
        }
        OperationKind::Update => ("Set an attribute on every matching instance", ok("200", "Number updated", count("updated")), None),
        OperationKind::DeleteByAttribute => {
            ("Delete every matching instance with its subtree", ok("200", "Number deleted", count("deleted")), None)
        }
        OperationKind::DeleteModel => {
            ("Delete the model file", ok("200", "Deleted model", count_model()), None)
        }
    };
    responses["default"] = json!({ "description": "Error", "content": json_content(schema_ref("ErrorBody")) });
    if matches!(b.kind, OperationKind::NewElement | OperationKind::NewOpposite) {
        responses["201"]["headers"] = json!({ "Location": { "description": "Fragment path of the created element", "schema": { "type": "string" } } });
    }

    let mut parameters: Vec<Value> = Vec::new();
    if route.template.contains(MODEL_PARAM) {
        parameters.push(json!({ "name": "xmiFileName", "in": "path", "required": true, "schema": { "type": "string" } }));
    }
    parameters.extend(b.kind.query_params().iter().map(|p| query(p)));

    let mut op = Map::new();
    op.insert("operationId".into(), json!(route.operation_id()));
    if let Some(p) = &b.package {
        op.insert("tags".into(), json!([p]));
    }
    let summary = if class.is_empty() { summary.to_owned() } else { format!("{summary} ({class})") };
    op.insert("summary".into(), json!(summary));
    if !parameters.is_empty() {
        op.insert("parameters".into(), Value::Array(parameters));
    }
    if let Some(body) = body {
        op.insert("requestBody".into(), body);
    }
    op.insert("responses".into(), responses);
    Value::Object(op)
}

fn count_model() -> Value {
    json!({ "type": "object", "required": ["deletedModel"], "properties": { "deletedModel": { "type": "string" } } })
}

fn static_schemas() -> Map<String, Value> {
    let mut schemas = Map::new();
    schemas.insert(
        "ErrorBody".into(),
        json!({
            "type": "object",
            "required": ["error", "message"],
            "properties": {
                "error": { "type": "string" },
                "message": { "type": "string" },
                "details": {},
            },
        }),
    );
    schemas.insert(
        "PackageInfo".into(),
        json!({
            "type": "object",
            "required": ["packageName", "generation", "classCount", "modelCount"],
            "properties": {
                "packageName": { "type": "string" },
                "generation": { "type": "integer" },
                "classCount": { "type": "integer" },
                "modelCount": { "type": "integer" },
            },
        }),
    );
    schemas
}

/// Describes `table`, which must have been built from `snapshot`.
pub fn describe(snapshot: &RegistrySnapshot, table: &RouteTable, base_path: &str) -> Value {
    let mut paths = Map::new();
    for route in &table.routes {
        let entry = paths.entry(route.template.clone()).or_insert_with(|| json!({}));
        entry[route.method.lower()] = operation(snapshot, route);
    }
    let mut schemas = static_schemas();
    for mm in snapshot.metamodels() {
        for class in &mm.classes {
            schemas.insert(schema_name(&mm.package_name, &class.name), class_schema(mm, class));
        }
    }
    let tags: Vec<Value> = snapshot
        .metamodels()
        .map(|mm| json!({ "name": mm.package_name, "description": format!("Package {} ({})", mm.package_name, mm.ns_uri) }))
        .collect();
    let server = if base_path.is_empty() { "/" } else { base_path };
    json!({
        "openapi": OPENAPI_VERSION,
        "info": {
            "title": "modelforge",
            "description": "Endpoints provisioned from the registered metamodels.",
            "version": snapshot.generation().to_string(),
        },
        "servers": [{ "url": server }],
        "tags": tags,
        "paths": paths,
        "components": { "schemas": schemas },
    })
}

/// The document for a registry snapshot.
pub fn build_api_document(snapshot: &RegistrySnapshot, base_path: &str) -> Value {
    describe(snapshot, &build_route_table(snapshot), base_path)
}
