//! One function per operation kind.

use std::collections::BTreeMap;

use axum::http::StatusCode;
use modelforge_core::{Found, FragmentPath, Repository};
use serde_json::{json, Map, Value};

use super::error::ApiError;
use super::view::Renderer;
use super::{Call, Reply};
use crate::provisioning::{OperationKind, Published};

fn views(found: &[Found<'_>]) -> Value {
    let mut renderers: BTreeMap<&str, Renderer<'_>> = BTreeMap::new();
    let mut out = Vec::with_capacity(found.len());
    for f in found {
        let renderer = renderers.entry(f.resource.model_name()).or_insert_with(|| Renderer::new(f.resource));
        out.push(renderer.view(f.id, true));
    }
    Value::Array(out)
}

fn names<'c>(call: &'c Call<'_>) -> (&'c str, &'c str) {
    let b = &call.route.binding;
    (b.package.as_deref().unwrap_or_default(), b.class.as_deref().unwrap_or_default())
}

fn model<'c>(call: &'c Call<'_>) -> &'c str {
    call.model.as_deref().unwrap_or_default()
}

pub(crate) fn read(repo: &Repository, published: &Published, call: &Call<'_>) -> Result<Reply, ApiError> {
    let (package, class) = names(call);
    let snapshot = &published.registry;
    match call.route.binding.kind {
        OperationKind::ApiDocs => {
            Ok(Reply { status: StatusCode::OK, body: published.document.clone(), location: None, etag: true })
        }
        OperationKind::Packages => {
            let entries: Vec<Value> = snapshot
                .metamodels()
                .map(|mm| {
                    json!({
                        "packageName": mm.package_name,
                        "generation": snapshot.generation(),
                        "classCount": mm.classes.len(),
                        "modelCount": repo.model_count(&mm.package_name),
                    })
                })
                .collect();
            Ok(Reply::json(StatusCode::OK, &Value::Array(entries)))
        }
        OperationKind::ReadAll => {
            let found = repo.read_all_instances(snapshot, package, class)?;
            Ok(Reply::json(StatusCode::OK, &views(&found)))
        }
        OperationKind::Search => {
            let containment = call.route.binding.containment.as_deref().unwrap_or_default();
            let attribute = call.param("attributeName")?;
            let value = call.param("attributeValue")?;
            let found = repo.search(snapshot, package, class, containment, attribute, value)?;
            Ok(Reply::json(StatusCode::OK, &views(&found)))
        }
        other => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", format!("{other:?} routed as a read"))),
    }
}

/// Attribute values from a creation body, plus the reserved steering keys.
struct CreationBody {
    attributes: Vec<(String, String)>,
    reserved: BTreeMap<String, String>,
}

fn creation_body(bytes: &[u8], allowed: &[&str]) -> Result<CreationBody, ApiError> {
    let object: Map<String, Value> = if bytes.iter().all(u8::is_ascii_whitespace) {
        Map::new()
    } else {
        match serde_json::from_slice::<Value>(bytes) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(ApiError::bad_request("request body must be a JSON object")),
            Err(e) => return Err(ApiError::bad_request(format!("request body is not JSON: {e}"))),
        }
    };
    let mut body = CreationBody { attributes: Vec::new(), reserved: BTreeMap::new() };
    for (key, value) in object {
        let Value::String(text) = value else {
            return Err(ApiError::bad_request(format!("value of `{key}` must be a string")));
        };
        if key.starts_with('_') {
            if !allowed.contains(&key.as_str()) {
                return Err(ApiError::bad_request(format!("unknown reserved key `{key}`")));
            }
            body.reserved.insert(key, text);
        } else {
            body.attributes.push((key, text));
        }
    }
    Ok(body)
}

fn selector<'b>(body: &'b CreationBody, attr_key: &str, value_key: &str) -> Result<Option<(&'b str, &'b str)>, ApiError> {
    match (body.reserved.get(attr_key), body.reserved.get(value_key)) {
        (Some(a), Some(v)) => Ok(Some((a.as_str(), v.as_str()))),
        (None, None) => Ok(None),
        _ => Err(ApiError::bad_request(format!("`{attr_key}` and `{value_key}` must be given together"))),
    }
}

fn object_view(repo: &Repository, package: &str, model: &str, path: &FragmentPath) -> Result<Value, ApiError> {
    let name = model.strip_suffix(".xmi").unwrap_or(model);
    let internal = |m: &str| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", m.to_owned());
    let resource = repo.resource(package, name).ok_or_else(|| internal("model vanished after commit"))?;
    let id = resource.resolve(path).map_err(|_| internal("object vanished after commit"))?;
    Ok(Renderer::new(resource).view(id, false))
}

fn created(repo: &Repository, package: &str, model: &str, path: FragmentPath) -> Result<Reply, ApiError> {
    let view = object_view(repo, package, model, &path)?;
    let mut reply = Reply::json(StatusCode::CREATED, &view);
    reply.location = Some(path.to_string());
    Ok(reply)
}

pub(crate) fn write(repo: &mut Repository, published: &Published, call: &Call<'_>) -> Result<Reply, ApiError> {
    let (package, class) = names(call);
    let snapshot = &published.registry;
    let model = model(call);
    let child = call.route.binding.child.as_deref().unwrap_or_default();
    match call.route.binding.kind {
        OperationKind::NewElement => {
            let body = creation_body(&call.body, &["_parentAttribute", "_parentValue", "_containment"])?;
            let parent = selector(&body, "_parentAttribute", "_parentValue")?;
            let containment = body.reserved.get("_containment").map(String::as_str);
            let path = repo.add_new_element(snapshot, package, class, child, model, &body.attributes, parent, containment)?;
            created(repo, package, model, path)
        }
        OperationKind::NewOpposite => {
            let field_type = call.param("fieldType")?;
            let body = creation_body(&call.body, &["_targetAttribute", "_targetValue"])?;
            let target = selector(&body, "_targetAttribute", "_targetValue")?;
            let path = repo.add_with_opposite(snapshot, package, class, child, model, field_type, &body.attributes, target)?;
            created(repo, package, model, path)
        }
        OperationKind::AddExisting => {
            let path = repo.add_existing(
                snapshot,
                package,
                class,
                model,
                call.param("parentContainmentName")?,
                call.param("attributeNameToMatch")?,
                call.param("attributeValueToMatch")?,
                call.param("childClassName")?,
                call.param("childContainmentName")?,
            )?;
            Ok(Reply::json(StatusCode::OK, &object_view(repo, package, model, &path)?))
        }
        OperationKind::Update => {
            let n = repo.update_by_attribute(
                snapshot,
                package,
                class,
                model,
                call.param("attributeName")?,
                call.param("attributeValue")?,
                call.param("updatedValue")?,
            )?;
            Ok(Reply::json(StatusCode::OK, &json!({ "updated": n })))
        }
        OperationKind::DeleteByAttribute => {
            let n = repo.delete_by_attribute(snapshot, package, class, model, call.param("attributeName")?, call.param("attributeValue")?)?;
            Ok(Reply::json(StatusCode::OK, &json!({ "deleted": n })))
        }
        OperationKind::DeleteModel => {
            let name = repo.delete_model(snapshot, package, class, model)?;
            Ok(Reply::json(StatusCode::OK, &json!({ "deletedModel": name })))
        }
        other => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", format!("{other:?} routed as a write"))),
    }
}
