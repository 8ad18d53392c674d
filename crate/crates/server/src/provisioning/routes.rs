//! The route table: every endpoint instantiated for the current registry.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use modelforge_core::{MetaClass, Metamodel, RegistrySnapshot};

/// Placeholder segment for the model file name.
pub const MODEL_PARAM: &str = "{xmiFileName}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Get,
    Post,
    Put,
    Delete,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
            Method::Delete => "DELETE",
        }
    }

    pub fn lower(self) -> &'static str {
        match self {
            Method::Get => "get",
            Method::Post => "post",
            Method::Put => "put",
            Method::Delete => "delete",
        }
    }

    pub fn from_http(method: &axum::http::Method) -> Option<Method> {
        match *method {
            axum::http::Method::GET => Some(Method::Get),
            axum::http::Method::POST => Some(Method::Post),
            axum::http::Method::PUT => Some(Method::Put),
            axum::http::Method::DELETE => Some(Method::Delete),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperationKind {
    ReadAll,
    Search,
    NewElement,
    AddExisting,
    NewOpposite,
    Update,
    DeleteByAttribute,
    DeleteModel,
    ApiDocs,
    Packages,
}

impl OperationKind {
    /// Query parameters the operation requires.
    pub fn query_params(self) -> &'static [&'static str] {
        match self {
            OperationKind::Search => &["attributeName", "attributeValue"],
            OperationKind::AddExisting => &[
                "parentContainmentName",
                "attributeNameToMatch",
                "attributeValueToMatch",
                "childClassName",
                "childContainmentName",
            ],
            OperationKind::NewOpposite => &["fieldType"],
            OperationKind::Update => &["attributeName", "attributeValue", "updatedValue"],
            OperationKind::DeleteByAttribute => &["attributeName", "attributeValue"],
            _ => &[],
        }
    }

    pub fn is_mutation(self) -> bool {
        !matches!(self, OperationKind::ReadAll | OperationKind::Search | OperationKind::ApiDocs | OperationKind::Packages)
    }
}

/// What a route is bound to. Class names are fixed per route; the model
/// name is the only per-request path parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub package: Option<String>,
    pub kind: OperationKind,
    pub class: Option<String>,
    /// Child class for the creating operations.
    pub child: Option<String>,
    /// Containment name for search.
    pub containment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub method: Method,
    pub template: String,
    pub binding: Binding,
}

impl Route {
    pub fn operation_id(&self) -> String {
        let mut parts: Vec<&str> = Vec::new();
        parts.extend(self.binding.package.as_deref());
        parts.extend(self.binding.class.as_deref());
        parts.extend(self.binding.child.as_deref());
        parts.extend(self.binding.containment.as_deref());
        let suffix = self.template.rsplit('/').next().unwrap_or_default();
        let mut id = parts.join("_");
        if !id.is_empty() {
            id.push('_');
        }
        id.push_str(&suffix.replace('-', "_"));
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteTable {
    pub generation: u64,
    pub routes: Vec<Route>,
    index: HashMap<(Method, String), usize>,
}

impl RouteTable {
    fn new(generation: u64, routes: Vec<Route>) -> Self {
        let mut index = HashMap::with_capacity(routes.len());
        for (i, route) in routes.iter().enumerate() {
            let previous = index.insert((route.method, route.template.clone()), i);
            assert!(previous.is_none(), "duplicate route {} {}", route.method, route.template);
        }
        RouteTable { generation, routes, index }
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn get(&self, method: Method, template: &str) -> Option<&Route> {
        self.index.get(&(method, template.to_owned())).map(|i| &self.routes[*i])
    }

    /// Finds the route for a decoded request path (relative to the base
    /// path) and returns it with the model name, if the route has one.
    pub fn lookup<'t>(&'t self, method: Method, segments: &[String]) -> Option<(&'t Route, Option<String>)> {
        let exact = format!("/{}", segments.join("/"));
        if let Some(route) = self.get(method, &exact) {
            return Some((route, None));
        }
        if segments.len() < 3 {
            return None;
        }
        let model_at = segments.len() - 2;
        let mut templated: Vec<&str> = segments.iter().map(String::as_str).collect();
        templated[model_at] = MODEL_PARAM;
        let route = self.get(method, &format!("/{}", templated.join("/")))?;
        Some((route, Some(segments[model_at].clone())))
    }
}

fn route(method: Method, template: String, package: &str, kind: OperationKind) -> Route {
    Route {
        method,
        template,
        binding: Binding { package: Some(package.to_owned()), kind, class: None, child: None, containment: None },
    }
}

fn with(mut r: Route, class: &str, child: Option<&str>, containment: Option<&str>) -> Route {
    r.binding.class = Some(class.to_owned());
    r.binding.child = child.map(str::to_owned);
    r.binding.containment = containment.map(str::to_owned);
    r
}

/// Containment names whose element type is `class` or one of its supertypes.
fn containments_holding<'a>(mm: &'a Metamodel, class: &MetaClass) -> BTreeSet<&'a str> {
    mm.classes
        .iter()
        .flat_map(|c| c.references.iter())
        .filter(|r| r.containment && mm.is_subtype_of(class, &r.target))
        .map(|r| r.name.as_str())
        .collect()
}

fn accepts_child(mm: &Metamodel, parent: &MetaClass, child: &MetaClass) -> bool {
    mm.all_features(parent)
        .map(|fs| fs.iter().filter_map(|f| f.as_containment()).any(|r| mm.is_subtype_of(child, &r.target)))
        .unwrap_or(false)
}

fn points_at_with_opposite(mm: &Metamodel, child: &MetaClass, target: &MetaClass) -> bool {
    mm.all_features(child)
        .map(|fs| {
            fs.iter()
                .filter_map(|f| f.as_cross_reference())
                .any(|r| r.opposite.is_some() && mm.is_subtype_of(target, &r.target))
        })
        .unwrap_or(false)
}

fn package_routes(mm: &Metamodel, out: &mut Vec<Route>) {
    let p = &mm.package_name;
    for class in &mm.classes {
        let c = &class.name;
        out.push(with(route(Method::Get, format!("/{p}/{c}/all"), p, OperationKind::ReadAll), c, None, None));
        for containment in containments_holding(mm, class) {
            out.push(with(
                route(Method::Get, format!("/{p}/{c}/{containment}/search"), p, OperationKind::Search),
                c,
                None,
                Some(containment),
            ));
        }
        for child in mm.classes.iter().filter(|k| !k.is_abstract) {
            let k = &child.name;
            if accepts_child(mm, class, child) {
                out.push(with(
                    route(Method::Post, format!("/{p}/{c}/{k}/{MODEL_PARAM}/newElement"), p, OperationKind::NewElement),
                    c,
                    Some(k),
                    None,
                ));
            }
            if points_at_with_opposite(mm, child, class) {
                out.push(with(
                    route(Method::Post, format!("/{p}/{c}/{k}/{MODEL_PARAM}/newEopposite"), p, OperationKind::NewOpposite),
                    c,
                    Some(k),
                    None,
                ));
            }
        }
        for (method, suffix, kind) in [
            (Method::Post, "addExisting", OperationKind::AddExisting),
            (Method::Put, "update", OperationKind::Update),
            (Method::Delete, "deleteByAttribute", OperationKind::DeleteByAttribute),
            (Method::Delete, "deleteClassByXMI", OperationKind::DeleteModel),
        ] {
            out.push(with(route(method, format!("/{p}/{c}/{MODEL_PARAM}/{suffix}"), p, kind), c, None, None));
        }
    }
}

/// Static routes followed by each package's routes, in package order.
/// The same snapshot always yields the same table.
pub fn build_route_table(snapshot: &RegistrySnapshot) -> RouteTable {
    let mut routes = Vec::new();
    for (template, kind) in [("/api-docs", OperationKind::ApiDocs), ("/packages", OperationKind::Packages)] {
        routes.push(Route {
            method: Method::Get,
            template: template.to_owned(),
            binding: Binding { package: None, kind, class: None, child: None, containment: None },
        });
    }
    for mm in snapshot.metamodels() {
        package_routes(mm, &mut routes);
    }
    RouteTable::new(snapshot.generation(), routes)
}
