//! Domain types for Use Case Map specifications, the containment object
//! model, and structural validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::format::fmt_num;

/// Tolerance used for every probability-sum comparison.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Start,
    End,
    Responsibility,
    Stub,
    OrFork,
    OrJoin,
    AndFork,
    AndJoin,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Start => "start",
            NodeKind::End => "end",
            NodeKind::Responsibility => "responsibility",
            NodeKind::Stub => "stub",
            NodeKind::OrFork => "or_fork",
            NodeKind::OrJoin => "or_join",
            NodeKind::AndFork => "and_fork",
            NodeKind::AndJoin => "and_join",
        }
    }

    /// Object type of a node when it takes part in importance analysis.
    /// Forks and joins are structural only and carry no importance.
    pub fn object_type(self) -> Option<ObjectType> {
        match self {
            NodeKind::Start | NodeKind::End => Some(ObjectType::Point),
            NodeKind::Responsibility => Some(ObjectType::Responsibility),
            NodeKind::Stub => Some(ObjectType::Stub),
            _ => None,
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A Boolean guard on an OR-fork branch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub var: String,
    pub value: bool,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}={}]", self.var, self.value)
    }
}

/// One plug-in selectable by a stub, with its port wiring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginBinding {
    pub plugin: String,
    #[serde(default = "one")]
    pub probability: f64,
    /// Stub input -> plug-in start point.
    #[serde(rename = "in", default)]
    pub inputs: BTreeMap<String, String>,
    /// Plug-in end point -> stub output. Unmapped end points terminate the path.
    #[serde(rename = "out", default)]
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StubDetail {
    #[serde(default)]
    pub dynamic: bool,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub bindings: Vec<PluginBinding>,
}

impl StubDetail {
    pub fn binding(&self, plugin: &str) -> Option<&PluginBinding> {
        self.bindings.iter().find(|b| b.plugin == plugin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<String>,
    /// Trigger probability; only meaningful on start points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub: Option<StubDetail>,
}

impl Node {
    pub fn trigger(&self) -> f64 {
        self.trigger.unwrap_or(1.0)
    }
}

fn one() -> f64 {
    1.0
}

fn is_one(p: &f64) -> bool {
    *p == 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapGraph {
    pub name: String,
    #[serde(default)]
    pub root: bool,
    #[serde(default)]
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl MapGraph {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == id)
    }

    pub fn incoming<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.to == id)
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = &Node> + '_ {
        self.nodes.iter().filter(move |n| n.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcmModel {
    pub maps: Vec<MapGraph>,
    #[serde(default)]
    pub components: Vec<Component>,
    #[serde(default)]
    pub variables: BTreeSet<String>,
}

impl UcmModel {
    pub fn root(&self) -> Option<&MapGraph> {
        self.maps.iter().find(|m| m.root)
    }

    pub fn map(&self, name: &str) -> Option<&MapGraph> {
        self.maps.iter().find(|m| m.name == name)
    }

    /// Finds a node anywhere in the model, with the map that owns it.
    pub fn find_node(&self, id: &str) -> Option<(&MapGraph, &Node)> {
        self.maps
            .iter()
            .find_map(|m| m.node(id).map(|n| (m, n)))
    }

    pub fn stubs(&self) -> impl Iterator<Item = (&MapGraph, &Node, &StubDetail)> + '_ {
        self.maps.iter().flat_map(|m| {
            m.nodes
                .iter()
                .filter_map(move |n| n.stub.as_ref().map(|s| (m, n, s)))
        })
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }
}

/// Object categories taking part in importance analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectType {
    Responsibility,
    Point,
    Plugin,
    Stub,
    Component,
}

impl ObjectType {
    pub fn is_container(self) -> bool {
        matches!(self, ObjectType::Plugin | ObjectType::Stub | ObjectType::Component)
    }

    /// Reporting group. Start and end points are ranked together with
    /// responsibilities.
    pub fn group(self) -> &'static str {
        match self {
            ObjectType::Responsibility | ObjectType::Point => "responsibility",
            ObjectType::Plugin => "plugin",
            ObjectType::Stub => "stub",
            ObjectType::Component => "component",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectType::Responsibility => "responsibility",
            ObjectType::Point => "point",
            ObjectType::Plugin => "plugin",
            ObjectType::Stub => "stub",
            ObjectType::Component => "component",
        }
    }
}

impl fmt::Display for ObjectType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Single-parent containment tree over the objects of a model.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectModel {
    types: BTreeMap<String, ObjectType>,
    parents: BTreeMap<String, String>,
}

impl ObjectModel {
    /// Every object of `model`, each one a parentless root.
    pub fn from_model(model: &UcmModel) -> Self {
        let mut types = BTreeMap::new();
        for map in &model.maps {
            if !map.root {
                types.insert(map.name.clone(), ObjectType::Plugin);
            }
            for node in &map.nodes {
                if let Some(t) = node.kind.object_type() {
                    types.insert(node.id.clone(), t);
                }
            }
        }
        for c in &model.components {
            types.insert(c.name.clone(), ObjectType::Component);
        }
        ObjectModel {
            types,
            parents: BTreeMap::new(),
        }
    }

    pub fn insert_object(&mut self, id: impl Into<String>, object_type: ObjectType) {
        self.types.insert(id.into(), object_type);
    }

    /// Sets the parent without any checking; see [`validate_model`].
    pub fn set_parent(&mut self, child: impl Into<String>, parent: impl Into<String>) {
        self.parents.insert(child.into(), parent.into());
    }

    pub fn object_type(&self, id: &str) -> Option<ObjectType> {
        self.types.get(id).copied()
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.parents.get(id).map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.types.contains_key(id)
    }

    pub fn objects(&self) -> impl Iterator<Item = (&str, ObjectType)> + '_ {
        self.types.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        self.parents
            .iter()
            .filter(|(_, p)| p.as_str() == id)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn roots(&self) -> Vec<&str> {
        self.types
            .keys()
            .filter(|k| !self.parents.contains_key(k.as_str()))
            .map(String::as_str)
            .collect()
    }

    /// First object found on a containment cycle, if any.
    pub fn find_cycle(&self) -> Option<String> {
        for start in self.parents.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start.as_str();
            while let Some(p) = self.parents.get(cur) {
                if p == start {
                    return Some(start.clone());
                }
                if !seen.insert(p.as_str()) {
                    break;
                }
                cur = p;
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Issue {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }

    pub(crate) fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            location: location.into(),
            message: message.into(),
        });
    }
}

/// Checks every structural rule of the model and its containment tree.
/// Violations are reported, never raised.
pub fn validate_model(model: &UcmModel, objects: &ObjectModel) -> ValidationReport {
    let mut report = ValidationReport::default();

    let roots = model.maps.iter().filter(|m| m.root).count();
    match roots {
        0 => report.push("model", "no root map"),
        1 => {}
        _ => report.push("model", "multiple root maps"),
    }

    let mut map_names = BTreeSet::new();
    for map in &model.maps {
        if !map_names.insert(map.name.as_str()) {
            report.push(format!("map {}", map.name), "duplicate map name");
        }
    }

    let mut node_owner: HashMap<&str, &str> = HashMap::new();
    for map in &model.maps {
        for node in &map.nodes {
            if let Some(prev) = node_owner.insert(node.id.as_str(), map.name.as_str()) {
                report.push(
                    format!("map {} / node {}", map.name, node.id),
                    format!("duplicate node id (also in map {prev})"),
                );
            }
        }
    }

    for map in &model.maps {
        validate_map(model, map, &mut report);
    }

    validate_components(model, &mut report);
    validate_plugin_recursion(model, &mut report);
    validate_objects(objects, &mut report);

    report
}

fn validate_map(model: &UcmModel, map: &MapGraph, report: &mut ValidationReport) {
    let loc_node = |id: &str| format!("map {} / node {}", map.name, id);
    let ids: BTreeSet<&str> = map.nodes.iter().map(|n| n.id.as_str()).collect();

    for (i, edge) in map.edges.iter().enumerate() {
        let loc = format!("map {} / edge {} ({} -> {})", map.name, i, edge.from, edge.to);
        for end in [&edge.from, &edge.to] {
            if !ids.contains(end.as_str()) {
                report.push(&loc, format!("unknown node {end}"));
            }
        }
        let from_kind = map.node(&edge.from).map(|n| n.kind);
        if !(edge.probability > 0.0 && edge.probability <= 1.0) {
            report.push(
                &loc,
                format!("probability {} outside (0, 1]", fmt_num(edge.probability)),
            );
        }
        if edge.probability != 1.0 && from_kind.is_some() && from_kind != Some(NodeKind::OrFork) {
            report.push(&loc, "probability below 1 on an edge not leaving an OR-fork");
        }
        if let Some(cond) = &edge.condition {
            if from_kind.is_some() && from_kind != Some(NodeKind::OrFork) {
                report.push(&loc, "condition on an edge not leaving an OR-fork");
            }
            if !model.variables.contains(&cond.var) {
                report.push(&loc, format!("undeclared variable {}", cond.var));
            }
        }
    }

    for node in &map.nodes {
        let loc = loc_node(&node.id);
        let out = map.outgoing(&node.id).count();
        let inc = map.incoming(&node.id).count();
        match node.kind {
            NodeKind::Start if inc > 0 => report.push(&loc, "start point has incoming edges"),
            NodeKind::End if out > 0 => report.push(&loc, "end point has outgoing edges"),
            NodeKind::OrFork | NodeKind::AndFork if out < 2 => {
                report.push(&loc, format!("{} needs at least 2 outgoing edges", node.kind))
            }
            NodeKind::OrJoin | NodeKind::AndJoin if inc < 2 => {
                report.push(&loc, format!("{} needs at least 2 incoming edges", node.kind))
            }
            _ => {}
        }
        if matches!(
            node.kind,
            NodeKind::Start | NodeKind::Responsibility | NodeKind::OrJoin | NodeKind::AndJoin
        ) && out > 1
        {
            report.push(&loc, format!("{} has {} outgoing edges, expected at most 1", node.kind, out));
        }
        if node.kind == NodeKind::OrFork {
            let sum: f64 = map.outgoing(&node.id).map(|e| e.probability).sum();
            if (sum - 1.0).abs() > PROB_TOLERANCE {
                report.push(&loc, format!("probability sum {} ≠ 1", fmt_num(sum)));
            }
            let conditioned = map.outgoing(&node.id).filter(|e| e.condition.is_some()).count();
            if conditioned != 0 && conditioned != out {
                report.push(&loc, "OR-fork mixes conditioned and unconditioned branches");
            }
        }
        if let Some(t) = node.trigger {
            if node.kind != NodeKind::Start {
                report.push(&loc, "trigger probability on a non-start node");
            } else if !(t > 0.0 && t <= 1.0) {
                report.push(&loc, format!("trigger {} outside (0, 1]", fmt_num(t)));
            }
        }
        if let Some(c) = &node.component {
            if model.component(c).is_none() {
                report.push(&loc, format!("unknown component {c}"));
            }
        }
        match (&node.stub, node.kind) {
            (Some(stub), NodeKind::Stub) => validate_stub(model, map, node, stub, inc, out, report),
            (None, NodeKind::Stub) => report.push(&loc, "stub without stub detail"),
            (Some(_), _) => report.push(&loc, "stub detail on a non-stub node"),
            (None, _) => {}
        }
    }
}

fn validate_stub(
    model: &UcmModel,
    map: &MapGraph,
    node: &Node,
    stub: &StubDetail,
    inc: usize,
    out: usize,
    report: &mut ValidationReport,
) {
    let loc = format!("map {} / stub {}", map.name, node.id);
    if inc != stub.inputs.len() {
        report.push(
            &loc,
            format!("{} incoming edges for {} stub inputs", inc, stub.inputs.len()),
        );
    }
    if out != stub.outputs.len() {
        report.push(
            &loc,
            format!("{} outgoing edges for {} stub outputs", out, stub.outputs.len()),
        );
    }
    if stub.bindings.is_empty() {
        report.push(&loc, "stub has no plug-in bindings");
    }
    if !stub.dynamic {
        if stub.bindings.len() > 1 {
            report.push(&loc, "static stub with more than one binding");
        }
        if let Some(b) = stub.bindings.first() {
            if b.probability != 1.0 {
                report.push(&loc, "static stub binding probability must be 1");
            }
        }
    } else {
        let sum: f64 = stub.bindings.iter().map(|b| b.probability).sum();
        if !stub.bindings.is_empty() && (sum - 1.0).abs() > PROB_TOLERANCE {
            report.push(&loc, format!("binding probability sum {} ≠ 1", fmt_num(sum)));
        }
    }
    let mut seen = BTreeSet::new();
    for b in &stub.bindings {
        let bloc = format!("{loc} / plug-in {}", b.plugin);
        if !seen.insert(b.plugin.as_str()) {
            report.push(&bloc, "plug-in bound twice");
        }
        if !(b.probability > 0.0 && b.probability <= 1.0) {
            report.push(&bloc, format!("probability {} outside (0, 1]", fmt_num(b.probability)));
        }
        let Some(plugin) = model.map(&b.plugin) else {
            report.push(&bloc, "unknown plug-in map");
            continue;
        };
        if plugin.root {
            report.push(&bloc, "root map used as plug-in");
        }
        for input in &stub.inputs {
            match b.inputs.get(input) {
                None => report.push(&bloc, format!("stub input {input} not mapped")),
                Some(start) => {
                    if plugin.node(start).map(|n| n.kind) != Some(NodeKind::Start) {
                        report.push(&bloc, format!("{start} is not a start point of the plug-in"));
                    }
                }
            }
        }
        for input in b.inputs.keys() {
            if !stub.inputs.contains(input) {
                report.push(&bloc, format!("unknown stub input {input}"));
            }
        }
        for (end, output) in &b.outputs {
            if plugin.node(end).map(|n| n.kind) != Some(NodeKind::End) {
                report.push(&bloc, format!("{end} is not an end point of the plug-in"));
            }
            if !stub.outputs.contains(output) {
                report.push(&bloc, format!("unknown stub output {output}"));
            }
        }
    }
}

fn validate_components(model: &UcmModel, report: &mut ValidationReport) {
    let mut names = BTreeSet::new();
    for c in &model.components {
        if !names.insert(c.name.as_str()) {
            report.push(format!("component {}", c.name), "duplicate component");
        }
        if let Some(p) = &c.parent {
            if model.component(p).is_none() {
                report.push(format!("component {}", c.name), format!("unknown parent {p}"));
            }
        }
    }
    for c in &model.components {
        let mut cur = c.parent.as_deref();
        let mut steps = 0;
        while let Some(p) = cur {
            if p == c.name {
                report.push(format!("component {}", c.name), "component parent cycle");
                break;
            }
            steps += 1;
            if steps > model.components.len() {
                break;
            }
            cur = model.component(p).and_then(|x| x.parent.as_deref());
        }
    }
}

/// Map names reachable from `map` through stub bindings, direct ones first.
pub(crate) fn plugin_children<'a>(map: &'a MapGraph) -> impl Iterator<Item = &'a str> + 'a {
    map.nodes
        .iter()
        .filter_map(|n| n.stub.as_ref())
        .flat_map(|s| s.bindings.iter().map(|b| b.plugin.as_str()))
}

/// Returns the name of a map that (transitively) plugs into itself.
pub fn find_recursive_plugin(model: &UcmModel) -> Option<String> {
    fn visit<'a>(
        model: &'a UcmModel,
        name: &'a str,
        stack: &mut Vec<&'a str>,
        done: &mut BTreeSet<&'a str>,
    ) -> Option<String> {
        if stack.contains(&name) {
            return Some(name.to_string());
        }
        if done.contains(name) {
            return None;
        }
        let map = model.map(name)?;
        stack.push(name);
        for child in plugin_children(map) {
            if let Some(r) = visit(model, child, stack, done) {
                return Some(r);
            }
        }
        stack.pop();
        done.insert(name);
        None
    }
    let mut done = BTreeSet::new();
    for map in &model.maps {
        if let Some(r) = visit(model, &map.name, &mut Vec::new(), &mut done) {
            return Some(r);
        }
    }
    None
}

fn validate_plugin_recursion(model: &UcmModel, report: &mut ValidationReport) {
    if let Some(name) = find_recursive_plugin(model) {
        report.push(format!("map {name}"), "plug-in contains its own map");
    }
}

fn validate_objects(objects: &ObjectModel, report: &mut ValidationReport) {
    for (child, parent) in &objects.parents {
        let loc = format!("object {child}");
        if !objects.contains(child) {
            report.push(&loc, "unknown object");
        }
        match objects.object_type(parent) {
            None => report.push(&loc, format!("unknown parent {parent}")),
            Some(t) if !t.is_container() => {
                report.push(&loc, format!("parent {parent} is a primitive {t}"))
            }
            _ => {}
        }
    }
    if let Some(obj) = objects.find_cycle() {
        report.push(format!("object {obj}"), "containment cycle");
    }
}
