//! Readers for the three JSON input files: model, scenarios, object model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::model::{NodeKind, ObjectModel, UcmModel};
use crate::scenario::ScenarioDefinition;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceLocation {
    pub file: String,
    pub line: usize,
    pub column: usize,
}

impl SourceLocation {
    fn at(file: &str, line: usize, column: usize) -> Self {
        SourceLocation {
            file: file.to_string(),
            line: line.max(1),
            column: column.max(1),
        }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{location}: syntax error: expected {expected}")]
    Syntax {
        location: SourceLocation,
        expected: String,
    },
    #[error("{location}: unknown reference {name}")]
    UnknownReference {
        name: String,
        location: SourceLocation,
    },
    #[error("{location}: duplicate id {name}")]
    DuplicateId {
        name: String,
        location: SourceLocation,
    },
    #[error("{location}: scenario {scenario}: unknown start point {start}")]
    UnknownStart {
        scenario: String,
        start: String,
        location: SourceLocation,
    },
    #[error("{location}: scenario {scenario}: unknown stub {stub}")]
    UnknownStub {
        scenario: String,
        stub: String,
        location: SourceLocation,
    },
    #[error("{location}: scenario {scenario}: stub {stub} has no plug-in {plugin}")]
    UnknownPlugin {
        scenario: String,
        stub: String,
        plugin: String,
        location: SourceLocation,
    },
    #[error("{location}: scenario {scenario}: unknown variable {var}")]
    UnknownVariable {
        scenario: String,
        var: String,
        location: SourceLocation,
    },
    #[error("{location}: duplicate scenario name {name}")]
    DuplicateScenarioName {
        name: String,
        location: SourceLocation,
    },
    #[error("{location}: unknown object {name}")]
    UnknownObject {
        name: String,
        location: SourceLocation,
    },
    #[error("containment cycle through {object}")]
    CycleDetected { object: String },
    #[error("{location}: object {object} assigned to both {first} and {second}")]
    MultipleParents {
        object: String,
        first: String,
        second: String,
        location: SourceLocation,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Parses a model file. Semantic references are checked, structural rules
/// are left to [`crate::model::validate_model`].
pub fn parse_model(text: &str) -> Result<UcmModel, IngestError> {
    parse_model_in(text, "<model>")
}

pub fn parse_scenarios(
    text: &str,
    model: &UcmModel,
) -> Result<Vec<ScenarioDefinition>, IngestError> {
    parse_scenarios_in(text, model, "<scenarios>")
}

pub fn parse_object_model(text: &str, model: &UcmModel) -> Result<ObjectModel, IngestError> {
    parse_object_model_in(text, model, "<objects>")
}

pub fn read_model(path: &Path) -> Result<UcmModel, IngestError> {
    parse_model_in(&read(path)?, &path.display().to_string())
}

pub fn read_scenarios(
    path: &Path,
    model: &UcmModel,
) -> Result<Vec<ScenarioDefinition>, IngestError> {
    parse_scenarios_in(&read(path)?, model, &path.display().to_string())
}

pub fn read_object_model(path: &Path, model: &UcmModel) -> Result<ObjectModel, IngestError> {
    parse_object_model_in(&read(path)?, model, &path.display().to_string())
}

/// Serializes a model back into the file format.
pub fn model_to_json(model: &UcmModel) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

fn read(path: &Path) -> Result<String, IngestError> {
    std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn from_json<'a, T: Deserialize<'a>>(
    text: &'a str,
    file: &str,
    what: &str,
) -> Result<T, IngestError> {
    if text.trim().is_empty() {
        return Err(IngestError::Syntax {
            location: SourceLocation::at(file, 1, 1),
            expected: what.to_string(),
        });
    }
    serde_json::from_str(text).map_err(|e| IngestError::Syntax {
        location: SourceLocation::at(file, e.line(), e.column()),
        expected: strip_position(&e.to_string()),
    })
}

fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

/// Position of the `nth` (0-based) string literal `value`, preferring
/// occurrences that are the value of `key` when a key is given.
fn locate(text: &str, file: &str, key: Option<&str>, value: &str, nth: usize) -> SourceLocation {
    let needle = serde_json::to_string(value).unwrap_or_else(|_| format!("\"{value}\""));
    let keyed = |pos: usize| -> bool {
        let Some(key) = key else { return true };
        let before = text[..pos].trim_end();
        let Some(before) = before.strip_suffix(':') else {
            return false;
        };
        before.trim_end().ends_with(&format!("\"{key}\""))
    };
    let pos = text
        .match_indices(&needle)
        .map(|(i, _)| i)
        .filter(|&i| keyed(i))
        .nth(nth)
        .or_else(|| text.find(&needle))
        .unwrap_or(0);
    let line = text[..pos].matches('\n').count() + 1;
    let column = pos - text[..pos].rfind('\n').map_or(0, |i| i + 1) + 1;
    SourceLocation::at(file, line, column)
}

fn parse_model_in(text: &str, file: &str) -> Result<UcmModel, IngestError> {
    let model: UcmModel = from_json(text, file, "'maps' (a model object)")?;
    let dup = |key: &str, name: &str| IngestError::DuplicateId {
        name: name.to_string(),
        location: locate(text, file, Some(key), name, 1),
    };
    let unknown = |key: &str, name: &str| IngestError::UnknownReference {
        name: name.to_string(),
        location: locate(text, file, Some(key), name, 0),
    };

    let mut maps = BTreeSet::new();
    for map in &model.maps {
        if !maps.insert(map.name.as_str()) {
            return Err(dup("name", &map.name));
        }
    }
    let mut components = BTreeSet::new();
    for c in &model.components {
        if !components.insert(c.name.as_str()) {
            return Err(dup("name", &c.name));
        }
    }
    for c in &model.components {
        if let Some(p) = &c.parent {
            if !components.contains(p.as_str()) {
                return Err(unknown("parent", p));
            }
        }
    }

    let mut ids = BTreeSet::new();
    for map in &model.maps {
        for node in &map.nodes {
            if !ids.insert(node.id.as_str()) {
                return Err(dup("id", &node.id));
            }
        }
    }
    for map in &model.maps {
        let local: BTreeSet<&str> = map.nodes.iter().map(|n| n.id.as_str()).collect();
        for node in &map.nodes {
            if let Some(c) = &node.component {
                if !components.contains(c.as_str()) {
                    return Err(unknown("component", c));
                }
            }
            for b in node.stub.iter().flat_map(|s| &s.bindings) {
                if !maps.contains(b.plugin.as_str()) {
                    return Err(unknown("plugin", &b.plugin));
                }
            }
        }
        for edge in &map.edges {
            if !local.contains(edge.from.as_str()) {
                return Err(unknown("from", &edge.from));
            }
            if !local.contains(edge.to.as_str()) {
                return Err(unknown("to", &edge.to));
            }
            if let Some(cond) = &edge.condition {
                if !model.variables.contains(&cond.var) {
                    return Err(unknown("var", &cond.var));
                }
            }
        }
    }
    Ok(model)
}

fn parse_scenarios_in(
    text: &str,
    model: &UcmModel,
    file: &str,
) -> Result<Vec<ScenarioDefinition>, IngestError> {
    let defs: Vec<ScenarioDefinition> = from_json(text, file, "a list of scenario definitions")?;
    let mut names = BTreeSet::new();
    for def in &defs {
        let at = |key: &str, value: &str| locate(text, file, Some(key), value, 0);
        if !names.insert(def.name.as_str()) {
            return Err(IngestError::DuplicateScenarioName {
                name: def.name.clone(),
                location: locate(text, file, Some("name"), &def.name, 1),
            });
        }
        let start_ok = model
            .root()
            .and_then(|r| r.node(&def.start))
            .is_some_and(|n| n.kind == NodeKind::Start);
        if !start_ok {
            return Err(IngestError::UnknownStart {
                scenario: def.name.clone(),
                start: def.start.clone(),
                location: at("start", &def.start),
            });
        }
        for (stub, plugin) in &def.bindings {
            let detail = model.find_node(stub).and_then(|(_, n)| n.stub.as_ref());
            let Some(detail) = detail else {
                return Err(IngestError::UnknownStub {
                    scenario: def.name.clone(),
                    stub: stub.clone(),
                    location: locate(text, file, None, stub, 0),
                });
            };
            if detail.binding(plugin).is_none() {
                return Err(IngestError::UnknownPlugin {
                    scenario: def.name.clone(),
                    stub: stub.clone(),
                    plugin: plugin.clone(),
                    location: at(stub, plugin),
                });
            }
        }
        for var in def.conditions.keys() {
            if !model.variables.contains(var) {
                return Err(IngestError::UnknownVariable {
                    scenario: def.name.clone(),
                    var: var.clone(),
                    location: locate(text, file, None, var, 0),
                });
            }
        }
        for end in def.post.iter().flatten() {
            if model.find_node(end).map(|(_, n)| n.kind) != Some(NodeKind::End) {
                return Err(IngestError::UnknownReference {
                    name: end.clone(),
                    location: locate(text, file, None, end, 0),
                });
            }
        }
    }
    Ok(defs)
}

#[derive(Deserialize)]
struct ContainmentEntry {
    object: String,
    parent: String,
}

fn parse_object_model_in(
    text: &str,
    model: &UcmModel,
    file: &str,
) -> Result<ObjectModel, IngestError> {
    let entries: Vec<ContainmentEntry> = from_json(text, file, "a list of containment entries")?;
    let mut objects = ObjectModel::from_model(model);
    let mut assigned: BTreeMap<&str, &str> = BTreeMap::new();
    let mut seen_objects: BTreeMap<&str, usize> = BTreeMap::new();
    for entry in &entries {
        for (key, name) in [("object", &entry.object), ("parent", &entry.parent)] {
            if !objects.contains(name) {
                return Err(IngestError::UnknownObject {
                    name: name.clone(),
                    location: locate(text, file, Some(key), name, 0),
                });
            }
        }
        let nth = seen_objects.entry(entry.object.as_str()).or_default();
        if let Some(first) = assigned.get(entry.object.as_str()) {
            if *first != entry.parent {
                return Err(IngestError::MultipleParents {
                    object: entry.object.clone(),
                    first: first.to_string(),
                    second: entry.parent.clone(),
                    location: locate(text, file, Some("object"), &entry.object, *nth),
                });
            }
        }
        *nth += 1;
        assigned.insert(&entry.object, &entry.parent);
        objects.set_parent(entry.object.clone(), entry.parent.clone());
    }
    if let Some(object) = objects.find_cycle() {
        return Err(IngestError::CycleDetected { object });
    }
    Ok(objects)
}
