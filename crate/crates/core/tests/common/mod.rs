#![allow(dead_code)]

pub mod oracle;
pub mod random_model;

use std::collections::BTreeMap;

use ucm_usage::fixtures;
use ucm_usage::model::{ObjectModel, UcmModel};
use ucm_usage::scenario::{resolve_scenario, ScenarioDefinition, ScenarioPath};
use ucm_usage::usage::{convert, flatten, FlatChain};

pub const SCENARIO_IMPORTANCE: [(&str, f64); 5] = [
    ("NormalIdleCall", 0.48),
    ("NormalBusyCall", 0.12),
    ("OCSDeniedCall", 0.12),
    ("OCSAllowedIdleCall", 0.224),
    ("OCSAllowedBusyCall", 0.056),
];

/// Expected primitive importances, keyed by fixture object id.
pub const OBJECT_IMPORTANCE: [(&str, f64); 17] = [
    ("req", 1.0),
    ("msg", 1.0),
    ("vrfy", 0.88),
    ("out4", 0.88),
    ("in2", 0.88),
    ("upd", 0.704),
    ("ring", 0.704),
    ("out3", 0.704),
    ("mrb", 0.704),
    ("default_out1", 0.6),
    ("default_in1", 0.6),
    ("ocs_in1", 0.4),
    ("chk", 0.4),
    ("ocs_out1", 0.28),
    ("mb", 0.176),
    ("out2", 0.12),
    ("md", 0.12),
];

pub struct Telephone {
    pub model: UcmModel,
    pub objects: ObjectModel,
    pub chain: FlatChain,
    pub defs: Vec<ScenarioDefinition>,
    pub paths: Vec<ScenarioPath>,
}

pub fn telephone() -> Telephone {
    let model = fixtures::telephone_model();
    let objects = fixtures::telephone_objects(&model);
    let chain = flatten(&convert(&model).unwrap()).unwrap();
    let defs = fixtures::telephone_scenarios(&model);
    let paths = defs.iter().map(|d| resolve_scenario(d, &chain).unwrap()).collect();
    Telephone {
        model,
        objects,
        chain,
        defs,
        paths,
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn fixture_path(file: &str) -> String {
    format!("{}/fixtures/telephone/{file}", env!("CARGO_MANIFEST_DIR"))
}

pub fn object_importance() -> BTreeMap<String, f64> {
    OBJECT_IMPORTANCE.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
