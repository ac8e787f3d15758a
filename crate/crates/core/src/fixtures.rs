//! The bundled telephone-system fixture.

use crate::ingest;
use crate::model::{ObjectModel, UcmModel};
use crate::scenario::ScenarioDefinition;

pub const TELEPHONE_MODEL: &str = include_str!("../fixtures/telephone/model.json");
pub const TELEPHONE_SCENARIOS: &str = include_str!("../fixtures/telephone/scenarios.json");
pub const TELEPHONE_OBJECTS: &str = include_str!("../fixtures/telephone/objects.json");

pub fn telephone_model() -> UcmModel {
    ingest::parse_model(TELEPHONE_MODEL).expect("bundled model parses")
}

pub fn telephone_scenarios(model: &UcmModel) -> Vec<ScenarioDefinition> {
    ingest::parse_scenarios(TELEPHONE_SCENARIOS, model).expect("bundled scenarios parse")
}

pub fn telephone_objects(model: &UcmModel) -> ObjectModel {
    ingest::parse_object_model(TELEPHONE_OBJECTS, model).expect("bundled objects parse")
}
