//! Importance of scenarios, primitive objects and containers, threshold
//! filters, and per-type rankings.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{ObjectModel, ObjectType};
use crate::scenario::ScenarioPath;

/// Product of the start trigger and every transition probability on the path.
pub fn scenario_importance(path: &ScenarioPath) -> f64 {
    path.transitions
        .iter()
        .fold(path.trigger, |acc, step| acc * step.probability)
}

/// Sum over scenarios of scenario importance times the object's visit count.
pub fn primitive_importance(object: &str, scenarios: &[(ScenarioPath, f64)]) -> f64 {
    scenarios
        .iter()
        .map(|(path, importance)| importance * path.visits_of(object) as f64)
        .sum()
}

/// Sum of the direct children's importances; child containers recurse.
pub fn container_importance(
    container: &str,
    objects: &ObjectModel,
    primitives: &BTreeMap<String, f64>,
) -> f64 {
    let mut children = objects.children(container);
    children.sort_unstable();
    children
        .into_iter()
        .map(|child| match objects.object_type(child) {
            Some(t) if t.is_container() => container_importance(child, objects, primitives),
            _ => primitives.get(child).copied().unwrap_or(0.0),
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranked {
    pub object: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    /// Scenarios in input order.
    pub scenarios: Vec<(String, f64)>,
    pub object_importance: BTreeMap<String, f64>,
    pub object_type: BTreeMap<String, ObjectType>,
    /// Reporting group -> objects by descending importance.
    pub rankings: BTreeMap<String, Vec<Ranked>>,
    /// Reporting group -> object -> percent of the group total.
    pub percents: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ImportanceReport {
    pub fn compute(paths: &[ScenarioPath], objects: &ObjectModel) -> Self {
        let scored: Vec<(ScenarioPath, f64)> = paths
            .iter()
            .map(|p| (p.clone(), scenario_importance(p)))
            .collect();

        let mut primitives = BTreeMap::new();
        for (id, t) in objects.objects() {
            if !t.is_container() {
                primitives.insert(id.to_string(), primitive_importance(id, &scored));
            }
        }
        let mut object_importance = primitives.clone();
        let mut object_type = BTreeMap::new();
        for (id, t) in objects.objects() {
            object_type.insert(id.to_string(), t);
            if t.is_container() {
                object_importance.insert(id.to_string(), container_importance(id, objects, &primitives));
            }
        }

        let mut report = ImportanceReport {
            scenarios: scored.iter().map(|(p, i)| (p.name.clone(), *i)).collect(),
            object_importance,
            object_type,
            rankings: BTreeMap::new(),
            percents: BTreeMap::new(),
        };
        report.rankings = rankings(&report);
        report.percents = percent_by_type(&report);
        report
    }

    pub fn scenario(&self, name: &str) -> Option<f64> {
        self.scenarios.iter().find(|(n, _)| n == name).map(|(_, i)| *i)
    }

    pub fn object(&self, id: &str) -> Option<f64> {
        self.object_importance.get(id).copied()
    }
}

fn by_importance_desc(a: &(String, f64), b: &(String, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

fn rankings(report: &ImportanceReport) -> BTreeMap<String, Vec<Ranked>> {
    let mut groups: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (id, t) in &report.object_type {
        let value = report.object_importance.get(id).copied().unwrap_or(0.0);
        groups.entry(t.group().to_string()).or_default().push((id.clone(), value));
    }
    groups
        .into_iter()
        .map(|(g, mut v)| {
            v.sort_by(by_importance_desc);
            let ranked = v
                .into_iter()
                .map(|(object, importance)| Ranked { object, importance })
                .collect();
            (g, ranked)
        })
        .collect()
}

/// Scenarios with importance at or above `threshold`, most important first.
pub fn filter_overall(report: &ImportanceReport, threshold: f64) -> Vec<String> {
    let mut kept: Vec<(String, f64)> = report
        .scenarios
        .iter()
        .filter(|(_, i)| *i >= threshold)
        .cloned()
        .collect();
    kept.sort_by(by_importance_desc);
    kept.into_iter().map(|(n, _)| n).collect()
}

/// Scenarios none of whose factors (start trigger and transition
/// probabilities) fall below `threshold`, most important first.
pub fn filter_alternative(paths: &[ScenarioPath], threshold: f64) -> Vec<String> {
    let mut kept: Vec<(String, f64)> = paths
        .iter()
        .filter(|p| {
            p.trigger >= threshold && p.transitions.iter().all(|s| s.probability >= threshold)
        })
        .map(|p| (p.name.clone(), scenario_importance(p)))
        .collect();
    kept.sort_by(by_importance_desc);
    kept.into_iter().map(|(n, _)| n).collect()
}

/// Each object's share of its reporting group's total, in percent. Groups
/// whose total is zero are left out.
pub fn percent_by_type(report: &ImportanceReport) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut totals: BTreeMap<&str, f64> = BTreeMap::new();
    for (id, t) in &report.object_type {
        *totals.entry(t.group()).or_default() += report.object_importance.get(id).copied().unwrap_or(0.0);
    }
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (id, t) in &report.object_type {
        let total = totals[t.group()];
        if total == 0.0 {
            continue;
        }
        let value = report.object_importance.get(id).copied().unwrap_or(0.0);
        out.entry(t.group().to_string())
            .or_default()
            .insert(id.clone(), 100.0 * value / total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::PathStep;

    fn path(name: &str, probs: &[f64], visits: &[(&str, usize)]) -> ScenarioPath {
        ScenarioPath {
            name: name.into(),
            start: "s".into(),
            trigger: 1.0,
            transitions: probs
                .iter()
                .enumerate()
                .map(|(i, &p)| PathStep {
                    transition: i,
                    from: format!("x{i}"),
                    to: format!("x{}", i + 1),
                    probability: p,
                    choice: p != 1.0,
                })
                .collect(),
            visits: visits.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            reached_ends: Default::default(),
        }
    }

    #[test]
    fn all_unit_transitions() {
        assert_eq!(scenario_importance(&path("a", &[1.0, 1.0, 1.0], &[])), 1.0);
    }

    #[test]
    fn trigger_counts() {
        let mut p = path("a", &[0.5], &[]);
        p.trigger = 0.5;
        assert_eq!(scenario_importance(&p), 0.25);
    }

    #[test]
    fn primitive_sums() {
        let p = path("a", &[0.5], &[("r", 2)]);
        let scored = vec![(p, 0.5)];
        assert_eq!(primitive_importance("r", &scored), 1.0);
        assert_eq!(primitive_importance("nobody", &scored), 0.0);
    }

    #[test]
    fn empty_container() {
        let mut objects = ObjectModel::default();
        objects.insert_object("C", ObjectType::Component);
        assert_eq!(container_importance("C", &objects, &BTreeMap::new()), 0.0);
    }

    #[test]
    fn nested_containers() {
        let mut objects = ObjectModel::default();
        for (id, t) in [
            ("C", ObjectType::Component),
            ("P", ObjectType::Plugin),
            ("r1", ObjectType::Responsibility),
            ("r2", ObjectType::Responsibility),
        ] {
            objects.insert_object(id, t);
        }
        objects.set_parent("P", "C");
        objects.set_parent("r1", "P");
        objects.set_parent("r2", "C");
        let prims: BTreeMap<String, f64> = [("r1".to_string(), 0.25), ("r2".to_string(), 0.5)].into();
        assert_eq!(container_importance("P", &objects, &prims), 0.25);
        assert_eq!(container_importance("C", &objects, &prims), 0.75);
    }

    #[test]
    fn single_object_percent() {
        let mut objects = ObjectModel::default();
        objects.insert_object("r", ObjectType::Responsibility);
        objects.insert_object("C", ObjectType::Component);
        let report = ImportanceReport::compute(&[path("a", &[0.3], &[("r", 1)])], &objects);
        assert_eq!(report.percents["responsibility"]["r"], 100.0);
        // component total is zero
        assert!(!report.percents.contains_key("component"));
    }

    #[test]
    fn ties_break_by_id() {
        let mut objects = ObjectModel::default();
        objects.insert_object("b", ObjectType::Responsibility);
        objects.insert_object("a", ObjectType::Responsibility);
        let report = ImportanceReport::compute(&[path("s", &[], &[("a", 1), ("b", 1)])], &objects);
        let order: Vec<_> = report.rankings["responsibility"].iter().map(|r| r.object.as_str()).collect();
        assert_eq!(order, ["a", "b"]);
    }

    #[test]
    fn thresholds() {
        let paths = [
            path("hi", &[0.6, 0.8], &[]),
            path("lo", &[0.6, 0.2], &[]),
            path("mid", &[0.4, 0.7], &[]),
        ];
        let report = ImportanceReport::compute(&paths, &ObjectModel::default());
        assert_eq!(filter_overall(&report, 0.2), ["hi", "mid"]);
        assert_eq!(filter_overall(&report, 0.0), ["hi", "mid", "lo"]);
        assert!(filter_overall(&report, 1.0).is_empty());
        assert_eq!(filter_alternative(&paths, 0.3), ["hi", "mid"]);
        assert!(filter_alternative(&paths, 0.7).is_empty());
    }
}
