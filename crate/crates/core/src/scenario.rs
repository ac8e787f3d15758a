//! Scenario definitions, their resolution into concrete paths over the flat
//! chain, and automatic enumeration of every resolvable definition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::usage::{ChainGraph, FlatChain, StateKind};

pub const DEFAULT_LOOP_BOUND: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioDefinition {
    pub name: String,
    pub start: String,
    /// Stub id -> plug-in map name.
    #[serde(default)]
    pub bindings: BTreeMap<String, String>,
    #[serde(default)]
    pub conditions: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post: Option<BTreeSet<String>>,
}

impl ScenarioDefinition {
    pub fn new(name: impl Into<String>, start: impl Into<String>) -> Self {
        ScenarioDefinition {
            name: name.into(),
            start: start.into(),
            bindings: BTreeMap::new(),
            conditions: BTreeMap::new(),
            post: None,
        }
    }

    pub fn bind(mut self, stub: &str, plugin: &str) -> Self {
        self.bindings.insert(stub.into(), plugin.into());
        self
    }

    pub fn when(mut self, var: &str, value: bool) -> Self {
        self.conditions.insert(var.into(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathStep {
    pub transition: usize,
    pub from: String,
    pub to: String,
    pub probability: f64,
    /// Whether the step was a choice among alternatives.
    pub choice: bool,
}

/// A resolved scenario: the ordered transitions it takes and how often each
/// primitive object is visited.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioPath {
    pub name: String,
    pub start: String,
    pub trigger: f64,
    pub transitions: Vec<PathStep>,
    pub visits: BTreeMap<String, usize>,
    pub reached_ends: BTreeSet<String>,
}

impl ScenarioPath {
    pub fn signature(&self) -> Signature {
        let mut parts = vec![self.start.clone()];
        parts.extend(
            self.transitions
                .iter()
                .filter(|s| s.choice)
                .map(|s| format!("{}->{}", s.from, s.to)),
        );
        Signature(parts)
    }

    pub fn visits_of(&self, object: &str) -> usize {
        self.visits.get(object).copied().unwrap_or(0)
    }
}

/// The start state followed by every probabilistic choice taken, in
/// traversal order. Equal signatures mean the same complete run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Signature(pub Vec<String>);

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// What a definition lacks to decide a choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Missing {
    Variable(String),
    Binding(String),
    /// An OR-fork without conditions; no definition can decide it.
    Unconditioned,
}

impl fmt::Display for Missing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Missing::Variable(v) => write!(f, "no value for variable {v}"),
            Missing::Binding(s) => write!(f, "no plug-in bound for stub {s}"),
            Missing::Unconditioned => f.write_str("branches carry no conditions"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolveError {
    #[error("unknown start point {0}")]
    UnknownStart(String),
    #[error("unresolved choice at {state}: {missing}")]
    UnresolvedChoice { state: String, missing: Missing },
    #[error("conflicting choice at {0}: not exactly one branch applies")]
    ConditionConflict(String),
    #[error("loop bound exceeded at {0}")]
    LoopBoundExceeded(String),
    #[error("AND-join {0} never received all of its branches")]
    UnsynchronizedJoin(String),
    #[error("post-condition failed: expected {expected:?}, reached {reached:?}")]
    PostConditionFailed {
        expected: Vec<String>,
        reached: Vec<String>,
    },
}

/// Resolves `def` with the default loop bound.
pub fn resolve_scenario(
    def: &ScenarioDefinition,
    chain: &FlatChain,
) -> Result<ScenarioPath, ResolveError> {
    resolve_scenario_bounded(def, chain, DEFAULT_LOOP_BOUND)
}

/// Walks the chain from `def.start`, deciding OR-forks by the definition's
/// conditions and stub selections by its bindings. AND-fork branches are
/// all taken, each run to completion before the next one starts.
pub fn resolve_scenario_bounded(
    def: &ScenarioDefinition,
    chain: &FlatChain,
    loop_bound: usize,
) -> Result<ScenarioPath, ResolveError> {
    let start = chain
        .state_index(&def.start)
        .filter(|&i| chain.states[i].kind == StateKind::Start)
        .ok_or_else(|| ResolveError::UnknownStart(def.start.clone()))?;

    let mut entries = vec![0usize; chain.states.len()];
    let mut arrivals = vec![0usize; chain.states.len()];
    let mut pending: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut visits = BTreeMap::new();
    let mut reached_ends = BTreeSet::new();

    let mut current = Some(start);
    while let Some(s) = current.take() {
        let state = &chain.states[s];
        entries[s] += 1;
        if entries[s] > loop_bound {
            return Err(ResolveError::LoopBoundExceeded(state.id.clone()));
        }
        if state.kind.is_primitive() {
            *visits.entry(state.source.clone()).or_insert(0) += 1;
        }
        if state.kind == StateKind::End {
            reached_ends.insert(state.source.clone());
        }

        let mut next = None;
        let blocked = if state.kind == StateKind::AndJoin {
            arrivals[s] += 1;
            if arrivals[s] < chain.join_arity(s) {
                true
            } else {
                arrivals[s] = 0;
                false
            }
        } else {
            false
        };

        let out = chain.outgoing(s);
        if !blocked && !out.is_empty() {
            match state.kind {
                StateKind::AndFork => pending.extend(out.iter().rev().copied()),
                kind if kind.is_choice() => next = Some(choose(def, chain, s)?),
                _ if out.len() == 1 => next = Some(out[0]),
                _ => return Err(ResolveError::ConditionConflict(state.id.clone())),
            }
        }
        let take = next.or_else(|| pending.pop());
        if let Some(t) = take {
            let tr = &chain.transitions[t];
            steps.push(PathStep {
                transition: t,
                from: chain.states[tr.from].id.clone(),
                to: chain.states[tr.to].id.clone(),
                probability: tr.probability,
                choice: chain.states[tr.from].kind.is_choice(),
            });
            current = Some(tr.to);
        }
    }

    if let Some(j) = arrivals.iter().position(|&a| a > 0) {
        return Err(ResolveError::UnsynchronizedJoin(chain.states[j].id.clone()));
    }
    if let Some(post) = &def.post {
        if !post.is_subset(&reached_ends) {
            return Err(ResolveError::PostConditionFailed {
                expected: post.iter().cloned().collect(),
                reached: reached_ends.iter().cloned().collect(),
            });
        }
    }

    Ok(ScenarioPath {
        name: def.name.clone(),
        start: def.start.clone(),
        trigger: chain.states[start].trigger,
        transitions: steps,
        visits,
        reached_ends,
    })
}

fn choose(def: &ScenarioDefinition, chain: &FlatChain, s: usize) -> Result<usize, ResolveError> {
    let state = &chain.states[s];
    let out = chain.outgoing(s);
    let unresolved = |missing| ResolveError::UnresolvedChoice {
        state: state.id.clone(),
        missing,
    };
    if state.kind == StateKind::Selection {
        return match def.bindings.get(&state.source) {
            Some(plugin) => out
                .iter()
                .copied()
                .find(|&t| chain.transitions[t].plugin.as_deref() == Some(plugin))
                .ok_or_else(|| ResolveError::ConditionConflict(state.id.clone())),
            None if out.len() == 1 => Ok(out[0]),
            None => Err(unresolved(Missing::Binding(state.source.clone()))),
        };
    }

    let mut matching = Vec::new();
    for &t in out {
        let Some(cond) = &chain.transitions[t].condition else {
            return Err(unresolved(Missing::Unconditioned));
        };
        match def.conditions.get(&cond.var) {
            None => return Err(unresolved(Missing::Variable(cond.var.clone()))),
            Some(&v) if v == cond.value => matching.push(t),
            Some(_) => {}
        }
    }
    match matching[..] {
        [t] => Ok(t),
        _ => Err(ResolveError::ConditionConflict(state.id.clone())),
    }
}

/// The per-scenario usage model: the sub-chain induced by the path.
pub fn scenario_chain(path: &ScenarioPath, chain: &FlatChain) -> FlatChain {
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut states = Vec::new();
    let mut add = |s: usize, states: &mut Vec<_>| {
        *index.entry(s).or_insert_with(|| {
            states.push(chain.states[s].clone());
            states.len() - 1
        })
    };
    if let Some(start) = chain.state_index(&path.start) {
        add(start, &mut states);
    }
    let mut seen = BTreeSet::new();
    let mut transitions = Vec::new();
    for step in &path.transitions {
        if !seen.insert(step.transition) {
            continue;
        }
        let t = &chain.transitions[step.transition];
        let from = add(t.from, &mut states);
        let to = add(t.to, &mut states);
        transitions.push(crate::usage::Transition {
            from,
            to,
            ..t.clone()
        });
    }
    ChainGraph::new(path.name.clone(), states, transitions)
}

/// Every definition that resolves without error, one per reachable
/// combination of start point, dynamic-stub bindings and condition values.
/// Only the choices a run actually needs are recorded.
pub fn enumerate_scenarios(chain: &FlatChain) -> Vec<ScenarioDefinition> {
    let mut found = Vec::new();
    for start in chain.starts() {
        let seed = ScenarioDefinition::new("", chain.states[start].id.clone());
        explore(seed, chain, &mut found);
    }
    let mut names = BTreeSet::new();
    found.retain(|d: &ScenarioDefinition| names.insert(d.name.clone()));
    found
}

fn explore(mut def: ScenarioDefinition, chain: &FlatChain, found: &mut Vec<ScenarioDefinition>) {
    match resolve_scenario(&def, chain) {
        Ok(_) => {
            def.name = generated_name(&def);
            found.push(def);
        }
        Err(ResolveError::UnresolvedChoice { state, missing }) => match missing {
            Missing::Variable(var) => {
                for value in [true, false] {
                    explore(def.clone().when(&var, value), chain, found);
                }
            }
            Missing::Binding(stub) => {
                let Some(s) = chain.state_index(&state) else { return };
                for &t in chain.outgoing(s) {
                    if let Some(plugin) = &chain.transitions[t].plugin {
                        explore(def.clone().bind(&stub, plugin), chain, found);
                    }
                }
            }
            Missing::Unconditioned => {}
        },
        Err(_) => {}
    }
}

fn generated_name(def: &ScenarioDefinition) -> String {
    let mut parts: Vec<String> = def
        .bindings
        .iter()
        .map(|(stub, plugin)| format!("{stub}={plugin}"))
        .collect();
    parts.extend(def.conditions.iter().map(|(var, v)| format!("{var}={v}")));
    if parts.is_empty() {
        def.start.clone()
    } else {
        format!("{}[{}]", def.start, parts.join(","))
    }
}
