//! Hierarchical Markov usage model built from a UCM specification, and its
//! flattening into a single walkable chain.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::format::fmt_num;
use crate::model::{Condition, MapGraph, NodeKind, ObjectType, UcmModel, ValidationReport, PROB_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Start,
    End,
    Responsibility,
    Stub,
    /// Entry of a stub instance; chooses among the bound sub-chains.
    Selection,
    OrFork,
    OrJoin,
    AndFork,
    AndJoin,
}

impl From<NodeKind> for StateKind {
    fn from(kind: NodeKind) -> Self {
        match kind {
            NodeKind::Start => StateKind::Start,
            NodeKind::End => StateKind::End,
            NodeKind::Responsibility => StateKind::Responsibility,
            NodeKind::Stub => StateKind::Stub,
            NodeKind::OrFork => StateKind::OrFork,
            NodeKind::OrJoin => StateKind::OrJoin,
            NodeKind::AndFork => StateKind::AndFork,
            NodeKind::AndJoin => StateKind::AndJoin,
        }
    }
}

impl StateKind {
    /// States where exactly one outgoing transition is picked at random.
    pub fn is_choice(self) -> bool {
        matches!(self, StateKind::OrFork | StateKind::Selection)
    }

    /// Whether visits to this state count towards primitive-object importance.
    pub fn is_primitive(self) -> bool {
        matches!(self, StateKind::Start | StateKind::End | StateKind::Responsibility)
    }

    pub fn object_type(self) -> Option<ObjectType> {
        match self {
            StateKind::Start | StateKind::End => Some(ObjectType::Point),
            StateKind::Responsibility => Some(ObjectType::Responsibility),
            StateKind::Stub | StateKind::Selection => Some(ObjectType::Stub),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct State {
    pub id: String,
    pub kind: StateKind,
    /// The model object this state stands for.
    pub source: String,
    /// Start trigger probability; 1 for all other states.
    pub trigger: f64,
    /// Branches an AND-join waits for (its incoming edges in the source map);
    /// 0 for every other state.
    #[serde(skip_serializing_if = "is_zero")]
    pub join_arity: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    /// Plug-in entered by a selection transition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plugin: Option<String>,
}

/// A directed graph of states with transition probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainGraph {
    pub name: String,
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
    #[serde(skip)]
    outgoing: Vec<Vec<usize>>,
    #[serde(skip)]
    incoming: Vec<Vec<usize>>,
}

impl ChainGraph {
    pub fn new(name: impl Into<String>, states: Vec<State>, transitions: Vec<Transition>) -> Self {
        let mut outgoing = vec![Vec::new(); states.len()];
        let mut incoming = vec![Vec::new(); states.len()];
        for (i, t) in transitions.iter().enumerate() {
            outgoing[t.from].push(i);
            incoming[t.to].push(i);
        }
        ChainGraph {
            name: name.into(),
            states,
            transitions,
            outgoing,
            incoming,
        }
    }

    /// Transition indices leaving `state`, in declaration order.
    pub fn outgoing(&self, state: usize) -> &[usize] {
        &self.outgoing[state]
    }

    pub fn incoming(&self, state: usize) -> &[usize] {
        &self.incoming[state]
    }

    /// Arrivals an AND-join needs before it fires. In a flat chain a stub
    /// feeding the join contributes one transition per plug-in, so this
    /// is not the number of incoming transitions.
    pub fn join_arity(&self, state: usize) -> usize {
        match self.states[state].join_arity {
            0 => self.incoming[state].len(),
            n => n,
        }
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    pub fn state(&self, id: &str) -> Option<&State> {
        self.states.iter().find(|s| s.id == id)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Start states in declaration order.
    pub fn starts(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&i| self.states[i].kind == StateKind::Start && self.incoming[i].is_empty())
            .collect()
    }

    /// Renders the chain as a Graphviz digraph.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", quote(&self.name));
        for (i, s) in self.states.iter().enumerate() {
            let shape = match s.kind {
                StateKind::Start => "circle",
                StateKind::End => "doublecircle",
                StateKind::Stub | StateKind::Selection => "diamond",
                StateKind::OrFork | StateKind::OrJoin | StateKind::AndFork | StateKind::AndJoin => {
                    "point"
                }
                StateKind::Responsibility => "box",
            };
            let _ = writeln!(
                out,
                "  s{} [label={}, shape={}, tooltip={}];",
                i,
                quote(&s.source),
                shape,
                quote(&s.id)
            );
        }
        for t in &self.transitions {
            let mut label = Vec::new();
            if t.probability != 1.0 {
                label.push(fmt_num(t.probability));
            }
            if let Some(c) = &t.condition {
                label.push(c.to_string());
            }
            if label.is_empty() {
                let _ = writeln!(out, "  s{} -> s{};", t.from, t.to);
            } else {
                let _ = writeln!(out, "  s{} -> s{} [label={}];", t.from, t.to, quote(&label.join(" ")));
            }
        }
        out.push_str("}\n");
        out
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// The walkable chain: every stub replaced by its inlined sub-chains.
pub type FlatChain = ChainGraph;

/// One plug-in a stub state may select.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubChainChoice {
    pub plugin: String,
    pub probability: f64,
    /// Stub input -> start state of the sub-chain.
    pub entry: BTreeMap<String, String>,
    /// End state of the sub-chain -> stub output.
    pub exit: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StubState {
    pub dynamic: bool,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub choices: Vec<SubChainChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageModel {
    pub top: ChainGraph,
    /// One sub-chain per plug-in map, in declaration order.
    pub subs: Vec<ChainGraph>,
    pub stub_states: BTreeMap<String, StubState>,
}

impl UsageModel {
    pub fn chain(&self, name: &str) -> Option<&ChainGraph> {
        std::iter::once(&self.top)
            .chain(&self.subs)
            .find(|c| c.name == name)
    }

    pub fn chains(&self) -> impl Iterator<Item = &ChainGraph> {
        std::iter::once(&self.top).chain(&self.subs)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UsageError {
    #[error("model has no root map")]
    NoRootMap,
    #[error("plug-in {0} contains its own map")]
    RecursivePlugin(String),
    #[error("plug-in {0} is not part of the usage model")]
    MissingPlugin(String),
}

fn map_chain(map: &MapGraph) -> ChainGraph {
    let index: BTreeMap<&str, usize> = map
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let states = map
        .nodes
        .iter()
        .map(|n| State {
            id: n.id.clone(),
            kind: n.kind.into(),
            source: n.id.clone(),
            trigger: if n.kind == NodeKind::Start { n.trigger() } else { 1.0 },
            join_arity: if n.kind == NodeKind::AndJoin { map.incoming(&n.id).count() } else { 0 },
        })
        .collect();
    let transitions = map
        .edges
        .iter()
        .map(|e| Transition {
            from: index[e.from.as_str()],
            to: index[e.to.as_str()],
            probability: e.probability,
            condition: e.condition.clone(),
            plugin: None,
        })
        .collect();
    ChainGraph::new(map.name.clone(), states, transitions)
}

/// Builds the hierarchical usage model. Expects a model that validates
/// without issues.
pub fn convert(model: &UcmModel) -> Result<UsageModel, UsageError> {
    let root = model.root().ok_or(UsageError::NoRootMap)?;
    let top = map_chain(root);
    let subs = model.maps.iter().filter(|m| !m.root).map(map_chain).collect();
    let stub_states = model
        .stubs()
        .map(|(_, node, stub)| {
            let choices = stub
                .bindings
                .iter()
                .map(|b| SubChainChoice {
                    plugin: b.plugin.clone(),
                    probability: b.probability,
                    entry: b.inputs.clone(),
                    exit: b.outputs.clone(),
                })
                .collect();
            (
                node.id.clone(),
                StubState {
                    dynamic: stub.dynamic,
                    inputs: stub.inputs.clone(),
                    outputs: stub.outputs.clone(),
                    choices,
                },
            )
        })
        .collect();
    Ok(UsageModel {
        top,
        subs,
        stub_states,
    })
}

/// Where a chain node lands in the flat chain.
enum Placed {
    Single(usize),
    Stub {
        /// Selection state per stub input.
        entries: Vec<usize>,
        /// Flat end states feeding each stub output.
        exits: Vec<Vec<usize>>,
    },
}

struct Flattener<'a> {
    um: &'a UsageModel,
    states: Vec<State>,
    transitions: Vec<Transition>,
}

impl<'a> Flattener<'a> {
    fn add_state(&mut self, state: State) -> usize {
        self.states.push(state);
        self.states.len() - 1
    }

    /// Instantiates `chain` under `prefix`; returns flat indices of its
    /// start and end states keyed by source id.
    fn instantiate(
        &mut self,
        chain: &'a ChainGraph,
        prefix: &str,
        stack: &mut Vec<&'a str>,
    ) -> Result<BTreeMap<String, usize>, UsageError> {
        if stack.contains(&chain.name.as_str()) {
            return Err(UsageError::RecursivePlugin(chain.name.clone()));
        }
        stack.push(&chain.name);
        let mut placed = Vec::with_capacity(chain.states.len());
        let mut ports = BTreeMap::new();
        for state in &chain.states {
            if state.kind != StateKind::Stub {
                let idx = self.add_state(State {
                    id: format!("{prefix}{}", state.id),
                    ..state.clone()
                });
                if matches!(state.kind, StateKind::Start | StateKind::End) {
                    ports.insert(state.source.clone(), idx);
                }
                placed.push(Placed::Single(idx));
                continue;
            }
            let stub = self
                .um
                .stub_states
                .get(&state.source)
                .ok_or_else(|| UsageError::MissingPlugin(state.source.clone()))?;
            let instance = format!("{prefix}{}", state.id);
            let entries: Vec<usize> = stub
                .inputs
                .iter()
                .map(|input| {
                    let id = if stub.inputs.len() == 1 {
                        instance.clone()
                    } else {
                        format!("{instance}:{input}")
                    };
                    self.add_state(State {
                        id,
                        kind: StateKind::Selection,
                        source: state.source.clone(),
                        trigger: 1.0,
                        join_arity: 0,
                    })
                })
                .collect();
            let mut exits = vec![Vec::new(); stub.outputs.len()];
            for choice in &stub.choices {
                let sub = self
                    .um
                    .subs
                    .iter()
                    .find(|c| c.name == choice.plugin)
                    .ok_or_else(|| UsageError::MissingPlugin(choice.plugin.clone()))?;
                let sub_prefix = format!("{instance}/{}/", choice.plugin);
                let sub_ports = self.instantiate(sub, &sub_prefix, stack)?;
                for (input, &sel) in stub.inputs.iter().zip(&entries) {
                    if let Some(&start) = choice.entry.get(input).and_then(|s| sub_ports.get(s)) {
                        self.transitions.push(Transition {
                            from: sel,
                            to: start,
                            probability: choice.probability,
                            condition: None,
                            plugin: Some(choice.plugin.clone()),
                        });
                    }
                }
                for (end, output) in &choice.exit {
                    let slot = stub.outputs.iter().position(|o| o == output);
                    if let (Some(slot), Some(&end_state)) = (slot, sub_ports.get(end)) {
                        exits[slot].push(end_state);
                    }
                }
            }
            placed.push(Placed::Stub { entries, exits });
        }

        // Stub ports are matched to edges by declaration order.
        let mut in_slot = vec![0usize; chain.states.len()];
        let mut out_slot = vec![0usize; chain.states.len()];
        for t in &chain.transitions {
            let sources: Vec<usize> = match &placed[t.from] {
                Placed::Single(i) => vec![*i],
                Placed::Stub { exits, .. } => {
                    let slot = out_slot[t.from];
                    out_slot[t.from] += 1;
                    exits.get(slot).cloned().unwrap_or_default()
                }
            };
            let target = match &placed[t.to] {
                Placed::Single(i) => Some(*i),
                Placed::Stub { entries, .. } => {
                    let slot = in_slot[t.to];
                    in_slot[t.to] += 1;
                    entries.get(slot).copied()
                }
            };
            let Some(target) = target else { continue };
            for from in sources {
                self.transitions.push(Transition {
                    from,
                    to: target,
                    probability: t.probability,
                    condition: t.condition.clone(),
                    plugin: None,
                });
            }
        }
        stack.pop();
        Ok(ports)
    }
}

/// Inlines every stub. Plug-ins are copied per stub instance, and state ids
/// are qualified by the stub/plug-in path (`SO/ocs/chk`).
pub fn flatten(um: &UsageModel) -> Result<FlatChain, UsageError> {
    let mut f = Flattener {
        um,
        states: Vec::new(),
        transitions: Vec::new(),
    };
    f.instantiate(&um.top, "", &mut Vec::new())?;
    let mut transitions = f.transitions;
    // keep each state's outgoing transitions in a stable, source-like order
    transitions.sort_by_key(|t| t.from);
    Ok(ChainGraph::new(um.top.name.clone(), f.states, transitions))
}

/// Reports every non-absorbing state whose outgoing probabilities do not sum
/// to 1. AND-fork branches are all taken, so each must carry probability 1.
pub fn check_stochastic(chain: &ChainGraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, state) in chain.states.iter().enumerate() {
        let out = chain.outgoing(i);
        if out.is_empty() {
            continue;
        }
        let loc = format!("state {}", state.id);
        if state.kind == StateKind::AndFork {
            for &t in out {
                let p = chain.transitions[t].probability;
                if (p - 1.0).abs() > PROB_TOLERANCE {
                    report.push(&loc, format!("AND-fork branch probability {} ≠ 1", fmt_num(p)));
                }
            }
            continue;
        }
        let sum: f64 = out.iter().map(|&t| chain.transitions[t].probability).sum();
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            report.push(&loc, format!("outgoing probability sum {} ≠ 1", fmt_num(sum)));
        }
    }
    report
}
