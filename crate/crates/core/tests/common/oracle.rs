//! Exhaustive run enumeration by reachability, written without the token
//! traversal used by scenario resolution and the random walker.
//!
//! A complete run is fixed by the transition chosen at every reached choice
//! state. Given those choices, the states of the run are the closure of the
//! start state under: all successors of non-choice states, the chosen
//! successor of choice states. Valid for acyclic chains whose concurrent
//! branches always meet again at an AND-join.

use std::collections::{BTreeMap, BTreeSet};

use ucm_usage::usage::{FlatChain, StateKind};

#[derive(Debug, Clone)]
pub struct Run {
    pub start: String,
    pub mass: f64,
    pub visits: BTreeMap<String, usize>,
}

pub fn enumerate_runs(chain: &FlatChain) -> Vec<Run> {
    let mut runs = Vec::new();
    for (i, s) in chain.states.iter().enumerate() {
        if s.kind == StateKind::Start && chain.incoming(i).is_empty() {
            expand(chain, i, &mut BTreeMap::new(), &mut runs);
        }
    }
    runs
}

fn is_choice(kind: StateKind) -> bool {
    matches!(kind, StateKind::OrFork | StateKind::Selection)
}

fn expand(chain: &FlatChain, start: usize, decided: &mut BTreeMap<usize, usize>, runs: &mut Vec<Run>) {
    let mut reached = BTreeSet::from([start]);
    let mut work = vec![start];
    let mut undecided = BTreeSet::new();
    while let Some(s) = work.pop() {
        let targets: Vec<usize> = if is_choice(chain.states[s].kind) {
            match decided.get(&s) {
                Some(&t) => vec![chain.transitions[t].to],
                None => {
                    undecided.insert(s);
                    vec![]
                }
            }
        } else {
            chain.outgoing(s).iter().map(|&t| chain.transitions[t].to).collect()
        };
        for to in targets {
            if reached.insert(to) {
                work.push(to);
            }
        }
    }

    if let Some(&s) = undecided.iter().next() {
        for &t in chain.outgoing(s) {
            decided.insert(s, t);
            expand(chain, start, decided, runs);
        }
        decided.remove(&s);
        return;
    }

    let mass = reached
        .iter()
        .filter_map(|s| decided.get(s))
        .fold(chain.states[start].trigger, |m, &t| m * chain.transitions[t].probability);
    let mut visits = BTreeMap::new();
    for &s in &reached {
        let st = &chain.states[s];
        if matches!(st.kind, StateKind::Start | StateKind::End | StateKind::Responsibility) {
            *visits.entry(st.source.clone()).or_insert(0) += 1;
        }
    }
    runs.push(Run {
        start: chain.states[start].id.clone(),
        mass,
        visits,
    });
}

/// Expected visit count of every primitive object over all runs.
pub fn expected_visits(runs: &[Run]) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for run in runs {
        for (obj, &n) in &run.visits {
            *out.entry(obj.clone()).or_insert(0.0) += run.mass * n as f64;
        }
    }
    out
}
