//! Seeded random walks over the flat chain.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::scenario::Signature;
use crate::usage::{FlatChain, StateKind};

/// Identity of the generator behind every walk.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.3), stream = walk index";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimulateError {
    #[error("loop bound exceeded at {0}")]
    LoopBoundExceeded(String),
    #[error("chain has no start state")]
    NoStart,
    #[error("walk count must be at least 1")]
    NoWalks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkResult {
    /// State ids in the order they were entered.
    pub sequence: Vec<String>,
    pub visits: BTreeMap<String, usize>,
    pub signature: Signature,
}

/// Walks the chain once. Choice states sample a transition; AND-forks
/// spawn every branch, run depth first in declaration order; AND-joins
/// wait for all incoming branches.
pub fn random_walk(chain: &FlatChain, seed: u64, loop_bound: usize) -> Result<WalkResult, SimulateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    walk_with(chain, &mut rng, loop_bound)
}

fn sample<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if u < w {
            return i;
        }
        u -= w;
        last = i;
    }
    last
}

fn walk_with<R: Rng>(chain: &FlatChain, rng: &mut R, loop_bound: usize) -> Result<WalkResult, SimulateError> {
    let starts = chain.starts();
    if starts.is_empty() {
        return Err(SimulateError::NoStart);
    }
    let start = starts[sample(rng, starts.iter().map(|&s| chain.states[s].trigger))];

    let mut entered = vec![0usize; chain.states.len()];
    let mut waiting = vec![0usize; chain.states.len()];
    let mut stack = vec![start];
    let mut sequence = Vec::new();
    let mut visits = BTreeMap::new();
    let mut signature = vec![chain.states[start].id.clone()];
    // a stub instance keeps its first selection for the rest of the walk
    let mut selected: BTreeMap<String, String> = BTreeMap::new();

    while let Some(s) = stack.pop() {
        let state = &chain.states[s];
        entered[s] += 1;
        if entered[s] > loop_bound {
            return Err(SimulateError::LoopBoundExceeded(state.id.clone()));
        }
        sequence.push(state.id.clone());
        if matches!(state.kind, StateKind::Start | StateKind::End | StateKind::Responsibility) {
            *visits.entry(state.source.clone()).or_insert(0) += 1;
        }
        if state.kind == StateKind::AndJoin {
            waiting[s] += 1;
            if waiting[s] < chain.join_arity(s) {
                continue;
            }
            waiting[s] = 0;
        }
        let out = chain.outgoing(s);
        if out.is_empty() {
            continue;
        }
        let next = match state.kind {
            StateKind::AndFork => {
                stack.extend(out.iter().rev().map(|&t| chain.transitions[t].to));
                continue;
            }
            StateKind::Selection => {
                let instance = state.id.split(':').next().unwrap_or(&state.id).to_string();
                let prior = selected.get(&instance).and_then(|plugin| {
                    out.iter()
                        .copied()
                        .find(|&t| chain.transitions[t].plugin.as_deref() == Some(plugin.as_str()))
                });
                let t = match prior {
                    Some(t) => t,
                    None => out[sample(rng, out.iter().map(|&t| chain.transitions[t].probability))],
                };
                if let Some(plugin) = &chain.transitions[t].plugin {
                    selected.entry(instance).or_insert_with(|| plugin.clone());
                }
                t
            }
            StateKind::OrFork => out[sample(rng, out.iter().map(|&t| chain.transitions[t].probability))],
            _ => out[0],
        };
        let to = chain.transitions[next].to;
        if state.kind.is_choice() {
            signature.push(format!("{}->{}", state.id, chain.states[to].id));
        }
        stack.push(to);
    }

    Ok(WalkResult {
        sequence,
        visits,
        signature: Signature(signature),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub walks: usize,
    pub seed: u64,
    pub generator: &'static str,
    pub frequencies: BTreeMap<Signature, f64>,
    pub mean_visits: BTreeMap<String, f64>,
}

/// Runs `n` walks, walk `i` on stream `i` of a generator seeded with `seed`.
pub fn estimate(chain: &FlatChain, n: usize, seed: u64, loop_bound: usize) -> Result<Estimate, SimulateError> {
    if n == 0 {
        return Err(SimulateError::NoWalks);
    }
    let mut counts: BTreeMap<Signature, usize> = BTreeMap::new();
    let mut visit_totals: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let walk = walk_with(chain, &mut rng, loop_bound)?;
        *counts.entry(walk.signature).or_insert(0) += 1;
        for (obj, c) in walk.visits {
            *visit_totals.entry(obj).or_insert(0) += c;
        }
    }
    let n_f = n as f64;
    Ok(Estimate {
        walks: n,
        seed,
        generator: GENERATOR,
        frequencies: counts.into_iter().map(|(k, c)| (k, c as f64 / n_f)).collect(),
        mean_visits: visit_totals.into_iter().map(|(k, c)| (k, c as f64 / n_f)).collect(),
    })
}
