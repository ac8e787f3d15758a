//! Seeded generator of structurally valid, acyclic models: nested sequences
//! of responsibilities, conditioned OR blocks, AND blocks and stubs whose
//! plug-ins are generated maps of their own.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucm_usage::model::{
    Component, Condition, Edge, MapGraph, Node, NodeKind, ObjectModel, ObjectType, PluginBinding,
    StubDetail, UcmModel,
};

pub struct Options {
    pub max_depth: usize,
    /// Allow unconditioned three-way OR-forks (probabilistic but not
    /// expressible as a scenario definition).
    pub unconditioned_forks: bool,
    /// Upper bound on OR-forks plus stubs, which keeps run counts small.
    pub max_choices: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            max_depth: 3,
            unconditioned_forks: false,
            max_choices: 6,
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    opts: Options,
    next_id: usize,
    choices: usize,
    maps: Vec<MapGraph>,
    variables: BTreeSet<String>,
}

struct Builder {
    map: MapGraph,
}

impl Builder {
    fn node(&mut self, id: String, kind: NodeKind) -> String {
        self.map.nodes.push(Node {
            id: id.clone(),
            kind,
            component: Some(format!("C{}", id.len() % 3)),
            trigger: None,
            stub: None,
        });
        id
    }

    fn edge(&mut self, from: &str, to: &str) {
        self.edge_with(from, to, 1.0, None);
    }

    fn edge_with(&mut self, from: &str, to: &str, p: f64, cond: Option<Condition>) {
        self.map.edges.push(Edge {
            from: from.into(),
            to: to.into(),
            probability: p,
            condition: cond,
        });
    }
}

impl Gen {
    fn id(&mut self, prefix: &str) -> String {
        self.next_id += 1;
        format!("{prefix}{}", self.next_id)
    }

    fn prob(&mut self) -> f64 {
        self.rng.gen_range(1..10) as f64 / 10.0
    }

    /// Appends a sequence after `from`; returns the last node, or `None`
    /// when the sequence ended in its own end point.
    fn seq(&mut self, b: &mut Builder, from: String, depth: usize, in_and: bool) -> Option<String> {
        let len = self.rng.gen_range(1..=3);
        let mut cur = from;
        for _ in 0..len {
            let mut choice = if depth >= self.opts.max_depth { 0 } else { self.rng.gen_range(0..5) };
            if matches!(choice, 2 | 4) {
                if self.choices >= self.opts.max_choices {
                    choice = 0;
                } else {
                    self.choices += 1;
                }
            }
            cur = match choice {
                0 | 1 => {
                    let r = self.id("r");
                    b.node(r.clone(), NodeKind::Responsibility);
                    b.edge(&cur, &r);
                    r
                }
                2 => self.or_block(b, cur, depth, in_and)?,
                3 => self.and_block(b, cur, depth),
                _ => self.stub(b, cur, depth, in_and),
            };
        }
        Some(cur)
    }

    fn or_block(&mut self, b: &mut Builder, from: String, depth: usize, in_and: bool) -> Option<String> {
        let fork = self.id("of");
        b.node(fork.clone(), NodeKind::OrFork);
        b.edge(&from, &fork);
        let three = self.opts.unconditioned_forks && self.rng.gen_bool(0.3);
        let probs: Vec<f64> = if three {
            let a = self.rng.gen_range(1..8);
            let c = self.rng.gen_range(1..(9 - a));
            vec![a as f64 / 10.0, c as f64 / 10.0, (10 - a - c) as f64 / 10.0]
        } else {
            let p = self.prob();
            vec![p, 1.0 - p]
        };
        let var = if three {
            None
        } else {
            let v = self.id("v");
            self.variables.insert(v.clone());
            Some(v)
        };
        let mut tails = Vec::new();
        for (i, p) in probs.iter().enumerate() {
            let head = self.id("r");
            b.node(head.clone(), NodeKind::Responsibility);
            let cond = var.as_ref().map(|v| Condition {
                var: v.clone(),
                value: i == 0,
            });
            b.edge_with(&fork, &head, *p, cond);
            // only the last branch may stop early, and never inside an AND block
            if !in_and && i == probs.len() - 1 && self.rng.gen_bool(0.3) {
                let end = self.id("e");
                b.node(end.clone(), NodeKind::End);
                b.edge(&head, &end);
                continue;
            }
            if let Some(t) = self.seq(b, head, depth + 1, in_and) {
                tails.push(t);
            }
        }
        match tails.len() {
            0 => None,
            1 => tails.pop(),
            _ => {
                let join = self.id("oj");
                b.node(join.clone(), NodeKind::OrJoin);
                for t in &tails {
                    b.edge(t, &join);
                }
                Some(join)
            }
        }
    }

    fn and_block(&mut self, b: &mut Builder, from: String, depth: usize) -> String {
        let fork = self.id("af");
        b.node(fork.clone(), NodeKind::AndFork);
        b.edge(&from, &fork);
        let mut tails = Vec::new();
        for _ in 0..2 {
            let head = self.id("r");
            b.node(head.clone(), NodeKind::Responsibility);
            b.edge(&fork, &head);
            tails.push(self.seq(b, head, depth + 1, true).expect("AND branches never stop early"));
        }
        let join = self.id("aj");
        b.node(join.clone(), NodeKind::AndJoin);
        for t in &tails {
            b.edge(t, &join);
        }
        join
    }

    fn stub(&mut self, b: &mut Builder, from: String, depth: usize, in_and: bool) -> String {
        let stub = self.id("S");
        let dynamic = self.rng.gen_bool(0.6);
        let n = if dynamic { self.rng.gen_range(2..=3) } else { 1 };
        let mut probs: Vec<f64> = (0..n).map(|_| self.rng.gen_range(1..5) as f64).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        if n > 1 {
            // make the sum exact so it survives a JSON round trip unchanged
            let head: f64 = probs[..n - 1].iter().sum();
            probs[n - 1] = 1.0 - head;
        }
        let mut bindings = Vec::new();
        for p in probs {
            let (name, start, end) = self.plugin_map(depth + 1, in_and);
            bindings.push(PluginBinding {
                plugin: name,
                probability: if dynamic { p } else { 1.0 },
                inputs: BTreeMap::from([("i".to_string(), start)]),
                outputs: BTreeMap::from([(end, "o".to_string())]),
            });
        }
        b.map.nodes.push(Node {
            id: stub.clone(),
            kind: NodeKind::Stub,
            component: None,
            trigger: None,
            stub: Some(StubDetail {
                dynamic,
                inputs: vec!["i".into()],
                outputs: vec!["o".into()],
                bindings,
            }),
        });
        b.edge(&from, &stub);
        stub
    }

    fn plugin_map(&mut self, depth: usize, in_and: bool) -> (String, String, String) {
        let name = self.id("P");
        let mut b = Builder {
            map: MapGraph {
                name: name.clone(),
                root: false,
                nodes: vec![],
                edges: vec![],
            },
        };
        let start = self.id("in");
        b.node(start.clone(), NodeKind::Start);
        let end = self.id("out");
        loop {
            let tail = self.seq(&mut b, start.clone(), depth, in_and);
            if let Some(t) = tail {
                b.node(end.clone(), NodeKind::End);
                b.edge(&t, &end);
                break;
            }
            // every path of the plug-in stopped early; start over
            b.map.nodes.truncate(1);
            b.map.edges.clear();
        }
        self.maps.push(b.map);
        (name, start, end)
    }
}

pub fn random_model(seed: u64, opts: Options) -> UcmModel {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        opts,
        next_id: 0,
        choices: 0,
        maps: Vec::new(),
        variables: BTreeSet::new(),
    };
    let mut b = Builder {
        map: MapGraph {
            name: "root".into(),
            root: true,
            nodes: vec![],
            edges: vec![],
        },
    };
    let starts = g.rng.gen_range(1..=2);
    for k in 0..starts {
        let s = g.id("s");
        b.node(s.clone(), NodeKind::Start);
        if starts == 2 {
            b.map.nodes.last_mut().unwrap().trigger = Some(if k == 0 { 0.25 } else { 0.75 });
        }
        if let Some(t) = g.seq(&mut b, s, 0, false) {
            let e = g.id("e");
            b.node(e.clone(), NodeKind::End);
            b.edge(&t, &e);
        }
    }
    let mut maps = vec![b.map];
    maps.extend(g.maps);
    UcmModel {
        maps,
        components: (0..3)
            .map(|i| Component {
                name: format!("C{i}"),
                parent: None,
            })
            .collect(),
        variables: g.variables,
    }
}

/// A random single-parent containment tree over fresh objects, with random
/// importances for the primitives.
pub fn random_tree(seed: u64) -> (ObjectModel, BTreeMap<String, f64>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = ObjectModel::default();
    let mut containers = vec!["K0".to_string()];
    objects.insert_object("K0", ObjectType::Component);
    let n_containers = rng.gen_range(1..12);
    for i in 1..n_containers {
        let id = format!("K{i}");
        let t = [ObjectType::Component, ObjectType::Plugin, ObjectType::Stub][rng.gen_range(0..3)];
        objects.insert_object(id.clone(), t);
        let parent = containers[rng.gen_range(0..containers.len())].clone();
        objects.set_parent(id.clone(), parent);
        containers.push(id);
    }
    let mut prims = BTreeMap::new();
    for i in 0..rng.gen_range(0..40) {
        let id = format!("p{i}");
        objects.insert_object(id.clone(), ObjectType::Responsibility);
        if rng.gen_bool(0.9) {
            objects.set_parent(id.clone(), containers[rng.gen_range(0..containers.len())].clone());
        }
        prims.insert(id, rng.gen_range(0.0..3.0));
    }
    (objects, prims, containers)
}
