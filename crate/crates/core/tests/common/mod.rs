#![allow(dead_code)]

use proptest::prelude::*;
use riskctl_core::model::SKILL_LEVELS;
use riskctl_core::{AdNode, AdTree, Countermeasure, Gate, LeafAttrs, NodeBody, ThreatEntry};

/// Tree shape before ids are assigned.
#[derive(Debug, Clone)]
pub enum Shape {
    Leaf {
        attrs: LeafAttrs,
        label: String,
        control: Option<usize>,
        threat: bool,
    },
    Gate {
        and: bool,
        label: String,
        children: Vec<Shape>,
    },
}

pub fn leaf_attrs() -> impl Strategy<Value = LeafAttrs> {
    (0u32..=1000, 1u8..=3, 1u8..=10, 0usize..4).prop_map(|(p, c, i, s)| LeafAttrs {
        probability: p as f64 / 1000.0,
        cost: c as f64,
        impact: i as f64,
        skill: SKILL_LEVELS[s],
    })
}

pub fn label() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 \"\\\\,.-]{0,12}"
}

fn leaf_shape() -> impl Strategy<Value = Shape> {
    (leaf_attrs(), label(), prop::option::of(0usize..3), any::<bool>()).prop_map(
        |(attrs, label, control, threat)| Shape::Leaf {
            attrs,
            label,
            control,
            threat,
        },
    )
}

/// Random trees up to `depth` gate levels with at most `fan_out` children
/// per gate.
pub fn shape(depth: u32, fan_out: usize) -> impl Strategy<Value = Shape> {
    leaf_shape().prop_recursive(depth, 64, fan_out as u32, move |inner| {
        (any::<bool>(), label(), prop::collection::vec(inner, 1..=fan_out))
            .prop_map(|(and, label, children)| Shape::Gate { and, label, children })
    })
}

fn count_leaves(s: &Shape) -> usize {
    match s {
        Shape::Leaf { .. } => 1,
        Shape::Gate { children, .. } => children.iter().map(count_leaves).sum(),
    }
}

/// Random trees with at most `max_leaves` leaves.
pub fn small_shape(max_leaves: usize) -> impl Strategy<Value = Shape> {
    shape(3, 3).prop_filter("too many leaves", move |s| count_leaves(s) <= max_leaves)
}

/// Three probability controls C1..C3 with random values and costs.
pub fn controls() -> impl Strategy<Value = Vec<Countermeasure>> {
    prop::collection::vec((0u32..=100, 1u8..=3), 3).prop_map(|specs| {
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (v, c))| {
                Countermeasure::probability(&format!("C{}", i + 1), "control", v as f64 / 100.0, c as f64)
                    .unwrap()
            })
            .collect()
    })
}

pub fn build(shape: &Shape, controls: &[Countermeasure]) -> AdTree {
    let mut next = 0;
    let root = build_node(shape, &mut next);
    let mut tree = AdTree::new("random", root);
    for cm in controls {
        tree.controls.insert(cm.clone()).unwrap();
    }
    tree.threats.insert(ThreatEntry::stub("T1")).unwrap();
    tree
}

fn build_node(shape: &Shape, next: &mut usize) -> AdNode {
    let id = format!("N{next}");
    *next += 1;
    match shape {
        Shape::Leaf {
            attrs,
            label,
            control,
            threat,
        } => {
            let mut n = AdNode::leaf(&id, label, *attrs);
            if let Some(c) = control {
                n = n.with_countermeasure(&format!("C{}", c + 1));
            }
            if *threat {
                n = n.with_threat("T1");
            }
            n
        }
        Shape::Gate { and, label, children } => {
            let gate = if *and { Gate::And } else { Gate::Or };
            let kids = children.iter().map(|c| build_node(c, next)).collect();
            AdNode::gate(gate, &id, label, kids)
        }
    }
}

pub fn random_tree(depth: u32, fan_out: usize) -> impl Strategy<Value = AdTree> {
    (shape(depth, fan_out), controls()).prop_map(|(s, c)| build(&s, &c))
}

/// Trees where every gate on one level has the same kind and arity, all
/// leaves sit at the same depth and share one cost.
pub fn level_uniform_tree() -> impl Strategy<Value = AdTree> {
    let levels = prop::collection::vec((any::<bool>(), 1usize..=3), 1..=3);
    (levels, 1u8..=3, controls()).prop_flat_map(|(levels, cost, cms)| {
        let n_leaves: usize = levels.iter().map(|(_, k)| *k).product();
        let leaves = prop::collection::vec(
            (leaf_attrs(), prop::option::of(0usize..3)),
            n_leaves,
        );
        (Just(levels), Just(cost), Just(cms), leaves).prop_map(|(levels, cost, cms, leaves)| {
            let mut it = leaves.into_iter();
            let shape = uniform_level(&levels, cost as f64, &mut it);
            build(&shape, &cms)
        })
    })
}

fn uniform_level(
    levels: &[(bool, usize)],
    cost: f64,
    leaves: &mut impl Iterator<Item = (LeafAttrs, Option<usize>)>,
) -> Shape {
    match levels.split_first() {
        None => {
            let (attrs, control) = leaves.next().unwrap();
            Shape::Leaf {
                attrs: LeafAttrs { cost, ..attrs },
                label: String::new(),
                control,
                threat: false,
            }
        }
        Some((&(and, arity), rest)) => Shape::Gate {
            and,
            label: String::new(),
            children: (0..arity).map(|_| uniform_level(rest, cost, leaves)).collect(),
        },
    }
}

/// Independent straight-line recomputation used as a test oracle. Returns
/// `(probability, cost, impact, skill, risk)` for the root, full precision.
pub fn naive(tree: &AdTree, residual: bool) -> [f64; 5] {
    fn go(tree: &AdTree, node: &AdNode, residual: bool) -> [f64; 4] {
        match &node.body {
            NodeBody::Leaf(l) => {
                let mut p = l.attrs.probability;
                if residual {
                    if let Some(code) = &l.countermeasure {
                        let cm = tree.controls.get(code).unwrap();
                        p -= p * (cm.value / cm.cost);
                    }
                }
                [p, l.attrs.cost, l.attrs.impact, l.attrs.skill]
            }
            NodeBody::Gate { gate, children } => {
                let xs: Vec<[f64; 4]> = children.iter().map(|c| go(tree, c, residual)).collect();
                let mut p_and = 1.0;
                let mut p_none = 1.0;
                let mut cost_sum = 0.0;
                let mut w = 0.0;
                let mut wc = 0.0;
                let mut miss = 1.0;
                let mut imp_max: f64 = 0.0;
                let mut s_max: f64 = 0.0;
                let mut s_min: f64 = f64::MAX;
                for x in &xs {
                    p_and *= x[0];
                    p_none *= 1.0 - x[0];
                    cost_sum += x[1];
                    w += x[0];
                    wc += x[0] * x[1];
                    miss *= 1.0 - x[2] / 10.0;
                    imp_max = imp_max.max(x[2]);
                    s_max = s_max.max(x[3]);
                    s_min = s_min.min(x[3]);
                }
                match gate {
                    Gate::And => [p_and, cost_sum, 10.0 - 10.0 * miss, s_max],
                    Gate::Or => [1.0 - p_none, wc / w, imp_max, s_min],
                }
            }
        }
    }
    let [p, c, i, s] = go(tree, &tree.root, residual);
    [p, c, i, s, p * s * i / c]
}

/// True when some OR gate would see only zero-probability children.
pub fn has_degenerate_or(tree: &AdTree, residual: bool) -> bool {
    fn prob(tree: &AdTree, node: &AdNode, residual: bool, bad: &mut bool) -> f64 {
        match &node.body {
            NodeBody::Leaf(l) => {
                let p = l.attrs.probability;
                match (&l.countermeasure, residual) {
                    (Some(code), true) => {
                        let cm = tree.controls.get(code).unwrap();
                        p - p * (cm.value / cm.cost)
                    }
                    _ => p,
                }
            }
            NodeBody::Gate { gate, children } => {
                let ps: Vec<f64> = children.iter().map(|c| prob(tree, c, residual, bad)).collect();
                match gate {
                    Gate::And => ps.iter().product(),
                    Gate::Or => {
                        if ps.iter().sum::<f64>() <= 0.0 {
                            *bad = true;
                        }
                        1.0 - ps.iter().map(|p| 1.0 - p).product::<f64>()
                    }
                }
            }
        }
    }
    let mut bad = false;
    prob(tree, &tree.root, residual, &mut bad);
    bad
}
