//! Synthetic inputs for the benchmarks.

use riskctl_core::model::SKILL_LEVELS;
use riskctl_core::{AdNode, AdTree, Countermeasure, Gate, LeafAttrs};

/// A complete tree of the given fan-out and depth. Gates alternate OR/AND by
/// level; leaf attributes cycle deterministically and every third leaf
/// carries control `C1`.
pub fn balanced_tree(fan_out: usize, depth: usize) -> AdTree {
    let mut counter = 0;
    let root = node(fan_out, depth, 0, &mut counter);
    let mut tree = AdTree::new("synthetic", root);
    tree.controls
        .insert(Countermeasure::probability("C1", "synthetic control", 0.8, 2.0).expect("valid control"))
        .expect("fresh library");
    tree
}

fn node(fan_out: usize, depth: usize, level: usize, counter: &mut usize) -> AdNode {
    let id = format!("N{counter}");
    *counter += 1;
    if level == depth {
        let k = *counter;
        let attrs = LeafAttrs {
            probability: ((k * 37) % 100) as f64 / 100.0,
            cost: (k % 3 + 1) as f64,
            impact: (k % 10 + 1) as f64,
            skill: SKILL_LEVELS[k % 4],
        };
        let leaf = AdNode::leaf(&id, "step", attrs);
        return if k.is_multiple_of(3) { leaf.with_countermeasure("C1") } else { leaf };
    }
    let gate = if level.is_multiple_of(2) { Gate::Or } else { Gate::And };
    let children = (0..fan_out).map(|_| node(fan_out, depth, level + 1, counter)).collect();
    AdNode::gate(gate, &id, "goal", children)
}
