//! Bottom-up evaluation of attack-defense trees.
//!
//! Leaves carry declared attributes. Gates combine their children:
//!
//! | attribute   | AND                                  | OR                          |
//! |-------------|--------------------------------------|-----------------------------|
//! | probability | `Π p`                                | `1 - Π (1 - p)`             |
//! | cost        | `Σ c`                                | `Σ p·c / Σ p`               |
//! | impact      | `(10ⁿ - Π (10 - i)) / 10ⁿ⁻¹`         | `max i`                     |
//! | skill       | `max s`                              | `min s`                     |
//!
//! and every node's risk is `p · s · i / c`. Residual evaluation first applies
//! each leaf's countermeasure and then propagates the reduced values with the
//! same gate rules.

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{
    self, AdNode, AdTree, ComparisonRow, ControlKind, Countermeasure, EvalMode, Gate, Impact,
    ImpactBand, NodeAttrs, NodeBody, Probability, ProbabilityBand, Violation,
};
use crate::numeric::round_half_up;

/// Lower edge of the `Certain` band; the `High` band ends just below it.
pub const CERTAIN_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("tree is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidTree(Vec<Violation>),
    #[error("OR node `{node_id}`: child probabilities sum to zero, cost weighting is undefined")]
    DegenerateWeights { node_id: String },
    #[error("control `{code}` is not a {expected:?}")]
    WrongControlKind { code: String, expected: ControlKind },
    #[error("evaluations are over different trees: {0}")]
    TreeMismatch(String),
}

/// All OR children have zero probability, so the cost-weighted mean is
/// undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("child probabilities sum to zero")]
pub struct DegenerateWeights;

/// Arithmetic policy for gate nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// When set, each gate's probability, cost and impact are rounded half-up
    /// to this many decimals before its risk is derived and before the parent
    /// consumes them. This is how the case-study tables were produced.
    pub gate_decimals: Option<u32>,
}

impl EvalOptions {
    /// Full double precision throughout.
    pub fn exact() -> Self {
        Self { gate_decimals: None }
    }

    pub fn rounded(decimals: u32) -> Self {
        Self {
            gate_decimals: Some(decimals),
        }
    }
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self::rounded(2)
    }
}

pub fn classify_probability(p: Probability) -> ProbabilityBand {
    match p.value() {
        v if v < 0.05 => ProbabilityBand::Unlikely,
        v if v < 0.25 => ProbabilityBand::Low,
        v if v < 0.75 => ProbabilityBand::Medium,
        v if v < CERTAIN_THRESHOLD => ProbabilityBand::High,
        _ => ProbabilityBand::Certain,
    }
}

/// Bands are half-open so propagated (fractional) impacts land in the band
/// whose integer range they extend: 9.4 is `Severe`. Anything below 1 or at
/// 10 falls in the catch-all `Catastrophic` band.
pub fn classify_impact(v: Impact) -> ImpactBand {
    match v.value() {
        v if (1.0..4.0).contains(&v) => ImpactBand::Minor,
        v if (4.0..7.0).contains(&v) => ImpactBand::Moderate,
        v if (7.0..10.0).contains(&v) => ImpactBand::Severe,
        _ => ImpactBand::Catastrophic,
    }
}

pub fn and_probability(ps: impl IntoIterator<Item = f64>) -> f64 {
    ps.into_iter().product()
}

/// Complement of the AND rule over complements.
pub fn or_probability(ps: impl IntoIterator<Item = f64>) -> f64 {
    1.0 - and_probability(ps.into_iter().map(|p| 1.0 - p))
}

/// AND-gate impact. Computed in the printed form while powers of ten are
/// exact (n ≤ 22) and in the normalised form `10·(1 - Π(1 - i/10))`
/// beyond; clamped into `[max child, 10]` to absorb rounding.
pub fn and_impact(impacts: &[f64]) -> f64 {
    let n = impacts.len();
    if n == 0 {
        return 0.0;
    }
    let raw = if n <= 22 {
        let prod: f64 = impacts.iter().map(|i| 10.0 - i).product();
        (10f64.powi(n as i32) - prod) / 10f64.powi(n as i32 - 1)
    } else {
        10.0 * (1.0 - impacts.iter().map(|i| 1.0 - i / 10.0).product::<f64>())
    };
    let max = impacts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    raw.clamp(max.min(10.0), 10.0)
}

fn max_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.fold(f64::INFINITY, f64::min)
}

/// # Panics
/// If `children` is empty.
pub fn propagate_and(children: &[NodeAttrs]) -> NodeAttrs {
    assert!(!children.is_empty(), "AND gate without children");
    let impacts: Vec<f64> = children.iter().map(|c| c.impact).collect();
    NodeAttrs::new(
        and_probability(children.iter().map(|c| c.probability)),
        children.iter().map(|c| c.cost).sum(),
        and_impact(&impacts),
        max_of(children.iter().map(|c| c.skill)),
    )
}

/// # Panics
/// If `children` is empty.
pub fn propagate_or(children: &[NodeAttrs]) -> Result<NodeAttrs, DegenerateWeights> {
    assert!(!children.is_empty(), "OR gate without children");
    let weight: f64 = children.iter().map(|c| c.probability).sum();
    if weight <= 0.0 {
        return Err(DegenerateWeights);
    }
    let weighted: f64 = children.iter().map(|c| c.probability * c.cost).sum();
    Ok(NodeAttrs::new(
        or_probability(children.iter().map(|c| c.probability)),
        weighted / weight,
        max_of(children.iter().map(|c| c.impact)),
        min_of(children.iter().map(|c| c.skill)),
    ))
}

/// Residual probability `p · (1 - value/cost)` of a leaf under a
/// probability control.
pub fn apply_probability_control(
    leaf_prob: Probability,
    cm: &Countermeasure,
) -> Result<Probability, EngineError> {
    if cm.kind != ControlKind::ProbabilityControl {
        return Err(EngineError::WrongControlKind {
            code: cm.code.clone(),
            expected: ControlKind::ProbabilityControl,
        });
    }
    let residual = (leaf_prob.value() * (1.0 - cm.final_value())).clamp(0.0, 1.0);
    Ok(Probability::new(residual).expect("clamped into [0, 1]"))
}

/// Residual impact `i · (i · efc) / (cost · 10)` of a leaf under an impact
/// control, never above the inherent impact.
pub fn apply_impact_control(leaf_imp: Impact, cm: &Countermeasure) -> Result<Impact, EngineError> {
    if cm.kind != ControlKind::ImpactControl {
        return Err(EngineError::WrongControlKind {
            code: cm.code.clone(),
            expected: ControlKind::ImpactControl,
        });
    }
    let imp = leaf_imp.value();
    let efc = cm.effectiveness.unwrap_or(0.0);
    let raw = imp * (imp * efc) / (cm.cost * 10.0);
    let residual = if raw.is_finite() { raw.clamp(0.0, imp) } else { imp };
    Ok(Impact::new(residual).expect("clamped into [0, imp]"))
}

/// Attributes of every node of a tree under one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedTree<'t> {
    pub tree: &'t AdTree,
    pub mode: EvalMode,
    pub options: EvalOptions,
    attrs: IndexMap<String, NodeAttrs>,
}

impl<'t> EvaluatedTree<'t> {
    pub fn get(&self, id: &str) -> Option<&NodeAttrs> {
        self.attrs.get(id)
    }

    /// Node ids and attributes in post-order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &NodeAttrs)> {
        self.attrs.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn root(&self) -> &NodeAttrs {
        &self.attrs[&self.tree.root.id]
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }
}

/// Evaluates with the default gate rounding.
pub fn evaluate(tree: &AdTree, mode: EvalMode) -> Result<EvaluatedTree<'_>, EngineError> {
    evaluate_with(tree, mode, EvalOptions::default())
}

pub fn evaluate_with(
    tree: &AdTree,
    mode: EvalMode,
    options: EvalOptions,
) -> Result<EvaluatedTree<'_>, EngineError> {
    let violations = model::validate_tree(tree);
    if model::has_errors(&violations) {
        return Err(EngineError::InvalidTree(violations));
    }
    let mut attrs = IndexMap::with_capacity(tree.node_count());
    eval_node(tree, &tree.root, mode, options, &mut attrs)?;
    Ok(EvaluatedTree {
        tree,
        mode,
        options,
        attrs,
    })
}

fn eval_node(
    tree: &AdTree,
    node: &AdNode,
    mode: EvalMode,
    options: EvalOptions,
    out: &mut IndexMap<String, NodeAttrs>,
) -> Result<NodeAttrs, EngineError> {
    let attrs = match &node.body {
        NodeBody::Leaf(leaf) => {
            let mut a = NodeAttrs::from_leaf(&leaf.attrs);
            if let (EvalMode::Residual, Some(code)) = (mode, &leaf.countermeasure) {
                // references were resolved by validation
                let cm = tree.controls.get(code).expect("validated control reference");
                match cm.kind {
                    ControlKind::ProbabilityControl => {
                        let p = Probability::new(a.probability).expect("validated probability");
                        a.probability = apply_probability_control(p, cm)?.value();
                    }
                    ControlKind::ImpactControl => {
                        let i = Impact::new(a.impact).expect("validated impact");
                        a.impact = apply_impact_control(i, cm)?.value();
                    }
                }
                a = NodeAttrs::new(a.probability, a.cost, a.impact, a.skill);
            }
            a
        }
        NodeBody::Gate { gate, children } => {
            let kids = children
                .iter()
                .map(|c| eval_node(tree, c, mode, options, out))
                .collect::<Result<Vec<_>, _>>()?;
            let raw = match gate {
                Gate::And => propagate_and(&kids),
                Gate::Or => propagate_or(&kids).map_err(|_| EngineError::DegenerateWeights {
                    node_id: node.id.clone(),
                })?,
            };
            match options.gate_decimals {
                None => raw,
                Some(d) => NodeAttrs::new(
                    round_half_up(raw.probability, d),
                    round_half_up(raw.cost, d),
                    round_half_up(raw.impact, d),
                    raw.skill,
                ),
            }
        }
    };
    out.insert(node.id.clone(), attrs);
    Ok(attrs)
}

/// Leaves first, then gates by increasing height; post-order within each
/// height. This is the row order of the comparison table.
pub fn report_order(root: &AdNode) -> Vec<&AdNode> {
    let mut nodes: Vec<(usize, &AdNode)> =
        root.post_order().into_iter().map(|n| (n.height(), n)).collect();
    nodes.sort_by_key(|(h, _)| *h);
    nodes.into_iter().map(|(_, n)| n).collect()
}

/// Pairs inherent and residual attributes per node. Rows list leaves first,
/// then gates by increasing height, each group in post-order.
pub fn compare(
    inherent: &EvaluatedTree<'_>,
    residual: &EvaluatedTree<'_>,
) -> Result<Vec<ComparisonRow>, EngineError> {
    let ids_inh: Vec<_> = inherent.iter().map(|(id, _)| id).collect();
    let ids_res: Vec<_> = residual.iter().map(|(id, _)| id).collect();
    if ids_inh != ids_res {
        return Err(EngineError::TreeMismatch(format!(
            "{} nodes vs {} nodes",
            ids_inh.len(),
            ids_res.len()
        )));
    }

    let tree = inherent.tree;
    Ok(report_order(&tree.root)
        .into_iter()
        .map(|node| {
            let inh = inherent.attrs[&node.id];
            let res = residual.attrs[&node.id];
            let leaf = node.as_leaf();
            let control_code = leaf.and_then(|l| l.countermeasure.clone());
            ComparisonRow {
                node_id: node.id.clone(),
                kind: node.kind(),
                is_root: node.id == tree.root.id,
                threat_code: leaf.and_then(|l| l.threat.clone()),
                control_final_value: control_code
                    .as_deref()
                    .and_then(|c| tree.controls.get(c))
                    .map(Countermeasure::final_value),
                control_code,
                inherent: inh,
                residual: res,
                reduction_percent: model::reduction_percent(inh.risk, res.risk),
            }
        })
        .collect())
}

/// Evaluates both modes and compares them.
pub fn assess(tree: &AdTree, options: EvalOptions) -> Result<Vec<ComparisonRow>, EngineError> {
    let inherent = evaluate_with(tree, EvalMode::Inherent, options)?;
    let residual = evaluate_with(tree, EvalMode::Residual, options)?;
    compare(&inherent, &residual)
}
