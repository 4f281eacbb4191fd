//! Domain types shared by the parser, engine, catalogue and report layers.
//!
//! Scalar domains are newtypes with checked constructors. Trees keep raw leaf
//! inputs so that a parsed-but-invalid tree can still be inspected and
//! reported on by [`validate_tree`].

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalogue::{ControlLibrary, ThreatCatalogue};

/// Permitted leaf skill levels, low to very high.
pub const SKILL_LEVELS: [f64; 4] = [0.25, 0.5, 1.0, 1.25];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("leaf cost {0} not in {{1, 2, 3}}")]
    LeafCost(f64),
    #[error("aggregate cost {0} is negative or not finite")]
    AggregateCost(f64),
    #[error("impact {0} outside [0, 10]")]
    Impact(f64),
    #[error("leaf impact {0} is not an integer in [1, 10]")]
    LeafImpact(f64),
    #[error("skill {0} not in {{0.25, 0.5, 1, 1.25}}")]
    Skill(f64),
    #[error("control value {0} outside [0, 1]")]
    ControlValue(f64),
    #[error("control cost {0} not in {{1, 2, 3}}")]
    ControlCost(f64),
    #[error("effectiveness {0} outside [0, 1]")]
    Effectiveness(f64),
    #[error("impact control has no effectiveness")]
    MissingEffectiveness,
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(DomainError::Probability(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LeafCost(u8);

impl LeafCost {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        match value {
            1.0 => Ok(Self(1)),
            2.0 => Ok(Self(2)),
            3.0 => Ok(Self(3)),
            v => Err(DomainError::LeafCost(v)),
        }
    }

    pub fn value(self) -> f64 {
        f64::from(self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AggregateCost(f64);

impl AggregateCost {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(DomainError::AggregateCost(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Impact(f64);

impl Impact {
    /// Any severity in `[0, 10]`, as produced by propagation.
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if (0.0..=10.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(DomainError::Impact(value))
        }
    }

    /// Leaf severities are whole numbers from 1 to 10.
    pub fn leaf(value: f64) -> Result<Self, DomainError> {
        if (1.0..=10.0).contains(&value) && value.fract() == 0.0 {
            Ok(Self(value))
        } else {
            Err(DomainError::LeafImpact(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Skill(f64);

impl Skill {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if SKILL_LEVELS.contains(&value) {
            Ok(Self(value))
        } else {
            Err(DomainError::Skill(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProbabilityBand {
    Unlikely,
    Low,
    Medium,
    High,
    Certain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImpactBand {
    Minor,
    Moderate,
    Severe,
    Catastrophic,
}

impl fmt::Display for ProbabilityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for ImpactBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Declared attack attributes of a leaf, unchecked until validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafAttrs {
    pub probability: f64,
    pub cost: f64,
    pub impact: f64,
    pub skill: f64,
}

impl LeafAttrs {
    /// Checked constructor; the first out-of-domain value is reported.
    pub fn new(probability: f64, cost: f64, impact: f64, skill: f64) -> Result<Self, DomainError> {
        let attrs = Self { probability, cost, impact, skill };
        match attrs.domain_errors().into_iter().next() {
            Some((_, err)) => Err(err),
            None => Ok(attrs),
        }
    }

    pub(crate) fn domain_errors(&self) -> Vec<(Rule, DomainError)> {
        let mut out = Vec::new();
        if let Err(e) = Probability::new(self.probability) {
            out.push((Rule::ProbabilityDomain, e));
        }
        if let Err(e) = LeafCost::new(self.cost) {
            out.push((Rule::LeafCostDomain, e));
        }
        if let Err(e) = Impact::leaf(self.impact) {
            out.push((Rule::ImpactDomain, e));
        }
        if let Err(e) = Skill::new(self.skill) {
            out.push((Rule::SkillDomain, e));
        }
        out
    }
}

/// Evaluated attributes of one node in one evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeAttrs {
    pub probability: f64,
    pub cost: f64,
    pub impact: f64,
    pub skill: f64,
    pub risk: f64,
}

impl NodeAttrs {
    /// Builds the bundle and derives risk from the other four attributes.
    pub fn new(probability: f64, cost: f64, impact: f64, skill: f64) -> Self {
        Self {
            probability,
            cost,
            impact,
            skill,
            risk: risk(probability, cost, impact, skill),
        }
    }

    pub fn from_leaf(attrs: &LeafAttrs) -> Self {
        Self::new(attrs.probability, attrs.cost, attrs.impact, attrs.skill)
    }

    /// True when the stored risk matches a fresh derivation to within 1e-12.
    pub fn risk_consistent(&self) -> bool {
        (risk(self.probability, self.cost, self.impact, self.skill) - self.risk).abs() <= 1e-12
    }
}

/// Exposure ratio: probability times skill times impact, over cost.
///
/// Costs are at least 1 in any validated tree; a zero cost yields zero risk.
pub fn risk(probability: f64, cost: f64, impact: f64, skill: f64) -> f64 {
    if cost > 0.0 {
        probability * skill * impact / cost
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlKind {
    #[serde(rename = "Probability")]
    ProbabilityControl,
    #[serde(rename = "Impact")]
    ImpactControl,
}

impl ControlKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ControlKind::ProbabilityControl => "Probability",
            ControlKind::ImpactControl => "Impact",
        }
    }
}

impl FromStr for ControlKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Probability" => Ok(ControlKind::ProbabilityControl),
            "Impact" => Ok(ControlKind::ImpactControl),
            other => Err(format!("unknown control type `{other}`")),
        }
    }
}

/// A catalogued security/privacy control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Countermeasure {
    pub code: String,
    pub name: String,
    pub kind: ControlKind,
    pub value: f64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effectiveness: Option<f64>,
    /// Final value as written in the source, if any. Only checked by lint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_final: Option<f64>,
    #[serde(default)]
    pub iso_sections: Vec<String>,
    #[serde(default)]
    pub gdpr_articles: Vec<String>,
}

impl Countermeasure {
    /// Checked constructor for a probability control.
    pub fn probability(code: &str, name: &str, value: f64, cost: f64) -> Result<Self, DomainError> {
        let cm = Self {
            code: code.to_string(),
            name: name.to_string(),
            kind: ControlKind::ProbabilityControl,
            value,
            cost,
            effectiveness: None,
            declared_final: None,
            iso_sections: Vec::new(),
            gdpr_articles: Vec::new(),
        };
        cm.check()?;
        Ok(cm)
    }

    /// Checked constructor for an impact control.
    pub fn impact(
        code: &str,
        name: &str,
        value: f64,
        cost: f64,
        effectiveness: f64,
    ) -> Result<Self, DomainError> {
        let cm = Self {
            kind: ControlKind::ImpactControl,
            effectiveness: Some(effectiveness),
            ..Self::probability(code, name, value, cost)?
        };
        cm.check()?;
        Ok(cm)
    }

    pub fn check(&self) -> Result<(), DomainError> {
        match self.domain_errors().into_iter().next() {
            Some((_, e)) => Err(e),
            None => Ok(()),
        }
    }

    pub(crate) fn domain_errors(&self) -> Vec<(Rule, DomainError)> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.value) {
            out.push((Rule::ControlValueDomain, DomainError::ControlValue(self.value)));
        }
        if LeafCost::new(self.cost).is_err() {
            out.push((Rule::ControlCostDomain, DomainError::ControlCost(self.cost)));
        }
        match (self.kind, self.effectiveness) {
            (ControlKind::ImpactControl, None) => {
                out.push((Rule::EffectivenessMissing, DomainError::MissingEffectiveness))
            }
            (_, Some(e)) if !(0.0..=1.0).contains(&e) => {
                out.push((Rule::EffectivenessDomain, DomainError::Effectiveness(e)))
            }
            _ => {}
        }
        out
    }

    /// Declared value divided by deployment cost, clamped into `[0, 1]`.
    pub fn final_value(&self) -> f64 {
        if self.cost > 0.0 {
            (self.value / self.cost).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stride {
    Spoofing,
    Tampering,
    Repudiation,
    InformationDisclosure,
    DenialOfService,
    ElevationOfPrivilege,
}

impl Stride {
    pub const ALL: [Stride; 6] = [
        Stride::Spoofing,
        Stride::Tampering,
        Stride::Repudiation,
        Stride::InformationDisclosure,
        Stride::DenialOfService,
        Stride::ElevationOfPrivilege,
    ];
}

impl fmt::Display for Stride {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Stride {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stride::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| format!("unknown STRIDE category `{s}`"))
    }
}

/// A threat catalogue row. Rows known only by code carry no STRIDE category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThreatEntry {
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<Stride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vulnerability: Option<String>,
}

impl ThreatEntry {
    pub fn stub(code: &str) -> Self {
        Self {
            code: code.to_string(),
            description: None,
            asset: None,
            stride: None,
            vulnerability: None,
        }
    }

    pub fn is_stub(&self) -> bool {
        self.description.is_none() && self.stride.is_none()
    }

    pub fn description_or_placeholder(&self) -> &str {
        self.description.as_deref().unwrap_or("description unavailable")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gate {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Leaf,
    And,
    Or,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Leaf => "LEAF",
            NodeKind::And => "AND",
            NodeKind::Or => "OR",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub attrs: LeafAttrs,
    pub threat: Option<String>,
    pub countermeasure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeBody {
    Leaf(Leaf),
    Gate { gate: Gate, children: Vec<AdNode> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdNode {
    pub id: String,
    pub label: String,
    pub body: NodeBody,
}

impl AdNode {
    pub fn leaf(id: &str, label: &str, attrs: LeafAttrs) -> Self {
        Self {
            id: id.to_string(),
            label: label.to_string(),
            body: NodeBody::Leaf(Leaf {
                attrs,
                threat: None,
                countermeasure: None,
            }),
        }
    }

    pub fn gate(gate: Gate, id: &str, label: &str, children: Vec<AdNode>) -> Self {
        Self {
            id: id.to_string(),
            label: label.to_string(),
            body: NodeBody::Gate { gate, children },
        }
    }

    pub fn with_threat(mut self, code: &str) -> Self {
        if let NodeBody::Leaf(leaf) = &mut self.body {
            leaf.threat = Some(code.to_string());
        }
        self
    }

    pub fn with_countermeasure(mut self, code: &str) -> Self {
        if let NodeBody::Leaf(leaf) = &mut self.body {
            leaf.countermeasure = Some(code.to_string());
        }
        self
    }

    pub fn kind(&self) -> NodeKind {
        match &self.body {
            NodeBody::Leaf(_) => NodeKind::Leaf,
            NodeBody::Gate { gate: Gate::And, .. } => NodeKind::And,
            NodeBody::Gate { gate: Gate::Or, .. } => NodeKind::Or,
        }
    }

    pub fn children(&self) -> &[AdNode] {
        match &self.body {
            NodeBody::Leaf(_) => &[],
            NodeBody::Gate { children, .. } => children,
        }
    }

    pub fn as_leaf(&self) -> Option<&Leaf> {
        match &self.body {
            NodeBody::Leaf(leaf) => Some(leaf),
            NodeBody::Gate { .. } => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.body, NodeBody::Leaf(_))
    }

    /// Children before parents, siblings left to right.
    pub fn post_order(&self) -> Vec<&AdNode> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a AdNode, out: &mut Vec<&'a AdNode>) {
            for child in node.children() {
                walk(child, out);
            }
            out.push(node);
        }
        walk(self, &mut out);
        out
    }

    pub fn leaves(&self) -> Vec<&AdNode> {
        self.post_order().into_iter().filter(|n| n.is_leaf()).collect()
    }

    /// Leaves have height 0.
    pub fn height(&self) -> usize {
        self.children()
            .iter()
            .map(|c| c.height() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn find(&self, id: &str) -> Option<&AdNode> {
        if self.id == id {
            return Some(self);
        }
        self.children().iter().find_map(|c| c.find(id))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdTree {
    pub name: String,
    pub root: AdNode,
    pub threats: ThreatCatalogue,
    pub controls: ControlLibrary,
}

impl AdTree {
    pub fn new(name: &str, root: AdNode) -> Self {
        Self {
            name: name.to_string(),
            root,
            threats: ThreatCatalogue::default(),
            controls: ControlLibrary::default(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.root.post_order().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMode {
    Inherent,
    Residual,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Inherent => "inherent",
            EvalMode::Residual => "residual",
        })
    }
}

/// One node's inherent and residual attributes side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub node_id: String,
    pub kind: NodeKind,
    pub is_root: bool,
    pub threat_code: Option<String>,
    pub inherent: NodeAttrs,
    pub control_code: Option<String>,
    pub control_final_value: Option<f64>,
    pub residual: NodeAttrs,
    pub reduction_percent: f64,
}

/// Relative drop from inherent to residual risk, in percent. Zero when
/// there was no inherent risk to reduce.
pub fn reduction_percent(inherent_risk: f64, residual_risk: f64) -> f64 {
    if inherent_risk > 0.0 {
        100.0 * (inherent_risk - residual_risk) / inherent_risk
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Warning,
    Error,
}

/// Names of the checks performed by tree validation and catalogue lint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Rule {
    ProbabilityDomain,
    LeafCostDomain,
    ImpactDomain,
    SkillDomain,
    EmptyGate,
    DuplicateId,
    UnknownThreat,
    UnknownControl,
    ControlValueDomain,
    ControlCostDomain,
    EffectivenessMissing,
    EffectivenessDomain,
    FinalValueMismatch,
    MissingIsoReference,
    MissingGdprReference,
}

impl Rule {
    /// The source attribute a violation of this rule points at, if any.
    pub fn field(self) -> Option<Field> {
        Some(match self {
            Rule::ProbabilityDomain => Field::Probability,
            Rule::LeafCostDomain | Rule::ControlCostDomain => Field::Cost,
            Rule::ImpactDomain => Field::Impact,
            Rule::SkillDomain => Field::Skill,
            Rule::UnknownThreat => Field::Threat,
            Rule::UnknownControl => Field::Countermeasure,
            Rule::ControlValueDomain => Field::Value,
            Rule::EffectivenessDomain => Field::Effectiveness,
            Rule::FinalValueMismatch => Field::FinalValue,
            Rule::EmptyGate
            | Rule::DuplicateId
            | Rule::EffectivenessMissing
            | Rule::MissingIsoReference
            | Rule::MissingGdprReference => return None,
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Attributes that can be located in source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Probability,
    Cost,
    Impact,
    Skill,
    Threat,
    Countermeasure,
    Value,
    Effectiveness,
    FinalValue,
}

/// A broken invariant. `node_id` names the tree node, or the catalogue code
/// for control-library findings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub node_id: String,
    pub rule: Rule,
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    pub fn error(node_id: &str, rule: Rule, message: impl Into<String>) -> Self {
        Self {
            node_id: node_id.to_string(),
            rule,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(node_id: &str, rule: Rule, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            ..Self::error(node_id, rule, message)
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.node_id, self.rule, self.message)
    }
}

/// Checks every structural and value-domain invariant of a parsed tree.
/// An empty result means the tree can be evaluated.
pub fn validate_tree(tree: &AdTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();

    for node in tree.root.post_order() {
        if !seen.insert(node.id.as_str()) {
            out.push(Violation::error(
                &node.id,
                Rule::DuplicateId,
                format!("node id `{}` is used more than once", node.id),
            ));
        }
        match &node.body {
            NodeBody::Gate { children, gate } if children.is_empty() => {
                out.push(Violation::error(
                    &node.id,
                    Rule::EmptyGate,
                    format!("{gate:?} gate has no children"),
                ));
            }
            NodeBody::Gate { .. } => {}
            NodeBody::Leaf(leaf) => {
                for (rule, err) in leaf.attrs.domain_errors() {
                    out.push(Violation::error(&node.id, rule, err.to_string()));
                }
                if let Some(code) = &leaf.threat {
                    if tree.threats.get(code).is_none() {
                        out.push(Violation::error(
                            &node.id,
                            Rule::UnknownThreat,
                            format!("threat `{code}` is not in the threat catalogue"),
                        ));
                    }
                }
                if let Some(code) = &leaf.countermeasure {
                    if tree.controls.get(code).is_none() {
                        out.push(Violation::error(
                            &node.id,
                            Rule::UnknownControl,
                            format!("control `{code}` is not in the control library"),
                        ));
                    }
                }
            }
        }
    }

    for cm in tree.controls.iter() {
        for (rule, err) in cm.domain_errors() {
            out.push(Violation::error(&cm.code, rule, err.to_string()));
        }
    }
    out
}

/// True when `violations` contains anything that blocks evaluation.
pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}
