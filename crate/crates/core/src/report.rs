//! Markdown, CSV and JSON renderings of evaluation results.
//!
//! Attribute cells are rounded half-up and printed without trailing zeros
//! (`1`, `0.5`, `0.42`); risk cells keep exactly `decimals` digits (`3.90`);
//! reductions are printed with one decimal and a `%` sign.

use std::fmt;
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::engine::{classify_impact, classify_probability, report_order, EvaluatedTree};
use crate::model::{ComparisonRow, Impact, NodeAttrs, NodeKind, Probability};
use crate::numeric::{format_fixed, format_trimmed};

pub const MAX_DECIMALS: u32 = 6;

/// Root reductions below this percentage flag a persistent threat.
pub const DEFAULT_PERSISTENCE_THRESHOLD: f64 = 10.0;

/// Header row of the comparison table.
pub const COMPARISON_COLUMNS: [&str; 15] = [
    "Threat Code",
    "Node",
    "Cost",
    "Impact",
    "Skill",
    "Probability",
    "Inherent Risk",
    "Control Code",
    "Value",
    "Cost",
    "Impact",
    "Skill",
    "Probability",
    "Residual Risk",
    "% Reduction",
];

pub const NODE_COLUMNS: [&str; 9] = [
    "Node",
    "Kind",
    "Threat Code",
    "Control Code",
    "Cost",
    "Impact",
    "Skill",
    "Probability",
    "Risk",
];

const MISSING: &str = "-";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error("decimals must be between 0 and {MAX_DECIMALS}, got {0}")]
    DecimalsOutOfRange(u32),
    #[error("no root row to summarise")]
    MissingRoot,
    #[error("unknown format `{0}` (expected md, csv or json)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Markdown,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(ReportError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Markdown => "md",
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub format: Format,
    decimals: u32,
    /// Adds probability and impact band columns.
    pub include_bands: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            format: Format::Markdown,
            decimals: 2,
            include_bands: false,
        }
    }
}

impl ReportOptions {
    pub fn new(format: Format, decimals: u32, include_bands: bool) -> Result<Self, ReportError> {
        Self {
            format,
            include_bands,
            ..Self::default()
        }
        .with_decimals(decimals)
    }

    pub fn with_decimals(mut self, decimals: u32) -> Result<Self, ReportError> {
        if decimals > MAX_DECIMALS {
            return Err(ReportError::DecimalsOutOfRange(decimals));
        }
        self.decimals = decimals;
        Ok(self)
    }

    pub fn decimals(&self) -> u32 {
        self.decimals
    }
}

/// Headline findings over a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub max_leaf_reduction: f64,
    /// Every leaf reaching the maximum, in row order.
    pub max_leaf_nodes: Vec<String>,
    pub root_node: String,
    pub root_reduction: f64,
    pub persistent_threat: bool,
    pub threshold: f64,
}

pub fn summarize(rows: &[ComparisonRow]) -> Result<Summary, ReportError> {
    summarize_with_threshold(rows, DEFAULT_PERSISTENCE_THRESHOLD)
}

pub fn summarize_with_threshold(rows: &[ComparisonRow], threshold: f64) -> Result<Summary, ReportError> {
    let root = rows.iter().find(|r| r.is_root).ok_or(ReportError::MissingRoot)?;
    let leaves: Vec<&ComparisonRow> = rows.iter().filter(|r| r.kind == NodeKind::Leaf).collect();
    let max = leaves
        .iter()
        .map(|r| r.reduction_percent)
        .fold(f64::NEG_INFINITY, f64::max);
    let max = if max.is_finite() { max } else { 0.0 };
    let max_leaf_nodes = leaves
        .iter()
        .filter(|r| (r.reduction_percent - max).abs() <= 1e-9)
        .map(|r| r.node_id.clone())
        .collect();
    Ok(Summary {
        max_leaf_reduction: max,
        max_leaf_nodes,
        root_node: root.node_id.clone(),
        root_reduction: root.reduction_percent,
        persistent_threat: root.reduction_percent < threshold,
        threshold,
    })
}

fn percent(v: f64) -> String {
    format!("{}%", format_fixed(v, 1))
}

/// Plain-text summary lines, as appended to Markdown reports.
pub fn summary_lines(s: &Summary) -> Vec<String> {
    let leaves = if s.max_leaf_nodes.is_empty() {
        String::new()
    } else {
        format!(" ({})", s.max_leaf_nodes.join(", "))
    };
    vec![
        format!("Maximum leaf reduction: {}{leaves}", percent(s.max_leaf_reduction)),
        format!("Root reduction: {} ({})", percent(s.root_reduction), s.root_node),
        format!(
            "Persistent threat: {} (threshold {})",
            if s.persistent_threat { "yes" } else { "no" },
            percent(s.threshold)
        ),
    ]
}

fn summary_json(s: &Summary) -> Value {
    json!({
        "max_leaf_reduction": s.max_leaf_reduction,
        "max_leaf_nodes": s.max_leaf_nodes,
        "root_node": s.root_node,
        "root_reduction": s.root_reduction,
        "persistent_threat": s.persistent_threat,
        "threshold": s.threshold,
        "display": {
            "max_leaf_reduction": percent(s.max_leaf_reduction),
            "root_reduction": percent(s.root_reduction),
        },
    })
}

fn probability_band(p: f64) -> String {
    Probability::new(p).map_or_else(|_| MISSING.to_string(), |p| classify_probability(p).to_string())
}

fn impact_band(i: f64) -> String {
    Impact::new(i).map_or_else(|_| MISSING.to_string(), |i| classify_impact(i).to_string())
}

struct Cells {
    /// Display strings keyed for JSON, in column order.
    keyed: Vec<(&'static str, String)>,
}

impl Cells {
    fn values(&self) -> Vec<String> {
        self.keyed.iter().map(|(_, v)| v.clone()).collect()
    }

    fn display(&self) -> Value {
        Value::Object(
            self.keyed
                .iter()
                .map(|(k, v)| (k.to_string(), Value::String(v.clone())))
                .collect::<Map<_, _>>(),
        )
    }
}

fn attr_cells(prefix: &'static [&'static str; 5], a: &NodeAttrs, d: u32) -> [(&'static str, String); 5] {
    [
        (prefix[0], format_trimmed(a.cost, d)),
        (prefix[1], format_trimmed(a.impact, d)),
        (prefix[2], format_trimmed(a.skill, d)),
        (prefix[3], format_trimmed(a.probability, d)),
        (prefix[4], format_fixed(a.risk, d)),
    ]
}

const INHERENT_KEYS: [&str; 5] = [
    "inherent_cost",
    "inherent_impact",
    "inherent_skill",
    "inherent_probability",
    "inherent_risk",
];
const RESIDUAL_KEYS: [&str; 5] = [
    "residual_cost",
    "residual_impact",
    "residual_skill",
    "residual_probability",
    "residual_risk",
];
const NODE_KEYS: [&str; 5] = ["cost", "impact", "skill", "probability", "risk"];

fn comparison_cells(row: &ComparisonRow, opts: &ReportOptions) -> Cells {
    let d = opts.decimals;
    let or_missing = |s: &Option<String>| s.clone().unwrap_or_else(|| MISSING.to_string());
    let mut keyed = vec![
        ("threat_code", or_missing(&row.threat_code)),
        ("node", row.node_id.clone()),
    ];
    keyed.extend(attr_cells(&INHERENT_KEYS, &row.inherent, d));
    keyed.push(("control_code", or_missing(&row.control_code)));
    keyed.push((
        "control_value",
        row.control_final_value
            .map_or_else(|| MISSING.to_string(), |v| format_trimmed(v, d)),
    ));
    keyed.extend(attr_cells(&RESIDUAL_KEYS, &row.residual, d));
    keyed.push(("reduction", percent(row.reduction_percent)));
    if opts.include_bands {
        keyed.extend([
            ("inherent_probability_band", probability_band(row.inherent.probability)),
            ("inherent_impact_band", impact_band(row.inherent.impact)),
            ("residual_probability_band", probability_band(row.residual.probability)),
            ("residual_impact_band", impact_band(row.residual.impact)),
        ]);
    }
    Cells { keyed }
}

fn comparison_header(opts: &ReportOptions) -> Vec<String> {
    let mut h: Vec<String> = COMPARISON_COLUMNS.iter().map(|s| s.to_string()).collect();
    if opts.include_bands {
        h.extend(
            [
                "Inherent Probability Band",
                "Inherent Impact Band",
                "Residual Probability Band",
                "Residual Impact Band",
            ]
            .map(String::from),
        );
    }
    h
}

/// Renders the inherent-versus-residual comparison table. An empty row list
/// yields a header-only document.
pub fn render(rows: &[ComparisonRow], opts: &ReportOptions) -> String {
    render_with_summary(rows, None, opts)
}

/// Like [`render`], with a summary block. Markdown gains a section, JSON a
/// `summary` member; CSV stays a plain table.
pub fn render_with_summary(rows: &[ComparisonRow], summary: Option<&Summary>, opts: &ReportOptions) -> String {
    let header = comparison_header(opts);
    let cells: Vec<Cells> = rows.iter().map(|r| comparison_cells(r, opts)).collect();
    match opts.format {
        Format::Markdown => {
            let mut out = markdown_table(&header, &cells);
            if let Some(s) = summary {
                out.push_str("\n## Summary\n\n");
                for line in summary_lines(s) {
                    out.push_str(&format!("- {line}\n"));
                }
            }
            out
        }
        Format::Csv => csv_table(&header, &cells),
        Format::Json => {
            let rows_json: Vec<Value> = rows
                .iter()
                .zip(&cells)
                .map(|(row, c)| {
                    let mut v = serde_json::to_value(row).expect("rows serialize");
                    v["display"] = c.display();
                    v
                })
                .collect();
            let mut doc = json!({ "mode": "both", "rows": rows_json });
            if let Some(s) = summary {
                doc["summary"] = summary_json(s);
            }
            pretty(&doc)
        }
    }
}

/// Per-node attribute table for a single evaluation mode, in comparison-row
/// order.
pub fn render_nodes(eval: &EvaluatedTree<'_>, opts: &ReportOptions) -> String {
    let d = opts.decimals;
    let mut header: Vec<String> = NODE_COLUMNS.iter().map(|s| s.to_string()).collect();
    if opts.include_bands {
        header.extend(["Probability Band", "Impact Band"].map(String::from));
    }
    let nodes = report_order(&eval.tree.root);
    let mut cells = Vec::with_capacity(nodes.len());
    let mut objects = Vec::with_capacity(nodes.len());
    for node in nodes {
        let a = eval.get(&node.id).expect("evaluated tree covers every node");
        let leaf = node.as_leaf();
        let threat = leaf.and_then(|l| l.threat.clone());
        let control = leaf.and_then(|l| l.countermeasure.clone());
        let mut keyed = vec![
            ("node", node.id.clone()),
            ("kind", node.kind().to_string()),
            ("threat_code", threat.clone().unwrap_or_else(|| MISSING.to_string())),
            ("control_code", control.clone().unwrap_or_else(|| MISSING.to_string())),
        ];
        keyed.extend(attr_cells(&NODE_KEYS, a, d));
        if opts.include_bands {
            keyed.push(("probability_band", probability_band(a.probability)));
            keyed.push(("impact_band", impact_band(a.impact)));
        }
        let c = Cells { keyed };
        if opts.format == Format::Json {
            objects.push(json!({
                "node_id": node.id,
                "kind": node.kind(),
                "threat_code": threat,
                "control_code": control,
                "attrs": a,
                "display": c.display(),
            }));
        }
        cells.push(c);
    }
    match opts.format {
        Format::Markdown => markdown_table(&header, &cells),
        Format::Csv => csv_table(&header, &cells),
        Format::Json => pretty(&json!({ "mode": eval.mode.to_string(), "nodes": objects })),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn md_escape(cell: &str) -> String {
    cell.replace('|', "\\|")
}

fn markdown_table(header: &[String], rows: &[Cells]) -> String {
    let line = |cells: Vec<String>| format!("| {} |\n", cells.join(" | "));
    let mut out = line(header.iter().map(|h| md_escape(h)).collect());
    out.push_str(&line(header.iter().map(|_| "---".to_string()).collect()));
    for r in rows {
        out.push_str(&line(r.values().iter().map(|c| md_escape(c)).collect()));
    }
    out
}

fn csv_table(header: &[String], rows: &[Cells]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for r in rows {
        w.write_record(r.values()).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("cells are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdNode, AdTree, LeafAttrs};
    use crate::engine::{assess, EvalOptions};

    fn row(id: &str, kind: NodeKind, is_root: bool, inh: NodeAttrs, res: NodeAttrs) -> ComparisonRow {
        ComparisonRow {
            node_id: id.into(),
            kind,
            is_root,
            threat_code: None,
            inherent: inh,
            control_code: None,
            control_final_value: None,
            residual: res,
            reduction_percent: crate::model::reduction_percent(inh.risk, res.risk),
        }
    }

    fn b1() -> ComparisonRow {
        ComparisonRow {
            threat_code: Some("B1".into()),
            control_code: Some("C3".into()),
            control_final_value: Some(0.4),
            ..row(
                "H_A.1.1",
                NodeKind::Leaf,
                false,
                NodeAttrs::new(0.7, 1.0, 7.0, 0.5),
                NodeAttrs::new(0.42, 1.0, 7.0, 0.5),
            )
        }
    }

    #[test]
    fn markdown_row_layout() {
        let md = render(&[b1()], &ReportOptions::default());
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "| Threat Code | Node | Cost | Impact | Skill | Probability | Inherent Risk | Control Code | Value | Cost | Impact | Skill | Probability | Residual Risk | % Reduction |"
        );
        assert_eq!(lines[2], "| B1 | H_A.1.1 | 1 | 7 | 0.5 | 0.7 | 2.45 | C3 | 0.4 | 1 | 7 | 0.5 | 0.42 | 1.47 | 40.0% |");
    }

    #[test]
    fn risk_keeps_trailing_zeros() {
        let r = row(
            "O_T",
            NodeKind::Or,
            true,
            NodeAttrs { risk: 3.98305085, ..NodeAttrs::new(1.0, 1.0, 1.0, 1.0) },
            NodeAttrs { risk: 3.90339, ..NodeAttrs::new(1.0, 1.0, 1.0, 1.0) },
        );
        let r = ComparisonRow { reduction_percent: 2.0, ..r };
        let md = render(&[r], &ReportOptions::default());
        assert!(md.contains("| 3.98 | - | - |"), "{md}");
        assert!(md.contains("| 3.90 | 2.0% |"), "{md}");
    }

    #[test]
    fn empty_rows_give_header_only() {
        let md = render(&[], &ReportOptions::default());
        assert_eq!(md.lines().count(), 2);
        let csv = render(&[], &ReportOptions::new(Format::Csv, 2, false).unwrap());
        assert_eq!(csv.matches("\r\n").count(), 1);
        let json = render(&[], &ReportOptions::new(Format::Json, 2, false).unwrap());
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["rows"], json!([]));
    }

    #[test]
    fn decimals_are_bounded() {
        assert!(ReportOptions::new(Format::Csv, 6, false).is_ok());
        assert_eq!(
            ReportOptions::new(Format::Csv, 7, false),
            Err(ReportError::DecimalsOutOfRange(7))
        );
    }

    #[test]
    fn csv_quotes_and_crlf() {
        let r = ComparisonRow { node_id: "a,\"b\"".into(), ..b1() };
        let csv = render(&[r], &ReportOptions::new(Format::Csv, 2, false).unwrap());
        assert!(csv.ends_with("40.0%\r\n"));
        assert!(csv.contains("B1,\"a,\"\"b\"\"\",1,7"));
    }

    #[test]
    fn bands_add_columns() {
        let opts = ReportOptions::new(Format::Csv, 2, true).unwrap();
        let csv = render(&[b1()], &opts);
        let data = csv.lines().nth(1).unwrap();
        assert!(data.ends_with(",Medium,Severe,Medium,Severe"), "{data}");
    }

    #[test]
    fn json_carries_full_precision_and_display() {
        let opts = ReportOptions::new(Format::Json, 2, false).unwrap();
        let v: Value = serde_json::from_str(&render(&[b1()], &opts)).unwrap();
        let r = &v["rows"][0];
        assert_eq!(r["inherent"]["risk"].as_f64().unwrap(), 0.7 * 0.5 * 7.0);
        assert_eq!(r["display"]["inherent_risk"], "2.45");
        assert_eq!(r["display"]["reduction"], "40.0%");
    }

    fn single_leaf(control: bool) -> AdTree {
        let node = AdNode::leaf("H", "x", LeafAttrs { probability: 0.5, cost: 1.0, impact: 5.0, skill: 0.5 });
        let mut tree = AdTree::new("t", if control { node.with_countermeasure("C4") } else { node });
        if control {
            tree.controls
                .insert(crate::model::Countermeasure::probability("C4", "c", 0.8, 1.0).unwrap())
                .unwrap();
        }
        tree
    }

    #[test]
    fn summary_of_uncontrolled_leaf() {
        let rows = assess(&single_leaf(false), EvalOptions::default()).unwrap();
        let s = summarize(&rows).unwrap();
        assert_eq!(s.max_leaf_reduction, 0.0);
        assert_eq!(s.root_reduction, 0.0);
        assert!(s.persistent_threat);
    }

    #[test]
    fn summary_of_single_controlled_leaf() {
        let rows = assess(&single_leaf(true), EvalOptions::default()).unwrap();
        let s = summarize(&rows).unwrap();
        assert_eq!(s.root_reduction, s.max_leaf_reduction);
        assert!((s.root_reduction - 80.0).abs() < 1e-9);
        assert!(!s.persistent_threat);
        assert!(summarize_with_threshold(&rows, 90.0).unwrap().persistent_threat);
    }

    #[test]
    fn summary_needs_root() {
        assert_eq!(summarize(&[b1()]), Err(ReportError::MissingRoot));
    }

    #[test]
    fn node_table_json_has_one_object_per_node() {
        let tree = single_leaf(false);
        let eval = crate::engine::evaluate(&tree, crate::model::EvalMode::Inherent).unwrap();
        let opts = ReportOptions::new(Format::Json, 2, false).unwrap();
        let v: Value = serde_json::from_str(&render_nodes(&eval, &opts)).unwrap();
        assert_eq!(v["mode"], "inherent");
        assert_eq!(v["nodes"].as_array().unwrap().len(), 1);
        assert_eq!(v["nodes"][0]["display"]["risk"], "1.25");
    }

    #[test]
    fn format_names() {
        assert_eq!("md".parse::<Format>().unwrap(), Format::Markdown);
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert!("xml".parse::<Format>().is_err());
    }
}
