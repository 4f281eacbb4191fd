use std::fmt::Write;

use crate::catalogue::Catalogues;
use crate::model::{AdNode, AdTree, Gate, NodeBody};

const INDENT: &str = "  ";

/// Shortest decimal text that reads back to the same `f64`. Values parsed
/// from `.adt` source (at most six fractional digits) stay within that limit.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Canonical text form: two-space indent, one attribute line per leaf or
/// catalogue entry, LF line endings.
pub fn serialize_tree(tree: &AdTree) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tree {} {{", quote(&tree.name));
    write_node(&mut out, &tree.root, 1);
    out.push_str("}\n");
    out.push_str(&serialize_catalogues(&Catalogues {
        controls: tree.controls.clone(),
        threats: tree.threats.clone(),
    }));
    out
}

fn write_node(out: &mut String, node: &AdNode, depth: usize) {
    let pad = INDENT.repeat(depth);
    match &node.body {
        NodeBody::Gate { gate, children } => {
            let kw = match gate {
                Gate::And => "and",
                Gate::Or => "or",
            };
            let _ = writeln!(out, "{pad}{kw} {} {} {{", node.id, quote(&node.label));
            for child in children {
                write_node(out, child, depth + 1);
            }
        }
        NodeBody::Leaf(leaf) => {
            let _ = writeln!(out, "{pad}leaf {} {} {{", node.id, quote(&node.label));
            let a = &leaf.attrs;
            let mut line = format!(
                "prob {} cost {} impact {} skill {}",
                format_number(a.probability),
                format_number(a.cost),
                format_number(a.impact),
                format_number(a.skill)
            );
            if let Some(t) = &leaf.threat {
                let _ = write!(line, " threat {t}");
            }
            if let Some(c) = &leaf.countermeasure {
                let _ = write!(line, " counter {c}");
            }
            let _ = writeln!(out, "{pad}{INDENT}{line}");
        }
    }
    let _ = writeln!(out, "{pad}}}");
}

/// Catalogue blocks; empty catalogues are omitted.
pub fn serialize_catalogues(cats: &Catalogues) -> String {
    let mut out = String::new();
    if !cats.controls.is_empty() {
        out.push_str("controls {\n");
        for cm in cats.controls.iter() {
            let _ = writeln!(out, "{INDENT}control {} {} {{", cm.code, quote(&cm.name));
            let mut line = format!(
                "type {} value {} cost {}",
                cm.kind.keyword(),
                format_number(cm.value),
                format_number(cm.cost)
            );
            if let Some(e) = cm.effectiveness {
                let _ = write!(line, " effectiveness {}", format_number(e));
            }
            if let Some(f) = cm.declared_final {
                let _ = write!(line, " final {}", format_number(f));
            }
            if !cm.iso_sections.is_empty() {
                let _ = write!(line, " iso {}", quote(&cm.iso_sections.join(", ")));
            }
            if !cm.gdpr_articles.is_empty() {
                let _ = write!(line, " gdpr {}", quote(&cm.gdpr_articles.join(", ")));
            }
            let _ = writeln!(out, "{INDENT}{INDENT}{line}");
            let _ = writeln!(out, "{INDENT}}}");
        }
        out.push_str("}\n");
    }
    if !cats.threats.is_empty() {
        out.push_str("threats {\n");
        for t in cats.threats.iter() {
            let _ = writeln!(out, "{INDENT}threat-entry {} {{", t.code);
            let mut parts = Vec::new();
            if let Some(s) = t.stride {
                parts.push(format!("stride {s}"));
            }
            if let Some(a) = &t.asset {
                parts.push(format!("asset {}", quote(a)));
            }
            if let Some(d) = &t.description {
                parts.push(format!("desc {}", quote(d)));
            }
            if let Some(v) = &t.vulnerability {
                parts.push(format!("vuln {}", quote(v)));
            }
            if !parts.is_empty() {
                let _ = writeln!(out, "{INDENT}{INDENT}{}", parts.join(" "));
            }
            let _ = writeln!(out, "{INDENT}}}");
        }
        out.push_str("}\n");
    }
    out
}
