//! JSON interchange form. Numbers are written with full precision, and
//! schema errors name the offending location as a JSON pointer.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AdNode, AdTree, Countermeasure, Gate, Leaf, LeafAttrs, NodeBody, ThreatEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at {}: {message}", if .pointer.is_empty() { "document root" } else { .pointer.as_str() })]
pub struct JsonError {
    /// JSON pointer; empty for the document root.
    pub pointer: String,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    name: String,
    root: NodeDoc,
    #[serde(default)]
    controls: Vec<Countermeasure>,
    #[serde(default)]
    threats: Vec<ThreatEntry>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "UPPERCASE")]
enum KindDoc {
    Leaf,
    And,
    Or,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: String,
    #[serde(default)]
    label: String,
    kind: KindDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<Vec<NodeDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attrs: Option<LeafAttrs>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    countermeasure: Option<String>,
}

impl NodeDoc {
    fn from_node(node: &AdNode) -> Self {
        match &node.body {
            NodeBody::Leaf(leaf) => Self {
                id: node.id.clone(),
                label: node.label.clone(),
                kind: KindDoc::Leaf,
                children: None,
                attrs: Some(leaf.attrs),
                threat: leaf.threat.clone(),
                countermeasure: leaf.countermeasure.clone(),
            },
            NodeBody::Gate { gate, children } => Self {
                id: node.id.clone(),
                label: node.label.clone(),
                kind: match gate {
                    Gate::And => KindDoc::And,
                    Gate::Or => KindDoc::Or,
                },
                children: Some(children.iter().map(Self::from_node).collect()),
                attrs: None,
                threat: None,
                countermeasure: None,
            },
        }
    }

    fn into_node(self, pointer: &str) -> Result<AdNode, JsonError> {
        let err = |field: &str, message: &str| JsonError {
            pointer: format!("{pointer}/{field}"),
            message: message.to_string(),
        };
        let body = match self.kind {
            KindDoc::Leaf => {
                if self.children.as_ref().is_some_and(|c| !c.is_empty()) {
                    return Err(err("children", "leaf nodes have no children"));
                }
                let attrs = self.attrs.ok_or_else(|| err("attrs", "leaf nodes need attrs"))?;
                NodeBody::Leaf(Leaf {
                    attrs,
                    threat: self.threat,
                    countermeasure: self.countermeasure,
                })
            }
            KindDoc::And | KindDoc::Or => {
                if self.attrs.is_some() {
                    return Err(err("attrs", "gate nodes carry no attrs"));
                }
                if self.threat.is_some() {
                    return Err(err("threat", "threat codes attach to leaves only"));
                }
                if self.countermeasure.is_some() {
                    return Err(err("countermeasure", "countermeasures attach to leaves only"));
                }
                let docs = self.children.unwrap_or_default();
                if docs.is_empty() {
                    return Err(err("children", "gate nodes need at least one child"));
                }
                let children = docs
                    .into_iter()
                    .enumerate()
                    .map(|(i, c)| c.into_node(&format!("{pointer}/children/{i}")))
                    .collect::<Result<_, _>>()?;
                let gate = if self.kind == KindDoc::And { Gate::And } else { Gate::Or };
                NodeBody::Gate { gate, children }
            }
        };
        Ok(AdNode {
            id: self.id,
            label: self.label,
            body,
        })
    }
}

pub fn to_json(tree: &AdTree) -> String {
    let doc = TreeDoc {
        name: tree.name.clone(),
        root: NodeDoc::from_node(&tree.root),
        controls: tree.controls.iter().cloned().collect(),
        threats: tree.threats.iter().cloned().collect(),
    };
    serde_json::to_string_pretty(&doc).expect("tree documents always serialize")
}

pub fn from_json(text: &str) -> Result<AdTree, JsonError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: TreeDoc = serde_path_to_error::deserialize(de).map_err(|e| JsonError {
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })?;

    let root = doc.root.into_node("/root")?;
    let mut tree = AdTree::new(&doc.name, root);
    for (i, cm) in doc.controls.into_iter().enumerate() {
        tree.controls.insert(cm).map_err(|e| JsonError {
            pointer: format!("/controls/{i}/code"),
            message: e.to_string(),
        })?;
    }
    for (i, t) in doc.threats.into_iter().enumerate() {
        tree.threats.insert(t).map_err(|e| JsonError {
            pointer: format!("/threats/{i}/code"),
            message: e.to_string(),
        })?;
    }
    Ok(tree)
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => {
                out.push('/');
                out.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_tree_file;

    #[test]
    fn case_study_round_trip() {
        let tree = parse_tree_file(include_str!("../../examples/iot_case_study.adt")).unwrap();
        let json = to_json(&tree);
        assert_eq!(from_json(&json).unwrap(), tree);
    }

    #[test]
    fn gate_without_children() {
        let err = from_json(r#"{"name":"t","root":{"id":"G","kind":"AND"}}"#).unwrap_err();
        assert_eq!(err.pointer, "/root/children");
        let err = from_json(r#"{"name":"t","root":{"id":"G","kind":"AND","children":[]}}"#).unwrap_err();
        assert_eq!(err.pointer, "/root/children");
    }

    #[test]
    fn empty_document() {
        let err = from_json("").unwrap_err();
        assert_eq!(err.pointer, "");
        assert!(err.to_string().starts_with("at document root"));
    }

    #[test]
    fn nested_schema_errors() {
        let err = from_json(
            r#"{"name":"t","root":{"id":"G","kind":"OR","children":[{"id":"H","kind":"LEAF","attrs":{"probability":"high"}}]}}"#,
        )
        .unwrap_err();
        assert_eq!(err.pointer, "/root/children/0/attrs/probability");

        let err = from_json(r#"{"name":"t","root":{"id":"G","kind":"OR","children":[{"id":"H","kind":"LEAF"}]}}"#)
            .unwrap_err();
        assert_eq!(err.pointer, "/root/children/0/attrs");

        let err = from_json(r#"{"name":"t","root":{"id":"G","kind":"XOR"}}"#).unwrap_err();
        assert_eq!(err.pointer, "/root/kind");
    }

    #[test]
    fn full_precision_numbers() {
        let mut tree = parse_tree_file(r#"tree "t" { leaf H "x" { prob 0.5 cost 1 impact 5 skill 0.5 } }"#).unwrap();
        if let NodeBody::Leaf(leaf) = &mut tree.root.body {
            leaf.attrs.probability = 0.1 + 0.2;
        }
        let back = from_json(&to_json(&tree)).unwrap();
        assert_eq!(back, tree);
    }
}
