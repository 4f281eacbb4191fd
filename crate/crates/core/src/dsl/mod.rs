//! Text and JSON forms of attack-defense trees.
//!
//! The `.adt` grammar:
//!
//! ```text
//! file          := treeDecl catalogues? ;
//! treeDecl      := "tree" STRING "{" node "}" ;
//! node          := gate | leafDecl ;
//! gate          := ("or" | "and") IDENT STRING "{" node+ "}" ;
//! leafDecl      := "leaf" IDENT STRING "{" attr* "}" ;
//! attr          := "prob" NUM | "cost" NUM | "impact" NUM | "skill" NUM
//!                | "threat" IDENT | "counter" IDENT ;
//! catalogues    := controlsBlock? threatsBlock? ;
//! controlsBlock := "controls" "{" controlDecl* "}" ;
//! controlDecl   := "control" IDENT STRING "{" "type" IDENT "value" NUM "cost" NUM
//!                  ("effectiveness" NUM)? ("final" NUM)? ("iso" STRING)? ("gdpr" STRING)? "}" ;
//! threatsBlock  := "threats" "{" threatDecl* "}" ;
//! threatDecl    := "threat-entry" IDENT "{" ("stride" IDENT)? ("asset" STRING)?
//!                  ("desc" STRING)? ("vuln" STRING)? "}" ;
//! ```
//!
//! Attributes inside a block may appear in any order but at most once.
//! `iso` and `gdpr` hold comma-separated reference lists.

mod json;
mod lexer;
mod parser;
mod serialize;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::model::{Field, Rule, Violation};

pub use json::{from_json, to_json, JsonError};
pub use lexer::{tokenize, Keyword, Token, TokenKind, MAX_FRACTION_DIGITS};
pub use parser::{
    parse_catalogue_file, parse_document, parse_document_named, parse_tree_file,
    parse_tree_file_named, Document,
};
pub use serialize::{format_number, serialize_catalogues, serialize_tree};

/// Location of a token or construct in a source file. Lines and columns
/// are 1-based; columns count characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSpan {
    pub file: Option<Arc<Path>>,
    pub line: usize,
    pub column: usize,
    /// Byte offset of the first character.
    pub offset: usize,
    /// Length in bytes.
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(file) => write!(f, "{}:{}:{}", file.display(), self.line, self.column),
            None => write!(f, "{}:{}", self.line, self.column),
        }
    }
}

/// A syntax error, or a validation finding located in source.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{span}: {}: expected {expected}, found {found}", self.rule_name())]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: String,
    pub found: String,
    /// Set when the error comes from tree validation rather than the grammar.
    pub rule: Option<Rule>,
}

impl ParseError {
    pub(crate) fn syntax(span: SourceSpan, expected: impl Into<String>, found: impl Into<String>) -> Self {
        Self {
            span,
            expected: expected.into(),
            found: found.into(),
            rule: None,
        }
    }

    pub fn rule_name(&self) -> String {
        self.rule.map_or_else(|| "syntax".to_string(), |r| r.to_string())
    }

    /// `rule: message`, without the location prefix.
    pub fn diagnostic(&self) -> String {
        format!("{}: expected {}, found {}", self.rule_name(), self.expected, self.found)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Subject {
    Node(String),
    Control(String),
    Threat(String),
}

/// Where each node, catalogue entry and attribute was declared.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    spans: HashMap<(Subject, Option<Field>), SourceSpan>,
    /// Span of the tree header, used when nothing more specific is known.
    pub(crate) fallback: Option<SourceSpan>,
}

impl SourceMap {
    pub(crate) fn record(&mut self, subject: Subject, field: Option<Field>, span: SourceSpan) {
        self.spans.entry((subject, field)).or_insert(span);
    }

    pub fn get(&self, subject: &Subject, field: Option<Field>) -> Option<&SourceSpan> {
        self.spans.get(&(subject.clone(), field))
    }

    /// Best span for a violation: the offending attribute, else the
    /// declaration of the node or control it names.
    pub fn locate(&self, v: &Violation) -> Option<&SourceSpan> {
        let field = v.rule.field();
        let candidates = [
            Subject::Node(v.node_id.clone()),
            Subject::Control(v.node_id.clone()),
            Subject::Threat(v.node_id.clone()),
        ];
        candidates
            .iter()
            .find_map(|s| field.and_then(|f| self.get(s, Some(f))))
            .or_else(|| candidates.iter().find_map(|s| self.get(s, None)))
            .or(self.fallback.as_ref())
    }
}

/// Human wording of the constraint behind each rule.
pub(crate) fn rule_expectation(rule: Rule) -> &'static str {
    match rule {
        Rule::ProbabilityDomain => "probability in [0, 1]",
        Rule::LeafCostDomain => "leaf cost in {1, 2, 3}",
        Rule::ImpactDomain => "leaf impact as a whole number in [1, 10]",
        Rule::SkillDomain => "skill in {0.25, 0.5, 1, 1.25}",
        Rule::EmptyGate => "at least one child node",
        Rule::DuplicateId => "a node id unique within the tree",
        Rule::UnknownThreat => "a threat code from the threat catalogue",
        Rule::UnknownControl => "a control code from the control library",
        Rule::ControlValueDomain => "control value in [0, 1]",
        Rule::ControlCostDomain => "control cost in {1, 2, 3}",
        Rule::EffectivenessMissing => "an effectiveness for an impact control",
        Rule::EffectivenessDomain => "effectiveness in [0, 1]",
        Rule::FinalValueMismatch => "final value equal to value / cost",
        Rule::MissingIsoReference => "an ISO 27001 section reference",
        Rule::MissingGdprReference => "a GDPR article reference",
    }
}

/// Attaches a violation to its source location.
pub fn locate_violation(v: &Violation, map: &SourceMap, source: &str) -> ParseError {
    let span = map.locate(v).cloned().unwrap_or(SourceSpan {
        file: None,
        line: 1,
        column: 1,
        offset: 0,
        length: 0,
    });
    let text = source
        .get(span.offset..span.offset + span.length)
        .filter(|t| !t.is_empty() && v.rule.field().is_some())
        .map(|t| format!("`{t}`"));
    ParseError {
        span,
        expected: rule_expectation(v.rule).to_string(),
        found: text.unwrap_or_else(|| v.message.clone()),
        rule: Some(v.rule),
    }
}
