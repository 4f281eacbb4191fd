//! Recursive-descent parser for `.adt` files.
//!
//! On a syntax error the parser records it, skips to the brace that closes
//! the construct being parsed, and carries on, so one run reports every
//! independent error.

use std::path::Path;
use std::sync::Arc;

use super::lexer::{tokenize_in, Keyword, Token, TokenKind};
use super::{locate_violation, ParseError, SourceMap, SourceSpan, Subject};
use crate::catalogue::Catalogues;
use crate::model::{
    self, AdNode, AdTree, ControlKind, Countermeasure, Field, Gate, Leaf, LeafAttrs, NodeBody,
    Stride, ThreatEntry,
};

/// Result of parsing any `.adt` file: a tree with its catalogues, or a
/// catalogue-only file.
#[derive(Debug, Clone)]
pub struct Document {
    pub tree: Option<AdTree>,
    pub catalogues: Catalogues,
    pub spans: SourceMap,
}

/// Parses and validates a tree file.
pub fn parse_tree_file(source: &str) -> Result<AdTree, Vec<ParseError>> {
    parse_tree_in(source, None)
}

pub fn parse_tree_file_named(path: &Path, source: &str) -> Result<AdTree, Vec<ParseError>> {
    parse_tree_in(source, Some(Arc::from(path)))
}

fn parse_tree_in(source: &str, file: Option<Arc<Path>>) -> Result<AdTree, Vec<ParseError>> {
    let doc = parse_in(source, file.clone())?;
    let Some(tree) = doc.tree else {
        let span = SourceSpan {
            file,
            line: 1,
            column: 1,
            offset: 0,
            length: 0,
        };
        return Err(vec![ParseError::syntax(span, "`tree`", "a catalogue-only file")]);
    };
    let errors: Vec<_> = model::validate_tree(&tree)
        .iter()
        .filter(|v| v.severity == model::Severity::Error)
        .map(|v| locate_violation(v, &doc.spans, source))
        .collect();
    if errors.is_empty() {
        Ok(tree)
    } else {
        Err(errors)
    }
}

/// Parses a catalogue-only file (the tree declaration omitted).
pub fn parse_catalogue_file(source: &str) -> Result<Catalogues, Vec<ParseError>> {
    let doc = parse_in(source, None)?;
    match doc.tree {
        None => Ok(doc.catalogues),
        Some(_) => {
            let span = doc.spans.fallback.unwrap_or(SourceSpan {
                file: None,
                line: 1,
                column: 1,
                offset: 0,
                length: 0,
            });
            Err(vec![ParseError::syntax(span, "`controls` or `threats`", "`tree`")])
        }
    }
}

/// Parses either file form without semantic validation; the source map lets
/// callers locate later validation findings.
pub fn parse_document(source: &str) -> Result<Document, Vec<ParseError>> {
    parse_in(source, None)
}

pub fn parse_document_named(path: &Path, source: &str) -> Result<Document, Vec<ParseError>> {
    parse_in(source, Some(Arc::from(path)))
}

fn parse_in(source: &str, file: Option<Arc<Path>>) -> Result<Document, Vec<ParseError>> {
    let tokens = tokenize_in(source, file).map_err(|e| vec![e])?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        errors: Vec::new(),
        spans: SourceMap::default(),
    };
    let doc = parser.file();
    if parser.errors.is_empty() {
        Ok(doc)
    } else {
        Err(parser.errors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ValueKind {
    Number,
    Ident,
    Str,
}

#[derive(Debug, Clone)]
enum Value {
    Number(f64),
    Ident(String),
    Str(String),
}

struct AttrBlock {
    entries: Vec<(Keyword, Value, SourceSpan)>,
    close: SourceSpan,
}

impl AttrBlock {
    fn get(&self, key: Keyword) -> Option<&(Keyword, Value, SourceSpan)> {
        self.entries.iter().find(|(k, ..)| *k == key)
    }

    fn number(&self, key: Keyword) -> Option<f64> {
        match self.get(key) {
            Some((_, Value::Number(n), _)) => Some(*n),
            _ => None,
        }
    }

    fn text(&self, key: Keyword) -> Option<String> {
        match self.get(key) {
            Some((_, Value::Ident(s) | Value::Str(s), _)) => Some(s.clone()),
            _ => None,
        }
    }

    fn span(&self, key: Keyword) -> Option<SourceSpan> {
        self.get(key).map(|(_, _, s)| s.clone())
    }
}

const LEAF_ATTRS: &[(Keyword, ValueKind)] = &[
    (Keyword::Prob, ValueKind::Number),
    (Keyword::Cost, ValueKind::Number),
    (Keyword::Impact, ValueKind::Number),
    (Keyword::Skill, ValueKind::Number),
    (Keyword::Threat, ValueKind::Ident),
    (Keyword::Counter, ValueKind::Ident),
];

const CONTROL_ATTRS: &[(Keyword, ValueKind)] = &[
    (Keyword::Type, ValueKind::Ident),
    (Keyword::Value, ValueKind::Number),
    (Keyword::Cost, ValueKind::Number),
    (Keyword::Effectiveness, ValueKind::Number),
    (Keyword::Final, ValueKind::Number),
    (Keyword::Iso, ValueKind::Str),
    (Keyword::Gdpr, ValueKind::Str),
];

const THREAT_ATTRS: &[(Keyword, ValueKind)] = &[
    (Keyword::Stride, ValueKind::Ident),
    (Keyword::Asset, ValueKind::Str),
    (Keyword::Desc, ValueKind::Str),
    (Keyword::Vuln, ValueKind::Str),
];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    errors: Vec<ParseError>,
    spans: SourceMap,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let tok = self.peek().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek().kind == TokenKind::Keyword(kw)
    }

    fn error_here(&mut self, expected: impl Into<String>) {
        let tok = self.peek().clone();
        self.errors.push(ParseError::syntax(tok.span.clone(), expected, tok.describe()));
    }

    /// Skips to the brace closing the construct being parsed. `open` is the
    /// number of that construct's braces already consumed; with `open == 0`
    /// a `}` belonging to the enclosing block is left in place.
    fn recover(&mut self, open: usize) {
        let mut depth = open;
        loop {
            match self.peek().kind {
                TokenKind::Eof => return,
                TokenKind::LBrace => {
                    depth += 1;
                    self.bump();
                }
                TokenKind::RBrace => {
                    if depth == 0 {
                        return;
                    }
                    depth -= 1;
                    self.bump();
                    if depth == 0 {
                        return;
                    }
                }
                _ => {
                    self.bump();
                }
            }
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Option<Token> {
        if self.peek().kind == kind {
            Some(self.bump())
        } else {
            self.error_here(kind.tag());
            None
        }
    }

    fn expect_ident(&mut self) -> Option<(String, SourceSpan)> {
        match &self.peek().kind {
            TokenKind::Ident(s) => {
                let s = s.clone();
                Some((s, self.bump().span))
            }
            _ => {
                self.error_here("identifier");
                None
            }
        }
    }

    fn expect_string(&mut self) -> Option<String> {
        match &self.peek().kind {
            TokenKind::Str(s) => {
                let s = s.clone();
                self.bump();
                Some(s)
            }
            _ => {
                self.error_here("string");
                None
            }
        }
    }

    fn file(&mut self) -> Document {
        let mut tree = None;
        if self.at_keyword(Keyword::Tree) {
            tree = self.tree_decl();
        }
        let catalogues = self.catalogues(tree.is_some());
        if let Some(t) = &mut tree {
            t.controls = catalogues.controls.clone();
            t.threats = catalogues.threats.clone();
        }
        Document {
            tree,
            catalogues,
            spans: std::mem::take(&mut self.spans),
        }
    }

    fn tree_decl(&mut self) -> Option<AdTree> {
        let head = self.bump();
        self.spans.fallback = Some(head.span);
        let name = self.expect_string();
        if name.is_none() || self.expect(TokenKind::LBrace).is_none() {
            self.recover(0);
            return None;
        }
        let root = if self.peek().kind == TokenKind::RBrace {
            self.error_here("`or`, `and` or `leaf`");
            None
        } else {
            self.node()
        };
        if self.peek().kind == TokenKind::RBrace {
            self.bump();
        } else {
            // A second root, or stray tokens after the root node.
            self.error_here("`}`");
            self.recover(1);
        }
        Some(AdTree::new(&name?, root?))
    }

    fn node(&mut self) -> Option<AdNode> {
        let gate = match self.peek().kind {
            TokenKind::Keyword(Keyword::Or) => Some(Gate::Or),
            TokenKind::Keyword(Keyword::And) => Some(Gate::And),
            TokenKind::Keyword(Keyword::Leaf) => None,
            _ => {
                self.error_here("`or`, `and` or `leaf`");
                // Consume at least the offending token so the caller makes progress.
                if self.peek().kind != TokenKind::RBrace && self.peek().kind != TokenKind::LBrace {
                    self.bump();
                }
                self.recover(0);
                return None;
            }
        };
        self.bump();
        let Some((id, id_span)) = self.expect_ident() else {
            self.recover(0);
            return None;
        };
        let Some(label) = self.expect_string() else {
            self.recover(0);
            return None;
        };
        if self.expect(TokenKind::LBrace).is_none() {
            self.recover(0);
            return None;
        }
        self.spans.record(Subject::Node(id.clone()), None, id_span);

        match gate {
            Some(gate) => self.gate_body(gate, id, label),
            None => self.leaf_body(id, label),
        }
    }

    fn gate_body(&mut self, gate: Gate, id: String, label: String) -> Option<AdNode> {
        let mut children = Vec::new();
        let mut ok = true;
        loop {
            match self.peek().kind {
                TokenKind::RBrace => break,
                TokenKind::Eof => {
                    self.error_here("`}`");
                    return None;
                }
                _ => match self.node() {
                    Some(child) => children.push(child),
                    None => ok = false,
                },
            }
        }
        if children.is_empty() && ok {
            self.error_here("`or`, `and` or `leaf`");
            ok = false;
        }
        self.bump();
        ok.then(|| AdNode::gate(gate, &id, &label, children))
    }

    fn leaf_body(&mut self, id: String, label: String) -> Option<AdNode> {
        let block = self.attr_block(LEAF_ATTRS)?;
        let subject = Subject::Node(id.clone());
        let fields = [
            (Keyword::Prob, Field::Probability),
            (Keyword::Cost, Field::Cost),
            (Keyword::Impact, Field::Impact),
            (Keyword::Skill, Field::Skill),
            (Keyword::Threat, Field::Threat),
            (Keyword::Counter, Field::Countermeasure),
        ];
        for (kw, field) in fields {
            if let Some(span) = block.span(kw) {
                self.spans.record(subject.clone(), Some(field), span);
            }
        }
        let mut missing = false;
        for kw in [Keyword::Prob, Keyword::Cost, Keyword::Impact, Keyword::Skill] {
            if block.get(kw).is_none() {
                self.errors.push(ParseError::syntax(
                    block.close.clone(),
                    format!("`{kw}` attribute of leaf `{id}`"),
                    "`}`",
                ));
                missing = true;
            }
        }
        if missing {
            return None;
        }
        let attrs = LeafAttrs {
            probability: block.number(Keyword::Prob)?,
            cost: block.number(Keyword::Cost)?,
            impact: block.number(Keyword::Impact)?,
            skill: block.number(Keyword::Skill)?,
        };
        Some(AdNode {
            id,
            label,
            body: NodeBody::Leaf(Leaf {
                attrs,
                threat: block.text(Keyword::Threat),
                countermeasure: block.text(Keyword::Counter),
            }),
        })
    }

    /// Parses `attr*` up to and including the closing brace; the opening
    /// brace has been consumed. Values are recorded with the span of the
    /// value token.
    fn attr_block(&mut self, allowed: &[(Keyword, ValueKind)]) -> Option<AttrBlock> {
        let mut entries: Vec<(Keyword, Value, SourceSpan)> = Vec::new();
        let mut ok = true;
        loop {
            let tok = self.peek().clone();
            let key = match tok.kind {
                TokenKind::RBrace => {
                    self.bump();
                    return ok.then_some(AttrBlock {
                        entries,
                        close: tok.span,
                    });
                }
                TokenKind::Keyword(k) => allowed.iter().find(|(a, _)| *a == k).copied(),
                _ => None,
            };
            let Some((kw, kind)) = key else {
                let names: Vec<_> = allowed.iter().map(|(k, _)| format!("`{k}`")).collect();
                self.error_here(format!("one of {} or `}}`", names.join(", ")));
                self.recover(1);
                return None;
            };
            self.bump();
            if entries.iter().any(|(k, ..)| *k == kw) {
                self.errors.push(ParseError::syntax(
                    tok.span.clone(),
                    format!("at most one `{kw}` attribute"),
                    format!("a second `{kw}`"),
                ));
                ok = false;
            }
            let vtok = self.peek().clone();
            let value = match (kind, &vtok.kind) {
                (ValueKind::Number, TokenKind::Number(n)) => Value::Number(*n),
                (ValueKind::Ident, TokenKind::Ident(s)) => Value::Ident(s.clone()),
                (ValueKind::Str, TokenKind::Str(s)) => Value::Str(s.clone()),
                _ => {
                    let what = match kind {
                        ValueKind::Number => "number",
                        ValueKind::Ident => "identifier",
                        ValueKind::Str => "string",
                    };
                    self.error_here(format!("{what} after `{kw}`"));
                    self.recover(1);
                    return None;
                }
            };
            self.bump();
            entries.push((kw, value, vtok.span));
        }
    }

    fn catalogues(&mut self, after_tree: bool) -> Catalogues {
        let mut cats = Catalogues::default();
        let mut seen_controls = false;
        let mut seen_threats = false;
        loop {
            let tok = self.peek().clone();
            match tok.kind {
                TokenKind::Eof => return cats,
                TokenKind::Keyword(Keyword::Controls) if !seen_controls => {
                    seen_controls = true;
                    self.bump();
                    self.controls_block(&mut cats);
                }
                TokenKind::Keyword(Keyword::Threats) if !seen_threats => {
                    seen_threats = true;
                    self.bump();
                    self.threats_block(&mut cats);
                }
                _ => {
                    let expected = match (after_tree, seen_controls, seen_threats) {
                        (_, false, false) if !after_tree => "`tree`, `controls` or `threats`",
                        (_, false, false) => "`controls`, `threats` or end of input",
                        (_, false, true) => "`controls` or end of input",
                        (_, true, false) => "`threats` or end of input",
                        (_, true, true) => "end of input",
                    };
                    self.error_here(expected);
                    self.bump();
                    self.recover(0);
                    if self.peek().kind == TokenKind::RBrace {
                        self.bump();
                    }
                }
            }
        }
    }

    fn controls_block(&mut self, cats: &mut Catalogues) {
        if self.expect(TokenKind::LBrace).is_none() {
            self.recover(0);
            return;
        }
        loop {
            match self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return;
                }
                TokenKind::Eof => {
                    self.error_here("`}`");
                    return;
                }
                TokenKind::Keyword(Keyword::Control) => {
                    self.bump();
                    if let Some((cm, span)) = self.control_decl() {
                        let code = cm.code.clone();
                        if cats.controls.insert(cm).is_err() {
                            self.errors.push(ParseError::syntax(
                                span,
                                "a unique control code",
                                format!("duplicate `{code}`"),
                            ));
                        }
                    }
                }
                _ => {
                    self.error_here("`control` or `}`");
                    self.bump();
                    self.recover(0);
                }
            }
        }
    }

    fn control_decl(&mut self) -> Option<(Countermeasure, SourceSpan)> {
        let Some((code, code_span)) = self.expect_ident() else {
            self.recover(0);
            return None;
        };
        let Some(name) = self.expect_string() else {
            self.recover(0);
            return None;
        };
        if self.expect(TokenKind::LBrace).is_none() {
            self.recover(0);
            return None;
        }
        let block = self.attr_block(CONTROL_ATTRS)?;
        // First declaration wins for duplicated codes.
        let subject = Subject::Control(code.clone());
        self.spans.record(subject.clone(), None, code_span.clone());
        for (kw, field) in [
            (Keyword::Value, Field::Value),
            (Keyword::Cost, Field::Cost),
            (Keyword::Effectiveness, Field::Effectiveness),
            (Keyword::Final, Field::FinalValue),
        ] {
            if let Some(span) = block.span(kw) {
                self.spans.record(subject.clone(), Some(field), span);
            }
        }

        let mut ok = true;
        for kw in [Keyword::Type, Keyword::Value, Keyword::Cost] {
            if block.get(kw).is_none() {
                self.errors.push(ParseError::syntax(
                    block.close.clone(),
                    format!("`{kw}` attribute of control `{code}`"),
                    "`}`",
                ));
                ok = false;
            }
        }
        let kind = match block.text(Keyword::Type).map(|t| t.parse::<ControlKind>()) {
            Some(Ok(kind)) => Some(kind),
            Some(Err(_)) => {
                let span = block.span(Keyword::Type).expect("type present");
                let found = format!("`{}`", block.text(Keyword::Type).unwrap_or_default());
                self.errors.push(ParseError::syntax(span, "`Probability` or `Impact`", found));
                None
            }
            None => None,
        };
        if !ok {
            return None;
        }
        let cm = Countermeasure {
            code,
            name,
            kind: kind?,
            value: block.number(Keyword::Value)?,
            cost: block.number(Keyword::Cost)?,
            effectiveness: block.number(Keyword::Effectiveness),
            declared_final: block.number(Keyword::Final),
            iso_sections: split_refs(block.text(Keyword::Iso)),
            gdpr_articles: split_refs(block.text(Keyword::Gdpr)),
        };
        Some((cm, code_span))
    }

    fn threats_block(&mut self, cats: &mut Catalogues) {
        if self.expect(TokenKind::LBrace).is_none() {
            self.recover(0);
            return;
        }
        loop {
            match self.peek().kind {
                TokenKind::RBrace => {
                    self.bump();
                    return;
                }
                TokenKind::Eof => {
                    self.error_here("`}`");
                    return;
                }
                TokenKind::Keyword(Keyword::ThreatEntry) => {
                    self.bump();
                    if let Some((entry, span)) = self.threat_decl() {
                        let code = entry.code.clone();
                        if cats.threats.insert(entry).is_err() {
                            self.errors.push(ParseError::syntax(
                                span,
                                "a unique threat code",
                                format!("duplicate `{code}`"),
                            ));
                        }
                    }
                }
                _ => {
                    self.error_here("`threat-entry` or `}`");
                    self.bump();
                    self.recover(0);
                }
            }
        }
    }

    fn threat_decl(&mut self) -> Option<(ThreatEntry, SourceSpan)> {
        let Some((code, code_span)) = self.expect_ident() else {
            self.recover(0);
            return None;
        };
        if self.expect(TokenKind::LBrace).is_none() {
            self.recover(0);
            return None;
        }
        let block = self.attr_block(THREAT_ATTRS)?;
        self.spans.record(Subject::Threat(code.clone()), None, code_span.clone());
        let stride = match block.text(Keyword::Stride).map(|s| s.parse::<Stride>()) {
            Some(Ok(s)) => Some(s),
            Some(Err(msg)) => {
                let span = block.span(Keyword::Stride).expect("stride present");
                self.errors.push(ParseError::syntax(
                    span,
                    "a STRIDE category such as `InformationDisclosure`",
                    msg,
                ));
                return None;
            }
            None => None,
        };
        let entry = ThreatEntry {
            code,
            description: block.text(Keyword::Desc),
            asset: block.text(Keyword::Asset),
            stride,
            vulnerability: block.text(Keyword::Vuln),
        };
        Some((entry, code_span))
    }
}

fn split_refs(text: Option<String>) -> Vec<String> {
    text.map(|t| {
        t.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect()
    })
    .unwrap_or_default()
}
