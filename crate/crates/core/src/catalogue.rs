//! STRIDE threat catalogue and ISO 27001 / GDPR control library.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::dsl;
use crate::model::{AdNode, AdTree, Countermeasure, Rule, Stride, ThreatEntry, Violation};

/// Source of the bundled control library and threat catalogue.
pub const BUNDLED_CATALOGUE: &str = include_str!("../examples/bundled_catalogue.adt");

/// Tolerance for a declared final value against `value / cost`.
pub const FINAL_VALUE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("code `{0}` is already catalogued")]
pub struct DuplicateCode(pub String);

/// Controls keyed by code, in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControlLibrary {
    controls: IndexMap<String, Countermeasure>,
}

impl ControlLibrary {
    pub fn insert(&mut self, cm: Countermeasure) -> Result<(), DuplicateCode> {
        if self.controls.contains_key(&cm.code) {
            return Err(DuplicateCode(cm.code));
        }
        self.controls.insert(cm.code.clone(), cm);
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&Countermeasure> {
        self.controls.get(code)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Countermeasure> {
        self.controls.values()
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }
}

impl FromIterator<Countermeasure> for ControlLibrary {
    /// Later duplicates are dropped.
    fn from_iter<I: IntoIterator<Item = Countermeasure>>(iter: I) -> Self {
        let mut lib = Self::default();
        for cm in iter {
            let _ = lib.insert(cm);
        }
        lib
    }
}

/// Threat rows keyed by code, in declaration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThreatCatalogue {
    threats: IndexMap<String, ThreatEntry>,
}

impl ThreatCatalogue {
    pub fn insert(&mut self, entry: ThreatEntry) -> Result<(), DuplicateCode> {
        if self.threats.contains_key(&entry.code) {
            return Err(DuplicateCode(entry.code));
        }
        self.threats.insert(entry.code.clone(), entry);
        Ok(())
    }

    pub fn get(&self, code: &str) -> Option<&ThreatEntry> {
        self.threats.get(code)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ThreatEntry> {
        self.threats.values()
    }

    pub fn len(&self) -> usize {
        self.threats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threats.is_empty()
    }
}

impl FromIterator<ThreatEntry> for ThreatCatalogue {
    fn from_iter<I: IntoIterator<Item = ThreatEntry>>(iter: I) -> Self {
        let mut cat = Self::default();
        for t in iter {
            let _ = cat.insert(t);
        }
        cat
    }
}

/// Both catalogues, as read from a catalogue-only file or a tree file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalogues {
    pub controls: ControlLibrary,
    pub threats: ThreatCatalogue,
}

/// The three sample probability controls (C3, C4, C5) and the thirteen
/// catalogued threats, plus code-only stubs for B9, B10 and B12.
pub fn bundled() -> Catalogues {
    dsl::parse_catalogue_file(BUNDLED_CATALOGUE).expect("bundled catalogue parses")
}

/// Checks control-library consistency. Missing ISO or GDPR references are
/// warnings; everything else is an error.
pub fn lint_controls(lib: &ControlLibrary) -> Vec<Violation> {
    let mut out = Vec::new();
    for cm in lib.iter() {
        for (rule, err) in cm.domain_errors() {
            out.push(Violation::error(&cm.code, rule, err.to_string()));
        }
        if let Some(declared) = cm.declared_final {
            let derived = cm.value / cm.cost;
            // NaN compares false and counts as a mismatch
            let close = (declared - derived).abs() <= FINAL_VALUE_TOLERANCE;
            if !close {
                out.push(Violation::error(
                    &cm.code,
                    Rule::FinalValueMismatch,
                    format!(
                        "declared final value {declared} but value/cost = {}/{} = {derived}",
                        cm.value, cm.cost
                    ),
                ));
            }
        }
        if cm.iso_sections.is_empty() {
            out.push(Violation::warning(
                &cm.code,
                Rule::MissingIsoReference,
                "no ISO 27001 section referenced",
            ));
        }
        if cm.gdpr_articles.is_empty() {
            out.push(Violation::warning(
                &cm.code,
                Rule::MissingGdprReference,
                "no GDPR article referenced",
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StrideCoverage {
    pub leaves: usize,
    pub controlled: usize,
    pub uncontrolled: usize,
}

/// Which STRIDE categories the tree's leaves exercise, and how many of those
/// leaves carry a countermeasure.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub by_category: BTreeMap<Stride, StrideCoverage>,
    /// Leaves whose threat code resolves to a code-only catalogue stub.
    pub uncategorised: StrideCoverage,
    /// Leaf ids whose threat code is missing from the catalogue.
    pub dangling: Vec<String>,
    /// Leaf ids with no threat code at all.
    pub unmapped_leaves: Vec<String>,
    /// Catalogue codes never referenced by a leaf.
    pub unreferenced_threats: Vec<String>,
    pub unreferenced_controls: Vec<String>,
}

impl CoverageReport {
    /// Number of leaves that carry a threat code, whatever it resolves to.
    pub fn referenced_leaves(&self) -> usize {
        self.by_category.values().map(|c| c.leaves).sum::<usize>()
            + self.uncategorised.leaves
            + self.dangling.len()
    }

    pub fn category(&self, stride: Stride) -> StrideCoverage {
        self.by_category.get(&stride).cloned().unwrap_or_default()
    }
}

pub fn cross_reference(tree: &AdTree) -> CoverageReport {
    coverage(
        Some(&tree.root),
        &Catalogues {
            controls: tree.controls.clone(),
            threats: tree.threats.clone(),
        },
    )
}

/// Coverage for an optional tree against catalogues; `None` reports every
/// entry as unreferenced.
pub fn coverage(root: Option<&AdNode>, cats: &Catalogues) -> CoverageReport {
    let mut report = CoverageReport::default();
    let mut used_threats = Vec::new();
    let mut used_controls = Vec::new();

    let leaves = root.map(|r| r.leaves()).unwrap_or_default();
    for node in leaves {
        let Some(leaf) = node.as_leaf() else { continue };
        if let Some(code) = &leaf.countermeasure {
            used_controls.push(code.as_str());
        }
        let Some(code) = &leaf.threat else {
            report.unmapped_leaves.push(node.id.clone());
            continue;
        };
        used_threats.push(code.as_str());
        let bucket = match cats.threats.get(code) {
            None => {
                report.dangling.push(node.id.clone());
                continue;
            }
            Some(ThreatEntry { stride: Some(s), .. }) => report.by_category.entry(*s).or_default(),
            Some(_) => &mut report.uncategorised,
        };
        bucket.leaves += 1;
        if leaf.countermeasure.is_some() {
            bucket.controlled += 1;
        } else {
            bucket.uncontrolled += 1;
        }
    }

    report.unreferenced_threats = cats
        .threats
        .iter()
        .filter(|t| !used_threats.contains(&t.code.as_str()))
        .map(|t| t.code.clone())
        .collect();
    report.unreferenced_controls = cats
        .controls
        .iter()
        .filter(|c| !used_controls.contains(&c.code.as_str()))
        .map(|c| c.code.clone())
        .collect();
    report
}
