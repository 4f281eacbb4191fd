//! Attack-defense tree risk quantification.
//!
//! Trees are written in a small text language ([`dsl`]), evaluated bottom-up
//! into inherent and residual risk ([`engine`]), cross-checked against threat
//! and control catalogues ([`catalogue`]) and rendered as comparison tables
//! ([`report`]).
//!
//! ```
//! use riskctl_core::{dsl, engine, report};
//!
//! let tree = dsl::parse_tree_file(riskctl_core::examples::CASE_STUDY).unwrap();
//! let rows = engine::assess(&tree, engine::EvalOptions::default()).unwrap();
//! let summary = report::summarize(&rows).unwrap();
//! assert!(summary.persistent_threat);
//! ```

pub mod catalogue;
pub mod dsl;
pub mod engine;
pub mod model;
pub mod numeric;
pub mod report;

/// Fixture trees shipped with the crate.
pub mod examples {
    pub const CASE_STUDY: &str = include_str!("../examples/iot_case_study.adt");
    pub const MINIMAL: &str = include_str!("../examples/minimal.adt");
    pub use crate::catalogue::BUNDLED_CATALOGUE;
}

pub use catalogue::{Catalogues, ControlLibrary, CoverageReport, ThreatCatalogue};
pub use dsl::{ParseError, SourceSpan};
pub use engine::{EngineError, EvalOptions, EvaluatedTree};
pub use model::{
    AdNode, AdTree, ComparisonRow, ControlKind, Countermeasure, EvalMode, Gate, Impact, ImpactBand,
    Leaf, LeafAttrs, NodeAttrs, NodeBody, NodeKind, Probability, ProbabilityBand, Rule, Severity, Skill, Stride,
    ThreatEntry, Violation,
};
pub use report::{Format, ReportOptions, Summary};
