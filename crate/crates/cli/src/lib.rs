//! `riskctl`: validate, evaluate and cross-check attack-defense trees.
//!
//! Everything goes through [`run`], which takes its streams as arguments so
//! the binary and the tests share one code path.

use std::ffi::OsString;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use riskctl_core::catalogue::{self, lint_controls, Catalogues};
use riskctl_core::dsl::{self, locate_violation, Document, ParseError};
use riskctl_core::engine::{self, EngineError, EvalOptions};
use riskctl_core::model::{self, Severity, Violation};
use riskctl_core::report::{self, Format, ReportOptions};
use riskctl_core::{EvalMode, Stride};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Invalid = 1,
    Evaluation = 2,
    Io = 3,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Parser, Debug)]
#[command(name = "riskctl", version, about = "Attack-defense tree risk assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a tree or catalogue file.
    Validate {
        /// Input file, or `-` for stdin.
        path: PathBuf,
    },
    /// Evaluate inherent and/or residual risk.
    Eval {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = FormatArg::Md)]
        format: FormatArg,
        /// Decimal places of rounded cells (0 to 6).
        #[arg(long, default_value_t = 2)]
        decimals: u32,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Decimals that gate probability, cost and impact are rounded to
        /// before use.
        #[arg(long, default_value_t = 2)]
        gate_decimals: u32,
        /// Full double precision at gates.
        #[arg(long)]
        exact: bool,
        /// Add probability and impact band columns.
        #[arg(long)]
        include_bands: bool,
        /// Root reduction (percent) below which a threat counts as persistent.
        #[arg(long, default_value_t = report::DEFAULT_PERSISTENCE_THRESHOLD)]
        threshold: f64,
    },
    /// Inspect the control library and threat catalogue.
    Catalog {
        path: PathBuf,
        #[arg(value_enum)]
        action: CatalogAction,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ModeArg {
    Inherent,
    Residual,
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FormatArg {
    Md,
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Md => Format::Markdown,
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum CatalogAction {
    Lint,
    Coverage,
}

/// Streams and terminal settings for one invocation.
pub struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
    /// Colour the rule names in diagnostics.
    pub color: bool,
}

/// Decides diagnostic colouring from `RISKCTL_COLOR` (`never` or `auto`,
/// the default) and whether the stream is a terminal.
pub fn color_enabled(setting: Option<&str>, is_terminal: bool) -> bool {
    match setting {
        Some("never") => false,
        _ => is_terminal,
    }
}

pub fn run<I, T>(args: I, io: &mut Io<'_>) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(io.stderr, "{text}");
                ExitCode::Invalid
            } else {
                // --help and --version
                let _ = write!(io.stdout, "{text}");
                ExitCode::Success
            };
        }
    };
    let result = match cli.command {
        Command::Validate { path } => cmd_validate(&path, io),
        Command::Eval {
            path,
            mode,
            format,
            decimals,
            out,
            gate_decimals,
            exact,
            include_bands,
            threshold,
        } => {
            let options = if exact {
                EvalOptions::exact()
            } else {
                EvalOptions::rounded(gate_decimals)
            };
            let args = EvalArgs {
                mode,
                format: format.into(),
                decimals,
                out,
                options,
                include_bands,
                threshold,
            };
            cmd_eval(&path, &args, io)
        }
        Command::Catalog { path, action } => cmd_catalog(&path, action, io),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Io(msg)) => {
            let _ = writeln!(io.stderr, "riskctl: {msg}");
            ExitCode::Io
        }
    }
}

enum Failure {
    Io(String),
}

fn display_name(path: &Path) -> PathBuf {
    if path == Path::new("-") {
        PathBuf::from("<stdin>")
    } else {
        path.to_path_buf()
    }
}

fn read_input(path: &Path, io: &mut Io<'_>) -> Result<String, Failure> {
    if path == Path::new("-") {
        let mut s = String::new();
        io.stdin
            .read_to_string(&mut s)
            .map_err(|e| Failure::Io(format!("cannot read stdin: {e}")))?;
        Ok(s)
    } else {
        fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
    }
}

fn paint(color: bool, text: &str, code: &str) -> String {
    if color {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

/// `file:line:col: rule: message`
fn diagnostic_line(e: &ParseError, color: bool) -> String {
    let rule = paint(color, &e.rule_name(), "1;31");
    format!("{}: {rule}: expected {}, found {}", e.span, e.expected, e.found)
}

fn located(v: &Violation, doc: &Document, source: &str, color: bool) -> String {
    let line = diagnostic_line(&locate_violation(v, &doc.spans, source), color);
    match v.severity {
        Severity::Error => line,
        Severity::Warning => format!("{line} ({})", paint(color, "warning", "33")),
    }
}

fn parse(path: &Path, io: &mut Io<'_>) -> Result<Result<(Document, String), Vec<ParseError>>, Failure> {
    let source = read_input(path, io)?;
    Ok(dsl::parse_document_named(&display_name(path), &source).map(|doc| (doc, source)))
}

fn cmd_validate(path: &Path, io: &mut Io<'_>) -> Result<ExitCode, Failure> {
    let (doc, source) = match parse(path, io)? {
        Ok(parsed) => parsed,
        Err(errors) => {
            for e in &errors {
                let _ = writeln!(io.stdout, "{}", diagnostic_line(e, io.color));
            }
            return Ok(ExitCode::Invalid);
        }
    };
    let violations: Vec<Violation> = match &doc.tree {
        Some(tree) => model::validate_tree(tree),
        None => lint_controls(&doc.catalogues.controls),
    };
    let mut failed = false;
    for v in violations.iter().filter(|v| v.severity == Severity::Error) {
        failed = true;
        let _ = writeln!(io.stdout, "{}", located(v, &doc, &source, io.color));
    }
    Ok(if failed { ExitCode::Invalid } else { ExitCode::Success })
}

struct EvalArgs {
    mode: ModeArg,
    format: Format,
    decimals: u32,
    out: Option<PathBuf>,
    options: EvalOptions,
    include_bands: bool,
    threshold: f64,
}

fn cmd_eval(path: &Path, args: &EvalArgs, io: &mut Io<'_>) -> Result<ExitCode, Failure> {
    let opts = match ReportOptions::new(args.format, args.decimals, args.include_bands) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(io.stderr, "riskctl: {e}");
            return Ok(ExitCode::Invalid);
        }
    };
    let source = read_input(path, io)?;
    let tree = match dsl::parse_tree_file_named(&display_name(path), &source) {
        Ok(t) => t,
        Err(errors) => {
            for e in &errors {
                let _ = writeln!(io.stderr, "{}", diagnostic_line(e, io.color));
            }
            return Ok(ExitCode::Invalid);
        }
    };

    let rendered = match args.mode {
        ModeArg::Both => engine::assess(&tree, args.options).map(|rows| {
            let summary = report::summarize_with_threshold(&rows, args.threshold)
                .expect("comparison rows always include the root");
            if args.format == Format::Csv {
                for line in report::summary_lines(&summary) {
                    let _ = writeln!(io.stderr, "{line}");
                }
            }
            report::render_with_summary(&rows, Some(&summary), &opts)
        }),
        ModeArg::Inherent | ModeArg::Residual => {
            let mode = if args.mode == ModeArg::Inherent {
                EvalMode::Inherent
            } else {
                EvalMode::Residual
            };
            engine::evaluate_with(&tree, mode, args.options).map(|e| report::render_nodes(&e, &opts))
        }
    };
    let text = match rendered {
        Ok(text) => text,
        Err(e @ EngineError::InvalidTree(_)) => {
            let _ = writeln!(io.stderr, "riskctl: {e}");
            return Ok(ExitCode::Invalid);
        }
        Err(e) => {
            let _ = writeln!(io.stderr, "riskctl: evaluation failed: {e}");
            return Ok(ExitCode::Evaluation);
        }
    };

    match &args.out {
        Some(out) => fs::write(out, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", out.display())))?,
        None => io
            .stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("cannot write stdout: {e}")))?,
    }
    Ok(ExitCode::Success)
}

fn cmd_catalog(path: &Path, action: CatalogAction, io: &mut Io<'_>) -> Result<ExitCode, Failure> {
    let (doc, source) = match parse(path, io)? {
        Ok(parsed) => parsed,
        Err(errors) => {
            for e in &errors {
                let _ = writeln!(io.stderr, "{}", diagnostic_line(e, io.color));
            }
            return Ok(ExitCode::Invalid);
        }
    };
    match action {
        CatalogAction::Lint => {
            let violations = lint_controls(&doc.catalogues.controls);
            for v in &violations {
                let _ = writeln!(io.stdout, "{}", located(v, &doc, &source, io.color));
            }
            Ok(if model::has_errors(&violations) {
                ExitCode::Invalid
            } else {
                ExitCode::Success
            })
        }
        CatalogAction::Coverage => {
            let cov = catalogue::coverage(doc.tree.as_ref().map(|t| &t.root), &doc.catalogues);
            let _ = io.stdout.write_all(coverage_text(&cov, &doc.catalogues).as_bytes());
            Ok(ExitCode::Success)
        }
    }
}

fn coverage_text(cov: &catalogue::CoverageReport, cats: &Catalogues) -> String {
    let mut out = String::from("| STRIDE | Catalogued | Leaves | Controlled | Uncontrolled |\n| --- | --- | --- | --- | --- |\n");
    for stride in Stride::ALL {
        let c = cov.category(stride);
        let catalogued = cats.threats.iter().filter(|t| t.stride == Some(stride)).count();
        out.push_str(&format!(
            "| {stride} | {catalogued} | {} | {} | {} |\n",
            c.leaves, c.controlled, c.uncontrolled
        ));
    }
    let stubs = cats.threats.iter().filter(|t| t.stride.is_none()).count();
    let u = &cov.uncategorised;
    out.push_str(&format!(
        "| uncategorised | {stubs} | {} | {} | {} |\n",
        u.leaves, u.controlled, u.uncontrolled
    ));
    let list = |xs: &[String]| if xs.is_empty() { "none".to_string() } else { xs.join(", ") };
    out.push_str(&format!("\nLeaves without a threat code: {}\n", list(&cov.unmapped_leaves)));
    out.push_str(&format!("Leaves with unknown threat codes: {}\n", list(&cov.dangling)));
    out.push_str(&format!("Unreferenced threats: {}\n", list(&cov.unreferenced_threats)));
    out.push_str(&format!("Unreferenced controls: {}\n", list(&cov.unreferenced_controls)));
    out
}

/// Convenience wrapper used by tests: runs with in-memory streams and
/// returns `(exit code, stdout, stderr)`.
pub fn run_captured<I, T>(args: I, stdin: &[u8]) -> (ExitCode, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut input = stdin;
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        args,
        &mut Io {
            stdin: &mut input,
            stdout: &mut out,
            stderr: &mut err,
            color: false,
        },
    );
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
