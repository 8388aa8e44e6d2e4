//! Checking programs and corpora, and the machine-readable report.
//!
//! The binary in `crates/cli` is a thin argument parser over this module.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dpor::{explore_with, Event, ExplorationReport, ExploreConfig};
use crate::model::Model;
use crate::oracle::{self, Guard, OracleError};
use crate::prog::{parse_program_with_bound, ProgError, Program, DEFAULT_UNROLL};
use crate::trace::{to_dot, RfEdge, TraceDocument, TraceError, WeakTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Emit {
    #[default]
    None,
    Dot,
    Json,
}

impl FromStr for Emit {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Emit, CliError> {
        match s {
            "dot" => Ok(Emit::Dot),
            "json" => Ok(Emit::Json),
            "none" => Ok(Emit::None),
            other => Err(CliError::Usage(format!("unknown emit format `{other}` (expected dot or json)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: Model,
    pub unroll: usize,
    pub max_traces: Option<usize>,
    pub max_nodes: Option<u64>,
    pub stop_at_first: bool,
    pub oracle_check: bool,
    pub emit: Emit,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: Model::Ccv,
            unroll: DEFAULT_UNROLL,
            max_traces: None,
            max_nodes: None,
            stop_at_first: false,
            oracle_check: false,
            emit: Emit::None,
        }
    }
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.unroll == 0 {
            return Err(CliError::Usage("--unroll must be positive".into()));
        }
        if self.max_traces == Some(0) || self.max_nodes == Some(0) {
            return Err(CliError::Usage("budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Safe,
    Unsafe,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "SAFE",
            Verdict::Unsafe => "UNSAFE",
        })
    }
}

impl FromStr for Verdict {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Verdict, CliError> {
        match s.to_ascii_uppercase().as_str() {
            "SAFE" => Ok(Verdict::Safe),
            "UNSAFE" => Ok(Verdict::Unsafe),
            _ => Err(CliError::Expectations(format!("unknown verdict `{s}`"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ProgError },
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("invalid trace: {0}")]
    Trace(#[from] TraceError),
    #[error("invalid trace document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expectations: {0}")]
    Expectations(String),
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub assert_site: String,
    pub observation_sequence: Vec<String>,
    pub rf_edges: Vec<RfEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub nodes: u64,
    /// Wall time; the only field that differs between identical runs.
    pub millis: u128,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub oracle_traces: usize,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub program: String,
    pub model: Model,
    pub verdict: Verdict,
    pub traces: usize,
    pub duplicates: usize,
    pub violations: Vec<ViolationReport>,
    pub stats: Stats,
    #[serde(default, skip_serializing_if = "is_false")]
    pub budget_exceeded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleCheck>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    /// Process exit code: 0 SAFE, 1 UNSAFE, 3 budget exceeded without a
    /// violation. A violation found before the budget ran out is definitive.
    pub fn exit_code(&self) -> i32 {
        match (self.verdict, self.budget_exceeded) {
            (Verdict::Unsafe, _) => 1,
            (Verdict::Safe, true) => 3,
            (Verdict::Safe, false) => 0,
        }
    }
}

/// The result of checking one program.
#[derive(Debug, Clone)]
pub struct Checked {
    pub program: Program,
    pub exploration: ExplorationReport,
    pub report: Report,
}

fn render_event(e: &Event, vars: &[String]) -> String {
    match *e {
        Event::Begin { t } => format!("begin {t}"),
        Event::End { t } => format!("end {t}"),
        Event::Write { t, var } => format!("write {t} {}", vars[var]),
        Event::Read { t, var, source } => format!("read {t} {} from {source}", vars[var]),
    }
}

pub fn load_program(path: &Path, unroll: usize) -> Result<Program, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_program_with_bound(&text, unroll).map_err(|source| CliError::Parse { path: path.to_path_buf(), source })
}

/// Checks one program file.
pub fn run(file: &Path, cfg: &RunConfig) -> Result<Checked, CliError> {
    cfg.validate()?;
    let program = load_program(file, cfg.unroll)?;
    let name = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    check_program(&name, program, cfg)
}

pub fn check_program(name: &str, program: Program, cfg: &RunConfig) -> Result<Checked, CliError> {
    cfg.validate()?;
    let start = Instant::now();
    let ecfg = ExploreConfig {
        max_traces: cfg.max_traces,
        max_nodes: cfg.max_nodes,
        stop_at_first: cfg.stop_at_first,
        check_traces: cfg.oracle_check,
        record_schedules: false,
    };
    let exploration = explore_with(&program, cfg.model, &ecfg);
    let oracle = if cfg.oracle_check {
        let expected = oracle::enumerate_outcomes(&program, cfg.model, Guard::AXIOMATIC)?.weak_set();
        let agrees = exploration.budget_exceeded
            || cfg.stop_at_first
            || (expected == exploration.weak_set()
                && exploration.duplicates == 0
                && exploration.diagnostics.is_empty());
        Some(OracleCheck { oracle_traces: expected.len(), agrees })
    } else {
        None
    };
    let vars = &program.shared_vars;
    let violations = exploration
        .violations
        .iter()
        .map(|v| ViolationReport {
            assert_site: v.assert_site.clone(),
            observation_sequence: v.observation_sequence.iter().map(|e| render_event(e, vars)).collect(),
            rf_edges: v
                .trace
                .rf()
                .iter()
                .map(|&(src, reader, var)| RfEdge { src, reader, var: vars[var].clone() })
                .collect(),
        })
        .collect::<Vec<_>>();
    let report = Report {
        program: name.to_string(),
        model: cfg.model,
        verdict: if violations.is_empty() { Verdict::Safe } else { Verdict::Unsafe },
        traces: exploration.weak_traces.len(),
        duplicates: exploration.duplicates,
        violations,
        stats: Stats { nodes: exploration.nodes, millis: start.elapsed().as_millis() },
        budget_exceeded: exploration.budget_exceeded,
        oracle,
    };
    Ok(Checked { program, exploration, report })
}

/// Writes one file per explored weak trace into `dir`, named by the
/// trace's digest. Returns the paths in exploration order.
pub fn emit_traces(checked: &Checked, format: Emit, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    if format == Emit::None {
        return Ok(Vec::new());
    }
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let vars = &checked.program.shared_vars;
    let mut out = Vec::new();
    for (weak, full) in checked.exploration.weak_traces.iter().zip(&checked.exploration.traces) {
        let (ext, body) = match format {
            Emit::Dot => ("dot", to_dot(full, vars)),
            Emit::Json => ("json", weak.to_json(vars)),
            Emit::None => unreachable!(),
        };
        let path = dir.join(format!("{}.{ext}", weak.digest()));
        std::fs::write(&path, body).map_err(io_err(&path))?;
        out.push(path);
    }
    Ok(out)
}

/// Parses and validates a JSON trace document.
pub fn validate(path: &Path) -> Result<WeakTrace, CliError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let doc: TraceDocument = serde_json::from_str(&text)?;
    Ok(WeakTrace::from_document(&doc)?)
}

/// Expected verdicts per program name.
pub fn parse_expectations(text: &str) -> Result<BTreeMap<String, (Verdict, Verdict)>, CliError> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [name, ccv, cc] = fields[..] else {
            return Err(CliError::Expectations(format!("line {}: expected `name ccv_verdict cc_verdict`", n + 1)));
        };
        out.insert(name.to_string(), (ccv.parse()?, cc.parse()?));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRow {
    pub name: String,
    pub expected: (Verdict, Verdict),
    pub got: (Verdict, Verdict),
    pub millis: u128,
}

impl CorpusRow {
    pub fn pass(&self) -> bool {
        self.expected == self.got
    }
}

#[derive(Debug, Clone, Default)]
pub struct CorpusSummary {
    pub rows: Vec<CorpusRow>,
    pub millis: u128,
}

impl CorpusSummary {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(CorpusRow::pass)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:<16} {:<16} result\n", "program", "expected", "got");
        for r in &self.rows {
            s += &format!(
                "{:<28} {:<16} {:<16} {}\n",
                r.name,
                format!("{}/{}", r.expected.0, r.expected.1),
                format!("{}/{}", r.got.0, r.got.1),
                if r.pass() { "PASS" } else { "FAIL" }
            );
        }
        let passed = self.rows.iter().filter(|r| r.pass()).count();
        s += &format!("{passed}/{} passed in {} ms\n", self.rows.len(), self.millis);
        s
    }
}

/// Checks every program named in `expectations` (as `<dir>/<name>.tpl`)
/// under both models. `cfg.model` is ignored.
pub fn run_corpus(dir: &Path, expectations: &Path, cfg: &RunConfig) -> Result<CorpusSummary, CliError> {
    let text = std::fs::read_to_string(expectations).map_err(io_err(expectations))?;
    let expected = parse_expectations(&text)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for (name, &exp) in &expected {
        let path = dir.join(format!("{name}.tpl"));
        if !path.exists() {
            return Err(CliError::Expectations(format!("missing program {}", path.display())));
        }
        let t = Instant::now();
        let ccv = run(&path, &RunConfig { model: Model::Ccv, emit: Emit::None, ..cfg.clone() })?;
        let cc = run(&path, &RunConfig { model: Model::Cc, emit: Emit::None, ..cfg.clone() })?;
        rows.push(CorpusRow {
            name: name.clone(),
            expected: exp,
            got: (ccv.report.verdict, cc.report.verdict),
            millis: t.elapsed().as_millis(),
        });
    }
    Ok(CorpusSummary { rows, millis: start.elapsed().as_millis() })
}
