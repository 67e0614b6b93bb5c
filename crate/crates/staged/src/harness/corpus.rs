use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;
use thiserror::Error;

use super::analysis::{compare_checks, run_kind, HarnessError, MatrixRow};
use crate::source_typeck::typecheck_program;
use crate::core_machine::{run, typecheck_core, Outcome};
use crate::elaborator::CheckKind;
use crate::kernel_syntax::Nf;
use crate::surface::{parse_core_program, parse_program, print_nf, Diagnostic};

/// Expected acceptance of one corpus listing: lazy, eager, c4c, classifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GoldenRow {
    pub id: &'static str,
    pub file: &'static str,
    pub lazy: bool,
    pub eager: bool,
    pub c4c: bool,
    pub classifiers: bool,
}

const fn row(id: &'static str, file: &'static str, lazy: bool, eager: bool, c4c: bool, cls: bool) -> GoldenRow {
    GoldenRow { id, file, lazy, eager, c4c, classifiers: cls }
}

/// The five discriminating listings, in table order.
pub const MATRIX_LISTINGS: [GoldenRow; 5] = [
    row("offending_discarded", "offending_discarded.sl", true, true, true, false),
    row("safe_uses", "safe_uses.sl", true, true, true, false),
    row("eager_false_positive", "eager_false_positive.sl", true, false, true, false),
    row("c4c_false_positive", "c4c_false_positive.sl", true, false, false, false),
    row("classifier_safe", "classifier_safe.sl", true, true, true, true),
];

/// Further source listings checked against the same grid.
pub const EXTRA_LISTINGS: [GoldenRow; 2] = [
    row("eager_extrusion", "eager_extrusion.sl", false, false, false, false),
    row("splice_identity", "splice_identity.sl", true, true, true, true),
];

/// Core-level listings and the printed value they must produce.
pub const CORE_LISTINGS: [(&str, &str, &str); 1] = [("accum", "accum.core", "22")];

/// The printed result every kind must produce for `splice_identity`.
pub const SPLICE_IDENTITY_VALUE: &str = "Ret(Nat(0))";

impl GoldenRow {
    pub fn expected(&self, kind: CheckKind) -> bool {
        match kind {
            CheckKind::Naive => true,
            CheckKind::Lazy => self.lazy,
            CheckKind::Eager => self.eager,
            CheckKind::C4C => self.c4c,
        }
    }

    pub fn matches(&self, r: &MatrixRow) -> bool {
        CheckKind::CHECKED.iter().all(|&k| r.cell(k).is_some_and(|c| c.accepted()) == self.expected(k))
            && r.classifiers == self.classifiers
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file {0} is missing")]
    Missing(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {}", .diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Parse { path: PathBuf, diagnostics: Vec<Diagnostic> },
    #[error("{path}: {source}")]
    Analysis { path: PathBuf, source: HarnessError },
}

#[derive(Clone, Debug)]
pub struct ListingResult {
    pub golden: GoldenRow,
    pub row: MatrixRow,
}

impl ListingResult {
    pub fn matches(&self) -> bool {
        self.golden.matches(&self.row)
    }
}

#[derive(Clone, Debug)]
pub struct ValueResult {
    pub id: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Clone, Debug, Default)]
pub struct CorpusReport {
    pub listings: Vec<ListingResult>,
    pub values: Vec<ValueResult>,
}

fn yn(b: bool) -> &'static str {
    if b {
        "Y"
    } else {
        "N"
    }
}

impl CorpusReport {
    pub fn passed(&self) -> bool {
        self.listings.iter().all(ListingResult::matches) && self.values.iter().all(|v| v.expected == v.actual)
    }

    /// The grid of accepted (Y) and rejected (N) cells, one line per check.
    pub fn grid(&self) -> String {
        let mut out = String::new();
        let ids: Vec<&str> = self.listings.iter().map(|l| l.row.id.as_str()).collect();
        let _ = writeln!(out, "{:<12} {}", "", ids.join(" "));
        let mut line = |name: &str, cell: &dyn Fn(&MatrixRow) -> bool| {
            let cells: Vec<String> =
                self.listings.iter().map(|l| format!("{:<w$}", yn(cell(&l.row)), w = l.row.id.len())).collect();
            let _ = writeln!(out, "{name:<12} {}", cells.join(" ").trim_end());
        };
        line("lazy", &|r| r.lazy.accepted());
        line("eager", &|r| r.eager.accepted());
        line("c4c", &|r| r.c4c.accepted());
        line("classifiers", &|r| r.classifiers);
        out
    }

    /// Human-readable report: the grid, value checks, and any mismatch.
    pub fn render_text(&self) -> String {
        let mut out = self.grid();
        for v in &self.values {
            let _ = writeln!(out, "{}: {} (expected {})", v.id, v.actual, v.expected);
        }
        for l in self.listings.iter().filter(|l| !l.matches()) {
            let g = &l.golden;
            let r = &l.row;
            let _ = writeln!(
                out,
                "MISMATCH {}: expected {}{}{}{} got {}{}{}{}",
                g.id,
                yn(g.lazy),
                yn(g.eager),
                yn(g.c4c),
                yn(g.classifiers),
                yn(r.lazy.accepted()),
                yn(r.eager.accepted()),
                yn(r.c4c.accepted()),
                yn(r.classifiers)
            );
        }
        let _ = writeln!(out, "{}", if self.passed() { "corpus matches golden grid" } else { "corpus differs from golden grid" });
        out
    }

    /// One record per cell.
    pub fn records(&self) -> Vec<serde_json::Value> {
        let mut out = Vec::new();
        for l in &self.listings {
            for k in CheckKind::CHECKED {
                let cell = l.row.cell(k).expect("checked kinds have cells");
                out.push(json!({
                    "listing": l.row.id,
                    "check": k.name(),
                    "outcome": yn(cell.accepted()),
                    "result": cell.name(),
                    "expected": yn(l.golden.expected(k)),
                }));
            }
            out.push(json!({
                "listing": l.row.id,
                "check": "classifiers",
                "outcome": yn(l.row.classifiers),
                "expected": yn(l.golden.classifiers),
            }));
        }
        for v in &self.values {
            out.push(json!({ "listing": v.id, "check": "value", "outcome": v.actual, "expected": v.expected }));
        }
        out
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    if !path.exists() {
        return Err(CorpusError::Missing(path.to_path_buf()));
    }
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

fn printed(o: &Outcome) -> String {
    match o {
        Outcome::Value { value, .. } => print_nf(value),
        Outcome::ScopeError(_) => "scope-error".into(),
        Outcome::Unhandled(op) => format!("unhandled {op}"),
        Outcome::FuelExhausted(n) => format!("fuel exhausted after {n} steps"),
    }
}

/// Evaluates a core-level listing.
pub fn run_core_file(path: &Path, fuel: usize) -> Result<Outcome, CorpusError> {
    let text = read(path)?;
    let program =
        parse_core_program(&text).map_err(|diagnostics| CorpusError::Parse { path: path.to_path_buf(), diagnostics })?;
    typecheck_core(&program.sigs, &Vec::new(), &program.body)
        .map_err(|e| CorpusError::Analysis { path: path.to_path_buf(), source: e.into() })?;
    run(program.body, fuel, false)
        .map(|r| r.outcome)
        .map_err(|e| CorpusError::Analysis { path: path.to_path_buf(), source: e.into() })
}

/// Runs every bundled listing found in `dir` and compares with the golden grid.
pub fn run_corpus(dir: &Path, fuel: usize) -> Result<CorpusReport, CorpusError> {
    let mut report = CorpusReport::default();
    for golden in MATRIX_LISTINGS.iter().chain(EXTRA_LISTINGS.iter()) {
        let path = dir.join(golden.file);
        let text = read(&path)?;
        let p = parse_program(&text).map_err(|diagnostics| CorpusError::Parse { path: path.clone(), diagnostics })?;
        let row = compare_checks(golden.id, &p, fuel).map_err(|source| CorpusError::Analysis { path: path.clone(), source })?;
        if golden.id == "splice_identity" {
            let analysis = |source| CorpusError::Analysis { path: path.clone(), source };
            let typed = typecheck_program(&p).map_err(|e| analysis(e.into()))?;
            for k in CheckKind::ALL {
                let outcome = run_kind(&typed.program, k, fuel).map_err(analysis)?;
                report.values.push(ValueResult {
                    id: format!("splice_identity/{k}"),
                    expected: SPLICE_IDENTITY_VALUE.into(),
                    actual: printed(&outcome),
                });
            }
        }
        report.listings.push(ListingResult { golden: *golden, row });
    }
    for (id, file, expected) in CORE_LISTINGS {
        let outcome = run_core_file(&dir.join(file), fuel)?;
        report.values.push(ValueResult { id: id.into(), expected: expected.into(), actual: printed(&outcome) });
    }
    Ok(report)
}

/// The value of a successful run, if any.
pub fn value_of(o: &Outcome) -> Option<&Nf> {
    match o {
        Outcome::Value { value, .. } => Some(value),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn listings() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../listings")
    }

    #[test]
    fn bundled_corpus_matches_golden() {
        let report = run_corpus(&listings(), crate::core_machine::DEFAULT_FUEL).unwrap();
        assert!(report.passed(), "{}", report.render_text());
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = std::env::temp_dir().join("staged-empty-corpus");
        std::fs::create_dir_all(&dir).unwrap();
        assert!(matches!(run_corpus(&dir, 10), Err(CorpusError::Missing(_))));
    }
}
