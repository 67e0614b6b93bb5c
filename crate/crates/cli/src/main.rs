use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use staged::classifier_typeck::check_classifiers;
use staged::core_machine::{run, typecheck_core, Outcome, RunResult, DEFAULT_FUEL};
use staged::elaborator::{elaborate, CheckKind};
use staged::harness::{compare_checks, gen_program, run_corpus, Cell, CorpusError, MatrixRow};
use staged::kernel_syntax::SourceProgram;
use staged::source_typeck::typecheck_program;
use staged::surface::{parse_core_program, parse_program, print_core, print_nf, print_run_type, print_source, Diagnostic};

/// Writes a line to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! out_raw {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

const EXIT_OK: u8 = 0;
const EXIT_SCOPE: u8 = 2;
const EXIT_STATIC: u8 = 3;
const EXIT_UNHANDLED: u8 = 4;
const EXIT_FUEL: u8 = 5;
const EXIT_USAGE: u8 = 64;
/// Internal failures such as stuck states, which well-typed programs never reach.
const EXIT_INTERNAL: u8 = 70;

#[derive(Parser)]
#[command(name = "staged", version, about = "Type check, elaborate and run two-stage programs with effect handlers")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StaticCheck {
    Base,
    Classifiers,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Naive,
    Lazy,
    Eager,
    C4c,
}

impl From<KindArg> for CheckKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Naive => CheckKind::Naive,
            KindArg::Lazy => CheckKind::Lazy,
            KindArg::Eager => CheckKind::Eager,
            KindArg::C4c => CheckKind::C4C,
        }
    }
}

#[derive(Args)]
struct KindOpt {
    #[arg(long, value_enum, default_value_t = KindArg::Lazy)]
    kind: KindArg,
}

#[derive(Subcommand)]
enum Command {
    /// Type check a source program.
    Typecheck {
        file: PathBuf,
        #[arg(long = "static", value_enum, default_value_t = StaticCheck::Base)]
        static_check: StaticCheck,
    },
    /// Print the core term a source program elaborates to.
    Elaborate {
        file: PathBuf,
        #[command(flatten)]
        kind: KindOpt,
    },
    /// Run a source (.sl) or core (.core) program on the machine.
    Run {
        file: PathBuf,
        #[command(flatten)]
        kind: KindOpt,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        /// Print one line per machine transition.
        #[arg(long)]
        trace: bool,
    },
    /// Compare the dynamic checks and the classifier checker on each file.
    Matrix {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Run the bundled listings and compare them with the expected grid.
    Corpus {
        #[arg(long, default_value = "listings")]
        dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Print a generated well-typed program.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        size: usize,
    },
}

/// A failure that ends the command with the given exit code.
struct Failure {
    code: u8,
    diagnostics: Vec<Diagnostic>,
    message: Option<String>,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, diagnostics: vec![], message: Some(message.into()) }
    }

    fn diagnostics(code: u8, diagnostics: Vec<Diagnostic>) -> Self {
        Failure { code, diagnostics, message: None }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure { code: EXIT_INTERNAL, diagnostics: vec![], message: Some(message.into()) }
    }

    fn report(&self, file: Option<&Path>, format: Format) {
        let prefix = file.map(|f| format!("{}:", f.display())).unwrap_or_default();
        match format {
            Format::Text => {
                if let Some(m) = &self.message {
                    eprintln!("{prefix}{m}");
                }
                for d in &self.diagnostics {
                    eprintln!("{prefix}{d}");
                }
            }
            Format::Structured => {
                let ds: Vec<_> = self.diagnostics.iter().map(Diagnostic::to_json).collect();
                eprintln!("{}", json!({ "file": file.map(|f| f.display().to_string()), "message": self.message, "diagnostics": ds }));
            }
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<SourceProgram, Failure> {
    parse_program(&read(path)?).map_err(|ds| Failure::diagnostics(EXIT_STATIC, ds))
}

fn static_error(e: staged::source_typeck::TypeError) -> Failure {
    Failure::diagnostics(EXIT_STATIC, vec![e.to_diagnostic()])
}

fn exit_code(o: &Outcome) -> u8 {
    match Cell::of(o) {
        Cell::Value => EXIT_OK,
        Cell::ScopeError => EXIT_SCOPE,
        Cell::Unhandled => EXIT_UNHANDLED,
        Cell::Fuel => EXIT_FUEL,
    }
}

fn typecheck(file: &Path, check: StaticCheck, format: Format) -> CmdResult {
    let p = load(file)?;
    let typed = match check {
        StaticCheck::Base => typecheck_program(&p),
        StaticCheck::Classifiers => check_classifiers(&p),
    }
    .map_err(static_error)?;
    let ty = print_run_type(&typed.ty);
    match format {
        Format::Text => out!("{ty}"),
        Format::Structured => out!("{}", json!({ "file": file.display().to_string(), "type": ty })),
    }
    Ok(EXIT_OK)
}

fn elaborate_file(file: &Path, kind: CheckKind, format: Format) -> CmdResult {
    let typed = typecheck_program(&load(file)?).map_err(static_error)?;
    let term = elaborate(&typed.program, kind).map_err(|e| Failure::internal(e.to_string()))?;
    let printed = print_core(&term);
    match format {
        Format::Text => out!("{printed}"),
        Format::Structured => out!("{}", json!({ "file": file.display().to_string(), "kind": kind.name(), "core": printed })),
    }
    Ok(EXIT_OK)
}

fn run_file(file: &Path, kind: CheckKind, fuel: usize, trace: bool, format: Format) -> CmdResult {
    let term = if file.extension().is_some_and(|e| e == "core") {
        let program = parse_core_program(&read(file)?).map_err(|ds| Failure::diagnostics(EXIT_STATIC, ds))?;
        typecheck_core(&program.sigs, &Vec::new(), &program.body)
            .map_err(|e| Failure { code: EXIT_STATIC, diagnostics: vec![], message: Some(e.to_string()) })?;
        program.body
    } else {
        let typed = typecheck_program(&load(file)?).map_err(static_error)?;
        elaborate(&typed.program, kind).map_err(|e| Failure::internal(e.to_string()))?
    };
    let result = run(term, fuel, trace).map_err(|e| Failure::internal(e.to_string()))?;
    print_run(file, kind, &result, format);
    Ok(exit_code(&result.outcome))
}

fn print_run(file: &Path, kind: CheckKind, result: &RunResult, format: Format) {
    let trace = result.trace.as_deref().unwrap_or_default();
    match format {
        Format::Text => {
            for record in trace {
                out!("{record}");
            }
            match &result.outcome {
                Outcome::Value { value, .. } => out!("{}", print_nf(value)),
                Outcome::ScopeError(d) => {
                    let vars: Vec<String> = d.offending.iter().map(|p| format!("α{}", p.id)).collect();
                    eprintln!("{}: scope extrusion detected; offending [{}] in {}", file.display(), vars.join(", "), print_nf(&d.ast));
                }
                Outcome::Unhandled(op) => eprintln!("{}: unhandled operation {op}", file.display()),
                Outcome::FuelExhausted(n) => eprintln!("{}: fuel exhausted after {n} steps", file.display()),
            }
        }
        Format::Structured => {
            let mut record = json!({
                "file": file.display().to_string(),
                "kind": kind.name(),
                "outcome": Cell::of(&result.outcome).name(),
                "steps": result.steps,
            });
            match &result.outcome {
                Outcome::Value { value, .. } => record["value"] = json!(print_nf(value)),
                Outcome::ScopeError(d) => {
                    record["offending"] = json!(d.offending.iter().map(|p| format!("α{}", p.id)).collect::<Vec<_>>());
                    record["ast"] = json!(print_nf(&d.ast));
                }
                Outcome::Unhandled(op) => record["operation"] = json!(op),
                Outcome::FuelExhausted(_) => {}
            }
            if result.trace.is_some() {
                record["trace"] = json!(trace.iter().map(ToString::to_string).collect::<Vec<_>>());
            }
            out!("{record}");
        }
    }
}

fn matrix_cell(row: &MatrixRow, kind: CheckKind) -> &'static str {
    row.cell(kind).map_or("-", Cell::name)
}

fn matrix(files: &[PathBuf], fuel: usize, format: Format) -> CmdResult {
    let mut worst = EXIT_OK;
    if format == Format::Text {
        out!("{:<28} {:>12} {:>12} {:>12} {:>12}", "listing", "lazy", "eager", "c4c", "classifiers");
    }
    for file in files {
        let id = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let row = match load(file).and_then(|p| compare_checks(&id, &p, fuel).map_err(|e| Failure::internal(e.to_string()))) {
            Ok(row) => row,
            Err(f) => {
                f.report(Some(file), format);
                worst = worst.max(f.code);
                continue;
            }
        };
        let classifiers = if row.classifiers { "accept" } else { "reject" };
        match format {
            Format::Text => out!(
                "{:<28} {:>12} {:>12} {:>12} {:>12}",
                id,
                matrix_cell(&row, CheckKind::Lazy),
                matrix_cell(&row, CheckKind::Eager),
                matrix_cell(&row, CheckKind::C4C),
                classifiers
            ),
            Format::Structured => {
                for kind in CheckKind::CHECKED {
                    out!("{}", json!({ "listing": id, "check": kind.name(), "outcome": matrix_cell(&row, kind) }));
                }
                out!("{}", json!({ "listing": id, "check": "classifiers", "outcome": classifiers }));
            }
        }
    }
    Ok(worst)
}

fn corpus(dir: &Path, fuel: usize, format: Format) -> CmdResult {
    let report = run_corpus(dir, fuel).map_err(|e| match e {
        CorpusError::Missing(_) | CorpusError::Io { .. } => Failure::usage(e.to_string()),
        CorpusError::Parse { diagnostics, .. } => Failure::diagnostics(EXIT_STATIC, diagnostics),
        other => Failure::internal(other.to_string()),
    })?;
    match format {
        Format::Text => out_raw!("{}", report.render_text()),
        Format::Structured => {
            for record in report.records() {
                out!("{record}");
            }
        }
    }
    Ok(if report.passed() { EXIT_OK } else { 1 })
}

fn gen(seed: u64, size: usize, format: Format) -> CmdResult {
    let text = print_source(&gen_program(seed, size));
    match format {
        Format::Text => out_raw!("{text}"),
        Format::Structured => out!("{}", json!({ "seed": seed, "size": size, "program": text })),
    }
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let format = cli.format;
    let (file, result) = match &cli.command {
        Command::Typecheck { file, static_check } => (Some(file.as_path()), typecheck(file, *static_check, format)),
        Command::Elaborate { file, kind } => (Some(file.as_path()), elaborate_file(file, kind.kind.into(), format)),
        Command::Run { file, kind, fuel, trace } => (Some(file.as_path()), run_file(file, kind.kind.into(), *fuel, *trace, format)),
        Command::Matrix { files, fuel } => (None, matrix(files, *fuel, format)),
        Command::Corpus { dir, fuel } => (None, corpus(dir, *fuel, format)),
        Command::Gen { seed, size } => (None, gen(*seed, *size, format)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            failure.report(file, format);
            ExitCode::from(failure.code)
        }
    }
}
