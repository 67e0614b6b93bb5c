use std::fmt;

use thiserror::Error;

use crate::classifier_typeck::check_classifiers;
use crate::core_machine::{check_core, projfvs, run, run_observed, CoreTypeError, Outcome, Stuck};
use crate::elaborator::{elaborate, elaborate_classified, elaborate_expr, elaborate_sigs, CheckKind, ElabError};
use crate::kernel_syntax::{
    freevars, CoreComp, CoreHandler, CoreOpClause, CoreType, EffectRow, Expr, ExprKind, Frame, Nf, SourceProgram, Term,
};
use crate::surface::Mode;
use super::subexpressions;
use crate::source_typeck::{erase, typecheck_program, TypeError, TypedProgram};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("elaboration failed: {0}")]
    Elab(#[from] ElabError),
    #[error(transparent)]
    Stuck(#[from] Stuck),
    #[error("core type error: {0}")]
    Core(#[from] CoreTypeError),
}

/// The class of a run's outcome, as it appears in a matrix cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Value,
    ScopeError,
    Unhandled,
    Fuel,
}

impl Cell {
    pub fn of(o: &Outcome) -> Cell {
        match o {
            Outcome::Value { .. } => Cell::Value,
            Outcome::ScopeError(_) => Cell::ScopeError,
            Outcome::Unhandled(_) => Cell::Unhandled,
            Outcome::FuelExhausted(_) => Cell::Fuel,
        }
    }

    pub fn accepted(self) -> bool {
        self == Cell::Value
    }

    pub fn name(self) -> &'static str {
        match self {
            Cell::Value => "value",
            Cell::ScopeError => "scope-error",
            Cell::Unhandled => "unhandled",
            Cell::Fuel => "fuel-exhausted",
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a check-free run reveals about scope extrusion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NaiveFlags {
    /// The step index of the first configuration returning an ill-scoped AST.
    pub eager_extrusion_seen: Option<usize>,
    /// Whether an ill-scoped AST was returned directly to a `tls` frame.
    pub lazy_extrusion_final: bool,
    /// False when the run ran out of fuel, in which case neither flag is conclusive.
    pub known: bool,
    pub steps: usize,
}

/// One row of the check comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixRow {
    pub id: String,
    pub lazy: Cell,
    pub eager: Cell,
    pub c4c: Cell,
    pub classifiers: bool,
}

impl MatrixRow {
    pub fn cell(&self, kind: CheckKind) -> Option<Cell> {
        match kind {
            CheckKind::Naive => None,
            CheckKind::Lazy => Some(self.lazy),
            CheckKind::Eager => Some(self.eager),
            CheckKind::C4C => Some(self.c4c),
        }
    }
}

/// Everything the relation checks need to know about one program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtrusionReport {
    pub row: MatrixRow,
    pub naive: NaiveFlags,
}

/// Replaces every `check` and `check_M` by `return`.
pub fn erase_checks(t: &Term) -> Term {
    fn nf(n: &Nf) -> Nf {
        match n {
            Nf::Lam(x, body) => Nf::Lam(x.clone(), Box::new(erase_checks(body))),
            Nf::Ast(a) => Nf::ast(a.map(nf)),
            _ => n.clone(),
        }
    }
    match t {
        Term::Check(n) | Term::CheckM(n) => Term::Return(nf(n)),
        Term::Return(n) => Term::Return(nf(n)),
        Term::App(a, b) => Term::App(nf(a), nf(b)),
        Term::Continue(a, b) => Term::Continue(nf(a), nf(b)),
        Term::Arith(op, a, b) => Term::Arith(*op, nf(a), nf(b)),
        Term::Op(op, n) => Term::Op(op.clone(), nf(n)),
        Term::Do(x, a, b) => Term::Do(x.clone(), Box::new(erase_checks(a)), Box::new(erase_checks(b))),
        Term::Handle(body, h) => Term::Handle(
            Box::new(erase_checks(body)),
            CoreHandler {
                ret_var: h.ret_var.clone(),
                ret_body: Box::new(erase_checks(&h.ret_body)),
                ops: h.ops.iter().map(|c| CoreOpClause { body: erase_checks(&c.body), ..c.clone() }).collect(),
            },
        ),
        Term::Dlet(n, body) => Term::Dlet(nf(n), Box::new(erase_checks(body))),
        Term::Tls(body) => Term::Tls(Box::new(erase_checks(body))),
        Term::Mkvar(..) | Term::Err => t.clone(),
    }
}

/// Runs the program without any guard but with every binder declared, and
/// watches for returns of ASTs whose free variables are not declared.
///
/// The run uses the eager elaboration with its checks turned into plain
/// returns: that has the naive elaboration's behaviour (a `dlet` never
/// changes what is computed) while keeping the `dlet` frames that say
/// which variables are in scope.
pub fn analyze_naive(p: &SourceProgram, fuel: usize) -> Result<NaiveFlags, HarnessError> {
    let t = erase_checks(&elaborate(p, CheckKind::Eager)?);
    let mut flags = NaiveFlags::default();
    let mut index = 0;
    let (outcome, steps) = run_observed(t, fuel, |cfg, rule| {
        if rule.is_some() {
            index += 1;
        }
        let Term::Return(n) = &cfg.term else { return };
        if !n.is_ast() {
            return;
        }
        let declared = projfvs(&cfg.stack);
        if freevars(n).is_subset(&declared) {
            return;
        }
        if flags.eager_extrusion_seen.is_none() {
            flags.eager_extrusion_seen = Some(index);
        }
        if matches!(cfg.stack.last(), Some(Frame::Tls)) {
            flags.lazy_extrusion_final = true;
        }
    })?;
    flags.known = !matches!(outcome, Outcome::FuelExhausted(_));
    flags.steps = steps;
    Ok(flags)
}

/// Elaborates under `kind` and runs to an outcome.
pub fn run_kind(p: &SourceProgram, kind: CheckKind, fuel: usize) -> Result<Outcome, HarnessError> {
    Ok(run(elaborate(p, kind)?, fuel, false)?.outcome)
}

/// Runs the three checked elaborations and the classifier checker.
pub fn compare_checks(id: &str, p: &SourceProgram, fuel: usize) -> Result<MatrixRow, HarnessError> {
    let typed = typecheck_program(p)?;
    let checked = &typed.program;
    Ok(MatrixRow {
        id: id.to_string(),
        lazy: Cell::of(&run_kind(checked, CheckKind::Lazy, fuel)?),
        eager: Cell::of(&run_kind(checked, CheckKind::Eager, fuel)?),
        c4c: Cell::of(&run_kind(checked, CheckKind::C4C, fuel)?),
        // The classifier checker fills binders itself; base-mode fillings
        // carry no classifier tags.
        classifiers: check_classifiers(p).is_ok(),
    })
}

pub fn analyze(id: &str, p: &SourceProgram, fuel: usize) -> Result<ExtrusionReport, HarnessError> {
    let typed = typecheck_program(p)?;
    let row = compare_checks(id, p, fuel)?;
    let naive = analyze_naive(&typed.program, fuel)?;
    Ok(ExtrusionReport { row, naive })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    /// Lazy errs exactly when the unchecked run ends in lazy extrusion.
    LazyIffFinal,
    /// Eager acceptance implies C4C acceptance.
    EagerImpliesC4C,
    /// Lazy extrusion in the unchecked run implies a C4C error.
    FinalImpliesC4CError,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub id: String,
    pub relation: Relation,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Verdicts {
    pub checked: usize,
    /// Programs left out because some run did not terminate.
    pub inconclusive: usize,
    pub violations: Vec<Violation>,
}

impl Verdicts {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the relations between the disciplines over terminating programs.
pub fn check_relations<'a>(reports: impl IntoIterator<Item = &'a ExtrusionReport>) -> Verdicts {
    let mut v = Verdicts::default();
    for r in reports {
        let row = &r.row;
        let terminated = [row.lazy, row.eager, row.c4c].iter().all(|c| *c != Cell::Fuel);
        if !r.naive.known || !terminated {
            v.inconclusive += 1;
            continue;
        }
        v.checked += 1;
        let mut fail = |relation| v.violations.push(Violation { id: row.id.clone(), relation });
        if (row.lazy == Cell::ScopeError) != r.naive.lazy_extrusion_final {
            fail(Relation::LazyIffFinal);
        }
        if row.eager.accepted() && !row.c4c.accepted() {
            fail(Relation::EagerImpliesC4C);
        }
        if r.naive.lazy_extrusion_final && row.c4c != Cell::ScopeError {
            fail(Relation::FinalImpliesC4CError);
        }
    }
    v
}

/// The core computation type a closed program's elaboration must have.
pub fn expected_core_type(typed: &TypedProgram) -> CoreComp {
    CoreComp { ty: CoreType::AstComp(erase(&typed.ty), EffectRow::empty()), row: EffectRow::empty() }
}

/// Checks that the elaboration under `kind` is well typed and that every
/// configuration of its run keeps that type. Returns the outcome.
pub fn check_preservation(typed: &TypedProgram, kind: CheckKind, fuel: usize) -> Result<Outcome, HarnessError> {
    let sigs = elaborate_sigs(&typed.program.sigs);
    let expected = expected_core_type(typed);
    let t = elaborate(&typed.program, kind)?;
    check_core(&sigs, &Vec::new(), &t, &expected)?;
    let mut failure = None;
    let (outcome, _) = run_observed(t, fuel, |cfg, rule| {
        if failure.is_some() || rule.is_none() {
            return;
        }
        if let Err(e) = check_core(&sigs, &Vec::new(), &cfg.plugged(), &expected) {
            failure = Some(e);
        }
    })?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(outcome),
    }
}

/// Classifier soundness for one program: if the classifier checker accepts
/// it, its classified elaboration runs to a closed AST.
pub fn classifier_sound(p: &SourceProgram, fuel: usize) -> Result<Option<bool>, HarnessError> {
    let Ok(typed) = check_classifiers(p) else { return Ok(None) };
    let outcome = run(elaborate_classified(&typed.program)?, fuel, false)?.outcome;
    Ok(Some(match outcome {
        Outcome::Value { value, .. } => freevars(&value).is_empty(),
        _ => false,
    }))
}

/// A quote or splice whose round trip elaborates differently from its body.
#[derive(Clone, Debug, PartialEq)]
pub struct DualityFailure {
    pub kind: CheckKind,
    pub expr: Expr,
    pub left: Result<Term, ElabError>,
    pub right: Result<Term, ElabError>,
}

/// Compares `$(<<e>>)` with `e` in quote mode for every quoted body, and
/// `<<$(e)>>` with `e` in splice mode for every spliced body.
pub fn duality_failures(p: &SourceProgram) -> Vec<DualityFailure> {
    let mut out = Vec::new();
    for (e, _) in subexpressions(p) {
        let (inner, wrapped, mode) = match &e.kind {
            ExprKind::Quote(inner) => ((**inner).clone(), Expr::splice(Expr::quote((**inner).clone())), Mode::Quote),
            ExprKind::Splice(inner) => ((**inner).clone(), Expr::quote(Expr::splice((**inner).clone())), Mode::Splice),
            _ => continue,
        };
        for kind in CheckKind::ALL {
            let left = elaborate_expr(&wrapped, mode, kind);
            let right = elaborate_expr(&inner, mode, kind);
            if left != right {
                out.push(DualityFailure { kind, expr: e.clone(), left, right });
            }
        }
    }
    out
}
