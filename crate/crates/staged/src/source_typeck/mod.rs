//! Type checking of staged source programs.
//!
//! Judgements are indexed by a mode. Compile and quote mode type run-time
//! terms with a compile-time row and a run-time row; splice mode types
//! compile-time terms with one row. Quote moves from splice to quote mode
//! and splice moves from compile or quote mode to splice mode.

mod check;
mod erase;

use std::fmt;

use crate::classifier_typeck::{ClassId, ClassifierOrder};
use crate::kernel_syntax::{CompileComp, Expr, Name, RunComp, RunType, SourceProgram, SourceType, Span};
use crate::surface::{Diagnostic, Mode};

pub use erase::{erase, erase_handler};

/// Bindings in scope before the program starts: name, type (its variant
/// gives the level) and, under classifier checking, the classifier of a
/// run-time binding.
pub type TypingContext = Vec<(Name, SourceType, Option<ClassId>)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    /// A variable or term used at the wrong level.
    Mode,
    Unbound,
    Mismatch,
    Effect,
    /// A compile-mode or quote-mode binder lacks its annotation.
    Annotation,
    /// A classifier constraint failed.
    Classifier,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub message: String,
    pub span: Span,
    pub offending: Vec<String>,
}

impl TypeError {
    fn with_offending(mut self, x: &str) -> Self {
        self.offending.push(x.to_string());
        self
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::error(self.message.clone(), self.span).with_offending(self.offending.clone())
    }
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_diagnostic())
    }
}

impl std::error::Error for TypeError {}

/// One expression visited by the checker and the mode it was checked in.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeEntry {
    pub node: &'static str,
    /// The kind of the expression this one is a direct premise of.
    pub parent: &'static str,
    pub mode: Mode,
    pub line: u32,
    pub column: u32,
}

/// A checked program with every binder annotated.
#[derive(Clone, Debug)]
pub struct TypedProgram {
    pub program: SourceProgram,
    /// The run-time type of the generated program.
    pub ty: RunType,
    pub mode_log: Vec<ModeEntry>,
    /// The classifiers introduced, under classifier checking.
    pub order: Option<ClassifierOrder>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InferredType {
    Run(RunComp),
    Compile(CompileComp),
}

/// Checks a closed program: compile mode, both rows empty.
pub fn typecheck_program(p: &SourceProgram) -> Result<TypedProgram, TypeError> {
    typecheck_program_in(p, &Vec::new(), false, ClassifierOrder::new())
}

/// Checks a program starting from `ctx`. With `classify` set, classifiers
/// are checked as well; `order` then declares the classifiers `ctx` uses.
pub fn typecheck_program_in(
    p: &SourceProgram,
    ctx: &TypingContext,
    classify: bool,
    order: ClassifierOrder,
) -> Result<TypedProgram, TypeError> {
    check::Engine::new(&p.sigs, classify, order).check_program(p, ctx)
}

/// Infers the type of a single expression checked in `mode`, using the
/// signatures of `p`.
pub fn infer(p: &SourceProgram, ctx: &TypingContext, mode: Mode, e: &Expr) -> Result<InferredType, TypeError> {
    check::Engine::new(&p.sigs, false, ClassifierOrder::new()).infer(ctx, e, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::{CompileType, EffectRow, ExprKind, Stage, Value};
    use crate::surface::{parse_program, print_source};

    fn check(src: &str) -> Result<TypedProgram, TypeError> {
        typecheck_program(&parse_program(src).unwrap())
    }

    #[test]
    fn splice_identity() {
        let t = check("$(do x <- <<return 0>> in (fun z -> return z) x)").unwrap();
        assert_eq!(t.ty, RunType::Nat);
    }

    #[test]
    fn minimal_splice() {
        assert_eq!(check("$(return <<0>>)").unwrap().ty, RunType::Nat);
        assert_eq!(check("$(<<0>>)").unwrap().ty, RunType::Nat);
    }

    #[test]
    fn unhandled_run_time_op() {
        let e = check("effect tick : Nat -> Nat\n perform tick(1)").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Effect);
        assert!(e.message.contains("tick ∉ ξ"), "{}", e.message);
    }

    #[test]
    fn missing_clause_is_an_error() {
        let e = check(
            "effect a : Nat -> Nat\neffect b : Nat -> Nat\n\
             handle (do x <- perform a(1) in perform b(x)) with { return(x) -> return x ; a(v, k) -> continue k v }",
        )
        .unwrap_err();
        assert!(e.message.contains("b"), "{}", e.message);
    }

    #[test]
    fn handled_ops_disappear() {
        let t = check(
            "effect a : Nat -> Nat\n handle perform a(1) with { return(x) -> return x ; a(v, k) -> continue k (v + 1) }",
        );
        assert_eq!(t.unwrap().ty, RunType::Nat);
    }

    #[test]
    fn literal_in_compile_mode() {
        let p = parse_program("return 3").unwrap();
        let t = infer(&p, &Vec::new(), Mode::Compile, &p.body).unwrap();
        assert_eq!(t, InferredType::Run(RunComp { ty: RunType::Nat, compile_row: EffectRow::empty(), run_row: EffectRow::empty() }));
    }

    #[test]
    fn running_example_shape() {
        // Applying spliced code of a function type inside splice mode.
        let src = "effect print : Nat -> Nat\neffect readInt : Nat -> Nat\neffect^ get : Nat -> Code(Nat ! {print, readInt})\n\
                   handle $(do e <- <<fun (y : Nat) -> do r <- perform readInt(y) in perform print(r)>> in \
                      do e2 <- perform get(0) in <<$e $e2>>) with { return(x) -> return x ; print(v, k) -> continue k v ; readInt(v, k) -> continue k v }";
        let p = parse_program(src).unwrap();
        let ExprKind::Handle { body, .. } = &p.body.kind else { panic!() };
        let ExprKind::Splice(inner) = &body.kind else { panic!() };
        let InferredType::Compile(c) = infer(&p, &Vec::new(), Mode::Splice, inner).unwrap() else { panic!() };
        let CompileType::Code(_, run, _) = c.ty else { panic!() };
        assert_eq!(run, ["print", "readInt"].into_iter().collect::<EffectRow>());
        assert_eq!(c.row, EffectRow::single("get"));
    }

    #[test]
    fn compile_time_variable_in_quote_mode() {
        let e = check("$(do c <- return 1 in <<c>>)").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Mode);
        assert_eq!(e.offending, vec!["c".to_string()]);
    }

    #[test]
    fn run_time_variable_in_splice_mode() {
        let e = check("return (fun (x : Nat) -> $(return x))").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Mode);
    }

    #[test]
    fn unannotated_quote_binder_is_rejected() {
        let e = check("$(<<fun x -> return x>>)").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Annotation);
    }

    #[test]
    fn binders_are_annotated_after_checking() {
        let t = check("$(do c <- <<fun (x : Nat) -> do y <- return x in return y>> in return c)").unwrap();
        let ExprKind::Splice(inner) = &t.program.body.kind else { panic!() };
        let ExprKind::Do { binder, bound, .. } = &inner.kind else { panic!() };
        assert!(matches!(binder.ann, Some(SourceType::Compile(CompileType::Code(..)))));
        let ExprKind::Quote(q) = &bound.kind else { panic!() };
        let ExprKind::Return(Value::Lam { body, .. }) = &q.kind else { panic!() };
        let ExprKind::Do { binder, .. } = &body.kind else { panic!() };
        assert_eq!(binder.ann, Some(SourceType::Run(RunType::Nat)));
        // Printing and reparsing an annotated program gives the same checked program.
        let again = check(&print_source(&t.program)).unwrap();
        assert_eq!(again.program, t.program);
    }

    #[test]
    fn compile_time_effects_must_be_handled() {
        let e = check("effect^ get : Nat -> Code(Nat)\n $(perform get(0))").unwrap_err();
        assert!(e.message.contains("get ∉ Δ"), "{}", e.message);
        let ok = check(
            "effect^ get : Nat -> Code(Nat)\n $(handle perform get(0) with { return(c) -> return c ; get(v, k) -> return <<v>> })",
        );
        assert!(ok.is_err(), "v is compile-time and cannot be quoted");
        check("effect^ get : Nat -> Code(Nat)\n $(handle perform get(0) with { return(c) -> return c ; get(v, k) -> continue k <<0>> })")
            .unwrap();
    }

    #[test]
    fn mode_log_tracks_quotes_and_splices() {
        let t = check("$(do x <- <<return 0>> in (fun z -> return z) x)").unwrap();
        for entry in &t.mode_log {
            match entry.parent {
                "quote" => assert_eq!(entry.mode, Mode::Quote),
                "splice" => assert_eq!(entry.mode, Mode::Splice),
                _ => {}
            }
        }
        assert!(t.mode_log.iter().any(|e| e.parent == "quote"));
        let _ = Stage::Run;
    }
}
