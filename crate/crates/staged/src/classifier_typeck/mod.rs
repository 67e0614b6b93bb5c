//! Static scope-extrusion checking with environment classifiers.
//!
//! A classifier names a scope. Every compile-mode or quote-mode binder opens
//! a fresh classifier above the current one, run-time variables are usable
//! only at classifiers above the one they were bound at, and `Code` types
//! record the classifier their free variables need.
//!
//! The checker is algorithmic. Each quote is given the least classifier on
//! the chain of the current scope at which its body checks, and
//! subsumption is applied only where a `Code` value meets an expected
//! type (operation arguments, function arguments, handler results and
//! splices).

mod order;

pub use order::{ClassId, ClassifierOrder, BOTTOM};

use crate::kernel_syntax::{Name, SourceProgram, SourceType};
use crate::source_typeck::{typecheck_program_in, TypeError, TypedProgram, TypingContext};

/// The context a classifier-checked term starts in: declared classifiers
/// and their order, plus variables. Run-time variables carry a classifier.
#[derive(Clone, Debug, Default)]
pub struct ClassifierContext {
    pub order: ClassifierOrder,
    pub vars: TypingContext,
}

impl ClassifierContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self) -> ClassId {
        self.order.declare()
    }

    pub fn fresh_above(&mut self, g: ClassId) -> ClassId {
        self.order.fresh_above(g)
    }

    pub fn relate(&mut self, lo: ClassId, hi: ClassId) {
        self.order.relate(lo, hi);
    }

    pub fn bind(&mut self, name: impl Into<Name>, ty: SourceType, class: Option<ClassId>) {
        self.vars.push((name.into(), ty, class));
    }
}

/// `lo ⊑ hi` under the facts of `ctx`.
pub fn entails(ctx: &ClassifierContext, lo: ClassId, hi: ClassId) -> bool {
    ctx.order.entails(lo, hi)
}

/// Checks a closed program under classifier typing.
pub fn check_classifiers(p: &SourceProgram) -> Result<TypedProgram, TypeError> {
    check_classifiers_in(&ClassifierContext::new(), p)
}

pub fn check_classifiers_in(ctx: &ClassifierContext, p: &SourceProgram) -> Result<TypedProgram, TypeError> {
    typecheck_program_in(p, &ctx.vars, true, ctx.order.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source_typeck::TypeErrorKind;
    use crate::surface::parse_program;

    const OP: &str = "effect^ op : Code(Nat)@g -> Code(Nat)@g\n";

    fn check(src: &str) -> Result<TypedProgram, TypeError> {
        check_classifiers(&parse_program(src).unwrap())
    }

    #[test]
    fn entailment() {
        let mut ctx = ClassifierContext::new();
        let g1 = ctx.fresh_above(BOTTOM);
        let g2 = ctx.fresh_above(g1);
        assert!(entails(&ctx, g1, g1));
        assert!(entails(&ctx, BOTTOM, g2));
        assert!(!entails(&ctx, g2, g1));
    }

    #[test]
    fn pure_program_is_accepted() {
        check("do x <- return 1 in return x").unwrap();
    }

    #[test]
    fn handler_in_scope_of_the_variable_is_accepted() {
        let src = format!(
            "{OP}return (fun (z : Nat) -> $(handle <<fun (x : Nat) -> return $(perform op(<<z>>))>> \
             with {{ return(u) -> return u ; op(y, k) -> continue k y }}))"
        );
        check(&src).unwrap();
    }

    #[test]
    fn passing_a_bound_variable_out_is_rejected() {
        let src = format!(
            "{OP}$(handle <<fun (x : Nat) -> $(perform op(<<x>>))>> \
             with {{ return(u) -> return u ; op(y, k) -> continue k y }})"
        );
        let e = check(&src).unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Classifier);
    }

    #[test]
    fn untagged_compile_time_result_is_rejected() {
        let e = check("effect^ op : Nat -> Nat\n return 0").unwrap_err();
        assert_eq!(e.kind, TypeErrorKind::Classifier);
    }

    #[test]
    fn perform_outside_a_fixing_handler() {
        let e = check(&format!("{OP}$(perform op(<<0>>))")).unwrap_err();
        assert!(e.message.contains("outside"), "{}", e.message);
    }

    #[test]
    fn one_top_level_splice() {
        let e = check("do a <- $(<<1>>) in $(<<a>>)");
        assert!(e.is_err());
        check("do a <- return 1 in $(<<1>>)").unwrap();
    }

    #[test]
    fn binders_get_distinct_fresh_classifiers() {
        let src = format!(
            "{OP}return (fun (z : Nat) -> $(handle <<fun (x : Nat) -> return $(perform op(<<z>>))>> \
             with {{ return(u) -> return u ; op(y, k) -> continue k y }}))"
        );
        let t = check(&src).unwrap();
        let mut seen = Vec::new();
        collect(&t.program.body, &mut seen);
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), seen.len());
        assert!(seen.iter().all(|g| *g != BOTTOM));
    }

    fn collect(e: &crate::kernel_syntax::Expr, out: &mut Vec<ClassId>) {
        use crate::kernel_syntax::{ExprKind, Value};
        let value = |v: &Value, out: &mut Vec<ClassId>| {
            if let Value::Lam { binder, body } = v {
                out.extend(binder.classifier);
                collect(body, out);
            }
        };
        match &e.kind {
            ExprKind::App(a, b) | ExprKind::Continue(a, b) | ExprKind::Arith(_, a, b) => {
                value(a, out);
                value(b, out);
            }
            ExprKind::Return(v) | ExprKind::Op { arg: v, .. } => value(v, out),
            ExprKind::Do { binder, bound, body } => {
                collect(bound, out);
                out.extend(binder.classifier);
                collect(body, out);
            }
            ExprKind::Handle { body, handler } => {
                collect(body, out);
                out.extend(handler.ret.binder.classifier);
                collect(&handler.ret.body, out);
                for c in &handler.ops {
                    out.extend(c.arg.classifier);
                    collect(&c.body, out);
                }
            }
            ExprKind::Quote(i) | ExprKind::Splice(i) => collect(i, out),
        }
    }
}
