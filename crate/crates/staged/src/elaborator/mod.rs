//! Translation of checked source programs into the core calculus.
//!
//! Compile- and quote-mode code becomes AST construction (`mkvar` plus
//! constructors), splice-mode code keeps its shape, and compile-mode
//! splices are wrapped in `tls`. The [`CheckKind`] decides which dynamic
//! scope checks are woven in on top of that.

mod terms;
mod types;

pub use terms::{elaborate, elaborate_classified, elaborate_expr, CheckKind, ElabError};
pub use types::*;

use crate::kernel_syntax::{subst, CoreHandler, Nf, Term};

/// Counts of the nodes that distinguish the disciplines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Census {
    pub check: usize,
    pub check_m: usize,
    pub dlet: usize,
    pub tls: usize,
    pub mkvar: usize,
}

impl Census {
    pub fn of(t: &Term) -> Census {
        let mut c = Census::default();
        c.term(t);
        c
    }

    fn nf(&mut self, n: &Nf) {
        match n {
            Nf::Lam(_, body) => self.term(body),
            Nf::Ast(a) => a.children().into_iter().for_each(|c| self.nf(c)),
            Nf::Kont(k) => self.term(&k.body()),
            Nf::Var(_) | Nf::Nat(_) | Nf::Param(_) => {}
        }
    }

    fn handler(&mut self, h: &CoreHandler) {
        self.term(&h.ret_body);
        for c in &h.ops {
            self.term(&c.body);
        }
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::App(a, b) | Term::Continue(a, b) | Term::Arith(_, a, b) => {
                self.nf(a);
                self.nf(b);
            }
            Term::Return(n) | Term::Op(_, n) => self.nf(n),
            Term::Do(_, a, b) => {
                self.term(a);
                self.term(b);
            }
            Term::Handle(body, h) => {
                self.term(body);
                self.handler(h);
            }
            Term::Check(n) => {
                self.check += 1;
                self.nf(n);
            }
            Term::CheckM(n) => {
                self.check_m += 1;
                self.nf(n);
            }
            Term::Mkvar(..) => self.mkvar += 1,
            Term::Dlet(n, body) => {
                self.dlet += 1;
                self.nf(n);
                self.term(body);
            }
            Term::Tls(body) => {
                self.tls += 1;
                self.term(body);
            }
            Term::Err => {}
        }
    }
}

/// True for the names elaboration invents (they contain a `.`).
pub fn is_admin_name(x: &str) -> bool {
    x.contains('.')
}

/// Contracts every administrative `do a ← return n in t` to `t[n/a]`, the
/// form in which elaborations are usually written by hand.
pub fn normalize_admin(t: &Term) -> Term {
    match t {
        Term::Do(x, bound, body) => {
            let bound = normalize_admin(bound);
            match bound {
                Term::Return(n) if is_admin_name(x) => normalize_admin(&subst(body, &n, x)),
                bound => Term::Do(x.clone(), Box::new(bound), Box::new(normalize_admin(body))),
            }
        }
        Term::Return(n) => Term::Return(normalize_nf(n)),
        Term::App(a, b) => Term::App(normalize_nf(a), normalize_nf(b)),
        Term::Continue(a, b) => Term::Continue(normalize_nf(a), normalize_nf(b)),
        Term::Arith(op, a, b) => Term::Arith(*op, normalize_nf(a), normalize_nf(b)),
        Term::Op(op, n) => Term::Op(op.clone(), normalize_nf(n)),
        Term::Handle(body, h) => Term::Handle(
            Box::new(normalize_admin(body)),
            CoreHandler {
                ret_var: h.ret_var.clone(),
                ret_body: Box::new(normalize_admin(&h.ret_body)),
                ops: h
                    .ops
                    .iter()
                    .map(|c| crate::kernel_syntax::CoreOpClause { body: normalize_admin(&c.body), ..c.clone() })
                    .collect(),
            },
        ),
        Term::Check(n) => Term::Check(normalize_nf(n)),
        Term::CheckM(n) => Term::CheckM(normalize_nf(n)),
        Term::Dlet(n, body) => Term::Dlet(normalize_nf(n), Box::new(normalize_admin(body))),
        Term::Tls(body) => Term::Tls(Box::new(normalize_admin(body))),
        Term::Mkvar(..) | Term::Err => t.clone(),
    }
}

fn normalize_nf(n: &Nf) -> Nf {
    match n {
        Nf::Lam(x, body) => Nf::Lam(x.clone(), Box::new(normalize_admin(body))),
        Nf::Ast(a) => Nf::ast(a.map(normalize_nf)),
        _ => n.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_machine::{check_core, run, Outcome, DEFAULT_FUEL};
    use crate::kernel_syntax::{Ast, CoreComp, CoreType, EffectRow, Expr, ExprKind, SourceProgram};
    use crate::source_typeck::erase;
    use crate::source_typeck::typecheck_program;
    use crate::surface::{parse_core_term, parse_program, Mode};

    fn checked(src: &str) -> SourceProgram {
        let p = parse_program(src).unwrap_or_else(|d| panic!("{d:?}"));
        typecheck_program(&p).unwrap_or_else(|e| panic!("{e}")).program
    }

    const SPLICE_IDENTITY: &str = "$(do x <- <<return 0>> in (fun z -> return z) x)";
    const ADDER: &str = "fun (x : Nat) -> $(<<fun (y : Nat) -> x + y>>)";

    #[test]
    fn splice_identity_naive_shape_and_result() {
        let p = checked(SPLICE_IDENTITY);
        let t = elaborate(&p, CheckKind::Naive).unwrap();
        let expected = parse_core_term("tls(do x <- return Ret(Nat(0)) in (λz. return z) x)").unwrap();
        assert_eq!(normalize_admin(&t), expected);
        let r = run(t, DEFAULT_FUEL, false).unwrap();
        match r.outcome {
            Outcome::Value { value, .. } => assert_eq!(value, Nf::ast(Ast::Ret(Nf::ast(Ast::Nat(0))))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn adder_census() {
        let p = checked(ADDER);
        let census = |k| Census::of(&elaborate(&p, k).unwrap());
        assert_eq!(census(CheckKind::Naive), Census { check: 0, check_m: 0, dlet: 0, tls: 1, mkvar: 2 });
        assert_eq!(census(CheckKind::Lazy), Census { check: 1, check_m: 0, dlet: 1, tls: 1, mkvar: 2 });
        assert_eq!(census(CheckKind::Eager), Census { check: 6, check_m: 0, dlet: 2, tls: 1, mkvar: 2 });
        assert_eq!(census(CheckKind::C4C), Census { check: 0, check_m: 6, dlet: 2, tls: 1, mkvar: 2 });
    }

    #[test]
    fn lazy_check_follows_tls() {
        let p = checked(ADDER);
        let t = normalize_admin(&elaborate(&p, CheckKind::Lazy).unwrap());
        let found = std::cell::Cell::new(false);
        fn walk(t: &Term, found: &std::cell::Cell<bool>) {
            match t {
                Term::Do(v, bound, body) => {
                    if matches!(**bound, Term::Tls(_)) && **body == Term::Check(Nf::var(v.clone())) {
                        found.set(true);
                    }
                    walk(bound, found);
                    walk(body, found);
                }
                Term::Dlet(_, b) | Term::Tls(b) => walk(b, found),
                Term::Return(Nf::Ast(a)) => {
                    for c in a.children() {
                        if let Nf::Lam(_, b) = c {
                            walk(b, found)
                        }
                    }
                }
                _ => {}
            }
        }
        walk(&t, &found);
        assert!(found.get(), "{t:?}");
    }

    #[test]
    fn quote_splice_duality() {
        let p = checked("$(<<do u <- return 1 in u + 2>>)");
        let ExprKind::Splice(inner) = &p.body.kind else { panic!() };
        let ExprKind::Quote(e) = &inner.kind else { panic!() };
        let wrapped = Expr::splice(Expr::quote((**e).clone()));
        for k in CheckKind::ALL {
            assert_eq!(elaborate_expr(&wrapped, Mode::Quote, k), elaborate_expr(e, Mode::Quote, k));
        }
    }

    #[test]
    fn elaborations_typecheck() {
        let typed = typecheck_program(&parse_program(ADDER).unwrap()).unwrap();
        let expected = CoreComp { ty: CoreType::AstComp(erase(&typed.ty), EffectRow::empty()), row: EffectRow::empty() };
        for k in CheckKind::ALL {
            let t = elaborate(&typed.program, k).unwrap();
            check_core(&Default::default(), &vec![], &t, &expected).unwrap_or_else(|e| panic!("{k}: {e:?}"));
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for k in CheckKind::ALL {
            assert_eq!(k.name().parse::<CheckKind>(), Ok(k));
        }
        assert!("strict".parse::<CheckKind>().is_err());
    }
}
