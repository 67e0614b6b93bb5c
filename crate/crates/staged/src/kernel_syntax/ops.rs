//! Structural utilities over core syntax.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::core::{Ast, CoreHandler, CoreOpClause, FormalParam, Frame, Kont, Nf, Term};
use super::source::Name;

/// Free `Var(α)` occurrences of an AST, respecting the binders of the
/// generated code (`Lam`, `Do`, `Hret`, `Hop`).
pub fn freevars(n: &Nf) -> BTreeSet<FormalParam> {
    let mut out = BTreeSet::new();
    collect_free(n, &mut Vec::new(), &mut out);
    out
}

fn collect_free(n: &Nf, bound: &mut Vec<u32>, out: &mut BTreeSet<FormalParam>) {
    let Nf::Ast(ast) = n else { return };
    let under = |binders: &[&Nf], body: &Nf, bound: &mut Vec<u32>, out: &mut BTreeSet<FormalParam>| {
        let mark = bound.len();
        bound.extend(binders.iter().filter_map(|b| b.as_param()).map(|p| p.id));
        collect_free(body, bound, out);
        bound.truncate(mark);
    };
    match &**ast {
        Ast::Var(Nf::Param(p)) => {
            if !bound.contains(&p.id) {
                out.insert(p.clone());
            }
        }
        Ast::Lam(binder, body) => under(&[binder], body, bound, out),
        Ast::Do(e1, binder, e2) => {
            collect_free(e1, bound, out);
            under(&[binder], e2, bound, out);
        }
        Ast::Hret(binder, body) => under(&[binder], body, bound, out),
        Ast::Hop(_, rest, x, k, body) => {
            collect_free(rest, bound, out);
            under(&[x, k], body, bound, out);
        }
        other => {
            for child in other.children() {
                collect_free(child, bound, out);
            }
        }
    }
}

/// Operation names with a clause in `h`.
pub fn handler_dom(h: &CoreHandler) -> BTreeSet<Name> {
    h.ops.iter().map(|c| c.op.clone()).collect()
}

/// Free meta-variables of a normal form.
pub fn meta_free_nf(n: &Nf) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    MetaFree { out: &mut out }.nf(n, &mut Vec::new());
    out
}

/// Free meta-variables of a term.
pub fn meta_free_term(t: &Term) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    MetaFree { out: &mut out }.term(t, &mut Vec::new());
    out
}

struct MetaFree<'a> {
    out: &'a mut BTreeSet<Name>,
}

impl MetaFree<'_> {
    fn nf(&mut self, n: &Nf, bound: &mut Vec<Name>) {
        match n {
            Nf::Var(x) => {
                if !bound.contains(x) {
                    self.out.insert(x.clone());
                }
            }
            Nf::Nat(_) | Nf::Param(_) => {}
            Nf::Lam(x, body) => self.under(&[x], body, bound),
            Nf::Kont(k) => self.frames(&k.frames, bound),
            Nf::Ast(a) => {
                for c in a.children() {
                    self.nf(c, bound);
                }
            }
        }
    }

    fn under(&mut self, binders: &[&Name], body: &Term, bound: &mut Vec<Name>) {
        let mark = bound.len();
        bound.extend(binders.iter().map(|b| (*b).clone()));
        self.term(body, bound);
        bound.truncate(mark);
    }

    fn handler(&mut self, h: &CoreHandler, bound: &mut Vec<Name>) {
        self.under(&[&h.ret_var], &h.ret_body, bound);
        for c in &h.ops {
            self.under(&[&c.arg, &c.cont], &c.body, bound);
        }
    }

    fn frames(&mut self, frames: &[Frame], bound: &mut Vec<Name>) {
        for f in frames {
            match f {
                Frame::Do(x, body) => self.under(&[x], body, bound),
                Frame::Handle(h) => self.handler(h, bound),
                Frame::Dlet(_) | Frame::Tls => {}
            }
        }
    }

    fn term(&mut self, t: &Term, bound: &mut Vec<Name>) {
        match t {
            Term::App(a, b) | Term::Continue(a, b) | Term::Arith(_, a, b) => {
                self.nf(a, bound);
                self.nf(b, bound);
            }
            Term::Return(n) | Term::Op(_, n) | Term::Check(n) | Term::CheckM(n) => self.nf(n, bound),
            Term::Do(x, t1, t2) => {
                self.term(t1, bound);
                self.under(&[x], t2, bound);
            }
            Term::Handle(body, h) => {
                self.term(body, bound);
                self.handler(h, bound);
            }
            Term::Dlet(n, body) => {
                self.nf(n, bound);
                self.term(body, bound);
            }
            Term::Tls(body) => self.term(body, bound),
            Term::Mkvar(..) | Term::Err => {}
        }
    }
}

/// `t[n/x]`, capture-avoiding over meta-level binders. Formal parameters
/// are names of generated code and are never renamed.
pub fn subst(t: &Term, n: &Nf, x: &str) -> Term {
    let fv = meta_free_nf(n);
    Subst { n, x, fv: &fv }.term(t)
}

/// `m[n/x]` for a normal form.
pub fn subst_nf(m: &Nf, n: &Nf, x: &str) -> Nf {
    let fv = meta_free_nf(n);
    Subst { n, x, fv: &fv }.nf(m)
}

struct Subst<'a> {
    n: &'a Nf,
    x: &'a str,
    fv: &'a BTreeSet<Name>,
}

fn fresh_variant(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

impl Subst<'_> {
    fn nf(&self, m: &Nf) -> Nf {
        match m {
            Nf::Var(y) if y == self.x => self.n.clone(),
            Nf::Var(_) | Nf::Nat(_) | Nf::Param(_) => m.clone(),
            Nf::Lam(y, body) => {
                let (mut names, body) = self.under(&[y], body);
                Nf::Lam(names.remove(0), Box::new(body))
            }
            Nf::Kont(k) => Nf::Kont(Arc::new(Kont { frames: self.frames(&k.frames) })),
            Nf::Ast(a) => Nf::Ast(Box::new(a.map(|c| self.nf(c)))),
        }
    }

    /// Substitutes under a group of binders, renaming any binder that
    /// would capture a free variable of the substituted normal form.
    fn under(&self, binders: &[&Name], body: &Term) -> (Vec<Name>, Term) {
        let names: Vec<Name> = binders.iter().map(|b| (*b).clone()).collect();
        if names.iter().any(|b| b == self.x) {
            return (names, body.clone());
        }
        let body_free = meta_free_term(body);
        if !body_free.contains(self.x) {
            return (names, body.clone());
        }
        let mut body = body.clone();
        let mut renamed = Vec::with_capacity(names.len());
        let mut avoid: BTreeSet<Name> = self.fv.union(&body_free).cloned().collect();
        avoid.extend(names.iter().cloned());
        for b in names {
            if self.fv.contains(&b) {
                let fresh = fresh_variant(&b, &avoid);
                avoid.insert(fresh.clone());
                body = subst(&body, &Nf::Var(fresh.clone()), &b);
                renamed.push(fresh);
            } else {
                renamed.push(b);
            }
        }
        (renamed, self.term(&body))
    }

    fn handler(&self, h: &CoreHandler) -> CoreHandler {
        let (mut rv, rb) = self.under(&[&h.ret_var], &h.ret_body);
        let ops = h
            .ops
            .iter()
            .map(|c| {
                let (mut names, body) = self.under(&[&c.arg, &c.cont], &c.body);
                let cont = names.pop().expect("two binders");
                let arg = names.pop().expect("two binders");
                CoreOpClause { op: c.op.clone(), arg, cont, body }
            })
            .collect();
        CoreHandler { ret_var: rv.remove(0), ret_body: Box::new(rb), ops }
    }

    fn frames(&self, frames: &[Frame]) -> Vec<Frame> {
        frames
            .iter()
            .map(|f| match f {
                Frame::Do(y, body) => {
                    let (mut names, body) = self.under(&[y], body);
                    Frame::Do(names.remove(0), body)
                }
                Frame::Handle(h) => Frame::Handle(self.handler(h)),
                Frame::Dlet(p) => Frame::Dlet(p.clone()),
                Frame::Tls => Frame::Tls,
            })
            .collect()
    }

    fn term(&self, t: &Term) -> Term {
        match t {
            Term::App(a, b) => Term::App(self.nf(a), self.nf(b)),
            Term::Continue(a, b) => Term::Continue(self.nf(a), self.nf(b)),
            Term::Arith(op, a, b) => Term::Arith(*op, self.nf(a), self.nf(b)),
            Term::Return(m) => Term::Return(self.nf(m)),
            Term::Op(op, m) => Term::Op(op.clone(), self.nf(m)),
            Term::Check(m) => Term::Check(self.nf(m)),
            Term::CheckM(m) => Term::CheckM(self.nf(m)),
            Term::Do(y, t1, t2) => {
                let t1 = self.term(t1);
                let (mut names, t2) = self.under(&[y], t2);
                Term::Do(names.remove(0), Box::new(t1), Box::new(t2))
            }
            Term::Handle(body, h) => Term::Handle(Box::new(self.term(body)), self.handler(h)),
            Term::Dlet(m, body) => Term::Dlet(self.nf(m), Box::new(self.term(body))),
            Term::Tls(body) => Term::Tls(Box::new(self.term(body))),
            Term::Mkvar(..) | Term::Err => t.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::core::Pretype;
    use crate::kernel_syntax::source::ArithOp;
    use proptest::prelude::*;

    fn param(id: u32) -> Nf {
        Nf::Param(FormalParam { id, ty: Pretype::Nat, classifier: None })
    }

    fn var_ast(id: u32) -> Nf {
        Nf::ast(Ast::Var(param(id)))
    }

    fn plus(a: Nf, b: Nf) -> Nf {
        Nf::ast(Ast::Arith(ArithOp::Add, a, b))
    }

    fn ids(set: &BTreeSet<FormalParam>) -> Vec<u32> {
        set.iter().map(|p| p.id).collect()
    }

    #[test]
    fn freevars_of_lone_var() {
        assert_eq!(ids(&freevars(&var_ast(0))), vec![0]);
    }

    #[test]
    fn lam_binder_closes_body() {
        let lam = Nf::ast(Ast::Lam(param(0), plus(var_ast(0), Nf::ast(Ast::Nat(0)))));
        assert!(freevars(&lam).is_empty());
    }

    #[test]
    fn do_binds_only_its_body() {
        let n = Nf::ast(Ast::Do(Nf::ast(Ast::Ret(var_ast(0))), param(1), plus(var_ast(1), var_ast(0))));
        assert_eq!(ids(&freevars(&n)), vec![0]);
        // The bound expression is outside the binder's scope.
        let m = Nf::ast(Ast::Do(Nf::ast(Ast::Ret(var_ast(1))), param(1), var_ast(1)));
        assert_eq!(ids(&freevars(&m)), vec![1]);
    }

    #[test]
    fn hop_binds_argument_and_continuation() {
        let ret = Nf::ast(Ast::Hret(param(5), var_ast(5)));
        let hop = Nf::ast(Ast::Hop(
            "op".into(),
            ret,
            param(1),
            param(2),
            Nf::ast(Ast::Continue(var_ast(2), var_ast(1))),
        ));
        assert!(freevars(&hop).is_empty());
        let open = Nf::ast(Ast::Hop("op".into(), Nf::ast(Ast::Hret(param(5), var_ast(3))), param(1), param(2), var_ast(1)));
        assert_eq!(ids(&freevars(&open)), vec![3]);
    }

    #[test]
    fn handler_dom_lists_clauses() {
        let ret_only = CoreHandler { ret_var: "x".into(), ret_body: Box::new(Term::Return(Nf::var("x"))), ops: vec![] };
        assert!(handler_dom(&ret_only).is_empty());
        let mut two = ret_only.clone();
        for op in ["a", "b"] {
            two.ops.push(CoreOpClause { op: op.into(), arg: "y".into(), cont: "k".into(), body: Term::Return(Nf::var("y")) });
        }
        assert_eq!(handler_dom(&two).into_iter().collect::<Vec<_>>(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn subst_replaces_free_occurrence() {
        let t = Term::Return(Nf::var("x"));
        assert_eq!(subst(&t, &Nf::Nat(3), "x"), Term::Return(Nf::Nat(3)));
    }

    #[test]
    fn subst_leaves_distinct_binder() {
        let t = Term::App(Nf::Lam("y".into(), Box::new(Term::Return(Nf::var("x")))), Nf::var("y"));
        let out = subst(&t, &Nf::Nat(1), "x");
        assert_eq!(out, Term::App(Nf::Lam("y".into(), Box::new(Term::Return(Nf::Nat(1)))), Nf::var("y")));
    }

    #[test]
    fn subst_respects_shadowing() {
        let t = Term::Do("x".into(), Box::new(Term::Return(Nf::var("x"))), Box::new(Term::Return(Nf::var("x"))));
        let out = subst(&t, &Nf::Nat(7), "x");
        let want = Term::Do("x".into(), Box::new(Term::Return(Nf::Nat(7))), Box::new(Term::Return(Nf::var("x"))));
        assert_eq!(out, want);
    }

    #[test]
    fn subst_avoids_capture() {
        // (λy. return x)[y/x] must not capture the substituted y.
        let t = Term::Return(Nf::Lam("y".into(), Box::new(Term::Return(Nf::var("x")))));
        let out = subst(&t, &Nf::var("y"), "x");
        match out {
            Term::Return(Nf::Lam(b, body)) => {
                assert_ne!(b, "y");
                assert_eq!(*body, Term::Return(Nf::var("y")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_name() -> impl Strategy<Value = Name> {
        prop_oneof![Just("x".to_string()), Just("y".to_string()), Just("z".to_string())]
    }

    fn arb_nf() -> impl Strategy<Value = Nf> {
        let leaf = prop_oneof![
            arb_name().prop_map(Nf::Var),
            (0u64..5).prop_map(Nf::Nat),
            (0u32..4).prop_map(param),
            (0u32..4).prop_map(var_ast),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Nf::ast(Ast::App(a, b))),
                (0u32..4, inner.clone()).prop_map(|(p, b)| Nf::ast(Ast::Lam(param(p), b))),
                (inner.clone(), 0u32..4, inner.clone()).prop_map(|(a, p, b)| Nf::ast(Ast::Do(a, param(p), b))),
                inner.clone().prop_map(|a| Nf::ast(Ast::Ret(a))),
                (arb_name(), inner.clone()).prop_map(|(x, b)| Nf::Lam(x, Box::new(Term::Return(b)))),
            ]
        })
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![arb_nf().prop_map(Term::Return), arb_nf().prop_map(Term::Check)];
        leaf.prop_recursive(3, 16, 2, |inner| {
            prop_oneof![
                (arb_name(), inner.clone(), inner.clone()).prop_map(|(x, a, b)| Term::Do(x, Box::new(a), Box::new(b))),
                (arb_nf(), arb_nf()).prop_map(|(a, b)| Term::App(a, b)),
                inner.clone().prop_map(|t| Term::Tls(Box::new(t))),
            ]
        })
    }

    proptest! {
        #[test]
        fn identity_substitution(t in arb_term(), x in arb_name()) {
            prop_assert_eq!(subst(&t, &Nf::Var(x.clone()), &x), t);
        }

        #[test]
        fn freevars_of_app_is_union(a in arb_nf(), b in arb_nf()) {
            let both = freevars(&Nf::ast(Ast::App(a.clone(), b.clone())));
            let union: BTreeSet<_> = freevars(&a).union(&freevars(&b)).cloned().collect();
            prop_assert_eq!(both, union);
        }

        #[test]
        fn freevars_of_lam_removes_binder(p in 0u32..4, body in arb_nf()) {
            let lam = freevars(&Nf::ast(Ast::Lam(param(p), body.clone())));
            let mut want = freevars(&body);
            want.retain(|q| q.id != p);
            prop_assert_eq!(lam, want);
        }

        #[test]
        fn substituted_variable_disappears(t in arb_term(), x in arb_name()) {
            let out = subst(&t, &Nf::Nat(9), &x);
            prop_assert!(!meta_free_term(&out).contains(&x));
        }
    }
}
