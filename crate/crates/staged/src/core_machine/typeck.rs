//! Type checker for core terms.
//!
//! Several rules leave a type or row unconstrained (`return` at any row,
//! `err` at any type, the input row of a return-only handler AST), so the
//! checker works with metavariables: types are unified structurally and
//! rows go through the shared row solver.

use thiserror::Error;

use crate::kernel_syntax::{
    handler_dom, Ast, CoreComp, CoreHandler, CoreSigs, CoreType, EffectRow, HandlerPretype, Name, Nf, Pretype, Term,
    KONT_VAR,
};
use crate::unify::{RowError, RowSolver, RowVar};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{message} (at {path})")]
pub struct CoreTypeError {
    pub message: String,
    pub path: String,
}

#[derive(Clone, Debug)]
enum Ty {
    Nat,
    Fun(Box<Ty>, RowVar, Box<Ty>),
    Cont(Box<Ty>, RowVar, Box<Ty>),
    FParam(Box<Ty>),
    AstVal(Box<Ty>),
    AstComp(Box<Ty>, RowVar),
    AstHandler(Box<Ty>, RowVar, Box<Ty>, RowVar),
    Meta(u32),
}

/// A typing context for core terms: meta-variables with their types.
pub type CoreContext = Vec<(Name, CoreType)>;

struct Checker<'s> {
    sigs: &'s CoreSigs,
    metas: Vec<Option<Ty>>,
    rows: RowSolver<String>,
    path: Vec<String>,
}

type Res<T> = Result<T, CoreTypeError>;

impl<'s> Checker<'s> {
    fn new(sigs: &'s CoreSigs) -> Self {
        Checker { sigs, metas: Vec::new(), rows: RowSolver::new(), path: Vec::new() }
    }

    fn err<T>(&self, message: impl Into<String>) -> Res<T> {
        Err(CoreTypeError { message: message.into(), path: self.path_string() })
    }

    fn path_string(&self) -> String {
        if self.path.is_empty() {
            "root".into()
        } else {
            self.path.join("/")
        }
    }

    fn row_err<T>(&self, e: RowError<String>) -> Res<T> {
        match e {
            RowError::NotInRow { op, row, origin } => {
                Err(CoreTypeError { message: format!("operation {op} ∉ {row}"), path: origin })
            }
            RowError::Mismatch { left, right } => self.err(format!("effect rows differ: {left} vs {right}")),
            RowError::Escapes { op, row, origin } => {
                Err(CoreTypeError { message: format!("operation {op} is neither handled nor in {row}"), path: origin })
            }
        }
    }

    fn meta(&mut self) -> Ty {
        self.metas.push(None);
        Ty::Meta(self.metas.len() as u32 - 1)
    }

    fn fresh_row(&mut self) -> RowVar {
        self.rows.fresh()
    }

    fn fixed_row(&mut self, row: &EffectRow) -> RowVar {
        self.rows.fixed(row.clone())
    }

    fn lift_pre(&mut self, p: &Pretype) -> Ty {
        match p {
            Pretype::Nat => Ty::Nat,
            Pretype::Fun(a, r, b) => {
                let (a, r, b) = (self.lift_pre(a), self.fixed_row(r), self.lift_pre(b));
                Ty::Fun(Box::new(a), r, Box::new(b))
            }
            Pretype::Cont(a, r, b) => {
                let (a, r, b) = (self.lift_pre(a), self.fixed_row(r), self.lift_pre(b));
                Ty::Cont(Box::new(a), r, Box::new(b))
            }
        }
    }

    fn lift_core(&mut self, t: &CoreType) -> Ty {
        match t {
            CoreType::Nat => Ty::Nat,
            CoreType::Fun(a, r, b) => {
                let (a, r, b) = (self.lift_core(a), self.fixed_row(r), self.lift_core(b));
                Ty::Fun(Box::new(a), r, Box::new(b))
            }
            CoreType::Cont(a, r, b) => {
                let (a, r, b) = (self.lift_core(a), self.fixed_row(r), self.lift_core(b));
                Ty::Cont(Box::new(a), r, Box::new(b))
            }
            CoreType::FParam(p) => Ty::FParam(Box::new(self.lift_pre(p))),
            CoreType::AstVal(p) => Ty::AstVal(Box::new(self.lift_pre(p))),
            CoreType::AstComp(p, r) => {
                let r = self.fixed_row(r);
                Ty::AstComp(Box::new(self.lift_pre(p)), r)
            }
            CoreType::AstHandler(h) => {
                let (a, ra) = (self.lift_pre(&h.from), self.fixed_row(&h.from_row));
                let (b, rb) = (self.lift_pre(&h.to), self.fixed_row(&h.to_row));
                Ty::AstHandler(Box::new(a), ra, Box::new(b), rb)
            }
        }
    }

    fn shallow(&self, t: &Ty) -> Ty {
        let mut t = t.clone();
        while let Ty::Meta(m) = t {
            match &self.metas[m as usize] {
                Some(inner) => t = inner.clone(),
                None => return Ty::Meta(m),
            }
        }
        t
    }

    fn occurs(&self, m: u32, t: &Ty) -> bool {
        match self.shallow(t) {
            Ty::Meta(n) => n == m,
            Ty::Nat => false,
            Ty::Fun(a, _, b) | Ty::Cont(a, _, b) | Ty::AstHandler(a, _, b, _) => self.occurs(m, &a) || self.occurs(m, &b),
            Ty::FParam(a) | Ty::AstVal(a) | Ty::AstComp(a, _) => self.occurs(m, &a),
        }
    }

    fn unify_rows(&mut self, a: RowVar, b: RowVar) -> Res<()> {
        match self.rows.unify(a, b) {
            Ok(()) => Ok(()),
            Err(e) => self.row_err(e),
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty) -> Res<()> {
        let (a, b) = (self.shallow(a), self.shallow(b));
        match (&a, &b) {
            (Ty::Meta(m), Ty::Meta(n)) if m == n => Ok(()),
            (Ty::Meta(m), other) | (other, Ty::Meta(m)) => {
                if self.occurs(*m, other) {
                    return self.err("infinite type");
                }
                self.metas[*m as usize] = Some(other.clone());
                Ok(())
            }
            (Ty::Nat, Ty::Nat) => Ok(()),
            (Ty::Fun(a1, r1, b1), Ty::Fun(a2, r2, b2)) | (Ty::Cont(a1, r1, b1), Ty::Cont(a2, r2, b2)) => {
                self.unify(a1, a2)?;
                self.unify_rows(*r1, *r2)?;
                self.unify(b1, b2)
            }
            (Ty::FParam(x), Ty::FParam(y)) | (Ty::AstVal(x), Ty::AstVal(y)) => self.unify(x, y),
            (Ty::AstComp(x, r1), Ty::AstComp(y, r2)) => {
                self.unify(x, y)?;
                self.unify_rows(*r1, *r2)
            }
            (Ty::AstHandler(a1, ra1, b1, rb1), Ty::AstHandler(a2, ra2, b2, rb2)) => {
                self.unify(a1, a2)?;
                self.unify_rows(*ra1, *ra2)?;
                self.unify(b1, b2)?;
                self.unify_rows(*rb1, *rb2)
            }
            _ => {
                let (x, y) = (self.describe(&a), self.describe(&b));
                self.err(format!("type mismatch: {x} vs {y}"))
            }
        }
    }

    fn describe(&self, t: &Ty) -> String {
        match self.shallow(t) {
            Ty::Nat => "ℕ".into(),
            Ty::Fun(..) => "function".into(),
            Ty::Cont(..) => "continuation".into(),
            Ty::FParam(_) => "FParam".into(),
            Ty::AstVal(_) => "AST(value)".into(),
            Ty::AstComp(..) => "AST(computation)".into(),
            Ty::AstHandler(..) => "AST(handler)".into(),
            Ty::Meta(_) => "unknown".into(),
        }
    }

    fn within<T>(&mut self, label: impl Into<String>, f: impl FnOnce(&mut Self) -> Res<T>) -> Res<T> {
        self.path.push(label.into());
        let r = f(self);
        if r.is_ok() {
            self.path.pop();
        }
        r
    }

    fn lookup(&self, ctx: &[(Name, Ty)], x: &str) -> Res<Ty> {
        match ctx.iter().rev().find(|(n, _)| n == x) {
            Some((_, t)) => Ok(t.clone()),
            None => self.err(format!("unbound meta-variable {x}")),
        }
    }

    fn expect_param(&mut self, t: &Ty) -> Res<Ty> {
        let inner = self.meta();
        self.unify(t, &Ty::FParam(Box::new(inner.clone())))?;
        Ok(inner)
    }

    fn expect_ast_val(&mut self, t: &Ty) -> Res<Ty> {
        let inner = self.meta();
        self.unify(t, &Ty::AstVal(Box::new(inner.clone())))?;
        Ok(inner)
    }

    fn expect_ast_comp(&mut self, t: &Ty) -> Res<(Ty, RowVar)> {
        let inner = self.meta();
        let row = self.fresh_row();
        self.unify(t, &Ty::AstComp(Box::new(inner.clone()), row))?;
        Ok((inner, row))
    }

    fn nf(&mut self, ctx: &mut Vec<(Name, Ty)>, n: &Nf) -> Res<Ty> {
        match n {
            Nf::Var(x) => self.lookup(ctx, x),
            Nf::Nat(_) => Ok(Ty::Nat),
            Nf::Lam(x, body) => {
                let arg = self.meta();
                ctx.push((x.clone(), arg.clone()));
                let r = self.within("λ", |c| c.term(ctx, body));
                ctx.pop();
                let (res, row) = r?;
                Ok(Ty::Fun(Box::new(arg), row, Box::new(res)))
            }
            Nf::Kont(k) => {
                let arg = self.meta();
                ctx.push((KONT_VAR.to_string(), arg.clone()));
                let body = k.body();
                let r = self.within("κ", |c| c.term(ctx, &body));
                ctx.pop();
                let (res, row) = r?;
                Ok(Ty::Cont(Box::new(arg), row, Box::new(res)))
            }
            Nf::Param(p) => Ok(Ty::FParam(Box::new(self.lift_pre(&p.ty)))),
            Nf::Ast(a) => {
                let label = a.ctor_name();
                self.within(label, |c| c.ast(ctx, a))
            }
        }
    }

    fn ast(&mut self, ctx: &mut Vec<(Name, Ty)>, a: &Ast) -> Res<Ty> {
        match a {
            Ast::Nat(_) => Ok(Ty::AstVal(Box::new(Ty::Nat))),
            Ast::Var(n) => {
                let t = self.nf(ctx, n)?;
                let r = self.expect_param(&t)?;
                Ok(Ty::AstVal(Box::new(r)))
            }
            Ast::Lam(x, body) => {
                let xt = self.nf(ctx, x)?;
                let q = self.expect_param(&xt)?;
                let bt = self.nf(ctx, body)?;
                let (r, row) = self.expect_ast_comp(&bt)?;
                Ok(Ty::AstVal(Box::new(Ty::Fun(Box::new(q), row, Box::new(r)))))
            }
            Ast::App(f, x) | Ast::Continue(f, x) => {
                let ft = self.nf(ctx, f)?;
                let fun = self.expect_ast_val(&ft)?;
                let xt = self.nf(ctx, x)?;
                let q = self.expect_ast_val(&xt)?;
                let r = self.meta();
                let row = self.fresh_row();
                let shape = if matches!(a, Ast::App(..)) {
                    Ty::Fun(Box::new(q), row, Box::new(r.clone()))
                } else {
                    Ty::Cont(Box::new(q), row, Box::new(r.clone()))
                };
                self.unify(&fun, &shape)?;
                Ok(Ty::AstComp(Box::new(r), row))
            }
            Ast::Ret(n) => {
                let t = self.nf(ctx, n)?;
                let r = self.expect_ast_val(&t)?;
                let row = self.fresh_row();
                Ok(Ty::AstComp(Box::new(r), row))
            }
            Ast::Do(bound, x, body) => {
                let bt = self.nf(ctx, bound)?;
                let (q, row) = self.expect_ast_comp(&bt)?;
                let xt = self.nf(ctx, x)?;
                let xq = self.expect_param(&xt)?;
                self.unify(&q, &xq)?;
                let bodyt = self.nf(ctx, body)?;
                let (r, row2) = self.expect_ast_comp(&bodyt)?;
                self.unify_rows(row, row2)?;
                Ok(Ty::AstComp(Box::new(r), row))
            }
            Ast::Op(op, n) => {
                let Some((arg, res)) = self.sigs.run.get(op).cloned() else {
                    return self.err(format!("undeclared run-time operation {op}"));
                };
                let t = self.nf(ctx, n)?;
                let q = self.expect_ast_val(&t)?;
                let arg = self.lift_pre(&arg);
                self.unify(&q, &arg)?;
                let row = self.fresh_row();
                let here = self.path_string();
                if let Err(e) = self.rows.require(op, row, here) {
                    return self.row_err(e);
                }
                Ok(Ty::AstComp(Box::new(self.lift_pre(&res)), row))
            }
            Ast::Hwith(body, h) => {
                let bt = self.nf(ctx, body)?;
                let (q, row1) = self.expect_ast_comp(&bt)?;
                let ht = self.nf(ctx, h)?;
                let r = self.meta();
                let row2 = self.fresh_row();
                self.unify(&ht, &Ty::AstHandler(Box::new(q), row1, Box::new(r.clone()), row2))?;
                Ok(Ty::AstComp(Box::new(r), row2))
            }
            Ast::Hret(x, body) => {
                let xt = self.nf(ctx, x)?;
                let q = self.expect_param(&xt)?;
                let bt = self.nf(ctx, body)?;
                let (r, row2) = self.expect_ast_comp(&bt)?;
                let row1 = self.fresh_row();
                let here = self.path_string();
                self.rows.subset(row1, row2, EffectRow::empty(), here);
                Ok(Ty::AstHandler(Box::new(q), row1, Box::new(r), row2))
            }
            Ast::Hop(op, rest, x, k, body) => {
                let Some((arg, res)) = self.sigs.run.get(op).cloned() else {
                    return self.err(format!("undeclared run-time operation {op}"));
                };
                let rt = self.nf(ctx, rest)?;
                let (q, r, row_rest, row2) = (self.meta(), self.meta(), self.fresh_row(), self.fresh_row());
                self.unify(&rt, &Ty::AstHandler(Box::new(q.clone()), row_rest, Box::new(r.clone()), row2))?;
                let xt = self.nf(ctx, x)?;
                let xa = self.expect_param(&xt)?;
                let arg = self.lift_pre(&arg);
                self.unify(&xa, &arg)?;
                let kt = self.nf(ctx, k)?;
                let kb = self.expect_param(&kt)?;
                let res = self.lift_pre(&res);
                self.unify(&kb, &Ty::Cont(Box::new(res), row2, Box::new(r.clone())))?;
                let bt = self.nf(ctx, body)?;
                let (r2, row_body) = self.expect_ast_comp(&bt)?;
                self.unify(&r, &r2)?;
                self.unify_rows(row2, row_body)?;
                let row1 = self.fresh_row();
                let here = self.path_string();
                self.rows.subset(row1, row_rest, EffectRow::single(op.clone()), here);
                Ok(Ty::AstHandler(Box::new(q), row1, Box::new(r), row2))
            }
            Ast::Arith(_, x, y) => {
                for n in [x, y] {
                    let t = self.nf(ctx, n)?;
                    self.unify(&t, &Ty::AstVal(Box::new(Ty::Nat)))?;
                }
                let row = self.fresh_row();
                Ok(Ty::AstComp(Box::new(Ty::Nat), row))
            }
        }
    }

    fn term(&mut self, ctx: &mut Vec<(Name, Ty)>, t: &Term) -> Res<(Ty, RowVar)> {
        match t {
            Term::App(f, x) | Term::Continue(f, x) => {
                let ft = self.within("fun", |c| c.nf(ctx, f))?;
                let xt = self.within("arg", |c| c.nf(ctx, x))?;
                let (r, row) = (self.meta(), self.fresh_row());
                let shape = if matches!(t, Term::App(..)) {
                    Ty::Fun(Box::new(xt), row, Box::new(r.clone()))
                } else {
                    Ty::Cont(Box::new(xt), row, Box::new(r.clone()))
                };
                self.unify(&ft, &shape)?;
                Ok((r, row))
            }
            Term::Return(n) => {
                let ty = self.within("return", |c| c.nf(ctx, n))?;
                Ok((ty, self.fresh_row()))
            }
            Term::Do(x, t1, t2) => {
                let (s, r1) = self.within("do.bound", |c| c.term(ctx, t1))?;
                ctx.push((x.clone(), s));
                let body = self.within(format!("do.{x}"), |c| c.term(ctx, t2));
                ctx.pop();
                let (ty, r2) = body?;
                self.unify_rows(r1, r2)?;
                Ok((ty, r1))
            }
            Term::Op(op, n) => {
                let Some((arg, res)) = self.sigs.compile.get(op).cloned() else {
                    return self.err(format!("undeclared compile-time operation {op}"));
                };
                let nt = self.within(format!("perform {op}"), |c| c.nf(ctx, n))?;
                let arg = self.lift_core(&arg);
                self.unify(&nt, &arg)?;
                let row = self.fresh_row();
                let here = self.path_string();
                if let Err(e) = self.rows.require(op, row, here) {
                    return self.row_err(e);
                }
                Ok((self.lift_core(&res), row))
            }
            Term::Handle(body, h) => {
                let (s, r1) = self.within("handle.body", |c| c.term(ctx, body))?;
                let (out, r2) = self.within("handle.with", |c| c.handler(ctx, h, s))?;
                let dom: EffectRow = handler_dom(h).into();
                let here = self.path_string();
                self.rows.subset(r1, r2, dom, here);
                Ok((out, r2))
            }
            Term::Check(n) | Term::CheckM(n) => {
                let ty = self.within("check", |c| c.nf(ctx, n))?;
                match self.shallow(&ty) {
                    Ty::AstVal(_) | Ty::AstComp(..) | Ty::AstHandler(..) | Ty::Meta(_) => Ok((ty, self.fresh_row())),
                    _ => self.err("check requires an AST-typed argument"),
                }
            }
            Term::Mkvar(p, _) => {
                let p = self.lift_pre(p);
                Ok((Ty::FParam(Box::new(p)), self.fresh_row()))
            }
            Term::Dlet(n, body) => {
                let nt = self.within("dlet.param", |c| c.nf(ctx, n))?;
                self.expect_param(&nt)?;
                self.within("dlet", |c| c.term(ctx, body))
            }
            Term::Tls(body) => self.within("tls", |c| c.term(ctx, body)),
            Term::Err => Ok((self.meta(), self.fresh_row())),
            Term::Arith(_, x, y) => {
                for n in [x, y] {
                    let ty = self.within("arith", |c| c.nf(ctx, n))?;
                    self.unify(&ty, &Ty::Nat)?;
                }
                Ok((Ty::Nat, self.fresh_row()))
            }
        }
    }

    fn handler(&mut self, ctx: &mut Vec<(Name, Ty)>, h: &CoreHandler, input: Ty) -> Res<(Ty, RowVar)> {
        let (out, row) = (self.meta(), self.fresh_row());
        ctx.push((h.ret_var.clone(), input));
        let r = self.within("return", |c| c.term(ctx, &h.ret_body));
        ctx.pop();
        let (rt, rr) = r?;
        self.unify(&out, &rt)?;
        self.unify_rows(row, rr)?;
        for (i, clause) in h.ops.iter().enumerate() {
            if h.ops[..i].iter().any(|c| c.op == clause.op) {
                return self.err(format!("duplicate clause for {}", clause.op));
            }
            let Some((arg, res)) = self.sigs.compile.get(&clause.op).cloned() else {
                return self.err(format!("undeclared compile-time operation {}", clause.op));
            };
            let (arg, res) = (self.lift_core(&arg), self.lift_core(&res));
            ctx.push((clause.arg.clone(), arg));
            ctx.push((clause.cont.clone(), Ty::Cont(Box::new(res), row, Box::new(out.clone()))));
            let r = self.within(clause.op.clone(), |c| c.term(ctx, &clause.body));
            ctx.pop();
            ctx.pop();
            let (bt, br) = r?;
            self.unify(&out, &bt)?;
            self.unify_rows(row, br)?;
        }
        Ok((out, row))
    }

    fn solve(&mut self) -> Res<()> {
        match self.rows.solve() {
            Ok(()) => Ok(()),
            Err(e) => self.row_err(e),
        }
    }

    fn zonk_pre(&self, t: &Ty) -> Res<Pretype> {
        Ok(match self.shallow(t) {
            Ty::Nat => Pretype::Nat,
            Ty::Fun(a, r, b) => Pretype::Fun(Box::new(self.zonk_pre(&a)?), self.rows.current(r), Box::new(self.zonk_pre(&b)?)),
            Ty::Cont(a, r, b) => Pretype::Cont(Box::new(self.zonk_pre(&a)?), self.rows.current(r), Box::new(self.zonk_pre(&b)?)),
            Ty::Meta(_) => return self.err("ambiguous type"),
            _ => return self.err("generated code mentions a compile-time type"),
        })
    }

    fn zonk(&self, t: &Ty) -> Res<CoreType> {
        Ok(match self.shallow(t) {
            Ty::Nat => CoreType::Nat,
            Ty::Fun(a, r, b) => CoreType::fun(self.zonk(&a)?, self.rows.current(r), self.zonk(&b)?),
            Ty::Cont(a, r, b) => CoreType::cont(self.zonk(&a)?, self.rows.current(r), self.zonk(&b)?),
            Ty::FParam(p) => CoreType::FParam(self.zonk_pre(&p)?),
            Ty::AstVal(p) => CoreType::AstVal(self.zonk_pre(&p)?),
            Ty::AstComp(p, r) => CoreType::AstComp(self.zonk_pre(&p)?, self.rows.current(r)),
            Ty::AstHandler(a, ra, b, rb) => CoreType::AstHandler(Box::new(HandlerPretype {
                from: self.zonk_pre(&a)?,
                from_row: self.rows.current(ra),
                to: self.zonk_pre(&b)?,
                to_row: self.rows.current(rb),
            })),
            Ty::Meta(_) => return self.err("ambiguous type"),
        })
    }
}

/// Infers the type of a core term under `ctx`.
pub fn typecheck_core(sigs: &CoreSigs, ctx: &CoreContext, t: &Term) -> Result<CoreComp, CoreTypeError> {
    let mut c = Checker::new(sigs);
    let mut env: Vec<(Name, Ty)> = ctx.iter().map(|(n, t)| (n.clone(), c.lift_core(t))).collect();
    let (ty, row) = c.term(&mut env, t)?;
    c.solve()?;
    Ok(CoreComp { ty: c.zonk(&ty)?, row: c.rows.current(row) })
}

/// Checks a core term against an expected computation type.
pub fn check_core(sigs: &CoreSigs, ctx: &CoreContext, t: &Term, expected: &CoreComp) -> Result<(), CoreTypeError> {
    let mut c = Checker::new(sigs);
    let mut env: Vec<(Name, Ty)> = ctx.iter().map(|(n, t)| (n.clone(), c.lift_core(t))).collect();
    let (ty, row) = c.term(&mut env, t)?;
    let want = c.lift_core(&expected.ty);
    c.unify(&ty, &want)?;
    let want_row = c.fixed_row(&expected.row);
    c.unify_rows(row, want_row)?;
    c.solve()
}

/// Infers the type of a normal form.
pub fn typecheck_nf(sigs: &CoreSigs, ctx: &CoreContext, n: &Nf) -> Result<CoreType, CoreTypeError> {
    let mut c = Checker::new(sigs);
    let mut env: Vec<(Name, Ty)> = ctx.iter().map(|(n, t)| (n.clone(), c.lift_core(t))).collect();
    let ty = c.nf(&mut env, n)?;
    c.solve()?;
    c.zonk(&ty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::{ArithOp, FormalParam};

    fn param(id: u32, ty: Pretype) -> Nf {
        Nf::Param(FormalParam { id, ty, classifier: None })
    }

    #[test]
    fn ill_scoped_var_is_well_typed() {
        let n = Nf::ast(Ast::Var(param(0, Pretype::Nat)));
        assert_eq!(typecheck_nf(&CoreSigs::default(), &vec![], &n).unwrap(), CoreType::AstVal(Pretype::Nat));
    }

    #[test]
    fn err_has_any_type() {
        let sigs = CoreSigs::default();
        for ty in [CoreType::Nat, CoreType::AstVal(Pretype::Nat), CoreType::FParam(Pretype::Nat)] {
            let want = CoreComp { ty, row: EffectRow::single("op") };
            check_core(&sigs, &vec![], &Term::Err, &want).unwrap();
        }
    }

    #[test]
    fn lam_ast_types_as_function() {
        let x = param(0, Pretype::Nat);
        let body = Nf::ast(Ast::Arith(ArithOp::Add, Nf::ast(Ast::Var(x.clone())), Nf::ast(Ast::Nat(0))));
        let n = Nf::ast(Ast::Lam(x, body));
        let t = typecheck_nf(&CoreSigs::default(), &vec![], &n).unwrap();
        assert_eq!(t, CoreType::AstVal(Pretype::fun(Pretype::Nat, EffectRow::empty(), Pretype::Nat)));
    }

    #[test]
    fn check_rejects_non_ast() {
        let e = typecheck_core(&CoreSigs::default(), &vec![], &Term::Check(Nf::Nat(1))).unwrap_err();
        assert!(e.message.contains("AST"));
    }

    #[test]
    fn handler_must_cover_row() {
        let mut sigs = CoreSigs::default();
        sigs.compile.insert("op".into(), (CoreType::Nat, CoreType::Nat));
        let h = CoreHandler { ret_var: "x".into(), ret_body: Box::new(Term::Return(Nf::var("x"))), ops: vec![] };
        let t = Term::Handle(Box::new(Term::Op("op".into(), Nf::Nat(0))), h);
        let want = CoreComp { ty: CoreType::Nat, row: EffectRow::empty() };
        assert!(check_core(&sigs, &vec![], &t, &want).is_err());
        assert_eq!(typecheck_core(&sigs, &vec![], &t).unwrap().row, EffectRow::single("op"));
    }

    #[test]
    fn mkvar_and_dlet_are_transparent() {
        let t = Term::Do(
            "x".into(),
            Box::new(Term::Mkvar(Pretype::Nat, None)),
            Box::new(Term::Dlet(Nf::var("x"), Box::new(Term::Check(Nf::ast(Ast::Var(Nf::var("x"))))))),
        );
        let c = typecheck_core(&CoreSigs::default(), &vec![], &t).unwrap();
        assert_eq!(c.ty, CoreType::AstVal(Pretype::Nat));
    }
}
