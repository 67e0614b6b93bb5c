use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::kernel_syntax::{
    Ast, Binder, CoreHandler, CoreOpClause, Expr, ExprKind, Handler, Name, Nf, Pretype, SourceProgram,
    SourceType, Term, Value,
};
use crate::source_typeck::erase;
use crate::surface::Mode;

/// Which dynamic scope-extrusion check elaboration inserts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CheckKind {
    Naive,
    Lazy,
    Eager,
    C4C,
}

impl CheckKind {
    pub const ALL: [CheckKind; 4] = [CheckKind::Naive, CheckKind::Lazy, CheckKind::Eager, CheckKind::C4C];
    /// The three kinds that insert checks.
    pub const CHECKED: [CheckKind; 3] = [CheckKind::Lazy, CheckKind::Eager, CheckKind::C4C];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Naive => "naive",
            CheckKind::Lazy => "lazy",
            CheckKind::Eager => "eager",
            CheckKind::C4C => "c4c",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(CheckKind::Naive),
            "lazy" => Ok(CheckKind::Lazy),
            "eager" => Ok(CheckKind::Eager),
            "c4c" => Ok(CheckKind::C4C),
            other => Err(format!("unknown check kind `{other}` (expected naive, lazy, eager or c4c)")),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ElabError {
    #[error("binder {0} has no type annotation; run the type checker first")]
    Unannotated(Name),
    #[error("binder {0} has a compile-time annotation in a run-time position")]
    WrongLevel(Name),
    #[error("quote outside splice mode")]
    MisplacedQuote,
}

type Res<T> = Result<T, ElabError>;

/// Elaboration settings: the check discipline and whether formal
/// parameters carry classifiers (in which case no `tls` is inserted).
#[derive(Clone, Copy, Debug)]
struct Settings {
    kind: CheckKind,
    classified: bool,
}

pub(super) struct Elaborator {
    settings: Settings,
    counter: usize,
}

impl Elaborator {
    fn new(kind: CheckKind, classified: bool) -> Self {
        Elaborator { settings: Settings { kind, classified }, counter: 0 }
    }

    /// Administrative names contain a `.`, which source identifiers cannot.
    fn fresh(&mut self, base: &str) -> Name {
        self.counter += 1;
        format!("{base}.{}", self.counter)
    }

    fn checks_quotes(&self) -> bool {
        matches!(self.settings.kind, CheckKind::Eager | CheckKind::C4C)
    }

    fn checks_binders(&self) -> bool {
        self.settings.kind != CheckKind::Naive
    }

    fn check_term(&self, n: Nf) -> Term {
        if self.settings.kind == CheckKind::C4C {
            Term::CheckM(n)
        } else {
            Term::Check(n)
        }
    }

    /// Emits the constructed AST, checked when in quote mode under an eager discipline.
    fn build(&self, mode: Mode, a: Ast) -> Term {
        let leaf = matches!(a, Ast::Nat(_));
        if mode == Mode::Quote && self.checks_quotes() && !leaf {
            self.check_term(Nf::ast(a))
        } else {
            Term::Return(Nf::ast(a))
        }
    }

    fn pretype(&self, b: &Binder) -> Res<Pretype> {
        match &b.ann {
            Some(SourceType::Run(t)) => Ok(erase(t)),
            Some(SourceType::Compile(_)) => Err(ElabError::WrongLevel(b.name.clone())),
            None => Err(ElabError::Unannotated(b.name.clone())),
        }
    }

    fn mkvar(&self, b: &Binder) -> Res<Term> {
        let class = if self.settings.classified { b.classifier } else { None };
        Ok(Term::Mkvar(self.pretype(b)?, class))
    }

    /// `do a ← t in k(a)`.
    fn bind(&mut self, base: &str, t: Term, k: impl FnOnce(&mut Self, Nf) -> Res<Term>) -> Res<Term> {
        let name = self.fresh(base);
        let rest = k(self, Nf::var(name.clone()))?;
        Ok(Term::Do(name, Box::new(t), Box::new(rest)))
    }

    /// Wraps the part of an elaboration that lies in the scope of the
    /// formal parameters `vars`, according to the mode and discipline.
    fn scope(&mut self, mode: Mode, vars: &[&Name], inner: Term) -> Term {
        let declares = match mode {
            Mode::Compile => self.checks_binders(),
            Mode::Quote => self.checks_quotes(),
            Mode::Splice => false,
        };
        if !declares {
            return inner;
        }
        let declared = vars.iter().rev().fold(inner, |acc, x| Term::Dlet(Nf::var((*x).clone()), Box::new(acc)));
        if mode == Mode::Quote {
            let v = self.fresh("v");
            Term::Do(v.clone(), Box::new(declared), Box::new(self.check_term(Nf::var(v))))
        } else {
            declared
        }
    }

    fn value(&mut self, v: &Value, mode: Mode) -> Res<Term> {
        if mode == Mode::Splice {
            return Ok(Term::Return(self.s_value(v)?));
        }
        match v {
            Value::Nat(m) => Ok(self.build(mode, Ast::Nat(*m))),
            Value::Var(x, _) => Ok(self.build(mode, Ast::Var(Nf::var(x.clone())))),
            Value::Lam { binder, body } => {
                let mk = self.mkvar(binder)?;
                let x = binder.name.clone();
                let t = self.expr(body, mode)?;
                let inner = self.bind("body", t, |_, b| Ok(Term::Return(Nf::ast(Ast::Lam(Nf::var(x.clone()), b)))))?;
                let scoped = self.scope(mode, &[&binder.name], inner);
                Ok(Term::Do(binder.name.clone(), Box::new(mk), Box::new(scoped)))
            }
        }
    }

    fn s_value(&mut self, v: &Value) -> Res<Nf> {
        Ok(match v {
            Value::Var(x, _) => Nf::var(x.clone()),
            Value::Nat(m) => Nf::Nat(*m),
            Value::Lam { binder, body } => Nf::Lam(binder.name.clone(), Box::new(self.expr(body, Mode::Splice)?)),
        })
    }

    /// Elaborates two operands and combines the resulting ASTs.
    fn pair(&mut self, mode: Mode, a: &Value, b: &Value, ctor: impl FnOnce(Nf, Nf) -> Ast) -> Res<Term> {
        let ta = self.value(a, mode)?;
        let tb = self.value(b, mode)?;
        self.bind("a", ta, |me, na| me.bind("a", tb, |me, nb| Ok(me.build(mode, ctor(na, nb)))))
    }

    pub(super) fn expr(&mut self, e: &Expr, mode: Mode) -> Res<Term> {
        if mode == Mode::Splice {
            return self.s_expr(e);
        }
        match &e.kind {
            ExprKind::Return(v) => {
                let t = self.value(v, mode)?;
                self.bind("a", t, |me, a| Ok(me.build(mode, Ast::Ret(a))))
            }
            ExprKind::App(f, x) => self.pair(mode, f, x, Ast::App),
            ExprKind::Continue(k, x) => self.pair(mode, k, x, Ast::Continue),
            ExprKind::Arith(op, a, b) => {
                let op = *op;
                self.pair(mode, a, b, move |x, y| Ast::Arith(op, x, y))
            }
            ExprKind::Op { op, arg } => {
                let t = self.value(arg, mode)?;
                let op = op.clone();
                self.bind("a", t, |me, a| Ok(me.build(mode, Ast::Op(op, a))))
            }
            ExprKind::Do { binder, bound, body } => {
                let t1 = self.expr(bound, mode)?;
                self.bind("a", t1, |me, a| {
                    let mk = me.mkvar(binder)?;
                    let x = binder.name.clone();
                    let t2 = me.expr(body, mode)?;
                    let inner = me.bind("b", t2, |_, b| Ok(Term::Return(Nf::ast(Ast::Do(a, Nf::var(x.clone()), b)))))?;
                    let scoped = me.scope(mode, &[&binder.name], inner);
                    Ok(Term::Do(binder.name.clone(), Box::new(mk), Box::new(scoped)))
                })
            }
            ExprKind::Handle { body, handler } => {
                let t1 = self.expr(body, mode)?;
                self.bind("a", t1, |me, a| {
                    let th = me.handler(handler, handler.ops.len(), mode)?;
                    me.bind("h", th, |me, h| Ok(me.build(mode, Ast::Hwith(a, h))))
                })
            }
            ExprKind::Quote(_) => Err(ElabError::MisplacedQuote),
            ExprKind::Splice(inner) => {
                let t = self.expr(inner, Mode::Splice)?;
                if mode == Mode::Quote || self.settings.classified {
                    return Ok(t);
                }
                let tls = Term::Tls(Box::new(t));
                if self.checks_binders() {
                    let v = self.fresh("v");
                    Ok(Term::Do(v.clone(), Box::new(tls), Box::new(self.check_term(Nf::var(v)))))
                } else {
                    Ok(tls)
                }
            }
        }
    }

    /// Elaborates the return clause followed by the first `n` operation clauses.
    fn handler(&mut self, h: &Handler, n: usize, mode: Mode) -> Res<Term> {
        if n == 0 {
            let mk = self.mkvar(&h.ret.binder)?;
            let x = h.ret.binder.name.clone();
            let t = self.expr(&h.ret.body, mode)?;
            let inner = self.bind("b", t, |_, b| Ok(Term::Return(Nf::ast(Ast::Hret(Nf::var(x.clone()), b)))))?;
            let scoped = self.scope(mode, &[&h.ret.binder.name], inner);
            return Ok(Term::Do(h.ret.binder.name.clone(), Box::new(mk), Box::new(scoped)));
        }
        let c = &h.ops[n - 1];
        let rest = self.handler(h, n - 1, mode)?;
        self.bind("h", rest, |me, rest| {
            let mk_x = me.mkvar(&c.arg)?;
            let mk_k = me.mkvar(&c.cont)?;
            let (x, k) = (c.arg.name.clone(), c.cont.name.clone());
            let t = me.expr(&c.body, mode)?;
            let op = c.op.clone();
            let inner = me.bind("b", t, |_, b| {
                Ok(Term::Return(Nf::ast(Ast::Hop(op, rest, Nf::var(x.clone()), Nf::var(k.clone()), b))))
            })?;
            let scoped = me.scope(mode, &[&c.arg.name, &c.cont.name], inner);
            Ok(Term::Do(
                c.arg.name.clone(),
                Box::new(mk_x),
                Box::new(Term::Do(c.cont.name.clone(), Box::new(mk_k), Box::new(scoped))),
            ))
        })
    }

    fn s_expr(&mut self, e: &Expr) -> Res<Term> {
        Ok(match &e.kind {
            ExprKind::Return(v) => Term::Return(self.s_value(v)?),
            ExprKind::App(f, x) => Term::App(self.s_value(f)?, self.s_value(x)?),
            ExprKind::Continue(k, x) => Term::Continue(self.s_value(k)?, self.s_value(x)?),
            ExprKind::Arith(op, a, b) => Term::Arith(*op, self.s_value(a)?, self.s_value(b)?),
            ExprKind::Op { op, arg } => Term::Op(op.clone(), self.s_value(arg)?),
            ExprKind::Do { binder, bound, body } => {
                Term::Do(binder.name.clone(), Box::new(self.s_expr(bound)?), Box::new(self.s_expr(body)?))
            }
            ExprKind::Handle { body, handler } => {
                let body = self.s_expr(body)?;
                let ret_body = self.s_expr(&handler.ret.body)?;
                let mut ops = Vec::new();
                for c in &handler.ops {
                    ops.push(CoreOpClause {
                        op: c.op.clone(),
                        arg: c.arg.name.clone(),
                        cont: c.cont.name.clone(),
                        body: self.s_expr(&c.body)?,
                    });
                }
                Term::Handle(
                    Box::new(body),
                    CoreHandler { ret_var: handler.ret.binder.name.clone(), ret_body: Box::new(ret_body), ops },
                )
            }
            ExprKind::Quote(inner) => self.expr(inner, Mode::Quote)?,
            ExprKind::Splice(_) => unreachable!("the parser rejects splices in splice mode"),
        })
    }
}

/// Elaborates a checked, annotated program.
pub fn elaborate(p: &SourceProgram, kind: CheckKind) -> Result<Term, ElabError> {
    Elaborator::new(kind, false).expr(&p.body, Mode::Compile)
}

/// Naive elaboration for classifier-checked programs: formal parameters
/// carry the classifier of their binder and top-level splices are left
/// unmarked.
pub fn elaborate_classified(p: &SourceProgram) -> Result<Term, ElabError> {
    Elaborator::new(CheckKind::Naive, true).expr(&p.body, Mode::Compile)
}

/// Elaborates one expression in the given mode, with a fresh name supply.
pub fn elaborate_expr(e: &Expr, mode: Mode, kind: CheckKind) -> Result<Term, ElabError> {
    Elaborator::new(kind, false).expr(e, mode)
}

