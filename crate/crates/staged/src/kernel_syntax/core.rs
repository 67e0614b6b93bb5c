//! Core-level syntax: normal forms (including AST constructors and formal
//! parameters), terms, handlers, evaluation frames, and core types.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::sync::Arc;



use super::row::EffectRow;
use super::source::{ArithOp, Name};

/// Types of generated run-time code.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Pretype {
    Nat,
    Fun(Box<Pretype>, EffectRow, Box<Pretype>),
    Cont(Box<Pretype>, EffectRow, Box<Pretype>),
}

/// `Q!ξ₁ ⇒ R!ξ₂` for generated handler ASTs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HandlerPretype {
    pub from: Pretype,
    pub from_row: EffectRow,
    pub to: Pretype,
    pub to_row: EffectRow,
}

/// Value types of the core calculus.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CoreType {
    Nat,
    Fun(Box<CoreType>, EffectRow, Box<CoreType>),
    Cont(Box<CoreType>, EffectRow, Box<CoreType>),
    FParam(Pretype),
    /// `AST(R)`: a generated value.
    AstVal(Pretype),
    /// `AST(R!ξ)`: a generated computation.
    AstComp(Pretype, EffectRow),
    /// `AST(Q!ξ₁ ⇒ R!ξ₂)`: a generated handler.
    AstHandler(Box<HandlerPretype>),
}

/// `T ! Δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreComp {
    pub ty: CoreType,
    pub row: EffectRow,
}

/// Operation signatures visible to core programs. Compile-time operations
/// are performed by core terms; run-time operations only appear inside
/// generated `Op` ASTs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoreSigs {
    pub compile: BTreeMap<Name, (CoreType, CoreType)>,
    pub run: BTreeMap<Name, (Pretype, Pretype)>,
}

/// A typed binding-site name in generated code, created by `mkvar`.
/// Identity is the id alone.
#[derive(Clone, Debug)]
pub struct FormalParam {
    pub id: u32,
    pub ty: Pretype,
    pub classifier: Option<u32>,
}

impl PartialEq for FormalParam {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for FormalParam {}

impl Hash for FormalParam {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl PartialOrd for FormalParam {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FormalParam {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

/// Normal forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Nf {
    /// A meta-level variable.
    Var(Name),
    Nat(u64),
    Lam(Name, Box<Term>),
    /// A captured continuation; only ever produced by the machine.
    Kont(Arc<Kont>),
    Param(FormalParam),
    Ast(Box<Ast>),
}

/// AST constructors for generated code. Children are normal forms so that
/// elaborated terms can mention meta-variables before they are bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Ast {
    Nat(u64),
    Var(Nf),
    Lam(Nf, Nf),
    App(Nf, Nf),
    Continue(Nf, Nf),
    Ret(Nf),
    /// `Do(bound, binder, body)`.
    Do(Nf, Nf, Nf),
    Op(Name, Nf),
    Hwith(Nf, Nf),
    Hret(Nf, Nf),
    /// `Hop(rest, arg binder, continuation binder, body)`.
    Hop(Name, Nf, Nf, Nf, Nf),
    Arith(ArithOp, Nf, Nf),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    App(Nf, Nf),
    Return(Nf),
    Do(Name, Box<Term>, Box<Term>),
    Op(Name, Nf),
    Handle(Box<Term>, CoreHandler),
    Continue(Nf, Nf),
    Check(Nf),
    CheckM(Nf),
    Mkvar(Pretype, Option<u32>),
    Dlet(Nf, Box<Term>),
    Tls(Box<Term>),
    Err,
    Arith(ArithOp, Nf, Nf),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreOpClause {
    pub op: Name,
    pub arg: Name,
    pub cont: Name,
    pub body: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreHandler {
    pub ret_var: Name,
    pub ret_body: Box<Term>,
    pub ops: Vec<CoreOpClause>,
}

impl CoreHandler {
    pub fn clause(&self, op: &str) -> Option<&CoreOpClause> {
        self.ops.iter().find(|c| c.op == op)
    }
}

/// One evaluation frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Do(Name, Term),
    Handle(CoreHandler),
    Dlet(FormalParam),
    Tls,
}

/// `κx. handle E₂[return x] with h`, stored as its frames: the handler
/// frame first, then the frames of E₂ from outermost to innermost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Kont {
    pub frames: Vec<Frame>,
}

/// Name of the hole variable used when a continuation is shown as a term.
pub const KONT_VAR: &str = "κ.x";

impl Kont {
    /// The continuation's body with `return x` plugged into the hole.
    pub fn body(&self) -> Term {
        plug(&self.frames, Term::Return(Nf::Var(KONT_VAR.to_string())))
    }
}

/// Plugs `t` into a frame stack listed from outermost to innermost.
pub fn plug(frames: &[Frame], t: Term) -> Term {
    frames.iter().rev().fold(t, |inner, frame| frame.plug(inner))
}

impl Frame {
    pub fn plug(&self, t: Term) -> Term {
        match self {
            Frame::Do(x, body) => Term::Do(x.clone(), Box::new(t), Box::new(body.clone())),
            Frame::Handle(h) => Term::Handle(Box::new(t), h.clone()),
            Frame::Dlet(p) => Term::Dlet(Nf::Param(p.clone()), Box::new(t)),
            Frame::Tls => Term::Tls(Box::new(t)),
        }
    }
}

impl Nf {
    pub fn ast(a: Ast) -> Nf {
        Nf::Ast(Box::new(a))
    }

    pub fn var(x: impl Into<Name>) -> Nf {
        Nf::Var(x.into())
    }

    pub fn as_param(&self) -> Option<&FormalParam> {
        match self {
            Nf::Param(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_ast(&self) -> bool {
        matches!(self, Nf::Ast(_))
    }
}

impl Ast {
    /// Children in constructor order.
    pub fn children(&self) -> Vec<&Nf> {
        match self {
            Ast::Nat(_) => vec![],
            Ast::Var(n) | Ast::Ret(n) | Ast::Op(_, n) => vec![n],
            Ast::Lam(a, b)
            | Ast::App(a, b)
            | Ast::Continue(a, b)
            | Ast::Hwith(a, b)
            | Ast::Hret(a, b)
            | Ast::Arith(_, a, b) => vec![a, b],
            Ast::Do(a, b, c) => vec![a, b, c],
            Ast::Hop(_, a, b, c, d) => vec![a, b, c, d],
        }
    }

    /// Rebuilds the node with each child transformed by `f`.
    pub fn map(&self, mut f: impl FnMut(&Nf) -> Nf) -> Ast {
        match self {
            Ast::Nat(m) => Ast::Nat(*m),
            Ast::Var(n) => Ast::Var(f(n)),
            Ast::Ret(n) => Ast::Ret(f(n)),
            Ast::Op(op, n) => Ast::Op(op.clone(), f(n)),
            Ast::Lam(a, b) => Ast::Lam(f(a), f(b)),
            Ast::App(a, b) => Ast::App(f(a), f(b)),
            Ast::Continue(a, b) => Ast::Continue(f(a), f(b)),
            Ast::Hwith(a, b) => Ast::Hwith(f(a), f(b)),
            Ast::Hret(a, b) => Ast::Hret(f(a), f(b)),
            Ast::Arith(op, a, b) => Ast::Arith(*op, f(a), f(b)),
            Ast::Do(a, b, c) => Ast::Do(f(a), f(b), f(c)),
            Ast::Hop(op, a, b, c, d) => Ast::Hop(op.clone(), f(a), f(b), f(c), f(d)),
        }
    }

    pub fn ctor_name(&self) -> String {
        match self {
            Ast::Nat(_) => "Nat".into(),
            Ast::Var(_) => "Var".into(),
            Ast::Lam(..) => "Lam".into(),
            Ast::App(..) => "App".into(),
            Ast::Continue(..) => "Continue".into(),
            Ast::Ret(_) => "Ret".into(),
            Ast::Do(..) => "Do".into(),
            Ast::Op(op, _) => format!("Op_{op}"),
            Ast::Hwith(..) => "Hwith".into(),
            Ast::Hret(..) => "Hret".into(),
            Ast::Hop(op, ..) => format!("Hop_{op}"),
            Ast::Arith(ArithOp::Add, ..) => "Plus".into(),
            Ast::Arith(ArithOp::Mul, ..) => "Times".into(),
            Ast::Arith(ArithOp::Sub, ..) => "Minus".into(),
        }
    }
}

impl Pretype {
    pub fn fun(a: Pretype, row: EffectRow, b: Pretype) -> Pretype {
        Pretype::Fun(Box::new(a), row, Box::new(b))
    }
}

impl CoreType {
    pub fn fun(a: CoreType, row: EffectRow, b: CoreType) -> CoreType {
        CoreType::Fun(Box::new(a), row, Box::new(b))
    }

    pub fn cont(a: CoreType, row: EffectRow, b: CoreType) -> CoreType {
        CoreType::Cont(Box::new(a), row, Box::new(b))
    }
}
