//! Source-level syntax: stratified types, terms in three syntactic
//! categories, and effect signatures.



use super::row::EffectRow;

pub type Name = String;

/// Line/column position of a node in its source file.
///
/// Positions are metadata: two spans always compare equal, so structural
/// equality of terms ignores where they were written.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl PartialEq for Span {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Span { line, column }
    }
}

/// Which stage a declaration or a type belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    /// Level 0: code that runs after generation.
    Run,
    /// Level −1: code that runs while generating.
    Compile,
}

/// The classifier attached to a level −1 `Code` type.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassTag {
    /// The least classifier.
    Bottom,
    /// A classifier name written in an effect signature.
    Named(Name),
    /// A classifier introduced by the checker at a binder.
    Fresh(u32),
}

/// Level 0 value types.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RunType {
    Nat,
    Fun(Box<RunType>, EffectRow, Box<RunType>),
    Cont(Box<RunType>, EffectRow, Box<RunType>),
}

/// Level −1 value types.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CompileType {
    Nat,
    Fun(Box<CompileType>, EffectRow, Box<CompileType>),
    Cont(Box<CompileType>, EffectRow, Box<CompileType>),
    /// `Code(T ! ξ)`, optionally tagged with a classifier.
    Code(Box<RunType>, EffectRow, Option<ClassTag>),
}

/// A value type at either level.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SourceType {
    Run(RunType),
    Compile(CompileType),
}

/// `T⁰ ! Δ;ξ`: a level 0 computation with its compile-time and run-time rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunComp {
    pub ty: RunType,
    pub compile_row: EffectRow,
    pub run_row: EffectRow,
}

/// `T⁻¹ ! Δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompileComp {
    pub ty: CompileType,
    pub row: EffectRow,
}

/// `(S!ξ₁ ⇒ T!ξ₂)⁰`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunHandlerType {
    pub from: RunType,
    pub from_row: EffectRow,
    pub to: RunType,
    pub to_row: EffectRow,
}

/// `(S!Δ₁ ⇒ T!Δ₂)⁻¹`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompileHandlerType {
    pub from: CompileType,
    pub from_row: EffectRow,
    pub to: CompileType,
    pub to_row: EffectRow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Mul,
    /// Truncated subtraction on naturals.
    Sub,
}

impl ArithOp {
    pub fn apply(self, a: u64, b: u64) -> u64 {
        match self {
            ArithOp::Add => a.saturating_add(b),
            ArithOp::Mul => a.saturating_mul(b),
            ArithOp::Sub => a.saturating_sub(b),
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Mul => "*",
            ArithOp::Sub => "-",
        }
    }
}

/// A binding occurrence. The annotation may be absent after parsing; the
/// checker fills it in. In classifier mode the checker also records the
/// classifier introduced at this binder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binder {
    pub name: Name,
    pub ann: Option<SourceType>,
    pub classifier: Option<u32>,
    pub span: Span,
}

impl Binder {
    pub fn new(name: impl Into<Name>, ann: Option<SourceType>) -> Self {
        Binder { name: name.into(), ann, classifier: None, span: Span::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Var(Name, Span),
    Nat(u64),
    Lam { binder: Binder, body: Box<Expr> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprKind {
    App(Value, Value),
    Return(Value),
    Do { binder: Binder, bound: Box<Expr>, body: Box<Expr> },
    Op { op: Name, arg: Value },
    Handle { body: Box<Expr>, handler: Handler },
    Continue(Value, Value),
    /// Quotation stores an expression, never a value or handler.
    Quote(Box<Expr>),
    Splice(Box<Expr>),
    Arith(ArithOp, Value, Value),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RetClause {
    pub binder: Binder,
    pub body: Box<Expr>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpClause {
    pub op: Name,
    pub arg: Binder,
    pub cont: Binder,
    pub body: Expr,
    pub span: Span,
}

/// One return clause followed by operation clauses in source order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handler {
    pub ret: RetClause,
    pub ops: Vec<OpClause>,
}

impl Handler {
    pub fn dom(&self) -> EffectRow {
        self.ops.iter().map(|c| c.op.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectSig {
    pub name: Name,
    pub stage: Stage,
    pub arg: SourceType,
    pub result: SourceType,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceProgram {
    pub sigs: Vec<EffectSig>,
    pub body: Expr,
}

impl SourceProgram {
    pub fn sig(&self, stage: Stage, name: &str) -> Option<&EffectSig> {
        self.sigs.iter().find(|s| s.stage == stage && s.name == name)
    }
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    pub fn at(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn ret(v: Value) -> Self {
        Expr::new(ExprKind::Return(v))
    }

    pub fn do_(binder: Binder, bound: Expr, body: Expr) -> Self {
        Expr::new(ExprKind::Do { binder, bound: Box::new(bound), body: Box::new(body) })
    }

    pub fn quote(e: Expr) -> Self {
        Expr::new(ExprKind::Quote(Box::new(e)))
    }

    pub fn splice(e: Expr) -> Self {
        Expr::new(ExprKind::Splice(Box::new(e)))
    }
}

impl Value {
    pub fn var(name: impl Into<Name>) -> Self {
        Value::Var(name.into(), Span::default())
    }

    pub fn lam(binder: Binder, body: Expr) -> Self {
        Value::Lam { binder, body: Box::new(body) }
    }
}
