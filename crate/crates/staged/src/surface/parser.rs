//! Parsing of `.sl` programs.
//!
//! Parsing happens in two passes. The first builds a raw tree that allows
//! arbitrary expressions in operand positions. The second walks the raw tree
//! with the current staging mode, rejects misplaced quotes and splices, and
//! let-binds every non-value operand left to right.

use std::collections::BTreeSet;

use super::lexer::{lex, Tok, Token};
use super::Diagnostic;
use crate::kernel_syntax::{
    ArithOp, Binder, ClassTag, CompileType, EffectRow, EffectSig, Expr, ExprKind, Handler, Name, OpClause, RetClause,
    RunType, SourceProgram, SourceType, Span, Stage, Value,
};

/// The three staging modes a term can be parsed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Compile,
    Quote,
    Splice,
}

impl Mode {
    /// Level of the values this mode manipulates.
    pub fn stage(self) -> Stage {
        match self {
            Mode::Splice => Stage::Compile,
            _ => Stage::Run,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum RawType {
    Nat,
    Fun(Box<RawType>, EffectRow, Box<RawType>),
    Cont(Box<RawType>, EffectRow, Box<RawType>),
    Code(Box<RawType>, EffectRow, Option<ClassTag>),
}

#[derive(Clone, Debug)]
struct RawBinder {
    name: Name,
    ann: Option<RawType>,
    span: Span,
}

#[derive(Clone, Debug)]
enum Raw {
    Var(Name),
    Nat(u64),
    Lam(RawBinder, Box<RawExpr>),
    App(Box<RawExpr>, Box<RawExpr>),
    Return(Box<RawExpr>),
    Do(RawBinder, Box<RawExpr>, Box<RawExpr>),
    Op(Name, Box<RawExpr>),
    Handle(Box<RawExpr>, RawHandler),
    Continue(Box<RawExpr>, Box<RawExpr>),
    Quote(Box<RawExpr>),
    Splice(Box<RawExpr>),
    Arith(ArithOp, Box<RawExpr>, Box<RawExpr>),
}

#[derive(Clone, Debug)]
struct RawExpr {
    raw: Raw,
    span: Span,
}

#[derive(Clone, Debug)]
struct RawHandler {
    ret: Option<(RawBinder, Box<RawExpr>)>,
    ops: Vec<(Name, RawBinder, RawBinder, RawExpr, Span)>,
    span: Span,
}

pub(crate) struct TokenStream {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl TokenStream {
    pub(crate) fn new(text: &str) -> PResult<Self> {
        Ok(TokenStream { toks: lex(text)?, pos: 0 })
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub(crate) fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    pub(crate) fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("{t}")))
        }
    }

    pub(crate) fn unexpected(&self, wanted: &str) -> Diagnostic {
        Diagnostic::error(format!("expected {wanted}, found {}", self.peek()), self.span())
    }

    pub(crate) fn ident(&mut self) -> PResult<Name> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                Ok(x)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    pub(crate) fn identifiers(&self) -> BTreeSet<String> {
        self.toks
            .iter()
            .filter_map(|t| match &t.tok {
                Tok::Ident(x) => Some(x.clone()),
                _ => None,
            })
            .collect()
    }

    /// `{a, b}`; the opening brace has not been consumed yet.
    pub(crate) fn row(&mut self) -> PResult<EffectRow> {
        self.expect(&Tok::LBrace)?;
        let mut row = EffectRow::empty();
        if self.eat(&Tok::RBrace) {
            return Ok(row);
        }
        loop {
            row.insert(self.ident()?);
            if self.eat(&Tok::RBrace) {
                return Ok(row);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    pub(crate) fn ty(&mut self) -> PResult<RawType> {
        let left = self.ty_atom()?;
        let make_fun: fn(Box<RawType>, EffectRow, Box<RawType>) -> RawType;
        let row = match self.peek() {
            Tok::Arrow => {
                self.bump();
                make_fun = RawType::Fun;
                EffectRow::empty()
            }
            Tok::FatArrow => {
                self.bump();
                make_fun = RawType::Cont;
                EffectRow::empty()
            }
            Tok::Minus if self.peek_at(1) == &Tok::LBrace => {
                self.bump();
                let r = self.row()?;
                self.expect(&Tok::Arrow)?;
                make_fun = RawType::Fun;
                r
            }
            Tok::Eq if self.peek_at(1) == &Tok::LBrace => {
                self.bump();
                let r = self.row()?;
                self.expect(&Tok::FatArrow)?;
                make_fun = RawType::Cont;
                r
            }
            _ => return Ok(left),
        };
        let right = self.ty()?;
        Ok(make_fun(Box::new(left), row, Box::new(right)))
    }

    fn ty_atom(&mut self) -> PResult<RawType> {
        match self.peek().clone() {
            Tok::Ident(x) if x == "Nat" || x == "ℕ" => {
                self.bump();
                Ok(RawType::Nat)
            }
            Tok::Ident(x) if x == "Code" => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let inner = self.ty()?;
                let row = if self.eat(&Tok::Bang) { self.row()? } else { EffectRow::empty() };
                self.expect(&Tok::RParen)?;
                let tag = if self.eat(&Tok::At) {
                    let name = self.ident()?;
                    Some(if name == "bot" { ClassTag::Bottom } else { ClassTag::Named(name) })
                } else {
                    None
                };
                Ok(RawType::Code(Box::new(inner), row, tag))
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            _ => Err(self.unexpected("a type")),
        }
    }
}

pub(crate) fn run_type(t: &RawType, span: Span) -> PResult<RunType> {
    Ok(match t {
        RawType::Nat => RunType::Nat,
        RawType::Fun(a, r, b) => RunType::Fun(Box::new(run_type(a, span)?), r.clone(), Box::new(run_type(b, span)?)),
        RawType::Cont(a, r, b) => RunType::Cont(Box::new(run_type(a, span)?), r.clone(), Box::new(run_type(b, span)?)),
        RawType::Code(..) => return Err(Diagnostic::error("Code types are not available at run time", span)),
    })
}

pub(crate) fn compile_type(t: &RawType, span: Span) -> PResult<CompileType> {
    Ok(match t {
        RawType::Nat => CompileType::Nat,
        RawType::Fun(a, r, b) => {
            CompileType::Fun(Box::new(compile_type(a, span)?), r.clone(), Box::new(compile_type(b, span)?))
        }
        RawType::Cont(a, r, b) => {
            CompileType::Cont(Box::new(compile_type(a, span)?), r.clone(), Box::new(compile_type(b, span)?))
        }
        RawType::Code(inner, row, tag) => CompileType::Code(Box::new(run_type(inner, span)?), row.clone(), tag.clone()),
    })
}

fn level_type(t: &RawType, stage: Stage, span: Span) -> PResult<SourceType> {
    match stage {
        Stage::Run => run_type(t, span).map(SourceType::Run),
        Stage::Compile => compile_type(t, span).map(SourceType::Compile),
    }
}

struct Parser {
    ts: TokenStream,
    ops: BTreeSet<Name>,
}

impl Parser {
    fn decl(&mut self) -> PResult<(EffectSig, Span)> {
        let span = self.ts.span();
        self.ts.expect(&Tok::Effect)?;
        let stage = if self.ts.eat(&Tok::Caret) { Stage::Compile } else { Stage::Run };
        let name = self.ts.ident()?;
        self.ts.expect(&Tok::Colon)?;
        let ty_span = self.ts.span();
        let (arg, result) = match self.ts.ty()? {
            RawType::Fun(a, row, b) if row.is_empty() => (*a, *b),
            _ => return Err(Diagnostic::error(format!("signature of {name} must have the form A -> B"), ty_span)),
        };
        let sig = EffectSig {
            name,
            stage,
            arg: level_type(&arg, stage, ty_span)?,
            result: level_type(&result, stage, ty_span)?,
            span,
        };
        Ok((sig, span))
    }

    /// `no_seq` is set inside handler clause bodies, where `;` separates clauses.
    fn expr(&mut self, no_seq: bool) -> PResult<RawExpr> {
        let span = self.ts.span();
        let first = match self.ts.peek() {
            Tok::Do => {
                self.ts.bump();
                let binder = self.binder_plain()?;
                self.ts.expect(&Tok::LeftArrow)?;
                let bound = self.expr(false)?;
                self.ts.expect(&Tok::In)?;
                let body = self.expr(no_seq)?;
                return Ok(RawExpr { raw: Raw::Do(binder, Box::new(bound), Box::new(body)), span });
            }
            Tok::Fun | Tok::Lambda => {
                self.ts.bump();
                let binder = if self.ts.eat(&Tok::LParen) {
                    let b = self.binder_plain()?;
                    self.ts.expect(&Tok::RParen)?;
                    b
                } else {
                    self.binder_plain()?
                };
                if !self.ts.eat(&Tok::Arrow) {
                    self.ts.expect(&Tok::Dot)?;
                }
                let body = self.expr(no_seq)?;
                return Ok(RawExpr { raw: Raw::Lam(binder, Box::new(body)), span });
            }
            Tok::Handle => {
                self.ts.bump();
                let body = self.expr(false)?;
                self.ts.expect(&Tok::With)?;
                let handler = self.handler()?;
                RawExpr { raw: Raw::Handle(Box::new(body), handler), span }
            }
            _ => self.sum()?,
        };
        if !no_seq && self.ts.eat(&Tok::Semi) {
            let rest = self.expr(false)?;
            let binder = RawBinder { name: "_".into(), ann: None, span };
            return Ok(RawExpr { raw: Raw::Do(binder, Box::new(first), Box::new(rest)), span });
        }
        Ok(first)
    }

    fn binder_plain(&mut self) -> PResult<RawBinder> {
        let span = self.ts.span();
        let name = self.ts.ident()?;
        let ann = if self.ts.eat(&Tok::Colon) { Some(self.ts.ty()?) } else { None };
        Ok(RawBinder { name, ann, span })
    }

    fn handler(&mut self) -> PResult<RawHandler> {
        let span = self.ts.span();
        self.ts.expect(&Tok::LBrace)?;
        let mut h = RawHandler { ret: None, ops: Vec::new(), span };
        loop {
            let clause_span = self.ts.span();
            if self.ts.eat(&Tok::Return) {
                self.ts.expect(&Tok::LParen)?;
                let b = self.binder_plain()?;
                self.ts.expect(&Tok::RParen)?;
                self.ts.expect(&Tok::Arrow)?;
                let body = self.expr(true)?;
                if h.ret.is_some() {
                    return Err(Diagnostic::error("handler has two return clauses", clause_span));
                }
                h.ret = Some((b, Box::new(body)));
            } else {
                let op = self.ts.ident()?;
                if !self.ops.contains(&op) {
                    return Err(Diagnostic::error(format!("undeclared operation {op}"), clause_span));
                }
                if h.ops.iter().any(|c| c.0 == op) {
                    return Err(Diagnostic::error(format!("duplicate clause for {op}"), clause_span));
                }
                self.ts.expect(&Tok::LParen)?;
                let x = self.binder_plain()?;
                self.ts.expect(&Tok::Comma)?;
                let k = self.binder_plain()?;
                self.ts.expect(&Tok::RParen)?;
                self.ts.expect(&Tok::Arrow)?;
                let body = self.expr(true)?;
                h.ops.push((op, x, k, body, clause_span));
            }
            if self.ts.eat(&Tok::RBrace) {
                break;
            }
            self.ts.expect(&Tok::Semi)?;
            if self.ts.eat(&Tok::RBrace) {
                break;
            }
        }
        if h.ret.is_none() {
            return Err(Diagnostic::error("handler has no return clause", span));
        }
        Ok(h)
    }

    fn sum(&mut self) -> PResult<RawExpr> {
        let mut left = self.product()?;
        loop {
            let op = match self.ts.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus if self.ts.peek_at(1) != &Tok::LBrace => ArithOp::Sub,
                _ => return Ok(left),
            };
            let span = self.ts.span();
            self.ts.bump();
            let right = self.product()?;
            left = RawExpr { raw: Raw::Arith(op, Box::new(left), Box::new(right)), span };
        }
    }

    fn product(&mut self) -> PResult<RawExpr> {
        let mut left = self.application()?;
        while self.ts.peek() == &Tok::Star {
            let span = self.ts.span();
            self.ts.bump();
            let right = self.application()?;
            left = RawExpr { raw: Raw::Arith(ArithOp::Mul, Box::new(left), Box::new(right)), span };
        }
        Ok(left)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.ts.peek(),
            Tok::Ident(_) | Tok::Int(_) | Tok::LParen | Tok::OpenQuote | Tok::Dollar | Tok::Perform
        )
    }

    fn application(&mut self) -> PResult<RawExpr> {
        let span = self.ts.span();
        match self.ts.peek() {
            Tok::Return => {
                self.ts.bump();
                let v = self.atom()?;
                return Ok(RawExpr { raw: Raw::Return(Box::new(v)), span });
            }
            Tok::Continue => {
                self.ts.bump();
                let k = self.atom()?;
                let v = self.atom()?;
                return Ok(RawExpr { raw: Raw::Continue(Box::new(k), Box::new(v)), span });
            }
            _ => {}
        }
        let mut head = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            head = RawExpr { raw: Raw::App(Box::new(head), Box::new(arg)), span };
        }
        Ok(head)
    }

    fn atom(&mut self) -> PResult<RawExpr> {
        let span = self.ts.span();
        let raw = match self.ts.peek().clone() {
            Tok::Int(n) => {
                self.ts.bump();
                Raw::Nat(n)
            }
            Tok::Perform => {
                self.ts.bump();
                let op = self.ts.ident()?;
                return self.op_call(op, span);
            }
            Tok::Ident(x) if self.ops.contains(&x) && self.ts.peek_at(1) == &Tok::LParen => {
                self.ts.bump();
                return self.op_call(x, span);
            }
            Tok::Ident(x) => {
                self.ts.bump();
                Raw::Var(x)
            }
            Tok::LParen => {
                self.ts.bump();
                let e = self.expr(false)?;
                self.ts.expect(&Tok::RParen)?;
                return Ok(e);
            }
            Tok::OpenQuote => {
                self.ts.bump();
                let e = self.expr(false)?;
                self.ts.expect(&Tok::CloseQuote)?;
                Raw::Quote(Box::new(e))
            }
            Tok::Dollar => {
                self.ts.bump();
                let inner = if self.ts.eat(&Tok::LParen) {
                    let e = self.expr(false)?;
                    self.ts.expect(&Tok::RParen)?;
                    e
                } else {
                    let s = self.ts.span();
                    RawExpr { raw: Raw::Var(self.ts.ident()?), span: s }
                };
                Raw::Splice(Box::new(inner))
            }
            Tok::Fun | Tok::Lambda | Tok::Do | Tok::Handle => return self.expr(true),
            _ => return Err(self.ts.unexpected("an expression")),
        };
        Ok(RawExpr { raw, span })
    }

    fn op_call(&mut self, op: Name, span: Span) -> PResult<RawExpr> {
        if !self.ops.contains(&op) {
            return Err(Diagnostic::error(format!("undeclared operation {op}"), span));
        }
        self.ts.expect(&Tok::LParen)?;
        let arg = self.expr(false)?;
        self.ts.expect(&Tok::RParen)?;
        Ok(RawExpr { raw: Raw::Op(op, Box::new(arg)), span })
    }
}

/// Converts raw trees into source terms, tracking the staging mode.
struct Desugar {
    taken: BTreeSet<String>,
    counter: usize,
}

impl Desugar {
    fn fresh(&mut self) -> Name {
        loop {
            let name = format!("_s{}", self.counter);
            self.counter += 1;
            if !self.taken.contains(&name) {
                return name;
            }
        }
    }

    fn binder(&self, b: &RawBinder, mode: Mode) -> PResult<Binder> {
        let ann = match &b.ann {
            Some(t) => Some(level_type(t, mode.stage(), b.span)?),
            None => None,
        };
        Ok(Binder { name: b.name.clone(), ann, classifier: None, span: b.span })
    }

    /// Produces a value for `e`, queueing a binding when `e` is not one.
    fn operand(&mut self, e: &RawExpr, mode: Mode, pending: &mut Vec<(Name, Expr, Span)>) -> PResult<Value> {
        Ok(match &e.raw {
            Raw::Var(x) => Value::Var(x.clone(), e.span),
            Raw::Nat(n) => Value::Nat(*n),
            Raw::Lam(b, body) => Value::Lam { binder: self.binder(b, mode)?, body: Box::new(self.expr(body, mode)?) },
            _ => {
                let bound = self.expr(e, mode)?;
                let name = self.fresh();
                pending.push((name.clone(), bound, e.span));
                Value::Var(name, e.span)
            }
        })
    }

    fn wrap(pending: Vec<(Name, Expr, Span)>, body: Expr) -> Expr {
        pending.into_iter().rev().fold(body, |acc, (name, bound, span)| {
            let binder = Binder { name, ann: None, classifier: None, span };
            Expr::at(ExprKind::Do { binder, bound: Box::new(bound), body: Box::new(acc) }, span)
        })
    }

    fn expr(&mut self, e: &RawExpr, mode: Mode) -> PResult<Expr> {
        let span = e.span;
        let mut pending = Vec::new();
        let kind = match &e.raw {
            Raw::Var(_) | Raw::Nat(_) | Raw::Lam(..) => ExprKind::Return(self.operand(e, mode, &mut pending)?),
            Raw::Return(v) => ExprKind::Return(self.operand(v, mode, &mut pending)?),
            Raw::App(f, x) => {
                let f = self.operand(f, mode, &mut pending)?;
                ExprKind::App(f, self.operand(x, mode, &mut pending)?)
            }
            Raw::Continue(k, x) => {
                let k = self.operand(k, mode, &mut pending)?;
                ExprKind::Continue(k, self.operand(x, mode, &mut pending)?)
            }
            Raw::Arith(op, a, b) => {
                let a = self.operand(a, mode, &mut pending)?;
                ExprKind::Arith(*op, a, self.operand(b, mode, &mut pending)?)
            }
            Raw::Op(op, arg) => ExprKind::Op { op: op.clone(), arg: self.operand(arg, mode, &mut pending)? },
            Raw::Do(b, bound, body) => ExprKind::Do {
                binder: self.binder(b, mode)?,
                bound: Box::new(self.expr(bound, mode)?),
                body: Box::new(self.expr(body, mode)?),
            },
            Raw::Handle(body, h) => {
                let body = Box::new(self.expr(body, mode)?);
                let (rb, re) = h.ret.as_ref().ok_or_else(|| Diagnostic::error("handler has no return clause", h.span))?;
                let ret = RetClause { binder: self.binder(rb, mode)?, body: Box::new(self.expr(re, mode)?) };
                let mut ops = Vec::new();
                for (op, x, k, body, cspan) in &h.ops {
                    ops.push(OpClause {
                        op: op.clone(),
                        arg: self.binder(x, mode)?,
                        cont: self.binder(k, mode)?,
                        body: self.expr(body, mode)?,
                        span: *cspan,
                    });
                }
                ExprKind::Handle { body, handler: Handler { ret, ops } }
            }
            Raw::Quote(inner) => match mode {
                Mode::Splice => ExprKind::Quote(Box::new(self.expr(inner, Mode::Quote)?)),
                Mode::Compile => return Err(Diagnostic::error("quote not under splice in compile mode", span)),
                Mode::Quote => return Err(Diagnostic::error("quote inside quote without an intervening splice", span)),
            },
            Raw::Splice(inner) => match mode {
                Mode::Splice => return Err(Diagnostic::error("splice inside splice without an intervening quote", span)),
                _ => ExprKind::Splice(Box::new(self.expr(inner, Mode::Splice)?)),
            },
        };
        Ok(Self::wrap(pending, Expr::at(kind, span)))
    }
}

/// Parses a `.sl` program. The body is read in compile mode.
pub fn parse_program(text: &str) -> Result<SourceProgram, Vec<Diagnostic>> {
    parse_program_inner(text).map_err(|d| vec![d])
}

fn parse_program_inner(text: &str) -> PResult<SourceProgram> {
    let ts = TokenStream::new(text)?;
    if ts.peek() == &Tok::Eof {
        return Err(Diagnostic::error("empty program", ts.span()));
    }
    let mut p = Parser { ts, ops: BTreeSet::new() };
    let mut sigs: Vec<EffectSig> = Vec::new();
    while p.ts.peek() == &Tok::Effect {
        let (sig, span) = p.decl()?;
        if sigs.iter().any(|s| s.name == sig.name && s.stage == sig.stage) {
            return Err(Diagnostic::error(format!("operation {} declared twice", sig.name), span));
        }
        p.ops.insert(sig.name.clone());
        sigs.push(sig);
    }
    if p.ts.peek() == &Tok::Eof {
        return Err(Diagnostic::error("empty program", p.ts.span()));
    }
    let raw = p.expr(false)?;
    if p.ts.peek() != &Tok::Eof {
        return Err(p.ts.unexpected("end of input"));
    }
    let mut d = Desugar { taken: p.ts.identifiers(), counter: 0 };
    let body = d.expr(&raw, Mode::Compile)?;
    Ok(SourceProgram { sigs, body })
}

/// Parses a lone type written at `stage`, as used by command-line tools and tests.
pub fn parse_type(text: &str, stage: Stage) -> Result<SourceType, Diagnostic> {
    let mut ts = TokenStream::new(text)?;
    let span = ts.span();
    let t = ts.ty()?;
    if ts.peek() != &Tok::Eof {
        return Err(ts.unexpected("end of type"));
    }
    level_type(&t, stage, span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(text: &str) -> Expr {
        parse_program(text).unwrap().body
    }

    #[test]
    fn splice_identity_shape() {
        let e = body("$(do x <- <<return 0>> in (fun z -> return z) x)");
        let ExprKind::Splice(inner) = &e.kind else { panic!("{e:?}") };
        let ExprKind::Do { binder, bound, body } = &inner.kind else { panic!() };
        assert_eq!(binder.name, "x");
        assert!(matches!(&bound.kind, ExprKind::Quote(q) if matches!(q.kind, ExprKind::Return(Value::Nat(0)))));
        assert!(matches!(&body.kind, ExprKind::App(Value::Lam { .. }, Value::Var(..))));
    }

    #[test]
    fn empty_program() {
        let d = parse_program("  (* nothing *) ").unwrap_err();
        assert_eq!(d[0].message, "empty program");
    }

    #[test]
    fn top_level_quote_is_rejected() {
        let d = parse_program("<<return 1>>").unwrap_err();
        assert!(d[0].message.contains("quote not under splice in compile mode"));
        assert_eq!((d[0].line, d[0].column), (1, 1));
    }

    #[test]
    fn nested_splice_is_rejected() {
        assert!(parse_program("$($(return 0))").is_err());
    }

    #[test]
    fn operands_are_let_bound_left_to_right() {
        let e = body("effect^ op : Code(Nat) -> Code(Nat)\n$(op(<<1>>))");
        let ExprKind::Splice(inner) = &e.kind else { panic!() };
        let ExprKind::Do { binder, bound, body } = &inner.kind else { panic!("{inner:?}") };
        assert_eq!(binder.name, "_s0");
        assert!(matches!(bound.kind, ExprKind::Quote(_)));
        assert!(matches!(&body.kind, ExprKind::Op { arg: Value::Var(x, _), .. } if x == "_s0"));
    }

    #[test]
    fn fresh_names_avoid_user_identifiers() {
        let e = body("effect op : Nat -> Nat\n do _s0 <- return 1 in op(op(_s0))");
        let ExprKind::Do { body, .. } = &e.kind else { panic!() };
        let ExprKind::Do { binder, .. } = &body.kind else { panic!() };
        assert_eq!(binder.name, "_s1");
    }

    #[test]
    fn sequencing_binds_underscore() {
        let e = body("return 1; return 2");
        assert!(matches!(&e.kind, ExprKind::Do { binder, .. } if binder.name == "_"));
    }

    #[test]
    fn clause_bodies_stop_at_semicolons() {
        let e = body(
            "effect op : Nat -> Nat\n handle op(1) with { return(x) -> do y <- return x in return y ; op(v, k) -> continue k v }",
        );
        let ExprKind::Handle { handler, .. } = &e.kind else { panic!() };
        assert_eq!(handler.ops.len(), 1);
    }

    #[test]
    fn annotations_follow_the_mode() {
        let e = body("$(do c : Code(Nat) <- <<fun (x : Nat -> Nat) -> return x>> in return c)");
        let ExprKind::Splice(inner) = &e.kind else { panic!() };
        let ExprKind::Do { binder, bound, .. } = &inner.kind else { panic!() };
        assert!(matches!(binder.ann, Some(SourceType::Compile(CompileType::Code(..)))));
        let ExprKind::Quote(q) = &bound.kind else { panic!() };
        let ExprKind::Return(Value::Lam { binder, .. }) = &q.kind else { panic!() };
        assert!(matches!(binder.ann, Some(SourceType::Run(RunType::Fun(..)))));
    }

    #[test]
    fn code_is_rejected_at_run_time() {
        assert!(parse_program("do x : Code(Nat) <- return 1 in return x").is_err());
    }

    #[test]
    fn undeclared_operation() {
        let d = parse_program("perform nope(1)").unwrap_err();
        assert!(d[0].message.contains("undeclared operation nope"));
    }

    #[test]
    fn arithmetic_precedence() {
        let e = body("1 + 2 * 3");
        let ExprKind::Do { bound, body, .. } = &e.kind else { panic!("{e:?}") };
        assert!(matches!(bound.kind, ExprKind::Arith(ArithOp::Mul, ..)));
        assert!(matches!(body.kind, ExprKind::Arith(ArithOp::Add, Value::Nat(1), _)));
    }

    #[test]
    fn row_arrows_in_types() {
        let t = parse_type("Nat -{a, b}-> Nat ={c}=> Nat", Stage::Run).unwrap();
        let SourceType::Run(RunType::Fun(_, row, rest)) = t else { panic!() };
        assert_eq!(row.len(), 2);
        assert!(matches!(*rest, RunType::Cont(..)));
    }
}
