//! Reader for hand-written core programs (`.core` files).
//!
//! The accepted syntax is the one `print_core` produces, minus
//! continuation values and formal parameters, which only the machine creates.

use super::lexer::Tok;
use super::parser::TokenStream;
use super::Diagnostic;
use crate::kernel_syntax::{
    ArithOp, Ast, CoreHandler, CoreOpClause, CoreSigs, CoreType, EffectRow, Nf, Pretype, Term,
};

/// A core program: signatures and a closed term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreProgram {
    pub sigs: CoreSigs,
    pub body: Term,
}

type PResult<T> = Result<T, Diagnostic>;

struct CoreParser {
    ts: TokenStream,
}

impl CoreParser {
    fn pretype(&mut self) -> PResult<Pretype> {
        let left = match self.ts.peek().clone() {
            Tok::Ident(x) if x == "Nat" => {
                self.ts.bump();
                Pretype::Nat
            }
            Tok::LParen => {
                self.ts.bump();
                let t = self.pretype()?;
                self.ts.expect(&Tok::RParen)?;
                t
            }
            _ => return Err(self.ts.unexpected("a pretype")),
        };
        let (row, cont) = match self.arrow()? {
            Some(a) => a,
            None => return Ok(left),
        };
        let right = self.pretype()?;
        Ok(if cont {
            Pretype::Cont(Box::new(left), row, Box::new(right))
        } else {
            Pretype::Fun(Box::new(left), row, Box::new(right))
        })
    }

    fn arrow(&mut self) -> PResult<Option<(EffectRow, bool)>> {
        Ok(Some(match self.ts.peek() {
            Tok::Arrow => {
                self.ts.bump();
                (EffectRow::empty(), false)
            }
            Tok::FatArrow => {
                self.ts.bump();
                (EffectRow::empty(), true)
            }
            Tok::Minus if self.ts.peek_at(1) == &Tok::LBrace => {
                self.ts.bump();
                let r = self.ts.row()?;
                self.ts.expect(&Tok::Arrow)?;
                (r, false)
            }
            Tok::Eq if self.ts.peek_at(1) == &Tok::LBrace => {
                self.ts.bump();
                let r = self.ts.row()?;
                self.ts.expect(&Tok::FatArrow)?;
                (r, true)
            }
            _ => return Ok(None),
        }))
    }

    fn core_type(&mut self) -> PResult<CoreType> {
        let left = match self.ts.peek().clone() {
            Tok::Ident(x) if x == "Nat" => {
                self.ts.bump();
                CoreType::Nat
            }
            Tok::Ident(x) if x == "FParam" || x == "AST" => {
                self.ts.bump();
                self.ts.expect(&Tok::LParen)?;
                let p = self.pretype()?;
                let t = if x == "FParam" {
                    CoreType::FParam(p)
                } else if self.ts.eat(&Tok::Bang) {
                    CoreType::AstComp(p, self.ts.row()?)
                } else {
                    CoreType::AstVal(p)
                };
                self.ts.expect(&Tok::RParen)?;
                t
            }
            Tok::LParen => {
                self.ts.bump();
                let t = self.core_type()?;
                self.ts.expect(&Tok::RParen)?;
                t
            }
            _ => return Err(self.ts.unexpected("a core type")),
        };
        let (row, cont) = match self.arrow()? {
            Some(a) => a,
            None => return Ok(left),
        };
        let right = self.core_type()?;
        Ok(if cont { CoreType::cont(left, row, right) } else { CoreType::fun(left, row, right) })
    }

    fn decl(&mut self, sigs: &mut CoreSigs) -> PResult<()> {
        let span = self.ts.span();
        self.ts.expect(&Tok::Effect)?;
        let compile = self.ts.eat(&Tok::Caret);
        let name = self.ts.ident()?;
        self.ts.expect(&Tok::Colon)?;
        let dup = if compile {
            let t = self.core_type()?;
            let CoreType::Fun(a, r, b) = t else {
                return Err(Diagnostic::error(format!("signature of {name} must have the form A -> B"), span));
            };
            if !r.is_empty() {
                return Err(Diagnostic::error(format!("signature of {name} must have the form A -> B"), span));
            }
            sigs.compile.insert(name.clone(), (*a, *b)).is_some()
        } else {
            let t = self.pretype()?;
            let Pretype::Fun(a, r, b) = t else {
                return Err(Diagnostic::error(format!("signature of {name} must have the form A -> B"), span));
            };
            if !r.is_empty() {
                return Err(Diagnostic::error(format!("signature of {name} must have the form A -> B"), span));
            }
            sigs.run.insert(name.clone(), (*a, *b)).is_some()
        };
        if dup {
            return Err(Diagnostic::error(format!("operation {name} declared twice"), span));
        }
        Ok(())
    }

    fn nf(&mut self) -> PResult<Nf> {
        let span = self.ts.span();
        match self.ts.peek().clone() {
            Tok::Int(n) => {
                self.ts.bump();
                Ok(Nf::Nat(n))
            }
            Tok::LParen if self.ts.peek_at(1) == &Tok::Lambda => {
                self.ts.bump();
                self.ts.bump();
                let x = self.ts.ident()?;
                self.ts.expect(&Tok::Dot)?;
                let body = self.term()?;
                self.ts.expect(&Tok::RParen)?;
                Ok(Nf::Lam(x, Box::new(body)))
            }
            Tok::Ident(x) if x.starts_with('α') => {
                Err(Diagnostic::error("formal parameters cannot be written in core programs", span))
            }
            Tok::Ident(x) if self.ts.peek_at(1) == &Tok::LParen && ctor_arity(&x).is_some() => {
                self.ts.bump();
                self.ts.bump();
                if x == "Nat" {
                    let Tok::Int(m) = self.ts.bump() else {
                        return Err(Diagnostic::error("Nat expects a literal", span));
                    };
                    self.ts.expect(&Tok::RParen)?;
                    return Ok(Nf::ast(Ast::Nat(m)));
                }
                let mut args = Vec::new();
                loop {
                    args.push(self.nf()?);
                    if self.ts.eat(&Tok::RParen) {
                        break;
                    }
                    self.ts.expect(&Tok::Comma)?;
                }
                if Some(args.len()) != ctor_arity(&x) {
                    return Err(Diagnostic::error(format!("wrong number of arguments to {x}"), span));
                }
                Ok(Nf::ast(build_ast(&x, args)))
            }
            Tok::Ident(x) => {
                self.ts.bump();
                Ok(Nf::Var(x))
            }
            _ => Err(self.ts.unexpected("a normal form")),
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let span = self.ts.span();
        let t = match self.ts.peek().clone() {
            Tok::Do => {
                self.ts.bump();
                let x = self.ts.ident()?;
                self.ts.expect(&Tok::LeftArrow)?;
                let a = self.term()?;
                self.ts.expect(&Tok::In)?;
                let b = self.term()?;
                Term::Do(x, Box::new(a), Box::new(b))
            }
            Tok::Handle => {
                self.ts.bump();
                let body = self.term()?;
                self.ts.expect(&Tok::With)?;
                Term::Handle(Box::new(body), self.handler()?)
            }
            Tok::Return => {
                self.ts.bump();
                Term::Return(self.nf()?)
            }
            Tok::Perform => {
                self.ts.bump();
                let op = self.ts.ident()?;
                self.ts.expect(&Tok::LParen)?;
                let n = self.nf()?;
                self.ts.expect(&Tok::RParen)?;
                Term::Op(op, n)
            }
            Tok::Continue => {
                self.ts.bump();
                let k = self.nf()?;
                Term::Continue(k, self.nf()?)
            }
            Tok::LParen if self.ts.peek_at(1) != &Tok::Lambda => {
                self.ts.bump();
                let t = self.term()?;
                self.ts.expect(&Tok::RParen)?;
                t
            }
            Tok::Ident(x) if self.ts.peek_at(1) == &Tok::LParen && is_term_keyword(&x) => {
                self.ts.bump();
                self.ts.bump();
                let t = match x.as_str() {
                    "check" => Term::Check(self.nf()?),
                    "check_M" => Term::CheckM(self.nf()?),
                    "mkvar" => Term::Mkvar(self.pretype()?, None),
                    "tls" => Term::Tls(Box::new(self.term()?)),
                    _ => {
                        let n = self.nf()?;
                        self.ts.expect(&Tok::Comma)?;
                        Term::Dlet(n, Box::new(self.term()?))
                    }
                };
                self.ts.expect(&Tok::RParen)?;
                t
            }
            Tok::Ident(x) if x == "err" => {
                self.ts.bump();
                Term::Err
            }
            _ => {
                let head = self.nf()?;
                let op = match self.ts.peek() {
                    Tok::Plus => Some(ArithOp::Add),
                    Tok::Star => Some(ArithOp::Mul),
                    Tok::Minus => Some(ArithOp::Sub),
                    _ => None,
                };
                if let Some(op) = op {
                    self.ts.bump();
                    Term::Arith(op, head, self.nf()?)
                } else if matches!(self.ts.peek(), Tok::Ident(_) | Tok::Int(_) | Tok::LParen) {
                    Term::App(head, self.nf()?)
                } else {
                    return Err(Diagnostic::error("a normal form is not a term; write `return`", span));
                }
            }
        };
        Ok(t)
    }

    fn handler(&mut self) -> PResult<CoreHandler> {
        let span = self.ts.span();
        self.ts.expect(&Tok::LBrace)?;
        self.ts.expect(&Tok::Return)?;
        self.ts.expect(&Tok::LParen)?;
        let ret_var = self.ts.ident()?;
        self.ts.expect(&Tok::RParen)?;
        self.ts.expect(&Tok::Arrow)?;
        let ret_body = Box::new(self.term()?);
        let mut ops: Vec<CoreOpClause> = Vec::new();
        while self.ts.eat(&Tok::Semi) {
            let op = self.ts.ident()?;
            if ops.iter().any(|c| c.op == op) {
                return Err(Diagnostic::error(format!("duplicate clause for {op}"), span));
            }
            self.ts.expect(&Tok::LParen)?;
            let arg = self.ts.ident()?;
            self.ts.expect(&Tok::Comma)?;
            let cont = self.ts.ident()?;
            self.ts.expect(&Tok::RParen)?;
            self.ts.expect(&Tok::Arrow)?;
            let body = self.term()?;
            ops.push(CoreOpClause { op, arg, cont, body });
        }
        self.ts.expect(&Tok::RBrace)?;
        Ok(CoreHandler { ret_var, ret_body, ops })
    }
}

fn is_term_keyword(x: &str) -> bool {
    matches!(x, "check" | "check_M" | "mkvar" | "dlet" | "tls")
}

fn ctor_arity(x: &str) -> Option<usize> {
    Some(match x {
        "Nat" | "Var" | "Ret" => 1,
        "Lam" | "App" | "Continue" | "Hwith" | "Hret" | "Plus" | "Times" | "Minus" => 2,
        "Do" => 3,
        _ if x.starts_with("Op_") => 1,
        _ if x.starts_with("Hop_") => 4,
        _ => return None,
    })
}

fn build_ast(x: &str, a: Vec<Nf>) -> Ast {
    let mut it = a.into_iter();
    let mut next = || it.next().expect("arity checked");
    match x {
        "Var" => Ast::Var(next()),
        "Ret" => Ast::Ret(next()),
        "Lam" => Ast::Lam(next(), next()),
        "App" => Ast::App(next(), next()),
        "Continue" => Ast::Continue(next(), next()),
        "Hwith" => Ast::Hwith(next(), next()),
        "Hret" => Ast::Hret(next(), next()),
        "Plus" => Ast::Arith(ArithOp::Add, next(), next()),
        "Times" => Ast::Arith(ArithOp::Mul, next(), next()),
        "Minus" => Ast::Arith(ArithOp::Sub, next(), next()),
        "Do" => Ast::Do(next(), next(), next()),
        _ if x.starts_with("Op_") => Ast::Op(x[3..].to_string(), next()),
        _ => Ast::Hop(x[4..].to_string(), next(), next(), next(), next()),
    }
}

/// Parses a `.core` program.
pub fn parse_core_program(text: &str) -> Result<CoreProgram, Vec<Diagnostic>> {
    let inner = || -> PResult<CoreProgram> {
        let mut p = CoreParser { ts: TokenStream::new(text)? };
        if p.ts.peek() == &Tok::Eof {
            return Err(Diagnostic::error("empty program", p.ts.span()));
        }
        let mut sigs = CoreSigs::default();
        while p.ts.peek() == &Tok::Effect {
            p.decl(&mut sigs)?;
        }
        let body = p.term()?;
        if p.ts.peek() != &Tok::Eof {
            return Err(p.ts.unexpected("end of input"));
        }
        Ok(CoreProgram { sigs, body })
    };
    inner().map_err(|d| vec![d])
}

/// Parses a single core term with no declarations.
pub fn parse_core_term(text: &str) -> Result<Term, Diagnostic> {
    let mut p = CoreParser { ts: TokenStream::new(text)? };
    let t = p.term()?;
    if p.ts.peek() != &Tok::Eof {
        return Err(p.ts.unexpected("end of input"));
    }
    Ok(t)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::print_core;

    #[test]
    fn reads_printed_terms_back() {
        let src = "do x <- return Ret(Nat(0)) in (λz. return z) x";
        let t = parse_core_term(src).unwrap();
        assert_eq!(print_core(&t), src);
        assert_eq!(parse_core_term(&print_core(&t)).unwrap(), t);
    }

    #[test]
    fn handlers_and_ops() {
        let p = parse_core_program(
            "effect^ a : Nat -> Nat\n handle (perform a(1)) with { return(r) -> return r ; a(v, k) -> continue k v }",
        )
        .unwrap();
        assert!(p.sigs.compile.contains_key("a"));
        let Term::Handle(_, h) = &p.body else { panic!() };
        assert_eq!(h.ops.len(), 1);
    }

    #[test]
    fn staging_constructs() {
        let t = parse_core_term("do x <- mkvar(Nat) in dlet(x, check_M(Var(x)))").unwrap();
        assert!(matches!(t, Term::Do(_, _, ref b) if matches!(**b, Term::Dlet(..))));
    }

    #[test]
    fn rejects_formal_parameters() {
        assert!(parse_core_term("return α0").is_err());
    }
}
