use std::fmt::Write;

use crate::kernel_syntax::{
    Ast, Binder, ClassTag, CompileType, CoreHandler, EffectRow, Expr, ExprKind, Handler, FormalParam, Nf, Pretype,
    RunType, SourceProgram, SourceType, Stage, Term, Value,
};

fn row_suffix(row: &EffectRow) -> String {
    if row.is_empty() {
        String::new()
    } else {
        row.to_string()
    }
}

fn arrow(row: &EffectRow, cont: bool) -> String {
    match (row.is_empty(), cont) {
        (true, false) => "->".into(),
        (true, true) => "=>".into(),
        (false, false) => format!("-{}->", row_suffix(row)),
        (false, true) => format!("={}=>", row_suffix(row)),
    }
}

pub fn print_run_type(t: &RunType) -> String {
    match t {
        RunType::Nat => "Nat".into(),
        RunType::Fun(a, r, b) | RunType::Cont(a, r, b) => {
            let left = match **a {
                RunType::Nat => print_run_type(a),
                _ => format!("({})", print_run_type(a)),
            };
            format!("{left} {} {}", arrow(r, matches!(t, RunType::Cont(..))), print_run_type(b))
        }
    }
}

pub fn print_compile_type(t: &CompileType) -> String {
    match t {
        CompileType::Nat => "Nat".into(),
        CompileType::Fun(a, r, b) | CompileType::Cont(a, r, b) => {
            let left = match **a {
                CompileType::Fun(..) | CompileType::Cont(..) => format!("({})", print_compile_type(a)),
                _ => print_compile_type(a),
            };
            format!("{left} {} {}", arrow(r, matches!(t, CompileType::Cont(..))), print_compile_type(b))
        }
        CompileType::Code(inner, row, tag) => {
            let mut s = format!("Code({}", print_run_type(inner));
            if !row.is_empty() {
                let _ = write!(s, " ! {row}");
            }
            s.push(')');
            match tag {
                Some(ClassTag::Bottom) => s.push_str("@bot"),
                Some(ClassTag::Named(g)) => {
                    let _ = write!(s, "@{g}");
                }
                Some(ClassTag::Fresh(n)) => {
                    let _ = write!(s, "@γ{n}");
                }
                None => {}
            }
            s
        }
    }
}

pub fn print_type(t: &SourceType) -> String {
    match t {
        SourceType::Run(t) => print_run_type(t),
        SourceType::Compile(t) => print_compile_type(t),
    }
}

struct SourcePrinter {
    out: String,
}

impl SourcePrinter {
    fn binder(&mut self, b: &Binder) {
        self.out.push_str(&b.name);
        if let Some(t) = &b.ann {
            let _ = write!(self.out, " : {}", print_type(t));
        }
    }

    fn value(&mut self, v: &Value, indent: usize) {
        match v {
            Value::Var(x, _) => self.out.push_str(x),
            Value::Nat(n) => {
                let _ = write!(self.out, "{n}");
            }
            Value::Lam { binder, body } => {
                self.out.push_str("(fun ");
                if binder.ann.is_some() {
                    self.out.push('(');
                    self.binder(binder);
                    self.out.push(')');
                } else {
                    self.binder(binder);
                }
                self.out.push_str(" -> ");
                self.expr(body, indent);
                self.out.push(')');
            }
        }
    }

    fn newline(&mut self, indent: usize) {
        self.out.push('\n');
        for _ in 0..indent {
            self.out.push_str("  ");
        }
    }

    fn expr(&mut self, e: &Expr, indent: usize) {
        match &e.kind {
            ExprKind::App(f, x) => {
                self.value(f, indent);
                self.out.push(' ');
                self.value(x, indent);
            }
            ExprKind::Return(v) => {
                self.out.push_str("return ");
                self.value(v, indent);
            }
            ExprKind::Do { binder, bound, body } => {
                self.out.push_str("do ");
                self.binder(binder);
                self.out.push_str(" <- ");
                self.expr(bound, indent + 1);
                self.out.push_str(" in");
                self.newline(indent);
                self.expr(body, indent);
            }
            ExprKind::Op { op, arg } => {
                let _ = write!(self.out, "perform {op}(");
                self.value(arg, indent);
                self.out.push(')');
            }
            ExprKind::Handle { body, handler } => {
                self.out.push_str("handle ");
                self.expr(body, indent + 1);
                self.out.push_str(" with {");
                self.handler(handler, indent + 1);
                self.newline(indent);
                self.out.push('}');
            }
            ExprKind::Continue(k, v) => {
                self.out.push_str("continue ");
                self.value(k, indent);
                self.out.push(' ');
                self.value(v, indent);
            }
            ExprKind::Quote(inner) => {
                self.out.push_str("<< ");
                self.expr(inner, indent + 1);
                self.out.push_str(" >>");
            }
            ExprKind::Splice(inner) => {
                self.out.push_str("$(");
                self.expr(inner, indent + 1);
                self.out.push(')');
            }
            ExprKind::Arith(op, a, b) => {
                self.value(a, indent);
                let _ = write!(self.out, " {} ", op.symbol());
                self.value(b, indent);
            }
        }
    }

    fn handler(&mut self, h: &Handler, indent: usize) {
        self.newline(indent);
        self.out.push_str("return(");
        self.binder(&h.ret.binder);
        self.out.push_str(") -> ");
        self.expr(&h.ret.body, indent + 1);
        for c in &h.ops {
            self.out.push(';');
            self.newline(indent);
            let _ = write!(self.out, "{}(", c.op);
            self.binder(&c.arg);
            self.out.push_str(", ");
            self.binder(&c.cont);
            self.out.push_str(") -> ");
            self.expr(&c.body, indent + 1);
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut p = SourcePrinter { out: String::new() };
    p.expr(e, 0);
    p.out
}

/// Prints a program in a form that parses back to an equal program.
pub fn print_source(p: &SourceProgram) -> String {
    let mut out = String::new();
    for s in &p.sigs {
        let caret = if s.stage == Stage::Compile { "^" } else { "" };
        let arg = match &s.arg {
            SourceType::Run(RunType::Nat) | SourceType::Compile(CompileType::Nat | CompileType::Code(..)) => {
                print_type(&s.arg)
            }
            other => format!("({})", print_type(other)),
        };
        let _ = writeln!(out, "effect{caret} {} : {arg} -> {}", s.name, print_type(&s.result));
    }
    out.push_str(&print_expr(&p.body));
    out.push('\n');
    out
}

pub fn print_pretype(p: &Pretype) -> String {
    match p {
        Pretype::Nat => "Nat".into(),
        Pretype::Fun(a, r, b) | Pretype::Cont(a, r, b) => {
            let left = match **a {
                Pretype::Nat => print_pretype(a),
                _ => format!("({})", print_pretype(a)),
            };
            format!("{left} {} {}", arrow(r, matches!(p, Pretype::Cont(..))), print_pretype(b))
        }
    }
}

/// Options for core printing.
#[derive(Clone, Copy, Debug, Default)]
pub struct CoreStyle {
    /// Show the pretype of every formal parameter.
    pub verbose: bool,
}

struct CorePrinter {
    style: CoreStyle,
    out: String,
}

impl CorePrinter {
    fn param(&mut self, p: &FormalParam) {
        let _ = write!(self.out, "α{}", p.id);
        if self.style.verbose {
            let _ = write!(self.out, ":{}", print_pretype(&p.ty));
        }
    }

    fn nf(&mut self, n: &Nf) {
        match n {
            Nf::Var(x) => self.out.push_str(x),
            Nf::Nat(m) => {
                let _ = write!(self.out, "{m}");
            }
            Nf::Lam(x, t) => {
                let _ = write!(self.out, "(λ{x}. ");
                self.term(t);
                self.out.push(')');
            }
            Nf::Kont(k) => {
                self.out.push_str("(κx. ");
                let body = crate::kernel_syntax::subst(&k.body(), &Nf::var("x"), crate::kernel_syntax::KONT_VAR);
                self.term(&body);
                self.out.push(')');
            }
            Nf::Param(p) => self.param(p),
            Nf::Ast(a) => self.ast(a),
        }
    }

    fn args(&mut self, name: &str, args: &[&Nf]) {
        self.out.push_str(name);
        self.out.push('(');
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.nf(a);
        }
        self.out.push(')');
    }

    fn ast(&mut self, a: &Ast) {
        match a {
            Ast::Nat(m) => {
                let _ = write!(self.out, "Nat({m})");
            }
            _ => {
                let name = a.ctor_name();
                self.args(&name, &a.children());
            }
        }
    }

    fn term(&mut self, t: &Term) {
        match t {
            Term::App(f, x) => {
                self.nf(f);
                self.out.push(' ');
                self.nf(x);
            }
            Term::Return(n) => {
                self.out.push_str("return ");
                self.nf(n);
            }
            Term::Do(x, a, b) => {
                let _ = write!(self.out, "do {x} <- ");
                let bracket = matches!(**a, Term::Do(..));
                if bracket {
                    self.out.push('(');
                }
                self.term(a);
                if bracket {
                    self.out.push(')');
                }
                self.out.push_str(" in ");
                self.term(b);
            }
            Term::Op(op, n) => {
                let _ = write!(self.out, "perform {op}(");
                self.nf(n);
                self.out.push(')');
            }
            Term::Handle(body, h) => {
                self.out.push_str("handle (");
                self.term(body);
                self.out.push_str(") with {");
                self.handler(h);
                self.out.push('}');
            }
            Term::Continue(k, x) => {
                self.out.push_str("continue ");
                self.nf(k);
                self.out.push(' ');
                self.nf(x);
            }
            Term::Check(n) => self.args("check", &[n]),
            Term::CheckM(n) => self.args("check_M", &[n]),
            Term::Mkvar(p, _) => {
                let _ = write!(self.out, "mkvar({})", print_pretype(p));
            }
            Term::Dlet(n, body) => {
                self.out.push_str("dlet(");
                self.nf(n);
                self.out.push_str(", ");
                self.term(body);
                self.out.push(')');
            }
            Term::Tls(body) => {
                self.out.push_str("tls(");
                self.term(body);
                self.out.push(')');
            }
            Term::Err => self.out.push_str("err"),
            Term::Arith(op, a, b) => {
                self.nf(a);
                let _ = write!(self.out, " {} ", op.symbol());
                self.nf(b);
            }
        }
    }

    fn handler(&mut self, h: &CoreHandler) {
        let _ = write!(self.out, " return({}) -> ", h.ret_var);
        self.term(&h.ret_body);
        for c in &h.ops {
            let _ = write!(self.out, " ; {}({}, {}) -> ", c.op, c.arg, c.cont);
            self.term(&c.body);
        }
        self.out.push(' ');
    }
}

pub fn print_core_with(t: &Term, style: CoreStyle) -> String {
    let mut p = CorePrinter { style, out: String::new() };
    p.term(t);
    p.out
}

pub fn print_core(t: &Term) -> String {
    print_core_with(t, CoreStyle::default())
}

pub fn print_nf_with(n: &Nf, style: CoreStyle) -> String {
    let mut p = CorePrinter { style, out: String::new() };
    p.nf(n);
    p.out
}

pub fn print_nf(n: &Nf) -> String {
    print_nf_with(n, CoreStyle::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::{ArithOp, FormalParam};

    fn alpha(id: u32) -> Nf {
        Nf::Param(FormalParam { id, ty: Pretype::Nat, classifier: None })
    }

    #[test]
    fn core_constructors() {
        assert_eq!(print_nf(&Nf::ast(Ast::Ret(Nf::ast(Ast::Nat(0))))), "Ret(Nat(0))");
        let lam = Nf::ast(Ast::Lam(alpha(0), Nf::ast(Ast::Var(alpha(0)))));
        assert_eq!(print_nf(&lam), "Lam(α0, Var(α0))");
        assert_eq!(print_core(&Term::CheckM(lam.clone())), "check_M(Lam(α0, Var(α0)))");
        assert_eq!(print_nf_with(&alpha(2), CoreStyle { verbose: true }), "α2:Nat");
    }

    #[test]
    fn arith_ast_names() {
        let n = Nf::ast(Ast::Arith(ArithOp::Add, Nf::ast(Ast::Nat(1)), Nf::ast(Ast::Nat(2))));
        assert_eq!(print_nf(&n), "Plus(Nat(1), Nat(2))");
    }

    #[test]
    fn types() {
        let t = RunType::Fun(Box::new(RunType::Nat), EffectRow::single("op"), Box::new(RunType::Nat));
        assert_eq!(print_run_type(&t), "Nat -{op}-> Nat");
        let c = CompileType::Code(Box::new(RunType::Nat), EffectRow::empty(), Some(ClassTag::Named("g".into())));
        assert_eq!(print_compile_type(&c), "Code(Nat)@g");
    }
}
