//! Tag-and-children records for `--format=structured` output.

use serde_json::{json, Value as Json};

use super::print::{print_pretype, print_type};
use crate::kernel_syntax::{Ast, Binder, CoreHandler, Expr, ExprKind, Handler, Nf, Term, Value};

fn node(tag: &str, children: Vec<Json>) -> Json {
    json!({ "tag": tag, "children": children })
}

fn leaf(tag: &str, field: &str, value: Json) -> Json {
    json!({ "tag": tag, field: value, "children": [] })
}

fn binder(b: &Binder) -> Json {
    let mut j = json!({ "tag": "Binder", "name": b.name, "children": [] });
    if let Some(t) = &b.ann {
        j["type"] = json!(print_type(t));
    }
    if let Some(g) = b.classifier {
        j["classifier"] = json!(g);
    }
    j
}

fn source_value(v: &Value) -> Json {
    match v {
        Value::Var(x, _) => leaf("Var", "name", json!(x)),
        Value::Nat(n) => leaf("Nat", "value", json!(n)),
        Value::Lam { binder: b, body } => node("Lam", vec![binder(b), source_tree(body)]),
    }
}

fn source_handler(h: &Handler) -> Json {
    let mut children = vec![node("ReturnClause", vec![binder(&h.ret.binder), source_tree(&h.ret.body)])];
    for c in &h.ops {
        let mut j = node("OpClause", vec![binder(&c.arg), binder(&c.cont), source_tree(&c.body)]);
        j["op"] = json!(c.op);
        children.push(j);
    }
    node("Handler", children)
}

/// Structured form of a source expression.
pub fn source_tree(e: &Expr) -> Json {
    match &e.kind {
        ExprKind::App(f, x) => node("App", vec![source_value(f), source_value(x)]),
        ExprKind::Return(v) => node("Return", vec![source_value(v)]),
        ExprKind::Do { binder: b, bound, body } => node("Do", vec![binder(b), source_tree(bound), source_tree(body)]),
        ExprKind::Op { op, arg } => {
            let mut j = node("Op", vec![source_value(arg)]);
            j["op"] = json!(op);
            j
        }
        ExprKind::Handle { body, handler } => node("Handle", vec![source_tree(body), source_handler(handler)]),
        ExprKind::Continue(k, v) => node("Continue", vec![source_value(k), source_value(v)]),
        ExprKind::Quote(inner) => node("Quote", vec![source_tree(inner)]),
        ExprKind::Splice(inner) => node("Splice", vec![source_tree(inner)]),
        ExprKind::Arith(op, a, b) => {
            let mut j = node("Arith", vec![source_value(a), source_value(b)]);
            j["op"] = json!(op.symbol());
            j
        }
    }
}

/// Structured form of a core normal form.
pub fn nf_tree(n: &Nf) -> Json {
    match n {
        Nf::Var(x) => leaf("MetaVar", "name", json!(x)),
        Nf::Nat(m) => leaf("Literal", "value", json!(m)),
        Nf::Lam(x, t) => {
            let mut j = node("Lambda", vec![core_tree(t)]);
            j["param"] = json!(x);
            j
        }
        Nf::Kont(k) => node("Continuation", vec![core_tree(&k.body())]),
        Nf::Param(p) => json!({ "tag": "FormalParam", "id": p.id, "type": print_pretype(&p.ty), "children": [] }),
        Nf::Ast(a) => match &**a {
            Ast::Nat(m) => leaf("Nat", "value", json!(m)),
            other => node(&other.ctor_name(), other.children().into_iter().map(nf_tree).collect()),
        },
    }
}

fn core_handler(h: &CoreHandler) -> Json {
    let mut children = vec![json!({ "tag": "ReturnClause", "var": h.ret_var, "children": [core_tree(&h.ret_body)] })];
    for c in &h.ops {
        children.push(json!({
            "tag": "OpClause", "op": c.op, "arg": c.arg, "cont": c.cont, "children": [core_tree(&c.body)],
        }));
    }
    node("Handler", children)
}

/// Structured form of a core term.
pub fn core_tree(t: &Term) -> Json {
    match t {
        Term::App(f, x) => node("App", vec![nf_tree(f), nf_tree(x)]),
        Term::Return(n) => node("Return", vec![nf_tree(n)]),
        Term::Do(x, a, b) => json!({ "tag": "Do", "var": x, "children": [core_tree(a), core_tree(b)] }),
        Term::Op(op, n) => json!({ "tag": "Op", "op": op, "children": [nf_tree(n)] }),
        Term::Handle(body, h) => node("Handle", vec![core_tree(body), core_handler(h)]),
        Term::Continue(k, x) => node("Continue", vec![nf_tree(k), nf_tree(x)]),
        Term::Check(n) => node("check", vec![nf_tree(n)]),
        Term::CheckM(n) => node("check_M", vec![nf_tree(n)]),
        Term::Mkvar(p, _) => leaf("mkvar", "type", json!(print_pretype(p))),
        Term::Dlet(n, body) => node("dlet", vec![nf_tree(n), core_tree(body)]),
        Term::Tls(body) => node("tls", vec![core_tree(body)]),
        Term::Err => node("err", vec![]),
        Term::Arith(op, a, b) => json!({ "tag": "Arith", "op": op.symbol(), "children": [nf_tree(a), nf_tree(b)] }),
    }
}
