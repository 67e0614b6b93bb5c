//! The checking engine. Classifier checking is a switch on the same engine:
//! with it off, every classifier is ignored.

use std::collections::BTreeMap;

use super::{InferredType, ModeEntry, TypeError, TypeErrorKind, TypedProgram, TypingContext};
use crate::classifier_typeck::{ClassId, ClassifierOrder, BOTTOM};
use crate::kernel_syntax::{
    Binder, ClassTag, CompileComp, CompileType, EffectRow, EffectSig, Expr, ExprKind, Handler, Name, RunComp, RunType, SourceProgram,
    SourceType, Span, Stage, Value,
};
use crate::surface::{print_compile_type, print_run_type, Mode};
use crate::unify::{RowError, RowSolver, RowVar};

#[derive(Clone, Debug)]
enum Ty {
    Nat,
    Fun(Box<Ty>, RowVar, Box<Ty>),
    Cont(Box<Ty>, RowVar, Box<Ty>),
    /// Only at compile time. The classifier is `None` outside classifier mode.
    Code(Box<Ty>, RowVar, Option<ClassId>),
    Meta(u32),
}

/// Where a row constraint came from, for diagnostics.
#[derive(Clone, Copy, Debug)]
pub(super) struct Origin {
    span: Span,
    stage: Stage,
}

#[derive(Clone, Debug)]
struct Entry {
    name: Name,
    ty: Ty,
    stage: Stage,
    class: ClassId,
}

#[derive(Clone)]
struct State {
    metas: Vec<Option<Ty>>,
    rows: RowSolver<Origin>,
    binders: Vec<(Ty, Stage, Option<ClassId>)>,
    order: ClassifierOrder,
    sig_class: BTreeMap<Name, ClassId>,
    compile_splices: usize,
    log: Vec<ModeEntry>,
}

pub(super) struct Engine<'p> {
    sigs: &'p [EffectSig],
    classify: bool,
    st: State,
}

type Res<T> = Result<T, TypeError>;

fn err<T>(kind: TypeErrorKind, message: impl Into<String>, span: Span) -> Res<T> {
    Err(TypeError { kind, message: message.into(), span, offending: vec![] })
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Compile => "compile",
        Mode::Quote => "quote",
        Mode::Splice => "splice",
    }
}

fn expr_label(e: &Expr) -> &'static str {
    match &e.kind {
        ExprKind::App(..) => "app",
        ExprKind::Return(_) => "return",
        ExprKind::Do { .. } => "do",
        ExprKind::Op { .. } => "op",
        ExprKind::Handle { .. } => "handle",
        ExprKind::Continue(..) => "continue",
        ExprKind::Quote(_) => "quote",
        ExprKind::Splice(_) => "splice",
        ExprKind::Arith(..) => "arith",
    }
}

impl<'p> Engine<'p> {
    pub(super) fn new(sigs: &'p [EffectSig], classify: bool, order: ClassifierOrder) -> Self {
        Engine {
            sigs,
            classify,
            st: State {
                metas: Vec::new(),
                rows: RowSolver::new(),
                binders: Vec::new(),
                order,
                sig_class: BTreeMap::new(),
                compile_splices: 0,
                log: Vec::new(),
            },
        }
    }

    fn meta(&mut self) -> Ty {
        self.st.metas.push(None);
        Ty::Meta(self.st.metas.len() as u32 - 1)
    }

    fn row(&mut self) -> RowVar {
        self.st.rows.fresh()
    }

    fn fixed(&mut self, r: &EffectRow) -> RowVar {
        self.st.rows.fixed(r.clone())
    }

    fn lift_run(&mut self, t: &RunType) -> Ty {
        match t {
            RunType::Nat => Ty::Nat,
            RunType::Fun(a, r, b) => {
                let (a, r, b) = (self.lift_run(a), self.fixed(r), self.lift_run(b));
                Ty::Fun(Box::new(a), r, Box::new(b))
            }
            RunType::Cont(a, r, b) => {
                let (a, r, b) = (self.lift_run(a), self.fixed(r), self.lift_run(b));
                Ty::Cont(Box::new(a), r, Box::new(b))
            }
        }
    }

    /// Converts a compile-time type. `untagged` is the classifier used for
    /// `Code` types written without one.
    fn lift_compile(&mut self, t: &CompileType, untagged: ClassId, span: Span) -> Res<Ty> {
        Ok(match t {
            CompileType::Nat => Ty::Nat,
            CompileType::Fun(a, r, b) | CompileType::Cont(a, r, b) => {
                let a = self.lift_compile(a, untagged, span)?;
                let r = self.fixed(r);
                let b = self.lift_compile(b, untagged, span)?;
                if matches!(t, CompileType::Fun(..)) {
                    Ty::Fun(Box::new(a), r, Box::new(b))
                } else {
                    Ty::Cont(Box::new(a), r, Box::new(b))
                }
            }
            CompileType::Code(inner, r, tag) => {
                let payload = self.lift_run(inner);
                let row = self.fixed(r);
                let class = if self.classify { Some(self.resolve_tag(tag.as_ref(), untagged, span)?) } else { None };
                Ty::Code(Box::new(payload), row, class)
            }
        })
    }

    fn resolve_tag(&self, tag: Option<&ClassTag>, untagged: ClassId, span: Span) -> Res<ClassId> {
        match tag {
            None => Ok(untagged),
            Some(ClassTag::Bottom) => Ok(BOTTOM),
            Some(ClassTag::Fresh(g)) if self.st.order.is_declared(*g) => Ok(*g),
            Some(ClassTag::Fresh(g)) => err(TypeErrorKind::Classifier, format!("undeclared classifier γ{g}"), span),
            Some(ClassTag::Named(g)) => match self.st.sig_class.get(g) {
                Some(c) => Ok(*c),
                None => err(
                    TypeErrorKind::Classifier,
                    format!("classifier {g} is not fixed by any enclosing handler"),
                    span,
                ),
            },
        }
    }

    fn source_ty(&mut self, t: &SourceType, untagged: ClassId, span: Span) -> Res<Ty> {
        match t {
            SourceType::Run(r) => Ok(self.lift_run(r)),
            SourceType::Compile(c) => self.lift_compile(c, untagged, span),
        }
    }

    fn shallow(&self, t: &Ty) -> Ty {
        let mut t = t.clone();
        while let Ty::Meta(m) = t {
            match &self.st.metas[m as usize] {
                Some(inner) => t = inner.clone(),
                None => return t,
            }
        }
        t
    }

    fn occurs(&self, m: u32, t: &Ty) -> bool {
        match self.shallow(t) {
            Ty::Meta(n) => n == m,
            Ty::Nat => false,
            Ty::Fun(a, _, b) | Ty::Cont(a, _, b) => self.occurs(m, &a) || self.occurs(m, &b),
            Ty::Code(a, _, _) => self.occurs(m, &a),
        }
    }

    fn describe(&self, t: &Ty) -> String {
        match self.shallow(t) {
            Ty::Nat => "Nat".into(),
            Ty::Fun(a, r, b) => format!("({} -{}-> {})", self.describe(&a), self.st.rows.current(r), self.describe(&b)),
            Ty::Cont(a, r, b) => format!("({} ={}=> {})", self.describe(&a), self.st.rows.current(r), self.describe(&b)),
            Ty::Code(a, r, c) => match c {
                Some(c) => format!("Code({} ! {})@γ{c}", self.describe(&a), self.st.rows.current(r)),
                None => format!("Code({} ! {})", self.describe(&a), self.st.rows.current(r)),
            },
            Ty::Meta(_) => "_".into(),
        }
    }

    fn row_error(&self, e: RowError<Origin>, span: Span) -> TypeError {
        let sym = |s: Stage| if s == Stage::Run { "ξ" } else { "Δ" };
        match e {
            RowError::NotInRow { op, row, origin } => TypeError {
                kind: TypeErrorKind::Effect,
                message: format!("{op} ∉ {} = {row}", sym(origin.stage)),
                span: origin.span,
                offending: vec![],
            },
            RowError::Escapes { op, row, origin } => TypeError {
                kind: TypeErrorKind::Effect,
                message: format!("unhandled operation {op}: {op} ∉ {} = {row}", sym(origin.stage)),
                span: origin.span,
                offending: vec![],
            },
            RowError::Mismatch { left, right } => TypeError {
                kind: TypeErrorKind::Effect,
                message: format!("effect rows differ: {left} vs {right} (minimal row: {})", left.union(&right)),
                span,
                offending: vec![],
            },
        }
    }

    fn unify_rows(&mut self, a: RowVar, b: RowVar, span: Span) -> Res<()> {
        self.st.rows.unify(a, b).map_err(|e| self.row_error(e, span))
    }

    fn require(&mut self, op: &str, r: RowVar, stage: Stage, span: Span) -> Res<()> {
        self.st.rows.require(op, r, Origin { span, stage }).map_err(|e| self.row_error(e, span))
    }

    fn unify(&mut self, a: &Ty, b: &Ty, span: Span) -> Res<()> {
        let (a, b) = (self.shallow(a), self.shallow(b));
        match (&a, &b) {
            (Ty::Meta(m), Ty::Meta(n)) if m == n => Ok(()),
            (Ty::Meta(m), other) | (other, Ty::Meta(m)) => {
                if self.occurs(*m, other) {
                    return err(TypeErrorKind::Mismatch, "infinite type", span);
                }
                self.st.metas[*m as usize] = Some(other.clone());
                Ok(())
            }
            (Ty::Nat, Ty::Nat) => Ok(()),
            (Ty::Fun(a1, r1, b1), Ty::Fun(a2, r2, b2)) | (Ty::Cont(a1, r1, b1), Ty::Cont(a2, r2, b2)) => {
                self.unify(a1, a2, span)?;
                self.unify_rows(*r1, *r2, span)?;
                self.unify(b1, b2, span)
            }
            (Ty::Code(x, r1, c1), Ty::Code(y, r2, c2)) => {
                self.unify(x, y, span)?;
                self.unify_rows(*r1, *r2, span)?;
                if c1 != c2 {
                    let (da, db) = (self.describe(&a), self.describe(&b));
                    return err(TypeErrorKind::Classifier, format!("classifiers differ: {da} vs {db}"), span);
                }
                Ok(())
            }
            _ => {
                let (da, db) = (self.describe(&a), self.describe(&b));
                err(TypeErrorKind::Mismatch, format!("type mismatch: {da} vs {db}"), span)
            }
        }
    }

    /// `actual ≤ expected`: equality, except that a `Code` type may move to
    /// a larger classifier.
    fn subsume(&mut self, actual: &Ty, expected: &Ty, span: Span) -> Res<()> {
        if self.classify {
            if let (Ty::Code(x, r1, Some(c1)), Ty::Code(y, r2, Some(c2))) = (self.shallow(actual), self.shallow(expected))
            {
                self.unify(&x, &y, span)?;
                self.unify_rows(r1, r2, span)?;
                if !self.st.order.entails(c1, c2) {
                    return err(
                        TypeErrorKind::Classifier,
                        format!("code at classifier γ{c1} is used where γ{c2} is expected, but γ{c1} ⋢ γ{c2}"),
                        span,
                    );
                }
                return Ok(());
            }
        }
        self.unify(actual, expected, span)
    }

    fn lookup(&self, ctx: &[Entry], x: &str, span: Span) -> Res<Entry> {
        match ctx.iter().rev().find(|e| e.name == x) {
            Some(e) => Ok(e.clone()),
            None => err(TypeErrorKind::Unbound, format!("unbound variable {x}"), span),
        }
    }

    fn child_class(&mut self, g: ClassId) -> Option<ClassId> {
        if self.classify {
            Some(self.st.order.fresh_above(g))
        } else {
            None
        }
    }

    /// Binds a source binder, checking its annotation against `ty` when present.
    fn bind(&mut self, ctx: &mut Vec<Entry>, b: &Binder, ty: Ty, stage: Stage, class: Option<ClassId>, ambient: ClassId) -> Res<()> {
        if let Some(ann) = &b.ann {
            let want = self.source_ty(ann, ambient, b.span)?;
            self.unify(&want, &ty, b.span)?;
        }
        self.st.binders.push((ty.clone(), stage, class));
        ctx.push(Entry { name: b.name.clone(), ty, stage, class: class.unwrap_or(BOTTOM) });
        Ok(())
    }

    fn annotation(&mut self, b: &Binder, mode: Mode, ambient: ClassId) -> Res<Ty> {
        match &b.ann {
            Some(t) => {
                let want_run = mode != Mode::Splice;
                if want_run != matches!(t, SourceType::Run(_)) {
                    return err(TypeErrorKind::Mode, format!("annotation on {} has the wrong level", b.name), b.span);
                }
                self.source_ty(t, ambient, b.span)
            }
            None if mode == Mode::Splice => Ok(self.meta()),
            None => err(
                TypeErrorKind::Annotation,
                format!("binder {} in {} mode needs a type annotation", b.name, mode_name(mode)),
                b.span,
            ),
        }
    }

    fn sig(&self, stage: Stage, op: &str, span: Span) -> Res<&'p EffectSig> {
        match self.sigs.iter().find(|s| s.stage == stage && s.name == op) {
            Some(s) => Ok(s),
            None => {
                let level = if stage == Stage::Run { "run-time" } else { "compile-time" };
                err(TypeErrorKind::Unbound, format!("no {level} operation {op} is declared"), span)
            }
        }
    }

    fn log(&mut self, e: &Expr, mode: Mode, parent: &'static str) {
        self.st.log.push(ModeEntry { node: expr_label(e), parent, mode, line: e.span.line, column: e.span.column });
    }

    // Compile and quote mode.

    fn cq_value(&mut self, ctx: &mut Vec<Entry>, v: &Value, g: ClassId, mode: Mode, span: Span) -> Res<(Ty, RowVar)> {
        match v {
            Value::Var(x, vspan) => {
                let e = self.lookup(ctx, x, *vspan)?;
                if e.stage != Stage::Run {
                    return err(
                        TypeErrorKind::Mode,
                        format!("compile-time variable {x} used in {} mode", mode_name(mode)),
                        *vspan,
                    )
                    .map_err(|e| e.with_offending(x));
                }
                if self.classify && !self.st.order.entails(e.class, g) {
                    return err(
                        TypeErrorKind::Classifier,
                        format!("variable {x} escapes its scope: bound at γ{} but used at γ{g}", e.class),
                        *vspan,
                    )
                    .map_err(|e| e.with_offending(x));
                }
                let r = self.row();
                Ok((e.ty, r))
            }
            Value::Nat(_) => {
                let r = self.row();
                Ok((Ty::Nat, r))
            }
            Value::Lam { binder, body } => {
                let arg = self.annotation(binder, mode, g)?;
                let inner = self.child_class(g);
                let depth = ctx.len();
                self.bind(ctx, binder, arg.clone(), Stage::Run, inner, g)?;
                let r = self.cq_expr(ctx, body, inner.unwrap_or(g), mode, "lambda");
                ctx.truncate(depth);
                let (res, delta, xi) = r?;
                let _ = span;
                Ok((Ty::Fun(Box::new(arg), xi, Box::new(res)), delta))
            }
        }
    }

    fn cq_expr(
        &mut self,
        ctx: &mut Vec<Entry>,
        e: &Expr,
        g: ClassId,
        mode: Mode,
        parent: &'static str,
    ) -> Res<(Ty, RowVar, RowVar)> {
        self.log(e, mode, parent);
        let span = e.span;
        match &e.kind {
            ExprKind::Return(v) => {
                let (t, delta) = self.cq_value(ctx, v, g, mode, span)?;
                let xi = self.row();
                Ok((t, delta, xi))
            }
            ExprKind::App(f, x) | ExprKind::Continue(f, x) => {
                let (tf, d1) = self.cq_value(ctx, f, g, mode, span)?;
                let (tx, d2) = self.cq_value(ctx, x, g, mode, span)?;
                self.unify_rows(d1, d2, span)?;
                let (res, xi) = (self.meta(), self.row());
                let shape = if matches!(e.kind, ExprKind::App(..)) {
                    Ty::Fun(Box::new(tx), xi, Box::new(res.clone()))
                } else {
                    Ty::Cont(Box::new(tx), xi, Box::new(res.clone()))
                };
                self.unify(&tf, &shape, span)?;
                Ok((res, d1, xi))
            }
            ExprKind::Arith(_, a, b) => {
                let (ta, d1) = self.cq_value(ctx, a, g, mode, span)?;
                let (tb, d2) = self.cq_value(ctx, b, g, mode, span)?;
                self.unify(&ta, &Ty::Nat, span)?;
                self.unify(&tb, &Ty::Nat, span)?;
                self.unify_rows(d1, d2, span)?;
                let xi = self.row();
                Ok((Ty::Nat, d1, xi))
            }
            ExprKind::Do { binder, bound, body } => {
                let (s, d1, x1) = self.cq_expr(ctx, bound, g, mode, "do")?;
                let inner = self.child_class(g);
                let depth = ctx.len();
                self.bind(ctx, binder, s, Stage::Run, inner, g)?;
                let r = self.cq_expr(ctx, body, inner.unwrap_or(g), mode, "do");
                ctx.truncate(depth);
                let (t, d2, x2) = r?;
                self.unify_rows(d1, d2, span)?;
                self.unify_rows(x1, x2, span)?;
                Ok((t, d1, x1))
            }
            ExprKind::Op { op, arg } => {
                let sig = self.sig(Stage::Run, op, span)?;
                let (tv, delta) = self.cq_value(ctx, arg, g, mode, span)?;
                let want = self.source_ty(&sig.arg, g, span)?;
                self.unify(&tv, &want, span)?;
                let xi = self.row();
                self.require(op, xi, Stage::Run, span)?;
                let res = self.source_ty(&sig.result, g, span)?;
                Ok((res, delta, xi))
            }
            ExprKind::Handle { body, handler } => {
                let (s, d1, x1) = self.cq_expr(ctx, body, g, mode, "handle")?;
                let (t, d2, x2) = self.cq_handler(ctx, handler, s, g, mode)?;
                self.unify_rows(d1, d2, span)?;
                self.st.rows.subset(x1, x2, handler.dom(), Origin { span, stage: Stage::Run });
                Ok((t, d1, x2))
            }
            ExprKind::Quote(_) => err(TypeErrorKind::Mode, format!("quote in {} mode", mode_name(mode)), span),
            ExprKind::Splice(inner) => {
                if mode == Mode::Compile {
                    self.st.compile_splices += 1;
                    if self.classify && self.st.compile_splices > 1 {
                        return err(
                            TypeErrorKind::Classifier,
                            "classifier checking supports a single top-level splice per program",
                            span,
                        );
                    }
                }
                let (tc, delta) = self.s_expr(ctx, inner, g, "splice")?;
                let (payload, xi) = (self.meta(), self.row());
                match self.shallow(&tc) {
                    Ty::Code(_, _, Some(c)) if self.classify => {
                        if !self.st.order.entails(c, g) {
                            return err(
                                TypeErrorKind::Classifier,
                                format!("spliced code at γ{c} escapes into scope γ{g}"),
                                span,
                            );
                        }
                        self.unify(&tc, &Ty::Code(Box::new(payload.clone()), xi, Some(c)), span)?;
                    }
                    _ => {
                        let class = if self.classify { Some(g) } else { None };
                        self.unify(&tc, &Ty::Code(Box::new(payload.clone()), xi, class), span)?;
                    }
                }
                Ok((payload, delta, xi))
            }
        }
    }

    fn cq_handler(
        &mut self,
        ctx: &mut Vec<Entry>,
        h: &Handler,
        input: Ty,
        g: ClassId,
        mode: Mode,
    ) -> Res<(Ty, RowVar, RowVar)> {
        let (out, delta, xi) = (self.meta(), self.row(), self.row());
        let depth = ctx.len();
        let inner = self.child_class(g);
        self.bind(ctx, &h.ret.binder, input, Stage::Run, inner, g)?;
        let r = self.cq_expr(ctx, &h.ret.body, inner.unwrap_or(g), mode, "handler");
        ctx.truncate(depth);
        let (t, d, x) = r?;
        let span = h.ret.body.span;
        self.unify(&t, &out, span)?;
        self.unify_rows(d, delta, span)?;
        self.unify_rows(x, xi, span)?;
        for c in &h.ops {
            let sig = self.sig(Stage::Run, &c.op, c.span)?;
            let a = self.source_ty(&sig.arg, g, c.span)?;
            let b = self.source_ty(&sig.result, g, c.span)?;
            let inner = self.child_class(g);
            self.bind(ctx, &c.arg, a, Stage::Run, inner, g)?;
            let k = Ty::Cont(Box::new(b), xi, Box::new(out.clone()));
            self.bind(ctx, &c.cont, k, Stage::Run, inner, g)?;
            let r = self.cq_expr(ctx, &c.body, inner.unwrap_or(g), mode, "handler");
            ctx.truncate(depth);
            let (t, d, x) = r?;
            self.unify(&t, &out, c.body.span)?;
            self.unify_rows(d, delta, c.body.span)?;
            self.unify_rows(x, xi, c.body.span)?;
        }
        Ok((out, delta, xi))
    }

    // Splice mode.

    fn s_value(&mut self, ctx: &mut Vec<Entry>, v: &Value, g: ClassId) -> Res<Ty> {
        match v {
            Value::Var(x, span) => {
                let e = self.lookup(ctx, x, *span)?;
                if e.stage != Stage::Compile {
                    return err(TypeErrorKind::Mode, format!("run-time variable {x} used in splice mode"), *span)
                        .map_err(|e| e.with_offending(x));
                }
                Ok(e.ty)
            }
            Value::Nat(_) => Ok(Ty::Nat),
            Value::Lam { binder, body } => {
                let arg = self.annotation(binder, Mode::Splice, g)?;
                let depth = ctx.len();
                self.bind(ctx, binder, arg.clone(), Stage::Compile, None, g)?;
                let r = self.s_expr(ctx, body, g, "lambda");
                ctx.truncate(depth);
                let (res, delta) = r?;
                Ok(Ty::Fun(Box::new(arg), delta, Box::new(res)))
            }
        }
    }

    fn s_expr(&mut self, ctx: &mut Vec<Entry>, e: &Expr, g: ClassId, parent: &'static str) -> Res<(Ty, RowVar)> {
        self.log(e, Mode::Splice, parent);
        let span = e.span;
        match &e.kind {
            ExprKind::Return(v) => {
                let t = self.s_value(ctx, v, g)?;
                Ok((t, self.row()))
            }
            ExprKind::App(f, x) | ExprKind::Continue(f, x) => {
                let tf = self.s_value(ctx, f, g)?;
                let tx = self.s_value(ctx, x, g)?;
                let (res, delta) = (self.meta(), self.row());
                let param = match self.shallow(&tf) {
                    Ty::Fun(a, _, _) if matches!(e.kind, ExprKind::App(..)) => *a,
                    Ty::Cont(a, _, _) if matches!(e.kind, ExprKind::Continue(..)) => *a,
                    _ => self.meta(),
                };
                self.subsume(&tx, &param, span)?;
                let shape = if matches!(e.kind, ExprKind::App(..)) {
                    Ty::Fun(Box::new(param), delta, Box::new(res.clone()))
                } else {
                    Ty::Cont(Box::new(param), delta, Box::new(res.clone()))
                };
                self.unify(&tf, &shape, span)?;
                Ok((res, delta))
            }
            ExprKind::Arith(_, a, b) => {
                let ta = self.s_value(ctx, a, g)?;
                let tb = self.s_value(ctx, b, g)?;
                self.unify(&ta, &Ty::Nat, span)?;
                self.unify(&tb, &Ty::Nat, span)?;
                Ok((Ty::Nat, self.row()))
            }
            ExprKind::Do { binder, bound, body } => {
                let (s, d1) = self.s_expr(ctx, bound, g, "do")?;
                let depth = ctx.len();
                self.bind(ctx, binder, s, Stage::Compile, None, g)?;
                let r = self.s_expr(ctx, body, g, "do");
                ctx.truncate(depth);
                let (t, d2) = r?;
                self.unify_rows(d1, d2, span)?;
                Ok((t, d1))
            }
            ExprKind::Op { op, arg } => {
                let sig = self.sig(Stage::Compile, op, span)?;
                let class = self.op_class(sig, span)?;
                let tv = self.s_value(ctx, arg, g)?;
                let want = self.source_ty(&sig.arg, class, span)?;
                self.subsume(&tv, &want, span)?;
                let delta = self.row();
                self.require(op, delta, Stage::Compile, span)?;
                let res = self.source_ty(&sig.result, class, span)?;
                Ok((res, delta))
            }
            ExprKind::Handle { body, handler } => self.s_handle(ctx, body, handler, g, span),
            ExprKind::Quote(inner) => self.s_quote(ctx, inner, g),
            ExprKind::Splice(_) => err(TypeErrorKind::Mode, "splice in splice mode", span),
        }
    }

    /// The classifier a compile-time operation's signature is instantiated at.
    fn op_class(&self, sig: &EffectSig, span: Span) -> Res<ClassId> {
        if !self.classify {
            return Ok(BOTTOM);
        }
        match sig_tag(sig) {
            Some(ClassTag::Named(name)) => match self.st.sig_class.get(name) {
                Some(c) => Ok(*c),
                None => err(
                    TypeErrorKind::Classifier,
                    format!("operation {} is performed outside a handler fixing classifier {name}", sig.name),
                    span,
                ),
            },
            Some(ClassTag::Fresh(g)) => Ok(*g),
            _ => Ok(BOTTOM),
        }
    }

    fn s_quote(&mut self, ctx: &mut Vec<Entry>, inner: &Expr, g: ClassId) -> Res<(Ty, RowVar)> {
        if !self.classify {
            let (t, delta, xi) = self.cq_expr(ctx, inner, g, Mode::Quote, "quote")?;
            return Ok((Ty::Code(Box::new(t), xi, None), delta));
        }
        let candidates = self.st.order.chain(g);
        let mut last = None;
        for c in candidates {
            let saved = self.st.clone();
            let depth = ctx.len();
            match self.cq_expr(ctx, inner, c, Mode::Quote, "quote") {
                Ok((t, delta, xi)) => return Ok((Ty::Code(Box::new(t), xi, Some(c)), delta)),
                Err(e) => {
                    ctx.truncate(depth);
                    self.st = saved;
                    let retry = e.kind == TypeErrorKind::Classifier;
                    last = Some(e);
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(last.expect("the candidate chain is never empty"))
    }

    fn s_handle(&mut self, ctx: &mut Vec<Entry>, body: &Expr, h: &Handler, g: ClassId, span: Span) -> Res<(Ty, RowVar)> {
        let class = if self.classify { Some(self.handler_class(h, g, span)?) } else { None };
        let (s, d1) = self.s_expr(ctx, body, g, "handle")?;
        let (input, out) = match class {
            Some(c) => {
                let (p, r) = (self.meta(), self.row());
                let input = Ty::Code(Box::new(p), r, Some(c));
                if !matches!(self.shallow(&s), Ty::Code(..) | Ty::Meta(_)) {
                    return err(
                        TypeErrorKind::Classifier,
                        "compile-time handlers under classifier checking must handle code",
                        span,
                    );
                }
                self.subsume(&s, &input, span)?;
                let (q, r2) = (self.meta(), self.row());
                (input, Ty::Code(Box::new(q), r2, Some(c)))
            }
            None => (s, self.meta()),
        };
        let c = class.unwrap_or(BOTTOM);
        let delta = self.row();
        let depth = ctx.len();
        self.bind(ctx, &h.ret.binder, input, Stage::Compile, None, g)?;
        let r = self.s_expr(ctx, &h.ret.body, g, "handler");
        ctx.truncate(depth);
        let (t, d) = r?;
        self.subsume(&t, &out, h.ret.body.span)?;
        self.unify_rows(d, delta, h.ret.body.span)?;
        for clause in &h.ops {
            let sig = self.sig(Stage::Compile, &clause.op, clause.span)?;
            let a = self.source_ty(&sig.arg, c, clause.span)?;
            let b = self.source_ty(&sig.result, c, clause.span)?;
            self.bind(ctx, &clause.arg, a, Stage::Compile, None, g)?;
            let k = Ty::Cont(Box::new(b), delta, Box::new(out.clone()));
            self.bind(ctx, &clause.cont, k, Stage::Compile, None, g)?;
            let r = self.s_expr(ctx, &clause.body, g, "handler");
            ctx.truncate(depth);
            let (t, d) = r?;
            self.subsume(&t, &out, clause.body.span)?;
            self.unify_rows(d, delta, clause.body.span)?;
        }
        self.st.rows.subset(d1, delta, h.dom(), Origin { span, stage: Stage::Compile });
        Ok((out, delta))
    }

    /// Picks the single classifier a compile-time handler works at and binds
    /// the signature classifiers of its operations to it.
    fn handler_class(&mut self, h: &Handler, ambient: ClassId, span: Span) -> Res<ClassId> {
        let mut chosen = None;
        for c in &h.ops {
            let sig = self.sig(Stage::Compile, &c.op, c.span)?;
            let fixed = match sig_tag(sig) {
                Some(ClassTag::Bottom) => Some(BOTTOM),
                Some(ClassTag::Fresh(g)) => Some(*g),
                Some(ClassTag::Named(n)) => self.st.sig_class.get(n).copied(),
                None => None,
            };
            if let Some(f) = fixed {
                if chosen.is_some_and(|c| c != f) {
                    return err(TypeErrorKind::Classifier, "handler clauses disagree on their classifier", span);
                }
                chosen = Some(f);
            }
        }
        let class = chosen.unwrap_or(ambient);
        for c in &h.ops {
            let sig = self.sig(Stage::Compile, &c.op, c.span)?;
            if let Some(ClassTag::Named(n)) = sig_tag(sig) {
                match self.st.sig_class.get(n) {
                    Some(bound) if *bound != class => {
                        return err(TypeErrorKind::Classifier, format!("classifier {n} is already fixed elsewhere"), span)
                    }
                    _ => {
                        self.st.sig_class.insert(n.clone(), class);
                    }
                }
            }
        }
        Ok(class)
    }

    // Results.

    fn zonk_run(&self, t: &Ty) -> RunType {
        match self.shallow(t) {
            Ty::Nat | Ty::Meta(_) | Ty::Code(..) => RunType::Nat,
            Ty::Fun(a, r, b) => RunType::Fun(Box::new(self.zonk_run(&a)), self.st.rows.current(r), Box::new(self.zonk_run(&b))),
            Ty::Cont(a, r, b) => {
                RunType::Cont(Box::new(self.zonk_run(&a)), self.st.rows.current(r), Box::new(self.zonk_run(&b)))
            }
        }
    }

    fn zonk_compile(&self, t: &Ty) -> CompileType {
        match self.shallow(t) {
            Ty::Nat | Ty::Meta(_) => CompileType::Nat,
            Ty::Fun(a, r, b) => {
                CompileType::Fun(Box::new(self.zonk_compile(&a)), self.st.rows.current(r), Box::new(self.zonk_compile(&b)))
            }
            Ty::Cont(a, r, b) => {
                CompileType::Cont(Box::new(self.zonk_compile(&a)), self.st.rows.current(r), Box::new(self.zonk_compile(&b)))
            }
            Ty::Code(a, r, c) => CompileType::Code(
                Box::new(self.zonk_run(&a)),
                self.st.rows.current(r),
                c.map(|c| if c == BOTTOM { ClassTag::Bottom } else { ClassTag::Fresh(c) }),
            ),
        }
    }

    fn check_signatures(&self) -> Res<()> {
        for s in self.sigs {
            if self.classify && s.stage == Stage::Compile {
                match &s.result {
                    SourceType::Compile(CompileType::Code(_, _, Some(_))) => {}
                    other => {
                        return err(
                            TypeErrorKind::Classifier,
                            format!(
                                "compile-time operation {} must return a classifier-tagged Code type, not {}",
                                s.name,
                                match other {
                                    SourceType::Compile(c) => print_compile_type(c),
                                    SourceType::Run(r) => print_run_type(r),
                                }
                            ),
                            s.span,
                        )
                    }
                }
            }
        }
        Ok(())
    }

    fn context(&mut self, ctx: &TypingContext) -> Res<Vec<Entry>> {
        let mut env = Vec::new();
        for (name, ty, class) in ctx {
            let stage = if matches!(ty, SourceType::Run(_)) { Stage::Run } else { Stage::Compile };
            let class = class.unwrap_or(BOTTOM);
            if self.classify && !self.st.order.is_declared(class) {
                return err(TypeErrorKind::Classifier, format!("undeclared classifier for {name}"), Span::default());
            }
            let t = self.source_ty(ty, class, Span::default())?;
            env.push(Entry { name: name.clone(), ty: t, stage, class });
        }
        Ok(env)
    }

    /// Infers the type of `e` in `mode` without the closed-program conditions.
    pub(super) fn infer(mut self, ctx: &TypingContext, e: &Expr, mode: Mode) -> Res<InferredType> {
        self.check_signatures()?;
        let mut env = self.context(ctx)?;
        let span = e.span;
        if mode == Mode::Splice {
            let (t, delta) = self.s_expr(&mut env, e, BOTTOM, "program")?;
            self.st.rows.solve().map_err(|err| self.row_error(err, span))?;
            return Ok(InferredType::Compile(CompileComp { ty: self.zonk_compile(&t), row: self.st.rows.current(delta) }));
        }
        let (t, delta, xi) = self.cq_expr(&mut env, e, BOTTOM, mode, "program")?;
        self.st.rows.solve().map_err(|err| self.row_error(err, span))?;
        Ok(InferredType::Run(RunComp {
            ty: self.zonk_run(&t),
            compile_row: self.st.rows.current(delta),
            run_row: self.st.rows.current(xi),
        }))
    }

    pub(super) fn check_program(mut self, program: &SourceProgram, ctx: &TypingContext) -> Res<TypedProgram> {
        self.check_signatures()?;
        let mut env = self.context(ctx)?;
        let span = program.body.span;
        let (t, delta, xi) = self.cq_expr(&mut env, &program.body, BOTTOM, Mode::Compile, "program")?;
        let empty = self.fixed(&EffectRow::empty());
        self.unify_rows(delta, empty, span)?;
        let empty = self.fixed(&EffectRow::empty());
        self.unify_rows(xi, empty, span)?;
        self.st.rows.solve().map_err(|e| self.row_error(e, span))?;
        let ty = self.zonk_run(&t);
        let mut records = self.st.binders.iter();
        let mut body = program.body.clone();
        fill_expr(&mut body, &mut |b: &mut Binder| {
            let (t, stage, class) = records.next().expect("one record per binder");
            b.ann = Some(match stage {
                Stage::Run => SourceType::Run(self.zonk_run(t)),
                Stage::Compile => SourceType::Compile(self.zonk_compile(t)),
            });
            b.classifier = *class;
        });
        assert!(records.next().is_none(), "binder records out of step with the program");
        Ok(TypedProgram {
            program: SourceProgram { sigs: program.sigs.clone(), body },
            ty,
            mode_log: self.st.log.clone(),
            order: if self.classify { Some(self.st.order.clone()) } else { None },
        })
    }
}

fn sig_tag(sig: &EffectSig) -> Option<&ClassTag> {
    match &sig.result {
        SourceType::Compile(CompileType::Code(_, _, t)) => t.as_ref(),
        _ => None,
    }
}

/// Visits binders in the order the engine records them.
fn fill_expr(e: &mut Expr, f: &mut impl FnMut(&mut Binder)) {
    match &mut e.kind {
        ExprKind::App(a, b) | ExprKind::Continue(a, b) | ExprKind::Arith(_, a, b) => {
            fill_value(a, f);
            fill_value(b, f);
        }
        ExprKind::Return(v) | ExprKind::Op { arg: v, .. } => fill_value(v, f),
        ExprKind::Do { binder, bound, body } => {
            fill_expr(bound, f);
            f(binder);
            fill_expr(body, f);
        }
        ExprKind::Handle { body, handler } => {
            fill_expr(body, f);
            f(&mut handler.ret.binder);
            fill_expr(&mut handler.ret.body, f);
            for c in &mut handler.ops {
                f(&mut c.arg);
                f(&mut c.cont);
                fill_expr(&mut c.body, f);
            }
        }
        ExprKind::Quote(inner) | ExprKind::Splice(inner) => fill_expr(inner, f),
    }
}

fn fill_value(v: &mut Value, f: &mut impl FnMut(&mut Binder)) {
    if let Value::Lam { binder, body } = v {
        f(binder);
        fill_expr(body, f);
    }
}
