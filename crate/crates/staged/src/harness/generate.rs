use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernel_syntax::{Expr, ExprKind, Handler, SourceProgram, Value};
use crate::source_typeck::typecheck_program;
use crate::surface::{parse_program, Mode};

/// The signatures every generated program declares.
pub const GENERATED_SIGS: &str = "\
effect tick : Nat -> Nat
effect emit : Nat -> Nat
effect^ yank : Code(Nat)@g -> Code(Nat)@g
effect^ fetch : Nat -> Code(Nat)@h
";

/// The program used when generation keeps failing.
pub const FALLBACK_PROGRAM: &str = "$(<<return 0>>)";

const MAX_ATTEMPTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum RunTy {
    Nat,
    Fun,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MetaTy {
    Nat,
    Code(RunTy),
}

#[derive(Clone, Debug)]
enum Var {
    Run(String, RunTy),
    Meta(String, MetaTy),
}

#[derive(Clone, Debug, Default)]
struct Scope {
    vars: Vec<Var>,
    /// Run-time operations handled by an enclosing handler at this level.
    run_ops: Vec<&'static str>,
    /// Compile-time operations handled by an enclosing splice-mode handler.
    meta_ops: Vec<&'static str>,
    /// Inside the body of a run-time handler, where rows are not empty.
    effectful: bool,
}

impl Scope {
    fn with(&self, v: Var) -> Scope {
        let mut s = self.clone();
        s.vars.push(v);
        s
    }

    fn run_vars(&self, ty: RunTy) -> Vec<&str> {
        self.vars
            .iter()
            .filter_map(|v| match v {
                Var::Run(x, t) if *t == ty => Some(x.as_str()),
                _ => None,
            })
            .collect()
    }

    fn meta_vars(&self, ty: MetaTy) -> Vec<&str> {
        self.vars
            .iter()
            .filter_map(|v| match v {
                Var::Meta(x, t) if *t == ty => Some(x.as_str()),
                _ => None,
            })
            .collect()
    }

    /// The scope seen inside a quote: run-time handlers do not reach in.
    fn quoted(&self) -> Scope {
        Scope { run_ops: Vec::new(), effectful: false, ..self.clone() }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    budget: usize,
    names: usize,
}

impl Gen {
    fn fresh(&mut self, base: &str) -> String {
        self.names += 1;
        format!("{base}{}", self.names)
    }

    /// Spends one unit of the size budget; false once it is exhausted.
    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    fn pick<'a>(&mut self, xs: &[&'a str]) -> Option<&'a str> {
        xs.choose(&mut self.rng).copied()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn literal(&mut self) -> String {
        self.rng.gen_range(0..10u32).to_string()
    }

    fn run_atom(&mut self, s: &Scope) -> String {
        match self.pick(&s.run_vars(RunTy::Nat)) {
            Some(x) if self.chance(0.7) => x.to_string(),
            _ => self.literal(),
        }
    }

    fn meta_atom(&mut self, s: &Scope) -> String {
        match self.pick(&s.meta_vars(MetaTy::Nat)) {
            Some(x) if self.chance(0.7) => x.to_string(),
            _ => self.literal(),
        }
    }

    fn arith(&mut self, a: String, b: String) -> String {
        let op = ["+", "*", "-"].choose(&mut self.rng).unwrap();
        format!("({a} {op} {b})")
    }

    /// A compile- or quote-mode expression producing run-time type `ty`.
    fn code(&mut self, s: &Scope, ty: RunTy) -> String {
        if ty == RunTy::Fun {
            let x = self.fresh("x");
            if !s.effectful && s.meta_ops.contains(&"yank") && self.chance(0.3) {
                return format!("return (fun ({x} : Nat) -> $(yank(<<{x}>>)))");
            }
            let body = if self.spend() { self.code(&s.with(Var::Run(x.clone(), RunTy::Nat)), RunTy::Nat) } else { format!("return {x}") };
            return format!("return (fun ({x} : Nat) -> {body})");
        }
        if !self.spend() {
            return format!("return {}", self.run_atom(s));
        }
        let choice = self.rng.gen_range(0..100);
        match choice {
            0..=9 => format!("return {}", self.run_atom(s)),
            10..=19 => {
                let (a, b) = (self.run_atom(s), self.run_atom(s));
                self.arith(a, b)
            }
            20..=34 => {
                let bound_ty = if self.chance(0.25) { RunTy::Fun } else { RunTy::Nat };
                let x = self.fresh(if bound_ty == RunTy::Fun { "f" } else { "x" });
                let bound = self.code(s, bound_ty);
                let body = self.code(&s.with(Var::Run(x.clone(), bound_ty)), RunTy::Nat);
                let ann = if bound_ty == RunTy::Nat && self.chance(0.5) { " : Nat" } else { "" };
                format!("do {x}{ann} <- ({bound}) in ({body})")
            }
            35..=44 => {
                let arg = self.run_atom(s);
                match self.pick(&s.run_vars(RunTy::Fun)) {
                    Some(f) if self.chance(0.6) => format!("{f} {arg}"),
                    _ => {
                        let x = self.fresh("x");
                        let body = self.code(&s.with(Var::Run(x.clone(), RunTy::Nat)), RunTy::Nat);
                        format!("(fun ({x} : Nat) -> {body}) {arg}")
                    }
                }
            }
            45..=69 if !s.effectful => format!("$({})", self.meta(s, MetaTy::Code(RunTy::Nat))),
            70..=81 => self.run_handler(s),
            82..=89 if !s.run_ops.is_empty() => {
                let op = *s.run_ops.choose(&mut self.rng).unwrap();
                let arg = self.run_atom(s);
                format!("{op}({arg})")
            }
            _ => {
                let (a, b) = (self.run_atom(s), self.run_atom(s));
                self.arith(a, b)
            }
        }
    }

    fn run_handler(&mut self, s: &Scope) -> String {
        let ops: Vec<&'static str> = if self.chance(0.3) { vec!["tick", "emit"] } else { vec![["tick", "emit"][self.rng.gen_range(0..2)]] };
        let mut inner = s.clone();
        inner.run_ops.extend(ops.iter().copied());
        inner.effectful = true;
        let body = self.code(&inner, RunTy::Nat);
        let u = self.fresh("u");
        let ret = self.code(&s.with(Var::Run(u.clone(), RunTy::Nat)), RunTy::Nat);
        let mut clauses = format!("return({u}) -> ({ret})");
        for op in ops {
            let (y, k) = (self.fresh("y"), self.fresh("k"));
            let clause_scope = s.with(Var::Run(y.clone(), RunTy::Nat));
            let clause = match self.rng.gen_range(0..4) {
                0 => format!("continue {k} {y}"),
                1 => {
                    let w = self.fresh("w");
                    format!("do {w} <- continue {k} {y} in ({w} + 1)")
                }
                2 => {
                    let w = self.fresh("w");
                    format!("do {w} <- continue {k} {y} in continue {k} {w}")
                }
                _ => self.code(&clause_scope, RunTy::Nat),
            };
            clauses.push_str(&format!(" ; {op}({y}, {k}) -> ({clause})"));
        }
        format!("handle ({body}) with {{ {clauses} }}")
    }

    /// A splice-mode expression of compile-time type `ty`.
    fn meta(&mut self, s: &Scope, ty: MetaTy) -> String {
        let MetaTy::Code(run) = ty else {
            if !self.spend() {
                return format!("return {}", self.meta_atom(s));
            }
            return match self.rng.gen_range(0..3) {
                0 => format!("return {}", self.meta_atom(s)),
                1 => {
                    let (a, b) = (self.meta_atom(s), self.meta_atom(s));
                    self.arith(a, b)
                }
                _ => {
                    let n = self.fresh("n");
                    let bound = self.meta(s, MetaTy::Nat);
                    let body = self.meta(&s.with(Var::Meta(n.clone(), MetaTy::Nat)), MetaTy::Nat);
                    format!("do {n} <- ({bound}) in ({body})")
                }
            };
        };
        let existing = s.meta_vars(ty);
        if !self.spend() {
            return match self.pick(&existing) {
                Some(c) => format!("return {c}"),
                None => format!("<<{}>>", self.code(&s.quoted(), run)),
            };
        }
        let choice = self.rng.gen_range(0..100);
        match choice {
            0..=29 => format!("<<{}>>", self.code(&s.quoted(), run)),
            30..=36 if !existing.is_empty() => format!("return {}", self.pick(&existing).unwrap()),
            37..=49 => {
                let (name, bound_ty) = if self.chance(0.5) {
                    (self.fresh("n"), MetaTy::Nat)
                } else {
                    (self.fresh("c"), MetaTy::Code(RunTy::Nat))
                };
                let bound = self.meta(s, bound_ty);
                let body = self.meta(&s.with(Var::Meta(name.clone(), bound_ty)), ty);
                format!("do {name} <- ({bound}) in ({body})")
            }
            50..=61 if run == RunTy::Nat && s.meta_ops.contains(&"yank") => {
                let code_var = self.pick(&s.meta_vars(MetaTy::Code(RunTy::Nat)));
                let run_var = self.pick(&s.run_vars(RunTy::Nat));
                let arg = match (code_var, run_var) {
                    (Some(c), _) if self.chance(0.3) => c.to_string(),
                    (_, Some(x)) if self.chance(0.5) => format!("<<{x}>>"),
                    _ => format!("<<{}>>", self.code(&s.quoted(), RunTy::Nat)),
                };
                format!("yank({arg})")
            }
            62..=67 if run == RunTy::Nat && s.meta_ops.contains(&"fetch") => {
                let arg = self.meta_atom(s);
                format!("fetch({arg})")
            }
            _ => self.meta_handler(s, run),
        }
    }

    fn meta_handler(&mut self, s: &Scope, out: RunTy) -> String {
        let ops: Vec<&'static str> = match self.rng.gen_range(0..5) {
            0 => vec!["fetch"],
            1 => vec!["yank", "fetch"],
            _ => vec!["yank"],
        };
        let mut inner = s.clone();
        inner.meta_ops.extend(ops.iter().copied());
        let body_ty = if self.chance(0.6) { RunTy::Fun } else { RunTy::Nat };
        let body = self.meta(&inner, MetaTy::Code(body_ty));
        let u = self.fresh("u");
        let ret = if body_ty == out && self.chance(0.5) {
            format!("return {u}")
        } else {
            self.meta(&s.with(Var::Meta(u.clone(), MetaTy::Code(body_ty))), MetaTy::Code(out))
        };
        let mut clauses = format!("return({u}) -> ({ret})");
        for op in ops {
            let (y, k) = (self.fresh("y"), self.fresh("k"));
            let clause = if op == "yank" {
                let cs = s.with(Var::Meta(y.clone(), MetaTy::Code(RunTy::Nat)));
                match self.rng.gen_range(0..6) {
                    0 => format!("continue {k} {y}"),
                    1 => {
                        let w = self.fresh("w");
                        format!("do {w} <- <<${y} + 0>> in continue {k} {w}")
                    }
                    2 | 5 if out == RunTy::Nat => format!("return {y}"),
                    3 if out == RunTy::Nat => {
                        let w = self.fresh("w");
                        format!("do {w} <- continue {k} {y} in continue {k} {w}")
                    }
                    _ => self.meta(&cs, MetaTy::Code(out)),
                }
            } else {
                let cs = s.with(Var::Meta(y.clone(), MetaTy::Nat));
                match self.rng.gen_range(0..3) {
                    0 => format!("continue {k} <<{}>>", self.literal()),
                    1 => {
                        let w = self.fresh("w");
                        let code = self.meta(&cs, MetaTy::Code(RunTy::Nat));
                        format!("do {w} <- ({code}) in continue {k} {w}")
                    }
                    _ => self.meta(&cs, MetaTy::Code(out)),
                }
            };
            clauses.push_str(&format!(" ; {op}({y}, {k}) -> ({clause})"));
        }
        format!("handle ({body}) with {{ {clauses} }}")
    }

    fn program(&mut self) -> String {
        let s = Scope::default();
        let body = match self.rng.gen_range(0..10) {
            0..=5 => format!("$({})", self.meta(&s, MetaTy::Code(RunTy::Nat))),
            6..=7 => {
                let z = self.fresh("z");
                let inner = format!("$({})", self.meta(&s.with(Var::Run(z.clone(), RunTy::Nat)), MetaTy::Code(RunTy::Nat)));
                format!("fun ({z} : Nat) -> {inner}")
            }
            _ => self.code(&s, RunTy::Nat),
        };
        format!("{GENERATED_SIGS}\n{body}\n")
    }
}

/// The source text of a generated program, before checking.
fn candidate(rng: ChaCha8Rng, size: usize) -> (String, ChaCha8Rng) {
    let mut g = Gen { rng, budget: size, names: 0 };
    let text = g.program();
    (text, g.rng)
}

/// Generates a closed, well-typed program with about `size` nodes.
/// Deterministic in `seed`.
pub fn gen_program(seed: u64, size: usize) -> SourceProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let (text, next) = candidate(rng, size);
        rng = next;
        let Ok(p) = parse_program(&text) else { continue };
        if typecheck_program(&p).is_ok() {
            return p;
        }
    }
    fallback()
}

fn fallback() -> SourceProgram {
    let text = format!("{GENERATED_SIGS}\n{FALLBACK_PROGRAM}\n");
    parse_program(&text).expect("the fallback program parses")
}

/// Whether `p`'s handlers include one that resumes its continuation and
/// one that drops it.
pub fn handler_behaviours(p: &SourceProgram) -> (bool, bool) {
    let mut resumes = false;
    let mut discards = false;
    visit(&p.body, Mode::Compile, &mut |e, _| {
        if let ExprKind::Handle { handler, .. } = &e.kind {
            for c in &handler.ops {
                if mentions(&c.body, &c.cont.name) {
                    resumes = true;
                } else {
                    discards = true;
                }
            }
        }
    });
    (resumes, discards)
}

fn value_mentions(v: &Value, x: &str) -> bool {
    match v {
        Value::Var(y, _) => y == x,
        Value::Nat(_) => false,
        Value::Lam { binder, body } => binder.name != x && mentions(body, x),
    }
}

fn mentions(e: &Expr, x: &str) -> bool {
    let mut found = false;
    let mut check = |v: &Value| found |= value_mentions(v, x);
    match &e.kind {
        ExprKind::App(a, b) | ExprKind::Continue(a, b) | ExprKind::Arith(_, a, b) => {
            check(a);
            check(b);
        }
        ExprKind::Return(v) | ExprKind::Op { arg: v, .. } => check(v),
        ExprKind::Do { binder, bound, body } => {
            found = mentions(bound, x) || (binder.name != x && mentions(body, x));
        }
        ExprKind::Handle { body, handler } => {
            found = mentions(body, x) || handler_mentions(handler, x);
        }
        ExprKind::Quote(inner) | ExprKind::Splice(inner) => found = mentions(inner, x),
    }
    found
}

fn handler_mentions(h: &Handler, x: &str) -> bool {
    (h.ret.binder.name != x && mentions(&h.ret.body, x))
        || h.ops.iter().any(|c| c.arg.name != x && c.cont.name != x && mentions(&c.body, x))
}

/// Calls `f` on every expression of `e` (checked in `mode`) with its mode.
pub fn visit(e: &Expr, mode: Mode, f: &mut dyn FnMut(&Expr, Mode)) {
    f(e, mode);
    match &e.kind {
        ExprKind::App(a, b) | ExprKind::Continue(a, b) | ExprKind::Arith(_, a, b) => {
            for body in [a, b].into_iter().filter_map(lam_body) {
                visit(body, mode, f);
            }
        }
        ExprKind::Return(v) | ExprKind::Op { arg: v, .. } => {
            if let Some(body) = lam_body(v) {
                visit(body, mode, f);
            }
        }
        ExprKind::Do { bound, body, .. } => {
            visit(bound, mode, f);
            visit(body, mode, f);
        }
        ExprKind::Handle { body, handler } => {
            visit(body, mode, f);
            visit(&handler.ret.body, mode, f);
            for c in &handler.ops {
                visit(&c.body, mode, f);
            }
        }
        ExprKind::Quote(inner) => visit(inner, Mode::Quote, f),
        ExprKind::Splice(inner) => visit(inner, Mode::Splice, f),
    }
}

fn lam_body(v: &Value) -> Option<&Expr> {
    match v {
        Value::Lam { body, .. } => Some(body),
        _ => None,
    }
}

/// Every expression of the program paired with the mode it is checked in.
pub fn subexpressions(p: &SourceProgram) -> Vec<(Expr, Mode)> {
    let mut out = Vec::new();
    visit(&p.body, Mode::Compile, &mut |e, m| out.push((e.clone(), m)));
    out
}

fn lam_body_mut(v: &mut Value) -> Option<&mut Expr> {
    match v {
        Value::Lam { body, .. } => Some(body),
        _ => None,
    }
}

/// The `n`-th expression of `e` in the order `visit` reports them.
fn nth_mut<'a>(e: &'a mut Expr, n: &mut usize) -> Option<&'a mut Expr> {
    if *n == 0 {
        return Some(e);
    }
    *n -= 1;
    match &mut e.kind {
        ExprKind::App(a, b) | ExprKind::Continue(a, b) | ExprKind::Arith(_, a, b) => {
            for body in [a, b].into_iter().filter_map(lam_body_mut) {
                if let Some(found) = nth_mut(body, n) {
                    return Some(found);
                }
            }
            None
        }
        ExprKind::Return(v) | ExprKind::Op { arg: v, .. } => lam_body_mut(v).and_then(|body| nth_mut(body, n)),
        ExprKind::Do { bound, body, .. } => nth_mut(bound, n).or_else(|| nth_mut(body, n)),
        ExprKind::Handle { body, handler } => {
            if let Some(found) = nth_mut(body, n) {
                return Some(found);
            }
            if let Some(found) = nth_mut(&mut handler.ret.body, n) {
                return Some(found);
            }
            for c in &mut handler.ops {
                if let Some(found) = nth_mut(&mut c.body, n) {
                    return Some(found);
                }
            }
            None
        }
        ExprKind::Quote(inner) | ExprKind::Splice(inner) => nth_mut(inner, n),
    }
}

/// Smaller expressions that might stand in for `e`.
fn replacements(e: &Expr) -> Vec<Expr> {
    let zero = Expr::ret(Value::Nat(0));
    let mut out = vec![zero.clone(), Expr::quote(zero)];
    match &e.kind {
        ExprKind::Do { bound, body, .. } => out.extend([(**bound).clone(), (**body).clone()]),
        ExprKind::Handle { body, handler } => out.extend([(**body).clone(), (*handler.ret.body).clone()]),
        ExprKind::Quote(inner) | ExprKind::Splice(inner) => out.push((**inner).clone()),
        _ => {}
    }
    out.retain(|r| r != e);
    out
}

/// Shrinks `p` while `still_fails` keeps holding, replacing one
/// subexpression at a time by a smaller one that keeps the program
/// well typed. Stops at a fixpoint.
pub fn shrink(p: &SourceProgram, mut still_fails: impl FnMut(&SourceProgram) -> bool) -> SourceProgram {
    let mut current = p.clone();
    let mut progress = true;
    while progress {
        progress = false;
        let nodes = subexpressions(&current);
        'nodes: for (index, (target, _)) in nodes.iter().enumerate() {
            for replacement in replacements(target) {
                // Only `return 0` may keep the node count, so no rewrite undoes another.
                let is_zero = matches!(replacement.kind, ExprKind::Return(Value::Nat(0)));
                let mut candidate = current.clone();
                let mut n = index;
                *nth_mut(&mut candidate.body, &mut n).expect("index in range") = replacement;
                let smaller = match subexpressions(&candidate).len().cmp(&nodes.len()) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Equal => is_zero,
                    std::cmp::Ordering::Greater => false,
                };
                if smaller && typecheck_program(&candidate).is_ok() && still_fails(&candidate) {
                    current = candidate;
                    progress = true;
                    break 'nodes;
                }
            }
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEEDS: u64 = 1000;

    #[test]
    fn generated_programs_typecheck() {
        for seed in 0..200 {
            let p = gen_program(seed, 30);
            assert!(typecheck_program(&p).is_ok(), "seed {seed}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for seed in [0, 7, 99] {
            assert_eq!(gen_program(seed, 25), gen_program(seed, 25));
        }
    }

    #[test]
    fn handlers_both_resume_and_discard() {
        let (mut resumes, mut discards) = (0, 0);
        for seed in 0..SEEDS {
            let (r, d) = handler_behaviours(&gen_program(seed, 30));
            resumes += r as usize;
            discards += d as usize;
        }
        assert!(resumes > 100, "{resumes}");
        assert!(discards > 100, "{discards}");
    }

    #[test]
    fn tiny_budget_still_yields_a_program() {
        let p = gen_program(0, 1);
        assert!(subexpressions(&p).len() <= 8, "{:?}", p.body);
    }

    #[test]
    fn fallback_parses_and_typechecks() {
        assert!(typecheck_program(&fallback()).is_ok());
    }

    #[test]
    fn shrinking_reaches_a_small_witness() {
        let has_handler = |p: &SourceProgram| {
            let mut found = false;
            visit(&p.body, Mode::Compile, &mut |e, _| found |= matches!(e.kind, ExprKind::Handle { .. }));
            found
        };
        let p = (0..SEEDS).map(|s| gen_program(s, 40)).find(|p| has_handler(p) && subexpressions(p).len() > 15).unwrap();
        let small = shrink(&p, has_handler);
        assert!(has_handler(&small));
        assert!(typecheck_program(&small).is_ok());
        assert!(subexpressions(&small).len() < subexpressions(&p).len());
    }

    #[test]
    fn subexpressions_record_modes() {
        let p = parse_program("fun (x : Nat) -> $(<<return x>>)").unwrap();
        let modes: Vec<Mode> = subexpressions(&p).into_iter().map(|(_, m)| m).collect();
        assert!(modes.contains(&Mode::Splice) && modes.contains(&Mode::Quote));
    }
}
