use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kernel_syntax::{freevars, handler_dom, subst, FormalParam, Frame, Kont, Name, Nf, Term};

/// The stack mark `I`: a frame depth, or ⊤ when nothing is muted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mark {
    At(usize),
    Top,
}

impl Mark {
    fn min_with(self, depth: usize) -> Mark {
        match self {
            Mark::Top => Mark::At(depth),
            Mark::At(i) => Mark::At(i.min(depth)),
        }
    }

    /// `depth > I`, where nothing exceeds ⊤.
    fn is_below(self, depth: usize) -> bool {
        match self {
            Mark::Top => false,
            Mark::At(i) => depth > i,
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mark::At(i) => write!(f, "{i}"),
            Mark::Top => write!(f, "⊤"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    App,
    Seq,
    Hdl,
    Psh,
    Pop,
    AstGen,
    SecChs,
    SecChf,
    SecCms,
    SecCmf,
    SecTls,
    SecDlt,
    EffOp,
    EffCnt,
    Arith,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::App => "App",
            Rule::Seq => "Seq",
            Rule::Hdl => "Hdl",
            Rule::Psh => "Psh",
            Rule::Pop => "Pop",
            Rule::AstGen => "Ast-Gen",
            Rule::SecChs => "Sec-Chs",
            Rule::SecChf => "Sec-Chf",
            Rule::SecCms => "Sec-Cms",
            Rule::SecCmf => "Sec-Cmf",
            Rule::SecTls => "Sec-Tls",
            Rule::SecDlt => "Sec-Dlt",
            Rule::EffOp => "Eff-Op",
            Rule::EffCnt => "Eff-Cnt",
            Rule::Arith => "Arith",
        }
    }
}

/// Why a check failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScopeDiagnostic {
    /// Free variables of the checked AST that were not declared (and, for
    /// `check_M`, not muted).
    pub offending: Vec<FormalParam>,
    pub depth: usize,
    pub mark: Mark,
    pub muted_check: bool,
    pub ast: Nf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Value { value: Nf, used: BTreeSet<u32> },
    ScopeError(ScopeDiagnostic),
    Unhandled(Name),
    FuelExhausted(usize),
}

impl Outcome {
    pub fn is_value(&self) -> bool {
        matches!(self, Outcome::Value { .. })
    }

    pub fn is_scope_error(&self) -> bool {
        matches!(self, Outcome::ScopeError(_))
    }
}

/// A non-terminal configuration with no applicable rule. Well-typed
/// programs never reach one.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("machine stuck: {0}")]
pub struct Stuck(pub String);

/// `⟨t; E; U; M; I⟩`. The stack lists frames outermost first.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub term: Term,
    pub stack: Vec<Frame>,
    pub used: BTreeSet<u32>,
    pub muted: BTreeSet<FormalParam>,
    pub mark: Mark,
    failure: Option<ScopeDiagnostic>,
}

#[derive(Clone, Debug)]
pub enum StepResult {
    Next(Rule),
    Terminal(Outcome),
}

/// One line of a trace: the rule fired and the machine registers after it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRecord {
    pub rule: Rule,
    pub depth: usize,
    pub used: usize,
    pub muted: Vec<u32>,
    pub mark: Mark,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let muted: Vec<String> = self.muted.iter().map(u32::to_string).collect();
        write!(f, "{}\t{}\t{}\t[{}]\t{}", self.rule.name(), self.depth, self.used, muted.join(","), self.mark)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub steps: usize,
    pub trace: Option<Vec<TraceRecord>>,
}

/// The declared variables of a stack: those of its `dlet` frames.
pub fn projfvs(stack: &[Frame]) -> BTreeSet<FormalParam> {
    stack
        .iter()
        .filter_map(|f| match f {
            Frame::Dlet(p) => Some(p.clone()),
            _ => None,
        })
        .collect()
}

/// Operations handled by the handler frames of a stack.
pub fn handled(stack: &[Frame]) -> BTreeSet<Name> {
    stack
        .iter()
        .flat_map(|f| match f {
            Frame::Handle(h) => handler_dom(h),
            _ => BTreeSet::new(),
        })
        .collect()
}

/// The smallest identifier not in `used`.
pub fn next(used: &BTreeSet<u32>) -> u32 {
    let mut candidate = 0;
    for &id in used {
        if id != candidate {
            break;
        }
        candidate += 1;
    }
    candidate
}

fn return_value(t: &Term) -> Option<&Nf> {
    match t {
        Term::Return(n) => Some(n),
        _ => None,
    }
}

impl Configuration {
    /// `⟨t; [−]; ∅; ∅; ⊤⟩`.
    pub fn initial(term: Term) -> Self {
        Configuration {
            term,
            stack: Vec::new(),
            used: BTreeSet::new(),
            muted: BTreeSet::new(),
            mark: Mark::Top,
            failure: None,
        }
    }

    /// The whole program this configuration represents, `E[t]`.
    pub fn plugged(&self) -> Term {
        crate::kernel_syntax::plug(&self.stack, self.term.clone())
    }

    pub fn record(&self, rule: Rule) -> TraceRecord {
        TraceRecord {
            rule,
            depth: self.stack.len(),
            used: self.used.len(),
            muted: self.muted.iter().map(|p| p.id).collect(),
            mark: self.mark,
        }
    }

    /// Performs one transition in place.
    pub fn step_mut(&mut self) -> Result<StepResult, Stuck> {
        let term = std::mem::replace(&mut self.term, Term::Err);
        let rule = match term {
            Term::App(Nf::Lam(x, body), arg) => {
                self.term = subst(&body, &arg, &x);
                Rule::App
            }
            Term::App(f, _) => return Err(Stuck(format!("application of a non-function {f:?}"))),
            Term::Return(n) => match self.stack.pop() {
                None => {
                    self.term = Term::Return(n.clone());
                    return Ok(StepResult::Terminal(Outcome::Value { value: n, used: self.used.clone() }));
                }
                Some(frame) => {
                    self.term = frame.plug(Term::Return(n));
                    Rule::Pop
                }
            },
            Term::Do(x, bound, body) => match return_value(&bound) {
                Some(n) => {
                    self.term = subst(&body, n, &x);
                    Rule::Seq
                }
                None => {
                    self.stack.push(Frame::Do(x, *body));
                    self.term = *bound;
                    Rule::Psh
                }
            },
            Term::Handle(body, h) => match return_value(&body) {
                Some(n) => {
                    self.term = subst(&h.ret_body, n, &h.ret_var);
                    Rule::Hdl
                }
                None => {
                    self.stack.push(Frame::Handle(h));
                    self.term = *body;
                    Rule::Psh
                }
            },
            Term::Dlet(n, body) => {
                let Nf::Param(p) = n else {
                    return Err(Stuck(format!("dlet of a non-parameter {n:?}")));
                };
                match *body {
                    Term::Return(v) => {
                        if !self.mark.is_below(self.stack.len()) {
                            self.muted.clear();
                            self.mark = Mark::Top;
                        }
                        self.term = Term::Return(v);
                        Rule::SecDlt
                    }
                    other => {
                        self.stack.push(Frame::Dlet(p));
                        self.term = other;
                        Rule::Psh
                    }
                }
            }
            Term::Tls(body) => match *body {
                Term::Return(v) => {
                    self.muted.clear();
                    self.mark = Mark::Top;
                    self.term = Term::Return(v);
                    Rule::SecTls
                }
                other => {
                    self.stack.push(Frame::Tls);
                    self.term = other;
                    Rule::Psh
                }
            },
            Term::Mkvar(ty, classifier) => {
                let id = next(&self.used);
                self.used.insert(id);
                self.term = Term::Return(Nf::Param(FormalParam { id, ty, classifier }));
                Rule::AstGen
            }
            Term::Check(n) => self.check(n, false),
            Term::CheckM(n) => self.check(n, true),
            Term::Op(op, arg) => {
                let Some(i) = self
                    .stack
                    .iter()
                    .rposition(|f| matches!(f, Frame::Handle(h) if h.clause(&op).is_some()))
                else {
                    self.term = Term::Op(op.clone(), arg);
                    return Ok(StepResult::Terminal(Outcome::Unhandled(op)));
                };
                let captured: Vec<Frame> = self.stack.split_off(i);
                let Frame::Handle(h) = &captured[0] else { unreachable!("rposition matched a handler") };
                let clause = h.clause(&op).expect("matched above").clone();
                self.muted.extend(projfvs(&captured[1..]));
                self.mark = self.mark.min_with(self.stack.len());
                let kont = Nf::Kont(Arc::new(Kont { frames: captured }));
                let body = subst(&clause.body, &arg, &clause.arg);
                self.term = subst(&body, &kont, &clause.cont);
                Rule::EffOp
            }
            Term::Continue(Nf::Kont(k), n) => {
                self.stack.extend(k.frames.iter().cloned());
                self.term = Term::Return(n);
                Rule::EffCnt
            }
            Term::Continue(k, _) => return Err(Stuck(format!("continue with a non-continuation {k:?}"))),
            Term::Arith(op, Nf::Nat(a), Nf::Nat(b)) => {
                self.term = Term::Return(Nf::Nat(op.apply(a, b)));
                Rule::Arith
            }
            Term::Arith(_, a, b) => return Err(Stuck(format!("arithmetic on non-naturals {a:?}, {b:?}"))),
            Term::Err => {
                let diag = self.failure.clone().ok_or_else(|| Stuck("err reached without a failed check".into()))?;
                return Ok(StepResult::Terminal(Outcome::ScopeError(diag)));
            }
        };
        Ok(StepResult::Next(rule))
    }

    fn check(&mut self, n: Nf, muted_check: bool) -> Rule {
        let declared = projfvs(&self.stack);
        let offending: Vec<FormalParam> = freevars(&n)
            .into_iter()
            .filter(|v| !declared.contains(v) && !(muted_check && self.muted.contains(v)))
            .collect();
        if offending.is_empty() {
            self.term = Term::Return(n);
            if muted_check { Rule::SecCms } else { Rule::SecChs }
        } else {
            self.failure = Some(ScopeDiagnostic {
                offending,
                depth: self.stack.len(),
                mark: self.mark,
                muted_check,
                ast: n,
            });
            self.term = Term::Err;
            if muted_check { Rule::SecCmf } else { Rule::SecChf }
        }
    }
}

/// Pure single step.
pub fn step(c: &Configuration) -> Result<(Configuration, StepResult), Stuck> {
    let mut next = c.clone();
    let r = next.step_mut()?;
    Ok((next, r))
}

/// Runs from the initial configuration, calling `observe` on the initial
/// configuration (with no rule) and after every transition.
pub fn run_observed(
    t: Term,
    fuel: usize,
    mut observe: impl FnMut(&Configuration, Option<Rule>),
) -> Result<(Outcome, usize), Stuck> {
    let mut cfg = Configuration::initial(t);
    observe(&cfg, None);
    let mut steps = 0;
    loop {
        if steps >= fuel {
            return Ok((Outcome::FuelExhausted(steps), steps));
        }
        match cfg.step_mut()? {
            StepResult::Terminal(outcome) => return Ok((outcome, steps)),
            StepResult::Next(rule) => {
                steps += 1;
                observe(&cfg, Some(rule));
            }
        }
    }
}

/// Runs `t` for at most `fuel` transitions.
pub fn run(t: Term, fuel: usize, trace: bool) -> Result<RunResult, Stuck> {
    let mut records = Vec::new();
    let (outcome, steps) = run_observed(t, fuel, |cfg, rule| {
        if let (true, Some(rule)) = (trace, rule) {
            records.push(cfg.record(rule));
        }
    })?;
    Ok(RunResult { outcome, steps, trace: trace.then_some(records) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::{ArithOp, Ast, CoreHandler, CoreOpClause, Pretype};
    use proptest::prelude::*;

    fn param(id: u32) -> FormalParam {
        FormalParam { id, ty: Pretype::Nat, classifier: None }
    }

    fn var_ast(id: u32) -> Nf {
        Nf::ast(Ast::Var(Nf::Param(param(id))))
    }

    #[test]
    fn next_is_smallest_missing() {
        assert_eq!(next(&BTreeSet::new()), 0);
        assert_eq!(next(&[0, 1, 2].into_iter().collect()), 3);
        assert_eq!(next(&[0, 2].into_iter().collect()), 1);
    }

    proptest! {
        #[test]
        fn next_is_fresh_and_minimal(ids in proptest::collection::btree_set(0u32..12, 0..10)) {
            let n = next(&ids);
            prop_assert!(!ids.contains(&n));
            prop_assert!((0..n).all(|i| ids.contains(&i)));
        }
    }

    #[test]
    fn projfvs_collects_dlets() {
        assert!(projfvs(&[]).is_empty());
        let one = [Frame::Dlet(param(0)), Frame::Do("x".into(), Term::Return(Nf::var("x")))];
        assert_eq!(projfvs(&one).into_iter().map(|p| p.id).collect::<Vec<_>>(), vec![0]);
        let two = [Frame::Dlet(param(0)), Frame::Tls, Frame::Dlet(param(3))];
        assert_eq!(projfvs(&two).into_iter().map(|p| p.id).collect::<Vec<_>>(), vec![0, 3]);
    }

    #[test]
    fn handled_ignores_marker_frames() {
        assert!(handled(&[]).is_empty());
        let h = CoreHandler {
            ret_var: "x".into(),
            ret_body: Box::new(Term::Return(Nf::var("x"))),
            ops: vec![CoreOpClause { op: "op".into(), arg: "y".into(), cont: "k".into(), body: Term::Return(Nf::var("y")) }],
        };
        let stack = [Frame::Tls, Frame::Handle(h), Frame::Dlet(param(0))];
        assert_eq!(handled(&stack).into_iter().collect::<Vec<_>>(), vec!["op".to_string()]);
        assert!(handled(&[Frame::Tls, Frame::Dlet(param(1))]).is_empty());
    }

    #[test]
    fn return_on_empty_stack_is_terminal() {
        let c = Configuration::initial(Term::Return(Nf::Nat(4)));
        let (_, r) = step(&c).unwrap();
        assert!(matches!(r, StepResult::Terminal(Outcome::Value { value: Nf::Nat(4), .. })));
    }

    #[test]
    fn check_fails_outside_declaration() {
        let t = Term::Check(var_ast(0));
        let out = run(t, 10, false).unwrap().outcome;
        match out {
            Outcome::ScopeError(d) => assert_eq!(d.offending, vec![param(0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn check_passes_under_dlet() {
        // do x <- mkvar ℕ in dlet(x, check Var(x))
        let t = Term::Do(
            "x".into(),
            Box::new(Term::Mkvar(Pretype::Nat, None)),
            Box::new(Term::Dlet(Nf::var("x"), Box::new(Term::Check(Nf::ast(Ast::Var(Nf::var("x"))))))),
        );
        let r = run(t, 100, true).unwrap();
        assert!(r.outcome.is_value());
        let rules: Vec<&str> = r.trace.unwrap().iter().map(|t| t.rule.name()).collect();
        assert_eq!(rules, vec!["Psh", "Ast-Gen", "Pop", "Seq", "Psh", "Sec-Chs", "Pop", "Sec-Dlt"]);
    }

    #[test]
    fn eff_op_mutes_and_marks() {
        // handle dlet(α0, do u <- op(1) in return u) with { return(r) -> return r; op(y,k) -> check_M Var(α0) }
        let h = CoreHandler {
            ret_var: "r".into(),
            ret_body: Box::new(Term::Return(Nf::var("r"))),
            ops: vec![CoreOpClause { op: "op".into(), arg: "y".into(), cont: "k".into(), body: Term::CheckM(var_ast(0)) }],
        };
        let body = Term::Dlet(
            Nf::Param(param(0)),
            Box::new(Term::Do("u".into(), Box::new(Term::Op("op".into(), Nf::Nat(1))), Box::new(Term::Return(Nf::var("u"))))),
        );
        let mut cfg = Configuration::initial(Term::Handle(Box::new(body), h));
        loop {
            match cfg.step_mut().unwrap() {
                StepResult::Next(Rule::EffOp) => break,
                StepResult::Next(_) => {}
                StepResult::Terminal(o) => panic!("{o:?}"),
            }
        }
        assert_eq!(cfg.muted.iter().map(|p| p.id).collect::<Vec<_>>(), vec![0]);
        assert_eq!(cfg.mark, Mark::At(0));
        assert!(matches!(cfg.step_mut().unwrap(), StepResult::Next(Rule::SecCms)));
    }

    #[test]
    fn continuation_resumes_multiple_times() {
        // handle (do x <- op(0) in return x + 1) with { return(r) -> return r ; op(y,k) -> do a <- continue k 1 in do b <- continue k 2 in a*b }
        let h = CoreHandler {
            ret_var: "r".into(),
            ret_body: Box::new(Term::Return(Nf::var("r"))),
            ops: vec![CoreOpClause {
                op: "op".into(),
                arg: "y".into(),
                cont: "k".into(),
                body: Term::Do(
                    "a".into(),
                    Box::new(Term::Continue(Nf::var("k"), Nf::Nat(1))),
                    Box::new(Term::Do(
                        "b".into(),
                        Box::new(Term::Continue(Nf::var("k"), Nf::Nat(2))),
                        Box::new(Term::Arith(ArithOp::Mul, Nf::var("a"), Nf::var("b"))),
                    )),
                ),
            }],
        };
        let body = Term::Do(
            "x".into(),
            Box::new(Term::Op("op".into(), Nf::Nat(0))),
            Box::new(Term::Arith(ArithOp::Add, Nf::var("x"), Nf::Nat(1))),
        );
        let out = run(Term::Handle(Box::new(body), h), 1000, false).unwrap().outcome;
        assert!(matches!(out, Outcome::Value { value: Nf::Nat(6), .. }));
    }

    #[test]
    fn unhandled_op_is_reported() {
        let out = run(Term::Op("nope".into(), Nf::Nat(0)), 10, false).unwrap().outcome;
        assert_eq!(out, Outcome::Unhandled("nope".into()));
    }

    #[test]
    fn tls_resets_muting() {
        let mut cfg = Configuration::initial(Term::Tls(Box::new(Term::Return(Nf::Nat(0)))));
        cfg.muted.insert(param(0));
        cfg.mark = Mark::At(0);
        assert!(matches!(cfg.step_mut().unwrap(), StepResult::Next(Rule::SecTls)));
        assert!(cfg.muted.is_empty());
        assert_eq!(cfg.mark, Mark::Top);
    }

    #[test]
    fn fuel_is_respected() {
        let r = run(Term::Do("x".into(), Box::new(Term::Return(Nf::Nat(0))), Box::new(Term::Return(Nf::var("x")))), 0, false).unwrap();
        assert_eq!(r.outcome, Outcome::FuelExhausted(0));
    }
}
