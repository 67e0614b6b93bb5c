use crate::kernel_syntax::{
    CompileComp, CompileType, CoreComp, CoreSigs, CoreType, EffectSig, RunComp, RunHandlerType, SourceType, Stage,
};
use crate::source_typeck::{erase, erase_handler, TypingContext};
use crate::core_machine::CoreContext;

/// Translates a source type to the core type of its elaboration. Run-time
/// types become AST types; compile-time types map structurally.
pub fn elaborate_type(t: &SourceType) -> CoreType {
    match t {
        SourceType::Run(r) => CoreType::AstVal(erase(r)),
        SourceType::Compile(c) => elaborate_compile_type(c),
    }
}

pub fn elaborate_compile_type(t: &CompileType) -> CoreType {
    match t {
        CompileType::Nat => CoreType::Nat,
        CompileType::Fun(a, r, b) => CoreType::fun(elaborate_compile_type(a), r.clone(), elaborate_compile_type(b)),
        CompileType::Cont(a, r, b) => CoreType::cont(elaborate_compile_type(a), r.clone(), elaborate_compile_type(b)),
        CompileType::Code(inner, row, _) => CoreType::AstComp(erase(inner), row.clone()),
    }
}

/// `T ! Δ;ξ` becomes `AST(T ! ξ) ! Δ`.
pub fn elaborate_run_comp(c: &RunComp) -> CoreComp {
    CoreComp { ty: CoreType::AstComp(erase(&c.ty), c.run_row.clone()), row: c.compile_row.clone() }
}

pub fn elaborate_compile_comp(c: &CompileComp) -> CoreComp {
    CoreComp { ty: elaborate_compile_type(&c.ty), row: c.row.clone() }
}

pub fn elaborate_handler_type(h: &RunHandlerType) -> CoreType {
    CoreType::AstHandler(Box::new(erase_handler(h)))
}

/// Run-time bindings become formal parameters; compile-time bindings keep
/// their elaborated type.
pub fn elaborate_context(ctx: &TypingContext) -> CoreContext {
    ctx.iter()
        .map(|(x, t, _)| {
            let ty = match t {
                SourceType::Run(r) => CoreType::FParam(erase(r)),
                SourceType::Compile(c) => elaborate_compile_type(c),
            };
            (x.clone(), ty)
        })
        .collect()
}

pub fn elaborate_sigs(sigs: &[EffectSig]) -> CoreSigs {
    let mut out = CoreSigs::default();
    for s in sigs {
        match (s.stage, &s.arg, &s.result) {
            (Stage::Run, SourceType::Run(a), SourceType::Run(b)) => {
                out.run.insert(s.name.clone(), (erase(a), erase(b)));
            }
            (Stage::Compile, SourceType::Compile(a), SourceType::Compile(b)) => {
                out.compile.insert(s.name.clone(), (elaborate_compile_type(a), elaborate_compile_type(b)));
            }
            _ => unreachable!("signature types follow their stage"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::{EffectRow, Pretype, RunType};

    #[test]
    fn code_becomes_ast() {
        let c = CompileType::Code(Box::new(RunType::Nat), EffectRow::empty(), None);
        assert_eq!(elaborate_compile_type(&c), CoreType::AstComp(Pretype::Nat, EffectRow::empty()));
        assert_eq!(elaborate_compile_type(&CompileType::Nat), CoreType::Nat);
    }

    #[test]
    fn run_computation() {
        let c = RunComp { ty: RunType::Nat, compile_row: EffectRow::single("d"), run_row: EffectRow::single("x") };
        let e = elaborate_run_comp(&c);
        assert_eq!(e.ty, CoreType::AstComp(Pretype::Nat, EffectRow::single("x")));
        assert_eq!(e.row, EffectRow::single("d"));
    }

    #[test]
    fn contexts() {
        assert!(elaborate_context(&vec![]).is_empty());
        let ctx = vec![
            ("x".to_string(), SourceType::Run(RunType::Nat), None),
            ("y".to_string(), SourceType::Compile(CompileType::Nat), None),
        ];
        let e = elaborate_context(&ctx);
        assert_eq!(e[0].1, CoreType::FParam(Pretype::Nat));
        assert_eq!(e[1].1, CoreType::Nat);
    }
}
