use crate::kernel_syntax::{HandlerPretype, Pretype, RunHandlerType, RunType};

/// Drops level information from a run-time type.
pub fn erase(t: &RunType) -> Pretype {
    match t {
        RunType::Nat => Pretype::Nat,
        RunType::Fun(a, r, b) => Pretype::Fun(Box::new(erase(a)), r.clone(), Box::new(erase(b))),
        RunType::Cont(a, r, b) => Pretype::Cont(Box::new(erase(a)), r.clone(), Box::new(erase(b))),
    }
}

pub fn erase_handler(h: &RunHandlerType) -> HandlerPretype {
    HandlerPretype { from: erase(&h.from), from_row: h.from_row.clone(), to: erase(&h.to), to_row: h.to_row.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_syntax::EffectRow;

    #[test]
    fn structural() {
        assert_eq!(erase(&RunType::Nat), Pretype::Nat);
        let f = RunType::Fun(Box::new(RunType::Nat), EffectRow::empty(), Box::new(RunType::Nat));
        assert_eq!(erase(&f), Pretype::fun(Pretype::Nat, EffectRow::empty(), Pretype::Nat));
        let h = RunHandlerType { from: RunType::Nat, from_row: EffectRow::single("a"), to: f, to_row: EffectRow::empty() };
        let e = erase_handler(&h);
        assert_eq!(e.from_row, EffectRow::single("a"));
        assert!(matches!(e.to, Pretype::Fun(..)));
    }
}
