//! Effect-row constraint solving shared by the source and core checkers.
//!
//! Every row occurring in a derivation is a variable. A variable is either
//! fixed to a concrete set (from an annotation or signature) or free with a
//! lower bound of operations it must contain. Rules that are flexible in
//! their row (returning a value, performing an operation) introduce free
//! variables, and joins unify them. Handler side conditions are recorded as
//! `sub ⊆ sup ∪ extra` and propagated as lower bounds when solving; free
//! variables left over are defaulted to their lower bound, which is the
//! least solution.

use std::collections::BTreeMap;

use crate::kernel_syntax::EffectRow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowVar(u32);

#[derive(Clone, Debug)]
pub enum RowError<O> {
    /// An operation was required in a row fixed to a set lacking it.
    NotInRow { op: String, row: EffectRow, origin: O },
    /// Two fixed rows were required to be equal.
    Mismatch { left: EffectRow, right: EffectRow },
    /// A handler constraint forced an operation into a fixed row.
    Escapes { op: String, row: EffectRow, origin: O },
}

#[derive(Clone, Debug)]
struct Subset<O> {
    sub: RowVar,
    sup: RowVar,
    extra: EffectRow,
    origin: O,
}

#[derive(Clone, Debug)]
pub struct RowSolver<O> {
    parent: Vec<u32>,
    fixed: Vec<Option<EffectRow>>,
    lower: Vec<BTreeMap<String, O>>,
    subsets: Vec<Subset<O>>,
}

impl<O: Clone> Default for RowSolver<O> {
    fn default() -> Self {
        RowSolver { parent: Vec::new(), fixed: Vec::new(), lower: Vec::new(), subsets: Vec::new() }
    }
}

impl<O: Clone> RowSolver<O> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> RowVar {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.fixed.push(None);
        self.lower.push(BTreeMap::new());
        RowVar(id)
    }

    pub fn fixed(&mut self, row: EffectRow) -> RowVar {
        let v = self.fresh();
        self.fixed[v.0 as usize] = Some(row);
        v
    }

    fn find(&self, v: RowVar) -> usize {
        let mut i = v.0 as usize;
        while self.parent[i] as usize != i {
            i = self.parent[i] as usize;
        }
        i
    }

    /// The contents currently known for `v`: its fixed set, or its lower bound.
    pub fn current(&self, v: RowVar) -> EffectRow {
        let r = self.find(v);
        match &self.fixed[r] {
            Some(row) => row.clone(),
            None => self.lower[r].keys().cloned().collect(),
        }
    }


    /// Requires `op ∈ v`.
    pub fn require(&mut self, op: &str, v: RowVar, origin: O) -> Result<(), RowError<O>> {
        let r = self.find(v);
        if let Some(row) = &self.fixed[r] {
            if !row.contains(op) {
                return Err(RowError::NotInRow { op: op.to_string(), row: row.clone(), origin });
            }
            return Ok(());
        }
        self.lower[r].entry(op.to_string()).or_insert(origin);
        Ok(())
    }

    pub fn unify(&mut self, a: RowVar, b: RowVar) -> Result<(), RowError<O>> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return Ok(());
        }
        match (self.fixed[ra].clone(), self.fixed[rb].clone()) {
            (Some(x), Some(y)) => {
                if x != y {
                    return Err(RowError::Mismatch { left: x, right: y });
                }
                self.parent[rb] = ra as u32;
            }
            (Some(x), None) => {
                Self::check_lower(&self.lower[rb], &x)?;
                self.parent[rb] = ra as u32;
            }
            (None, Some(y)) => {
                Self::check_lower(&self.lower[ra], &y)?;
                self.parent[ra] = rb as u32;
            }
            (None, None) => {
                let moved = std::mem::take(&mut self.lower[rb]);
                for (op, origin) in moved {
                    self.lower[ra].entry(op).or_insert(origin);
                }
                self.parent[rb] = ra as u32;
            }
        }
        Ok(())
    }

    fn check_lower(lower: &BTreeMap<String, O>, row: &EffectRow) -> Result<(), RowError<O>> {
        for (op, origin) in lower {
            if !row.contains(op) {
                return Err(RowError::NotInRow { op: op.clone(), row: row.clone(), origin: origin.clone() });
            }
        }
        Ok(())
    }

    /// Records the deferred constraint `sub ⊆ sup ∪ extra`.
    pub fn subset(&mut self, sub: RowVar, sup: RowVar, extra: EffectRow, origin: O) {
        self.subsets.push(Subset { sub, sup, extra, origin });
    }

    /// Propagates handler constraints to a fixpoint and defaults every
    /// free variable to its lower bound.
    pub fn solve(&mut self) -> Result<(), RowError<O>> {
        loop {
            let mut changed = false;
            for i in 0..self.subsets.len() {
                let c = self.subsets[i].clone();
                let needed = self.current(c.sub).difference(&c.extra);
                let r = self.find(c.sup);
                for op in needed.iter() {
                    match &self.fixed[r] {
                        Some(row) => {
                            if !row.contains(op) {
                                return Err(RowError::Escapes { op: op.clone(), row: row.clone(), origin: c.origin });
                            }
                        }
                        None => {
                            if !self.lower[r].contains_key(op) {
                                self.lower[r].insert(op.clone(), c.origin.clone());
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        for i in 0..self.parent.len() {
            if self.parent[i] as usize == i && self.fixed[i].is_none() {
                self.fixed[i] = Some(self.lower[i].keys().cloned().collect());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(ops: &[&str]) -> EffectRow {
        ops.iter().copied().collect()
    }

    #[test]
    fn flexible_rows_widen_at_joins() {
        let mut s: RowSolver<()> = RowSolver::new();
        let a = s.fresh();
        let b = s.fresh();
        s.require("op", a, ()).unwrap();
        s.unify(a, b).unwrap();
        s.solve().unwrap();
        assert_eq!(s.current(b), row(&["op"]));
    }

    #[test]
    fn fixed_rows_reject_extra_ops() {
        let mut s: RowSolver<&str> = RowSolver::new();
        let a = s.fresh();
        s.require("op", a, "here").unwrap();
        let f = s.fixed(EffectRow::empty());
        match s.unify(a, f) {
            Err(RowError::NotInRow { op, origin, .. }) => {
                assert_eq!(op, "op");
                assert_eq!(origin, "here");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unhandled_ops_propagate_through_handlers() {
        let mut s: RowSolver<()> = RowSolver::new();
        let inner = s.fresh();
        let outer = s.fresh();
        s.require("a", inner, ()).unwrap();
        s.require("b", inner, ()).unwrap();
        s.subset(inner, outer, row(&["a"]), ());
        s.solve().unwrap();
        assert_eq!(s.current(outer), row(&["b"]));
    }

    #[test]
    fn escaping_op_into_fixed_row_fails() {
        let mut s: RowSolver<()> = RowSolver::new();
        let inner = s.fixed(row(&["a", "b"]));
        let outer = s.fixed(EffectRow::empty());
        s.subset(inner, outer, row(&["a"]), ());
        assert!(matches!(s.solve(), Err(RowError::Escapes { op, .. }) if op == "b"));
    }
}
