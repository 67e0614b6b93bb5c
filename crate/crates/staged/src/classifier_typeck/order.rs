use std::collections::BTreeSet;

/// Identifier of a classifier. `0` is the least classifier.
pub type ClassId = u32;

/// The least classifier.
pub const BOTTOM: ClassId = 0;

/// Declared classifiers and `γ ⊑ γ′` facts, queried up to reflexive and
/// transitive closure.
#[derive(Clone, Debug)]
pub struct ClassifierOrder {
    /// Direct upper neighbours of each classifier.
    above: Vec<Vec<ClassId>>,
    /// The classifier each fresh one was created under, if any.
    parent: Vec<Option<ClassId>>,
}

impl Default for ClassifierOrder {
    fn default() -> Self {
        ClassifierOrder { above: vec![Vec::new()], parent: vec![None] }
    }
}

impl ClassifierOrder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.above.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_declared(&self, g: ClassId) -> bool {
        (g as usize) < self.above.len()
    }

    /// Declares a new classifier with no facts about it.
    pub fn declare(&mut self) -> ClassId {
        self.above.push(Vec::new());
        self.parent.push(None);
        self.above.len() as ClassId - 1
    }

    /// Declares a new classifier `g′` together with `g ⊑ g′`.
    pub fn fresh_above(&mut self, g: ClassId) -> ClassId {
        let id = self.declare();
        self.relate(g, id);
        self.parent[id as usize] = Some(g);
        id
    }

    /// Adds the fact `lo ⊑ hi`.
    pub fn relate(&mut self, lo: ClassId, hi: ClassId) {
        assert!(self.is_declared(lo) && self.is_declared(hi), "undeclared classifier");
        if !self.above[lo as usize].contains(&hi) {
            self.above[lo as usize].push(hi);
        }
    }

    /// `lo ⊑ hi` in the reflexive-transitive closure of the declared facts.
    pub fn entails(&self, lo: ClassId, hi: ClassId) -> bool {
        assert!(self.is_declared(lo) && self.is_declared(hi), "undeclared classifier");
        let mut seen = BTreeSet::new();
        let mut todo = vec![lo];
        while let Some(g) = todo.pop() {
            if g == hi {
                return true;
            }
            if seen.insert(g) {
                todo.extend(self.above[g as usize].iter().copied());
            }
        }
        false
    }

    /// The creation chain of `g`, starting from its outermost ancestor and ending at `g`.
    pub fn chain(&self, g: ClassId) -> Vec<ClassId> {
        let mut out = vec![g];
        let mut cur = g;
        while let Some(p) = self.parent[cur as usize] {
            out.push(p);
            cur = p;
        }
        if *out.last().unwrap() != BOTTOM {
            out.push(BOTTOM);
        }
        out.dedup();
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reflexive_and_transitive() {
        let mut o = ClassifierOrder::new();
        let g1 = o.fresh_above(BOTTOM);
        let g2 = o.fresh_above(g1);
        assert!(o.entails(g1, g1));
        assert!(o.entails(BOTTOM, g2));
        assert!(!o.entails(g2, g1));
        assert_eq!(o.chain(g2), vec![BOTTOM, g1, g2]);
    }

    #[test]
    fn siblings_are_unrelated() {
        let mut o = ClassifierOrder::new();
        let a = o.fresh_above(BOTTOM);
        let b = o.fresh_above(BOTTOM);
        assert!(!o.entails(a, b) && !o.entails(b, a));
    }

    proptest! {
        #[test]
        fn tree_orders_match_ancestry(parents in proptest::collection::vec(0usize..100, 1..30)) {
            let mut o = ClassifierOrder::new();
            let mut ids = vec![BOTTOM];
            for p in parents {
                let parent = ids[p % ids.len()];
                ids.push(o.fresh_above(parent));
            }
            for &a in &ids {
                prop_assert!(o.entails(BOTTOM, a));
                for &b in &ids {
                    prop_assert_eq!(o.entails(a, b), o.chain(b).contains(&a));
                }
            }
        }
    }
}
