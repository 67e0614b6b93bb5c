use std::collections::BTreeSet;
use std::fmt;



/// A finite set of operation names. Used both for compile-time rows (Δ)
/// and run-time rows (ξ); the two are distinguished by position only.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EffectRow(BTreeSet<String>);

impl EffectRow {
    pub fn empty() -> Self {
        EffectRow(BTreeSet::new())
    }

    pub fn single(op: impl Into<String>) -> Self {
        let mut set = BTreeSet::new();
        set.insert(op.into());
        EffectRow(set)
    }

    pub fn contains(&self, op: &str) -> bool {
        self.0.contains(op)
    }

    pub fn insert(&mut self, op: impl Into<String>) -> bool {
        self.0.insert(op.into())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }

    pub fn union(&self, other: &EffectRow) -> EffectRow {
        EffectRow(self.0.union(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &EffectRow) -> EffectRow {
        EffectRow(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &EffectRow) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn as_set(&self) -> &BTreeSet<String> {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for EffectRow {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        EffectRow(iter.into_iter().map(Into::into).collect())
    }
}

impl From<BTreeSet<String>> for EffectRow {
    fn from(set: BTreeSet<String>) -> Self {
        EffectRow(set)
    }
}

impl fmt::Display for EffectRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, op) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{op}")?;
        }
        write!(f, "}}")
    }
}
