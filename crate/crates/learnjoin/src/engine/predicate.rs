use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use super::CostClock;
use crate::storage::{RelationStore, Tuple};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredicateError {
    #[error("edit-distance predicate needs string keys, relation `{0}` has tuples without one")]
    MissingSkey(String),
}

/// User-supplied match test.
pub type MatchFn = Arc<dyn Fn(&Tuple, &Tuple) -> bool + Send + Sync>;

/// Black-box join condition.
#[derive(Clone)]
pub enum JoinPredicate {
    KeyEquality,
    EditDistanceLe1,
    Custom(MatchFn),
}

impl fmt::Debug for JoinPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JoinPredicate::KeyEquality => f.write_str("KeyEquality"),
            JoinPredicate::EditDistanceLe1 => f.write_str("EditDistanceLe1"),
            JoinPredicate::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl JoinPredicate {
    /// Checks once that both relations carry the fields this predicate reads.
    pub fn validate(&self, r: &RelationStore, s: &RelationStore) -> Result<(), PredicateError> {
        if let JoinPredicate::EditDistanceLe1 = self {
            for rel in [r, s] {
                if !rel.has_skeys() {
                    return Err(PredicateError::MissingSkey(rel.name.clone()));
                }
            }
        }
        Ok(())
    }

    /// Uncharged test; tuples without an skey never match under the edit predicate.
    #[inline]
    pub fn matches(&self, r: &Tuple, s: &Tuple) -> bool {
        match self {
            JoinPredicate::KeyEquality => r.key == s.key,
            JoinPredicate::EditDistanceLe1 => match (&r.skey, &s.skey) {
                (Some(a), Some(b)) => within_one_edit(a.as_bytes(), b.as_bytes()),
                _ => false,
            },
            JoinPredicate::Custom(f) => f(r, s),
        }
    }

    /// Charged test of one tuple pair.
    pub fn evaluate(&self, r: &Tuple, s: &Tuple, clock: &mut CostClock) -> Result<bool, PredicateError> {
        clock.probes += 1;
        if let JoinPredicate::EditDistanceLe1 = self {
            if r.skey.is_none() || s.skey.is_none() {
                return Err(PredicateError::MissingSkey(String::from("tuple")));
            }
        }
        Ok(self.matches(r, s))
    }
}

/// Levenshtein distance ≤ 1 in linear time.
pub fn within_one_edit(a: &[u8], b: &[u8]) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if long.len() - short.len() > 1 {
        return false;
    }
    let prefix = short.iter().zip(long).take_while(|(x, y)| x == y).count();
    if short.len() == long.len() {
        // at most one substitution
        short[prefix..].iter().zip(&long[prefix..]).filter(|(x, y)| x != y).count() <= 1
    } else {
        // one insertion into `short` at `prefix`
        short[prefix..] == long[prefix + 1..]
    }
}
