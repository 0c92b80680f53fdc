//! Action alphabets with a distance table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::Zero;
use thiserror::Error;

use crate::cost::{Cost, Rational};

/// An action name. Ordering is lexicographic on the name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action(Arc<str>);

impl Action {
    pub fn new(name: &str) -> Self {
        Action(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Action names are nonempty runs of `[A-Za-z0-9_]`.
    pub fn is_valid_name(name: &str) -> bool {
        !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Action {
    fn from(s: &str) -> Self {
        Action::new(s)
    }
}

/// One broken metric law.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricViolation {
    #[error("d({0},{0}) = {1} but self-distances must be 0")]
    NonZeroSelf(Action, Cost),
    #[error("d({0},{1}) = 0 for distinct actions")]
    ZeroBetweenDistinct(Action, Action),
    #[error("asymmetric entries: d({0},{1}) = {2} but d({1},{0}) = {3}")]
    Asymmetric(Action, Action, Cost, Cost),
    #[error("triangle inequality fails: d({0},{2}) + d({2},{1}) = {3} < d({0},{1}) = {4}")]
    Triangle(Action, Action, Action, Cost, Cost),
}

/// A finite alphabet with a symmetric distance. Unlisted pairs are at
/// infinite distance.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActionDomain {
    actions: BTreeSet<Action>,
    /// Entries exactly as declared, in declaration direction.
    table: BTreeMap<(Action, Action), Rational>,
}

impl ActionDomain {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a domain from declared entries; the symmetric closure is
    /// implicit in [`ActionDomain::dist`].
    pub fn from_entries<I>(actions: impl IntoIterator<Item = Action>, entries: I) -> Self
    where
        I: IntoIterator<Item = (Action, Action, Rational)>,
    {
        let mut dom = ActionDomain::new();
        for a in actions {
            dom.add_action(a);
        }
        for (a, b, d) in entries {
            dom.set(a, b, d);
        }
        dom
    }

    /// `d(n, m) = |n - m|` over the given integers.
    pub fn usual_on(values: impl IntoIterator<Item = i128>) -> Self {
        let values: Vec<i128> = values.into_iter().collect();
        let mut dom = ActionDomain::new();
        for &v in &values {
            dom.add_action(Action::new(&v.to_string()));
        }
        for (i, &a) in values.iter().enumerate() {
            for &b in &values[i + 1..] {
                dom.set(
                    Action::new(&a.to_string()),
                    Action::new(&b.to_string()),
                    Rational::from_integer((a - b).abs()),
                );
            }
        }
        dom
    }

    pub fn add_action(&mut self, a: Action) {
        self.actions.insert(a);
    }

    pub fn set(&mut self, a: Action, b: Action, d: Rational) {
        self.actions.insert(a.clone());
        self.actions.insert(b.clone());
        self.table.insert((a, b), d);
    }

    pub fn contains(&self, a: &Action) -> bool {
        self.actions.contains(a)
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Declared entries in declaration direction.
    pub fn entries(&self) -> impl Iterator<Item = (&Action, &Action, &Rational)> {
        self.table.iter().map(|((a, b), d)| (a, b, d))
    }

    pub fn dist(&self, a: &Action, b: &Action) -> Cost {
        if a == b {
            if let Some(d) = self.table.get(&(a.clone(), b.clone())) {
                return Cost::Finite(*d);
            }
            return Cost::zero();
        }
        let key = (a.clone(), b.clone());
        if let Some(d) = self.table.get(&key) {
            return Cost::Finite(*d);
        }
        match self.table.get(&(b.clone(), a.clone())) {
            Some(d) => Cost::Finite(*d),
            None => Cost::Infinite,
        }
    }

    /// Checks the three metric laws. Infinite entries take part in the
    /// triangle check with `+` extended to infinity.
    pub fn validate(&self) -> Result<(), Vec<MetricViolation>> {
        let mut out = Vec::new();
        for ((a, b), d) in &self.table {
            if a == b && !d.is_zero() {
                out.push(MetricViolation::NonZeroSelf(a.clone(), Cost::Finite(*d)));
            }
            if a != b && d.is_zero() {
                out.push(MetricViolation::ZeroBetweenDistinct(a.clone(), b.clone()));
            }
            if a < b {
                if let Some(back) = self.table.get(&(b.clone(), a.clone())) {
                    if back != d {
                        out.push(MetricViolation::Asymmetric(
                            a.clone(),
                            b.clone(),
                            Cost::Finite(*d),
                            Cost::Finite(*back),
                        ));
                    }
                }
            }
        }
        let acts: Vec<&Action> = self.actions.iter().collect();
        for (i, a) in acts.iter().enumerate() {
            for b in &acts[i + 1..] {
                let direct = self.dist(a, b);
                for c in &acts {
                    if c == a || c == b {
                        continue;
                    }
                    let via = self.dist(a, c) + self.dist(c, b);
                    if via < direct {
                        out.push(MetricViolation::Triangle(
                            (*a).clone(),
                            (*b).clone(),
                            (*c).clone(),
                            via,
                            direct.clone(),
                        ));
                    }
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> Action {
        Action::new(s)
    }

    #[test]
    fn usual_metric_is_valid() {
        let dom = ActionDomain::usual_on(1..=5);
        assert!(dom.validate().is_ok());
        assert_eq!(dom.dist(&act("1"), &act("5")), Cost::from_integer(4));
        assert_eq!(dom.dist(&act("5"), &act("1")), Cost::from_integer(4));
    }

    #[test]
    fn asymmetric_table_is_reported() {
        let mut dom = ActionDomain::new();
        dom.set(act("a"), act("b"), Rational::from_integer(1));
        dom.set(act("b"), act("a"), Rational::from_integer(2));
        let errs = dom.validate().unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, MetricViolation::Asymmetric(..))));
    }

    #[test]
    fn triangle_violation_names_the_triple() {
        let mut dom = ActionDomain::new();
        dom.set(act("a"), act("b"), Rational::from_integer(1));
        dom.set(act("b"), act("c"), Rational::from_integer(1));
        dom.set(act("a"), act("c"), Rational::from_integer(5));
        let errs = dom.validate().unwrap_err();
        assert!(errs.contains(&MetricViolation::Triangle(
            act("a"),
            act("c"),
            act("b"),
            Cost::from_integer(2),
            Cost::from_integer(5)
        )));
    }

    #[test]
    fn unlisted_pairs_are_infinite() {
        let dom = ActionDomain::from_entries([act("a"), act("b")], []);
        assert_eq!(dom.dist(&act("a"), &act("b")), Cost::Infinite);
        assert_eq!(dom.dist(&act("a"), &act("a")), Cost::zero());
        assert!(dom.validate().is_ok());
    }

    #[test]
    fn zero_between_distinct() {
        let mut dom = ActionDomain::new();
        dom.set(act("a"), act("b"), Rational::zero());
        assert_eq!(
            dom.validate().unwrap_err(),
            vec![MetricViolation::ZeroBetweenDistinct(act("a"), act("b"))]
        );
    }
}
