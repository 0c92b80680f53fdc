//! Finite unordered trees in canonical form.

use std::fmt;

use crate::domain::Action;

/// A finite tree: a multiset of `(action, subtree)` summands.
///
/// Children are always kept sorted, so derived equality is multiset
/// equality and derived ordering is a total order on canonical forms.
/// Duplicated summands are kept: `a + a` and `a` are different trees.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct FiniteTree {
    children: Vec<(Action, FiniteTree)>,
}

impl FiniteTree {
    /// The empty tree `0`.
    pub fn zero() -> Self {
        FiniteTree { children: Vec::new() }
    }

    pub fn from_children(mut children: Vec<(Action, FiniteTree)>) -> Self {
        children.sort();
        FiniteTree { children }
    }

    /// `a.t`
    pub fn prefix(action: Action, tree: FiniteTree) -> Self {
        FiniteTree { children: vec![(action, tree)] }
    }

    /// `a.0`
    pub fn leaf(action: &str) -> Self {
        Self::prefix(Action::new(action), FiniteTree::zero())
    }

    /// `a1.a2...ak.0`
    pub fn chain<'a>(actions: impl IntoIterator<Item = &'a str>) -> Self {
        let actions: Vec<&str> = actions.into_iter().collect();
        actions
            .iter()
            .rev()
            .fold(FiniteTree::zero(), |acc, a| FiniteTree::prefix(Action::new(a), acc))
    }

    /// Depth-one tree with the given labels as summands.
    pub fn flat<'a>(actions: impl IntoIterator<Item = &'a str>) -> Self {
        Self::from_children(
            actions
                .into_iter()
                .map(|a| (Action::new(a), FiniteTree::zero()))
                .collect(),
        )
    }

    pub fn sum(&self, other: &FiniteTree) -> FiniteTree {
        let mut children = self.children.clone();
        children.extend(other.children.iter().cloned());
        FiniteTree::from_children(children)
    }

    pub fn children(&self) -> &[(Action, FiniteTree)] {
        &self.children
    }

    pub fn into_children(self) -> Vec<(Action, FiniteTree)> {
        self.children
    }

    pub fn is_zero(&self) -> bool {
        self.children.is_empty()
    }

    /// First-level width.
    pub fn width1(&self) -> usize {
        self.children.len()
    }

    /// Maximal first-level width over the nodes at levels below `k`.
    pub fn width_k(&self, k: usize) -> usize {
        if k == 0 {
            return 0;
        }
        let below = self
            .children
            .iter()
            .map(|(_, t)| t.width_k(k - 1))
            .max()
            .unwrap_or(0);
        self.width1().max(below)
    }

    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|(_, t)| t.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    /// The k-th cut: every node below level `k` removed.
    pub fn project(&self, k: usize) -> FiniteTree {
        if k == 0 {
            return FiniteTree::zero();
        }
        FiniteTree::from_children(
            self.children
                .iter()
                .map(|(a, t)| (a.clone(), t.project(k - 1)))
                .collect(),
        )
    }

    /// Number of nodes, root included.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(|(_, t)| t.size()).sum::<usize>()
    }

    /// Every action occurring anywhere in the tree.
    pub fn actions(&self, out: &mut Vec<Action>) {
        for (a, t) in &self.children {
            out.push(a.clone());
            t.actions(out);
        }
    }

    /// Index of the first summand equal to `(action, tree)`.
    pub fn position_of(&self, action: &Action, tree: &FiniteTree) -> Option<usize> {
        self.children
            .iter()
            .position(|(a, t)| a == action && t == tree)
    }

    /// Follows a path of child indices.
    pub fn node_at(&self, path: &[usize]) -> Option<&FiniteTree> {
        let mut cur = self;
        for &i in path {
            cur = &cur.children.get(i)?.1;
        }
        Some(cur)
    }

    /// Removes duplicated summands at every node.
    pub fn dedup(&self) -> FiniteTree {
        let mut children: Vec<(Action, FiniteTree)> = self
            .children
            .iter()
            .map(|(a, t)| (a.clone(), t.dedup()))
            .collect();
        children.sort();
        children.dedup();
        FiniteTree { children }
    }

    fn fmt_term(action: &Action, sub: &FiniteTree, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if sub.is_zero() {
            // A bare `0` term would read as the empty tree.
            if action.as_str() == "0" {
                return f.write_str("0.0");
            }
            return write!(f, "{action}");
        }
        write!(f, "{action}.")?;
        if sub.children.len() == 1 {
            let (b, s) = &sub.children[0];
            Self::fmt_term(b, s, f)
        } else {
            write!(f, "({sub})")
        }
    }
}

impl fmt::Display for FiniteTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.children.is_empty() {
            return f.write_str("0");
        }
        for (i, (a, t)) in self.children.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            Self::fmt_term(a, t, f)?;
        }
        Ok(())
    }
}

impl fmt::Debug for FiniteTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}
