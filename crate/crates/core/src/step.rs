//! Operational distance steps over finite trees.
//!
//! A step rewrites the child list of the node reached by `position`, a
//! path of indices into canonical child listings. Its level is
//! `position.len() + 1`, and a relabel at level `l` costs at least
//! `alpha^(l-1) * d(a, b)`.

use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::cost::{format_rational, Alpha, Cost, Rational};
use crate::domain::{Action, ActionDomain};
use crate::tree::FiniteTree;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StepKind {
    /// `t + x  ->  t + x + x`
    Dup { subject: usize },
    /// `t + x + x  ->  t + x`; both indices must name equal summands.
    Drop { first: usize, second: usize },
    /// `t + a.s  ->  t + b.s`
    Relabel { subject: usize, from: Action, to: Action },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub position: Vec<usize>,
    pub kind: StepKind,
    pub cost: Rational,
}

impl Step {
    pub fn dup(position: Vec<usize>, subject: usize) -> Self {
        Step { position, kind: StepKind::Dup { subject }, cost: Rational::zero() }
    }

    pub fn drop(position: Vec<usize>, first: usize, second: usize) -> Self {
        Step { position, kind: StepKind::Drop { first, second }, cost: Rational::zero() }
    }

    pub fn relabel(position: Vec<usize>, subject: usize, from: &str, to: &str, cost: Rational) -> Self {
        Step {
            position,
            kind: StepKind::Relabel { subject, from: Action::new(from), to: Action::new(to) },
            cost,
        }
    }

    pub fn level(&self) -> usize {
        self.position.len() + 1
    }

    /// Cheapest cost this step may declare.
    pub fn minimal_cost(&self, alpha: &Alpha, dom: &ActionDomain) -> Cost {
        match &self.kind {
            StepKind::Dup { .. } | StepKind::Drop { .. } => Cost::zero(),
            StepKind::Relabel { from, to, .. } => dom.dist(from, to).scale(&alpha.level_weight(self.level())),
        }
    }

    fn with_indices(&self, position: Vec<usize>, kind: StepKind) -> Step {
        Step { position, kind, cost: self.cost }
    }
}

fn fmt_path(path: &[usize]) -> String {
    let parts: Vec<String> = path.iter().map(|i| i.to_string()).collect();
    format!("@{}", parts.join("."))
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = fmt_path(&self.position);
        match &self.kind {
            StepKind::Dup { subject } => write!(f, "dup {at} {subject}")?,
            StepKind::Drop { first, second } => write!(f, "drop {at} {first} {second}")?,
            StepKind::Relabel { subject, from, to } => {
                return write!(f, "relabel {at} {subject} {from} {to} {}", format_rational(&self.cost))
            }
        }
        if !self.cost.is_zero() {
            write!(f, " {}", format_rational(&self.cost))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("position {0:?} does not resolve in the tree")]
    BadPosition(Vec<usize>),
    #[error("summand index {index} out of range (node has {width} summands)")]
    BadSubject { index: usize, width: usize },
    #[error("summands {0} and {1} differ, cannot merge them")]
    IdemMismatch(usize, usize),
    #[error("a summand cannot be merged with itself (index {0})")]
    SameSummand(usize),
    #[error("summand is labelled {found}, step expects {expected}")]
    ActionMismatch { expected: Action, found: Action },
    #[error("action {0} is not in the action domain")]
    UnknownAction(Action),
    #[error("declared cost {declared} is below the minimal cost {minimal}")]
    CostTooLow { declared: Cost, minimal: Cost },
}

/// Where a rewrite landed in the result tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Landing {
    pub tree: FiniteTree,
    /// Path to the rewritten node in the result tree.
    pub position: Vec<usize>,
    /// Indices of the affected summands in the rewritten node: both copies
    /// after a dup, the survivor after a drop, the relabelled summand.
    pub subjects: Vec<usize>,
}

fn occurrences(children: &[(Action, FiniteTree)], item: &(Action, FiniteTree)) -> Vec<usize> {
    children
        .iter()
        .enumerate()
        .filter(|(_, c)| *c == item)
        .map(|(i, _)| i)
        .collect()
}

fn rewrite_children(
    children: &[(Action, FiniteTree)],
    kind: &StepKind,
) -> Result<(Vec<(Action, FiniteTree)>, Vec<usize>), StepError> {
    let width = children.len();
    let check = |i: usize| {
        if i < width {
            Ok(())
        } else {
            Err(StepError::BadSubject { index: i, width })
        }
    };
    let mut out = children.to_vec();
    let item = match kind {
        StepKind::Dup { subject } => {
            check(*subject)?;
            let item = children[*subject].clone();
            out.push(item.clone());
            item
        }
        StepKind::Drop { first, second } => {
            check(*first)?;
            check(*second)?;
            if first == second {
                return Err(StepError::SameSummand(*first));
            }
            if children[*first] != children[*second] {
                return Err(StepError::IdemMismatch(*first, *second));
            }
            out.remove(*second);
            children[*first].clone()
        }
        StepKind::Relabel { subject, from, to } => {
            check(*subject)?;
            if &children[*subject].0 != from {
                return Err(StepError::ActionMismatch {
                    expected: from.clone(),
                    found: children[*subject].0.clone(),
                });
            }
            out[*subject].0 = to.clone();
            out[*subject].clone()
        }
    };
    out.sort();
    let mut subjects = occurrences(&out, &item);
    subjects.truncate(if matches!(kind, StepKind::Dup { .. }) { 2 } else { 1 });
    Ok((out, subjects))
}

fn rewrite(tree: &FiniteTree, path: &[usize], kind: &StepKind, full: &[usize]) -> Result<Landing, StepError> {
    match path.split_first() {
        None => {
            let (children, subjects) = rewrite_children(tree.children(), kind)?;
            Ok(Landing { tree: FiniteTree::from_children(children), position: Vec::new(), subjects })
        }
        Some((&i, rest)) => {
            let (a, sub) = tree
                .children()
                .get(i)
                .ok_or_else(|| StepError::BadPosition(full.to_vec()))?;
            let inner = rewrite(sub, rest, kind, full)?;
            let mut children = tree.children().to_vec();
            children[i] = (a.clone(), inner.tree);
            let new_child = children[i].clone();
            let result = FiniteTree::from_children(children);
            let idx = result.position_of(&new_child.0, &new_child.1).expect("rewritten child present");
            let mut position = vec![idx];
            position.extend(inner.position);
            Ok(Landing { tree: result, position, subjects: inner.subjects })
        }
    }
}

/// Applies the step structurally, without cost or alphabet checks.
pub fn apply_structural(tree: &FiniteTree, step: &Step) -> Result<Landing, StepError> {
    rewrite(tree, &step.position, &step.kind, &step.position)
}

/// Applies one distance step, checking the alphabet and the declared cost.
pub fn apply_step(tree: &FiniteTree, step: &Step, alpha: &Alpha, dom: &ActionDomain) -> Result<FiniteTree, StepError> {
    check_step(step, alpha, dom)?;
    Ok(apply_structural(tree, step)?.tree)
}

fn check_step(step: &Step, alpha: &Alpha, dom: &ActionDomain) -> Result<(), StepError> {
    if let StepKind::Relabel { from, to, .. } = &step.kind {
        for a in [from, to] {
            if !dom.contains(a) {
                return Err(StepError::UnknownAction(a.clone()));
            }
        }
    }
    let minimal = step.minimal_cost(alpha, dom);
    let declared = Cost::Finite(step.cost);
    if declared < minimal {
        return Err(StepError::CostTooLow { declared, minimal });
    }
    Ok(())
}

/// A source tree and a list of steps; it proves
/// `source ~>_{alpha, total} target`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSequence {
    pub alpha: Alpha,
    pub source: FiniteTree,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {index} ({step}): {error}")]
pub struct SequenceError {
    pub index: usize,
    pub step: String,
    pub error: StepError,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("first sequence ends at {left} but second starts at {right}")]
    EndpointMismatch { left: FiniteTree, right: FiniteTree },
    #[error("discount factors differ: {0} vs {1}")]
    AlphaMismatch(Alpha, Alpha),
    #[error(transparent)]
    Invalid(#[from] SequenceError),
}

/// Outcome of replaying a valid sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replay {
    pub target: FiniteTree,
    /// Sum of declared costs.
    pub total: Rational,
    /// Sum of minimal admissible costs.
    pub minimal_total: Rational,
}

impl StepSequence {
    pub fn new(alpha: Alpha, source: FiniteTree, steps: Vec<Step>) -> Self {
        StepSequence { alpha, source, steps }
    }

    pub fn empty(alpha: Alpha, source: FiniteTree) -> Self {
        StepSequence { alpha, source, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_cost(&self) -> Rational {
        self.steps.iter().map(|s| s.cost).sum()
    }

    pub fn max_level(&self) -> usize {
        self.steps.iter().map(Step::level).max().unwrap_or(0)
    }

    fn fail(&self, index: usize, error: StepError) -> SequenceError {
        SequenceError { index, step: self.steps[index].to_string(), error }
    }

    /// Every intermediate tree, source first, target last. Structural
    /// replay only.
    pub fn trajectory(&self) -> Result<Vec<Landing>, SequenceError> {
        let mut out = Vec::with_capacity(self.steps.len());
        let mut cur = self.source.clone();
        for (i, step) in self.steps.iter().enumerate() {
            let landing = apply_structural(&cur, step).map_err(|e| self.fail(i, e))?;
            cur = landing.tree.clone();
            out.push(landing);
        }
        Ok(out)
    }

    /// Structural target; no cost checks.
    pub fn target(&self) -> Result<FiniteTree, SequenceError> {
        Ok(self
            .trajectory()?
            .pop()
            .map(|l| l.tree)
            .unwrap_or_else(|| self.source.clone()))
    }

    /// Largest first-k-levels width among all trees along the sequence.
    pub fn max_width_k(&self, k: usize) -> Result<usize, SequenceError> {
        let traj = self.trajectory()?;
        Ok(traj
            .iter()
            .map(|l| l.tree.width_k(k))
            .chain(std::iter::once(self.source.width_k(k)))
            .max()
            .unwrap_or(0))
    }

    /// Rewrites every index to the first summand equal to the one it
    /// names (first two for a drop). Equal summands are interchangeable,
    /// so the trajectory is unchanged.
    pub fn normalize(&self) -> Result<StepSequence, SequenceError> {
        remap(self, None)
    }
}

/// Replays every step with full checks.
pub fn validate_sequence(seq: &StepSequence, dom: &ActionDomain) -> Result<Replay, SequenceError> {
    let mut cur = seq.source.clone();
    let mut total = Rational::zero();
    let mut minimal_total = Rational::zero();
    for (i, step) in seq.steps.iter().enumerate() {
        check_step(step, &seq.alpha, dom).map_err(|e| seq.fail(i, e))?;
        cur = apply_structural(&cur, step).map_err(|e| seq.fail(i, e))?.tree;
        total += step.cost;
        if let Cost::Finite(m) = step.minimal_cost(&seq.alpha, dom) {
            minimal_total += m;
        }
    }
    Ok(Replay { target: cur, total, minimal_total })
}

/// Maps a full-tree child index to an index in the cut tree.
fn map_index(full: &[(Action, FiniteTree)], cut: &[(Action, FiniteTree)], i: usize, depth: Option<usize>) -> usize {
    let (a, t) = &full[i];
    let projected = match depth {
        Some(d) => t.project(d),
        None => t.clone(),
    };
    cut.iter()
        .position(|(b, u)| b == a && *u == projected)
        .expect("projection of a summand occurs in the projected node")
}

/// Shared index bookkeeping for `normalize` (`k = None`) and projection.
fn remap(seq: &StepSequence, k: Option<usize>) -> Result<StepSequence, SequenceError> {
    let cut = |t: &FiniteTree| match k {
        Some(k) => t.project(k),
        None => t.clone(),
    };
    let mut full = seq.source.clone();
    let mut steps = Vec::new();
    for (n, step) in seq.steps.iter().enumerate() {
        let next = apply_structural(&full, step).map_err(|e| seq.fail(n, e))?.tree;
        if k.map_or(true, |k| step.level() <= k) {
            let projected_tree = cut(&full);
            let mut node_full = &full;
            let mut node_cut = &projected_tree;
            let mut position = Vec::new();
            for (depth, &i) in step.position.iter().enumerate() {
                let rest = k.map(|k| k - depth - 1);
                let j = map_index(node_full.children(), node_cut.children(), i, rest);
                position.push(j);
                node_full = &node_full.children()[i].1;
                node_cut = &node_cut.children()[j].1;
            }
            let rest = k.map(|k| k - step.position.len() - 1);
            let fc = node_full.children();
            let cc = node_cut.children();
            let kind = match &step.kind {
                StepKind::Dup { subject } => StepKind::Dup { subject: map_index(fc, cc, *subject, rest) },
                StepKind::Relabel { subject, from, to } => StepKind::Relabel {
                    subject: map_index(fc, cc, *subject, rest),
                    from: from.clone(),
                    to: to.clone(),
                },
                StepKind::Drop { first, .. } => {
                    let f = map_index(fc, cc, *first, rest);
                    let s = (f + 1..cc.len())
                        .find(|&x| cc[x] == cc[f])
                        .expect("merged summands stay equal under projection");
                    StepKind::Drop { first: f, second: s }
                }
            };
            steps.push(step.with_indices(position, kind));
        }
        full = next;
    }
    Ok(StepSequence { alpha: seq.alpha.clone(), source: cut(&seq.source), steps })
}

/// Keeps the steps of level at most `k`, re-indexed against the cut
/// trees. The result replays from `pi_k(source)` to `pi_k(target)`.
pub fn project_sequence(seq: &StepSequence, k: usize) -> Result<StepSequence, SequenceError> {
    remap(seq, Some(k))
}

/// Concatenation; totals add.
pub fn compose(first: &StepSequence, second: &StepSequence) -> Result<StepSequence, ComposeError> {
    if first.alpha != second.alpha {
        return Err(ComposeError::AlphaMismatch(first.alpha.clone(), second.alpha.clone()));
    }
    let end = first.target()?;
    if end != second.source {
        return Err(ComposeError::EndpointMismatch { left: end, right: second.source.clone() });
    }
    let mut steps = first.steps.clone();
    steps.extend(second.steps.iter().cloned());
    Ok(StepSequence { alpha: first.alpha.clone(), source: first.source.clone(), steps })
}

/// Runs the sequence backwards at equal cost: dup and drop swap,
/// relabels invert. The result is normalized.
pub fn reverse(seq: &StepSequence) -> Result<StepSequence, SequenceError> {
    let traj = seq.trajectory()?;
    let target = traj.last().map(|l| l.tree.clone()).unwrap_or_else(|| seq.source.clone());
    let mut steps = Vec::with_capacity(seq.steps.len());
    for (step, landing) in seq.steps.iter().zip(&traj).rev() {
        let kind = match &step.kind {
            StepKind::Dup { .. } => StepKind::Drop { first: landing.subjects[0], second: landing.subjects[1] },
            StepKind::Drop { .. } => StepKind::Dup { subject: landing.subjects[0] },
            StepKind::Relabel { from, to, .. } => StepKind::Relabel {
                subject: landing.subjects[0],
                from: to.clone(),
                to: from.clone(),
            },
        };
        steps.push(step.with_indices(landing.position.clone(), kind));
    }
    StepSequence { alpha: seq.alpha.clone(), source: target, steps }.normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> Action {
        Action::new(s)
    }

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    fn abcd() -> ActionDomain {
        let mut dom = ActionDomain::new();
        dom.set(act("a"), act("b"), r(4, 1));
        dom.set(act("c"), act("d"), r(1, 1));
        dom
    }

    #[test]
    fn relabel_one_copy_at_level_one() {
        let aa = FiniteTree::flat(["a", "a"]);
        let s = Step::relabel(vec![], 0, "a", "b", r(4, 1));
        let out = apply_step(&aa, &s, &Alpha::half(), &abcd()).unwrap();
        assert_eq!(out, FiniteTree::flat(["a", "b"]));
    }

    #[test]
    fn drop_is_free() {
        let aa = FiniteTree::flat(["a", "a"]);
        let out = apply_step(&aa, &Step::drop(vec![], 0, 1), &Alpha::half(), &abcd()).unwrap();
        assert_eq!(out, FiniteTree::leaf("a"));
    }

    #[test]
    fn level_two_relabel_is_discounted() {
        let t = FiniteTree::chain(["a", "d"]);
        let s = Step::relabel(vec![0], 0, "d", "c", r(1, 2));
        assert_eq!(s.minimal_cost(&Alpha::half(), &abcd()), Cost::new(1, 2));
        let out = apply_step(&t, &s, &Alpha::half(), &abcd()).unwrap();
        assert_eq!(out, FiniteTree::chain(["a", "c"]));
        let cheap = Step::relabel(vec![0], 0, "d", "c", r(1, 4));
        assert!(matches!(
            apply_step(&t, &cheap, &Alpha::half(), &abcd()),
            Err(StepError::CostTooLow { .. })
        ));
    }

    #[test]
    fn error_paths() {
        let dom = abcd();
        let al = Alpha::one();
        let t = FiniteTree::flat(["a", "b"]);
        assert!(matches!(
            apply_step(&t, &Step::drop(vec![], 0, 1), &al, &dom),
            Err(StepError::IdemMismatch(0, 1))
        ));
        assert!(matches!(
            apply_step(&t, &Step::dup(vec![3], 0), &al, &dom),
            Err(StepError::BadPosition(_))
        ));
        assert!(matches!(
            apply_step(&t, &Step::dup(vec![], 7), &al, &dom),
            Err(StepError::BadSubject { index: 7, width: 2 })
        ));
        assert!(matches!(
            apply_step(&t, &Step::relabel(vec![], 0, "a", "z", r(1, 1)), &al, &dom),
            Err(StepError::UnknownAction(_))
        ));
        assert!(matches!(
            apply_step(&t, &Step::relabel(vec![], 0, "b", "a", r(4, 1)), &al, &dom),
            Err(StepError::ActionMismatch { .. })
        ));
        // a and c are at infinite distance
        assert!(matches!(
            apply_step(&t, &Step::relabel(vec![], 0, "a", "c", r(100, 1)), &al, &dom),
            Err(StepError::CostTooLow { minimal: Cost::Infinite, .. })
        ));
    }

    #[test]
    fn empty_sequence_replays_to_source() {
        let t = FiniteTree::flat(["a"]);
        let seq = StepSequence::empty(Alpha::one(), t.clone());
        let rep = validate_sequence(&seq, &abcd()).unwrap();
        assert_eq!(rep.target, t);
        assert_eq!(rep.total, Rational::zero());
    }

    fn pi1_sequence() -> StepSequence {
        StepSequence::new(
            Alpha::half(),
            FiniteTree::flat(["a", "a"]),
            vec![
                Step::drop(vec![], 0, 1),
                Step::relabel(vec![], 0, "a", "b", r(4, 1)),
                Step::dup(vec![], 0),
            ],
        )
    }

    #[test]
    fn reverse_of_pi1() {
        let rev = reverse(&pi1_sequence()).unwrap();
        let rep = validate_sequence(&rev, &abcd()).unwrap();
        assert_eq!(rev.source, FiniteTree::flat(["b", "b"]));
        assert_eq!(rep.target, FiniteTree::flat(["a", "a"]));
        assert_eq!(rep.total, r(4, 1));
        assert_eq!(reverse(&rev).unwrap(), pi1_sequence());
    }

    #[test]
    fn compose_adds_totals_and_checks_endpoints() {
        let s = pi1_sequence();
        let back = reverse(&s).unwrap();
        let both = compose(&s, &back).unwrap();
        assert_eq!(both.total_cost(), r(8, 1));
        assert!(matches!(compose(&s, &s), Err(ComposeError::EndpointMismatch { .. })));
    }

    #[test]
    fn projection_keeps_low_levels() {
        let seq = StepSequence::new(
            Alpha::half(),
            FiniteTree::chain(["a", "c"]).sum(&FiniteTree::chain(["a", "d"])),
            vec![
                Step::relabel(vec![1], 0, "d", "c", r(1, 2)),
                Step::drop(vec![], 0, 1),
                Step::relabel(vec![], 0, "a", "b", r(4, 1)),
                Step::dup(vec![], 0),
                Step::relabel(vec![1], 0, "c", "d", r(1, 2)),
            ],
        );
        let dom = abcd();
        assert_eq!(validate_sequence(&seq, &dom).unwrap().total, r(5, 1));
        let p1 = project_sequence(&seq, 1).unwrap();
        assert_eq!(p1, pi1_sequence());
        assert_eq!(project_sequence(&seq, 2).unwrap(), seq.normalize().unwrap());
    }
}
