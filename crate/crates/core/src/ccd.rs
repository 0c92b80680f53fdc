//! Coinductive distance certificates.
//!
//! A certificate is a family of `(left, right, bound)` triples over
//! regular trees. Each triple carries a finite witness of first-level
//! steps and coinductive steps; a coinductive step swaps one summand's
//! subtree for the other side of a cited triple at cost `alpha * bound`.

use std::collections::HashMap;
use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::cost::{format_rational, Alpha, Cost, Rational};
use crate::domain::{Action, ActionDomain};
use crate::lts::{tree_equal, RegularTree};
use crate::step::{apply_structural, Step, StepKind, StepSequence};
use crate::tree::FiniteTree;

#[derive(Debug, Clone)]
pub struct DistanceTriple {
    pub left: RegularTree,
    pub right: RegularTree,
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoStepKind {
    Dup { subject: usize },
    Drop { first: usize, second: usize },
    Relabel { subject: usize, from: Action, to: Action },
    /// Replace the subtree under `subject` using triple `triple`.
    Coind { subject: usize, triple: usize },
}

/// A first-level or coinductive step. Indices refer to the canonical
/// listing of the current tree (see [`RegularTree::listing`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoStep {
    pub kind: CoStepKind,
    pub cost: Rational,
}

impl CoStep {
    pub fn dup(subject: usize) -> Self {
        CoStep { kind: CoStepKind::Dup { subject }, cost: Rational::zero() }
    }

    pub fn drop(first: usize, second: usize) -> Self {
        CoStep { kind: CoStepKind::Drop { first, second }, cost: Rational::zero() }
    }

    pub fn relabel(subject: usize, from: &str, to: &str, cost: Rational) -> Self {
        CoStep {
            kind: CoStepKind::Relabel { subject, from: Action::new(from), to: Action::new(to) },
            cost,
        }
    }

    pub fn coind(subject: usize, triple: usize, cost: Rational) -> Self {
        CoStep { kind: CoStepKind::Coind { subject, triple }, cost }
    }
}

impl fmt::Display for CoStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = format_rational(&self.cost);
        match &self.kind {
            CoStepKind::Dup { subject } => write!(f, "dup {subject}")?,
            CoStepKind::Drop { first, second } => write!(f, "drop {first} {second}")?,
            CoStepKind::Relabel { subject, from, to } => return write!(f, "relabel {subject} {from} {to} {c}"),
            CoStepKind::Coind { subject, triple } => return write!(f, "coind {subject} {triple} {c}"),
        }
        if !self.cost.is_zero() {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CcdCertificate {
    pub alpha: Alpha,
    pub domain: ActionDomain,
    pub triples: Vec<DistanceTriple>,
    /// One witness per triple, same order.
    pub witnesses: Vec<Vec<CoStep>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CcdFault {
    #[error("summand index {index} out of range (node has {width} summands)")]
    BadSubject { index: usize, width: usize },
    #[error("a summand cannot be merged with itself (index {0})")]
    SameSummand(usize),
    #[error("summands {0} and {1} differ, cannot merge them")]
    IdemMismatch(usize, usize),
    #[error("summand is labelled {found}, step expects {expected}")]
    ActionMismatch { expected: Action, found: Action },
    #[error("action {0} is not in the action domain")]
    UnknownAction(Action),
    #[error("declared cost {declared} is below the minimal cost {minimal}")]
    CostTooLow { declared: Cost, minimal: Cost },
    #[error("no triple with index {0}")]
    UnknownTriple(usize),
    #[error("subtree under the subject is not the left side of triple {0}")]
    SubtreeMismatch(usize),
    #[error("witness does not end at the right side of the triple")]
    EndpointMismatch,
    #[error("witness costs {total} but the bound is {bound}")]
    BudgetExceeded { total: Rational, bound: Rational },
    #[error("negative bound {0}")]
    NegativeBound(Rational),
    #[error("certificate has {triples} triples but {witnesses} witnesses")]
    WitnessCount { triples: usize, witnesses: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct CcdError {
    pub triple: usize,
    pub step: Option<usize>,
    pub fault: CcdFault,
}

impl fmt::Display for CcdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(s) => write!(f, "triple {}, step {}: {}", self.triple, s, self.fault),
            None => write!(f, "triple {}: {}", self.triple, self.fault),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnfoldError {
    #[error("triple {0} involves an infinite tree")]
    InfiniteTree(usize),
    #[error("citations starting at triple {0} form a cycle")]
    CyclicCitation(usize),
    #[error("no triple with index {0}")]
    UnknownTriple(usize),
    #[error(transparent)]
    Invalid(#[from] CcdError),
}

/// Index of a summand equal to `(action, tree)` in a listing.
pub fn listing_index(listing: &[(Action, RegularTree)], action: &Action, tree: &RegularTree) -> Option<usize> {
    listing.iter().position(|(a, t)| a == action && tree_equal(t, tree))
}

impl CcdCertificate {
    pub fn new(alpha: Alpha, domain: ActionDomain) -> Self {
        CcdCertificate { alpha, domain, triples: Vec::new(), witnesses: Vec::new() }
    }

    /// Appends a triple and returns its index.
    pub fn push(&mut self, triple: DistanceTriple, witness: Vec<CoStep>) -> usize {
        self.triples.push(triple);
        self.witnesses.push(witness);
        self.triples.len() - 1
    }

    fn check_cost(&self, declared: Rational, minimal: Cost) -> Result<(), CcdFault> {
        let declared = Cost::Finite(declared);
        if declared < minimal {
            return Err(CcdFault::CostTooLow { declared, minimal });
        }
        Ok(())
    }

    /// Applies one co-step and returns the new tree.
    pub fn apply_costep(&self, tree: &RegularTree, step: &CoStep) -> Result<RegularTree, CcdFault> {
        let mut kids = tree.listing();
        let width = kids.len();
        let check = |i: usize| {
            if i < width {
                Ok(())
            } else {
                Err(CcdFault::BadSubject { index: i, width })
            }
        };
        match &step.kind {
            CoStepKind::Dup { subject } => {
                check(*subject)?;
                self.check_cost(step.cost, Cost::zero())?;
                let item = kids[*subject].clone();
                kids.push(item);
            }
            CoStepKind::Drop { first, second } => {
                check(*first)?;
                check(*second)?;
                self.check_cost(step.cost, Cost::zero())?;
                if first == second {
                    return Err(CcdFault::SameSummand(*first));
                }
                let (a, s) = &kids[*first];
                let (b, u) = &kids[*second];
                if a != b || !tree_equal(s, u) {
                    return Err(CcdFault::IdemMismatch(*first, *second));
                }
                kids.remove(*second);
            }
            CoStepKind::Relabel { subject, from, to } => {
                check(*subject)?;
                for x in [from, to] {
                    if !self.domain.contains(x) {
                        return Err(CcdFault::UnknownAction(x.clone()));
                    }
                }
                if &kids[*subject].0 != from {
                    return Err(CcdFault::ActionMismatch { expected: from.clone(), found: kids[*subject].0.clone() });
                }
                self.check_cost(step.cost, self.domain.dist(from, to))?;
                kids[*subject].0 = to.clone();
            }
            CoStepKind::Coind { subject, triple } => {
                check(*subject)?;
                let cited = self.triples.get(*triple).ok_or(CcdFault::UnknownTriple(*triple))?;
                self.check_cost(step.cost, Cost::Finite(cited.bound * self.alpha.value()))?;
                if !tree_equal(&kids[*subject].1, &cited.left) {
                    return Err(CcdFault::SubtreeMismatch(*triple));
                }
                kids[*subject].1 = cited.right.clone();
            }
        }
        Ok(RegularTree::from_children(&kids))
    }

    /// Checks the witness of one triple.
    pub fn verify_triple(&self, index: usize) -> Result<(), CcdError> {
        let err = |step: Option<usize>, fault| CcdError { triple: index, step, fault };
        let triple = &self.triples[index];
        if triple.bound < Rational::zero() {
            return Err(err(None, CcdFault::NegativeBound(triple.bound)));
        }
        let mut cur = triple.left.clone();
        let mut total = Rational::zero();
        for (i, step) in self.witnesses[index].iter().enumerate() {
            cur = self.apply_costep(&cur, step).map_err(|f| err(Some(i), f))?;
            total += step.cost;
        }
        if !tree_equal(&cur, &triple.right) {
            return Err(err(None, CcdFault::EndpointMismatch));
        }
        if total > triple.bound {
            return Err(err(None, CcdFault::BudgetExceeded { total, bound: triple.bound }));
        }
        Ok(())
    }

    /// Sum of declared costs in a triple's witness.
    pub fn witness_total(&self, index: usize) -> Rational {
        self.witnesses[index].iter().map(|s| s.cost).sum()
    }
}

/// Checks every triple; reports one error per failing triple.
pub fn verify_ccd(cert: &CcdCertificate) -> Result<(), Vec<CcdError>> {
    if cert.triples.len() != cert.witnesses.len() {
        return Err(vec![CcdError {
            triple: 0,
            step: None,
            fault: CcdFault::WitnessCount { triples: cert.triples.len(), witnesses: cert.witnesses.len() },
        }]);
    }
    let errors: Vec<CcdError> = (0..cert.triples.len()).filter_map(|i| cert.verify_triple(i).err()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Expands a certificate over finite trees into an operational sequence
/// from the triple's left side to its right side. Coinductive steps are
/// replaced by the cited witness, one level down and scaled by alpha.
pub fn unfold_certificate(cert: &CcdCertificate, index: usize) -> Result<StepSequence, UnfoldError> {
    if index >= cert.triples.len() {
        return Err(UnfoldError::UnknownTriple(index));
    }
    let mut memo = HashMap::new();
    let mut stack = Vec::new();
    let steps = unfold_rec(cert, index, &mut memo, &mut stack)?;
    let source = cert.triples[index].left.to_finite().ok_or(UnfoldError::InfiniteTree(index))?;
    Ok(StepSequence::new(cert.alpha.clone(), source, steps))
}

fn unfold_rec(
    cert: &CcdCertificate,
    index: usize,
    memo: &mut HashMap<usize, Vec<Step>>,
    stack: &mut Vec<usize>,
) -> Result<Vec<Step>, UnfoldError> {
    if let Some(s) = memo.get(&index) {
        return Ok(s.clone());
    }
    if stack.contains(&index) {
        return Err(UnfoldError::CyclicCitation(index));
    }
    let triple = cert.triples.get(index).ok_or(UnfoldError::UnknownTriple(index))?;
    let mut cur = triple.left.to_finite().ok_or(UnfoldError::InfiniteTree(index))?;
    if !triple.right.is_finite() {
        return Err(UnfoldError::InfiniteTree(index));
    }
    cert.verify_triple(index)?;
    stack.push(index);
    let alpha = cert.alpha.value();
    let mut out = Vec::new();
    // Finite listings coincide with sorted child lists, so indices carry over.
    for step in &cert.witnesses[index] {
        let top = match &step.kind {
            CoStepKind::Dup { subject } => Some(StepKind::Dup { subject: *subject }),
            CoStepKind::Drop { first, second } => Some(StepKind::Drop { first: *first, second: *second }),
            CoStepKind::Relabel { subject, from, to } => {
                Some(StepKind::Relabel { subject: *subject, from: from.clone(), to: to.clone() })
            }
            CoStepKind::Coind { .. } => None,
        };
        if let Some(kind) = top {
            let s = Step { position: Vec::new(), kind, cost: step.cost };
            cur = apply_structural(&cur, &s).expect("verified step applies").tree;
            out.push(s);
            continue;
        }
        let CoStepKind::Coind { subject, triple: cited } = step.kind else { unreachable!() };
        let inner = unfold_rec(cert, cited, memo, stack)?;
        let mut slot = subject;
        for s in inner {
            let mut position = vec![slot];
            position.extend(s.position.iter().copied());
            let lifted = Step { position, kind: s.kind.clone(), cost: s.cost * alpha };
            let landing = apply_structural(&cur, &lifted).expect("cited witness applies to the subtree");
            slot = landing.position[0];
            cur = landing.tree;
            out.push(lifted);
        }
    }
    stack.pop();
    memo.insert(index, out.clone());
    Ok(out)
}

/// Deeper steps grouped by the first-level summand they rewrite.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub action: Action,
    pub start: FiniteTree,
    pub end: FiniteTree,
    /// Steps with the first path element stripped; costs as declared.
    pub steps: Vec<Step>,
}

impl Block {
    pub fn cost(&self) -> Rational {
        self.steps.iter().map(|s| s.cost).sum()
    }

    /// The block as a sequence one level up, costs divided by alpha.
    pub fn lifted(&self, alpha: &Alpha) -> StepSequence {
        let steps = self
            .steps
            .iter()
            .map(|s| Step { cost: s.cost / alpha.value(), ..s.clone() })
            .collect();
        StepSequence::new(alpha.clone(), self.start.clone(), steps)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Segment {
    Top(Step),
    Blocks(Vec<Block>),
}

/// Splits a sequence into first-level steps and, between them, one block
/// per rewritten summand. Steps on distinct summands commute, so each
/// block can be replayed in one go.
pub(crate) fn factorize(seq: &StepSequence) -> Result<Vec<Segment>, crate::step::SequenceError> {
    let traj = seq.trajectory()?;
    let mut cur = seq.source.clone();
    let mut out = Vec::new();
    let mut pending: Vec<Block> = Vec::new();
    for (step, landing) in seq.steps.iter().zip(traj) {
        if step.level() == 1 {
            if !pending.is_empty() {
                out.push(Segment::Blocks(std::mem::take(&mut pending)));
            }
            out.push(Segment::Top(step.clone()));
        } else {
            let (a, v) = &cur.children()[step.position[0]];
            let inner = Step { position: step.position[1..].to_vec(), ..step.clone() };
            let next = apply_structural(v, &inner).expect("sequence replays").tree;
            match pending.iter_mut().find(|b| &b.action == a && &b.end == v) {
                Some(b) => {
                    b.end = next;
                    b.steps.push(inner);
                }
                None => pending.push(Block { action: a.clone(), start: v.clone(), end: next, steps: vec![inner] }),
            }
        }
        cur = landing.tree;
    }
    if !pending.is_empty() {
        out.push(Segment::Blocks(pending));
    }
    Ok(out)
}

pub(crate) fn top_costep(step: &Step) -> CoStep {
    let kind = match &step.kind {
        StepKind::Dup { subject } => CoStepKind::Dup { subject: *subject },
        StepKind::Drop { first, second } => CoStepKind::Drop { first: *first, second: *second },
        StepKind::Relabel { subject, from, to } => {
            CoStepKind::Relabel { subject: *subject, from: from.clone(), to: to.clone() }
        }
    };
    CoStep { kind, cost: step.cost }
}

/// Turns a valid operational sequence into a certificate whose triple 0
/// relates its endpoints at bound equal to the sequence total.
pub fn fold_sequence(seq: &StepSequence, dom: &ActionDomain) -> Result<CcdCertificate, crate::step::SequenceError> {
    let mut cert = CcdCertificate::new(seq.alpha.clone(), dom.clone());
    fold_into(&mut cert, seq)?;
    Ok(cert)
}

fn fold_into(cert: &mut CcdCertificate, seq: &StepSequence) -> Result<usize, crate::step::SequenceError> {
    let target = seq.target()?;
    let index = cert.push(
        DistanceTriple {
            left: RegularTree::from_finite(&seq.source),
            right: RegularTree::from_finite(&target),
            bound: seq.total_cost(),
        },
        Vec::new(),
    );
    let mut witness = Vec::new();
    let mut cur = seq.source.clone();
    for seg in factorize(seq)? {
        match seg {
            Segment::Top(step) => {
                cur = apply_structural(&cur, &step).expect("sequence replays").tree;
                witness.push(top_costep(&step));
            }
            Segment::Blocks(blocks) => {
                for b in blocks {
                    let cited = fold_into(cert, &b.lifted(&seq.alpha))?;
                    let i = cur.position_of(&b.action, &b.start).expect("block start present");
                    let mut kids = cur.children().to_vec();
                    kids[i].1 = b.end.clone();
                    cur = FiniteTree::from_children(kids);
                    witness.push(CoStep::coind(i, cited, b.cost()));
                }
            }
        }
    }
    cert.witnesses[index] = witness;
    Ok(index)
}

/// Index of triple `i` at cut depth `m` in [`project_ccd`] output.
pub fn projected_index(i: usize, m: usize, n: usize) -> usize {
    i * (n + 1) + m
}

/// The family `{(pi_m(l), pi_m(r), d) | m <= n}` with witnesses cut
/// accordingly; citations move one depth down.
pub fn project_ccd(cert: &CcdCertificate, n: usize) -> CcdCertificate {
    let mut out = CcdCertificate::new(cert.alpha.clone(), cert.domain.clone());
    for (i, triple) in cert.triples.iter().enumerate() {
        for m in 0..=n {
            let left = triple.left.unfold_to_depth(m);
            let right = triple.right.unfold_to_depth(m);
            let witness = if m == 0 {
                Vec::new()
            } else {
                project_witness(cert, i, m, n)
            };
            out.push(
                DistanceTriple {
                    left: RegularTree::from_finite(&left),
                    right: RegularTree::from_finite(&right),
                    bound: triple.bound,
                },
                witness,
            );
        }
    }
    out
}

fn project_witness(cert: &CcdCertificate, i: usize, m: usize, n: usize) -> Vec<CoStep> {
    let mut cur = cert.triples[i].left.clone();
    let mut out = Vec::new();
    for step in &cert.witnesses[i] {
        let kids = cur.listing();
        let cut = cur.unfold_to_depth(m);
        let map = |j: usize| -> usize {
            let (a, s) = &kids[j];
            cut.position_of(a, &s.unfold_to_depth(m - 1)).expect("cut summand present")
        };
        let kind = match &step.kind {
            CoStepKind::Dup { subject } => CoStepKind::Dup { subject: map(*subject) },
            CoStepKind::Relabel { subject, from, to } => {
                CoStepKind::Relabel { subject: map(*subject), from: from.clone(), to: to.clone() }
            }
            CoStepKind::Drop { first, .. } => {
                let f = map(*first);
                let c = cut.children();
                let s = (f + 1..c.len()).find(|&x| c[x] == c[f]).expect("merged summands stay equal");
                CoStepKind::Drop { first: f, second: s }
            }
            CoStepKind::Coind { subject, triple } => CoStepKind::Coind {
                subject: map(*subject),
                triple: projected_index(*triple, m - 1, n),
            },
        };
        out.push(CoStep { kind, cost: step.cost });
        cur = cert.apply_costep(&cur, step).expect("projection of a verified certificate");
    }
    out
}

/// Chains triple `i` of `first` with triple `j` of `second` into one
/// certificate; the new triple is the last one and its bound is the sum.
pub fn compose_certificates(
    first: &CcdCertificate,
    i: usize,
    second: &CcdCertificate,
    j: usize,
) -> Option<CcdCertificate> {
    if first.alpha != second.alpha || !tree_equal(&first.triples[i].right, &second.triples[j].left) {
        return None;
    }
    let mut out = first.clone();
    for (a, b, d) in second.domain.entries() {
        out.domain.set(a.clone(), b.clone(), *d);
    }
    for a in second.domain.actions() {
        out.domain.add_action(a.clone());
    }
    let shift = out.triples.len();
    for (t, w) in second.triples.iter().zip(&second.witnesses) {
        let w = w.iter().map(|s| shifted(s, shift)).collect();
        out.push(t.clone(), w);
    }
    let mut witness = first.witnesses[i].clone();
    witness.extend(second.witnesses[j].iter().map(|s| shifted(s, shift)));
    out.push(
        DistanceTriple {
            left: first.triples[i].left.clone(),
            right: second.triples[j].right.clone(),
            bound: first.triples[i].bound + second.triples[j].bound,
        },
        witness,
    );
    Some(out)
}

fn shifted(step: &CoStep, shift: usize) -> CoStep {
    match &step.kind {
        CoStepKind::Coind { subject, triple } => {
            CoStep { kind: CoStepKind::Coind { subject: *subject, triple: triple + shift }, cost: step.cost }
        }
        _ => step.clone(),
    }
}
