//! Telescopic families of operational sequences and their limits.
//!
//! A family holds `S^1..S^N`, where `S^n` relates the depth-`n` cuts of
//! two regular trees and cutting `S^n` at depth `m` gives back `S^m`.
//! [`assemble_limit`] overlaps such a family into one certificate.

use std::collections::HashMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::ccd::{factorize, listing_index, top_costep, verify_ccd, CcdCertificate, CcdError, CoStep, CoStepKind, DistanceTriple, Segment};
use crate::cost::{Alpha, Rational};
use crate::domain::ActionDomain;
use crate::lts::{tree_equal, RegularTree};
use crate::step::{apply_structural, project_sequence, validate_sequence, SequenceError, StepSequence};
use crate::tree::FiniteTree;

#[derive(Debug, Clone)]
pub struct TelescopicFamily {
    pub alpha: Alpha,
    pub domain: ActionDomain,
    pub left: RegularTree,
    pub right: RegularTree,
    /// `sequences[n - 1]` is `S^n`.
    pub sequences: Vec<StepSequence>,
}

impl TelescopicFamily {
    pub fn horizon(&self) -> usize {
        self.sequences.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TelescopeError {
    #[error("S^{n} is invalid: {error}")]
    Invalid { n: usize, error: SequenceError },
    #[error("S^{n} does not start at the depth-{n} cut of the left tree")]
    SourceMismatch { n: usize },
    #[error("S^{n} does not end at the depth-{n} cut of the right tree")]
    TargetMismatch { n: usize },
    #[error("S^{n} uses discount {found}, the family uses {expected}")]
    AlphaMismatch { n: usize, expected: Alpha, found: Alpha },
    #[error("cutting S^{n} at depth {m} does not give S^{m}")]
    NotTelescopic { m: usize, n: usize },
}

/// Checks endpoints and validity of every member, then that each
/// `S^n` cut at depth `m` equals `S^m` up to the choice among equal
/// summands.
pub fn check_telescopic(fam: &TelescopicFamily) -> Result<(), TelescopeError> {
    let mut normal = Vec::with_capacity(fam.horizon());
    for (i, seq) in fam.sequences.iter().enumerate() {
        let n = i + 1;
        if seq.alpha != fam.alpha {
            return Err(TelescopeError::AlphaMismatch { n, expected: fam.alpha.clone(), found: seq.alpha.clone() });
        }
        if seq.source != fam.left.unfold_to_depth(n) {
            return Err(TelescopeError::SourceMismatch { n });
        }
        let rep = validate_sequence(seq, &fam.domain).map_err(|error| TelescopeError::Invalid { n, error })?;
        if rep.target != fam.right.unfold_to_depth(n) {
            return Err(TelescopeError::TargetMismatch { n });
        }
        normal.push(seq.normalize().map_err(|error| TelescopeError::Invalid { n, error })?);
    }
    for n in 1..=fam.horizon() {
        for m in 1..n {
            let cut = project_sequence(&fam.sequences[n - 1], m)
                .and_then(|s| s.normalize())
                .map_err(|error| TelescopeError::Invalid { n, error })?;
            if cut != normal[m - 1] {
                return Err(TelescopeError::NotTelescopic { m, n });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssembleError {
    #[error(transparent)]
    NotTelescopic(#[from] TelescopeError),
    #[error("no candidate cuts to {tree} at depth {depth}")]
    NoCandidate { depth: usize, tree: FiniteTree },
    #[error("limit stage of triple {triple} does not cut to the finite stage at depth {depth}")]
    CandidateMismatch { triple: usize, depth: usize },
    #[error("merged summands differ in the limit (triple {triple})")]
    MergeMismatch { triple: usize },
    #[error("witness of triple {triple} does not reach its right side")]
    EndpointMismatch { triple: usize },
    #[error("the bound equations have no finite nonnegative solution")]
    NoFiniteBound,
    #[error("a block observed at cost {observed} exceeds alpha times the bound of triple {triple} ({allowed})")]
    BoundNotDominating { triple: usize, observed: Rational, allowed: Rational },
    #[error("assembled bound {found} exceeds the declared bound {declared}")]
    DeclaredBoundExceeded { found: Rational, declared: Rational },
    #[error("assembled certificate fails to verify: {0:?}")]
    Unverified(Vec<CcdError>),
}

struct Builder<'a> {
    alpha: &'a Alpha,
    pool: Vec<RegularTree>,
    cuts: HashMap<(usize, usize), FiniteTree>,
    cert: CcdCertificate,
    first_cost: Vec<Rational>,
    /// `(triple, witness position, cited triple, observed cost)`
    coinds: Vec<(usize, usize, usize, Rational)>,
}

impl Builder<'_> {
    fn candidate(&mut self, depth: usize, tree: &FiniteTree) -> Option<RegularTree> {
        for i in 0..self.pool.len() {
            let cut = self
                .cuts
                .entry((i, depth))
                .or_insert_with(|| self.pool[i].unfold_to_depth(depth));
            if cut == tree {
                return Some(self.pool[i].clone());
            }
        }
        None
    }

    fn find_triple(&self, left: &RegularTree, right: &RegularTree) -> Option<usize> {
        self.cert
            .triples
            .iter()
            .position(|t| tree_equal(&t.left, left) && tree_equal(&t.right, right))
    }

    fn build(&mut self, left: RegularTree, right: RegularTree, seq: &StepSequence, h: usize) -> Result<usize, AssembleError> {
        let index = self.cert.push(
            DistanceTriple { left: left.clone(), right: right.clone(), bound: Rational::zero() },
            Vec::new(),
        );
        self.first_cost.push(Rational::zero());
        let mismatch = AssembleError::CandidateMismatch { triple: index, depth: h };
        if left.unfold_to_depth(h) != seq.source {
            return Err(mismatch);
        }
        let segments = factorize(seq).expect("telescopic members replay");
        let mut lim = left;
        let mut cur = seq.source.clone();
        let below = h.saturating_sub(1);
        for seg in segments {
            let slots = lim.listing();
            let cuts: Vec<FiniteTree> = slots.iter().map(|(_, s)| s.unfold_to_depth(below)).collect();
            let matching = |a: &crate::domain::Action, t: &FiniteTree| -> Vec<usize> {
                (0..slots.len()).filter(|&j| &slots[j].0 == a && &cuts[j] == t).collect()
            };
            match seg {
                Segment::Top(step) => {
                    let kids = cur.children();
                    let mut co = top_costep(&step);
                    match &mut co.kind {
                        CoStepKind::Dup { subject } | CoStepKind::Relabel { subject, .. } => {
                            let (a, t) = &kids[*subject];
                            *subject = *matching(a, t).first().ok_or_else(|| mismatch.clone())?;
                        }
                        CoStepKind::Drop { first, second } => {
                            let (a, t) = &kids[*first];
                            let js = matching(a, t);
                            let pair = js
                                .iter()
                                .flat_map(|&x| js.iter().map(move |&y| (x, y)))
                                .find(|&(x, y)| x < y && tree_equal(&slots[x].1, &slots[y].1));
                            let (x, y) = pair.ok_or(AssembleError::MergeMismatch { triple: index })?;
                            *first = x;
                            *second = y;
                        }
                        CoStepKind::Coind { .. } => unreachable!(),
                    }
                    lim = self.cert.apply_costep(&lim, &co).map_err(|_| mismatch.clone())?;
                    cur = apply_structural(&cur, &step).expect("member replays").tree;
                    self.first_cost[index] += co.cost;
                    self.cert.witnesses[index].push(co);
                }
                Segment::Blocks(blocks) => {
                    for b in blocks {
                        let slots = lim.listing();
                        let j = (0..slots.len())
                            .find(|&j| slots[j].0 == b.action && slots[j].1.unfold_to_depth(below) == b.start)
                            .ok_or_else(|| mismatch.clone())?;
                        let start = slots[j].1.clone();
                        let end = if start.unfold_to_depth(below) == b.end {
                            start.clone()
                        } else {
                            self.candidate(below, &b.end)
                                .ok_or(AssembleError::NoCandidate { depth: below, tree: b.end.clone() })?
                        };
                        let cited = match self.find_triple(&start, &end) {
                            Some(k) => k,
                            None => self.build(start.clone(), end, &b.lifted(self.alpha), below)?,
                        };
                        let subject = listing_index(&slots, &b.action, &start).expect("slot present");
                        let co = CoStep::coind(subject, cited, Rational::zero());
                        lim = self.cert.apply_costep(&lim, &co).map_err(|_| mismatch.clone())?;
                        let pos = cur.position_of(&b.action, &b.start).expect("block start present");
                        let mut kids = cur.children().to_vec();
                        kids[pos].1 = b.end.clone();
                        cur = FiniteTree::from_children(kids);
                        self.coinds.push((index, self.cert.witnesses[index].len(), cited, b.cost()));
                        self.cert.witnesses[index].push(co);
                    }
                }
            }
        }
        if !tree_equal(&lim, &right) {
            return Err(AssembleError::EndpointMismatch { triple: index });
        }
        if right.unfold_to_depth(h) != cur {
            return Err(mismatch);
        }
        Ok(index)
    }
}

/// Solves `(I - A) x = c` exactly; `None` when singular.
fn solve(a: &[Vec<Rational>], c: &[Rational]) -> Option<Vec<Rational>> {
    let n = c.len();
    let mut m: Vec<Vec<Rational>> = (0..n)
        .map(|i| {
            let mut row: Vec<Rational> = (0..n)
                .map(|j| if i == j { Rational::one() - a[i][j] } else { -a[i][j] })
                .collect();
            row.push(c[i]);
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let p = m[col][col];
        for x in m[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col];
                for k in col..=n {
                    let v = m[col][k];
                    m[r][k] -= f * v;
                }
            }
        }
    }
    Some(m.into_iter().map(|row| row[n]).collect())
}

/// Overlaps a telescopic family into one certificate for its limit
/// trees. Only `S^N` is read, the smaller members being its cuts.
///
/// Intermediate limit trees come from `candidates` and their subtrees,
/// plus the subtrees of the two endpoints. A stage whose finite tree is
/// matched by no candidate cut is an error; so is a merge of summands
/// that agree up to the horizon but differ in the limit.
///
/// Bounds solve `x_k = c_k + alpha * sum of x_j over cited j`, where
/// `c_k` is the first-level cost of triple `k`. The bound of triple 0
/// must not exceed `declared` when given, and every block cost seen in
/// the family must stay within `alpha` times the bound it is charged to.
pub fn assemble_limit(
    fam: &TelescopicFamily,
    candidates: &[RegularTree],
    declared: Option<Rational>,
) -> Result<CcdCertificate, AssembleError> {
    check_telescopic(fam)?;
    let mut pool = Vec::new();
    for t in candidates.iter().chain([&fam.left, &fam.right]) {
        for s in t.subtrees() {
            if !pool.iter().any(|p| tree_equal(p, &s)) {
                pool.push(s);
            }
        }
    }
    let horizon = fam.horizon();
    let seq = match fam.sequences.last() {
        Some(s) => s.clone(),
        None => StepSequence::empty(fam.alpha.clone(), FiniteTree::zero()),
    };
    let mut b = Builder {
        alpha: &fam.alpha,
        pool,
        cuts: HashMap::new(),
        cert: CcdCertificate::new(fam.alpha.clone(), fam.domain.clone()),
        first_cost: Vec::new(),
        coinds: Vec::new(),
    };
    b.build(fam.left.clone(), fam.right.clone(), &seq, horizon)?;
    let n = b.cert.triples.len();
    let alpha = *fam.alpha.value();
    let mut a = vec![vec![Rational::zero(); n]; n];
    for &(k, _, j, _) in &b.coinds {
        a[k][j] += alpha;
    }
    let x = solve(&a, &b.first_cost).ok_or(AssembleError::NoFiniteBound)?;
    if x.iter().any(|v| *v < Rational::zero()) {
        return Err(AssembleError::NoFiniteBound);
    }
    for (k, v) in x.iter().enumerate() {
        b.cert.triples[k].bound = *v;
    }
    for &(k, pos, j, observed) in &b.coinds {
        let allowed = alpha * x[j];
        if observed > allowed {
            return Err(AssembleError::BoundNotDominating { triple: j, observed, allowed });
        }
        b.cert.witnesses[k][pos].cost = allowed;
    }
    if let Some(d) = declared {
        if x[0] > d {
            return Err(AssembleError::DeclaredBoundExceeded { found: x[0], declared: d });
        }
    }
    verify_ccd(&b.cert).map_err(AssembleError::Unverified)?;
    Ok(b.cert)
}
