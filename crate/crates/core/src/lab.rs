//! Experiments on cuts of regular trees: per-depth distance profiles and
//! the search for telescopic families.
//!
//! Nothing here proves or refutes anything about the limit. A failed
//! hunt is reported as inconclusive together with what it got stuck on.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use crate::cost::{format_rational, Alpha, Cost, Rational};
use crate::domain::ActionDomain;
use crate::lts::RegularTree;
use crate::search::{upper_bound, BoundResult, SearchConfig, SearchError};
use crate::step::{apply_structural, validate_sequence, Step, StepKind, StepSequence};
use crate::telescope::{check_telescopic, TelescopicFamily};
use crate::tree::FiniteTree;

/// Bound found for one cut depth.
#[derive(Debug, Clone)]
pub struct ProfileLevel {
    pub n: usize,
    pub outcome: Result<BoundResult, SearchError>,
    /// Widest first-`n`-levels width along the witness.
    pub max_width: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ProfileReport {
    pub alpha: Alpha,
    pub horizon: usize,
    pub levels: Vec<ProfileLevel>,
    /// Global bound the caller expects every level to respect.
    pub claimed: Option<Rational>,
}

impl ProfileReport {
    /// Costs per level, `None` where the search failed.
    pub fn costs(&self) -> Vec<Option<Cost>> {
        self.levels.iter().map(|l| l.outcome.as_ref().ok().map(|r| r.cost.clone())).collect()
    }

    /// Levels whose bound exceeds the claimed one.
    pub fn violations(&self) -> Vec<usize> {
        let Some(d) = &self.claimed else { return Vec::new() };
        self.levels
            .iter()
            .filter(|l| matches!(&l.outcome, Ok(r) if r.cost > Cost::Finite(*d)))
            .map(|l| l.n)
            .collect()
    }

    pub fn complete(&self) -> bool {
        self.levels.iter().all(|l| l.outcome.is_ok())
    }
}

impl fmt::Display for ProfileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "alpha {}", self.alpha)?;
        writeln!(f, "horizon {}", self.horizon)?;
        if let Some(d) = &self.claimed {
            writeln!(f, "claimed {}", format_rational(d))?;
        }
        for l in &self.levels {
            match &l.outcome {
                Ok(r) => {
                    let exact = if r.exact { " exact" } else { "" };
                    let steps = r.witness.as_ref().map_or(0, |w| w.len());
                    let width = l.max_width.map_or(String::from("-"), |w| w.to_string());
                    writeln!(f, "level {} bound {}{exact} steps {steps} width {width}", l.n, r.cost)?;
                }
                Err(e) => writeln!(f, "level {} failed: {e}", l.n)?,
            }
        }
        Ok(())
    }
}

/// Runs [`upper_bound`] on the depth-`n` cuts for `n = 1..=horizon`.
pub fn projection_profile(
    r1: &RegularTree,
    r2: &RegularTree,
    alpha: &Alpha,
    dom: &ActionDomain,
    horizon: usize,
    cfg: &SearchConfig,
    claimed: Option<Rational>,
) -> ProfileReport {
    let levels = (1..=horizon)
        .map(|n| {
            let outcome = upper_bound(&r1.unfold_to_depth(n), &r2.unfold_to_depth(n), alpha, dom, cfg);
            let max_width = outcome
                .as_ref()
                .ok()
                .and_then(|r| r.witness.as_ref())
                .and_then(|w| w.max_width_k(n).ok());
            ProfileLevel { n, outcome, max_width }
        })
        .collect();
    ProfileReport { alpha: alpha.clone(), horizon, levels, claimed }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuntConfig {
    /// Extensions tried per member before backtracking.
    pub branching: usize,
    /// States explored per extension search.
    pub max_states: usize,
}

impl Default for HuntConfig {
    fn default() -> Self {
        HuntConfig { branching: 4, max_states: 200_000 }
    }
}

/// A member that could not be extended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrontierEntry {
    pub level: usize,
    pub total: Rational,
    pub steps: usize,
    /// Why the search below it stopped.
    pub reason: String,
}

/// Why a hunt stopped. Always inconclusive: a larger budget or another
/// branching order may still succeed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Obstruction {
    /// Deepest level for which some member was found (0 if none).
    pub deepest: usize,
    pub horizon: usize,
    pub bound: Rational,
    pub frontier: Vec<FrontierEntry>,
}

impl fmt::Display for Obstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "inconclusive")?;
        writeln!(f, "bound {}", format_rational(&self.bound))?;
        writeln!(f, "horizon {}", self.horizon)?;
        writeln!(f, "deepest {}", self.deepest)?;
        for e in &self.frontier {
            writeln!(f, "stuck level {} total {} steps {}: {}", e.level, format_rational(&e.total), e.steps, e.reason)?;
        }
        Ok(())
    }
}

/// Searches for `S^1..S^horizon` of total at most `d`, each obtained
/// from the previous one by interleaving steps one level deeper.
pub fn telescopic_hunt(
    r1: &RegularTree,
    r2: &RegularTree,
    alpha: &Alpha,
    dom: &ActionDomain,
    d: &Rational,
    horizon: usize,
    hcfg: &HuntConfig,
) -> Result<TelescopicFamily, Obstruction> {
    let mut fam = TelescopicFamily {
        alpha: alpha.clone(),
        domain: dom.clone(),
        left: r1.clone(),
        right: r2.clone(),
        sequences: Vec::new(),
    };
    let mut obs = Obstruction { deepest: 0, horizon, bound: *d, frontier: Vec::new() };
    let base = StepSequence::empty(alpha.clone(), FiniteTree::zero());
    let hunt = Hunt { r1, r2, alpha, dom, d, horizon, hcfg };
    if hunt.dfs(&base, 0, &mut fam, &mut obs) {
        Ok(fam)
    } else {
        Err(obs)
    }
}

struct Hunt<'a> {
    r1: &'a RegularTree,
    r2: &'a RegularTree,
    alpha: &'a Alpha,
    dom: &'a ActionDomain,
    d: &'a Rational,
    horizon: usize,
    hcfg: &'a HuntConfig,
}

/// Node of the extension search; steps lead here from `parent`.
struct Entry {
    k: usize,
    tree: FiniteTree,
    parent: Option<usize>,
    steps: Vec<Step>,
}

impl Hunt<'_> {
    fn dfs(&self, prev: &StepSequence, n: usize, fam: &mut TelescopicFamily, obs: &mut Obstruction) -> bool {
        if n == self.horizon {
            return true;
        }
        let (found, reason) = self.extend(prev, n);
        for seq in found {
            fam.sequences.push(seq.clone());
            if check_telescopic(fam).is_ok() {
                obs.deepest = obs.deepest.max(n + 1);
                if self.dfs(&seq, n + 1, fam, obs) {
                    return true;
                }
            }
            fam.sequences.pop();
        }
        obs.frontier.push(FrontierEntry { level: n, total: prev.total_cost(), steps: prev.len(), reason });
        false
    }

    /// Up to `branching` cheapest members for level `n + 1` that cut
    /// back to `prev`, plus a note when fewer were found.
    fn extend(&self, prev: &StepSequence, n: usize) -> (Vec<StepSequence>, String) {
        let source = self.r1.unfold_to_depth(n + 1);
        let target = self.r2.unfold_to_depth(n + 1);
        let cuts: Vec<FiniteTree> = match prev.trajectory() {
            Ok(t) => std::iter::once(prev.source.clone()).chain(t.into_iter().map(|l| l.tree)).collect(),
            Err(e) => return (Vec::new(), e.to_string()),
        };
        let widest = |t: &FiniteTree| nodes_at(t, n).iter().map(|(_, x)| x.width1()).max().unwrap_or(0);
        let cap = widest(&source) + widest(&target);
        let weight = self.alpha.level_weight(n + 1);

        let mut arena = vec![Entry { k: 0, tree: source.clone(), parent: None, steps: Vec::new() }];
        let mut pops: HashMap<(usize, FiniteTree), usize> = HashMap::new();
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Rational::from_integer(0), 0usize)));
        let mut found = Vec::new();
        while let Some(Reverse((cost, id))) = heap.pop() {
            let (k, tree) = (arena[id].k, arena[id].tree.clone());
            let seen = pops.entry((k, tree.clone())).or_insert(0);
            if *seen >= self.hcfg.branching {
                continue;
            }
            *seen += 1;
            if k == prev.len() && tree == target {
                let mut chunks = Vec::new();
                let mut cur = Some(id);
                while let Some(c) = cur {
                    chunks.push(arena[c].steps.clone());
                    cur = arena[c].parent;
                }
                chunks.reverse();
                let seq = StepSequence::new(self.alpha.clone(), source.clone(), chunks.concat());
                if validate_sequence(&seq, self.dom).is_ok() && !found.contains(&seq) {
                    found.push(seq);
                }
                if found.len() >= self.hcfg.branching {
                    break;
                }
                continue;
            }
            let mut next: Vec<(Step, FiniteTree)> = Vec::new();
            if k < prev.len() {
                next.extend(lifts(&tree, &prev.steps[k], &cuts[k + 1], n));
            }
            next.extend(deep_moves(&tree, n, cap, &weight, self.dom));
            for (step, t2) in next {
                let c2 = cost + step.cost;
                if c2 > *self.d {
                    continue;
                }
                if arena.len() >= self.hcfg.max_states {
                    let note = format!("state budget {} exhausted", self.hcfg.max_states);
                    return (found, note);
                }
                let k2 = if step.level() <= n { k + 1 } else { k };
                arena.push(Entry { k: k2, tree: t2, parent: Some(id), steps: vec![step] });
                heap.push(Reverse((c2, arena.len() - 1)));
            }
        }
        let note = if found.is_empty() {
            format!("no member for level {} within the bound", n + 1)
        } else {
            format!("all {} candidates for level {} failed deeper", found.len(), n + 1)
        };
        (found, note)
    }
}

/// Paths to the nodes at depth `depth`, with the nodes.
fn nodes_at(t: &FiniteTree, depth: usize) -> Vec<(Vec<usize>, &FiniteTree)> {
    if depth == 0 {
        return vec![(Vec::new(), t)];
    }
    let mut out = Vec::new();
    for (i, (_, sub)) in t.children().iter().enumerate() {
        for (mut p, x) in nodes_at(sub, depth - 1) {
            p.insert(0, i);
            out.push((p, x));
        }
    }
    out
}

/// Concrete versions of the shallow step `abs` on the deeper tree `t`
/// whose cut at depth `n` lands on `expected`.
fn lifts(t: &FiniteTree, abs: &Step, expected: &FiniteTree, n: usize) -> Vec<(Step, FiniteTree)> {
    let mut out: Vec<(Step, FiniteTree)> = Vec::new();
    for (path, node) in nodes_at(t, abs.position.len()) {
        let ch = node.children();
        let kinds: Vec<StepKind> = match &abs.kind {
            StepKind::Dup { .. } => (0..ch.len()).map(|i| StepKind::Dup { subject: i }).collect(),
            StepKind::Drop { .. } => (1..ch.len())
                .filter(|&i| ch[i] == ch[i - 1])
                .map(|i| StepKind::Drop { first: i - 1, second: i })
                .collect(),
            StepKind::Relabel { from, to, .. } => (0..ch.len())
                .filter(|&i| ch[i].0 == *from)
                .map(|i| StepKind::Relabel { subject: i, from: from.clone(), to: to.clone() })
                .collect(),
        };
        for kind in kinds {
            let step = Step { position: path.clone(), kind, cost: abs.cost };
            let Ok(landing) = apply_structural(t, &step) else { continue };
            if landing.tree.project(n) == *expected && !out.iter().any(|(_, x)| *x == landing.tree) {
                out.push((step, landing.tree));
            }
        }
    }
    out
}

/// Steps at level `n + 1`, i.e. on the children of depth-`n` nodes.
fn deep_moves(t: &FiniteTree, n: usize, cap: usize, weight: &Rational, dom: &ActionDomain) -> Vec<(Step, FiniteTree)> {
    let mut steps = Vec::new();
    for (path, node) in nodes_at(t, n) {
        let ch = node.children();
        for i in 0..ch.len() {
            if ch.len() < cap && (i == 0 || ch[i] != ch[i - 1]) {
                steps.push(Step::dup(path.clone(), i));
            }
            if i > 0 && ch[i] == ch[i - 1] {
                steps.push(Step::drop(path.clone(), i - 1, i));
            }
            if (i > 0 && ch[i] == ch[i - 1]) || !dom.contains(&ch[i].0) {
                continue;
            }
            for b in dom.actions() {
                if let Cost::Finite(d) = dom.dist(&ch[i].0, b) {
                    if *b != ch[i].0 {
                        steps.push(Step::relabel(path.clone(), i, ch[i].0.as_str(), b.as_str(), d * weight));
                    }
                }
            }
        }
    }
    steps
        .into_iter()
        .filter_map(|s| apply_structural(t, &s).ok().map(|l| (s, l.tree)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Action;
    use crate::telescope::assemble_limit;

    fn ab() -> ActionDomain {
        let mut dom = ActionDomain::new();
        dom.set(Action::new("a"), Action::new("b"), Rational::from_integer(1));
        dom
    }

    #[test]
    fn chain_profile() {
        let (a, b) = (RegularTree::loops(&["a"]), RegularTree::loops(&["b"]));
        let rep = projection_profile(&a, &b, &Alpha::half(), &ab(), 6, &SearchConfig::default(), Some(Rational::from_integer(2)));
        for (i, c) in rep.costs().into_iter().enumerate() {
            let n = i as i128 + 1;
            let expect = Rational::from_integer(2) - Rational::new(2, 1 << n);
            assert_eq!(c, Some(Cost::Finite(expect)));
        }
        assert!(rep.violations().is_empty());
        let same = projection_profile(&a, &a, &Alpha::half(), &ab(), 3, &SearchConfig::default(), None);
        assert!(same.costs().iter().all(|c| *c == Some(Cost::zero())));
    }

    #[test]
    fn chain_hunt_assembles() {
        let (a, b) = (RegularTree::loops(&["a"]), RegularTree::loops(&["b"]));
        let two = Rational::from_integer(2);
        let fam = telescopic_hunt(&a, &b, &Alpha::half(), &ab(), &two, 4, &HuntConfig::default()).unwrap();
        assert_eq!(fam.horizon(), 4);
        check_telescopic(&fam).unwrap();
        let cert = assemble_limit(&fam, &[], Some(two)).unwrap();
        crate::ccd::verify_ccd(&cert).unwrap();
    }

    #[test]
    fn hunt_below_first_level_is_stuck_at_once() {
        let (a, b) = (RegularTree::loops(&["a"]), RegularTree::loops(&["b"]));
        let obs = telescopic_hunt(&a, &b, &Alpha::half(), &ab(), &Rational::new(1, 2), 3, &HuntConfig::default()).unwrap_err();
        assert_eq!(obs.deepest, 0);
        assert!(obs.to_string().starts_with("inconclusive"));
    }

    #[test]
    fn acd_hunt_and_limit() {
        use crate::telescope::tests::{acd_domain, acd_trees};
        let (t, u) = acd_trees();
        let dom = acd_domain();
        let six = Rational::from_integer(6);
        let fam = telescopic_hunt(&t, &u, &Alpha::half(), &dom, &six, 3, &HuntConfig::default()).unwrap();
        let totals: Vec<Rational> = fam.sequences.iter().map(|s| s.total_cost()).collect();
        assert_eq!(totals, vec![Rational::from_integer(4), Rational::from_integer(5), Rational::new(11, 2)]);
        let cands = [RegularTree::loops(&["c"]), RegularTree::loops(&["d"])];
        let cert = assemble_limit(&fam, &cands, Some(six)).unwrap();
        crate::ccd::verify_ccd(&cert).unwrap();
        let rep = projection_profile(&t, &u, &Alpha::half(), &dom, 3, &SearchConfig::default(), Some(six));
        let expect = [Rational::from_integer(4), Rational::from_integer(5), Rational::new(11, 2)];
        for (c, e) in rep.costs().into_iter().zip(expect) {
            assert!(c.unwrap() <= Cost::Finite(e));
        }
    }
}
