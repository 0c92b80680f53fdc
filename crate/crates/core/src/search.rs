//! Distance bounds between finite trees, each backed by a replayed
//! witness sequence.
//!
//! Duplicating and dropping summands is free, so the distance between
//! two trees equals the distance between their bisimulation normal
//! forms (every node's children deduplicated). All engines work on
//! normal forms and wrap their witness with the free steps that lead
//! from the input into normal form and back out to the target.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::cost::{Alpha, Cost, Rational};
use crate::domain::{Action, ActionDomain};
use crate::stage_graph::{plan_to_sequence, LabelOp, LabelPlan};
use crate::step::{apply_structural, reverse, validate_sequence, Step, StepSequence};
use crate::tree::FiniteTree;

/// Which intermediate labels a diabolo may route through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CenterPolicy {
    /// Only summands of the two input trees.
    InputsOnly,
    /// Summands of the inputs with their head relabelled to any action.
    Alphabet,
    /// `Alphabet`, plus heads over sums of up to `width` normal-form
    /// grandchildren (default: the two largest child widths added).
    Synthesized { width: Option<usize> },
}

impl fmt::Display for CenterPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CenterPolicy::InputsOnly => f.write_str("inputs"),
            CenterPolicy::Alphabet => f.write_str("alphabet"),
            CenterPolicy::Synthesized { width: None } => f.write_str("synthesized"),
            CenterPolicy::Synthesized { width: Some(w) } => write!(f, "synthesized:{w}"),
        }
    }
}

impl std::str::FromStr for CenterPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inputs" => Ok(CenterPolicy::InputsOnly),
            "alphabet" => Ok(CenterPolicy::Alphabet),
            "synthesized" => Ok(CenterPolicy::Synthesized { width: None }),
            _ => s
                .strip_prefix("synthesized:")
                .and_then(|w| w.parse().ok())
                .map(|w| CenterPolicy::Synthesized { width: Some(w) })
                .ok_or_else(|| format!("unknown center policy '{s}' (inputs, alphabet, synthesized[:W])")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchConfig {
    /// Longest witness an exhaustive search may return.
    pub max_steps: Option<usize>,
    /// Cap on the first-two-levels width of normal-form states.
    pub max_stage_width: Option<usize>,
    pub centers: CenterPolicy,
    /// Exhaustive searches give up above this cost.
    pub ceiling: Option<Rational>,
    pub max_states: usize,
    /// Cap on synthesized center subtrees per subproblem.
    pub max_candidates: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_steps: None,
            max_stage_width: None,
            centers: CenterPolicy::Synthesized { width: None },
            ceiling: None,
            max_states: 500_000,
            max_candidates: 64,
        }
    }
}

/// A cost together with a sequence proving it. `witness` is `None` only
/// for an infinite cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundResult {
    pub cost: Cost,
    pub witness: Option<StepSequence>,
    /// Set only when the search that produced it is complete.
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search space too large: {0}")]
    ScaleExceeded(String),
    #[error("trees deeper than {max} levels are not supported by this solver")]
    TooDeep { max: usize },
    #[error("no sequence of cost at most {0} within the configured limits")]
    NotFound(Cost),
    #[error("internal witness did not replay: {0}")]
    Unvalidated(String),
}

/// Drops that bring `t` into normal form, deepest duplicates first.
pub fn dedup_steps(t: &FiniteTree) -> Vec<Step> {
    fn find(t: &FiniteTree, path: &mut Vec<usize>) -> Option<(Vec<usize>, usize)> {
        for (i, (_, sub)) in t.children().iter().enumerate() {
            path.push(i);
            if let Some(hit) = find(sub, path) {
                return Some(hit);
            }
            path.pop();
        }
        let ch = t.children();
        (1..ch.len()).find(|&i| ch[i] == ch[i - 1]).map(|i| (path.clone(), i - 1))
    }
    let mut cur = t.clone();
    let mut out = Vec::new();
    while let Some((pos, i)) = find(&cur, &mut Vec::new()) {
        let step = Step::drop(pos, i, i + 1);
        cur = apply_structural(&cur, &step).expect("adjacent equal summands").tree;
        out.push(step);
    }
    out
}

/// Wraps normal-form steps into a sequence from `t` to `u` and checks it.
fn certify(
    t: &FiniteTree,
    u: &FiniteTree,
    core: Vec<Step>,
    cost: &Rational,
    alpha: &Alpha,
    dom: &ActionDomain,
) -> Result<StepSequence, SearchError> {
    let mut steps = dedup_steps(t);
    steps.extend(core);
    let back = reverse(&StepSequence::new(alpha.clone(), u.clone(), dedup_steps(u)))
        .map_err(|e| SearchError::Unvalidated(e.to_string()))?;
    steps.extend(back.steps);
    check_witness(StepSequence::new(alpha.clone(), t.clone(), steps), u, cost, dom)
}

/// Replays `seq` and checks it lands on `u` at exactly `cost`.
fn check_witness(seq: StepSequence, u: &FiniteTree, cost: &Rational, dom: &ActionDomain) -> Result<StepSequence, SearchError> {
    let rep = validate_sequence(&seq, dom).map_err(|e| SearchError::Unvalidated(e.to_string()))?;
    if rep.target != *u {
        return Err(SearchError::Unvalidated(format!("witness ends at {} instead of {u}", rep.target)));
    }
    if rep.total != *cost {
        return Err(SearchError::Unvalidated(format!("witness costs {} instead of {cost}", rep.total)));
    }
    Ok(seq)
}

fn infinite() -> BoundResult {
    BoundResult { cost: Cost::Infinite, witness: None, exact: true }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact distance between depth-one trees with summand labels `a` and
/// `b`: Dijkstra over label multisets of size at most `|a| + |b|`.
pub fn exact_depth1(a: &[Action], b: &[Action], dom: &ActionDomain, alpha: &Alpha) -> Result<BoundResult, SearchError> {
    let mut start: Vec<Action> = a.to_vec();
    let mut goal: Vec<Action> = b.to_vec();
    start.sort();
    goal.sort();
    let t = FiniteTree::flat(start.iter().map(|x| x.as_str()));
    let u = FiniteTree::flat(goal.iter().map(|x| x.as_str()));
    if start.is_empty() || goal.is_empty() {
        if start.len() != goal.len() {
            return Ok(infinite());
        }
        return Ok(BoundResult { cost: Cost::zero(), witness: Some(StepSequence::empty(alpha.clone(), t)), exact: true });
    }
    let width = start.len() + goal.len();
    let labels: BTreeSet<Action> = dom.actions().cloned().chain(start.iter().cloned()).chain(goal.iter().cloned()).collect();
    let estimate = binomial(width + labels.len(), labels.len());
    if estimate > 2e6 {
        return Err(SearchError::ScaleExceeded(format!("about {estimate:.0} label multisets")));
    }
    let mut best: HashMap<Vec<Action>, Cost> = HashMap::new();
    let mut prev: HashMap<Vec<Action>, (Vec<Action>, LabelOp<Action>)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start.clone(), Cost::zero());
    heap.push(Reverse((Cost::zero(), start.clone())));
    while let Some(Reverse((g, state))) = heap.pop() {
        if best.get(&state).is_some_and(|b| *b < g) {
            continue;
        }
        if state == goal {
            let mut ops = Vec::new();
            let mut cur = state;
            while let Some((p, op)) = prev.get(&cur) {
                ops.push(op.clone());
                cur = p.clone();
            }
            ops.reverse();
            let plan = LabelPlan { source: start.clone(), ops };
            let seq = plan_to_sequence(&plan, alpha, dom).ok_or_else(|| SearchError::Unvalidated("plan".into()))?;
            let cost = g.finite().copied().expect("finite");
            let seq = check_witness(seq, &u, &cost, dom)?;
            return Ok(BoundResult { cost: g, witness: Some(seq), exact: true });
        }
        let distinct: BTreeSet<Action> = state.iter().cloned().collect();
        let mut moves: Vec<(Vec<Action>, LabelOp<Action>, Cost)> = Vec::new();
        for x in &distinct {
            let count = state.iter().filter(|y| *y == x).count();
            if state.len() < width {
                let mut next = state.clone();
                next.push(x.clone());
                moves.push((next, LabelOp::Split(x.clone()), Cost::zero()));
            }
            if count >= 2 {
                let mut next = state.clone();
                let i = next.iter().position(|y| y == x).expect("present");
                next.remove(i);
                moves.push((next, LabelOp::Merge(x.clone()), Cost::zero()));
            }
            if !dom.contains(x) {
                continue;
            }
            for y in dom.actions() {
                let d = dom.dist(x, y);
                if y == x || !d.is_finite() {
                    continue;
                }
                let mut next = state.clone();
                let i = next.iter().position(|z| z == x).expect("present");
                next[i] = y.clone();
                moves.push((next, LabelOp::Change(x.clone(), y.clone()), d));
            }
        }
        for (mut next, op, c) in moves {
            next.sort();
            let g2 = &g + &c;
            if best.get(&next).map_or(true, |b| g2 < *b) {
                best.insert(next.clone(), g2.clone());
                prev.insert(next.clone(), (state.clone(), op));
                heap.push(Reverse((g2, next)));
            }
        }
    }
    Ok(infinite())
}

/// A summand `a.s` used as a label in the lifted diabolo search.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefixed(pub Action, pub FiniteTree);

impl fmt::Display for Prefixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", FiniteTree::prefix(self.0.clone(), self.1.clone()))
    }
}

/// Cost and root-relative steps between two normal forms.
#[derive(Debug, Clone)]
struct Solved {
    cost: Cost,
    steps: Vec<Step>,
}

/// Recursive diabolo search over prefixed trees, memoized on pairs of
/// normal forms.
struct Lifted<'a> {
    alpha: &'a Alpha,
    dom: &'a ActionDomain,
    cfg: &'a SearchConfig,
    memo: HashMap<(FiniteTree, FiniteTree), Solved>,
    truncated: bool,
}

const MAX_ITEMS: usize = 16;
const MAX_TERMINALS: usize = 12;

impl<'a> Lifted<'a> {
    fn new(alpha: &'a Alpha, dom: &'a ActionDomain, cfg: &'a SearchConfig) -> Self {
        Lifted { alpha, dom, cfg, memo: HashMap::new(), truncated: false }
    }

    /// Steps from normal form `s` to normal form `u`.
    fn solve(&mut self, s: &FiniteTree, u: &FiniteTree) -> Result<Solved, SearchError> {
        if s == u {
            return Ok(Solved { cost: Cost::zero(), steps: Vec::new() });
        }
        let swapped = u < s;
        let key = if swapped { (u.clone(), s.clone()) } else { (s.clone(), u.clone()) };
        if !self.memo.contains_key(&key) {
            let solved = self.diabolo(&key.0, &key.1)?;
            self.memo.insert(key.clone(), solved);
        }
        let solved = self.memo[&key].clone();
        if !swapped || !solved.cost.is_finite() {
            return Ok(solved);
        }
        let back = reverse(&StepSequence::new(self.alpha.clone(), key.0.clone(), solved.steps))
            .map_err(|e| SearchError::Unvalidated(e.to_string()))?;
        Ok(Solved { cost: solved.cost, steps: back.steps })
    }

    fn items(t: &FiniteTree) -> Vec<Prefixed> {
        t.children().iter().map(|(a, s)| Prefixed(a.clone(), s.clone())).collect()
    }

    fn candidates(&mut self, items: &[Prefixed], left: &FiniteTree, right: &FiniteTree) -> BTreeSet<Prefixed> {
        let mut out: BTreeSet<Prefixed> = items.iter().cloned().collect();
        if self.cfg.centers == CenterPolicy::InputsOnly {
            return out;
        }
        let subtrees: BTreeSet<FiniteTree> = items.iter().map(|p| p.1.clone()).collect();
        for a in self.dom.actions() {
            for s in &subtrees {
                out.insert(Prefixed(a.clone(), s.clone()));
            }
        }
        let CenterPolicy::Synthesized { width } = self.cfg.centers else {
            return out;
        };
        let widest = |t: &FiniteTree| t.children().iter().map(|(_, s)| s.width1()).max().unwrap_or(0);
        let width = width.unwrap_or(widest(left) + widest(right));
        let grand: BTreeSet<FiniteTree> =
            subtrees.iter().flat_map(|s| s.children().iter().map(|(_, v)| v.clone())).collect();
        let pool: Vec<(Action, FiniteTree)> =
            self.dom.actions().flat_map(|a| grand.iter().map(move |v| (a.clone(), v.clone()))).collect();
        let mut made = 0;
        'sizes: for size in 0..=width.min(pool.len()) {
            let mut idx: Vec<usize> = (0..size).collect();
            loop {
                if made >= self.cfg.max_candidates {
                    self.truncated = true;
                    break 'sizes;
                }
                let x = FiniteTree::from_children(idx.iter().map(|&i| pool[i].clone()).collect());
                for a in self.dom.actions() {
                    out.insert(Prefixed(a.clone(), x.clone()));
                }
                made += 1;
                // next combination in lexicographic order
                let mut k = size;
                while k > 0 && idx[k - 1] == pool.len() - size + k - 1 {
                    k -= 1;
                }
                if k == 0 {
                    break;
                }
                idx[k - 1] += 1;
                for j in k..size {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        out
    }

    /// Cost of changing summand `x` into `y` directly.
    fn edge(&mut self, x: &Prefixed, y: &Prefixed) -> Result<Cost, SearchError> {
        let d = self.dom.dist(&x.0, &y.0);
        if !d.is_finite() || (x.0 != y.0 && !(self.dom.contains(&x.0) && self.dom.contains(&y.0))) {
            return Ok(Cost::Infinite);
        }
        let inner = self.solve(&x.1, &y.1)?.cost;
        Ok(d + inner.scale(self.alpha.value()))
    }

    fn diabolo(&mut self, s: &FiniteTree, u: &FiniteTree) -> Result<Solved, SearchError> {
        let a = Self::items(s);
        let b = Self::items(u);
        if a.is_empty() || b.is_empty() {
            return Ok(Solved { cost: Cost::Infinite, steps: Vec::new() });
        }
        let n = a.len() + b.len();
        if n > MAX_ITEMS {
            return Err(SearchError::ScaleExceeded(format!("{n} summands in one subproblem")));
        }
        let all: Vec<Prefixed> = a.iter().chain(&b).cloned().collect();
        let labels: Vec<Prefixed> = self.candidates(&all, s, u).into_iter().collect();
        let nl = labels.len();
        let index = |p: &Prefixed| labels.binary_search(p).expect("items are labels");

        // metric closure with first hops
        let mut dist = vec![vec![Cost::Infinite; nl]; nl];
        let mut hop = vec![vec![usize::MAX; nl]; nl];
        for i in 0..nl {
            dist[i][i] = Cost::zero();
            hop[i][i] = i;
            for j in i + 1..nl {
                let c = self.edge(&labels[i], &labels[j])?;
                if c.is_finite() {
                    hop[i][j] = j;
                    hop[j][i] = i;
                }
                dist[i][j] = c.clone();
                dist[j][i] = c;
            }
        }
        for k in 0..nl {
            for i in 0..nl {
                if !dist[i][k].is_finite() {
                    continue;
                }
                for j in 0..nl {
                    let via = &dist[i][k] + &dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                        hop[i][j] = hop[i][k];
                    }
                }
            }
        }

        let terms: Vec<usize> = all.iter().map(index).collect::<BTreeSet<_>>().into_iter().collect();
        let k = terms.len();
        if k > MAX_TERMINALS {
            return Err(SearchError::ScaleExceeded(format!("{k} distinct summands in one subproblem")));
        }
        let bit = |p: &Prefixed| 1usize << terms.binary_search(&index(p)).expect("terminal");
        let st = Steiner::new(&dist, &terms);

        // group costs over subsets of the n summands
        let full = 1usize << n;
        let mut group = vec![(Cost::Infinite, usize::MAX); full];
        for (g, slot) in group.iter_mut().enumerate() {
            let ma = (0..a.len()).filter(|i| g >> i & 1 == 1).fold(0, |m, i| m | bit(&a[i]));
            let mb = (0..b.len()).filter(|j| g >> (a.len() + j) & 1 == 1).fold(0, |m, j| m | bit(&b[j]));
            if ma == 0 || mb == 0 {
                continue;
            }
            for c in 0..nl {
                let v = &st.cost[ma][c] + &st.cost[mb][c];
                if v < slot.0 {
                    *slot = (v, c);
                }
            }
        }
        // best partition of each subset into groups
        let mut part = vec![(Cost::Infinite, 0usize); full];
        part[0] = (Cost::zero(), 0);
        for set in 1..full {
            let low = set & set.wrapping_neg();
            let rest = set ^ low;
            let mut sub = rest;
            loop {
                let g = sub | low;
                if group[g].0.is_finite() && part[set ^ g].0.is_finite() {
                    let v = &group[g].0 + &part[set ^ g].0;
                    if v < part[set].0 {
                        part[set] = (v, g);
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        if !part[full - 1].0.is_finite() {
            return Ok(Solved { cost: Cost::Infinite, steps: Vec::new() });
        }

        // plan: per group, merge the left summands into the center, then
        // split the center out into the right summands
        let mut ops: Vec<LabelOp<usize>> = Vec::new();
        let mut set = full - 1;
        while set != 0 {
            let g = part[set].1;
            let c = group[g].1;
            let left: BTreeSet<usize> = (0..a.len()).filter(|i| g >> i & 1 == 1).map(|i| index(&a[i])).collect();
            let right: BTreeSet<usize> =
                (0..b.len()).filter(|j| g >> (a.len() + j) & 1 == 1).map(|j| index(&b[j])).collect();
            let mask = |side: &BTreeSet<usize>| side.iter().fold(0, |m, &x| m | bit(&labels[x]));
            ops.extend(st.merge_plan(&hop, mask(&left), &left, c));
            let out = st.merge_plan(&hop, mask(&right), &right, c);
            ops.extend(out.into_iter().rev().map(|op| match op {
                LabelOp::Merge(x) => LabelOp::Split(x),
                LabelOp::Split(x) => LabelOp::Merge(x),
                LabelOp::Change(x, y) => LabelOp::Change(y, x),
            }));
            set ^= g;
        }
        let mut cur = s.clone();
        let mut steps = Vec::new();
        let mut total = Cost::zero();
        for op in ops {
            let (new_steps, c) = self.realize_op(&cur, &op, &labels)?;
            for st in &new_steps {
                cur = apply_structural(&cur, st).map_err(|e| SearchError::Unvalidated(e.to_string()))?.tree;
            }
            steps.extend(new_steps);
            total = total + c;
        }
        if cur != *u {
            return Err(SearchError::Unvalidated(format!("plan ends at {cur} instead of {u}")));
        }
        Ok(Solved { cost: total, steps })
    }

    /// Root-level steps for one label operation on the current tree.
    fn realize_op(&mut self, cur: &FiniteTree, op: &LabelOp<usize>, labels: &[Prefixed]) -> Result<(Vec<Step>, Cost), SearchError> {
        let find = |p: &Prefixed| {
            cur.position_of(&p.0, &p.1).ok_or_else(|| SearchError::Unvalidated(format!("missing summand {p}")))
        };
        match op {
            LabelOp::Split(x) => Ok((vec![Step::dup(vec![], find(&labels[*x])?)], Cost::zero())),
            LabelOp::Merge(x) => {
                let i = find(&labels[*x])?;
                Ok((vec![Step::drop(vec![], i, i + 1)], Cost::zero()))
            }
            LabelOp::Change(x, y) => {
                let (from, to) = (&labels[*x], &labels[*y]);
                let mut i = find(from)?;
                let inner = self.solve(&from.1, &to.1)?;
                let mut tree = cur.clone();
                let mut steps = Vec::new();
                for st in inner.steps {
                    let mut position = vec![i];
                    position.extend(st.position);
                    let shifted = Step { position, kind: st.kind, cost: st.cost * self.alpha.value() };
                    let landing = apply_structural(&tree, &shifted).map_err(|e| SearchError::Unvalidated(e.to_string()))?;
                    i = landing.position[0];
                    tree = landing.tree;
                    steps.push(shifted);
                }
                let d = self.dom.dist(&from.0, &to.0);
                if from.0 != to.0 {
                    let cost = *d.finite().ok_or_else(|| SearchError::Unvalidated("infinite relabel".into()))?;
                    steps.push(Step::relabel(vec![], i, from.0.as_str(), to.0.as_str(), cost));
                }
                Ok((steps, d + inner.cost.scale(self.alpha.value())))
            }
        }
    }
}

/// Dreyfus-Wagner table over a metric closure: `cost[mask][v]` is the
/// cheapest tree joining the terminals in `mask` and `v`.
struct Steiner {
    terms: Vec<usize>,
    cost: Vec<Vec<Cost>>,
    /// `(u, sub)`: `v` joins through `u`, where the tree splits into
    /// `sub` and `mask ^ sub`.
    back: Vec<Vec<(usize, usize)>>,
}

impl Steiner {
    fn new(dist: &[Vec<Cost>], terms: &[usize]) -> Self {
        let nl = dist.len();
        let k = terms.len();
        let full = 1usize << k;
        let mut cost = vec![vec![Cost::Infinite; nl]; full];
        let mut back = vec![vec![(usize::MAX, 0); nl]; full];
        for (t, &x) in terms.iter().enumerate() {
            cost[1 << t][..nl].clone_from_slice(&dist[x][..nl]);
        }
        for mask in 1..full {
            if mask.count_ones() < 2 {
                continue;
            }
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            let mut joined = vec![(Cost::Infinite, 0usize); nl];
            for (u, slot) in joined.iter_mut().enumerate() {
                let mut sub = rest;
                // proper subsets containing the lowest terminal
                while sub != 0 {
                    let left = sub ^ rest | low;
                    let right = mask ^ left;
                    if right != 0 {
                        let v = &cost[left][u] + &cost[right][u];
                        if v < slot.0 {
                            *slot = (v, left);
                        }
                    }
                    sub = (sub - 1) & rest;
                }
                let left = low;
                let v = &cost[left][u] + &cost[rest][u];
                if v < slot.0 {
                    *slot = (v, left);
                }
            }
            for v in 0..nl {
                for (u, (c, sub)) in joined.iter().enumerate() {
                    let total = &dist[v][u] + c;
                    if total < cost[mask][v] {
                        cost[mask][v] = total;
                        back[mask][v] = (u, *sub);
                    }
                }
            }
        }
        Steiner { terms: terms.to_vec(), cost, back }
    }

    /// Closure edges of the optimal tree for `(mask, v)`.
    fn edges(&self, mask: usize, v: usize, out: &mut Vec<(usize, usize)>) {
        if mask.count_ones() == 1 {
            out.push((self.terms[mask.trailing_zeros() as usize], v));
            return;
        }
        let (u, sub) = self.back[mask][v];
        out.push((v, u));
        self.edges(sub, u, out);
        self.edges(mask ^ sub, u, out);
    }

    /// Ops merging one summand per label of `side` into `center` along
    /// the Steiner tree, leaves first.
    fn merge_plan(&self, hop: &[Vec<usize>], mask: usize, side: &BTreeSet<usize>, center: usize) -> Vec<LabelOp<usize>> {
        let mut closure = Vec::new();
        self.edges(mask, center, &mut closure);
        let mut adj: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
        for (x, y) in closure {
            let mut p = x;
            while p != y {
                let q = hop[p][y];
                adj.entry(p).or_default().insert(q);
                adj.entry(q).or_default().insert(p);
                p = q;
            }
        }
        // breadth-first spanning tree from the center
        let mut order = vec![center];
        let mut parent = std::collections::BTreeMap::new();
        parent.insert(center, center);
        let mut i = 0;
        while i < order.len() {
            let v = order[i];
            for &w in adj.get(&v).into_iter().flatten() {
                if let std::collections::btree_map::Entry::Vacant(e) = parent.entry(w) {
                    e.insert(v);
                    order.push(w);
                }
            }
            i += 1;
        }
        let mut count: std::collections::BTreeMap<usize, usize> = Default::default();
        let mut ops = Vec::new();
        for &v in order.iter().rev() {
            let c = count.get(&v).copied().unwrap_or(0) + usize::from(side.contains(&v));
            for _ in 1..c {
                ops.push(LabelOp::Merge(v));
            }
            if v != center && c > 0 {
                ops.push(LabelOp::Change(v, parent[&v]));
                *count.entry(parent[&v]).or_default() += 1;
            }
        }
        ops
    }
}

/// Witnessed upper bound by recursive diabolo search over prefixed
/// trees. Exact for depth-one trees unless centers are inputs only.
pub fn upper_bound(
    t: &FiniteTree,
    u: &FiniteTree,
    alpha: &Alpha,
    dom: &ActionDomain,
    cfg: &SearchConfig,
) -> Result<BoundResult, SearchError> {
    let (s, v) = (t.dedup(), u.dedup());
    let mut engine = Lifted::new(alpha, dom, cfg);
    let solved = engine.solve(&s, &v)?;
    let exact = t.depth().max(u.depth()) <= 1 && cfg.centers != CenterPolicy::InputsOnly && !engine.truncated;
    match &solved.cost {
        Cost::Infinite => Ok(BoundResult { exact, ..infinite() }),
        Cost::Finite(c) => {
            let seq = certify(t, u, solved.steps, c, alpha, dom)?;
            Ok(BoundResult { cost: solved.cost.clone(), witness: Some(seq), exact })
        }
    }
}

/// Minimum over unions of diabolos between depth-one trees, with centers
/// and Steiner points ranging over the whole alphabet.
pub fn diabolo_solve(a: &[Action], b: &[Action], dom: &ActionDomain, alpha: &Alpha) -> Result<BoundResult, SearchError> {
    let t = FiniteTree::flat(a.iter().map(|x| x.as_str()));
    let u = FiniteTree::flat(b.iter().map(|x| x.as_str()));
    let cfg = SearchConfig { centers: CenterPolicy::Alphabet, ..SearchConfig::default() };
    upper_bound(&t, &u, alpha, dom, &cfg)
}

/// Lower bound: every summand must end up somewhere on the other side,
/// paying at least its cheapest match level by level.
pub fn hausdorff_bound(s: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain) -> Cost {
    fn go(s: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain, memo: &mut HashMap<(FiniteTree, FiniteTree), Cost>) -> Cost {
        if s == u {
            return Cost::zero();
        }
        if s.is_zero() || u.is_zero() {
            return Cost::Infinite;
        }
        if let Some(c) = memo.get(&(s.clone(), u.clone())) {
            return c.clone();
        }
        let mut pair = |x: &(Action, FiniteTree), y: &(Action, FiniteTree)| {
            let d = dom.dist(&x.0, &y.0);
            if !d.is_finite() {
                return d;
            }
            d + go(&x.1, &y.1, alpha, dom, memo).scale(alpha.value())
        };
        let mut worst = Cost::zero();
        for x in s.children() {
            let m = u.children().iter().map(|y| pair(x, y)).min().unwrap_or(Cost::Infinite);
            worst = worst.max(m);
        }
        for y in u.children() {
            let m = s.children().iter().map(|x| pair(x, y)).min().unwrap_or(Cost::Infinite);
            worst = worst.max(m);
        }
        memo.insert((s.clone(), u.clone()), worst.clone());
        worst
    }
    go(&s.dedup(), &u.dedup(), alpha, dom, &mut HashMap::new())
}

/// One relabel on a normal form, optionally keeping the original summand
/// at each node along the way, followed by re-normalization.
fn moves(x: &FiniteTree, alpha: &Alpha, dom: &ActionDomain) -> Vec<(Vec<Step>, Cost, FiniteTree)> {
    let mut out = Vec::new();
    // (path of (index, keep) pairs, node)
    let mut frontier: Vec<(Vec<(usize, bool)>, &FiniteTree)> = vec![(Vec::new(), x)];
    while let Some((path, node)) = frontier.pop() {
        for (j, (a, sub)) in node.children().iter().enumerate() {
            let mut deeper = path.clone();
            deeper.push((j, false));
            frontier.push((deeper.clone(), sub));
            deeper.last_mut().expect("pushed").1 = true;
            frontier.push((deeper, sub));
            if !dom.contains(a) {
                continue;
            }
            let weight = alpha.level_weight(path.len() + 1);
            for b in dom.actions() {
                let d = dom.dist(a, b);
                if b == a || !d.is_finite() {
                    continue;
                }
                for keep in [false, true] {
                    let mut steps = Vec::new();
                    let mut position = Vec::new();
                    for &(i, k) in &path {
                        if k {
                            steps.push(Step::dup(position.clone(), i));
                        }
                        position.push(i);
                    }
                    if keep {
                        steps.push(Step::dup(position.clone(), j));
                    }
                    let cost = d.finite().copied().expect("finite") * weight;
                    steps.push(Step::relabel(position, j, a.as_str(), b.as_str(), cost));
                    let mut tree = x.clone();
                    for st in &steps {
                        tree = apply_structural(&tree, st).expect("valid by construction").tree;
                    }
                    steps.extend(dedup_steps(&tree));
                    let next = tree.dedup();
                    out.push((steps, Cost::Finite(cost), next));
                }
            }
        }
    }
    out
}

/// Exhaustive search over normal forms of trees of depth at most two,
/// best-first with [`hausdorff_bound`] as the heuristic.
///
/// Without a width cap or ceiling the incumbent comes from
/// [`upper_bound`], and only strictly cheaper sequences are explored.
/// With a ceiling, sequences up to and including it are explored and
/// [`SearchError::NotFound`] reports that none reaches the target.
pub fn exact_depth2_experimental(
    t: &FiniteTree,
    u: &FiniteTree,
    alpha: &Alpha,
    dom: &ActionDomain,
    cfg: &SearchConfig,
) -> Result<BoundResult, SearchError> {
    if t.depth().max(u.depth()) > 2 {
        return Err(SearchError::TooDeep { max: 2 });
    }
    if t.depth() <= 1 && u.depth() <= 1 && cfg.max_stage_width.is_none() && cfg.ceiling.is_none() {
        let labels = |x: &FiniteTree| x.children().iter().map(|(a, _)| a.clone()).collect::<Vec<_>>();
        return exact_depth1(&labels(t), &labels(u), dom, alpha);
    }
    let restricted = cfg.max_stage_width.is_some() || cfg.ceiling.is_some();
    let incumbent = if restricted {
        None
    } else {
        Some(upper_bound(t, u, alpha, dom, &SearchConfig { centers: CenterPolicy::Synthesized { width: None }, ..cfg.clone() })?)
    };
    let limit = match (&incumbent, &cfg.ceiling) {
        (Some(r), _) => r.cost.clone(),
        (None, Some(c)) => Cost::Finite(*c),
        (None, None) => Cost::Infinite,
    };
    let within = |c: &Cost| if incumbent.is_some() { *c < limit } else { *c <= limit };
    let fits = |x: &FiniteTree| cfg.max_stage_width.map_or(true, |w| x.width_k(2) <= w);
    let start = t.dedup();
    let goal = u.dedup();
    if !fits(&start) || !fits(&goal) {
        return Err(SearchError::NotFound(limit));
    }

    let mut best: HashMap<FiniteTree, Cost> = HashMap::new();
    let mut prev: HashMap<FiniteTree, (FiniteTree, Vec<Step>)> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start.clone(), Cost::zero());
    heap.push(Reverse((hausdorff_bound(&start, &goal, alpha, dom), Cost::zero(), start.clone())));
    while let Some(Reverse((_, g, x))) = heap.pop() {
        if best.get(&x).is_some_and(|b| *b < g) {
            continue;
        }
        if x == goal {
            let mut core = Vec::new();
            let mut cur = x;
            while let Some((p, steps)) = prev.get(&cur) {
                core.push(steps.clone());
                cur = p.clone();
            }
            core.reverse();
            let core: Vec<Step> = core.into_iter().flatten().collect();
            if cfg.max_steps.is_some_and(|m| core.len() > m) {
                return Err(SearchError::ScaleExceeded(format!("witness of {} steps", core.len())));
            }
            let cost = g.finite().copied().expect("finite");
            let seq = certify(t, u, core, &cost, alpha, dom)?;
            return Ok(BoundResult { cost: g, witness: Some(seq), exact: true });
        }
        for (steps, c, next) in moves(&x, alpha, dom) {
            if !fits(&next) {
                continue;
            }
            let g2 = &g + &c;
            let f2 = &g2 + &hausdorff_bound(&next, &goal, alpha, dom);
            if !within(&f2) || best.get(&next).is_some_and(|b| *b <= g2) {
                continue;
            }
            if best.len() >= cfg.max_states {
                return Err(SearchError::ScaleExceeded(format!("more than {} states", cfg.max_states)));
            }
            best.insert(next.clone(), g2.clone());
            prev.insert(next.clone(), (x.clone(), steps));
            heap.push(Reverse((f2, g2, next)));
        }
    }
    match incumbent {
        Some(r) => Ok(BoundResult { exact: true, ..r }),
        None => Err(SearchError::NotFound(limit)),
    }
}

/// A named distance engine.
pub trait DistanceSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, t: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain, cfg: &SearchConfig)
        -> Result<BoundResult, SearchError>;
}

fn depth1_labels(t: &FiniteTree) -> Result<Vec<Action>, SearchError> {
    if t.depth() > 1 {
        return Err(SearchError::TooDeep { max: 1 });
    }
    Ok(t.children().iter().map(|(a, _)| a.clone()).collect())
}

pub struct ExactDepth1;
pub struct DiaboloSolver;
pub struct UpperBound;
pub struct ExactDepth2;

impl DistanceSolver for ExactDepth1 {
    fn name(&self) -> &'static str {
        "exact1"
    }
    fn solve(&self, t: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain, _: &SearchConfig) -> Result<BoundResult, SearchError> {
        exact_depth1(&depth1_labels(t)?, &depth1_labels(u)?, dom, alpha)
    }
}

impl DistanceSolver for DiaboloSolver {
    fn name(&self) -> &'static str {
        "diabolo"
    }
    fn solve(&self, t: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain, _: &SearchConfig) -> Result<BoundResult, SearchError> {
        diabolo_solve(&depth1_labels(t)?, &depth1_labels(u)?, dom, alpha)
    }
}

impl DistanceSolver for UpperBound {
    fn name(&self) -> &'static str {
        "upper"
    }
    fn solve(&self, t: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain, cfg: &SearchConfig) -> Result<BoundResult, SearchError> {
        upper_bound(t, u, alpha, dom, cfg)
    }
}

impl DistanceSolver for ExactDepth2 {
    fn name(&self) -> &'static str {
        "exact2"
    }
    fn solve(&self, t: &FiniteTree, u: &FiniteTree, alpha: &Alpha, dom: &ActionDomain, cfg: &SearchConfig) -> Result<BoundResult, SearchError> {
        exact_depth2_experimental(t, u, alpha, dom, cfg)
    }
}

/// Solvers selectable by name.
pub struct SolverRegistry {
    entries: Vec<Box<dyn DistanceSolver>>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry { entries: Vec::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(ExactDepth1));
        r.register(Box::new(DiaboloSolver));
        r.register(Box::new(UpperBound));
        r.register(Box::new(ExactDepth2));
        r
    }

    /// Adds a solver, replacing any with the same name.
    pub fn register(&mut self, s: Box<dyn DistanceSolver>) {
        self.entries.retain(|e| e.name() != s.name());
        self.entries.push(s);
    }

    pub fn get(&self, name: &str) -> Option<&dyn DistanceSolver> {
        self.entries.iter().find(|e| e.name() == name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> Action {
        Action::new(s)
    }

    fn acts(v: &[&str]) -> Vec<Action> {
        v.iter().map(|s| act(s)).collect()
    }

    fn ab(d: i128) -> ActionDomain {
        let mut dom = ActionDomain::new();
        dom.set(act("a"), act("b"), Rational::from_integer(d));
        dom
    }

    #[test]
    fn merge_relabel_split() {
        let dom = ab(4);
        let alpha = Alpha::half();
        let e = exact_depth1(&acts(&["a", "a"]), &acts(&["b", "b"]), &dom, &alpha).unwrap();
        assert_eq!(e.cost, Cost::from_integer(4));
        assert!(e.exact);
        let d = diabolo_solve(&acts(&["a", "a"]), &acts(&["b", "b"]), &dom, &alpha).unwrap();
        assert_eq!(d.cost, Cost::from_integer(4));
        assert_eq!(d.witness.unwrap().len(), 3);
    }

    #[test]
    fn trivial_cases() {
        let dom = ab(1);
        let one = Alpha::one();
        assert_eq!(exact_depth1(&acts(&["a"]), &acts(&["a"]), &dom, &one).unwrap().cost, Cost::zero());
        assert_eq!(exact_depth1(&acts(&["a", "b"]), &acts(&["b", "a"]), &dom, &one).unwrap().cost, Cost::zero());
        assert_eq!(diabolo_solve(&acts(&["a"]), &acts(&["b"]), &dom, &one).unwrap().cost, Cost::from_integer(1));
        assert_eq!(exact_depth1(&acts(&["a"]), &[], &dom, &one).unwrap().cost, Cost::Infinite);
        let t = FiniteTree::chain(["a", "b", "a"]);
        let r = upper_bound(&t, &t, &one, &dom, &SearchConfig::default()).unwrap();
        assert_eq!(r.cost, Cost::zero());
        assert!(r.witness.unwrap().is_empty());
    }

    #[test]
    fn swap_example() {
        let dom = ab(1);
        let t = FiniteTree::from_children(vec![
            (act("a"), FiniteTree::leaf("c")),
            (act("b"), FiniteTree::leaf("d")),
        ]);
        let u = FiniteTree::from_children(vec![
            (act("a"), FiniteTree::leaf("d")),
            (act("b"), FiniteTree::leaf("c")),
        ]);
        let r = upper_bound(&t, &u, &Alpha::one(), &dom, &SearchConfig::default()).unwrap();
        assert_eq!(r.cost, Cost::from_integer(2));
        let e = exact_depth2_experimental(&t, &u, &Alpha::one(), &dom, &SearchConfig::default()).unwrap();
        assert_eq!(e.cost, Cost::from_integer(2));
    }

    #[test]
    fn chains_follow_the_discount() {
        let dom = ab(1);
        let half = Alpha::half();
        for n in 1..=6 {
            let a = FiniteTree::chain(vec!["a"; n]);
            let b = FiniteTree::chain(vec!["b"; n]);
            let r = upper_bound(&a, &b, &half, &dom, &SearchConfig::default()).unwrap();
            let expect = Rational::from_integer(2) - Rational::new(2, 1) / Rational::from_integer(1 << n);
            assert_eq!(r.cost, Cost::Finite(expect), "n = {n}");
        }
    }

    #[test]
    fn dedup_steps_reach_normal_form() {
        let t = FiniteTree::from_children(vec![
            (act("a"), FiniteTree::flat(["b", "b"])),
            (act("a"), FiniteTree::leaf("b")),
            (act("c"), FiniteTree::zero()),
        ]);
        let seq = StepSequence::new(Alpha::one(), t.clone(), dedup_steps(&t));
        assert_eq!(seq.target().unwrap(), t.dedup());
    }

    #[test]
    fn registry_names() {
        let r = SolverRegistry::with_defaults();
        assert_eq!(r.names(), vec!["exact1", "diabolo", "upper", "exact2"]);
        assert!(r.get("upper").is_some());
    }

    fn blowup() -> (FiniteTree, FiniteTree, ActionDomain) {
        let t = FiniteTree::from_children(vec![
            (act("1"), FiniteTree::flat(["2", "3", "4", "5"])),
            (act("1"), FiniteTree::flat(["1", "2", "3", "4"])),
        ]);
        let u = FiniteTree::prefix(act("1"), FiniteTree::flat(["1", "2", "4", "5"]));
        (t, u, ActionDomain::usual_on(1..=5))
    }

    #[test]
    fn blowup_needs_a_wide_center() {
        let (t, u, dom) = blowup();
        let one = Alpha::one();
        let wide = upper_bound(&t, &u, &one, &dom, &SearchConfig::default()).unwrap();
        assert_eq!(wide.cost, Cost::from_integer(3));
        let narrow = SearchConfig { centers: CenterPolicy::Synthesized { width: Some(4) }, ..SearchConfig::default() };
        let r = upper_bound(&t, &u, &one, &dom, &narrow).unwrap();
        assert!(r.cost >= Cost::from_integer(4), "{}", r.cost);
        let inputs = SearchConfig { centers: CenterPolicy::InputsOnly, ..SearchConfig::default() };
        assert!(upper_bound(&t, &u, &one, &dom, &inputs).unwrap().cost >= Cost::from_integer(4));
    }

    #[test]
    fn blowup_exact_and_restricted() {
        let (t, u, dom) = blowup();
        let one = Alpha::one();
        let e = exact_depth2_experimental(&t, &u, &one, &dom, &SearchConfig::default()).unwrap();
        assert_eq!(e.cost, Cost::from_integer(3));
        assert!(e.exact);
        let capped = SearchConfig {
            max_stage_width: Some(4),
            ceiling: Some(Rational::from_integer(3)),
            ..SearchConfig::default()
        };
        assert_eq!(
            exact_depth2_experimental(&t, &u, &one, &dom, &capped),
            Err(SearchError::NotFound(Cost::from_integer(3)))
        );
    }

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Shortest-path closure of random weights: always a metric.
    fn random_metric(rng: &mut ChaCha8Rng, k: usize) -> ActionDomain {
        let names: Vec<String> = (0..k).map(|i| format!("x{i}")).collect();
        let mut w = vec![vec![None; k]; k];
        for i in 0..k {
            w[i][i] = Some(Rational::from_integer(0));
            for j in i + 1..k {
                if rng.gen_bool(0.8) {
                    let r = Rational::new(rng.gen_range(1..8), rng.gen_range(1..3));
                    w[i][j] = Some(r);
                    w[j][i] = Some(r);
                }
            }
        }
        for m in 0..k {
            for i in 0..k {
                for j in 0..k {
                    if let (Some(a), Some(b)) = (w[i][m], w[m][j]) {
                        if w[i][j].map_or(true, |c| a + b < c) {
                            w[i][j] = Some(a + b);
                        }
                    }
                }
            }
        }
        let mut dom = ActionDomain::new();
        for i in 0..k {
            dom.add_action(act(&names[i]));
            for j in i + 1..k {
                if let Some(d) = w[i][j] {
                    dom.set(act(&names[i]), act(&names[j]), d);
                }
            }
        }
        dom
    }

    #[test]
    fn diabolo_matches_exhaustive_depth1() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..150 {
            let k = rng.gen_range(2..=4);
            let dom = random_metric(&mut rng, k);
            let names: Vec<Action> = dom.actions().cloned().collect();
            let na = rng.gen_range(1..=3);
            let nb = rng.gen_range(1..=6 - na).min(3);
            let a: Vec<Action> = (0..na).map(|_| names[rng.gen_range(0..k)].clone()).collect();
            let b: Vec<Action> = (0..nb).map(|_| names[rng.gen_range(0..k)].clone()).collect();
            let e = exact_depth1(&a, &b, &dom, &Alpha::one()).unwrap();
            let d = diabolo_solve(&a, &b, &dom, &Alpha::one()).unwrap();
            assert_eq!(e.cost, d.cost, "{a:?} -> {b:?} in {dom:?}");
        }
    }
}
