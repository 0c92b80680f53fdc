//! Multi-stage graphs of first-level transformations.
//!
//! Stage `i` holds one node per summand of the `i`-th tree of a depth-one
//! sequence. Arcs run forward and are splits, merges, relabels or
//! identities. The reductions here only delete nodes and arcs, so costs
//! never grow; [`realize`] turns any such graph back into a step list.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::hash::Hash;

use thiserror::Error;

use crate::cost::{Alpha, Cost};
use crate::domain::{Action, ActionDomain};
use crate::step::{apply_structural, SequenceError, Step, StepKind, StepSequence};
use crate::tree::FiniteTree;

/// Anything usable as a node label.
pub trait Label: Clone + Ord + Hash + fmt::Debug + fmt::Display {}
impl<T: Clone + Ord + Hash + fmt::Debug + fmt::Display> Label for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArcKind {
    Split,
    Merge,
    Relabel,
    Identity,
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArcKind::Split => "split",
            ArcKind::Merge => "merge",
            ArcKind::Relabel => "relabel",
            ArcKind::Identity => "id",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node<L> {
    pub stage: usize,
    pub label: L,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageArc {
    pub from: usize,
    pub to: usize,
    pub kind: ArcKind,
    pub cost: Cost,
}

/// Nodes are numbered densely; stage `0` is the source side and stage
/// `last_stage()` the target side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiStageGraph<L> {
    stages: usize,
    nodes: Vec<Node<L>>,
    arcs: Vec<StageArc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("step {0} is not a first-level step")]
    NotFirstLevel(usize),
    #[error("the {0} tree is deeper than one level")]
    NotDepthOne(&'static str),
    #[error(transparent)]
    Invalid(#[from] SequenceError),
    #[error("graph is not totally sides connecting")]
    NotTsc,
    #[error("graph is not totally both ways connected")]
    NotTbwc,
    #[error("component with nodes {0:?} is not a diabolo")]
    NotDiabolo(Vec<usize>),
    #[error("arc {0} does not run forward")]
    BackwardArc(usize),
}

/// A diabolo component: a center and the nodes before and after it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diabolo {
    pub center: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Diabolo {
    pub fn nodes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.left.iter().chain(&self.right).copied().collect();
        v.push(self.center);
        v.sort_unstable();
        v
    }
}

impl<L: Label> MultiStageGraph<L> {
    /// A graph with `stages` stages and no nodes.
    pub fn new(stages: usize) -> Self {
        MultiStageGraph { stages: stages.max(1), nodes: Vec::new(), arcs: Vec::new() }
    }

    pub fn add_node(&mut self, stage: usize, label: L) -> usize {
        assert!(stage < self.stages, "stage out of range");
        self.nodes.push(Node { stage, label });
        self.nodes.len() - 1
    }

    pub fn add_arc(&mut self, from: usize, to: usize, kind: ArcKind, cost: Cost) -> Result<usize, GraphError> {
        if self.nodes[from].stage >= self.nodes[to].stage {
            return Err(GraphError::BackwardArc(self.arcs.len()));
        }
        self.arcs.push(StageArc { from, to, kind, cost });
        Ok(self.arcs.len() - 1)
    }

    pub fn num_stages(&self) -> usize {
        self.stages
    }

    pub fn last_stage(&self) -> usize {
        self.stages - 1
    }

    pub fn nodes(&self) -> &[Node<L>] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[StageArc] {
        &self.arcs
    }

    pub fn stage_nodes(&self, stage: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].stage == stage).collect()
    }

    pub fn stage_sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.stages];
        for n in &self.nodes {
            out[n.stage] += 1;
        }
        out
    }

    /// Labels of a stage, sorted.
    pub fn stage_labels(&self, stage: usize) -> Vec<L> {
        let mut v: Vec<L> = self.stage_nodes(stage).into_iter().map(|i| self.nodes[i].label.clone()).collect();
        v.sort();
        v
    }

    pub fn total_cost(&self) -> Cost {
        self.arcs.iter().map(|a| a.cost.clone()).sum()
    }

    fn is_side(&self, v: usize) -> bool {
        let s = self.nodes[v].stage;
        s == 0 || s == self.last_stage()
    }

    fn degrees(&self) -> (Vec<usize>, Vec<usize>) {
        let mut ins = vec![0; self.nodes.len()];
        let mut outs = vec![0; self.nodes.len()];
        for a in &self.arcs {
            outs[a.from] += 1;
            ins[a.to] += 1;
        }
        (ins, outs)
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut succ = vec![Vec::new(); self.nodes.len()];
        let mut pred = vec![Vec::new(); self.nodes.len()];
        for a in &self.arcs {
            succ[a.from].push(a.to);
            pred[a.to].push(a.from);
        }
        (succ, pred)
    }

    /// Nodes reachable from `starts` along `adj`.
    fn reach(adj: &[Vec<usize>], starts: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut seen = vec![false; adj.len()];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for s in starts {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }

    /// For each node, the set of nodes of stage `side` connected to it.
    fn side_sets(&self, adj: &[Vec<usize>], side: usize) -> Vec<BTreeSet<usize>> {
        let mut out = vec![BTreeSet::new(); self.nodes.len()];
        for s in self.stage_nodes(side) {
            for (v, hit) in Self::reach(adj, [s]).into_iter().enumerate() {
                if hit {
                    out[v].insert(s);
                }
            }
        }
        out
    }

    /// Every source node reaches the target stage and every target node
    /// is reached from the source stage.
    pub fn is_tsc(&self) -> bool {
        let (succ, pred) = self.adjacency();
        let last = self.last_stage();
        let fwd = Self::reach(&succ, self.stage_nodes(0));
        let back = Self::reach(&pred, self.stage_nodes(last));
        self.stage_nodes(0).iter().all(|&v| back[v]) && self.stage_nodes(last).iter().all(|&v| fwd[v])
    }

    /// tsc, and every internal node has an incoming and an outgoing arc.
    pub fn is_tbwc(&self) -> bool {
        let (ins, outs) = self.degrees();
        self.is_tsc() && (0..self.nodes.len()).all(|v| self.is_side(v) || (ins[v] > 0 && outs[v] > 0))
    }

    /// Keeps the flagged nodes and arcs (arcs also need both ends kept)
    /// and renumbers nodes in their old order.
    fn retain(&self, keep_node: &[bool], keep_arc: &[bool]) -> Self {
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if keep_node[i] {
                map[i] = nodes.len();
                nodes.push(n.clone());
            }
        }
        let arcs = self
            .arcs
            .iter()
            .enumerate()
            .filter(|(i, a)| keep_arc[*i] && keep_node[a.from] && keep_node[a.to])
            .map(|(_, a)| StageArc { from: map[a.from], to: map[a.to], ..a.clone() })
            .collect();
        MultiStageGraph { stages: self.stages, nodes, arcs }
    }

    fn without_arc(&self, arc: usize) -> Self {
        let mut keep = vec![true; self.arcs.len()];
        keep[arc] = false;
        self.retain(&vec![true; self.nodes.len()], &keep)
    }

    /// Repeatedly removes internal nodes missing an incoming or an
    /// outgoing arc.
    pub fn prune_to_tbwc(&self) -> Result<Self, GraphError> {
        if !self.is_tsc() {
            return Err(GraphError::NotTsc);
        }
        let mut g = self.clone();
        loop {
            let (ins, outs) = g.degrees();
            let keep: Vec<bool> = (0..g.nodes.len()).map(|v| g.is_side(v) || (ins[v] > 0 && outs[v] > 0)).collect();
            if keep.iter().all(|k| *k) {
                return Ok(g);
            }
            g = g.retain(&keep, &vec![true; g.arcs.len()]);
        }
    }

    /// Earliest join sequence as `(arcs, intermediate nodes)`.
    fn find_join_sequence(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        let (ins, outs) = self.degrees();
        let mut out_arcs = vec![Vec::new(); self.nodes.len()];
        for (i, a) in self.arcs.iter().enumerate() {
            out_arcs[a.from].push(i);
        }
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&v| (self.nodes[v].stage, v));
        for u in order {
            if outs[u] < 2 {
                continue;
            }
            for &first in &out_arcs[u] {
                let mut arcs = vec![first];
                let mut inner = Vec::new();
                let mut w = self.arcs[first].to;
                while ins[w] == 1 && outs[w] == 1 && !self.is_side(w) {
                    inner.push(w);
                    let next = out_arcs[w][0];
                    arcs.push(next);
                    w = self.arcs[next].to;
                }
                if ins[w] >= 2 {
                    return Some((arcs, inner));
                }
            }
        }
        None
    }

    /// Earliest arc that may go because its head is left-reducible or its
    /// tail is right-reducible.
    fn find_reducible_arc(&self) -> Option<usize> {
        let (succ, pred) = self.adjacency();
        let (ins, outs) = self.degrees();
        let from_left = self.side_sets(&succ, 0);
        let from_right = self.side_sets(&pred, self.last_stage());
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&v| (self.nodes[v].stage, v));
        for v in order {
            if ins[v] >= 2 && from_left[v].len() == 1 {
                return self.arcs.iter().rposition(|a| a.to == v);
            }
            if outs[v] >= 2 && from_right[v].len() == 1 {
                return self.arcs.iter().rposition(|a| a.from == v);
            }
        }
        None
    }

    /// Deletes join sequences, then arcs at reducible nodes, pruning after
    /// each move, until none applies.
    pub fn reduce_to_diabolos(&self) -> Result<Self, GraphError> {
        if !self.is_tbwc() {
            return Err(GraphError::NotTbwc);
        }
        let mut g = self.clone();
        loop {
            if let Some((arcs, inner)) = g.find_join_sequence() {
                let mut keep_arc = vec![true; g.arcs.len()];
                for a in arcs {
                    keep_arc[a] = false;
                }
                let mut keep_node = vec![true; g.nodes.len()];
                for v in inner {
                    keep_node[v] = false;
                }
                g = g.retain(&keep_node, &keep_arc).prune_to_tbwc()?;
                continue;
            }
            if let Some(a) = g.find_reducible_arc() {
                g = g.without_arc(a).prune_to_tbwc()?;
                continue;
            }
            return Ok(g);
        }
    }

    /// Weakly connected components, each sorted, ordered by least node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for a in &self.arcs {
            adj[a.from].push(a.to);
            adj[a.to].push(a.from);
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut out = Vec::new();
        for v in 0..self.nodes.len() {
            if seen[v] {
                continue;
            }
            let hit = Self::reach(&adj, [v]);
            let comp: Vec<usize> = (0..self.nodes.len()).filter(|&w| hit[w]).collect();
            for &w in &comp {
                seen[w] = true;
            }
            out.push(comp);
        }
        out
    }

    /// Splits a reduced graph into its diabolos.
    pub fn decompose(&self) -> Result<Vec<Diabolo>, GraphError> {
        let (ins, outs) = self.degrees();
        let mut out = Vec::new();
        for comp in self.components() {
            let mut found = None;
            for stage in 0..self.stages {
                let at: Vec<usize> = comp.iter().copied().filter(|&v| self.nodes[v].stage == stage).collect();
                if at.len() != 1 {
                    continue;
                }
                let ok = comp.iter().all(|&v| {
                    let s = self.nodes[v].stage;
                    (s >= stage || outs[v] == 1) && (s <= stage || ins[v] == 1)
                });
                if ok {
                    found = Some((at[0], stage));
                    break;
                }
            }
            let (center, stage) = found.ok_or_else(|| GraphError::NotDiabolo(comp.clone()))?;
            out.push(Diabolo {
                center,
                left: comp.iter().copied().filter(|&v| self.nodes[v].stage < stage).collect(),
                right: comp.iter().copied().filter(|&v| self.nodes[v].stage > stage).collect(),
            });
        }
        Ok(out)
    }

    /// Deterministic Graphviz text. Diabolo centers, when the graph
    /// decomposes, are drawn as double circles.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph stages {\n  rankdir=LR;\n");
        if self.nodes.is_empty() {
            s.push_str("}\n");
            return s;
        }
        let centers: BTreeSet<usize> = match self.decompose() {
            Ok(ds) if self.is_tbwc() => ds.into_iter().map(|d| d.center).collect(),
            _ => BTreeSet::new(),
        };
        for stage in 0..self.stages {
            let ids = self.stage_nodes(stage);
            if ids.is_empty() {
                continue;
            }
            s.push_str(&format!("  subgraph stage{stage} {{\n    rank=same;\n"));
            for v in ids {
                let shape = if centers.contains(&v) { ", shape=doublecircle" } else { "" };
                s.push_str(&format!("    n{v} [label=\"{}\"{shape}];\n", self.nodes[v].label));
            }
            s.push_str("  }\n");
        }
        for a in &self.arcs {
            s.push_str(&format!("  n{} -> n{} [label=\"{} {}\"];\n", a.from, a.to, a.kind, a.cost));
        }
        s.push_str("}\n");
        s
    }
}

/// One operation on a multiset of labels. Equal labels are
/// interchangeable, so operations name values rather than positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelOp<L> {
    /// Add a second copy of a present label.
    Split(L),
    /// Remove one of two copies of a label.
    Merge(L),
    /// Change one copy of the first label into the second.
    Change(L, L),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelPlan<L> {
    pub source: Vec<L>,
    pub ops: Vec<LabelOp<L>>,
}

impl<L: Label> LabelPlan<L> {
    pub fn cost(&self, dist: &dyn Fn(&L, &L) -> Cost) -> Cost {
        self.ops
            .iter()
            .map(|op| match op {
                LabelOp::Change(x, y) => dist(x, y),
                _ => Cost::zero(),
            })
            .sum()
    }

    /// Multiset after each op, starting with the source.
    pub fn replay(&self) -> Option<Vec<Vec<L>>> {
        let mut cur = self.source.clone();
        cur.sort();
        let mut out = vec![cur.clone()];
        for op in &self.ops {
            match op {
                LabelOp::Split(x) => {
                    if !cur.contains(x) {
                        return None;
                    }
                    cur.push(x.clone());
                }
                LabelOp::Merge(x) => {
                    if cur.iter().filter(|y| *y == x).count() < 2 {
                        return None;
                    }
                    let i = cur.iter().position(|y| y == x)?;
                    cur.remove(i);
                }
                LabelOp::Change(x, y) => {
                    let i = cur.iter().position(|z| z == x)?;
                    cur[i] = y.clone();
                }
            }
            cur.sort();
            out.push(cur.clone());
        }
        Some(out)
    }
}

/// Sweeps the nodes in stage order, component by component. An item
/// travels unchanged through nodes with one arc in and one out; at any
/// other node incoming items are relabelled to the node label, merged,
/// and split once per extra outgoing arc.
pub fn realize<L: Label>(g: &MultiStageGraph<L>) -> LabelPlan<L> {
    let (succ, pred) = g.adjacency();
    let last = g.last_stage();
    let source: Vec<L> = g.stage_nodes(0).into_iter().map(|v| g.nodes[v].label.clone()).collect();
    let mut ops = Vec::new();
    // label currently carried into each node along each incoming arc
    let mut carried: Vec<Vec<L>> = vec![Vec::new(); g.nodes.len()];
    for comp in g.components() {
        let mut order = comp.clone();
        order.sort_by_key(|&v| (g.nodes[v].stage, v));
        for v in order {
            let node = &g.nodes[v];
            let stage = node.stage;
            let passes = stage != 0 && stage != last && pred[v].len() == 1 && succ[v].len() == 1;
            let outgoing = if passes {
                carried[v][0].clone()
            } else {
                for x in &carried[v] {
                    if *x != node.label {
                        ops.push(LabelOp::Change(x.clone(), node.label.clone()));
                    }
                }
                for _ in 1..carried[v].len() {
                    ops.push(LabelOp::Merge(node.label.clone()));
                }
                for _ in 1..succ[v].len() {
                    ops.push(LabelOp::Split(node.label.clone()));
                }
                node.label.clone()
            };
            for &w in &succ[v] {
                carried[w].push(outgoing.clone());
            }
        }
    }
    LabelPlan { source, ops }
}

/// Turns a plan over actions into first-level steps on the flat tree of
/// its source labels. Relabels declare their distance.
pub fn plan_to_sequence(plan: &LabelPlan<Action>, alpha: &Alpha, dom: &ActionDomain) -> Option<StepSequence> {
    let source = FiniteTree::flat(plan.source.iter().map(|a| a.as_str()));
    let mut cur = source.clone();
    let mut steps = Vec::new();
    let leaf = FiniteTree::zero();
    for op in &plan.ops {
        let step = match op {
            LabelOp::Split(x) => Step::dup(vec![], cur.position_of(x, &leaf)?),
            LabelOp::Merge(x) => {
                let i = cur.position_of(x, &leaf)?;
                Step::drop(vec![], i, i + 1)
            }
            LabelOp::Change(x, y) => {
                let cost = dom.dist(x, y).finite().copied()?;
                Step::relabel(vec![], cur.position_of(x, &leaf)?, x.as_str(), y.as_str(), cost)
            }
        };
        cur = apply_structural(&cur, &step).ok()?.tree;
        steps.push(step);
    }
    Some(StepSequence::new(alpha.clone(), source, steps))
}

/// Builds the graph of a depth-one sequence of first-level steps.
pub fn build_graph(seq: &StepSequence, dom: &ActionDomain) -> Result<MultiStageGraph<Action>, GraphError> {
    if let Some(i) = seq.steps.iter().position(|s| s.level() != 1) {
        return Err(GraphError::NotFirstLevel(i));
    }
    if seq.source.depth() > 1 {
        return Err(GraphError::NotDepthOne("source"));
    }
    let traj = seq.trajectory()?;
    let mut g = MultiStageGraph::new(seq.steps.len() + 1);
    let mut cur: Vec<usize> = seq.source.children().iter().map(|(a, _)| g.add_node(0, a.clone())).collect();
    let mut tree = seq.source.clone();
    for (i, (step, landing)) in seq.steps.iter().zip(&traj).enumerate() {
        let stage = i + 1;
        // (label, predecessor, arc kind) for every summand of the next tree
        let mut next: Vec<(Action, Vec<usize>, ArcKind)> = tree
            .children()
            .iter()
            .enumerate()
            .map(|(j, (a, _))| (a.clone(), vec![cur[j]], ArcKind::Identity))
            .collect();
        match &step.kind {
            StepKind::Dup { subject } => {
                next[*subject].2 = ArcKind::Split;
                let copy = next[*subject].clone();
                next.push(copy);
            }
            StepKind::Drop { first, second } => {
                let gone = next.remove(*second);
                let keep = if *second < *first { first - 1 } else { *first };
                next[keep].1.extend(gone.1);
                next[keep].2 = ArcKind::Merge;
            }
            StepKind::Relabel { subject, to, .. } => {
                next[*subject].0 = to.clone();
                next[*subject].2 = ArcKind::Relabel;
            }
        }
        next.sort_by(|x, y| x.0.cmp(&y.0));
        let mut ids = Vec::with_capacity(next.len());
        for (label, preds, kind) in next {
            let v = g.add_node(stage, label);
            for p in preds {
                let cost = dom.dist(&g.nodes[p].label, &g.nodes[v].label);
                g.add_arc(p, v, kind, cost)?;
            }
            ids.push(v);
        }
        cur = ids;
        tree = landing.tree.clone();
    }
    Ok(g)
}

/// Plan for a reduced graph, replayed as a depth-one sequence.
pub fn extract_sequence(g: &MultiStageGraph<Action>, alpha: &Alpha, dom: &ActionDomain) -> Option<StepSequence> {
    plan_to_sequence(&realize(g), alpha, dom)
}

/// `3(m + n - 2) + 1`, the step bound for depth-one sequences between
/// trees with `m` and `n` summands.
pub fn step_bound(m: usize, n: usize) -> usize {
    3 * (m + n).saturating_sub(2) + 1
}

/// Path compaction: joins every source node to the target side along
/// disjoint paths of the graph, splitting an earlier path where a new one
/// meets it, then does the same backwards for target nodes not yet
/// reached. Each path becomes one arc costing the distance of its ends.
pub fn compact_by_paths<L: Label>(
    g: &MultiStageGraph<L>,
    dist: &dyn Fn(&L, &L) -> Cost,
) -> Result<MultiStageGraph<L>, GraphError> {
    if !g.is_tsc() {
        return Err(GraphError::NotTsc);
    }
    let (succ, pred) = g.adjacency();
    let last = g.last_stage();
    // paths of the compacted graph, as node lists of `g` in forward order
    let mut paths: Vec<Vec<usize>> = Vec::new();
    let mut in_h: BTreeSet<usize> = BTreeSet::new();
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();

    fn route(adj: &[Vec<usize>], from: usize, goal: &dyn Fn(usize) -> bool) -> Option<Vec<usize>> {
        let mut prev = vec![usize::MAX; adj.len()];
        let mut seen = vec![false; adj.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(v) = queue.pop_front() {
            if goal(v) {
                let mut path = vec![v];
                let mut x = v;
                while x != from {
                    x = prev[x];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    prev[w] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    fn attach(
        walk: Vec<usize>,
        forward: bool,
        paths: &mut Vec<Vec<usize>>,
        in_h: &mut BTreeSet<usize>,
        owner: &mut BTreeMap<usize, usize>,
    ) {
        // the walk starts at the new side node and ends where it meets H or the far side
        let meet = walk[walk.len() - 1];
        if !in_h.contains(&meet) {
            if let Some(&p) = owner.get(&meet) {
                let old = paths[p].clone();
                let cut = old.iter().position(|&x| x == meet).expect("owner holds node");
                paths[p] = old[..=cut].to_vec();
                let tail = old[cut..].to_vec();
                let q = paths.len();
                for &x in &tail[1..] {
                    owner.insert(x, q);
                }
                paths.push(tail);
            }
            in_h.insert(meet);
        }
        in_h.insert(walk[0]);
        let mut path = walk;
        if !forward {
            path.reverse();
        }
        let q = paths.len();
        for &x in &path {
            owner.entry(x).or_insert(q);
        }
        paths.push(path);
    }

    for a in g.stage_nodes(0) {
        if last == 0 {
            in_h.insert(a);
            continue;
        }
        let walk = {
            let covered = |v: usize| v != a && (owner.contains_key(&v) || g.nodes[v].stage == last);
            route(&succ, a, &covered).ok_or(GraphError::NotTsc)?
        };
        attach(walk, true, &mut paths, &mut in_h, &mut owner);
    }
    for b in g.stage_nodes(last) {
        if in_h.contains(&b) {
            continue;
        }
        let walk = {
            let covered = |v: usize| v != b && (owner.contains_key(&v) || g.nodes[v].stage == 0);
            route(&pred, b, &covered).ok_or(GraphError::NotTsc)?
        };
        attach(walk, false, &mut paths, &mut in_h, &mut owner);
    }
    let mut h = MultiStageGraph::new(g.stages);
    let mut map = BTreeMap::new();
    for &v in &in_h {
        map.insert(v, h.add_node(g.nodes[v].stage, g.nodes[v].label.clone()));
    }
    for p in &paths {
        let (x, y) = (p[0], p[p.len() - 1]);
        if x == y {
            continue;
        }
        let (lx, ly) = (&g.nodes[x].label, &g.nodes[y].label);
        let kind = if lx == ly { ArcKind::Identity } else { ArcKind::Relabel };
        h.add_arc(map[&x], map[&y], kind, dist(lx, ly))?;
    }
    Ok(h)
}

/// A way of shrinking a tsc graph without raising its cost.
pub trait Compactor<L: Label>: Send + Sync {
    fn name(&self) -> &'static str;
    fn compact(&self, g: &MultiStageGraph<L>, dist: &dyn Fn(&L, &L) -> Cost) -> Result<MultiStageGraph<L>, GraphError>;
}

/// Prune, then reduce to a union of diabolos.
pub struct DiaboloCompactor;

impl<L: Label> Compactor<L> for DiaboloCompactor {
    fn name(&self) -> &'static str {
        "diabolo"
    }

    fn compact(&self, g: &MultiStageGraph<L>, _dist: &dyn Fn(&L, &L) -> Cost) -> Result<MultiStageGraph<L>, GraphError> {
        g.prune_to_tbwc()?.reduce_to_diabolos()
    }
}

/// [`compact_by_paths`].
pub struct PathCompactor;

impl<L: Label> Compactor<L> for PathCompactor {
    fn name(&self) -> &'static str {
        "paths"
    }

    fn compact(&self, g: &MultiStageGraph<L>, dist: &dyn Fn(&L, &L) -> Cost) -> Result<MultiStageGraph<L>, GraphError> {
        compact_by_paths(g, dist)
    }
}

/// Compactors selectable by name.
pub struct CompactorRegistry<L: Label> {
    entries: Vec<Box<dyn Compactor<L>>>,
}

impl<L: Label> CompactorRegistry<L> {
    pub fn empty() -> Self {
        CompactorRegistry { entries: Vec::new() }
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(DiaboloCompactor));
        r.register(Box::new(PathCompactor));
        r
    }

    /// Adds a compactor, replacing any with the same name.
    pub fn register(&mut self, c: Box<dyn Compactor<L>>) {
        self.entries.retain(|e| e.name() != c.name());
        self.entries.push(c);
    }

    pub fn get(&self, name: &str) -> Option<&dyn Compactor<L>> {
        self.entries.iter().find(|e| e.name() == name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}
