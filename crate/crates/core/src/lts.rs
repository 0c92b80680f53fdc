//! Finite labelled transition systems with a root, read as (possibly
//! infinite) finitely branching trees.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::domain::Action;
use crate::tree::FiniteTree;

#[derive(Debug, PartialEq, Eq)]
struct Lts {
    names: Vec<String>,
    succ: Vec<Vec<(Action, usize)>>,
}

/// A rooted finite LTS. It denotes the unfolding from its root; two
/// values are equal as trees iff [`tree_equal`] says so.
#[derive(Clone)]
pub struct RegularTree {
    lts: Arc<Lts>,
    root: usize,
}

impl RegularTree {
    /// `succ[s]` lists the outgoing `(action, target)` pairs of state `s`.
    /// Repeated pairs are repeated summands.
    pub fn new(names: Vec<String>, succ: Vec<Vec<(Action, usize)>>, root: usize) -> Self {
        assert_eq!(names.len(), succ.len());
        assert!(root < succ.len());
        assert!(succ.iter().flatten().all(|(_, t)| *t < succ.len()));
        RegularTree {
            lts: Arc::new(Lts { names, succ }),
            root,
        }
    }

    /// Single state with one self-loop per listed action, e.g. `a^inf`.
    pub fn loops(actions: &[&str]) -> Self {
        RegularTree::new(
            vec!["n0".into()],
            vec![actions.iter().map(|a| (Action::new(a), 0)).collect()],
            0,
        )
    }

    pub fn from_finite(tree: &FiniteTree) -> Self {
        fn build(t: &FiniteTree, names: &mut Vec<String>, succ: &mut Vec<Vec<(Action, usize)>>) -> usize {
            let id = succ.len();
            names.push(format!("n{id}"));
            succ.push(Vec::new());
            for (a, c) in t.children() {
                let cid = build(c, names, succ);
                succ[id].push((a.clone(), cid));
            }
            id
        }
        let mut names = Vec::new();
        let mut succ = Vec::new();
        let root = build(tree, &mut names, &mut succ);
        RegularTree::new(names, succ, root)
    }

    /// `a1.t1 + ... + ak.tk` over regular subtrees.
    pub fn from_children(children: &[(Action, RegularTree)]) -> Self {
        let mut names = vec!["r".to_string()];
        let mut succ: Vec<Vec<(Action, usize)>> = vec![Vec::new()];
        let mut offsets: Vec<(*const Lts, usize)> = Vec::new();
        for (a, t) in children {
            let key = Arc::as_ptr(&t.lts);
            let off = match offsets.iter().find(|(p, _)| *p == key) {
                Some((_, off)) => *off,
                None => {
                    let off = succ.len();
                    for (i, s) in t.lts.succ.iter().enumerate() {
                        names.push(format!("{}_{}", t.lts.names[i], off));
                        succ.push(s.iter().map(|(b, x)| (b.clone(), x + off)).collect());
                    }
                    offsets.push((key, off));
                    off
                }
            };
            succ[0].push((a.clone(), t.root + off));
        }
        RegularTree::new(names, succ, 0).minimize()
    }

    pub fn root_name(&self) -> &str {
        &self.lts.names[self.root]
    }

    pub fn state_names(&self) -> &[String] {
        &self.lts.names
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Transitions of the underlying LTS, all states included.
    pub fn transitions(&self) -> impl Iterator<Item = (usize, &Action, usize)> {
        self.lts
            .succ
            .iter()
            .enumerate()
            .flat_map(|(s, v)| v.iter().map(move |(a, t)| (s, a, *t)))
    }

    pub fn num_states(&self) -> usize {
        self.lts.succ.len()
    }

    fn at(&self, state: usize) -> RegularTree {
        RegularTree {
            lts: Arc::clone(&self.lts),
            root: state,
        }
    }

    /// First-level summands in LTS order.
    pub fn children(&self) -> Vec<(Action, RegularTree)> {
        self.lts.succ[self.root]
            .iter()
            .map(|(a, t)| (a.clone(), self.at(*t)))
            .collect()
    }

    pub fn width1(&self) -> usize {
        self.lts.succ[self.root].len()
    }

    /// First-level summands in canonical order: by action, then by the
    /// cut at a depth large enough to separate every pair of distinct
    /// summands. Equal summands are adjacent.
    pub fn listing(&self) -> Vec<(Action, RegularTree)> {
        let min = self.minimize();
        let depth = min.num_states() + 1;
        let mut keyed: Vec<((Action, FiniteTree), (Action, RegularTree))> = self
            .children()
            .into_iter()
            .map(|(a, t)| ((a.clone(), t.unfold_to_depth(depth)), (a, t)))
            .collect();
        keyed.sort_by(|x, y| x.0.cmp(&y.0));
        keyed.into_iter().map(|(_, c)| c).collect()
    }

    /// Every subtree: one tree per state reachable from the root.
    pub fn subtrees(&self) -> Vec<RegularTree> {
        let reach = self.reachable();
        (0..self.num_states()).filter(|s| reach[*s]).map(|s| self.at(s)).collect()
    }

    fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut stack = vec![self.root];
        seen[self.root] = true;
        while let Some(s) = stack.pop() {
            for (_, t) in &self.lts.succ[s] {
                if !seen[*t] {
                    seen[*t] = true;
                    stack.push(*t);
                }
            }
        }
        seen
    }

    /// True when no cycle is reachable from the root.
    pub fn is_finite(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        fn dfs(s: usize, succ: &[Vec<(Action, usize)>], mark: &mut [u8]) -> bool {
            mark[s] = 1;
            for (_, t) in &succ[s] {
                let m = mark[*t];
                if m == 1 || (m == 0 && !dfs(*t, succ, mark)) {
                    return false;
                }
            }
            mark[s] = 2;
            true
        }
        let mut mark = vec![0u8; self.num_states()];
        dfs(self.root, &self.lts.succ, &mut mark)
    }

    /// The denoted tree, when finite.
    pub fn to_finite(&self) -> Option<FiniteTree> {
        if !self.is_finite() {
            return None;
        }
        Some(self.unfold_to_depth(self.num_states()))
    }

    /// `pi_k(unfold(self))`.
    pub fn unfold_to_depth(&self, k: usize) -> FiniteTree {
        let mut memo = HashMap::new();
        unfold_state(&self.lts.succ, self.root, k, &mut memo)
    }

    /// Quotient of the reachable part by equality of denoted trees.
    pub fn minimize(&self) -> RegularTree {
        let reach = self.reachable();
        let states: Vec<usize> = (0..self.num_states()).filter(|s| reach[*s]).collect();
        let blocks = refine(&self.lts.succ, &states);
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        // number classes in order of first appearance from the root's BFS
        let mut order = vec![self.root];
        let mut seen = vec![false; self.num_states()];
        seen[self.root] = true;
        let mut i = 0;
        while i < order.len() {
            let s = order[i];
            i += 1;
            let next = ids.len();
            ids.entry(blocks[&s]).or_insert(next);
            for (_, t) in &self.lts.succ[s] {
                if !seen[*t] {
                    seen[*t] = true;
                    order.push(*t);
                }
            }
        }
        let n = ids.len();
        let mut succ = vec![Vec::new(); n];
        let mut names = vec![String::new(); n];
        let mut done = vec![false; n];
        for &s in &order {
            let id = ids[&blocks[&s]];
            if done[id] {
                continue;
            }
            done[id] = true;
            names[id] = format!("q{id}");
            succ[id] = self.lts.succ[s]
                .iter()
                .map(|(a, t)| (a.clone(), ids[&blocks[t]]))
                .collect();
        }
        RegularTree::new(names, succ, 0)
    }
}

fn unfold_state(
    succ: &[Vec<(Action, usize)>],
    s: usize,
    k: usize,
    memo: &mut HashMap<(usize, usize), FiniteTree>,
) -> FiniteTree {
    if k == 0 {
        return FiniteTree::zero();
    }
    if let Some(t) = memo.get(&(s, k)) {
        return t.clone();
    }
    let children = succ[s]
        .iter()
        .map(|(a, t)| (a.clone(), unfold_state(succ, *t, k - 1, memo)))
        .collect();
    let tree = FiniteTree::from_children(children);
    memo.insert((s, k), tree.clone());
    tree
}

/// Coarsest partition in which equivalent states have equal multisets of
/// `(action, block)` successors. Greatest fixpoint, computed by
/// signature refinement from the single-block partition.
fn refine(succ: &[Vec<(Action, usize)>], states: &[usize]) -> HashMap<usize, usize> {
    let mut block: HashMap<usize, usize> = states.iter().map(|s| (*s, 0)).collect();
    let mut count = 1;
    loop {
        let mut sigs: BTreeMap<(usize, Vec<(Action, usize)>), usize> = BTreeMap::new();
        let mut next = HashMap::with_capacity(states.len());
        for &s in states {
            let mut sig: Vec<(Action, usize)> =
                succ[s].iter().map(|(a, t)| (a.clone(), block[t])).collect();
            sig.sort();
            let len = sigs.len();
            let id = *sigs.entry((block[&s], sig)).or_insert(len);
            next.insert(s, id);
        }
        let new_count = sigs.len();
        block = next;
        if new_count == count {
            return block;
        }
        count = new_count;
    }
}

/// Decides whether two rooted LTSs denote the same unordered tree
/// (multiplicities included).
pub fn tree_equal(left: &RegularTree, right: &RegularTree) -> bool {
    if Arc::ptr_eq(&left.lts, &right.lts) && left.root == right.root {
        return true;
    }
    let off = left.num_states();
    let mut succ = left.lts.succ.clone();
    succ.extend(
        right
            .lts
            .succ
            .iter()
            .map(|v| v.iter().map(|(a, t)| (a.clone(), t + off)).collect()),
    );
    let states: Vec<usize> = (0..succ.len()).collect();
    let blocks = refine(&succ, &states);
    blocks[&left.root] == blocks[&(right.root + off)]
}

impl fmt::Debug for RegularTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegularTree(root {}", self.root_name())?;
        for (s, a, t) in self.transitions() {
            write!(f, "; {} -{}-> {}", self.lts.names[s], a, self.lts.names[t])?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> Action {
        Action::new(s)
    }

    /// succ(n0) = {(0,n0),(0,n1)}
    pub(crate) fn t_n() -> RegularTree {
        RegularTree::new(
            vec!["n0".into(), "n1".into()],
            vec![vec![(act("0"), 0), (act("0"), 1)], vec![]],
            0,
        )
    }

    #[test]
    fn loop_unfolds_to_chain() {
        let a = RegularTree::loops(&["a"]);
        assert_eq!(a.unfold_to_depth(3), FiniteTree::chain(["a", "a", "a"]));
        assert_eq!(a.unfold_to_depth(0), FiniteTree::zero());
        assert!(!a.is_finite());
    }

    #[test]
    fn t_n_two_levels() {
        // depth 2: 0.(0 + 0) + 0
        let leaf = FiniteTree::leaf("0");
        let expected = FiniteTree::from_children(vec![
            (act("0"), leaf.sum(&leaf)),
            (act("0"), FiniteTree::zero()),
        ]);
        assert_eq!(t_n().unfold_to_depth(2), expected);
    }

    #[test]
    fn different_presentations_of_a_loop_are_equal() {
        let one = RegularTree::loops(&["a"]);
        let two = RegularTree::new(
            vec!["x".into(), "y".into()],
            vec![vec![(act("a"), 1)], vec![(act("a"), 0)]],
            0,
        );
        assert!(tree_equal(&one, &two));
        for n in 0..=6 {
            assert_eq!(one.unfold_to_depth(n), two.unfold_to_depth(n));
        }
        assert!(!tree_equal(&one, &RegularTree::loops(&["b"])));
    }

    #[test]
    fn multiplicity_matters() {
        let once = RegularTree::loops(&["a"]);
        let twice = RegularTree::loops(&["a", "a"]);
        assert!(!tree_equal(&once, &twice));
    }

    #[test]
    fn finite_round_trip() {
        let t = FiniteTree::chain(["a", "b"]).sum(&FiniteTree::leaf("c"));
        let r = RegularTree::from_finite(&t);
        assert!(r.is_finite());
        assert_eq!(r.to_finite().unwrap(), t);
    }

    #[test]
    fn listing_sorts_leaf_before_loop() {
        let l = t_n().listing();
        assert!(l[0].1.width1() == 0);
        assert!(l[1].1.width1() == 2);
    }

    #[test]
    fn from_children_builds_sum() {
        let c = RegularTree::loops(&["c"]);
        let d = RegularTree::loops(&["d"]);
        let t = RegularTree::from_children(&[(act("a"), c), (act("a"), d)]);
        let expected = FiniteTree::chain(["a", "c", "c"]).sum(&FiniteTree::chain(["a", "d", "d"]));
        assert_eq!(t.unfold_to_depth(3), expected);
    }
}
