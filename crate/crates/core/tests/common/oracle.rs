//! Brute-force reference searches, written without the library's
//! search code.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use globdist::{Action, ActionDomain, Alpha, Cost, FiniteTree, Rational};

/// Plain Dijkstra over sorted label multisets of at most `cap` labels.
pub fn flat_distance(a: &[Action], b: &[Action], dom: &ActionDomain, cap: usize) -> Cost {
    let actions: Vec<Action> = dom.actions().cloned().chain(a.iter().cloned()).chain(b.iter().cloned()).collect();
    let sorted = |mut v: Vec<Action>| {
        v.sort();
        v
    };
    let start = sorted(a.to_vec());
    let goal = sorted(b.to_vec());
    let mut best: HashMap<Vec<Action>, Rational> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start.clone(), Rational::from_integer(0));
    heap.push(Reverse((Rational::from_integer(0), start)));
    while let Some(Reverse((c, s))) = heap.pop() {
        if best.get(&s).is_some_and(|b| *b < c) {
            continue;
        }
        if s == goal {
            return Cost::Finite(c);
        }
        let mut next: Vec<(Vec<Action>, Rational)> = Vec::new();
        for i in 0..s.len() {
            if s.len() < cap {
                let mut t = s.clone();
                t.push(s[i].clone());
                next.push((sorted(t), Rational::from_integer(0)));
            }
            if i > 0 && s[i] == s[i - 1] {
                let mut t = s.clone();
                t.remove(i);
                next.push((t, Rational::from_integer(0)));
            }
            for x in &actions {
                if let Cost::Finite(d) = dom.dist(&s[i], x) {
                    let mut t = s.clone();
                    t[i] = x.clone();
                    next.push((sorted(t), d));
                }
            }
        }
        for (t, d) in next {
            let nc = c + d;
            if best.get(&t).is_none_or(|b| nc < *b) {
                best.insert(t.clone(), nc);
                heap.push(Reverse((nc, t)));
            }
        }
    }
    Cost::Infinite
}

/// Removes repeated summands at every node.
pub fn normal_form(t: &FiniteTree) -> FiniteTree {
    let mut children: Vec<(Action, FiniteTree)> =
        t.children().iter().map(|(a, c)| (a.clone(), normal_form(c))).collect();
    children.sort();
    children.dedup();
    FiniteTree::from_children(children)
}

fn replace_child(t: &FiniteTree, i: usize, new: (Action, FiniteTree), keep: bool) -> FiniteTree {
    let mut ch = t.children().to_vec();
    if keep {
        ch.push(new);
    } else {
        ch[i] = new;
    }
    FiniteTree::from_children(ch)
}

/// Every tree reachable from `t` by relabelling one summand at depth at
/// most two, with the old summand and the old parent either kept (a
/// duplication first) or replaced. Results are in normal form.
fn relabel_moves(t: &FiniteTree, actions: &[Action], dom: &ActionDomain, alpha: &Alpha) -> Vec<(FiniteTree, Rational)> {
    let mut out = Vec::new();
    for (i, (a, s)) in t.children().iter().enumerate() {
        for b in actions {
            if let Cost::Finite(d) = dom.dist(a, b) {
                if a != b {
                    for keep in [false, true] {
                        out.push((normal_form(&replace_child(t, i, (b.clone(), s.clone()), keep)), d));
                    }
                }
            }
        }
        for (j, (c, w)) in s.children().iter().enumerate() {
            for e in actions {
                let Cost::Finite(d) = dom.dist(c, e) else { continue };
                if c == e {
                    continue;
                }
                for keep_inner in [false, true] {
                    let s2 = replace_child(s, j, (e.clone(), w.clone()), keep_inner);
                    for keep_outer in [false, true] {
                        let t2 = replace_child(t, i, (a.clone(), s2.clone()), keep_outer);
                        out.push((normal_form(&t2), alpha.level_weight(2) * d));
                    }
                }
            }
        }
    }
    out
}

/// Uniform-cost search over normal forms of depth-two trees, without
/// any heuristic. Returns the cheapest cost not above `limit`, or `None`.
/// `width_cap` bounds the widths at the first two levels of every
/// normal form visited.
pub fn depth2_distance(
    t: &FiniteTree,
    u: &FiniteTree,
    dom: &ActionDomain,
    alpha: &Alpha,
    limit: &Rational,
    width_cap: Option<usize>,
) -> Option<Rational> {
    let actions: Vec<Action> = dom.actions().cloned().collect();
    let start = normal_form(t);
    let goal = normal_form(u);
    let mut best: HashMap<FiniteTree, Rational> = HashMap::new();
    let mut heap = BinaryHeap::new();
    best.insert(start.clone(), Rational::from_integer(0));
    heap.push(Reverse((Rational::from_integer(0), start)));
    while let Some(Reverse((c, s))) = heap.pop() {
        if best.get(&s).is_some_and(|b| *b < c) {
            continue;
        }
        if s == goal {
            return Some(c);
        }
        for (n, d) in relabel_moves(&s, &actions, dom, alpha) {
            let nc = c + d;
            if nc > *limit || width_cap.is_some_and(|w| n.width_k(2) > w) {
                continue;
            }
            if best.get(&n).is_none_or(|b| nc < *b) {
                best.insert(n.clone(), nc);
                heap.push(Reverse((nc, n)));
            }
        }
    }
    None
}
