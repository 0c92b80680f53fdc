#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use globdist::step::apply_structural;
use globdist::{Action, ActionDomain, Alpha, Cost, FiniteTree, Rational, Step, StepSequence};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn read_data(name: &str) -> String {
    std::fs::read_to_string(data(name)).unwrap()
}

pub fn act(s: &str) -> Action {
    Action::new(s)
}

pub fn r(n: i128) -> Rational {
    Rational::from_integer(n)
}

pub const NAMES: [&str; 5] = ["a", "b", "c", "d", "e"];

/// Shortest-path closure of random positive weights on `n` actions;
/// some pairs stay unconnected.
pub fn random_metric<R: Rng>(rng: &mut R, n: usize) -> ActionDomain {
    let inf = i128::MAX / 4;
    let mut w = vec![vec![inf; n]; n];
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = 0;
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.8) {
                let d = rng.gen_range(1..=6);
                w[i][j] = d;
                w[j][i] = d;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if w[i][k] + w[k][j] < w[i][j] {
                    w[i][j] = w[i][k] + w[k][j];
                }
            }
        }
    }
    let mut dom = ActionDomain::new();
    for (i, name) in NAMES.iter().take(n).enumerate() {
        dom.add_action(act(name));
        for j in i + 1..n {
            if w[i][j] < inf {
                dom.set(act(name), act(NAMES[j]), r(w[i][j]));
            }
        }
    }
    dom
}

/// `d(x, y) = |i - j|` on the first `n` names.
pub fn line_metric(n: usize) -> ActionDomain {
    let mut dom = ActionDomain::new();
    for i in 0..n {
        dom.add_action(act(NAMES[i]));
        for j in i + 1..n {
            dom.set(act(NAMES[i]), act(NAMES[j]), r((j - i) as i128));
        }
    }
    dom
}

pub fn random_labels<R: Rng>(rng: &mut R, alphabet: usize, len: usize) -> Vec<Action> {
    let mut v: Vec<Action> = (0..len).map(|_| act(NAMES[rng.gen_range(0..alphabet)])).collect();
    v.sort();
    v
}

pub fn random_tree<R: Rng>(rng: &mut R, alphabet: usize, depth: usize, width: usize) -> FiniteTree {
    if depth == 0 {
        return FiniteTree::zero();
    }
    let n = rng.gen_range(0..=width);
    FiniteTree::from_children(
        (0..n)
            .map(|_| (act(NAMES[rng.gen_range(0..alphabet)]), random_tree(rng, alphabet, depth - 1, width)))
            .collect(),
    )
}

/// Paths of nodes with at least one child.
fn parent_paths(t: &FiniteTree, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if t.is_zero() {
        return;
    }
    out.push(prefix.clone());
    for (i, (_, c)) in t.children().iter().enumerate() {
        prefix.push(i);
        parent_paths(c, prefix, out);
        prefix.pop();
    }
}

/// A random valid sequence: each relabel declares its minimal cost, and
/// relabels only go between actions at finite distance.
pub fn random_sequence<R: Rng>(
    rng: &mut R,
    source: FiniteTree,
    alpha: &Alpha,
    dom: &ActionDomain,
    len: usize,
    max_width: usize,
) -> StepSequence {
    let actions: Vec<Action> = dom.actions().cloned().collect();
    let mut cur = source.clone();
    let mut steps = Vec::new();
    let mut attempts = 0;
    while steps.len() < len && attempts < 20 * len + 20 {
        attempts += 1;
        let mut parents = Vec::new();
        parent_paths(&cur, &mut Vec::new(), &mut parents);
        let Some(path) = parents.choose(rng).cloned() else { break };
        let ch = cur.node_at(&path).unwrap().children();
        let step = match rng.gen_range(0..3) {
            0 if ch.len() < max_width => Step::dup(path.clone(), rng.gen_range(0..ch.len())),
            1 => match (1..ch.len()).find(|&i| ch[i] == ch[i - 1]) {
                Some(i) => Step::drop(path.clone(), i - 1, i),
                None => continue,
            },
            _ => {
                let i = rng.gen_range(0..ch.len());
                let to = actions.choose(rng).unwrap();
                if *to == ch[i].0 {
                    continue;
                }
                let Cost::Finite(d) = dom.dist(&ch[i].0, to) else { continue };
                let cost = alpha.level_weight(path.len() + 1) * d;
                Step::relabel(path.clone(), i, ch[i].0.as_str(), to.as_str(), cost)
            }
        };
        cur = apply_structural(&cur, &step).unwrap().tree;
        steps.push(step);
    }
    StepSequence::new(alpha.clone(), source, steps)
}

/// A random depth-one sequence over a random metric.
pub fn random_flat_sequence<R: Rng>(rng: &mut R, dom: &ActionDomain, alphabet: usize) -> StepSequence {
    let n = rng.gen_range(1..=4);
    let source = FiniteTree::flat(random_labels(rng, alphabet, n).iter().map(|a| a.as_str()));
    let len = rng.gen_range(0..=12);
    random_sequence(rng, source, &Alpha::one(), dom, len, 6)
}
