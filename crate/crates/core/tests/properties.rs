mod common;

use common::oracle::flat_distance;
use common::*;
use globdist::search::{exact_depth1, hausdorff_bound, upper_bound, SearchConfig};
use globdist::stage_graph::build_graph;
use globdist::step::{project_sequence, validate_sequence};
use globdist::{Alpha, Cost, FiniteTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pruning_and_reduction_never_cost_more(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let k = rng.gen_range(2..=5);
        let dom = random_metric(&mut rng, k);
        let seq = random_flat_sequence(&mut rng, &dom, k);
        let g = build_graph(&seq, &dom).unwrap();
        let pruned = g.prune_to_tbwc().unwrap();
        prop_assert!(pruned.total_cost() <= g.total_cost());
        let reduced = pruned.reduce_to_diabolos().unwrap();
        prop_assert!(reduced.total_cost() <= pruned.total_cost());
        for h in [&pruned, &reduced] {
            prop_assert_eq!(h.stage_labels(0), g.stage_labels(0));
            prop_assert_eq!(h.stage_labels(h.last_stage()), g.stage_labels(g.last_stage()));
        }
    }

    #[test]
    fn projections_compose(seed in any::<u64>(), j in 0usize..4, k in 0usize..4) {
        let t = random_tree(&mut rng(seed), 3, 4, 3);
        prop_assert_eq!(t.project(j).project(k), t.project(j.min(k)));
        prop_assert!(t.project(j).depth() <= j);
    }

    #[test]
    fn projected_sequences_replay(seed in any::<u64>(), k in 1usize..4) {
        let mut rng = rng(seed);
        let dom = line_metric(3);
        let source = random_tree(&mut rng, 3, 3, 3);
        let len = rng.gen_range(0..=8);
        let seq = random_sequence(&mut rng, source, &Alpha::half(), &dom, len, 4);
        let full = validate_sequence(&seq, &dom).unwrap();
        let cut = project_sequence(&seq, k).unwrap();
        let rep = validate_sequence(&cut, &dom).unwrap();
        prop_assert_eq!(rep.target, full.target.project(k));
        prop_assert!(rep.total <= full.total);
    }

    #[test]
    fn depth_one_distance_is_a_pseudometric(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let k = rng.gen_range(2..=4);
        let dom = random_metric(&mut rng, k);
        let mut labels = || {
            let n = rng.gen_range(1..=3);
            random_labels(&mut rng, k, n)
        };
        let (a, b, c) = (labels(), labels(), labels());
        let one = Alpha::one();
        let d = |x: &[_], y: &[_]| exact_depth1(x, y, &dom, &one).unwrap().cost;
        prop_assert_eq!(d(&a, &a), Cost::zero());
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert_eq!(d(&a, &b), flat_distance(&a, &b, &dom, a.len() + b.len() + 1));
    }

    #[test]
    fn upper_bounds_are_witnessed_and_above_lower_bounds(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dom = line_metric(3);
        let half = Alpha::half();
        let t = random_tree(&mut rng, 3, 2, 2);
        let u = random_tree(&mut rng, 3, 2, 2);
        let res = upper_bound(&t, &u, &half, &dom, &SearchConfig::default()).unwrap();
        prop_assert!(hausdorff_bound(&t, &u, &half, &dom) <= res.cost);
        let back = upper_bound(&u, &t, &half, &dom, &SearchConfig::default()).unwrap();
        prop_assert_eq!(&res.cost, &back.cost);
        if let Some(w) = &res.witness {
            let rep = validate_sequence(w, &dom).unwrap();
            prop_assert_eq!(&rep.target, &u);
            prop_assert_eq!(Cost::Finite(rep.total), res.cost.clone());
        } else {
            prop_assert_eq!(res.cost, Cost::Infinite);
        }
    }

    #[test]
    fn normal_form_is_free(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let dom = line_metric(3);
        let t = random_tree(&mut rng, 3, 3, 3);
        let res = upper_bound(&t, &t.dedup(), &Alpha::half(), &dom, &SearchConfig::default()).unwrap();
        prop_assert_eq!(res.cost, Cost::zero());
        prop_assert_eq!(t.dedup().dedup(), t.dedup());
        prop_assert_eq!(upper_bound(&t, &FiniteTree::zero(), &Alpha::half(), &dom, &SearchConfig::default())
            .unwrap().cost.is_finite(), t.is_zero());
    }
}
