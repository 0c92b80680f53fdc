mod common;

use common::*;
use globdist::ccd::{fold_sequence, verify_ccd};
use globdist::io::{
    parse_ccd, parse_family, parse_lts, parse_metric, parse_sequence, parse_tree, parse_tree_file, print_ccd,
    print_family, print_lts, print_metric, print_sequence, SequenceFile,
};
use globdist::lab::{telescopic_hunt, HuntConfig};
use globdist::telescope::check_telescopic;
use globdist::{tree_equal, Action, Alpha, RegularTree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lts(rng: &mut ChaCha8Rng) -> RegularTree {
    let n = rng.gen_range(1..=4);
    let succ = (0..n)
        .map(|_| {
            (0..rng.gen_range(0..=3))
                .map(|_| (act(NAMES[rng.gen_range(0..3)]), rng.gen_range(0..n)))
                .collect()
        })
        .collect();
    let names = (0..n).map(|i| format!("q{}", (i * 7) % 11)).collect();
    RegularTree::new(names, succ, rng.gen_range(0..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn trees_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // action names include "0" to exercise the empty-tree token
        let t = random_tree(&mut rng, 5, 4, 3);
        let t = t.sum(&random_tree(&mut rng, 1, 2, 2).project(2));
        let text = t.to_string();
        prop_assert_eq!(parse_tree(&text).unwrap(), t.clone());
        let zeros = text.replace('a', "0");
        let z = parse_tree(&zeros).unwrap();
        prop_assert_eq!(parse_tree(&z.to_string()).unwrap(), z);
    }

    #[test]
    fn lts_round_trip(seed in any::<u64>()) {
        let t = random_lts(&mut ChaCha8Rng::seed_from_u64(seed));
        let text = print_lts(&t);
        let back = parse_lts(&text).unwrap();
        prop_assert_eq!(print_lts(&back), text);
        prop_assert!(tree_equal(&back, &t));
    }

    #[test]
    fn metric_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = rng.gen_range(1..=5);
        let dom = random_metric(&mut rng, k);
        let back = parse_metric(&print_metric(&dom)).unwrap();
        prop_assert_eq!(back, dom);
    }

    #[test]
    fn sequences_and_certificates_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = line_metric(3);
        let source = random_tree(&mut rng, 3, 3, 3);
        let len = rng.gen_range(0..=8);
        let seq = random_sequence(&mut rng, source, &Alpha::half(), &dom, len, 4);
        let text = print_sequence(&seq, None);
        let file = parse_sequence(&text).unwrap();
        prop_assert_eq!(file.to_sequence(None, None).unwrap(), seq.clone());
        let cert = fold_sequence(&seq, &dom).unwrap();
        let printed = print_ccd(&cert);
        let back = parse_ccd(&printed).unwrap();
        prop_assert_eq!(print_ccd(&back), printed);
        prop_assert!(verify_ccd(&back).is_ok());
    }

    #[test]
    fn parsers_never_panic(text in any::<String>()) {
        let _ = parse_tree(&text);
        let _ = parse_lts(&text);
        let _ = parse_metric(&text);
        let _ = parse_sequence(&text);
        let _ = parse_ccd(&text);
        let _ = parse_family(&text);
    }

    #[test]
    fn parsers_never_panic_on_near_misses(text in "[ab0().+@ \n#-]{0,40}|(relabel|dup|drop|root|triple|end|lts|alpha|1/2|@0.1| |\n|a|0|->|-a->)*") {
        let _ = parse_tree(&text);
        let _ = parse_lts(&text);
        let _ = parse_metric(&text);
        let _ = parse_sequence(&text);
        let _ = parse_ccd(&text);
        let _ = parse_family(&text);
    }
}

#[test]
fn rejected_inputs_get_a_diagnostic() {
    for bad in ["", "a +", "a.(b", "(a)", "a..b", "a b", "+", "a.()", "ä"] {
        let e = parse_tree(bad).unwrap_err();
        assert!(e.line >= 1 && e.column >= 1 && !e.message.is_empty(), "{bad:?}");
    }
    assert!(parse_tree(&"a.(".repeat(10_000)).is_err());
}

#[test]
fn shipped_files_parse_and_round_trip() {
    for name in ["tn.ccd", "loops_ab.ccd"] {
        let cert = parse_ccd(&read_data(name)).unwrap();
        let printed = print_ccd(&cert);
        assert_eq!(print_ccd(&parse_ccd(&printed).unwrap()), printed, "{name}");
    }
    for name in ["blowup.seq", "swap.seq", "acd_1.seq", "acd_2.seq", "acd_3.seq", "detour.seq", "merge_split.seq"] {
        let file = parse_sequence(&read_data(name)).unwrap();
        let again = parse_sequence(&globdist::io::print_sequence_file(&file)).unwrap();
        assert_eq!(again, file, "{name}");
    }
    for name in ["blowup_t.tree", "blowup_u.tree", "swap_t.tree", "swap_u.tree"] {
        parse_tree_file(&read_data(name)).unwrap();
    }
    let t = parse_tree("1.(2+3+4+5) + 1.(1+2+3+4)").unwrap();
    assert_eq!(t, parse_tree_file(&read_data("blowup_t.tree")).unwrap());
}

#[test]
fn t_n_lts_unfolds() {
    let t = parse_lts("root n0\nn0 -0-> n0\nn0 -0-> n1\n").unwrap();
    assert_eq!(t.unfold_to_depth(1), parse_tree("0.0 + 0.0").unwrap());
    assert_eq!(t.unfold_to_depth(3), parse_tree("0.(0.(0.0 + 0.0) + 0.0) + 0.0").unwrap());
}

#[test]
fn empty_metric_is_all_infinite() {
    let dom = parse_metric("# nothing\n\n").unwrap();
    assert!(dom.is_empty());
    assert!(!dom.dist(&Action::new("a"), &Action::new("b")).is_finite());
    assert!(dom.dist(&Action::new("a"), &Action::new("a")).is_zero());
}

#[test]
fn families_round_trip() {
    let left = parse_lts(&read_data("acd_left.lts")).unwrap();
    let right = parse_lts(&read_data("acd_right.lts")).unwrap();
    let dom = parse_metric(&read_data("acd.metric")).unwrap();
    let fam = telescopic_hunt(&left, &right, &Alpha::half(), &dom, &r(6), 3, &HuntConfig::default()).unwrap();
    let text = print_family(&fam);
    let back = parse_family(&text).unwrap();
    check_telescopic(&back).unwrap();
    assert_eq!(print_family(&back), text);
    assert_eq!(back.sequences, fam.sequences);
}

#[test]
fn sequence_headers_are_optional() {
    let file = parse_sequence("dup @ 0\n").unwrap();
    assert_eq!(file, SequenceFile { alpha: None, source: None, target: None, steps: file.steps.clone() });
    let seq = file.to_sequence(Some(&Alpha::one()), Some(&parse_tree("a").unwrap())).unwrap();
    assert_eq!(seq.target().unwrap(), parse_tree("a + a").unwrap());
}
