mod common;

use std::fs;
use std::process::{Command, Output};

use common::data;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_globdist"))
        .current_dir(data(""))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden(name: &str) -> String {
    fs::read_to_string(data("golden").join(name)).unwrap()
}

#[test]
fn verify_seq_golden() {
    let o = run(&["verify-seq", "--metric", "usual5.metric", "blowup.seq"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), golden("blowup.verify.out"));
    let o = run(&["verify-seq", "--metric", "swap.metric", "--from", "swap_t.tree", "--to", "swap_u.tree", "swap.seq"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("total 2\n"));
}

#[test]
fn verify_seq_rejections() {
    // wrong target
    let o = run(&["verify-seq", "--metric", "swap.metric", "--to", "swap_t.tree", "swap.seq"]);
    assert_eq!(code(&o), 1);
    // relabel cost below the metric
    let o = run(&["verify-seq", "--metric", "usual5.metric", "--alpha", "1", "acd_1.seq"]);
    assert_eq!(code(&o), 1);
    // missing metric entries make relabels infinitely expensive
    let o = run(&["verify-seq", "blowup.seq"]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
}

#[test]
fn verify_ccd_golden() {
    let o = run(&["verify-ccd", "tn.ccd"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), golden("tn.verify.out"));
    assert_eq!(code(&run(&["verify-ccd", "loops_ab.ccd"])), 0);
}

#[test]
fn reduce_golden() {
    let dir = tempfile::tempdir().unwrap();
    for (seq, metric, compactor, stem) in [
        ("detour.seq", "line4.metric", "diabolo", "detour"),
        ("detour.seq", "line4.metric", "paths", "detour.paths"),
        ("merge_split.seq", "ab.metric", "diabolo", "merge_split"),
    ] {
        let dot = dir.path().join(format!("{stem}.dot"));
        let o = run(&["reduce", "--dot", dot.to_str().unwrap(), "--metric", metric, "--compactor", compactor, seq]);
        assert_eq!(code(&o), 0, "{stem}");
        assert_eq!(fs::read_to_string(&dot).unwrap(), golden(&format!("{stem}.dot")), "{stem}");
        let out_name = if stem.ends_with("paths") { format!("{stem}.out") } else { format!("{stem}.reduce.out") };
        assert_eq!(stdout(&o), golden(&out_name), "{stem}");
    }
}

#[test]
fn dist_golden_and_identity() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.seq");
    let o = run(&["dist", "--alpha", "1", "--metric", "swap.metric", "--witness", w.to_str().unwrap(), "swap_t.tree", "swap_u.tree"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), golden("swap.dist.out"));
    assert_eq!(fs::read_to_string(&w).unwrap(), golden("swap.witness.seq"));
    let o = run(&["dist", "--alpha", "1/2", "blowup_t.tree", "blowup_t.tree"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("cost 0\n"));
}

#[test]
fn dist_modes() {
    let o = run(&["dist", "--alpha", "1", "--metric", "usual5.metric", "--exact", "blowup_t.tree", "blowup_u.tree"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("cost 3\nexact yes\n"));
    let o = run(&[
        "dist", "--alpha", "1", "--metric", "usual5.metric", "--max-width", "4", "--ceiling", "3", "blowup_t.tree",
        "blowup_u.tree",
    ]);
    assert_eq!(code(&o), 1);
    let o = run(&["dist", "--alpha", "1", "--metric", "usual5.metric", "--centers", "inputs", "blowup_t.tree", "blowup_u.tree"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("exact no"));
    let o = run(&["dist", "--alpha", "1", "--solver", "exact1", "blowup_t.tree", "blowup_u.tree"]);
    assert_eq!(code(&o), 2, "deep trees are out of scope for the depth-one solver");
    let o = run(&["dist", "--alpha", "1", "--centers", "bogus", "swap_t.tree", "swap_u.tree"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn profile_golden() {
    let o = run(&["profile", "--alpha", "1/2", "-N", "4", "--metric", "ab.metric", "--claim", "2", "a_loop.lts", "b_loop.lts"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), golden("loops.profile.out"));
}

#[test]
fn project_inputs() {
    let o = run(&["project", "-k", "1", "blowup_t.tree"]);
    assert_eq!(stdout(&o), "1 + 1\n");
    let o = run(&["project", "-k", "2", "acd_left.lts"]);
    assert_eq!(stdout(&o), "a.c + a.d\n");
    let o = run(&["project", "-k", "1", "acd_3.seq"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("source a + a\n"));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.ccd");
    fs::write(&p, stdout(&run(&["project", "-k", "2", "tn.ccd"]))).unwrap();
    assert_eq!(code(&run(&["verify-ccd", p.to_str().unwrap()])), 0);
}

#[test]
fn telescope_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("acd.family");
    let cert = dir.path().join("acd.ccd");
    let o = run(&[
        "telescope", "--alpha", "1/2", "-d", "6", "-N", "3", "--metric", "acd.metric", "--assemble", "--candidate",
        "c_loop.lts", "--candidate", "d_loop.lts", "--out", fam.to_str().unwrap(), "--cert", cert.to_str().unwrap(),
        "acd_left.lts", "acd_right.lts",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).ends_with("limit verified bound 6\n"));
    assert_eq!(code(&run(&["verify-ccd", cert.to_str().unwrap()])), 0);
    let text = fs::read_to_string(&fam).unwrap();
    globdist::telescope::check_telescopic(&globdist::io::parse_family(&text).unwrap()).unwrap();
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(code(&run(&[])), 3);
    assert_eq!(code(&run(&["frobnicate"])), 3);
    assert_eq!(code(&run(&["verify-ccd", "missing.ccd"])), 3);
    assert_eq!(code(&run(&["verify-ccd", "swap.seq"])), 3);
    assert_eq!(code(&run(&["dist", "--alpha", "2", "swap_t.tree", "swap_u.tree"])), 3);
    assert_eq!(code(&run(&["--help"])), 0);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.metric");
    fs::write(&bad, "a b 1\nb c 1\na c 5\n").unwrap();
    let o = run(&["dist", "--alpha", "1", "--metric", bad.to_str().unwrap(), "swap_t.tree", "swap_u.tree"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("triangle"));
}
