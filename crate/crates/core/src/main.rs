use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use globdist::ccd::{project_ccd, verify_ccd};
use globdist::cost::{format_rational, parse_rational};
use globdist::io::{
    detect_kind, parse_ccd, parse_lts, parse_metric, parse_sequence, parse_tree_file, print_ccd,
    print_family, print_sequence, InputKind,
};
use globdist::lab::{projection_profile, telescopic_hunt, HuntConfig};
use globdist::search::{CenterPolicy, SearchConfig, SearchError, SolverRegistry};
use globdist::stage_graph::{build_graph, extract_sequence, step_bound, CompactorRegistry};
use globdist::step::{project_sequence, validate_sequence};
use globdist::telescope::{assemble_limit, check_telescopic};
use globdist::{Action, ActionDomain, Alpha, FiniteTree, Rational, RegularTree};

const OK: u8 = 0;
const REFUTED: u8 = 1;
const INCONCLUSIVE: u8 = 2;
const USAGE: u8 = 3;

/// Checker and bounded search for global bisimulation distances.
#[derive(Parser)]
#[command(name = "globdist", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a step sequence and report its total cost.
    VerifySeq {
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Source tree; overrides the file's `source` line.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Expected target tree.
        #[arg(long)]
        to: Option<PathBuf>,
        seq: PathBuf,
    },
    /// Check a coinductive distance certificate.
    VerifyCcd { cert: PathBuf },
    /// Bound the distance between two finite trees.
    Dist {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Exhaustive search (depth at most two).
        #[arg(long, conflicts_with_all = ["centers", "solver"])]
        exact: bool,
        /// inputs, alphabet, synthesized or synthesized:W
        #[arg(long)]
        centers: Option<String>,
        /// Solver name from the registry.
        #[arg(long)]
        solver: Option<String>,
        /// Width cap on intermediate normal forms (exhaustive search).
        #[arg(long)]
        max_width: Option<usize>,
        /// Only look for sequences costing at most this (exhaustive search).
        #[arg(long)]
        ceiling: Option<String>,
        /// Write the witness sequence here.
        #[arg(long)]
        witness: Option<PathBuf>,
        t1: PathBuf,
        t2: PathBuf,
    },
    /// Cut a tree, LTS, sequence or certificate at depth k.
    Project {
        #[arg(short = 'k')]
        k: usize,
        #[arg(long)]
        alpha: Option<String>,
        input: PathBuf,
    },
    /// Reduce a depth-one sequence through its multi-stage graph.
    Reduce {
        /// DOT output path, `-` for standard output.
        #[arg(long)]
        dot: PathBuf,
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        metric: Option<PathBuf>,
        #[arg(long, default_value = "diabolo")]
        compactor: String,
        seq: PathBuf,
    },
    /// Upper bounds on the distances between depth-n cuts.
    Profile {
        #[arg(long)]
        alpha: String,
        #[arg(short = 'N')]
        horizon: usize,
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Flag levels whose bound exceeds this value.
        #[arg(long)]
        claim: Option<String>,
        #[arg(long)]
        centers: Option<String>,
        lts1: PathBuf,
        lts2: PathBuf,
    },
    /// Search for a telescopic family of total at most d.
    Telescope {
        #[arg(long)]
        alpha: String,
        #[arg(short = 'd')]
        d: String,
        #[arg(short = 'N')]
        horizon: usize,
        #[arg(long)]
        metric: Option<PathBuf>,
        /// Write the family bundle here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also assemble and verify a limit certificate.
        #[arg(long)]
        assemble: bool,
        /// Extra trees offered to the assembler.
        #[arg(long = "candidate")]
        candidates: Vec<PathBuf>,
        /// Write the limit certificate here.
        #[arg(long)]
        cert: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        branching: usize,
        lts1: PathBuf,
        lts2: PathBuf,
    },
}

/// An early exit with a message for standard error.
struct Exit(u8, String);

type Outcome = Result<u8, Exit>;

fn usage(msg: impl Into<String>) -> Exit {
    Exit(USAGE, msg.into())
}

fn read(path: &Path) -> Result<String, Exit> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Exit> {
    if path == Path::new("-") {
        print!("{text}");
        return Ok(());
    }
    fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn parsed<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, Exit> {
    r.map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn alpha_arg(s: &str) -> Result<Alpha, Exit> {
    s.parse().map_err(|e| usage(format!("--alpha {s}: {e}")))
}

fn rational_arg(flag: &str, s: &str) -> Result<Rational, Exit> {
    parse_rational(s).map_err(|e| usage(format!("{flag} {s}: {e}")))
}

fn centers_arg(s: &str) -> Result<CenterPolicy, Exit> {
    s.parse().map_err(usage)
}

/// Loads and checks a metric; violations are reported as invalid input.
fn load_metric(path: Option<&Path>) -> Result<ActionDomain, Exit> {
    let Some(path) = path else { return Ok(ActionDomain::new()) };
    let dom = parsed(path, parse_metric(&read(path)?))?;
    check_domain(&dom, path)?;
    Ok(dom)
}

fn check_domain(dom: &ActionDomain, path: &Path) -> Result<(), Exit> {
    dom.validate().map_err(|vs| {
        let lines: Vec<String> = vs.iter().map(|v| format!("{}: {v}", path.display())).collect();
        Exit(REFUTED, lines.join("\n"))
    })
}

/// Adds every action of the trees so that relabels between them are
/// at least known, if infinitely far apart.
fn with_actions<'a>(mut dom: ActionDomain, trees: impl IntoIterator<Item = &'a FiniteTree>) -> ActionDomain {
    let mut actions = Vec::new();
    for t in trees {
        t.actions(&mut actions);
    }
    for a in actions {
        dom.add_action(a);
    }
    dom
}

fn load_tree(path: &Path) -> Result<FiniteTree, Exit> {
    parsed(path, parse_tree_file(&read(path)?))
}

/// An LTS file, or a tree term read as a finite LTS.
fn load_regular(path: &Path) -> Result<RegularTree, Exit> {
    let text = read(path)?;
    match detect_kind(&text) {
        InputKind::Tree => Ok(RegularTree::from_finite(&parsed(path, parse_tree_file(&text))?)),
        _ => parsed(path, parse_lts(&text)),
    }
}

fn search_exit(e: &SearchError) -> u8 {
    match e {
        SearchError::NotFound(_) => REFUTED,
        _ => INCONCLUSIVE,
    }
}

fn verify_seq(
    alpha: Option<String>,
    metric: Option<PathBuf>,
    from: Option<PathBuf>,
    to: Option<PathBuf>,
    seq_path: PathBuf,
) -> Outcome {
    let dom = load_metric(metric.as_deref())?;
    let file = parsed(&seq_path, parse_sequence(&read(&seq_path)?))?;
    let alpha = alpha.as_deref().map(alpha_arg).transpose()?;
    let from = from.as_deref().map(load_tree).transpose()?;
    if let (Some(given), Some(declared)) = (&from, &file.source) {
        if given != declared {
            return Err(Exit(REFUTED, format!("source mismatch: {given} vs {declared} in the sequence file")));
        }
    }
    if let (Some(given), Some(declared)) = (&alpha, &file.alpha) {
        if given != declared {
            return Err(Exit(REFUTED, format!("discount mismatch: {given} vs {declared} in the sequence file")));
        }
    }
    let seq = parsed(&seq_path, file.to_sequence(alpha.as_ref(), from.as_ref()))?;
    let replay = validate_sequence(&seq, &dom).map_err(|e| Exit(REFUTED, format!("invalid: {e}")))?;
    let expected = match to.as_deref() {
        Some(p) => Some(load_tree(p)?),
        None => file.target.clone(),
    };
    if let Some(t) = expected {
        if t != replay.target {
            return Err(Exit(REFUTED, format!("target mismatch: reached {}, expected {t}", replay.target)));
        }
    }
    println!("valid");
    println!("steps {}", seq.len());
    println!("total {}", format_rational(&replay.total));
    println!("target {}", replay.target);
    Ok(OK)
}

fn verify_ccd_cmd(path: PathBuf) -> Outcome {
    let cert = parsed(&path, parse_ccd(&read(&path)?))?;
    check_domain(&cert.domain, &path)?;
    match verify_ccd(&cert) {
        Ok(()) => {
            println!("verified {} triple(s)", cert.triples.len());
            for (k, t) in cert.triples.iter().enumerate() {
                println!(
                    "triple {k} bound {} witness {}",
                    format_rational(&t.bound),
                    format_rational(&cert.witness_total(k))
                );
            }
            Ok(OK)
        }
        Err(errs) => {
            let lines: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
            Err(Exit(REFUTED, lines.join("\n")))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn dist(
    alpha: String,
    metric: Option<PathBuf>,
    exact: bool,
    centers: Option<String>,
    solver: Option<String>,
    max_width: Option<usize>,
    ceiling: Option<String>,
    witness: Option<PathBuf>,
    t1: PathBuf,
    t2: PathBuf,
) -> Outcome {
    let alpha = alpha_arg(&alpha)?;
    let (t, u) = (load_tree(&t1)?, load_tree(&t2)?);
    let dom = with_actions(load_metric(metric.as_deref())?, [&t, &u]);
    let mut cfg = SearchConfig { max_stage_width: max_width, ..SearchConfig::default() };
    if let Some(c) = centers.as_deref() {
        cfg.centers = centers_arg(c)?;
    }
    if let Some(c) = ceiling.as_deref() {
        cfg.ceiling = Some(rational_arg("--ceiling", c)?);
    }
    let restricted = cfg.max_stage_width.is_some() || cfg.ceiling.is_some();
    let name = match (&solver, exact || restricted) {
        (Some(s), _) => s.as_str(),
        (None, true) => "exact2",
        (None, false) => "upper",
    };
    let registry = SolverRegistry::with_defaults();
    let solver = registry
        .get(name)
        .ok_or_else(|| usage(format!("unknown solver '{name}' (known: {})", registry.names().join(", "))))?;
    let result = solver
        .solve(&t, &u, &alpha, &dom, &cfg)
        .map_err(|e| Exit(search_exit(&e), e.to_string()))?;
    println!("solver {name}");
    println!("cost {}", result.cost);
    println!("exact {}", if result.exact { "yes" } else { "no" });
    if let Some(w) = &result.witness {
        println!("steps {}", w.len());
        if let Some(p) = witness.as_deref() {
            write(p, &print_sequence(w, Some(&u)))?;
        }
    }
    Ok(OK)
}

fn project(k: usize, alpha: Option<String>, input: PathBuf) -> Outcome {
    let text = read(&input)?;
    match detect_kind(&text) {
        InputKind::Tree => println!("{}", parsed(&input, parse_tree_file(&text))?.project(k)),
        InputKind::Lts => println!("{}", parsed(&input, parse_lts(&text))?.unfold_to_depth(k)),
        InputKind::Sequence => {
            let file = parsed(&input, parse_sequence(&text))?;
            let alpha = alpha.as_deref().map(alpha_arg).transpose()?;
            let seq = parsed(&input, file.to_sequence(alpha.as_ref(), None))?;
            let cut = project_sequence(&seq, k).map_err(|e| Exit(REFUTED, format!("invalid: {e}")))?;
            let target = file.target.as_ref().map(|t| t.project(k));
            print!("{}", print_sequence(&cut, target.as_ref()));
        }
        InputKind::Certificate => {
            let cert = parsed(&input, parse_ccd(&text))?;
            print!("{}", print_ccd(&project_ccd(&cert, k)));
        }
        InputKind::Family => return Err(usage(format!("{}: bundles cannot be projected", input.display()))),
    }
    Ok(OK)
}

fn reduce(dot: PathBuf, alpha: Option<String>, metric: Option<PathBuf>, compactor: String, seq_path: PathBuf) -> Outcome {
    let dom = load_metric(metric.as_deref())?;
    let file = parsed(&seq_path, parse_sequence(&read(&seq_path)?))?;
    let alpha = alpha.as_deref().map(alpha_arg).transpose()?;
    let seq = parsed(&seq_path, file.to_sequence(alpha.as_ref(), None))?;
    let replay = validate_sequence(&seq, &dom).map_err(|e| Exit(REFUTED, format!("invalid: {e}")))?;
    let graph = build_graph(&seq, &dom).map_err(|e| Exit(REFUTED, format!("invalid: {e}")))?;
    let registry = CompactorRegistry::<Action>::with_defaults();
    let c = registry
        .get(&compactor)
        .ok_or_else(|| usage(format!("unknown compactor '{compactor}' (known: {})", registry.names().join(", "))))?;
    let dist = |a: &Action, b: &Action| dom.dist(a, b);
    let reduced = c
        .compact(&graph, &dist)
        .map_err(|e| Exit(INCONCLUSIVE, format!("reduction failed: {e}")))?;
    write(&dot, &reduced.to_dot())?;
    let sizes = |g: &globdist::stage_graph::MultiStageGraph<Action>| {
        g.stage_sizes().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    };
    let (m, n) = (seq.source.width1(), replay.target.width1());
    println!("compactor {compactor}");
    println!("stages before {}", sizes(&graph));
    println!("stages after {}", sizes(&reduced));
    let Some(out) = extract_sequence(&reduced, &seq.alpha, &dom) else {
        return Err(Exit(INCONCLUSIVE, "the reduced graph does not yield a sequence".into()));
    };
    let check = validate_sequence(&out, &dom).map_err(|e| Exit(INCONCLUSIVE, format!("extracted sequence is invalid: {e}")))?;
    if check.target != replay.target {
        return Err(Exit(INCONCLUSIVE, "extracted sequence misses the target".into()));
    }
    println!(
        "cost before {} graph {} after {}",
        format_rational(&replay.total),
        reduced.total_cost(),
        format_rational(&check.total)
    );
    println!("steps before {} after {} bound {}", seq.len(), out.len(), step_bound(m, n));
    print!("{}", print_sequence(&out, Some(&check.target)));
    Ok(OK)
}

#[allow(clippy::too_many_arguments)]
fn profile(
    alpha: String,
    horizon: usize,
    metric: Option<PathBuf>,
    claim: Option<String>,
    centers: Option<String>,
    lts1: PathBuf,
    lts2: PathBuf,
) -> Outcome {
    let alpha = alpha_arg(&alpha)?;
    let (r1, r2) = (load_regular(&lts1)?, load_regular(&lts2)?);
    let dom = load_metric(metric.as_deref())?;
    let mut cfg = SearchConfig::default();
    if let Some(c) = centers.as_deref() {
        cfg.centers = centers_arg(c)?;
    }
    let claimed = claim.as_deref().map(|c| rational_arg("--claim", c)).transpose()?;
    let report = projection_profile(&r1, &r2, &alpha, &dom, horizon, &cfg, claimed);
    print!("{report}");
    let violations = report.violations();
    if !violations.is_empty() {
        let levels: Vec<String> = violations.iter().map(|n| n.to_string()).collect();
        println!("above claim at levels {}", levels.join(" "));
    }
    Ok(if report.complete() && violations.is_empty() { OK } else { INCONCLUSIVE })
}

#[allow(clippy::too_many_arguments)]
fn telescope(
    alpha: String,
    d: String,
    horizon: usize,
    metric: Option<PathBuf>,
    out: Option<PathBuf>,
    assemble: bool,
    candidates: Vec<PathBuf>,
    cert_out: Option<PathBuf>,
    branching: usize,
    lts1: PathBuf,
    lts2: PathBuf,
) -> Outcome {
    let alpha = alpha_arg(&alpha)?;
    let d = rational_arg("-d", &d)?;
    let (r1, r2) = (load_regular(&lts1)?, load_regular(&lts2)?);
    let dom = load_metric(metric.as_deref())?;
    let pool = candidates.iter().map(|p| load_regular(p)).collect::<Result<Vec<_>, _>>()?;
    let hcfg = HuntConfig { branching, ..HuntConfig::default() };
    let fam = match telescopic_hunt(&r1, &r2, &alpha, &dom, &d, horizon, &hcfg) {
        Ok(f) => f,
        Err(obs) => {
            print!("{obs}");
            return Ok(INCONCLUSIVE);
        }
    };
    if let Err(e) = check_telescopic(&fam) {
        return Err(Exit(INCONCLUSIVE, format!("family failed its check: {e}")));
    }
    println!("found horizon {}", fam.horizon());
    for (i, s) in fam.sequences.iter().enumerate() {
        println!("level {} total {} steps {}", i + 1, format_rational(&s.total_cost()), s.len());
    }
    if let Some(p) = out.as_deref() {
        write(p, &print_family(&fam))?;
    }
    if !assemble {
        return Ok(OK);
    }
    let cert = match assemble_limit(&fam, &pool, Some(d)) {
        Ok(c) => c,
        Err(e) => {
            println!("limit inconclusive: {e}");
            return Ok(INCONCLUSIVE);
        }
    };
    if let Err(errs) = verify_ccd(&cert) {
        println!("limit inconclusive: assembled certificate fails: {}", errs[0]);
        return Ok(INCONCLUSIVE);
    }
    println!("limit verified bound {}", format_rational(&cert.triples[0].bound));
    if let Some(p) = cert_out.as_deref() {
        write(p, &print_ccd(&cert))?;
    }
    Ok(OK)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::VerifySeq { alpha, metric, from, to, seq } => verify_seq(alpha, metric, from, to, seq),
        Command::VerifyCcd { cert } => verify_ccd_cmd(cert),
        Command::Dist { alpha, metric, exact, centers, solver, max_width, ceiling, witness, t1, t2 } => {
            dist(alpha, metric, exact, centers, solver, max_width, ceiling, witness, t1, t2)
        }
        Command::Project { k, alpha, input } => project(k, alpha, input),
        Command::Reduce { dot, alpha, metric, compactor, seq } => reduce(dot, alpha, metric, compactor, seq),
        Command::Profile { alpha, horizon, metric, claim, centers, lts1, lts2 } => {
            profile(alpha, horizon, metric, claim, centers, lts1, lts2)
        }
        Command::Telescope { alpha, d, horizon, metric, out, assemble, candidates, cert, branching, lts1, lts2 } => {
            telescope(alpha, d, horizon, metric, out, assemble, candidates, cert, branching, lts1, lts2)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Exit(code, msg)) => {
            eprintln!("{msg}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use globdist::Cost;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn not_found_is_a_refutation() {
        assert_eq!(search_exit(&SearchError::NotFound(Cost::zero())), REFUTED);
        assert_eq!(search_exit(&SearchError::ScaleExceeded("x".into())), INCONCLUSIVE);
    }
}
