//! Line-oriented text formats: trees, LTSs, metrics, sequences,
//! certificates and telescopic bundles. Every printer emits a canonical
//! form that its parser reads back to the same text.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::ccd::{CcdCertificate, CoStep, DistanceTriple};
use crate::cost::{format_rational, parse_rational, Alpha, Cost, Rational};
use crate::domain::{Action, ActionDomain};
use crate::lts::{tree_equal, RegularTree};
use crate::step::{Step, StepSequence};
use crate::telescope::TelescopicFamily;
use crate::tree::FiniteTree;

/// Nesting limit for tree terms; keeps recursion off the stack limit.
pub const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError { line, column, message: message.into() }
    }

    fn at_line(line: usize, message: impl Into<String>) -> Self {
        Self::new(line, 1, message)
    }

    /// Shifts a single-line error to its place in a larger file.
    fn relocate(self, line: usize, column_offset: usize) -> Self {
        ParseError { line, column: self.column + column_offset, message: self.message }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Non-blank lines with comments removed, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, strip_comment(l).trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn name_token(tok: &str, line: usize, what: &str) -> Result<String, ParseError> {
    if Action::is_valid_name(tok) {
        Ok(tok.to_string())
    } else {
        Err(ParseError::at_line(line, format!("invalid {what} name '{tok}'")))
    }
}

fn rational_token(tok: &str, line: usize) -> Result<Rational, ParseError> {
    parse_rational(tok).map_err(|e| ParseError::at_line(line, format!("bad number '{tok}': {e}")))
}

fn index_token(tok: &str, line: usize) -> Result<usize, ParseError> {
    tok.parse::<usize>()
        .map_err(|_| ParseError::at_line(line, format!("bad index '{tok}'")))
}

fn alpha_token(tok: &str, line: usize) -> Result<Alpha, ParseError> {
    tok.parse::<Alpha>()
        .map_err(|e| ParseError::at_line(line, format!("bad discount '{tok}': {e}")))
}

fn expect_arity(toks: &[&str], n: usize, line: usize) -> Result<(), ParseError> {
    if toks.len() == n {
        Ok(())
    } else {
        Err(ParseError::at_line(
            line,
            format!("'{}' expects {} argument(s), found {}", toks[0], n - 1, toks.len() - 1),
        ))
    }
}

// ---------------------------------------------------------------- trees

struct TermParser<'a> {
    src: &'a str,
    pos: usize,
    depth: usize,
}

impl<'a> TermParser<'a> {
    fn error(&self, message: impl Into<String>) -> ParseError {
        let before = &self.src[..self.pos];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError::new(line, column, message)
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(match rest.chars().next() {
                Some(c) => self.error(format!("expected an action, found '{c}'")),
                None => self.error("expected an action, found end of input"),
            });
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error(format!("nesting deeper than {MAX_NESTING}")));
        }
        Ok(())
    }

    /// `tree := term ("+" term)*`; a bare `0` term adds nothing.
    fn sum(&mut self) -> Result<FiniteTree, ParseError> {
        let mut children = Vec::new();
        loop {
            if let Some(child) = self.term()? {
                children.push(child);
            }
            if !self.eat('+') {
                break;
            }
        }
        Ok(FiniteTree::from_children(children))
    }

    fn term(&mut self) -> Result<Option<(Action, FiniteTree)>, ParseError> {
        let name = self.ident()?;
        if self.eat('.') {
            let sub = self.atom()?;
            Ok(Some((Action::new(name), sub)))
        } else if name == "0" {
            Ok(None)
        } else {
            Ok(Some((Action::new(name), FiniteTree::zero())))
        }
    }

    /// `atom := "(" tree ")" | term`, where a bare `0` is the empty tree.
    fn atom(&mut self) -> Result<FiniteTree, ParseError> {
        self.enter()?;
        let out = if self.eat('(') {
            let t = self.sum()?;
            if !self.eat(')') {
                return Err(self.expected("')'"));
            }
            t
        } else {
            match self.term()? {
                Some((a, t)) => FiniteTree::prefix(a, t),
                None => FiniteTree::zero(),
            }
        };
        self.depth -= 1;
        Ok(out)
    }

    fn expected(&mut self, what: &str) -> ParseError {
        match self.peek() {
            Some(c) => self.error(format!("expected {what}, found '{c}'")),
            None => self.error(format!("expected {what}, found end of input")),
        }
    }
}

/// Parses a tree term such as `1.(2+3) + a.b`.
pub fn parse_tree(text: &str) -> Result<FiniteTree, ParseError> {
    let mut p = TermParser { src: text, pos: 0, depth: 0 };
    let t = p.sum()?;
    if p.peek().is_some() {
        return Err(p.expected("'+' or end of input"));
    }
    Ok(t)
}

pub fn print_tree(t: &FiniteTree) -> String {
    t.to_string()
}

// ----------------------------------------------------------------- LTSs

#[derive(Default)]
struct LtsBuilder {
    names: Vec<String>,
    ids: HashMap<String, usize>,
    succ: Vec<Vec<(Action, usize)>>,
    root: Option<String>,
}

impl LtsBuilder {
    fn state(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        self.succ.push(Vec::new());
        id
    }

    /// Reads one LTS line; returns false when the line is not LTS syntax.
    fn line(&mut self, toks: &[&str], line: usize) -> Result<bool, ParseError> {
        match toks.first().copied() {
            Some("root") => {
                expect_arity(toks, 2, line)?;
                let name = name_token(toks[1], line, "state")?;
                if self.root.is_some() {
                    return Err(ParseError::at_line(line, "root declared twice"));
                }
                self.root = Some(name);
                Ok(true)
            }
            Some("states") => {
                if toks.len() < 2 {
                    return Err(ParseError::at_line(line, "'states' needs at least one name"));
                }
                for t in &toks[1..] {
                    let name = name_token(t, line, "state")?;
                    self.state(&name);
                }
                Ok(true)
            }
            _ if toks.len() == 3 && toks[1].starts_with('-') && toks[1].ends_with("->") => {
                let label = toks[1]
                    .strip_prefix('-')
                    .and_then(|s| s.strip_suffix("->"))
                    .unwrap_or("");
                let action = name_token(label, line, "action")?;
                let from = name_token(toks[0], line, "state")?;
                let to = name_token(toks[2], line, "state")?;
                let s = self.state(&from);
                let t = self.state(&to);
                self.succ[s].push((Action::new(&action), t));
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn finish(mut self, line: usize) -> Result<RegularTree, ParseError> {
        let root = self
            .root
            .take()
            .ok_or_else(|| ParseError::at_line(line, "missing 'root' line"))?;
        // resolved last so a later `states` line fixes the order
        let root = self.state(&root);
        Ok(RegularTree::new(self.names, self.succ, root))
    }
}

/// Parses `s -a-> t` transitions, one `root s` line and optional
/// `states s1 s2 ...` declarations fixing the state order.
pub fn parse_lts(text: &str) -> Result<RegularTree, ParseError> {
    let mut b = LtsBuilder::default();
    let mut last = 1;
    for (n, line) in content_lines(text) {
        last = n;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !b.line(&toks, n)? {
            return Err(ParseError::at_line(n, format!("expected a transition 'state -action-> state', found '{line}'")));
        }
    }
    b.finish(last)
}

fn lts_state_names(t: &RegularTree) -> Vec<String> {
    let names = t.state_names();
    let mut seen = std::collections::HashSet::new();
    if names.iter().all(|n| Action::is_valid_name(n) && seen.insert(n.as_str())) {
        names.to_vec()
    } else {
        (0..names.len()).map(|i| format!("s{i}")).collect()
    }
}

fn write_lts(out: &mut String, t: &RegularTree, indent: &str) {
    let names = lts_state_names(t);
    let _ = writeln!(out, "{indent}root {}", names[t.root()]);
    let _ = writeln!(out, "{indent}states {}", names.join(" "));
    for (s, a, u) in t.transitions() {
        let _ = writeln!(out, "{indent}{} -{}-> {}", names[s], a, names[u]);
    }
}

pub fn print_lts(t: &RegularTree) -> String {
    let mut out = String::new();
    write_lts(&mut out, t, "");
    out
}

// --------------------------------------------------------------- metrics

/// One metric line: `a b d` declares a distance (`inf` leaves the pair
/// undeclared) and a lone `a` declares an action.
fn metric_line(dom: &mut ActionDomain, toks: &[&str], line: usize) -> Result<(), ParseError> {
    match toks.len() {
        1 => {
            dom.add_action(Action::new(&name_token(toks[0], line, "action")?));
            Ok(())
        }
        3 => {
            let a = Action::new(&name_token(toks[0], line, "action")?);
            let b = Action::new(&name_token(toks[1], line, "action")?);
            let cost: Cost = toks[2]
                .parse()
                .map_err(|e| ParseError::at_line(line, format!("bad distance '{}': {e}", toks[2])))?;
            match cost {
                Cost::Finite(d) => dom.set(a, b, d),
                Cost::Infinite => {
                    dom.add_action(a);
                    dom.add_action(b);
                }
            }
            Ok(())
        }
        _ => Err(ParseError::at_line(line, "expected 'action' or 'action action distance'")),
    }
}

/// Parses a distance table. Distances are symmetric and undeclared
/// pairs are infinitely far apart. Metric laws are checked separately
/// with [`ActionDomain::validate`].
pub fn parse_metric(text: &str) -> Result<ActionDomain, ParseError> {
    let mut dom = ActionDomain::new();
    for (n, line) in content_lines(text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        metric_line(&mut dom, &toks, n)?;
    }
    Ok(dom)
}

fn write_metric(out: &mut String, dom: &ActionDomain, prefix: &str) {
    let mut listed = std::collections::BTreeSet::new();
    for (a, b, _) in dom.entries() {
        listed.insert(a.clone());
        listed.insert(b.clone());
    }
    for a in dom.actions().filter(|a| !listed.contains(*a)) {
        let _ = writeln!(out, "{prefix}{a}");
    }
    for (a, b, d) in dom.entries() {
        let _ = writeln!(out, "{prefix}{a} {b} {}", format_rational(d));
    }
}

pub fn print_metric(dom: &ActionDomain) -> String {
    let mut out = String::new();
    write_metric(&mut out, dom, "");
    out
}

// ------------------------------------------------------------- sequences

/// A parsed sequence file. The header lines are optional so that the
/// discount and source can come from elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFile {
    pub alpha: Option<Alpha>,
    pub source: Option<FiniteTree>,
    pub target: Option<FiniteTree>,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceFileError {
    #[error("no discount given")]
    MissingAlpha,
    #[error("no source tree given")]
    MissingSource,
}

impl SequenceFile {
    /// Explicit arguments take precedence over the file headers.
    pub fn to_sequence(
        &self,
        alpha: Option<&Alpha>,
        source: Option<&FiniteTree>,
    ) -> Result<StepSequence, SequenceFileError> {
        let alpha = alpha.or(self.alpha.as_ref()).ok_or(SequenceFileError::MissingAlpha)?;
        let source = source.or(self.source.as_ref()).ok_or(SequenceFileError::MissingSource)?;
        Ok(StepSequence::new(alpha.clone(), source.clone(), self.steps.clone()))
    }
}

fn path_token(tok: &str, line: usize) -> Result<Vec<usize>, ParseError> {
    let rest = tok
        .strip_prefix('@')
        .ok_or_else(|| ParseError::at_line(line, format!("expected a path '@i.j...', found '{tok}'")))?;
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    rest.split('.').map(|p| index_token(p, line)).collect()
}

/// Reads `dup @p i [c]`, `drop @p i j [c]` or `relabel @p i a b c`;
/// returns `None` for other keywords.
fn step_line(toks: &[&str], line: usize) -> Result<Option<Step>, ParseError> {
    let optional_cost = |toks: &[&str], fixed: usize| -> Result<Rational, ParseError> {
        match toks.len() {
            n if n == fixed => Ok(Rational::from_integer(0)),
            n if n == fixed + 1 => rational_token(toks[fixed], line),
            _ => Err(ParseError::at_line(line, format!("wrong number of arguments for '{}'", toks[0]))),
        }
    };
    let step = match toks[0] {
        "dup" => {
            let cost = optional_cost(toks, 3)?;
            Step { cost, ..Step::dup(path_token(toks[1], line)?, index_token(toks[2], line)?) }
        }
        "drop" => {
            let cost = optional_cost(toks, 4)?;
            let (i, j) = (index_token(toks[2], line)?, index_token(toks[3], line)?);
            Step { cost, ..Step::drop(path_token(toks[1], line)?, i, j) }
        }
        "relabel" => {
            expect_arity(toks, 6, line)?;
            let from = name_token(toks[3], line, "action")?;
            let to = name_token(toks[4], line, "action")?;
            Step::relabel(
                path_token(toks[1], line)?,
                index_token(toks[2], line)?,
                &from,
                &to,
                rational_token(toks[5], line)?,
            )
        }
        _ => return Ok(None),
    };
    Ok(Some(step))
}

/// Splits the first whitespace-delimited token from the rest of a line.
fn head_and_rest(line: &str) -> (&str, &str, usize) {
    let head_len = line.find(char::is_whitespace).unwrap_or(line.len());
    let rest = &line[head_len..];
    let trimmed = rest.trim_start();
    (&line[..head_len], trimmed, head_len + rest.len() - trimmed.len())
}

fn tree_rest(rest: &str, line: usize, offset: usize) -> Result<FiniteTree, ParseError> {
    parse_tree(rest).map_err(|e| e.relocate(line, offset))
}

pub fn parse_sequence(text: &str) -> Result<SequenceFile, ParseError> {
    let mut file = SequenceFile { alpha: None, source: None, target: None, steps: Vec::new() };
    for (n, line) in content_lines(text) {
        let (head, rest, offset) = head_and_rest(line);
        match head {
            "alpha" | "source" | "target" if !file.steps.is_empty() => {
                return Err(ParseError::at_line(n, format!("'{head}' must precede the steps")));
            }
            "alpha" => {
                if file.alpha.is_some() {
                    return Err(ParseError::at_line(n, "discount declared twice"));
                }
                let toks: Vec<&str> = line.split_whitespace().collect();
                expect_arity(&toks, 2, n)?;
                file.alpha = Some(alpha_token(toks[1], n)?);
            }
            "source" | "target" => {
                let slot = if head == "source" { &mut file.source } else { &mut file.target };
                if slot.is_some() {
                    return Err(ParseError::at_line(n, format!("{head} declared twice")));
                }
                *slot = Some(tree_rest(rest, n, offset)?);
            }
            _ => {
                let toks: Vec<&str> = line.split_whitespace().collect();
                match step_line(&toks, n)? {
                    Some(step) => file.steps.push(step),
                    None => return Err(ParseError::at_line(n, format!("unknown keyword '{head}'"))),
                }
            }
        }
    }
    Ok(file)
}

pub fn print_sequence_file(file: &SequenceFile) -> String {
    let mut out = String::new();
    if let Some(a) = &file.alpha {
        let _ = writeln!(out, "alpha {a}");
    }
    if let Some(s) = &file.source {
        let _ = writeln!(out, "source {s}");
    }
    if let Some(t) = &file.target {
        let _ = writeln!(out, "target {t}");
    }
    for step in &file.steps {
        let _ = writeln!(out, "{step}");
    }
    out
}

pub fn print_sequence(seq: &StepSequence, target: Option<&FiniteTree>) -> String {
    print_sequence_file(&SequenceFile {
        alpha: Some(seq.alpha.clone()),
        source: Some(seq.source.clone()),
        target: target.cloned(),
        steps: seq.steps.clone(),
    })
}

// ---------------------------------------------------------- certificates

/// Named trees shared by certificates and bundles.
#[derive(Default)]
struct TreeTable {
    names: Vec<String>,
    trees: Vec<RegularTree>,
}

impl TreeTable {
    fn get(&self, name: &str, line: usize) -> Result<RegularTree, ParseError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.trees[i].clone())
            .ok_or_else(|| ParseError::at_line(line, format!("unknown tree '{name}'")))
    }

    fn define(&mut self, name: String, tree: RegularTree, line: usize) -> Result<(), ParseError> {
        if self.names.contains(&name) {
            return Err(ParseError::at_line(line, format!("tree '{name}' defined twice")));
        }
        self.names.push(name);
        self.trees.push(tree);
        Ok(())
    }
}

fn costep_line(toks: &[&str], line: usize) -> Result<CoStep, ParseError> {
    let optional_cost = |fixed: usize| -> Result<Rational, ParseError> {
        match toks.len() {
            n if n == fixed => Ok(Rational::from_integer(0)),
            n if n == fixed + 1 => rational_token(toks[fixed], line),
            _ => Err(ParseError::at_line(line, format!("wrong number of arguments for '{}'", toks[0]))),
        }
    };
    match toks[0] {
        "dup" => {
            let cost = optional_cost(2)?;
            Ok(CoStep { cost, ..CoStep::dup(index_token(toks[1], line)?) })
        }
        "drop" => {
            let cost = optional_cost(3)?;
            Ok(CoStep { cost, ..CoStep::drop(index_token(toks[1], line)?, index_token(toks[2], line)?) })
        }
        "relabel" => {
            expect_arity(toks, 5, line)?;
            let from = name_token(toks[2], line, "action")?;
            let to = name_token(toks[3], line, "action")?;
            Ok(CoStep::relabel(index_token(toks[1], line)?, &from, &to, rational_token(toks[4], line)?))
        }
        "coind" => {
            expect_arity(toks, 4, line)?;
            Ok(CoStep::coind(index_token(toks[1], line)?, index_token(toks[2], line)?, rational_token(toks[3], line)?))
        }
        other => Err(ParseError::at_line(line, format!("unknown step '{other}'"))),
    }
}

/// Block being read by the certificate and bundle parsers.
enum Block {
    None,
    Lts(usize, String, LtsBuilder),
    Triple(usize, DistanceTriple, Vec<CoStep>),
    Level(usize, Vec<Step>),
}

/// Header lines shared by certificates and bundles: discount, actions,
/// distances and named trees.
struct Preamble {
    alpha: Option<Alpha>,
    domain: ActionDomain,
    trees: TreeTable,
}

impl Preamble {
    fn new() -> Self {
        Preamble { alpha: None, domain: ActionDomain::new(), trees: TreeTable::default() }
    }

    /// Handles a top-level line; returns a block to open, or `None` if
    /// the keyword is not a preamble keyword.
    fn line(&mut self, line: &str, n: usize) -> Result<Option<Block>, ParseError> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (head, rest, offset) = head_and_rest(line);
        match head {
            "alpha" => {
                expect_arity(&toks, 2, n)?;
                if self.alpha.is_some() {
                    return Err(ParseError::at_line(n, "discount declared twice"));
                }
                self.alpha = Some(alpha_token(toks[1], n)?);
            }
            "action" => {
                expect_arity(&toks, 2, n)?;
                metric_line(&mut self.domain, &toks[1..], n)?;
            }
            "dist" => {
                expect_arity(&toks, 4, n)?;
                metric_line(&mut self.domain, &toks[1..], n)?;
            }
            "tree" => {
                let (name, term, off2) = head_and_rest(rest);
                let name = name_token(name, n, "tree")?;
                let t = tree_rest(term, n, offset + off2)?;
                self.trees.define(name, RegularTree::from_finite(&t), n)?;
            }
            "lts" => {
                expect_arity(&toks, 2, n)?;
                let name = name_token(toks[1], n, "tree")?;
                return Ok(Some(Block::Lts(n, name, LtsBuilder::default())));
            }
            _ => return Ok(None),
        }
        Ok(Some(Block::None))
    }

    fn alpha(&self, line: usize) -> Result<Alpha, ParseError> {
        self.alpha
            .clone()
            .ok_or_else(|| ParseError::at_line(line, "missing 'alpha' line"))
    }
}

/// Runs the shared block structure; `top` handles keywords that are
/// not part of the preamble and `close` receives finished blocks.
fn parse_blocks(
    text: &str,
    pre: &mut Preamble,
    mut top: impl FnMut(&[&str], usize, &Preamble) -> Result<Block, ParseError>,
    mut close: impl FnMut(Block, usize) -> Result<(), ParseError>,
) -> Result<usize, ParseError> {
    let mut block = Block::None;
    let mut last = 0;
    for (n, line) in content_lines(text) {
        last = n;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks == ["end"] {
            match std::mem::replace(&mut block, Block::None) {
                Block::None => return Err(ParseError::at_line(n, "'end' outside a block")),
                Block::Lts(_, name, b) => {
                    let t = b.finish(n)?;
                    pre.trees.define(name, t, n)?;
                }
                other => close(other, n)?,
            }
            continue;
        }
        match &mut block {
            Block::None => {
                block = match pre.line(line, n)? {
                    Some(b) => b,
                    None => top(&toks, n, pre)?,
                };
            }
            Block::Lts(_, _, b) => {
                if !b.line(&toks, n)? {
                    return Err(ParseError::at_line(n, format!("expected a transition or 'end', found '{line}'")));
                }
            }
            Block::Triple(_, _, steps) => steps.push(costep_line(&toks, n)?),
            Block::Level(_, steps) => match step_line(&toks, n)? {
                Some(s) => steps.push(s),
                None => return Err(ParseError::at_line(n, format!("unknown step '{}'", toks[0]))),
            },
        }
    }
    match block {
        Block::None => Ok(last),
        Block::Lts(start, ..) | Block::Triple(start, ..) | Block::Level(start, ..) => {
            Err(ParseError::at_line(start, "block is missing its 'end'"))
        }
    }
}

/// Parses a certificate:
///
/// ```text
/// alpha 1/2
/// dist a b 1
/// lts A
///   root n0
///   n0 -a-> n0
/// end
/// tree B b
/// triple 0 A B 2
///   relabel 0 a b 1
///   coind 0 0 1
/// end
/// ```
pub fn parse_ccd(text: &str) -> Result<CcdCertificate, ParseError> {
    let mut pre = Preamble::new();
    let mut triples: Vec<(DistanceTriple, Vec<CoStep>)> = Vec::new();
    let mut count = 0usize;
    let last = parse_blocks(
        text,
        &mut pre,
        |toks, n, pre| {
            if toks[0] != "triple" {
                return Err(ParseError::at_line(n, format!("unknown keyword '{}'", toks[0])));
            }
            expect_arity(toks, 5, n)?;
            let idx = index_token(toks[1], n)?;
            if idx != count {
                return Err(ParseError::at_line(n, format!("expected triple {count}, found {idx}")));
            }
            count += 1;
            let triple = DistanceTriple {
                left: pre.trees.get(toks[2], n)?,
                right: pre.trees.get(toks[3], n)?,
                bound: rational_token(toks[4], n)?,
            };
            Ok(Block::Triple(n, triple, Vec::new()))
        },
        |block, _| {
            if let Block::Triple(_, t, w) = block {
                triples.push((t, w));
            }
            Ok(())
        },
    )?;
    let mut cert = CcdCertificate::new(pre.alpha(last.max(1))?, pre.domain);
    for (t, w) in triples {
        cert.push(t, w);
    }
    Ok(cert)
}

/// Assigns names to trees, reusing the name of an equal tree.
fn name_trees<'a>(trees: impl IntoIterator<Item = &'a RegularTree>) -> (Vec<RegularTree>, Vec<usize>) {
    let mut distinct: Vec<RegularTree> = Vec::new();
    let mut refs = Vec::new();
    for t in trees {
        let i = match distinct.iter().position(|d| tree_equal(d, t)) {
            Some(i) => i,
            None => {
                distinct.push(t.clone());
                distinct.len() - 1
            }
        };
        refs.push(i);
    }
    (distinct, refs)
}

fn write_preamble(out: &mut String, alpha: &Alpha, dom: &ActionDomain) {
    let _ = writeln!(out, "alpha {alpha}");
    let mut table = String::new();
    write_metric(&mut table, dom, "");
    for l in table.lines() {
        let kw = if l.contains(' ') { "dist" } else { "action" };
        let _ = writeln!(out, "{kw} {l}");
    }
}

fn write_named_lts(out: &mut String, name: &str, t: &RegularTree) {
    let _ = writeln!(out, "lts {name}");
    write_lts(out, t, "  ");
    let _ = writeln!(out, "end");
}

pub fn print_ccd(cert: &CcdCertificate) -> String {
    let mut out = String::new();
    write_preamble(&mut out, &cert.alpha, &cert.domain);
    let (distinct, refs) = name_trees(cert.triples.iter().flat_map(|t| [&t.left, &t.right]));
    for (i, t) in distinct.iter().enumerate() {
        write_named_lts(&mut out, &format!("t{i}"), t);
    }
    for (k, triple) in cert.triples.iter().enumerate() {
        let _ = writeln!(
            out,
            "triple {k} t{} t{} {}",
            refs[2 * k],
            refs[2 * k + 1],
            format_rational(&triple.bound)
        );
        for step in cert.witnesses.get(k).map(Vec::as_slice).unwrap_or(&[]) {
            let _ = writeln!(out, "  {step}");
        }
        let _ = writeln!(out, "end");
    }
    out
}

// --------------------------------------------------------------- bundles

/// Parses a telescopic bundle: a preamble, trees named `left` and
/// `right`, and `level n ... end` blocks holding `S^1, S^2, ...`. Each
/// member starts at the depth-`n` cut of `left`.
pub fn parse_family(text: &str) -> Result<TelescopicFamily, ParseError> {
    let mut pre = Preamble::new();
    let mut levels: Vec<Vec<Step>> = Vec::new();
    let mut count = 0usize;
    let last = parse_blocks(
        text,
        &mut pre,
        |toks, n, _| {
            if toks[0] != "level" {
                return Err(ParseError::at_line(n, format!("unknown keyword '{}'", toks[0])));
            }
            expect_arity(toks, 2, n)?;
            let level = index_token(toks[1], n)?;
            if level != count + 1 {
                return Err(ParseError::at_line(n, format!("expected level {}, found {level}", count + 1)));
            }
            count += 1;
            Ok(Block::Level(n, Vec::new()))
        },
        |block, _| {
            if let Block::Level(_, steps) = block {
                levels.push(steps);
            }
            Ok(())
        },
    )?;
    let last = last.max(1);
    let alpha = pre.alpha(last)?;
    let left = pre.trees.get("left", last)?;
    let right = pre.trees.get("right", last)?;
    let sequences = levels
        .into_iter()
        .enumerate()
        .map(|(i, steps)| StepSequence::new(alpha.clone(), left.unfold_to_depth(i + 1), steps))
        .collect();
    Ok(TelescopicFamily { alpha, domain: pre.domain, left, right, sequences })
}

pub fn print_family(fam: &TelescopicFamily) -> String {
    let mut out = String::new();
    write_preamble(&mut out, &fam.alpha, &fam.domain);
    write_named_lts(&mut out, "left", &fam.left);
    write_named_lts(&mut out, "right", &fam.right);
    for (i, seq) in fam.sequences.iter().enumerate() {
        let _ = writeln!(out, "level {}", i + 1);
        for step in &seq.steps {
            let _ = writeln!(out, "  {step}");
        }
        let _ = writeln!(out, "end");
    }
    out
}

// ------------------------------------------------------------- detection

/// The kinds of input file the command line accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Tree,
    Lts,
    Sequence,
    Certificate,
    Family,
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputKind::Tree => "tree",
            InputKind::Lts => "lts",
            InputKind::Sequence => "sequence",
            InputKind::Certificate => "certificate",
            InputKind::Family => "bundle",
        })
    }
}

/// Guesses the kind of a file from its leading keywords.
pub fn detect_kind(text: &str) -> InputKind {
    let heads: Vec<&str> = content_lines(text)
        .filter_map(|(_, l)| l.split_whitespace().next())
        .collect();
    let has = |k: &str| heads.contains(&k);
    if has("triple") {
        InputKind::Certificate
    } else if has("level") {
        InputKind::Family
    } else if has("lts") || has("dist") {
        InputKind::Certificate
    } else if has("root") {
        InputKind::Lts
    } else if ["alpha", "source", "target", "dup", "drop", "relabel"].iter().any(|k| has(k)) {
        InputKind::Sequence
    } else {
        InputKind::Tree
    }
}

/// Parses a file holding a tree term; comments are allowed.
pub fn parse_tree_file(text: &str) -> Result<FiniteTree, ParseError> {
    let cleaned: Vec<&str> = text.lines().map(strip_comment).collect();
    parse_tree(&cleaned.join("\n"))
}
