//! Parsing: token entry, store dumps, syntax trees and unambiguous sets.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::compiler::{CompiledGrammar, ConstraintKind, Goal, Role};
use crate::engine::{Derivation, Outcome, Stats};
use crate::term::{cmp_args, normalize_vars, Term};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("token {0} is not ground")]
pub struct TokenError(pub Term);

/// Turns words into token values: integers where they parse, atoms otherwise.
pub fn tokenize<S: AsRef<str>>(words: &[S]) -> Vec<Term> {
    words
        .iter()
        .map(|w| match w.as_ref().parse::<i64>() {
            Ok(i) => Term::int(i),
            Err(_) => Term::atom(w.as_ref()),
        })
        .collect()
}

/// The token constraints for an input, numbered from boundary 0.
pub fn token_constraints(tokens: &[Term]) -> Result<Vec<Term>, TokenError> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if !t.is_ground() {
                return Err(TokenError(t.clone()));
            }
            let i = i as i64;
            Ok(Term::compound("token", vec![Term::int(i), Term::int(i + 1), t.clone()]))
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct ParseOptions {
    pub step_limit: Option<u64>,
    pub trace: bool,
    /// Goals run before the first token.
    pub prelude: Vec<Goal>,
    /// Goals run after the last token, such as a cleanup trigger.
    pub goals: Vec<Goal>,
}

/// A finished (or interrupted) parsing derivation.
pub struct Parse<'g> {
    pub tokens: Vec<Term>,
    pub outcome: Outcome,
    derivation: Derivation<'g>,
}

/// One syntax tree node as recorded by a rule application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForestEntry {
    pub application: usize,
    pub rule: usize,
    pub node: usize,
    /// Core grammar constraints matched by the rule, in head order.
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxTree {
    pub node: Term,
    pub rule: Option<usize>,
    /// The node was removed later in the derivation.
    pub hidden: bool,
    pub children: Vec<SyntaxTree>,
}

impl SyntaxTree {
    /// Tokens at the leaves, left to right.
    pub fn frontier(&self) -> Vec<Term> {
        if self.children.is_empty() {
            return match self.node.functor() {
                Some(("token", 3)) => vec![self.node.args()[2].clone()],
                _ => Vec::new(),
            };
        }
        self.children.iter().flat_map(|c| c.frontier()).collect()
    }

    pub fn span(&self) -> (i64, i64) {
        span_of(&self.node)
    }
}

fn span_of(t: &Term) -> (i64, i64) {
    let a = t.args();
    (
        a.first().and_then(|x| x.as_int()).unwrap_or(0),
        a.get(1).and_then(|x| x.as_int()).unwrap_or(0),
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnambiguousSet {
    /// Constraint identities in creation order.
    pub nodes: Vec<usize>,
    pub maximal: bool,
}

/// Runs a grammar over the tokens, one token at a time to quiescence.
pub fn parse<'g>(g: &'g CompiledGrammar, tokens: &[Term], opts: ParseOptions) -> Result<Parse<'g>, TokenError> {
    if let Some(t) = tokens.iter().find(|t| !t.is_ground()) {
        return Err(TokenError(t.clone()));
    }
    let mut d = Derivation::new(g);
    d.set_input_length(tokens.len() as i64);
    d.set_step_limit(opts.step_limit);
    if opts.trace {
        d.enable_trace();
    }
    for goal in opts.prelude {
        d.queue_goal(goal);
    }
    for (i, t) in tokens.iter().enumerate() {
        d.queue_token(i as i64, t.clone());
    }
    for goal in opts.goals {
        d.queue_goal(goal);
    }
    let outcome = d.run();
    Ok(Parse {
        tokens: tokens.to_vec(),
        outcome,
        derivation: d,
    })
}

/// Orders constraints by functor, then boundaries, then remaining arguments.
pub fn store_order(a: &Term, b: &Term) -> Ordering {
    match (a, b) {
        (Term::Compound(f, xs), Term::Compound(g, ys)) => f.cmp(g).then_with(|| cmp_args(xs, ys)),
        _ => a.standard_cmp(b),
    }
}

/// `<0> w1 <1> w2 <2>`.
pub fn boundary_line(tokens: &[Term]) -> String {
    let mut s = String::from("<0>");
    for (i, t) in tokens.iter().enumerate() {
        let _ = write!(s, " {t} <{}>", i + 1);
    }
    s
}

impl<'g> Parse<'g> {
    pub fn derivation(&self) -> &Derivation<'g> {
        &self.derivation
    }

    pub fn stats(&self) -> Stats {
        self.derivation.stats()
    }

    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::Success
    }

    /// Backtracks into the next answer of a derivation with choices left.
    pub fn next_answer(&mut self) -> Outcome {
        self.outcome = self.derivation.next_answer();
        self.outcome
    }

    /// Live constraints, sorted, with variables named by first occurrence.
    pub fn final_store(&self) -> Vec<Term> {
        let mut live = self.derivation.live_terms();
        live.sort_by(store_order);
        normalize_vars(&live)
    }

    /// The boundary line followed by one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = boundary_line(&self.tokens);
        out.push('\n');
        for t in self.final_store() {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }

    /// Every node-creating rule application.
    pub fn forest(&self) -> Vec<ForestEntry> {
        let g = self.derivation.grammar();
        self.derivation
            .log()
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                let node = a.produced?;
                let rule = g.rule(a.rule);
                let children = rule
                    .heads
                    .iter()
                    .zip(&a.heads)
                    .filter(|(h, _)| h.role == Role::Core && h.grammar)
                    .map(|(_, &c)| c)
                    .collect();
                Some(ForestEntry {
                    application: i,
                    rule: a.rule,
                    node,
                    children,
                })
            })
            .collect()
    }

    fn producers(&self) -> HashMap<usize, Vec<ForestEntry>> {
        let mut m: HashMap<usize, Vec<ForestEntry>> = HashMap::new();
        for e in self.forest() {
            m.entry(e.node).or_default().push(e);
        }
        m
    }

    /// One tree per node-creating application; a child with several
    /// derivations is shown by its first.
    pub fn trees(&self) -> Vec<SyntaxTree> {
        let producers = self.producers();
        self.forest()
            .iter()
            .map(|e| self.build(e, &producers, &mut HashSet::new()))
            .collect()
    }

    fn build(&self, e: &ForestEntry, producers: &HashMap<usize, Vec<ForestEntry>>, path: &mut HashSet<usize>) -> SyntaxTree {
        path.insert(e.node);
        let children = e.children.iter().map(|&c| self.subtree(c, producers, path)).collect();
        path.remove(&e.node);
        SyntaxTree {
            node: self.derivation.term_of(e.node),
            rule: Some(e.rule),
            hidden: !self.derivation.constraint(e.node).alive,
            children,
        }
    }

    fn subtree(&self, cid: usize, producers: &HashMap<usize, Vec<ForestEntry>>, path: &mut HashSet<usize>) -> SyntaxTree {
        match producers.get(&cid).and_then(|ps| ps.iter().find(|p| !path.contains(&p.node) && p.children.iter().all(|c| !path.contains(c)))) {
            Some(p) => self.build(p, producers, path),
            None => SyntaxTree {
                node: self.derivation.term_of(cid),
                rule: None,
                hidden: !self.derivation.constraint(cid).alive,
                children: Vec::new(),
            },
        }
    }

    /// Number of distinct syntax trees with the given node on top.
    pub fn count_trees(&self, cid: usize) -> u128 {
        let producers = self.producers();
        let mut memo = HashMap::new();
        count(cid, &producers, &mut memo, &mut HashSet::new())
    }

    /// Grammar symbol constraints, alive or hidden, in creation order.
    pub fn nodes(&self) -> Vec<usize> {
        self.derivation
            .constraints()
            .iter()
            .filter(|c| c.kind == ConstraintKind::Symbol && (c.alive || self.derivation.log().iter().any(|a| a.produced == Some(c.id))))
            .map(|c| c.id)
            .collect()
    }

    /// Live grammar symbols, resolved.
    pub fn live_symbols(&self) -> Vec<Term> {
        self.derivation
            .alive()
            .filter(|c| c.kind == ConstraintKind::Symbol)
            .map(|c| self.derivation.term_of(c.id))
            .collect()
    }

    /// Maximal sets of nodes satisfying the pairwise unambiguity condition.
    pub fn maximal_unambiguous_sets(&self) -> Vec<UnambiguousSet> {
        let nodes = self.nodes();
        let spans: Vec<(i64, i64)> = nodes.iter().map(|&c| span_of(&self.derivation.term_of(c))).collect();
        let below = self.descendants(&nodes);
        let n = nodes.len();
        let compatible = |a: usize, b: usize| -> bool {
            unambiguous_pair(spans[a], spans[b], || below[a].contains(&nodes[b]) || below[b].contains(&nodes[a]))
        };
        let adj: Vec<BTreeSet<usize>> = (0..n)
            .map(|a| (0..n).filter(|&b| b != a && compatible(a, b)).collect())
            .collect();
        let mut out = Vec::new();
        bron_kerbosch(&adj, Vec::new(), (0..n).collect(), BTreeSet::new(), &mut out);
        let mut sets: Vec<UnambiguousSet> = out
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                UnambiguousSet {
                    nodes: s.into_iter().map(|i| nodes[i]).collect(),
                    maximal: true,
                }
            })
            .collect();
        sets.sort_by(|a, b| a.nodes.cmp(&b.nodes));
        sets
    }

    fn descendants(&self, nodes: &[usize]) -> Vec<HashSet<usize>> {
        let producers = self.producers();
        let mut memo: HashMap<usize, HashSet<usize>> = HashMap::new();
        nodes
            .iter()
            .map(|&c| reach(c, &producers, &mut memo, &mut HashSet::new()))
            .collect()
    }
}

fn reach(
    cid: usize,
    producers: &HashMap<usize, Vec<ForestEntry>>,
    memo: &mut HashMap<usize, HashSet<usize>>,
    path: &mut HashSet<usize>,
) -> HashSet<usize> {
    if let Some(r) = memo.get(&cid) {
        return r.clone();
    }
    let mut out = HashSet::new();
    if !path.insert(cid) {
        return out;
    }
    for e in producers.get(&cid).into_iter().flatten() {
        for &c in &e.children {
            out.insert(c);
            out.extend(reach(c, producers, memo, path));
        }
    }
    path.remove(&cid);
    out.remove(&cid);
    memo.insert(cid, out.clone());
    out
}

fn count(
    cid: usize,
    producers: &HashMap<usize, Vec<ForestEntry>>,
    memo: &mut HashMap<usize, u128>,
    path: &mut HashSet<usize>,
) -> u128 {
    if let Some(&n) = memo.get(&cid) {
        return n;
    }
    let Some(ps) = producers.get(&cid) else {
        return 1;
    };
    if !path.insert(cid) {
        return 0;
    }
    let mut total: u128 = 0;
    for e in ps {
        let mut prod: u128 = 1;
        for &c in &e.children {
            prod = prod.saturating_mul(count(c, producers, memo, path));
        }
        total = total.saturating_add(prod);
    }
    path.remove(&cid);
    memo.insert(cid, total);
    total
}

/// Pairwise condition on spans: no partial overlap, and nesting only along
/// the subtree relation.
pub fn unambiguous_pair(p: (i64, i64), q: (i64, i64), subtree: impl FnOnce() -> bool) -> bool {
    let (i, j) = p;
    let (k, l) = q;
    let disjoint = j <= k || l <= i;
    if disjoint {
        return true;
    }
    let nested = (i <= k && l <= j) || (k <= i && j <= l);
    nested && subtree()
}

fn bron_kerbosch(
    adj: &[BTreeSet<usize>],
    r: Vec<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() {
        if x.is_empty() {
            out.push(r);
        }
        return;
    }
    let pivot = *p.union(&x).max_by_key(|&&u| adj[u].intersection(&p).count()).unwrap();
    let candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in candidates {
        let mut r2 = r.clone();
        r2.push(v);
        let p2 = p.intersection(&adj[v]).copied().collect();
        let x2 = x.intersection(&adj[v]).copied().collect();
        bron_kerbosch(adj, r2, p2, x2, out);
        p.remove(&v);
        x.insert(v);
    }
}
