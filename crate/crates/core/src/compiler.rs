//! Translation of grammar rules into indexed CHR rules.
//!
//! Every grammar symbol gets two leading boundary arguments; terminals become
//! `token/3` patterns; gaps become guard inequations over boundaries.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::source::{
    expand_context_disjunction, has_errors, is_assumption, validate, Arrow, BodyItem, ChrRule,
    Diagnostic, ElementKind, GrammarRule, HeadElement, Severity, Signature, SourceGrammar,
};
use crate::term::{list, Term, Var};

/// Reserved atom standing for the input length in guards.
pub const INPUT_LENGTH: &str = "$length";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Left,
    Core,
    Right,
}

#[derive(Clone, Debug)]
pub struct HeadPattern {
    pub term: Term,
    pub kept: bool,
    pub active: bool,
    pub role: Role,
    /// Grammar symbol or token, as opposed to a plain constraint.
    pub grammar: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AssumeOp {
    Linear,
    Intuitionistic,
    Expectation,
}

impl AssumeOp {
    pub fn from_functor(name: &str) -> Option<(AssumeOp, bool)> {
        Some(match name {
            "=+" => (AssumeOp::Linear, false),
            "=*" => (AssumeOp::Intuitionistic, false),
            "=-" => (AssumeOp::Expectation, false),
            "+" => (AssumeOp::Linear, true),
            "*" => (AssumeOp::Intuitionistic, true),
            "-" => (AssumeOp::Expectation, true),
            _ => return None,
        })
    }

    pub fn symbol(self, timed: bool) -> &'static str {
        match (self, timed) {
            (AssumeOp::Linear, false) => "=+",
            (AssumeOp::Intuitionistic, false) => "=*",
            (AssumeOp::Expectation, false) => "=-",
            (AssumeOp::Linear, true) => "+",
            (AssumeOp::Intuitionistic, true) => "*",
            (AssumeOp::Expectation, true) => "-",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Goal {
    Constraint(Term),
    /// A new syntax node.
    Symbol(Term),
    Unify(Term, Term),
    Dif(Term, Term),
    /// A built-in test such as `X > 1` or `X == Y`.
    Test(Term),
    Fail,
    True,
    Disjunction(Vec<Vec<Goal>>),
    Assume {
        op: AssumeOp,
        term: Term,
        timed: bool,
        /// Word boundary used by the timed forms.
        position: Option<Term>,
    },
    NewIndex(Term),
    CopyAbducibles {
        from: Vec<Term>,
        to: Term,
    },
    /// Runs the goals with failure isolated to this scope.
    Transaction(Vec<Goal>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Grammar,
    Integrity,
    ExplicitNegation,
    Compaction,
}

#[derive(Clone, Debug)]
pub struct CompiledRule {
    pub id: usize,
    pub name: Option<String>,
    pub kind: Arrow,
    pub heads: Vec<HeadPattern>,
    pub guard: Vec<Term>,
    pub body: Vec<Goal>,
    pub origin: Origin,
    /// History keyed by the unordered pair of heads.
    pub symmetric_history: bool,
    pub line: usize,
}

impl CompiledRule {
    pub fn kept_heads(&self) -> impl Iterator<Item = &HeadPattern> {
        self.heads.iter().filter(|h| h.kept)
    }

    pub fn removed_heads(&self) -> impl Iterator<Item = &HeadPattern> {
        self.heads.iter().filter(|h| !h.kept)
    }

    /// The rule as a CHR-syntax term, for comparison up to renaming.
    pub fn to_term(&self) -> Term {
        let conj = |ts: Vec<Term>| -> Term {
            let mut it = ts.into_iter().rev();
            let last = it.next().unwrap_or_else(|| Term::atom("true"));
            it.fold(last, |acc, t| Term::compound(",", vec![t, acc]))
        };
        let kept: Vec<Term> = self.kept_heads().map(|h| h.term.clone()).collect();
        let removed: Vec<Term> = self.removed_heads().map(|h| h.term.clone()).collect();
        let (arrow, head) = match self.kind {
            Arrow::Propagation => ("==>", conj(kept)),
            _ if kept.is_empty() => ("<=>", conj(removed)),
            _ => ("<=>", Term::compound("\\", vec![conj(kept), conj(removed)])),
        };
        let body = conj(self.body.iter().map(goal_term).collect());
        let rhs = if self.guard.is_empty() {
            body
        } else {
            Term::compound("|", vec![conj(self.guard.clone()), body])
        };
        Term::compound(arrow, vec![head, rhs])
    }
}

pub fn goal_term(g: &Goal) -> Term {
    let conj = |gs: &[Goal]| -> Term {
        let mut it = gs.iter().rev().map(goal_term);
        let last = it.next().unwrap_or_else(|| Term::atom("true"));
        it.fold(last, |acc, t| Term::compound(",", vec![t, acc]))
    };
    match g {
        Goal::Constraint(t) | Goal::Symbol(t) | Goal::Test(t) => t.clone(),
        Goal::Unify(a, b) => Term::compound("=", vec![a.clone(), b.clone()]),
        Goal::Dif(a, b) => Term::compound("dif", vec![a.clone(), b.clone()]),
        Goal::Fail => Term::atom("fail"),
        Goal::True => Term::atom("true"),
        Goal::Disjunction(branches) => {
            let mut it = branches.iter().rev().map(|b| conj(b));
            let last = it.next().unwrap_or_else(|| Term::atom("fail"));
            it.fold(last, |acc, t| Term::compound(";", vec![t, acc]))
        }
        Goal::Assume { op, term, timed, position } => {
            let t = Term::compound(op.symbol(*timed), vec![term.clone()]);
            match position {
                Some(p) => Term::compound("@", vec![t, p.clone()]),
                None => t,
            }
        }
        Goal::NewIndex(i) => Term::compound("new_index", vec![i.clone()]),
        Goal::CopyAbducibles { from, to } => {
            Term::compound("copy_abducibles", vec![list(from.clone()), to.clone()])
        }
        Goal::Transaction(gs) => Term::compound("transaction", vec![conj(gs)]),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CompileOptions {
    /// `None` selects the default: on for propagation-only grammars.
    pub passive: Option<bool>,
    pub ambiguity_indexing: bool,
    pub compaction: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResolvedOptions {
    pub passive: bool,
    pub ambiguity_indexing: bool,
    pub compaction: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Token,
    Symbol,
    Abducible,
    NegatedAbducible,
    Host,
    Hypothesis,
    Expectation,
}

#[derive(Clone, Debug)]
pub struct CompiledGrammar {
    pub name: Option<String>,
    pub rules: Vec<CompiledRule>,
    pub grammar_symbols: BTreeSet<Signature>,
    pub constraints: BTreeSet<Signature>,
    pub abducibles: BTreeSet<Signature>,
    pub options: ResolvedOptions,
    pub warnings: Vec<Diagnostic>,
}

impl CompiledGrammar {
    /// Extra arguments carried by compiled grammar symbols.
    pub fn symbol_offset(&self) -> usize {
        2 + usize::from(self.options.ambiguity_indexing)
    }

    pub fn abducible_offset(&self) -> usize {
        usize::from(self.options.ambiguity_indexing)
    }

    pub fn kind_of(&self, t: &Term) -> ConstraintKind {
        let Some((name, arity)) = t.functor() else {
            return ConstraintKind::Host;
        };
        match (name, arity) {
            ("token", 3) => return ConstraintKind::Token,
            ("=+" | "=*" | "+" | "*", 1) => return ConstraintKind::Hypothesis,
            ("=-" | "-", 1) => return ConstraintKind::Expectation,
            _ => {}
        }
        if let Some(a) = arity.checked_sub(self.symbol_offset()) {
            if self.grammar_symbols.contains(&(name.to_string(), a)) {
                return ConstraintKind::Symbol;
            }
        }
        if let Some(a) = arity.checked_sub(self.abducible_offset()) {
            if self.abducibles.contains(&(name.to_string(), a)) {
                return ConstraintKind::Abducible;
            }
            if let Some(base) = name.strip_suffix('_') {
                if self.abducibles.contains(&(base.to_string(), a)) {
                    return ConstraintKind::NegatedAbducible;
                }
            }
        }
        ConstraintKind::Host
    }

    pub fn rule(&self, id: usize) -> &CompiledRule {
        &self.rules[id]
    }
}

/// Compilation failure: the diagnostics include at least one error.
#[derive(Clone, Debug, thiserror::Error)]
#[error("grammar rejected with {} error(s)", .0.iter().filter(|d| d.severity == Severity::Error).count())]
pub struct CompileError(pub Vec<Diagnostic>);

fn resolve_options(g: &SourceGrammar, opts: CompileOptions) -> ResolvedOptions {
    let mut passive = None;
    let mut indexing = false;
    let mut compaction = false;
    for p in &g.pragmas {
        match p.functor().map(|f| f.0) {
            Some("passive") => passive = Some(true),
            Some("no_passive" | "nopassive") => passive = Some(false),
            Some("ambiguity_index") => indexing = true,
            Some("compaction") => compaction = true,
            _ => {}
        }
    }
    ResolvedOptions {
        passive: opts.passive.or(passive).unwrap_or_else(|| g.propagation_only()),
        ambiguity_indexing: opts.ambiguity_indexing || indexing,
        compaction: opts.compaction || compaction,
    }
}

/// Validates and compiles a grammar.
pub fn compile(g: &SourceGrammar, opts: CompileOptions) -> Result<CompiledGrammar, CompileError> {
    let mut diags = validate(g);
    if has_errors(&diags) {
        return Err(CompileError(diags));
    }
    let options = resolve_options(g, opts);
    if options.passive {
        let risky = g.rules.iter().any(|r| !r.left.is_empty() || r.arrow != Arrow::Propagation);
        if risky {
            diags.push(Diagnostic {
                severity: Severity::Warning,
                line: 1,
                col: 1,
                message: "passive optimization with left contexts or removal rules may skip applications".into(),
            });
        }
    }
    let mut ordered: Vec<(usize, Vec<CompiledRule>)> = Vec::new();
    let mut errors = Vec::new();
    for r in &g.rules {
        if r.core.is_empty() || r.is_identity_production() {
            continue;
        }
        let mut out = Vec::new();
        for expanded in expand_context_disjunction(r) {
            match compile_rule(g, &expanded, options) {
                Ok(c) => out.push(c),
                Err(message) => errors.push(Diagnostic {
                    severity: Severity::Error,
                    line: r.line,
                    col: r.col,
                    message,
                }),
            }
        }
        ordered.push((r.seq, out));
    }
    for r in &g.integrity_rules {
        ordered.push((r.seq, vec![compile_chr_rule(g, r, options)]));
    }
    if !errors.is_empty() {
        diags.extend(errors);
        return Err(CompileError(diags));
    }
    ordered.sort_by_key(|(s, _)| *s);
    let mut rules: Vec<CompiledRule> = ordered.into_iter().flat_map(|(_, rs)| rs).collect();
    rules.extend(expand_abducibles(&g.abducibles, options));
    for (i, r) in rules.iter_mut().enumerate() {
        r.id = i;
    }
    Ok(CompiledGrammar {
        name: g.name.clone(),
        rules,
        grammar_symbols: g.grammar_symbols.clone(),
        constraints: g.constraints.clone(),
        abducibles: g.abducibles.clone(),
        options,
        warnings: diags,
    })
}

/// Boundary constraint produced by gap lowering.
enum GapConstraint {
    Range {
        left: Term,
        right: Term,
        min: i64,
        max: Option<i64>,
    },
    All {
        left: Term,
        right: Term,
    },
}

struct Builder {
    opts: ResolvedOptions,
    arrow: Arrow,
    heads: Vec<HeadPattern>,
    gaps: Vec<GapConstraint>,
    counter: usize,
    /// Index variables of core grammar symbols.
    core_indices: Vec<Term>,
}

impl Builder {
    fn fresh(&mut self) -> Term {
        let t = Term::Var(Var::fresh(&format!("N{}", self.counter)));
        self.counter += 1;
        t
    }

    fn kept(&self, role: Role, e: &HeadElement, inherited: bool) -> bool {
        self.arrow == Arrow::Propagation || role != Role::Core || e.kept || inherited
    }

    fn push_symbol(&mut self, t: &Term, from: Term, to: Term, role: Role, kept: bool) {
        let mut args = vec![from, to];
        if self.opts.ambiguity_indexing {
            let idx = Term::Var(Var::fresh(if role == Role::Core { "I" } else { "_" }));
            if role == Role::Core {
                self.core_indices.push(idx.clone());
            }
            args.push(idx);
        }
        args.extend(t.args().iter().cloned());
        let name = t.functor().unwrap().0;
        self.heads.push(HeadPattern {
            term: Term::compound(name, args),
            kept,
            active: true,
            role,
            grammar: true,
        });
    }

    /// Threads boundaries through `seq` from `start`; returns the end boundary.
    fn thread(
        &mut self,
        seq: &[HeadElement],
        start: Term,
        end: Option<Term>,
        role: Role,
        inherited: bool,
    ) -> Result<Term, String> {
        let mut cur = start;
        // consecutive gaps are merged into one range
        let mut pending: Option<(Term, i64, Option<i64>)> = None;
        let last_positional = seq.iter().rposition(|e| !matches!(e.kind, ElementKind::Host(_)));
        for (i, e) in seq.iter().enumerate() {
            let is_last = Some(i) == last_positional;
            let kept = self.kept(role, e, inherited);
            match &e.kind {
                ElementKind::Gap | ElementKind::BoundedGap { .. } => {
                    let (min, max) = match e.kind {
                        ElementKind::BoundedGap { min, max } => (min, Some(max)),
                        _ => (0, None),
                    };
                    pending = Some(match pending.take() {
                        None => (cur.clone(), min, max),
                        Some((l, a, b)) => (l, a + min, b.zip(max).map(|(x, y)| x + y)),
                    });
                    if is_last {
                        let (left, min, max) = pending.take().unwrap();
                        let right = end.clone().unwrap_or_else(|| self.fresh());
                        self.gaps.push(GapConstraint::Range { left, right: right.clone(), min, max });
                        cur = right;
                    }
                }
                ElementKind::Host(t) => self.heads.push(HeadPattern {
                    term: t.clone(),
                    kept,
                    active: true,
                    role,
                    grammar: false,
                }),
                ElementKind::Alternatives(_) => return Err("unexpanded context disjunction".into()),
                _ => {
                    if let Some((left, min, max)) = pending.take() {
                        let right = self.fresh();
                        self.gaps.push(GapConstraint::Range { left, right: right.clone(), min, max });
                        cur = right;
                    }
                    let next = match (is_last, &end) {
                        (true, Some(t)) => t.clone(),
                        _ => self.fresh(),
                    };
                    match &e.kind {
                        ElementKind::Symbol(t) => {
                            self.push_symbol(t, cur.clone(), next.clone(), role, kept);
                        }
                        ElementKind::Terminal(t) => self.heads.push(HeadPattern {
                            term: Term::compound("token", vec![cur.clone(), next.clone(), t.clone()]),
                            kept,
                            active: true,
                            role,
                            grammar: true,
                        }),
                        ElementKind::AllGap => self.gaps.push(GapConstraint::All {
                            left: cur.clone(),
                            right: next.clone(),
                        }),
                        ElementKind::Parallel(l, r) => {
                            let has_positional =
                                |s: &[HeadElement]| s.iter().any(|e| !matches!(e.kind, ElementKind::Host(_)));
                            if !has_positional(l) || !has_positional(r) {
                                return Err("parallel match operand without grammar symbols".into());
                            }
                            let inherit = inherited || e.kept;
                            self.thread(l, cur.clone(), Some(next.clone()), role, inherit)?;
                            self.thread(r, cur.clone(), Some(next.clone()), role, inherit)?;
                        }
                        _ => unreachable!(),
                    }
                    cur = next;
                }
            }
        }
        if let Some((left, min, max)) = pending {
            let right = end.unwrap_or_else(|| self.fresh());
            self.gaps.push(GapConstraint::Range { left, right: right.clone(), min, max });
            cur = right;
        }
        Ok(cur)
    }

    fn lower_gaps(&mut self) -> Vec<Term> {
        let mut bound: HashSet<Var> = HashSet::new();
        for h in &self.heads {
            bound.extend(h.term.vars());
        }
        let is_bound = |t: &Term| t.as_var().is_none_or(|v| bound.contains(v));
        let mut out = Vec::new();
        for gap in &self.gaps {
            match gap {
                GapConstraint::Range { left, right, min, max } => {
                    let (lb, rb) = (is_bound(left), is_bound(right));
                    match (lb, rb) {
                        (true, true) => out.extend(lower_gap(left, right, *min, *max)),
                        // leading gap: some start in 0..=right exists iff right >= min
                        (false, true) if *min > 0 => out.push(leq(Term::int(*min), right.clone())),
                        // trailing gap: must fit before the end of the input
                        (true, false) if *min > 0 => {
                            out.push(leq(plus(left, *min), Term::atom(INPUT_LENGTH)))
                        }
                        _ => {}
                    }
                }
                GapConstraint::All { left, right } => {
                    if is_bound(left) {
                        out.push(Term::compound("=:=", vec![left.clone(), Term::int(0)]));
                    }
                    if is_bound(right) {
                        out.push(Term::compound("=:=", vec![right.clone(), Term::atom(INPUT_LENGTH)]));
                    }
                }
            }
        }
        out
    }
}

fn leq(a: Term, b: Term) -> Term {
    Term::compound("=<", vec![a, b])
}

fn plus(t: &Term, n: i64) -> Term {
    Term::compound("+", vec![t.clone(), Term::int(n)])
}

/// Guard atoms for a gap between boundaries `left` and `right`.
pub fn lower_gap(left: &Term, right: &Term, min: i64, max: Option<i64>) -> Vec<Term> {
    let mut out = Vec::new();
    if min == 0 {
        out.push(leq(left.clone(), right.clone()));
    } else {
        out.push(leq(plus(left, min), right.clone()));
    }
    if let Some(max) = max {
        out.push(leq(right.clone(), plus(left, max)));
    }
    out
}

struct BodyCtx<'a> {
    g: &'a SourceGrammar,
    opts: ResolvedOptions,
    span: Option<(Term, Term)>,
    index: Option<Term>,
}

impl BodyCtx<'_> {
    fn index_abducible(&self, t: &Term) -> Term {
        match (&self.index, t.functor()) {
            (Some(idx), Some((name, arity))) if self.opts.ambiguity_indexing => {
                let base = name.strip_suffix('_').unwrap_or(name);
                if self.g.abducibles.contains(&(base.to_string(), arity)) {
                    let mut args = vec![idx.clone()];
                    args.extend(t.args().iter().cloned());
                    return Term::compound(name, args);
                }
                t.clone()
            }
            _ => t.clone(),
        }
    }

    fn goals(&self, items: &[BodyItem]) -> Vec<Goal> {
        items.iter().map(|b| self.goal(b)).collect()
    }

    fn goal(&self, b: &BodyItem) -> Goal {
        match b {
            BodyItem::Symbol(t) => {
                let (x1, x2) = self.span.clone().expect("grammar symbol outside a grammar rule");
                let mut args = vec![x1, x2];
                if let (true, Some(i)) = (self.opts.ambiguity_indexing, &self.index) {
                    args.push(i.clone());
                }
                args.extend(t.args().iter().cloned());
                Goal::Symbol(Term::compound(t.functor().unwrap().0, args))
            }
            BodyItem::Disjunction(branches) => {
                Goal::Disjunction(branches.iter().map(|br| self.goals(br)).collect())
            }
            BodyItem::Host(t) => self.host(t),
        }
    }

    fn host(&self, t: &Term) -> Goal {
        let (name, arity) = t.functor().unwrap();
        let args = t.args();
        match (name, arity) {
            ("=", 2) => Goal::Unify(args[0].clone(), args[1].clone()),
            ("\\=" | "dif", 2) => Goal::Dif(args[0].clone(), args[1].clone()),
            ("true", 0) => Goal::True,
            ("fail" | "false", 0) => Goal::Fail,
            _ if is_assumption(t) => {
                let (op, timed) = AssumeOp::from_functor(name).unwrap();
                let position = match (timed, &self.span) {
                    (true, Some((x1, x2))) => Some(if op == AssumeOp::Expectation { x1.clone() } else { x2.clone() }),
                    _ => None,
                };
                Goal::Assume {
                    op,
                    term: args[0].clone(),
                    timed,
                    position,
                }
            }
            _ if self.g.is_constraint(t) => Goal::Constraint(self.index_abducible(t)),
            _ => Goal::Test(t.clone()),
        }
    }
}

/// Classifies a query-level goal such as a trigger constraint or an assumption.
pub fn query_goal(g: &CompiledGrammar, t: &Term) -> Goal {
    let Some((name, arity)) = t.functor() else {
        return Goal::Test(t.clone());
    };
    let args = t.args();
    match (name, arity) {
        ("=", 2) => Goal::Unify(args[0].clone(), args[1].clone()),
        ("\\=" | "dif", 2) => Goal::Dif(args[0].clone(), args[1].clone()),
        ("true", 0) => Goal::True,
        ("fail" | "false", 0) => Goal::Fail,
        _ if is_assumption(t) => {
            let (op, timed) = AssumeOp::from_functor(name).unwrap();
            Goal::Assume {
                op,
                term: args[0].clone(),
                timed,
                position: None,
            }
        }
        _ if g.constraints.contains(&(name.to_string(), arity)) || g.kind_of(t) != ConstraintKind::Host => {
            Goal::Constraint(t.clone())
        }
        _ => Goal::Test(t.clone()),
    }
}

fn compile_rule(g: &SourceGrammar, r: &GrammarRule, opts: ResolvedOptions) -> Result<CompiledRule, String> {
    let mut b = Builder {
        opts,
        arrow: r.arrow,
        heads: Vec::new(),
        gaps: Vec::new(),
        counter: 0,
        core_indices: Vec::new(),
    };
    let x0 = b.fresh();
    let x1 = if r.left.is_empty() {
        b.fresh()
    } else {
        b.thread(&r.left, x0, None, Role::Left, false)?
    };
    let x2 = b.thread(&r.core, x1.clone(), None, Role::Core, false)?;
    if !r.right.is_empty() {
        b.thread(&r.right, x2.clone(), None, Role::Right, false)?;
    }
    let mut guard = b.lower_gaps();
    guard.extend(r.guard.iter().cloned());

    let has_symbol = !r.body_symbols().is_empty();
    let indexing = opts.ambiguity_indexing;
    let index = if indexing {
        if has_symbol {
            Some(Term::Var(Var::fresh("I")))
        } else {
            Some(b.core_indices.first().cloned().unwrap_or_else(|| Term::Var(Var::fresh("I"))))
        }
    } else {
        None
    };
    let ctx = BodyCtx {
        g,
        opts,
        span: Some((x1, x2)),
        index: index.clone(),
    };
    let mut body = ctx.goals(&r.body);
    if indexing && has_symbol {
        let idx = index.unwrap();
        let mut tx = vec![
            Goal::NewIndex(idx.clone()),
            Goal::CopyAbducibles {
                from: b.core_indices.clone(),
                to: idx,
            },
        ];
        tx.append(&mut body);
        body = vec![Goal::Transaction(tx)];
    }

    let mut heads = b.heads;
    if opts.passive {
        mark_passive(&mut heads);
    }
    Ok(CompiledRule {
        id: 0,
        name: r.name.clone(),
        kind: r.arrow,
        heads,
        guard,
        body,
        origin: Origin::Grammar,
        symmetric_history: false,
        line: r.line,
    })
}

/// Only the rightmost grammar head of core and right context stays active,
/// together with grammar heads that end at the same boundary (parallel match
/// operands). Host constraints may arrive at any time and stay active.
fn mark_passive(heads: &mut [HeadPattern]) {
    let Some(last) = heads.iter().rposition(|h| h.role != Role::Left && h.grammar) else {
        return;
    };
    let end_of = |h: &HeadPattern| -> Option<Term> {
        if h.grammar {
            h.term.args().get(1).cloned()
        } else {
            None
        }
    };
    let last_end = end_of(&heads[last]);
    for (i, h) in heads.iter_mut().enumerate() {
        let peer = h.role != Role::Left && last_end.is_some() && end_of(h) == last_end;
        h.active = i == last || peer || !h.grammar;
    }
}

fn compile_chr_rule(g: &SourceGrammar, r: &ChrRule, opts: ResolvedOptions) -> CompiledRule {
    let index = Term::Var(Var::fresh("X"));
    let ctx = BodyCtx {
        g,
        opts,
        span: None,
        index: Some(index),
    };
    let mut heads = Vec::new();
    for (terms, kept) in [(&r.kept, true), (&r.removed, false)] {
        for t in terms {
            heads.push(HeadPattern {
                term: ctx.index_abducible(t),
                kept,
                active: true,
                role: Role::Core,
                grammar: false,
            });
        }
    }
    CompiledRule {
        id: 0,
        name: r.name.clone(),
        kind: r.arrow,
        heads,
        guard: r.guard.clone(),
        body: ctx.goals(&r.body),
        origin: Origin::Integrity,
        symmetric_history: false,
        line: r.line,
    }
}

/// Explicit-negation rules, plus compaction rules when enabled.
pub fn expand_abducibles(abducibles: &BTreeSet<Signature>, opts: ResolvedOptions) -> Vec<CompiledRule> {
    let mut out = Vec::new();
    let fresh_args = |n: usize, prefix: &str| -> Vec<Term> {
        (1..=n).map(|i| Term::Var(Var::fresh(&format!("{prefix}{i}")))).collect()
    };
    for (name, arity) in abducibles {
        let index = Term::Var(Var::fresh("I"));
        let with_index = |args: Vec<Term>| -> Vec<Term> {
            if opts.ambiguity_indexing {
                std::iter::once(index.clone()).chain(args).collect()
            } else {
                args
            }
        };
        let xs = fresh_args(*arity, "X");
        let pos = Term::compound(name, with_index(xs.clone()));
        let neg = Term::compound(&format!("{name}_"), with_index(xs));
        let head = |term: Term, active: bool| HeadPattern {
            term,
            kept: true,
            active,
            role: Role::Core,
            grammar: false,
        };
        out.push(CompiledRule {
            id: 0,
            name: Some(format!("{name}_negation")),
            kind: Arrow::Propagation,
            heads: vec![head(pos, true), head(neg, true)],
            guard: vec![],
            body: vec![Goal::Fail],
            origin: Origin::ExplicitNegation,
            symmetric_history: false,
            line: 0,
        });
        if opts.compaction {
            let xs = fresh_args(*arity, "X");
            let ys = fresh_args(*arity, "Y");
            // the attribute tuple; a lone attribute stands for itself
            let tuple = |args: &[Term]| match args {
                [one] => one.clone(),
                _ => Term::compound(name, args.to_vec()),
            };
            let (tx, ty) = (tuple(&xs), tuple(&ys));
            let a = Term::compound(name, with_index(xs));
            let b = Term::compound(name, with_index(ys));
            out.push(CompiledRule {
                id: 0,
                name: Some(format!("{name}_compaction")),
                kind: Arrow::Propagation,
                heads: vec![head(a, false), head(b, true)],
                guard: vec![
                    Term::compound("\\==", vec![tx.clone(), ty.clone()]),
                    Term::compound("unifiable", vec![tx.clone(), ty.clone()]),
                ],
                body: vec![Goal::Disjunction(vec![
                    vec![Goal::Unify(tx.clone(), ty.clone())],
                    vec![Goal::Dif(tx, ty)],
                ])],
                origin: Origin::Compaction,
                symmetric_history: true,
                line: 0,
            });
        }
    }
    out
}

/// Renames the variables of `terms` for display: singletons become `_`,
/// the rest keep their names with a numeric suffix on clashes.
fn display_names(terms: &[Term]) -> Vec<Term> {
    let mut counts: HashMap<Var, usize> = HashMap::new();
    let mut order = Vec::new();
    fn walk(t: &Term, counts: &mut HashMap<Var, usize>, order: &mut Vec<Var>) {
        match t {
            Term::Var(v) => {
                let c = counts.entry(v.clone()).or_insert(0);
                if *c == 0 {
                    order.push(v.clone());
                }
                *c += 1;
            }
            Term::Compound(_, args) => args.iter().for_each(|a| walk(a, counts, order)),
            _ => {}
        }
    }
    for t in terms {
        walk(t, &mut counts, &mut order);
    }
    let mut used: HashMap<String, usize> = HashMap::new();
    let mut rename: HashMap<Var, Term> = HashMap::new();
    for v in order {
        let name = if counts[&v] == 1 {
            "_".to_string()
        } else {
            let base = if v.name().is_empty() || v.name().starts_with('_') { "V" } else { v.name() };
            let n = used.entry(base.to_string()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base.to_string()
            } else {
                format!("{base}_{n}")
            }
        };
        rename.insert(v.clone(), Term::Var(Var::fresh(&name)));
    }
    terms
        .iter()
        .map(|t| t.map_vars(&mut |v| rename.get(v).cloned()))
        .collect()
}

impl fmt::Display for CompiledRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = display_names(&[self.to_term()]).pop().unwrap();
        if let Some(n) = &self.name {
            write!(f, "{} @ ", Term::atom(n))?;
        }
        // heads are written out separately to show passive marks
        let (head, rhs) = (&t.args()[0], &t.args()[1]);
        let arrow = t.functor().unwrap().0;
        let mut heads_flat = Vec::new();
        let (kept_part, removed_part) = match (self.kind, head.functor()) {
            (Arrow::Propagation, _) => (Some(head), None),
            (_, Some(("\\", 2))) => (Some(&head.args()[0]), Some(&head.args()[1])),
            _ => (None, Some(head)),
        };
        for part in [kept_part, removed_part].into_iter().flatten() {
            heads_flat.push(crate::reader::flatten(part, ","));
        }
        let mut marks = self
            .kept_heads()
            .chain(self.removed_heads())
            .map(|h| h.active);
        let mut groups = Vec::new();
        for group in heads_flat {
            let shown: Vec<String> = group
                .iter()
                .map(|h| {
                    if marks.next().unwrap_or(true) {
                        h.to_string()
                    } else {
                        format!("{h}#passive")
                    }
                })
                .collect();
            groups.push(shown.join(", "));
        }
        write!(f, "{} {arrow} ", groups.join(" \\ "))?;
        match rhs.functor() {
            Some(("|", 2)) => {
                let guard: Vec<String> = crate::reader::flatten(&rhs.args()[0], ",")
                    .iter()
                    .map(|g| g.to_string())
                    .collect();
                write!(f, "{} | ", guard.join(", "))?;
                write_conj(f, &rhs.args()[1])
            }
            _ => write_conj(f, rhs),
        }
    }
}

fn write_conj(f: &mut fmt::Formatter<'_>, t: &Term) -> fmt::Result {
    let parts: Vec<String> = crate::reader::flatten(t, ",")
        .iter()
        .map(|p| match p.functor() {
            Some((";", 2)) => {
                let alts: Vec<String> = crate::reader::flatten(p, ";").iter().map(|a| a.to_string()).collect();
                format!("({})", alts.join(" ; "))
            }
            _ => p.to_string(),
        })
        .collect();
    write!(f, "{}", parts.join(", "))
}

impl fmt::Display for CompiledGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rules {
            writeln!(f, "{r}.")?;
        }
        Ok(())
    }
}
