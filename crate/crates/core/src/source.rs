//! Grammar source files: declarations, grammar rules and plain CHR rules.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use crate::reader::{flatten, list_items, read_clauses, Clause, SyntaxError};
use crate::term::{Term, Var};

/// A functor name with its source arity.
pub type Signature = (String, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arrow {
    Propagation,
    Simplification,
    Simpagation,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    Symbol(Term),
    /// One token; `[a,b]` gives two of these.
    Terminal(Term),
    Gap,
    BoundedGap { min: i64, max: i64 },
    AllGap,
    Parallel(Vec<HeadElement>, Vec<HeadElement>),
    Host(Term),
    /// `(a ; b)` inside a context; removed by [`expand_context_disjunction`].
    Alternatives(Vec<Vec<HeadElement>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeadElement {
    pub kind: ElementKind,
    /// Set by a `!` prefix.
    pub kept: bool,
}

impl HeadElement {
    pub fn new(kind: ElementKind) -> Self {
        HeadElement { kind, kept: false }
    }

    fn is_gap(&self) -> bool {
        matches!(
            self.kind,
            ElementKind::Gap | ElementKind::BoundedGap { .. } | ElementKind::AllGap
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BodyItem {
    Symbol(Term),
    Host(Term),
    Disjunction(Vec<Vec<BodyItem>>),
}

#[derive(Clone, Debug)]
pub struct GrammarRule {
    pub name: Option<String>,
    pub left: Vec<HeadElement>,
    pub core: Vec<HeadElement>,
    pub right: Vec<HeadElement>,
    pub arrow: Arrow,
    pub guard: Vec<Term>,
    pub body: Vec<BodyItem>,
    pub pragmas: Vec<Term>,
    pub line: usize,
    pub col: usize,
    /// Position among all rules of the file.
    pub seq: usize,
}

/// A plain CHR rule over declared constraints, such as an integrity constraint.
#[derive(Clone, Debug)]
pub struct ChrRule {
    pub name: Option<String>,
    pub arrow: Arrow,
    pub kept: Vec<Term>,
    pub removed: Vec<Term>,
    pub guard: Vec<Term>,
    pub body: Vec<BodyItem>,
    pub line: usize,
    pub col: usize,
    pub seq: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.line, self.col, sev, self.message)
    }
}

/// Error from [`parse_source`].
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{col}: {message}")]
    Invalid {
        line: usize,
        col: usize,
        message: String,
    },
}

#[derive(Clone, Debug, Default)]
pub struct SourceGrammar {
    pub name: Option<String>,
    pub grammar_symbols: BTreeSet<Signature>,
    pub constraints: BTreeSet<Signature>,
    pub abducibles: BTreeSet<Signature>,
    pub rules: Vec<GrammarRule>,
    pub integrity_rules: Vec<ChrRule>,
    /// Grammar-level `gpragma` declarations.
    pub pragmas: Vec<Term>,
    pub warnings: Vec<Diagnostic>,
}

impl SourceGrammar {
    pub fn is_grammar_symbol(&self, t: &Term) -> bool {
        match t.functor() {
            Some(("token", 1)) => true,
            Some((name, arity)) => self.grammar_symbols.contains(&(name.to_string(), arity)),
            None => false,
        }
    }

    pub fn is_constraint(&self, t: &Term) -> bool {
        t.functor().is_some_and(|(n, a)| {
            let key = (n.to_string(), a);
            self.constraints.contains(&key) || self.abducibles.contains(&key) || self.is_negated_abducible(n, a)
        })
    }

    fn is_negated_abducible(&self, name: &str, arity: usize) -> bool {
        name.strip_suffix('_')
            .is_some_and(|base| self.abducibles.contains(&(base.to_string(), arity)))
    }

    /// True when every grammar rule is a propagation rule.
    pub fn propagation_only(&self) -> bool {
        self.rules.iter().all(|r| r.arrow == Arrow::Propagation)
    }
}

const BUILTINS: &[(&str, usize)] = &[
    ("=", 2),
    ("\\=", 2),
    ("==", 2),
    ("\\==", 2),
    ("dif", 2),
    ("unifiable", 2),
    ("<", 2),
    ("=<", 2),
    (">", 2),
    (">=", 2),
    ("=:=", 2),
    ("=\\=", 2),
    ("integer", 1),
    ("atom", 1),
    ("true", 0),
    ("fail", 0),
    ("false", 0),
];

pub fn is_builtin(t: &Term) -> bool {
    t.functor()
        .is_some_and(|(n, a)| BUILTINS.iter().any(|&(bn, ba)| bn == n && ba == a))
}

/// Assumption operators: `=+`, `=*`, `=-` and their timed forms `+`, `*`, `-`.
pub fn is_assumption(t: &Term) -> bool {
    matches!(
        t.functor(),
        Some(("=+" | "=*" | "=-" | "+" | "*" | "-", 1))
    )
}

const KNOWN_PRAGMAS: &[&str] = &["passive", "no_passive", "nopassive", "ambiguity_index", "compaction"];

struct Ctx<'a> {
    g: &'a SourceGrammar,
    line: usize,
    col: usize,
}

impl Ctx<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SourceError> {
        Err(SourceError::Invalid {
            line: self.line,
            col: self.col,
            message: message.into(),
        })
    }

    fn head_seq(&self, t: &Term, in_context: bool) -> Result<Vec<HeadElement>, SourceError> {
        let mut out = Vec::new();
        for part in flatten(t, ",") {
            self.head_element(&part, in_context, &mut out)?;
        }
        Ok(out)
    }

    fn head_element(&self, t: &Term, in_context: bool, out: &mut Vec<HeadElement>) -> Result<(), SourceError> {
        use ElementKind::*;
        match t {
            Term::Var(v) => return self.err(format!("variable {} used as a head element", v.name())),
            Term::Int(_) => return self.err(format!("integer {t} used as a head element")),
            _ => {}
        }
        let (name, arity) = t.functor().unwrap();
        match (name, arity) {
            ("...", 0) => out.push(HeadElement::new(Gap)),
            ("...", 2) => {
                let (Some(min), Some(max)) = (t.args()[0].as_int(), t.args()[1].as_int()) else {
                    return self.err(format!("gap bounds must be integers in {t}"));
                };
                if min < 0 || min > max {
                    return self.err(format!("invalid gap bounds {min}...{max}"));
                }
                out.push(HeadElement::new(BoundedGap { min, max }));
            }
            ("all", 0) => out.push(HeadElement::new(AllGap)),
            ("$$", 2) => {
                let l = self.head_seq(&t.args()[0], in_context)?;
                let r = self.head_seq(&t.args()[1], in_context)?;
                out.push(HeadElement::new(Parallel(l, r)));
            }
            ("[]", 0) => {}
            ("[|]", 2) => {
                let Some(items) = list_items(t) else {
                    return self.err(format!("improper terminal list {t}"));
                };
                out.extend(items.into_iter().map(|i| HeadElement::new(Terminal(i))));
            }
            ("{}", 1) => {
                for h in flatten(&t.args()[0], ",") {
                    let (inner, kept) = strip_bang(&h);
                    if !self.g.is_constraint(&inner) {
                        return self.err(format!("undeclared constraint {inner} in head"));
                    }
                    out.push(HeadElement { kind: Host(inner), kept });
                }
            }
            ("!", 1) => {
                let mut inner = Vec::new();
                self.head_element(&t.args()[0], in_context, &mut inner)?;
                for mut e in inner {
                    e.kept = true;
                    out.push(e);
                }
            }
            (";", 2) => {
                if !in_context {
                    return self.err("disjunction is only allowed in contexts");
                }
                let alts = flatten(t, ";")
                    .iter()
                    .map(|a| self.head_seq(a, true))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push(HeadElement::new(Alternatives(alts)));
            }
            ("token", 1) => out.push(HeadElement::new(Terminal(t.args()[0].clone()))),
            _ if self.g.is_grammar_symbol(t) => out.push(HeadElement::new(Symbol(t.clone()))),
            _ => return self.err(format!("undeclared grammar symbol {name}/{arity}")),
        }
        Ok(())
    }

    fn body_seq(&self, t: &Term) -> Result<Vec<BodyItem>, SourceError> {
        let mut out = Vec::new();
        for part in flatten(t, ",") {
            match &part {
                Term::Var(v) => return self.err(format!("variable {} used as a body goal", v.name())),
                Term::Int(_) => return self.err(format!("integer {part} used as a body goal")),
                _ => {}
            }
            let (name, arity) = part.functor().unwrap();
            match (name, arity) {
                ("{}", 1) => {
                    for h in flatten(&part.args()[0], ",") {
                        if h.functor() == Some((";", 2)) {
                            out.push(self.disjunction(&h)?);
                        } else {
                            out.push(BodyItem::Host(self.host_goal(&h)?));
                        }
                    }
                }
                (";", 2) => out.push(self.disjunction(&part)?),
                ("token", 1) | ("[|]", 2) | ("[]", 0) => {
                    return self.err("terminals are not allowed in rule bodies")
                }
                ("...", _) | ("$$", 2) | ("all", 0) => {
                    return self.err("gaps and parallel match are not allowed in rule bodies")
                }
                ("->", 2) => return self.err("conditionals are not supported in rule bodies"),
                _ if self.g.is_grammar_symbol(&part) => out.push(BodyItem::Symbol(part.clone())),
                _ => out.push(BodyItem::Host(self.host_goal(&part)?)),
            }
        }
        Ok(out)
    }

    fn disjunction(&self, t: &Term) -> Result<BodyItem, SourceError> {
        let branches = flatten(t, ";")
            .iter()
            .map(|b| self.body_seq(b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BodyItem::Disjunction(branches))
    }

    fn host_goal(&self, t: &Term) -> Result<Term, SourceError> {
        if is_builtin(t) || is_assumption(t) || self.g.is_constraint(t) {
            return Ok(t.clone());
        }
        match t.functor() {
            Some((n, a)) => self.err(format!("undeclared constraint or unsupported goal {n}/{a}")),
            None => self.err(format!("unsupported goal {t}")),
        }
    }

    fn guard(&self, t: &Term) -> Result<Vec<Term>, SourceError> {
        let mut out = Vec::new();
        for g in flatten(t, ",") {
            let ok = is_builtin(&g)
                || matches!(g.functor(), Some(("\\+", 1)))
                    && is_builtin(&g.args()[0]);
            if !ok {
                return self.err(format!("guard goal {g} is not a built-in"));
            }
            out.push(g);
        }
        Ok(out)
    }
}

fn strip_bang(t: &Term) -> (Term, bool) {
    match t.functor() {
        Some(("!", 1)) => (t.args()[0].clone(), true),
        _ => (t.clone(), false),
    }
}

fn split_guard(body: &Term) -> (Option<&Term>, &Term) {
    match body.functor() {
        Some(("|", 2)) => (Some(&body.args()[0]), &body.args()[1]),
        _ => (None, body),
    }
}

fn signatures(t: &Term) -> Result<Vec<Signature>, String> {
    flatten(t, ",")
        .iter()
        .map(|s| match s.functor() {
            Some(("/", 2)) => match (s.args()[0].as_atom(), s.args()[1].as_int()) {
                (Some(n), Some(a)) if a >= 0 => Ok((n.to_string(), a as usize)),
                _ => Err(format!("bad declaration item {s}")),
            },
            _ => Err(format!("bad declaration item {s}")),
        })
        .collect()
}

fn substitute_where(rule: &Term, bindings: &Term) -> Result<Term, String> {
    let mut map: HashMap<Var, Term> = HashMap::new();
    for b in flatten(bindings, ",") {
        match b.functor() {
            Some(("=", 2)) => match &b.args()[0] {
                Term::Var(v) => {
                    let value = b.args()[1].map_vars(&mut |w| map.get(w).cloned());
                    map.insert(v.clone(), value);
                }
                _ => return Err(format!("where-clause failed: {b}")),
            },
            _ => return Err(format!("where-clause failed: {b}")),
        }
    }
    // later bindings may be referenced by earlier ones
    let mut t = rule.clone();
    for _ in 0..=map.len() {
        let next = t.map_vars(&mut |v| map.get(v).cloned());
        if next == t {
            break;
        }
        t = next;
    }
    Ok(t)
}

/// Parses a complete grammar source file.
pub fn parse_source(text: &str) -> Result<SourceGrammar, SourceError> {
    let clauses = read_clauses(text)?;
    let mut g = SourceGrammar::default();
    let mut ended = false;
    let mut seq = 0;
    for Clause { term, line, col, .. } in clauses {
        let invalid = |message: String| SourceError::Invalid { line, col, message };
        if ended {
            return Err(invalid("clause after end_of_CHRG_source".into()));
        }
        let mut term = term;
        if let Some(("where", 2)) = term.functor() {
            term = substitute_where(&term.args()[0], &term.args()[1]).map_err(invalid)?;
        }
        match term.functor() {
            Some(("end_of_CHRG_source", 0)) => {
                ended = true;
                continue;
            }
            Some(("handler", 1)) => {
                g.name = Some(term.args()[0].to_string());
                continue;
            }
            Some((kind @ ("grammar_symbols" | "constraints" | "abducibles"), 1)) => {
                let sigs = signatures(&term.args()[0]).map_err(invalid)?;
                for s in sigs {
                    let clash = [&g.grammar_symbols, &g.constraints, &g.abducibles]
                        .iter()
                        .any(|set| set.contains(&s));
                    if clash {
                        return Err(invalid(format!("{}/{} declared twice", s.0, s.1)));
                    }
                    match kind {
                        "grammar_symbols" => g.grammar_symbols.insert(s),
                        "constraints" => g.constraints.insert(s),
                        _ => g.abducibles.insert(s),
                    };
                }
                continue;
            }
            Some(("gpragma", 1)) => {
                let p = term.args()[0].clone();
                for item in flatten(&p, ",") {
                    note_pragma(&mut g.warnings, &item, line, col);
                    g.pragmas.push(item);
                }
                continue;
            }
            _ => {}
        }
        let mut name = None;
        let mut pragmas = Vec::new();
        if let Some(("gpragma" | "pragma", 2)) = term.functor() {
            for item in flatten(&term.args()[1], ",") {
                note_pragma(&mut g.warnings, &item, line, col);
                pragmas.push(item);
            }
            term = term.args()[0].clone();
        }
        if let Some(("@@", 2)) = term.functor() {
            name = Some(term.args()[0].to_string());
            term = term.args()[1].clone();
        }
        let ctx = Ctx { g: &g, line, col };
        match term.functor() {
            Some((arrow @ ("::>" | "<:>"), 2)) => {
                let rule = grammar_rule(&ctx, arrow, &term, name, pragmas, seq)?;
                seq += 1;
                g.rules.push(rule);
            }
            Some((arrow @ ("==>" | "<=>"), 2)) => {
                let rule = chr_rule(&ctx, arrow, &term, name, seq)?;
                seq += 1;
                g.integrity_rules.push(rule);
            }
            _ => return Err(invalid(format!("not a rule or declaration: {term}"))),
        }
    }
    if !ended {
        return Err(SourceError::Invalid {
            line: text.lines().count().max(1),
            col: 1,
            message: "missing end_of_CHRG_source".into(),
        });
    }
    Ok(g)
}

fn note_pragma(warnings: &mut Vec<Diagnostic>, p: &Term, line: usize, col: usize) {
    let known = p.functor().is_some_and(|(n, _)| KNOWN_PRAGMAS.contains(&n));
    if !known {
        warnings.push(Diagnostic {
            severity: Severity::Warning,
            line,
            col,
            message: format!("unrecognized gpragma {p} ignored"),
        });
    }
}

fn grammar_rule(
    ctx: &Ctx,
    arrow: &str,
    term: &Term,
    name: Option<String>,
    pragmas: Vec<Term>,
    seq: usize,
) -> Result<GrammarRule, SourceError> {
    let (head, rhs) = (&term.args()[0], &term.args()[1]);
    let (rest, right) = match head.functor() {
        Some(("/-", 2)) => (&head.args()[0], Some(&head.args()[1])),
        _ => (head, None),
    };
    let (left, core) = match rest.functor() {
        Some(("-\\", 2)) => (Some(&rest.args()[0]), &rest.args()[1]),
        _ => (None, rest),
    };
    let left = left.map(|t| ctx.head_seq(t, true)).transpose()?.unwrap_or_default();
    let right = right.map(|t| ctx.head_seq(t, true)).transpose()?.unwrap_or_default();
    let core = ctx.head_seq(core, false)?;
    for e in left.iter().chain(&right) {
        if e.kept {
            return ctx.err("'!' is only meaningful in the core");
        }
    }
    let any_kept = core.iter().any(|e| e.kept || has_kept(e));
    let arrow = match arrow {
        "::>" if any_kept => return ctx.err("'!' requires a simplification arrow <:>"),
        "::>" => Arrow::Propagation,
        _ if any_kept => Arrow::Simpagation,
        _ => Arrow::Simplification,
    };
    let (guard, body) = split_guard(rhs);
    let guard = guard.map(|g| ctx.guard(g)).transpose()?.unwrap_or_default();
    let body = ctx.body_seq(body)?;
    Ok(GrammarRule {
        name,
        left,
        core,
        right,
        arrow,
        guard,
        body,
        pragmas,
        line: ctx.line,
        col: ctx.col,
        seq,
    })
}

fn has_kept(e: &HeadElement) -> bool {
    match &e.kind {
        ElementKind::Parallel(l, r) => l.iter().chain(r).any(|x| x.kept || has_kept(x)),
        _ => false,
    }
}

fn chr_rule(ctx: &Ctx, arrow: &str, term: &Term, name: Option<String>, seq: usize) -> Result<ChrRule, SourceError> {
    let (head, rhs) = (&term.args()[0], &term.args()[1]);
    let heads = |t: &Term| -> Result<Vec<Term>, SourceError> {
        let hs = flatten(t, ",");
        for h in &hs {
            if !ctx.g.is_constraint(h) && !is_assumption(h) {
                return ctx.err(format!("undeclared constraint {h} in rule head"));
            }
        }
        Ok(hs)
    };
    let (arrow, kept, removed) = match (arrow, head.functor()) {
        ("==>", _) => (Arrow::Propagation, heads(head)?, vec![]),
        ("<=>", Some(("\\", 2))) => (
            Arrow::Simpagation,
            heads(&head.args()[0])?,
            heads(&head.args()[1])?,
        ),
        _ => (Arrow::Simplification, vec![], heads(head)?),
    };
    let (guard, body) = split_guard(rhs);
    let guard = guard.map(|g| ctx.guard(g)).transpose()?.unwrap_or_default();
    let body = ctx.body_seq(body)?;
    Ok(ChrRule {
        name,
        arrow,
        kept,
        removed,
        guard,
        body,
        line: ctx.line,
        col: ctx.col,
        seq,
    })
}

/// Variants of a context sequence: the cartesian product over its alternative elements,
/// first element varying fastest.
fn context_variants(seq: &[HeadElement]) -> Vec<Vec<HeadElement>> {
    let mut variants: Vec<Vec<HeadElement>> = vec![vec![]];
    for e in seq {
        match &e.kind {
            ElementKind::Alternatives(alts) => {
                let mut next = Vec::new();
                for alt in alts {
                    for alt_variant in context_variants(alt) {
                        for v in &variants {
                            let mut v = v.clone();
                            v.extend(alt_variant.iter().cloned());
                            next.push(v);
                        }
                    }
                }
                variants = next;
            }
            _ => {
                for v in &mut variants {
                    v.push(e.clone());
                }
            }
        }
    }
    variants
}

/// Expands `;` alternatives in left and right contexts into separate rules.
/// The left context varies fastest, as in `a-d, b-d, a-e, b-e`.
pub fn expand_context_disjunction(r: &GrammarRule) -> Vec<GrammarRule> {
    let lefts = context_variants(&r.left);
    let rights = context_variants(&r.right);
    let mut out = Vec::with_capacity(lefts.len() * rights.len());
    for right in &rights {
        for left in &lefts {
            let mut rule = r.clone();
            rule.left = left.clone();
            rule.right = right.clone();
            out.push(rule);
        }
    }
    out
}

fn bounded_left(seq: &[HeadElement]) -> bool {
    match seq.iter().find(|e| !matches!(e.kind, ElementKind::Host(_))) {
        None => false,
        Some(e) if e.is_gap() => false,
        Some(HeadElement { kind: ElementKind::Parallel(l, r), .. }) => bounded_left(l) || bounded_left(r),
        Some(_) => true,
    }
}

fn bounded_right(seq: &[HeadElement]) -> bool {
    match seq.iter().rev().find(|e| !matches!(e.kind, ElementKind::Host(_))) {
        None => false,
        Some(e) if e.is_gap() => false,
        Some(HeadElement { kind: ElementKind::Parallel(l, r), .. }) => bounded_right(l) || bounded_right(r),
        Some(_) => true,
    }
}

fn element_terms<'a>(seq: &'a [HeadElement], out: &mut Vec<&'a Term>) {
    for e in seq {
        match &e.kind {
            ElementKind::Symbol(t) | ElementKind::Terminal(t) | ElementKind::Host(t) => out.push(t),
            ElementKind::Parallel(l, r) => {
                element_terms(l, out);
                element_terms(r, out);
            }
            ElementKind::Alternatives(alts) => {
                for a in alts {
                    element_terms(a, out);
                }
            }
            _ => {}
        }
    }
}

fn grammar_symbol_count(seq: &[HeadElement]) -> usize {
    seq.iter()
        .map(|e| match &e.kind {
            ElementKind::Symbol(_) | ElementKind::Terminal(_) => 1,
            ElementKind::Parallel(l, r) => grammar_symbol_count(l) + grammar_symbol_count(r),
            _ => 0,
        })
        .sum()
}

fn body_terms<'a>(body: &'a [BodyItem], out: &mut Vec<&'a Term>) {
    for b in body {
        match b {
            BodyItem::Symbol(t) | BodyItem::Host(t) => out.push(t),
            BodyItem::Disjunction(branches) => {
                for br in branches {
                    body_terms(br, out);
                }
            }
        }
    }
}

fn vars_of(terms: &[&Term]) -> HashSet<Var> {
    let mut out = Vec::new();
    for t in terms {
        out.extend(t.vars());
    }
    out.into_iter().filter(|v| v.name() != "_").collect()
}

impl GrammarRule {
    /// Variables occurring in the head.
    pub fn head_vars(&self) -> HashSet<Var> {
        let mut terms = Vec::new();
        element_terms(&self.left, &mut terms);
        element_terms(&self.core, &mut terms);
        element_terms(&self.right, &mut terms);
        let mut out = Vec::new();
        for t in terms {
            out.extend(t.vars());
        }
        out.into_iter().collect()
    }

    pub fn body_vars(&self) -> HashSet<Var> {
        let mut terms = Vec::new();
        body_terms(&self.body, &mut terms);
        vars_of(&terms)
    }

    pub fn is_range_restricted(&self) -> bool {
        let head = self.head_vars();
        self.body_vars().iter().all(|v| head.contains(v))
    }

    /// Body grammar symbols outside disjunctions.
    pub fn body_symbols(&self) -> Vec<&Term> {
        self.body
            .iter()
            .filter_map(|b| match b {
                BodyItem::Symbol(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    /// Core symbol of a single production, if this is one.
    fn single_production(&self) -> Option<(&Term, &Term)> {
        let symbols: Vec<&Term> = self
            .core
            .iter()
            .filter_map(|e| match &e.kind {
                ElementKind::Symbol(t) => Some(t),
                _ => None,
            })
            .collect();
        let body = self.body_symbols();
        if grammar_symbol_count(&self.core) == 1 && symbols.len() == 1 && body.len() == 1 {
            Some((symbols[0], body[0]))
        } else {
            None
        }
    }

    /// The useless self-production `p(X) ::> p(X)`.
    pub fn is_identity_production(&self) -> bool {
        self.left.is_empty()
            && self.right.is_empty()
            && self.guard.is_empty()
            && self.body.len() == 1
            && self.core.len() == 1
            && self.single_production().is_some_and(|(c, b)| c == b)
    }
}

/// Checks a grammar; errors make the compiler reject it.
pub fn validate(g: &SourceGrammar) -> Vec<Diagnostic> {
    let mut out = g.warnings.clone();
    let diag = |sev, r: &GrammarRule, message: String| Diagnostic {
        severity: sev,
        line: r.line,
        col: r.col,
        message,
    };
    for (name, arity) in &g.abducibles {
        if g.grammar_symbols.contains(&(name.clone(), *arity)) {
            out.push(Diagnostic {
                severity: Severity::Error,
                line: 1,
                col: 1,
                message: format!("abducible {name}/{arity} clashes with a grammar symbol"),
            });
        }
    }
    for r in &g.rules {
        if r.core.is_empty() {
            out.push(diag(
                Severity::Warning,
                r,
                "empty production is not supported; rule ignored".into(),
            ));
            continue;
        }
        if grammar_symbol_count(&r.core) == 0 {
            out.push(diag(Severity::Error, r, "core contains no grammar symbol".into()));
        }
        if !(bounded_left(&r.core) && bounded_right(&r.core)) {
            out.push(diag(Severity::Error, r, "core is not bounded".into()));
        }
        if r.body_symbols().len() > 1 {
            out.push(diag(
                Severity::Error,
                r,
                "body contains more than one grammar symbol".into(),
            ));
        }
        let mut in_disj = Vec::new();
        for b in &r.body {
            if let BodyItem::Disjunction(branches) = b {
                for br in branches {
                    body_terms(br, &mut in_disj);
                }
            }
        }
        if in_disj.iter().any(|t| g.is_grammar_symbol(t)) {
            out.push(diag(
                Severity::Error,
                r,
                "grammar symbols are not allowed inside body disjunctions".into(),
            ));
        }
        let guard_vars = vars_of(&r.guard.iter().collect::<Vec<_>>());
        let head = r.head_vars();
        if let Some(v) = guard_vars.iter().find(|v| !head.contains(v)) {
            out.push(diag(
                Severity::Error,
                r,
                format!("guard variable {} does not occur in the head", v.name()),
            ));
        }
        if !r.is_range_restricted() {
            out.push(diag(Severity::Warning, r, "rule is not range-restricted".into()));
        }
        if r.is_identity_production() {
            out.push(diag(
                Severity::Warning,
                r,
                "useless identity production ignored".into(),
            ));
        }
    }
    for r in &g.integrity_rules {
        let mut hv = Vec::new();
        for t in r.kept.iter().chain(&r.removed) {
            hv.extend(t.vars());
        }
        let head: HashSet<Var> = hv.into_iter().collect();
        let guard_vars = vars_of(&r.guard.iter().collect::<Vec<_>>());
        if let Some(v) = guard_vars.iter().find(|v| !head.contains(v)) {
            out.push(Diagnostic {
                severity: Severity::Error,
                line: r.line,
                col: r.col,
                message: format!("guard variable {} does not occur in the head", v.name()),
            });
        }
    }
    out.extend(loop_diagnostics(g));
    out
}

/// Cycles in the graph of single productions.
fn loop_diagnostics(g: &SourceGrammar) -> Vec<Diagnostic> {
    let mut edges: HashMap<Signature, Vec<(Signature, &GrammarRule)>> = HashMap::new();
    for r in &g.rules {
        if r.is_identity_production() {
            continue;
        }
        if let Some((c, b)) = r.single_production() {
            let sig = |t: &Term| {
                let (n, a) = t.functor().unwrap();
                (n.to_string(), a)
            };
            edges.entry(sig(c)).or_default().push((sig(b), r));
        }
    }
    let mut out = Vec::new();
    let mut reported = HashSet::new();
    let mut starts: Vec<&Signature> = edges.keys().collect();
    starts.sort();
    for start in starts {
        // depth-first search for a path back to `start`
        let mut stack = vec![(start.clone(), vec![start.clone()])];
        let mut seen = HashSet::new();
        while let Some((node, path)) = stack.pop() {
            for (next, rule) in edges.get(&node).into_iter().flatten() {
                if next == start {
                    let mut cycle: Vec<String> = path.iter().map(|(n, a)| format!("{n}/{a}")).collect();
                    cycle.push(format!("{}/{}", start.0, start.1));
                    let mut key = path.clone();
                    key.sort();
                    if reported.insert(key) {
                        out.push(Diagnostic {
                            severity: Severity::Error,
                            line: rule.line,
                            col: rule.col,
                            message: format!("grammar is not loop-free: {}", cycle.join(" -> ")),
                        });
                    }
                } else if seen.insert(next.clone()) {
                    let mut p = path.clone();
                    p.push(next.clone());
                    stack.push((next.clone(), p));
                }
            }
        }
    }
    out
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

struct Seq<'a>(&'a [HeadElement]);

impl fmt::Display for Seq<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl fmt::Display for HeadElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bang = if self.kept { "!" } else { "" };
        match &self.kind {
            ElementKind::Symbol(t) => write!(f, "{bang}{}", Paren(t)),
            ElementKind::Terminal(t) => write!(f, "{bang}[{}]", Paren(t)),
            ElementKind::Gap => write!(f, "..."),
            ElementKind::BoundedGap { min, max } => write!(f, "{min}...{max}"),
            ElementKind::AllGap => write!(f, "all"),
            ElementKind::Parallel(l, r) => write!(f, "({} $$ {})", Seq(l), Seq(r)),
            ElementKind::Host(t) => write!(f, "{{{bang}{}}}", Paren(t)),
            ElementKind::Alternatives(alts) => {
                write!(f, "(")?;
                for (i, a) in alts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ; ")?;
                    }
                    write!(f, "{}", Seq(a))?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parenthesizes terms whose principal functor is an operator.
struct Paren<'a>(&'a Term);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = self.0.to_string();
        let needs = match self.0 {
            Term::Compound(name, _) => !text.starts_with(&format!("{name}(")),
            _ => false,
        };
        if needs {
            write!(f, "({text})")
        } else {
            write!(f, "{text}")
        }
    }
}

struct Body<'a>(&'a [BodyItem]);

impl fmt::Display for Body<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            match b {
                BodyItem::Symbol(t) => write!(f, "{}", Paren(t))?,
                BodyItem::Host(t) => write!(f, "{{{}}}", Paren(t))?,
                BodyItem::Disjunction(branches) => {
                    write!(f, "(")?;
                    for (j, br) in branches.iter().enumerate() {
                        if j > 0 {
                            write!(f, " ; ")?;
                        }
                        write!(f, "{}", Body(br))?;
                    }
                    write!(f, ")")?;
                }
            }
        }
        Ok(())
    }
}

fn write_guard(f: &mut fmt::Formatter<'_>, guard: &[Term]) -> fmt::Result {
    if guard.is_empty() {
        return Ok(());
    }
    for (i, g) in guard.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{}", Paren(g))?;
    }
    write!(f, " | ")
}

impl fmt::Display for GrammarRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "{n} @@ ")?;
        }
        if !self.left.is_empty() {
            write!(f, "{} -\\ ", Seq(&self.left))?;
        }
        write!(f, "{}", Seq(&self.core))?;
        if !self.right.is_empty() {
            write!(f, " /- {}", Seq(&self.right))?;
        }
        let arrow = match self.arrow {
            Arrow::Propagation => "::>",
            _ => "<:>",
        };
        write!(f, " {arrow} ")?;
        write_guard(f, &self.guard)?;
        write!(f, "{}", Body(&self.body))?;
        if !self.pragmas.is_empty() {
            let ps: Vec<String> = self.pragmas.iter().map(|p| p.to_string()).collect();
            write!(f, " gpragma {}", ps.join(", "))?;
        }
        Ok(())
    }
}

impl fmt::Display for ChrRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            write!(f, "{n} @@ ")?;
        }
        let join = |ts: &[Term]| ts.iter().map(|t| Paren(t).to_string()).collect::<Vec<_>>().join(", ");
        match self.arrow {
            Arrow::Propagation => write!(f, "{} ==> ", join(&self.kept))?,
            Arrow::Simplification => write!(f, "{} <=> ", join(&self.removed))?,
            Arrow::Simpagation => write!(f, "{} \\ {} <=> ", join(&self.kept), join(&self.removed))?,
        }
        write_guard(f, &self.guard)?;
        write!(f, "{}", Body(&self.body))
    }
}

fn write_sigs(f: &mut fmt::Formatter<'_>, kw: &str, sigs: &BTreeSet<Signature>) -> fmt::Result {
    if sigs.is_empty() {
        return Ok(());
    }
    let items: Vec<String> = sigs.iter().map(|(n, a)| format!("{}/{a}", Term::atom(n))).collect();
    writeln!(f, "{kw} {}.", items.join(", "))
}

impl fmt::Display for SourceGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.name {
            writeln!(f, "handler {n}.")?;
        }
        write_sigs(f, "grammar_symbols", &self.grammar_symbols)?;
        write_sigs(f, "constraints", &self.constraints)?;
        write_sigs(f, "abducibles", &self.abducibles)?;
        for p in &self.pragmas {
            writeln!(f, "gpragma {p}.")?;
        }
        let mut rules: Vec<(usize, String)> = self
            .rules
            .iter()
            .map(|r| (r.seq, r.to_string()))
            .chain(self.integrity_rules.iter().map(|r| (r.seq, r.to_string())))
            .collect();
        rules.sort_by_key(|(s, _)| *s);
        for (_, r) in rules {
            writeln!(f, "{r}.")?;
        }
        writeln!(f, "end_of_CHRG_source.")
    }
}
