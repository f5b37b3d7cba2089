//! Abductive interpretation: answers read off the final store, and a
//! brute-force checker for competence of small answers.
//!
//! Grammars are written in translated form, with context facts called in
//! rule bodies. The checker runs the untranslated grammar, where those facts
//! are premises in the head, as a deductive oracle.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::compiler::{compile, CompileError, CompileOptions, CompiledGrammar, ConstraintKind, Goal};
use crate::driver::{parse, store_order, Parse, ParseOptions};
use crate::engine::Outcome;
use crate::source::{Arrow, BodyItem, ElementKind, HeadElement, SourceGrammar};
use crate::term::{normalize_vars, Term, Var};

/// Context facts and phrases of one interpretation.
#[derive(Clone, Debug, PartialEq)]
pub struct AbductiveAnswer {
    pub context: Vec<Term>,
    pub phrases: Vec<Term>,
    /// Pending `dif` constraints over answer variables.
    pub disequalities: Vec<(Term, Term)>,
    /// The parse index in ambiguity-indexed runs.
    pub index: Option<Term>,
}

impl AbductiveAnswer {
    pub fn is_ground(&self) -> bool {
        self.context.iter().chain(&self.phrases).all(Term::is_ground)
    }
}

impl fmt::Display for AbductiveAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one renaming for the whole answer keeps shared variables visible
        let mut all: Vec<Term> = self.context.clone();
        all.extend(self.phrases.iter().cloned());
        for (a, b) in &self.disequalities {
            all.push(Term::compound("dif", vec![a.clone(), b.clone()]));
        }
        let named = normalize_vars(&all);
        let (ctx, rest) = named.split_at(self.context.len());
        let (phr, difs) = rest.split_at(self.phrases.len());
        if let Some(i) = &self.index {
            writeln!(f, "index: {i}")?;
        }
        writeln!(f, "context:")?;
        for t in ctx.iter().chain(difs) {
            writeln!(f, "  {t}")?;
        }
        writeln!(f, "phrases:")?;
        for t in phr {
            writeln!(f, "  {t}")?;
        }
        Ok(())
    }
}

/// Answers in the current state of a parse; one per index when indexed.
pub fn answers(p: &Parse) -> Vec<AbductiveAnswer> {
    let d = p.derivation();
    let g = d.grammar();
    let mut context = Vec::new();
    let mut phrases = Vec::new();
    for c in d.alive() {
        let t = d.term_of(c.id);
        match c.kind {
            ConstraintKind::Abducible | ConstraintKind::NegatedAbducible => context.push(t),
            ConstraintKind::Symbol => phrases.push(t),
            _ => {}
        }
    }
    context.sort_by(store_order);
    phrases.sort_by(store_order);
    let disequalities = d.disequalities();
    if !g.options.ambiguity_indexing {
        return vec![AbductiveAnswer {
            context,
            phrases,
            disequalities,
            index: None,
        }];
    }
    // the index sits first on abducibles and after the boundaries on symbols
    let mut groups: Vec<(Term, AbductiveAnswer)> = Vec::new();
    for t in phrases {
        let idx = t.args()[2].clone();
        let k = group(&mut groups, &idx, &disequalities);
        groups[k].1.phrases.push(drop_arg(&t, 2));
    }
    for t in context {
        let idx = t.args()[0].clone();
        let k = group(&mut groups, &idx, &disequalities);
        groups[k].1.context.push(drop_arg(&t, 0));
    }
    groups.sort_by(|a, b| a.0.standard_cmp(&b.0));
    groups.into_iter().map(|(_, a)| a).collect()
}

fn group(groups: &mut Vec<(Term, AbductiveAnswer)>, idx: &Term, difs: &[(Term, Term)]) -> usize {
    if let Some(k) = groups.iter().position(|(i, _)| i == idx) {
        return k;
    }
    groups.push((
        idx.clone(),
        AbductiveAnswer {
            context: Vec::new(),
            phrases: Vec::new(),
            disequalities: difs.to_vec(),
            index: Some(idx.clone()),
        },
    ));
    groups.len() - 1
}

fn drop_arg(t: &Term, k: usize) -> Term {
    let (name, _) = t.functor().unwrap();
    let args: Vec<Term> = t
        .args()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, a)| a.clone())
        .collect();
    if args.is_empty() {
        Term::atom(name)
    } else {
        Term::compound(name, args)
    }
}

/// Runs an abductive grammar and collects up to `limit` answers, following
/// backtracking into compaction and body alternatives.
pub fn run_abductive(g: &CompiledGrammar, tokens: &[Term], limit: usize) -> Vec<AbductiveAnswer> {
    let Ok(mut p) = parse(g, tokens, ParseOptions::default()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut outcome = p.outcome;
    while outcome == Outcome::Success && out.len() < limit {
        out.extend(answers(&p));
        outcome = p.next_answer();
    }
    out
}

/// Moves context facts called in rule bodies into the rule heads, turning
/// a translated abductive grammar back into its deductive reading.
pub fn untranslate(g: &SourceGrammar) -> SourceGrammar {
    let mut out = g.clone();
    for r in &mut out.rules {
        let mut facts = Vec::new();
        r.body.retain(|b| match b {
            BodyItem::Host(t) if is_context_fact(g, t) => {
                facts.push(t.clone());
                false
            }
            _ => true,
        });
        if facts.is_empty() {
            continue;
        }
        let at = 1.min(r.core.len());
        for (k, t) in facts.into_iter().enumerate() {
            r.core.insert(
                at + k,
                HeadElement {
                    kind: ElementKind::Host(t),
                    kept: true,
                },
            );
        }
        if r.arrow == Arrow::Simplification {
            r.arrow = Arrow::Simpagation;
        }
    }
    out
}

fn is_context_fact(g: &SourceGrammar, t: &Term) -> bool {
    t.functor().is_some_and(|(n, a)| {
        let base = n.strip_suffix('_').unwrap_or(n);
        g.abducibles.contains(&(base.to_string(), a))
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    /// The phrases do not follow from grammar, discourse and context.
    NotFaithful(Vec<Term>),
    /// The context contradicts the integrity constraints.
    Inconsistent,
    /// This context fact can be removed without losing faithfulness.
    NotMinimal(Term),
    /// This phrase follows but is missing from the answer.
    NotMaximal(Term),
    /// Adding this fact would let more phrases be derived.
    NotExhaustive(Term),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotFaithful(ts) => {
                let s: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                write!(f, "faithfulness: not derivable: {}", s.join(", "))
            }
            Violation::Inconsistent => write!(f, "faithfulness: context violates integrity constraints"),
            Violation::NotMinimal(t) => write!(f, "minimality: {t} can be removed"),
            Violation::NotMaximal(t) => write!(f, "maximality: {t} is derivable but missing"),
            Violation::NotExhaustive(t) => write!(f, "exhaustiveness: adding {t} extends the phrases"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompetenceReport {
    /// The answer after replacing variables by fresh constants.
    pub grounded_context: Vec<Term>,
    pub grounded_phrases: Vec<Term>,
    pub violations: Vec<Violation>,
}

impl CompetenceReport {
    /// Faithfulness holds for the grounded answer.
    pub fn is_sound(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NotFaithful(_) | Violation::Inconsistent))
    }

    pub fn is_competent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Deductive reading of an abductive grammar, used to test answers.
pub struct Oracle {
    grammar: CompiledGrammar,
    tokens: Vec<Term>,
}

impl Oracle {
    pub fn new(source: &SourceGrammar, tokens: &[Term]) -> Result<Oracle, CompileError> {
        let grammar = compile(&untranslate(source), CompileOptions::default())?;
        Ok(Oracle {
            grammar,
            tokens: tokens.to_vec(),
        })
    }

    /// Phrases derivable with the given ground context, or `None` when the
    /// context is inconsistent.
    pub fn derive(&self, context: &[Term]) -> Option<BTreeSet<String>> {
        let opts = ParseOptions {
            prelude: context.iter().map(|t| Goal::Constraint(t.clone())).collect(),
            ..ParseOptions::default()
        };
        let p = parse(&self.grammar, &self.tokens, opts).ok()?;
        if !p.succeeded() {
            return None;
        }
        Some(
            p.derivation()
                .alive()
                .filter(|c| c.kind == ConstraintKind::Symbol)
                .map(|c| p.derivation().term_of(c.id).to_string())
                .collect(),
        )
    }

    /// Checks faithfulness, minimality, maximality and exhaustiveness.
    pub fn check(&self, answer: &AbductiveAnswer) -> CompetenceReport {
        let (context, phrases) = skolemize(answer);
        let mut report = CompetenceReport {
            grounded_context: context.clone(),
            grounded_phrases: phrases.clone(),
            violations: Vec::new(),
        };
        let wanted: BTreeSet<String> = phrases.iter().map(|t| t.to_string()).collect();
        let faithful = |ctx: &[Term]| self.derive(ctx).is_some_and(|got| wanted.is_subset(&got));
        let Some(derived) = self.derive(&context) else {
            report.violations.push(Violation::Inconsistent);
            return report;
        };
        let missing: Vec<Term> = phrases
            .iter()
            .filter(|t| !derived.contains(&t.to_string()))
            .cloned()
            .collect();
        if !missing.is_empty() {
            report.violations.push(Violation::NotFaithful(missing));
            return report;
        }
        for i in 0..context.len() {
            let mut smaller = context.clone();
            let removed = smaller.remove(i);
            if faithful(&smaller) {
                report.violations.push(Violation::NotMinimal(removed));
            }
        }
        for p in derived.iter().filter(|p| !wanted.contains(*p)) {
            let t = crate::reader::read_term(p).unwrap_or_else(|_| Term::atom(p));
            report.violations.push(Violation::NotMaximal(t));
        }
        for atom in herbrand_base(&self.grammar, &self.tokens, &context) {
            if context.contains(&atom) {
                continue;
            }
            let mut bigger = context.clone();
            bigger.push(atom.clone());
            if let Some(more) = self.derive(&bigger) {
                if more.len() > derived.len() && derived.is_subset(&more) {
                    report.violations.push(Violation::NotExhaustive(atom));
                }
            }
        }
        report
    }
}

/// Checks an answer against the deductive reading of `source`.
pub fn check_competence(source: &SourceGrammar, tokens: &[Term], answer: &AbductiveAnswer) -> Result<CompetenceReport, CompileError> {
    Ok(Oracle::new(source, tokens)?.check(answer))
}

/// Replaces each answer variable by a fresh constant.
pub fn skolemize(answer: &AbductiveAnswer) -> (Vec<Term>, Vec<Term>) {
    let mut map: HashMap<Var, Term> = HashMap::new();
    let mut sk = |t: &Term| {
        t.map_vars(&mut |v| {
            let n = map.len();
            Some(map.entry(v.clone()).or_insert_with(|| Term::atom(&format!("sk{n}"))).clone())
        })
    };
    let ctx: Vec<Term> = answer.context.iter().map(&mut sk).collect();
    let phr: Vec<Term> = answer.phrases.iter().map(&mut sk).collect();
    let mut ctx_set: Vec<Term> = Vec::new();
    for t in ctx {
        if !ctx_set.contains(&t) {
            ctx_set.push(t);
        }
    }
    (ctx_set, phr)
}

/// Ground abducible atoms over the constants of the discourse and context.
pub fn herbrand_base(g: &CompiledGrammar, tokens: &[Term], context: &[Term]) -> Vec<Term> {
    let mut consts: BTreeSet<Term> = BTreeSet::new();
    fn atoms(t: &Term, out: &mut BTreeSet<Term>) {
        match t {
            Term::Atom(_) | Term::Int(_) => {
                out.insert(t.clone());
            }
            Term::Compound(_, args) => args.iter().for_each(|a| atoms(a, out)),
            Term::Var(_) => {}
        }
    }
    tokens.iter().chain(context).for_each(|t| atoms(t, &mut consts));
    let consts: Vec<Term> = consts.into_iter().collect();
    let mut out = Vec::new();
    for (name, arity) in &g.abducibles {
        let mut tuple = vec![0usize; *arity];
        loop {
            let args: Vec<Term> = tuple.iter().map(|&i| consts[i].clone()).collect();
            out.push(if args.is_empty() { Term::atom(name) } else { Term::compound(name, args) });
            let mut k = 0;
            while k < tuple.len() {
                tuple[k] += 1;
                if tuple[k] < consts.len() {
                    break;
                }
                tuple[k] = 0;
                k += 1;
            }
            if k == tuple.len() || consts.is_empty() {
                break;
            }
        }
    }
    out
}
