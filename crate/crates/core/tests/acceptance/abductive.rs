//! Abductive answers against exhaustive search over small Herbrand bases.
//!
//! The grammars are read back as implications `constituents and facts imply
//! phrase` and evaluated over ground contexts by a naive fixpoint, with no
//! use of the rule engine.

use std::collections::{BTreeSet, HashMap};

use chrg::abduction::{run_abductive, AbductiveAnswer, Oracle};
use chrg::compiler::CompileOptions;
use chrg::corpus::words;
use chrg::driver::tokenize;
use chrg::reader::{read_clauses, read_term};
use chrg::source::parse_source;
use chrg::term::{Term, Var};

use crate::support::{ensure, grammar};

const GARFIELD_LITE: &str = "
abducibles categ_of/2, food_for/2.
grammar_symbols name/1, verb/1, category/1, sentence/1.
categ_of(N,C1), categ_of(N,C2) ==> C1=C2.
food_for(C1,C), food_for(C2,C) ==> C1=C2.
[tom] ::> name(tom).
[jerry] ::> name(jerry).
[eats] ::> verb(eats).
[is] ::> verb(is).
verb(is) -\\ [X] <:> category(X).
name(N), verb(is), category(C) ::> {categ_of(N,C)}, sentence(is(N,C)).
name(N1), verb(eats), name(N2) ::> {categ_of(N1,C1), categ_of(N2,C2), food_for(C1,C2)}, sentence(eats(N1,N2)).
";

const AGENT: &str = "
abducibles agent/1.
grammar_symbols name/1, verb/1, s/2.
[tom] ::> name(tom).
[runs] ::> verb(runs).
name(N), verb(V) ::> {agent(N)}, s(N,V).
";

const LIKES: &str = "
abducibles likes/2.
grammar_symbols name/1, sentence/1.
[ann] ::> name(ann).
[bob] ::> name(bob).
name(A), [likes], name(B) ::> {likes(A,B)}, sentence(likes(A,B)).
name(A), [hates], name(B) ::> {likes_(A,B)}, sentence(hates(A,B)).
";

const CHAIN: &str = "
abducibles p/0, q/0.
grammar_symbols a/0, b/0, c/0.
[x] ::> a.
a ::> {p}, b.
b ::> {q}, c.
a, a ::> {q}, c.
";

const OWNERSHIP: &str = "
abducibles thing/1, owns/2.
grammar_symbols name/1, pron/0, ref/1, sentence/1.
thing(X), thing(Y) ==> X=Y.
[ann] ::> name(ann).
[it] ::> pron.
pron ::> {thing(T)}, ref(T).
name(A), [has], ref(T) ::> {owns(A,T)}, sentence(has(A,T)).
";

const PAIRS: &str = "
abducibles thing/1.
grammar_symbols pron/0, ref/1, pair/2.
thing(X), thing(Y) ==> X=Y.
[it] ::> pron.
pron ::> {thing(T)}, ref(T).
ref(A), [and], ref(B) ::> pair(A,B).
";

const TWO_ABDUCIBLES: &str = "
abducibles abd/1.
grammar_symbols w/1.
[x] ::> {abd(X)}, w(X).
";

struct Problem {
    text: &'static str,
    input: &'static str,
    base: Vec<Term>,
}

/// Ground atoms `name(c1,..)` over one domain per argument.
fn atoms(name: &str, domains: &[&[&str]]) -> Vec<Term> {
    let mut out: Vec<Vec<Term>> = vec![Vec::new()];
    for d in domains {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                d.iter().map(move |c| {
                    let mut p = prefix.clone();
                    p.push(Term::atom(c));
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(|args| Term::compound(name, args)).collect()
}

fn garfield_base() -> Vec<Term> {
    let mut b = atoms("categ_of", &[&["tom", "jerry"], &["cat", "mouse"]]);
    b.extend(atoms("food_for", &[&["cat", "mouse"], &["cat", "mouse"]]));
    b
}

fn problems() -> Vec<Problem> {
    let likes_base = || {
        let mut b = atoms("likes", &[&["ann", "bob"], &["ann", "bob"]]);
        b.extend(atoms("likes_", &[&["ann", "bob"], &["ann", "bob"]]));
        b
    };
    let things = || atoms("thing", &[&["book", "pen"]]);
    let mut owned = things();
    owned.extend(atoms("owns", &[&["ann"], &["book", "pen"]]));
    vec![
        Problem { text: AGENT, input: "tom runs", base: atoms("agent", &[&["tom", "runs"]]) },
        Problem { text: GARFIELD_LITE, input: "tom is cat", base: garfield_base() },
        Problem { text: GARFIELD_LITE, input: "tom eats jerry", base: garfield_base() },
        Problem { text: GARFIELD_LITE, input: "tom eats jerry , jerry is mouse", base: garfield_base() },
        Problem { text: GARFIELD_LITE, input: "tom is cat , jerry is mouse , tom eats jerry", base: garfield_base() },
        Problem { text: LIKES, input: "ann likes bob , bob hates ann", base: likes_base() },
        Problem { text: LIKES, input: "ann likes ann", base: likes_base() },
        Problem { text: CHAIN, input: "x x", base: vec![Term::atom("p"), Term::atom("q")] },
        Problem { text: OWNERSHIP, input: "ann has it", base: owned },
        Problem { text: PAIRS, input: "it and it", base: things() },
    ]
}

fn source(text: &str) -> String {
    format!("{text}\nend_of_CHRG_source.\n")
}

/// A grammar rule read as `chain and facts imply produced`.
struct Implication {
    chain: Vec<Term>,
    facts: Vec<Term>,
    produced: Vec<Term>,
}

enum Consequence {
    Fail,
    Equal(Vec<(Term, Term)>),
}

struct Deductive {
    rules: Vec<Implication>,
    constraints: Vec<(Vec<Term>, Consequence)>,
    tokens: Vec<Term>,
}

fn conj(t: &Term) -> Vec<Term> {
    match t.functor() {
        Some((",", 2)) => {
            let mut v = conj(&t.args()[0]);
            v.extend(conj(&t.args()[1]));
            v
        }
        _ => vec![t.clone()],
    }
}

fn split_head(t: &Term) -> (Vec<Term>, Vec<Term>, Vec<Term>) {
    match t.functor() {
        Some(("-\\", 2)) => {
            let (_, core, right) = split_head(&t.args()[1]);
            (conj(&t.args()[0]), core, right)
        }
        Some(("/-", 2)) => {
            let (left, core, _) = split_head(&t.args()[0]);
            (left, core, conj(&t.args()[1]))
        }
        _ => (Vec::new(), conj(t), Vec::new()),
    }
}

fn with_span(t: &Term, from: &Term, to: &Term) -> Term {
    if let Some(("[|]", 2)) = t.functor() {
        return Term::compound("token", vec![from.clone(), to.clone(), t.args()[0].clone()]);
    }
    let (name, _) = t.functor().expect("symbol");
    let mut args = vec![from.clone(), to.clone()];
    args.extend(t.args().iter().cloned());
    Term::compound(name, args)
}

impl Deductive {
    fn new(text: &str, input: &str) -> Deductive {
        let mut rules = Vec::new();
        let mut constraints = Vec::new();
        for clause in read_clauses(text).expect("problem text") {
            let t = clause.term;
            match t.functor() {
                Some(("::>" | "<:>", 2)) => {
                    let (left, core, right) = split_head(&t.args()[0]);
                    let seq: Vec<Term> = left.iter().chain(&core).chain(&right).cloned().collect();
                    let bounds: Vec<Term> = (0..=seq.len()).map(|_| Term::var("B")).collect();
                    let chain = seq.iter().enumerate().map(|(k, e)| with_span(e, &bounds[k], &bounds[k + 1])).collect();
                    let (from, to) = (&bounds[left.len()], &bounds[left.len() + core.len()]);
                    let mut facts = Vec::new();
                    let mut produced = Vec::new();
                    for item in conj(&t.args()[1]) {
                        match item.functor() {
                            Some(("{}", 1)) => facts.extend(conj(&item.args()[0])),
                            Some(("true", 0)) => {}
                            _ => produced.push(with_span(&item, from, to)),
                        }
                    }
                    rules.push(Implication { chain, facts, produced });
                }
                Some(("==>", 2)) => {
                    let head = conj(&t.args()[0]);
                    let body = conj(&t.args()[1]);
                    let consequence = if body.iter().any(|b| b.functor() == Some(("fail", 0))) {
                        Consequence::Fail
                    } else {
                        Consequence::Equal(body.iter().map(|b| (b.args()[0].clone(), b.args()[1].clone())).collect())
                    };
                    constraints.push((head, consequence));
                }
                _ => {}
            }
        }
        let tokens = words(input)
            .iter()
            .enumerate()
            .map(|(i, w)| Term::compound("token", vec![Term::int(i as i64), Term::int(i as i64 + 1), Term::atom(w)]))
            .collect();
        Deductive { rules, constraints, tokens }
    }

    fn consistent(&self, context: &[Term]) -> bool {
        for a in context {
            let (name, _) = a.functor().unwrap();
            let negated = Term::compound(&format!("{name}_"), a.args().to_vec());
            if context.contains(&negated) {
                return false;
            }
        }
        for (head, consequence) in &self.constraints {
            let mut envs = Vec::new();
            match_all(head, context, HashMap::new(), &mut envs);
            for env in envs {
                match consequence {
                    Consequence::Fail => return false,
                    Consequence::Equal(pairs) => {
                        if pairs.iter().any(|(a, b)| subst(a, &env) != subst(b, &env)) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    /// Phrases derivable from the discourse and a ground context.
    fn phrases(&self, context: &[Term]) -> BTreeSet<Term> {
        let mut known: Vec<Term> = self.tokens.clone();
        loop {
            let mut new = Vec::new();
            for r in &self.rules {
                let mut envs = Vec::new();
                match_all(&r.chain, &known, HashMap::new(), &mut envs);
                for env in envs {
                    let mut full = Vec::new();
                    match_all(&r.facts, context, env, &mut full);
                    for env in full {
                        for p in &r.produced {
                            let t = subst(p, &env);
                            if t.is_ground() && !known.contains(&t) && !new.contains(&t) {
                                new.push(t);
                            }
                        }
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            known.extend(new);
        }
        known.into_iter().filter(|t| t.functor().is_some_and(|(n, _)| n != "token")).collect()
    }
}

fn match_term(p: &Term, g: &Term, env: &mut HashMap<Var, Term>) -> bool {
    match (p, g) {
        (Term::Var(v), _) => match env.get(v) {
            Some(bound) => bound == g,
            None => {
                env.insert(v.clone(), g.clone());
                true
            }
        },
        (Term::Compound(f, xs), Term::Compound(h, ys)) => {
            f == h && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| match_term(x, y, env))
        }
        _ => p == g,
    }
}

fn match_all(patterns: &[Term], facts: &[Term], env: HashMap<Var, Term>, out: &mut Vec<HashMap<Var, Term>>) {
    let Some((first, rest)) = patterns.split_first() else {
        out.push(env);
        return;
    };
    for f in facts {
        let mut e = env.clone();
        if match_term(first, f, &mut e) {
            match_all(rest, facts, e, out);
        }
    }
}

fn subst(t: &Term, env: &HashMap<Var, Term>) -> Term {
    t.map_vars(&mut |v| env.get(v).cloned())
}

type Ground = (BTreeSet<String>, BTreeSet<String>);

fn texts<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<String> {
    ts.into_iter().map(|t| t.to_string()).collect()
}

/// Consistent ground contexts that are minimal for their phrases and whose
/// phrases no other consistent context extends.
fn competent_pairs(d: &Deductive, base: &[Term]) -> Vec<Ground> {
    let n = base.len();
    let mut models: HashMap<u32, BTreeSet<Term>> = HashMap::new();
    for mask in 0u32..(1 << n) {
        let ctx: Vec<Term> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| base[i].clone()).collect();
        if d.consistent(&ctx) {
            models.insert(mask, d.phrases(&ctx));
        }
    }
    let distinct: Vec<&BTreeSet<Term>> = models.values().collect::<BTreeSet<_>>().into_iter().collect();
    let maximal: Vec<&BTreeSet<Term>> = distinct
        .iter()
        .filter(|p| !distinct.iter().any(|q| q.len() > p.len() && p.is_subset(q)))
        .copied()
        .collect();
    let mut out = Vec::new();
    for (&mask, phrases) in &models {
        if !maximal.contains(&phrases) {
            continue;
        }
        let minimal = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .all(|i| !phrases.is_subset(&models[&(mask & !(1 << i))]));
        if minimal {
            let ctx = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| &base[i]);
            out.push((texts(ctx), texts(phrases)));
        }
    }
    out
}

fn constants(base: &[Term]) -> Vec<Term> {
    let mut out: BTreeSet<Term> = BTreeSet::new();
    for a in base {
        out.extend(a.args().iter().cloned());
    }
    out.into_iter().collect()
}

/// Groundings of an answer over `domain` that respect its disequalities.
fn groundings(answer: &AbductiveAnswer, domain: &[Term]) -> Vec<(Vec<Term>, Vec<Term>)> {
    let mut all = answer.context.clone();
    all.extend(answer.phrases.iter().cloned());
    for (a, b) in &answer.disequalities {
        all.push(a.clone());
        all.push(b.clone());
    }
    let mut vars: Vec<Var> = Vec::new();
    for t in &all {
        for v in t.vars() {
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
    }
    let mut out = Vec::new();
    let mut pick = vec![0usize; vars.len()];
    loop {
        let env: HashMap<Var, Term> = vars.iter().cloned().zip(pick.iter().map(|&i| domain[i].clone())).collect();
        if answer.disequalities.iter().all(|(a, b)| subst(a, &env) != subst(b, &env)) {
            out.push((
                answer.context.iter().map(|t| subst(t, &env)).collect(),
                answer.phrases.iter().map(|t| subst(t, &env)).collect(),
            ));
        }
        let mut k = 0;
        while k < pick.len() {
            pick[k] += 1;
            if pick[k] < domain.len() {
                break;
            }
            pick[k] = 0;
            k += 1;
        }
        if k == pick.len() {
            return out;
        }
    }
}

fn answers_for(p: &Problem, compaction: bool) -> Result<Vec<AbductiveAnswer>, String> {
    let g = grammar(&source(p.text), CompileOptions { compaction, ..CompileOptions::default() })?;
    Ok(run_abductive(&g, &tokenize(&words(p.input)), 256))
}

pub fn completeness_and_soundness() -> Result<String, String> {
    let mut pairs = 0;
    let mut produced = 0;
    for (k, p) in problems().iter().enumerate() {
        ensure!(p.base.len() <= 16, "problem {k} base has {} atoms", p.base.len());
        let d = Deductive::new(p.text, p.input);
        let domain = constants(&p.base);
        let oracle = Oracle::new(&parse_source(&source(p.text)).unwrap(), &tokenize(&words(p.input))).map_err(|e| format!("{e:?}"))?;
        let wanted = competent_pairs(&d, &p.base);
        ensure!(!wanted.is_empty(), "problem {k} has no competent pair");
        for compaction in [false, true] {
            let answers = answers_for(p, compaction)?;
            let mut covered: BTreeSet<Ground> = BTreeSet::new();
            for a in &answers {
                let report = oracle.check(a);
                ensure!(report.is_sound(), "problem {k} answer\n{a}unsound: {:?}", report.violations);
                let grounded = groundings(a, &domain);
                let sound_instance = grounded.iter().any(|(c, ph)| {
                    d.consistent(c) && {
                        let derived = d.phrases(c);
                        ph.iter().all(|t| derived.contains(t))
                    }
                });
                ensure!(sound_instance, "problem {k} answer\n{a}has no faithful grounding");
                covered.extend(grounded.iter().map(|(c, ph)| (texts(c), texts(ph))));
            }
            for w in &wanted {
                ensure!(
                    covered.contains(w),
                    "problem {k} ({}) compaction {compaction}: no answer covers context {:?} phrases {:?}",
                    p.input,
                    w.0,
                    w.1
                );
            }
            produced += answers.len();
        }
        pairs += wanted.len();
    }
    Ok(format!("{pairs} competent ground pairs covered, {produced} answers sound"))
}

/// Consistent ground instances of all answers of a run.
fn ground_solutions(p: &Problem, d: &Deductive, compaction: bool) -> Result<BTreeSet<Ground>, String> {
    let domain = constants(&p.base);
    let mut out = BTreeSet::new();
    for a in answers_for(p, compaction)? {
        for (c, ph) in groundings(&a, &domain) {
            if d.consistent(&c) {
                out.insert((texts(&c), texts(&ph)));
            }
        }
    }
    Ok(out)
}

pub fn compaction_neutrality() -> Result<String, String> {
    let mut all = problems();
    all.push(Problem { text: TWO_ABDUCIBLES, input: "x x", base: atoms("abd", &[&["a", "b"]]) });
    for (k, p) in all.iter().enumerate() {
        let d = Deductive::new(p.text, p.input);
        let off = ground_solutions(p, &d, false)?;
        let on = ground_solutions(p, &d, true)?;
        ensure!(off == on, "problem {k} ({}): {} ground solutions off, {} on", p.input, off.len(), on.len());
    }
    let p = all.last().unwrap();
    let first = answers_for(p, true)?.into_iter().next().ok_or("no answer")?;
    ensure!(first.context.len() == 1, "first answer keeps {} abducibles", first.context.len());
    let attrs: BTreeSet<&Term> = first.phrases.iter().map(|t| &t.args()[2]).collect();
    ensure!(attrs.len() == 1 && first.phrases.len() == 2, "phrases {:?}", first.phrases);
    let x = read_term("abd(_)").unwrap();
    ensure!(first.context[0].functor() == x.functor(), "context {:?}", first.context);
    Ok(format!("{} problems agree, first answer unifies the pair", all.len()))
}
