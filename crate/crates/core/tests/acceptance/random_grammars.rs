//! Randomized attribute-free grammars checked against a naive closure.

use std::collections::BTreeSet;

use chrg::compiler::{CompileOptions, CompiledGrammar, ConstraintKind};
use chrg::driver::{parse, tokenize, ParseOptions};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::support::{all_inputs, ensure, grammar, rng};

const SYMBOLS: [&str; 3] = ["a", "b", "c"];
const WORDS: [&str; 2] = ["x", "y"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Elem {
    Token(usize),
    Sym(usize),
}

impl Elem {
    fn text(self) -> String {
        match self {
            Elem::Token(w) => format!("[{}]", WORDS[w]),
            Elem::Sym(s) => SYMBOLS[s].to_string(),
        }
    }
}

#[derive(Clone, Debug)]
struct Rule {
    left: Option<Elem>,
    core: Vec<Elem>,
    right: Option<Elem>,
    produced: usize,
    simplify: bool,
}

impl Rule {
    fn text(&self) -> String {
        let mut s = String::new();
        if let Some(l) = self.left {
            s.push_str(&format!("{} -\\ ", l.text()));
        }
        s.push_str(&self.core.iter().map(|e| e.text()).collect::<Vec<_>>().join(", "));
        if let Some(r) = self.right {
            s.push_str(&format!(" /- {}", r.text()));
        }
        let arrow = if self.simplify { "<:>" } else { "::>" };
        format!("{s} {arrow} {}.\n", SYMBOLS[self.produced])
    }

    fn sequence(&self) -> Vec<Elem> {
        self.left.iter().chain(&self.core).chain(&self.right).copied().collect()
    }
}

fn random_elem(r: &mut ChaCha8Rng, symbols: usize) -> Elem {
    if r.gen_bool(0.4) {
        Elem::Token(r.gen_range(0..WORDS.len()))
    } else {
        Elem::Sym(r.gen_range(0..symbols))
    }
}

fn random_rules(r: &mut ChaCha8Rng, simplify: bool) -> Vec<Rule> {
    let symbols = r.gen_range(1..=SYMBOLS.len());
    let count = r.gen_range(1..=5);
    (0..count)
        .map(|_| {
            let len = r.gen_range(1..=3);
            Rule {
                left: r.gen_bool(0.25).then(|| random_elem(r, symbols)),
                core: (0..len).map(|_| random_elem(r, symbols)).collect(),
                right: r.gen_bool(0.25).then(|| random_elem(r, symbols)),
                produced: r.gen_range(0..symbols),
                simplify,
            }
        })
        .collect()
}

fn source(rules: &[Rule]) -> String {
    let mut s = String::from("grammar_symbols a/0, b/0, c/0.\n");
    for rule in rules {
        s.push_str(&rule.text());
    }
    s.push_str("end_of_CHRG_source.\n");
    s
}

/// Draws rule sets until one compiles; loop checks reject some draws.
fn compiled(r: &mut ChaCha8Rng, simplify: bool) -> (Vec<Rule>, CompiledGrammar) {
    loop {
        let rules = random_rules(r, simplify);
        if let Ok(g) = grammar(&source(&rules), CompileOptions::default()) {
            return (rules, g);
        }
    }
}

type Fact = (Elem, i64, i64);

/// Least set of facts closed under the rules, computed by naive iteration.
fn closure(rules: &[Rule], input: &[&str]) -> BTreeSet<Fact> {
    let mut facts: BTreeSet<Fact> = input
        .iter()
        .enumerate()
        .map(|(i, w)| (Elem::Token(WORDS.iter().position(|x| x == w).unwrap()), i as i64, i as i64 + 1))
        .collect();
    loop {
        let mut new = Vec::new();
        for rule in rules {
            let seq = rule.sequence();
            let core_from = rule.left.is_some() as usize;
            let core_to = core_from + rule.core.len() - 1;
            let mut spans = Vec::new();
            chains(&facts, &seq, None, &mut Vec::new(), &mut spans);
            for span in spans {
                let fact = (Elem::Sym(rule.produced), span[core_from].0, span[core_to].1);
                if !facts.contains(&fact) {
                    new.push(fact);
                }
            }
        }
        if new.is_empty() {
            return facts;
        }
        facts.extend(new);
    }
}

/// All ways to lay the elements end to end over existing facts.
fn chains(facts: &BTreeSet<Fact>, seq: &[Elem], at: Option<i64>, acc: &mut Vec<(i64, i64)>, out: &mut Vec<Vec<(i64, i64)>>) {
    let Some((first, rest)) = seq.split_first() else {
        out.push(acc.clone());
        return;
    };
    for &(e, i, j) in facts {
        if e == *first && at.is_none_or(|p| p == i) {
            acc.push((i, j));
            chains(facts, rest, Some(j), acc, out);
            acc.pop();
        }
    }
}

fn engine_facts(g: &CompiledGrammar, input: &[&str]) -> Result<BTreeSet<String>, String> {
    let p = parse(g, &tokenize(input), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
    ensure!(p.succeeded(), "derivation failed on {input:?}");
    let d = p.derivation();
    Ok(d.alive()
        .filter(|c| matches!(c.kind, ConstraintKind::Symbol | ConstraintKind::Token))
        .map(|c| d.term_of(c.id).to_string())
        .collect())
}

fn fact_text((e, i, j): Fact) -> String {
    match e {
        Elem::Token(w) => format!("token({i},{j},{})", WORDS[w]),
        Elem::Sym(s) => format!("{}({i},{j})", SYMBOLS[s]),
    }
}

pub fn least_model() -> Result<String, String> {
    let mut r = rng(5);
    let inputs = all_inputs(&WORDS, 6);
    let mut runs = 0;
    for k in 0..25 {
        let (rules, g) = compiled(&mut r, false);
        for input in &inputs {
            let want: BTreeSet<String> = closure(&rules, input).into_iter().map(fact_text).collect();
            let got = engine_facts(&g, input)?;
            ensure!(got == want, "grammar {k}\n{}on {input:?}: engine {got:?}, closure {want:?}", source(&rules));
            runs += 1;
        }
    }
    Ok(format!("{runs} of {runs} runs agree"))
}

pub fn disambiguation_subset() -> Result<String, String> {
    let mut r = rng(6);
    let inputs = all_inputs(&WORDS, 8);
    let mut runs = 0;
    for k in 0..10 {
        let (rules, g) = compiled(&mut r, false);
        let mut modified = rules.clone();
        let flips = r.gen_range(1..=modified.len());
        let mut order: Vec<usize> = (0..modified.len()).collect();
        order.shuffle(&mut r);
        for &i in &order[..flips] {
            modified[i].simplify = true;
        }
        let g2 = grammar(&source(&modified), CompileOptions::default())?;
        for input in &inputs {
            let full = engine_facts(&g, input)?;
            let fewer = engine_facts(&g2, input)?;
            ensure!(
                fewer.is_subset(&full),
                "pair {k}\n{}versus\n{}on {input:?}: {:?} not in original",
                source(&rules),
                source(&modified),
                fewer.difference(&full).collect::<Vec<_>>()
            );
            runs += 1;
        }
    }
    Ok(format!("{runs} of {runs} stores are subsets"))
}

pub fn local_unambiguity() -> Result<String, String> {
    let mut r = rng(7);
    let inputs = all_inputs(&WORDS, 8);
    let mut runs = 0;
    for k in 0..10 {
        let (rules, g) = compiled(&mut r, true);
        for input in &inputs {
            let p = parse(&g, &tokenize(input), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
            ensure!(p.succeeded(), "derivation failed on {input:?}");
            let sets = p.maximal_unambiguous_sets();
            ensure!(sets.len() == 1, "grammar {k}\n{}on {input:?}: {} maximal sets", source(&rules), sets.len());
            runs += 1;
        }
    }
    Ok(format!("{runs} of {runs} runs give one maximal set"))
}
