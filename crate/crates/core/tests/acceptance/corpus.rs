//! Criteria checked on the bundled grammars.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use chrg::compiler::{query_goal, CompileOptions, ConstraintKind};
use chrg::corpus::*;
use chrg::driver::{parse, tokenize, ParseOptions};
use chrg::reader::read_term;
use chrg::term::{variant, Term};

use crate::support::{ensure, grammar, strings};

fn store_of(src: &str, input: &str) -> Result<BTreeSet<String>, String> {
    let g = grammar(src, CompileOptions::default())?;
    let p = parse(&g, &tokenize(&words(input)), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
    ensure!(p.succeeded(), "derivation failed");
    Ok(strings(p.final_store()).into_iter().collect())
}

pub fn golden_dialogue() -> Result<String, String> {
    let start = Instant::now();
    let full = store_of(EXAMPLE1, "peter likes mary")?;
    let expected: BTreeSet<String> = [
        "token(0,1,peter)",
        "token(1,2,likes)",
        "token(2,3,mary)",
        "np(0,1)",
        "verb(1,2)",
        "np(2,3)",
        "sentence(0,3)",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    ensure!(full == expected, "propagation store {full:?}");
    let simp = store_of(EXAMPLE1_SIMPLIFICATION, "peter likes mary")?;
    ensure!(simp == BTreeSet::from(["sentence(0,3)".to_string()]), "simplification store {simp:?}");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("7 and 1 constraints exactly in {took:?}"))
}

pub fn translation_forms() -> Result<String, String> {
    let g = grammar(TRANSLATION, CompileOptions::default())?;
    // the rules as printed in the literature, with anonymous variables named
    let expected = [
        "a(N0,N1), b(N1,N2,X), token(N2,N3,c), h(Y), d(N3,N4,Y) ==> e(N1,N3,X,Y)",
        "c(N5,_,X) \\ a(N1,N2), b(N3,N4) <=> N2=<N3, N4=<N5 | d(N1,N4,X)",
        "a(N1,N2), b(N1,N2) ==> e(N1,N2)",
    ];
    let grammar_rules: Vec<Term> = g.rules.iter().map(|r| r.to_term()).collect();
    ensure!(grammar_rules.len() == expected.len(), "{} rules compiled", grammar_rules.len());
    for (want, got) in expected.iter().zip(&grammar_rules) {
        let want_t = read_term(want).map_err(|e| format!("{want}: {e}"))?;
        ensure!(variant(&[want_t], std::slice::from_ref(got)), "expected {want}, got {got}");
    }
    Ok("3 rules equal up to renaming".into())
}

fn symbol_attributes(src: &str, input: &str, name: &str) -> Result<Vec<Term>, String> {
    let g = grammar(src, CompileOptions::default())?;
    let p = parse(&g, &tokenize(&words(input)), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
    ensure!(p.succeeded(), "derivation failed");
    Ok(p.final_store()
        .into_iter()
        .filter(|t| t.functor().is_some_and(|(n, _)| n == name))
        .map(|t| t.args()[2].clone())
        .collect())
}

pub fn coordination() -> Result<String, String> {
    let found = symbol_attributes(COORDINATION, COORDINATION_INPUT, "sentence")?;
    for want in ["s(peter+paul,like,martha+eve)", "s(mary,hate,martha+eve)"] {
        let t = read_term(want).unwrap();
        ensure!(found.contains(&t), "{want} missing from {}", strings(found.clone()).join(" "));
    }
    Ok("both coordinated readings present".into())
}

pub fn garfield() -> Result<String, String> {
    let start = Instant::now();
    let g = grammar(GARFIELD, CompileOptions::default())?;
    let p = parse(&g, &tokenize(&words(GARFIELD_INPUT)), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
    let took = start.elapsed();
    ensure!(p.succeeded(), "derivation failed");
    let d = p.derivation();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for c in d.alive() {
        match c.kind {
            ConstraintKind::Abducible => positive.push(d.term_of(c.id)),
            ConstraintKind::NegatedAbducible => negative.push(d.term_of(c.id)),
            _ => {}
        }
    }
    for want in ["categ_of(garfield,cat)", "food_for(cat,mouse)"] {
        ensure!(positive.contains(&read_term(want).unwrap()), "{want} missing");
    }
    for n in &negative {
        let (name, _) = n.functor().unwrap();
        let pos = Term::compound(name.trim_end_matches('_'), n.args().to_vec());
        ensure!(!positive.contains(&pos), "both {pos} and {n}");
    }
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("{} context facts in {took:?}", positive.len()))
}

/// Spans not strictly inside another span.
fn maximal_intervals(spans: &BTreeSet<(i64, i64)>) -> BTreeSet<(i64, i64)> {
    spans
        .iter()
        .filter(|&&(a, b)| !spans.iter().any(|&(c, d)| c <= a && b <= d && (c, d) != (a, b)))
        .copied()
        .collect()
}

fn np_spans(store: &[Term]) -> BTreeSet<(i64, i64)> {
    store
        .iter()
        .filter(|t| t.functor() == Some(("np", 3)))
        .map(|t| (t.args()[0].as_int().unwrap(), t.args()[1].as_int().unwrap()))
        .collect()
}

pub fn cleanup() -> Result<String, String> {
    let g = grammar(CLEANUP, CompileOptions::default())?;
    let toks = tokenize(&words(CLEANUP_INPUT));
    let before = parse(&g, &toks, ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
    let all = np_spans(&before.final_store());
    let opts = ParseOptions {
        goals: vec![query_goal(&g, &read_term("cleanup").unwrap())],
        ..ParseOptions::default()
    };
    let after = parse(&g, &toks, opts).map_err(|e| format!("{e:?}"))?;
    ensure!(after.succeeded(), "cleanup derivation failed");
    let store = after.final_store();
    let kept = np_spans(&store);
    let want = maximal_intervals(&all);
    ensure!(kept == want, "kept {kept:?}, maximal {want:?} of {all:?}");
    for gone in ["vp", "pp", "sentence", "cleanup"] {
        ensure!(
            !store.iter().any(|t| t.functor().is_some_and(|(n, _)| n == gone)),
            "{gone} survived cleanup"
        );
    }
    Ok(format!("{} of {} np spans kept, all maximal", kept.len(), all.len()))
}
