//! Hypothesis and expectation matching under backtracking.

use chrg::compiler::{AssumeOp, CompileOptions, Goal};
use chrg::corpus::{words, AG_INPUT, AG_PRONOUN};
use chrg::driver::{parse, tokenize, ParseOptions};
use chrg::engine::{Derivation, Outcome};
use chrg::term::Term;
use rand::Rng;

use crate::support::{ensure, grammar, rng};

#[derive(Clone, Debug)]
enum Step {
    Hypothesis { linear: bool, value: &'static str },
    /// `None` expects any value through a fresh variable.
    Expectation(Option<&'static str>),
}

/// What an answer shows: leftover hypotheses, leftover expectations and the
/// value each expectation variable received.
type Signature = (Vec<String>, Vec<String>, Vec<String>);

fn h(v: &str) -> String {
    format!("h({v})")
}

/// Every partial matching: each expectation takes a compatible hypothesis
/// or none, and a linear hypothesis serves at most one expectation.
fn oracle(steps: &[Step]) -> Vec<Signature> {
    let hyps: Vec<(usize, bool, &str)> = steps
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match s {
            Step::Hypothesis { linear, value } => Some((i, *linear, *value)),
            _ => None,
        })
        .collect();
    let exps: Vec<Option<&str>> = steps
        .iter()
        .filter_map(|s| match s {
            Step::Expectation(v) => Some(*v),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    let mut choice = vec![None; exps.len()];
    assign(&hyps, &exps, 0, &mut choice, &mut out);
    out.sort();
    out
}

fn assign(hyps: &[(usize, bool, &str)], exps: &[Option<&str>], k: usize, choice: &mut Vec<Option<usize>>, out: &mut Vec<Signature>) {
    if k == exps.len() {
        let used: Vec<usize> = choice.iter().flatten().copied().collect();
        let mut left: Vec<String> = hyps
            .iter()
            .enumerate()
            .filter(|(j, (_, linear, _))| !linear || !used.contains(j))
            .map(|(_, (_, linear, v))| format!("{}{}", if *linear { "=+" } else { "=*" }, h(v)))
            .collect();
        left.sort();
        let mut pending: Vec<String> = Vec::new();
        let mut values = Vec::new();
        for (e, c) in exps.iter().zip(choice.iter()) {
            match c {
                None => pending.push(format!("=-{}", h(e.unwrap_or("any")))),
                Some(j) if e.is_none() => values.push(hyps[*j].2.to_string()),
                Some(_) => {}
            }
            if e.is_none() && c.is_none() {
                values.push("any".into());
            }
        }
        pending.sort();
        out.push((left, pending, values));
        return;
    }
    choice[k] = None;
    assign(hyps, exps, k + 1, choice, out);
    for (j, (_, linear, v)) in hyps.iter().enumerate() {
        let compatible = exps[k].is_none_or(|e| e == *v);
        let free = !linear || !choice[..k].contains(&Some(j));
        if compatible && free {
            choice[k] = Some(j);
            assign(hyps, exps, k + 1, choice, out);
            choice[k] = None;
        }
    }
}

fn blank_vars(t: &Term) -> String {
    t.map_vars(&mut |_| Some(Term::atom("any"))).to_string()
}

fn engine(steps: &[Step]) -> Result<Vec<Signature>, String> {
    let g = grammar("end_of_CHRG_source.\n", CompileOptions::default())?;
    let mut d = Derivation::new(&g);
    let mut vars = Vec::new();
    for s in steps {
        let (op, term) = match s {
            Step::Hypothesis { linear, value } => {
                let op = if *linear { AssumeOp::Linear } else { AssumeOp::Intuitionistic };
                (op, Term::compound("h", vec![Term::atom(value)]))
            }
            Step::Expectation(Some(v)) => (AssumeOp::Expectation, Term::compound("h", vec![Term::atom(v)])),
            Step::Expectation(None) => {
                let x = Term::var("X");
                vars.push(x.clone());
                (AssumeOp::Expectation, Term::compound("h", vec![x]))
            }
        };
        d.queue_goal(Goal::Assume { op, term, timed: false, position: None });
    }
    let mut out = Vec::new();
    let mut outcome = d.run();
    while outcome == Outcome::Success {
        let mut left: Vec<String> = d.hypotheses().iter().map(blank_vars).collect();
        left.sort();
        let mut pending: Vec<String> = d.pending_expectations().iter().map(blank_vars).collect();
        pending.sort();
        let values = vars.iter().map(|x| blank_vars(&d.resolve(x))).collect();
        out.push((left, pending, values));
        outcome = d.next_answer();
    }
    ensure!(outcome == Outcome::Failure, "enumeration ended with {outcome:?}");
    out.sort();
    Ok(out)
}

fn random_steps(r: &mut impl Rng) -> Vec<Step> {
    let hyps = r.gen_range(0..=5);
    let exps = r.gen_range(0..=5);
    let mut steps: Vec<Step> = Vec::new();
    for _ in 0..hyps {
        steps.push(Step::Hypothesis {
            linear: r.gen_bool(0.5),
            value: ["a", "b"][r.gen_range(0..2)],
        });
    }
    for _ in 0..exps {
        steps.push(Step::Expectation([None, Some("a"), Some("b")][r.gen_range(0..3)]));
    }
    // interleave arrivals
    for i in (1..steps.len()).rev() {
        let j = r.gen_range(0..=i);
        steps.swap(i, j);
    }
    steps
}

fn reflexive_hate(store: &[Term]) -> bool {
    store.iter().any(|t| {
        t.functor() == Some(("sentence", 3)) && {
            let s = &t.args()[2];
            s.functor() == Some(("s", 3)) && s.args()[1] == Term::atom("hate") && s.args()[0] == s.args()[2]
        }
    })
}

/// Final stores of every answer of the pronoun grammar.
fn ag_answers(src: &str) -> Result<Vec<Vec<Term>>, String> {
    let g = grammar(src, CompileOptions::default())?;
    let mut p = parse(&g, &tokenize(&words(AG_INPUT)), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
    let mut out = Vec::new();
    let mut outcome = p.outcome;
    while outcome == Outcome::Success {
        out.push(p.final_store());
        outcome = p.next_answer();
    }
    Ok(out)
}

pub fn matchings() -> Result<String, String> {
    let mut r = rng(12);
    let mut answers = 0;
    for k in 0..200 {
        let steps = random_steps(&mut r);
        let want = oracle(&steps);
        let got = engine(&steps)?;
        ensure!(got == want, "instance {k} {steps:?}: engine {got:?}, oracle {want:?}");
        answers += got.len();
    }
    let with_ic = ag_answers(AG_PRONOUN)?;
    ensure!(!with_ic.is_empty(), "pronoun grammar has no answer");
    ensure!(!with_ic.iter().any(|s| reflexive_hate(s)), "a reflexive hate reading survived");
    let mary_hates_martha = Term::compound("s", vec![Term::atom("mary"), Term::atom("hate"), Term::atom("martha")]);
    ensure!(
        with_ic[0].iter().any(|t| t.args().get(2) == Some(&mary_hates_martha)),
        "first answer lacks s(mary,hate,martha)"
    );
    let without = AG_PRONOUN.replace("sentence(s(A,hate,A)) ::> fail.", "");
    let unpruned = ag_answers(&without)?;
    let pruned = unpruned.iter().filter(|s| reflexive_hate(s)).count();
    ensure!(pruned > 0, "integrity rule had nothing to prune");
    Ok(format!(
        "200 instances, {answers} answers match; {pruned} reflexive readings pruned, {} answers remain",
        with_ic.len()
    ))
}
