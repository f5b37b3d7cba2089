//! Growth of work and node counts with input length.

use std::collections::BTreeSet;

use chrg::compiler::ConstraintKind;
use chrg::driver::{parse, ParseOptions};
use chrg::scaling::{run_suite, BenchClass};
use chrg::term::Term;

use crate::support::ensure;

pub fn scaling() -> Result<String, String> {
    let sizes = [64, 128, 256, 512, 1024];
    let (rows, slope) = run_suite(BenchClass::Unambiguous, &sizes).map_err(|e| e.to_string())?;
    ensure!((slope - 1.0).abs() <= 0.15, "unambiguous slope {slope:.3}");
    for m in &rows {
        ensure!(m.nodes < 2 * m.n, "n={} gives {} nodes", m.n, m.nodes);
    }
    let class = BenchClass::Ambiguous;
    let (rows, amb_slope) = run_suite(class, &[8, 16, 32, 64]).map_err(|e| e.to_string())?;
    ensure!(amb_slope <= 3.5, "ambiguous slope {amb_slope:.3}");
    for m in &rows {
        let bound = class.symbols() * m.n * (m.n + 1) / 2;
        ensure!(m.distinct_nodes <= bound, "n={} gives {} distinct nodes over {bound}", m.n, m.distinct_nodes);
    }
    Ok(format!("unambiguous slope {slope:.3}, ambiguous slope {amb_slope:.3}"))
}

/// Every `a(i,j,T)` where `T` brackets the leaves between `i` and `j`.
fn bracketings(n: i64) -> BTreeSet<String> {
    fn trees(len: i64) -> Vec<Term> {
        if len == 1 {
            return vec![Term::int(0)];
        }
        let mut out = Vec::new();
        for k in 1..len {
            for l in trees(k) {
                for r in trees(len - k) {
                    out.push(Term::compound("t", vec![l.clone(), r]));
                }
            }
        }
        out
    }
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..=n {
            for t in trees(j - i) {
                out.insert(Term::compound("a", vec![Term::int(i), Term::int(j), t]).to_string());
            }
        }
    }
    out
}

pub fn blowup() -> Result<String, String> {
    let class = BenchClass::Blowup;
    let g = class.grammar();
    let mut counts = Vec::new();
    for n in 1..=8 {
        let p = parse(&g, &class.input(n), ParseOptions::default()).map_err(|e| format!("{e:?}"))?;
        ensure!(p.succeeded(), "n={n} failed");
        let d = p.derivation();
        let got: BTreeSet<String> = d
            .constraints()
            .iter()
            .filter(|c| c.kind == ConstraintKind::Symbol)
            .map(|c| d.term_of(c.id).to_string())
            .collect();
        let want = bracketings(n as i64);
        ensure!(got == want, "n={n}: {} constraints, oracle {}", got.len(), want.len());
        counts.push(got.len().to_string());
    }
    Ok(format!("counts {}", counts.join(",")))
}
