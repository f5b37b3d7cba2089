//! Benchmark grammar classes and growth measurement.
//!
//! Operation counts stand in for time: the rule-application count of a
//! locally unambiguous grammar grows linearly, that of an ambiguous
//! attribute-free grammar at most cubically.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::compiler::{compile, CompileOptions, CompiledGrammar, ConstraintKind};
use crate::driver::{parse, ParseOptions};
use crate::source::parse_source;
use crate::term::Term;

/// Largest input accepted for the blowup class.
pub const BLOWUP_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BenchClass {
    /// A binary counter: pairs of equal subtrees merge, giving a balanced tree.
    Unambiguous,
    /// `[x] ::> a` and `a, a ::> a`.
    Ambiguous,
    /// `[x] ::> a(0)` and `a(T1), a(T2) ::> a(t(T1,T2))`.
    Blowup,
}

impl BenchClass {
    pub const ALL: [BenchClass; 3] = [BenchClass::Unambiguous, BenchClass::Ambiguous, BenchClass::Blowup];

    pub fn name(self) -> &'static str {
        match self {
            BenchClass::Unambiguous => "unambiguous",
            BenchClass::Ambiguous => "ambiguous",
            BenchClass::Blowup => "blowup",
        }
    }

    pub fn source(self) -> &'static str {
        match self {
            BenchClass::Unambiguous => {
                "grammar_symbols a/1.\n\
                 [x] <:> a(0).\n\
                 a(K), a(K) <:> a(s(K)).\n\
                 end_of_CHRG_source.\n"
            }
            BenchClass::Ambiguous => {
                "grammar_symbols a/0.\n\
                 [x] ::> a.\n\
                 a, a ::> a.\n\
                 end_of_CHRG_source.\n"
            }
            BenchClass::Blowup => {
                "grammar_symbols a/1.\n\
                 [x] ::> a(0).\n\
                 a(T1), a(T2) ::> a(t(T1,T2)).\n\
                 end_of_CHRG_source.\n"
            }
        }
    }

    /// Number of grammar symbols, the `g` of the node bound.
    pub fn symbols(self) -> usize {
        1
    }

    pub fn grammar(self) -> CompiledGrammar {
        let src = parse_source(self.source()).expect("bundled benchmark grammar");
        compile(&src, CompileOptions::default()).expect("bundled benchmark grammar")
    }

    pub fn input(self, n: usize) -> Vec<Term> {
        vec![Term::atom("x"); n]
    }
}

impl fmt::Display for BenchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        BenchClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown grammar class '{s}' (expected unambiguous, ambiguous or blowup)"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BenchError {
    #[error("input size {0} exceeds the cap of {BLOWUP_CAP} for the blowup class")]
    SizeCap(usize),
    #[error("derivation did not succeed")]
    Failed,
}

#[derive(Clone, Debug)]
pub struct Measurement {
    pub n: usize,
    pub wall: Duration,
    /// Live constraints at the end.
    pub store_size: usize,
    pub applications: u64,
    /// Grammar symbol constraints ever created.
    pub nodes: usize,
    /// Distinct grammar symbol values ever created.
    pub distinct_nodes: usize,
}

pub fn measure(class: BenchClass, g: &CompiledGrammar, n: usize) -> Result<Measurement, BenchError> {
    if class == BenchClass::Blowup && n > BLOWUP_CAP {
        return Err(BenchError::SizeCap(n));
    }
    let start = Instant::now();
    let p = parse(g, &class.input(n), ParseOptions::default()).map_err(|_| BenchError::Failed)?;
    let wall = start.elapsed();
    if !p.succeeded() {
        return Err(BenchError::Failed);
    }
    let d = p.derivation();
    let symbols: Vec<usize> = d
        .constraints()
        .iter()
        .filter(|c| c.kind == ConstraintKind::Symbol)
        .map(|c| c.id)
        .collect();
    let distinct: HashSet<Term> = symbols.iter().map(|&c| d.term_of(c)).collect();
    Ok(Measurement {
        n,
        wall,
        store_size: d.alive().count(),
        applications: d.stats().applications,
        nodes: symbols.len(),
        distinct_nodes: distinct.len(),
    })
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Measurements over the sizes plus the fitted application-count slope.
pub fn run_suite(class: BenchClass, sizes: &[usize]) -> Result<(Vec<Measurement>, f64), BenchError> {
    let g = class.grammar();
    let rows = sizes
        .iter()
        .map(|&n| measure(class, &g, n))
        .collect::<Result<Vec<_>, _>>()?;
    let slope = loglog_slope(&rows.iter().map(|m| (m.n as f64, m.applications as f64)).collect::<Vec<_>>());
    Ok((rows, slope))
}

/// One table row per size and a final slope line.
pub fn format_table(class: BenchClass, rows: &[Measurement], slope: f64) -> String {
    let mut out = format!("class {class}\n{:>6} {:>12} {:>10} {:>12} {:>8} {:>9}\n", "n", "wall_us", "store", "applications", "nodes", "distinct");
    for m in rows {
        out.push_str(&format!(
            "{:>6} {:>12} {:>10} {:>12} {:>8} {:>9}\n",
            m.n,
            m.wall.as_micros(),
            m.store_size,
            m.applications,
            m.nodes,
            m.distinct_nodes
        ));
    }
    out.push_str(&format!("slope {slope:.3}\n"));
    out
}
