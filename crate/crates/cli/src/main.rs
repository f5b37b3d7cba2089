//! Command-line front end: parse sentences with a grammar file or run the
//! scaling benchmark.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrg::abduction::answers;
use chrg::compiler::{compile, query_goal, AssumeOp, CompileOptions, CompiledGrammar, Goal};
use chrg::driver::{boundary_line, parse, tokenize, Parse, ParseOptions, SyntaxTree};
use chrg::engine::Outcome;
use chrg::reader::read_term;
use chrg::scaling::{format_table, run_suite, BenchClass};
use chrg::source::parse_source;
use chrg::term::normalize_vars;
use clap::{Parser, ValueEnum};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Store dump with `%` comment lines for extras.
    Text,
    /// One tagged record per line, for golden files.
    Structured,
}

/// Parse token sequences with a constraint-handling-rule grammar.
#[derive(Parser, Debug)]
#[command(name = "chrg", version)]
struct Cli {
    /// Grammar source file.
    #[arg(required_unless_present = "bench")]
    grammar: Option<PathBuf>,
    /// Words of one sentence; read sentences from --input instead when absent.
    #[arg(conflicts_with = "input")]
    words: Vec<String>,
    /// File with one whitespace-separated sentence per line.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Print the word boundary line before each store.
    #[arg(long)]
    show_boundaries: bool,
    /// Print the syntax trees of the final store.
    #[arg(long)]
    trees: bool,
    /// Print the maximal locally unambiguous node sets.
    #[arg(long)]
    unambiguous_sets: bool,
    /// Keep every grammar head active.
    #[arg(long)]
    no_passive: bool,
    /// Give each parse its own copy of the abduced context.
    #[arg(long)]
    ambiguity_index: bool,
    /// Try to unify each new abducible with an existing one first.
    #[arg(long)]
    compaction: bool,
    /// Enumerate every answer by backtracking.
    #[arg(long)]
    all_answers: bool,
    /// Print rule applications to the error stream.
    #[arg(long)]
    trace: bool,
    /// Goal run after the last token, such as a cleanup trigger.
    #[arg(long = "goal", value_name = "TERM")]
    goals: Vec<String>,
    /// Abandon a derivation after this many steps.
    #[arg(long, value_name = "N")]
    step_limit: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Run the scaling benchmark for a class over comma-separated sizes.
    #[arg(long, num_args = 2, value_names = ["CLASS", "SIZES"], conflicts_with_all = ["grammar", "input"])]
    bench: Option<Vec<String>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(args) = &cli.bench {
        return match bench(&args[0], &args[1]) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
        };
    }
    let g = match load_grammar(&cli) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &g) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn bench(class: &str, sizes: &str) -> Result<()> {
    let class: BenchClass = class.parse().map_err(anyhow::Error::msg)?;
    let sizes = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad size '{s}'")))
        .collect::<Result<Vec<_>>>()?;
    let (rows, slope) = run_suite(class, &sizes)?;
    print!("{}", format_table(class, &rows, slope));
    Ok(())
}

fn load_grammar(cli: &Cli) -> Result<CompiledGrammar> {
    let path = cli.grammar.as_ref().expect("grammar required outside bench mode");
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let source = parse_source(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let opts = CompileOptions {
        passive: cli.no_passive.then_some(false),
        ambiguity_indexing: cli.ambiguity_index,
        compaction: cli.compaction,
    };
    let g = compile(&source, opts).map_err(|e| {
        let lines: Vec<String> = e.0.iter().map(|d| format!("{}:{d}", path.display())).collect();
        anyhow::anyhow!("grammar errors\n{}", lines.join("\n"))
    })?;
    for w in &g.warnings {
        eprintln!("{}:{w}", path.display());
    }
    if cli.all_answers && !can_backtrack(&g) {
        bail!("--all-answers needs a grammar with disjunctions, expectations or compaction");
    }
    Ok(g)
}

/// Whether any rule body can leave a choice point.
fn can_backtrack(g: &CompiledGrammar) -> bool {
    fn goal(x: &Goal) -> bool {
        match x {
            Goal::Disjunction(_) => true,
            Goal::Assume { op, .. } => *op == AssumeOp::Expectation,
            Goal::Transaction(gs) => gs.iter().any(goal),
            _ => false,
        }
    }
    g.options.compaction || g.rules.iter().any(|r| r.body.iter().any(goal))
}

fn sentences(cli: &Cli) -> Result<Vec<Vec<String>>> {
    if let Some(path) = &cli.input {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect());
    }
    Ok(vec![cli.words.clone()])
}

/// Parses every sentence in parallel and prints reports in input order.
fn run(cli: &Cli, g: &CompiledGrammar) -> Result<bool> {
    let goals = cli
        .goals
        .iter()
        .map(|q| read_term(q).map(|t| query_goal(g, &t)).map_err(|e| anyhow::anyhow!("goal '{q}': {e}")))
        .collect::<Result<Vec<_>>>()?;
    let inputs = sentences(cli)?;
    let reports: Vec<(bool, String, String)> = inputs
        .par_iter()
        .enumerate()
        .map(|(k, words)| report(cli, g, k, words, &goals))
        .collect();
    let mut ok = true;
    for (success, out, err) in reports {
        ok &= success;
        print!("{out}");
        eprint!("{err}");
    }
    Ok(ok)
}

/// Success flag, standard output text and error stream text for a sentence.
fn report(cli: &Cli, g: &CompiledGrammar, k: usize, words: &[String], goals: &[Goal]) -> (bool, String, String) {
    let tokens = tokenize(words);
    let opts = ParseOptions {
        step_limit: cli.step_limit,
        trace: cli.trace,
        goals: goals.to_vec(),
        ..ParseOptions::default()
    };
    let mut out = String::new();
    let mut err = String::new();
    let mut p = match parse(g, &tokens, opts) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "sentence {}: {e}", k + 1);
            return (false, out, err);
        }
    };
    for line in p.derivation().trace() {
        let _ = writeln!(err, "{line}");
    }
    let structured = cli.format == Format::Structured;
    if structured {
        let _ = writeln!(out, "sentence {} {}", k + 1, boundary_line(&tokens));
    } else if k > 0 {
        out.push('\n');
    }
    let success = p.succeeded();
    let mut outcome = p.outcome;
    let mut n = 0;
    loop {
        n += 1;
        if cli.all_answers {
            if structured {
                let _ = writeln!(out, "answer {n}");
            } else {
                let _ = writeln!(out, "% answer {n}");
            }
        }
        write_answer(cli, &p, outcome, &mut out);
        if !cli.all_answers || outcome != Outcome::Success {
            break;
        }
        outcome = p.next_answer();
        if outcome != Outcome::Success {
            break;
        }
    }
    if outcome == Outcome::LimitExceeded {
        let _ = writeln!(err, "sentence {}: step limit exceeded", k + 1);
    }
    if structured {
        out.push_str("end\n");
    }
    (success, out, err)
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Success => "success",
        Outcome::Failure => "failure",
        Outcome::LimitExceeded => "limit",
    }
}

fn write_answer(cli: &Cli, p: &Parse, outcome: Outcome, out: &mut String) {
    let structured = cli.format == Format::Structured;
    if structured {
        let _ = writeln!(out, "outcome {}", outcome_name(outcome));
    } else if outcome != Outcome::Success {
        let _ = writeln!(out, "% {}", outcome_name(outcome));
    }
    if outcome != Outcome::Success {
        return;
    }
    if cli.show_boundaries && !structured {
        let _ = writeln!(out, "{}", boundary_line(&p.tokens));
    }
    let tag = if structured { "constraint " } else { "" };
    for t in p.final_store() {
        let _ = writeln!(out, "{tag}{t}");
    }
    let pending = normalize_vars(&p.derivation().pending_expectations());
    for t in pending {
        let _ = writeln!(out, "{} {t}", if structured { "pending" } else { "% pending" });
    }
    if cli.ambiguity_index {
        for a in answers(p) {
            for line in a.to_string().lines() {
                let _ = writeln!(out, "{} {line}", if structured { "index" } else { "%" });
            }
        }
    }
    if cli.trees {
        // trees() follows forest() order; only live nodes that no other
        // node uses as a child are printed as roots
        let forest = p.forest();
        let children: Vec<usize> = forest.iter().flat_map(|e| e.children.iter().copied()).collect();
        for (e, t) in forest.iter().zip(p.trees()) {
            if !t.hidden && !children.contains(&e.node) {
                write_tree(&t, 0, structured, out);
            }
        }
    }
    if cli.unambiguous_sets {
        let d = p.derivation();
        for (i, s) in p.maximal_unambiguous_sets().iter().enumerate() {
            let nodes: Vec<String> = s.nodes.iter().map(|&c| d.term_of(c).to_string()).collect();
            if structured {
                let _ = writeln!(out, "set {} {}", i + 1, nodes.join(" "));
            } else {
                let _ = writeln!(out, "% unambiguous set {}: {}", i + 1, nodes.join(" "));
            }
        }
    }
}

fn write_tree(t: &SyntaxTree, depth: usize, structured: bool, out: &mut String) {
    let rule = t.rule.map(|r| format!(" rule {}", r + 1)).unwrap_or_default();
    let hidden = if t.hidden { " hidden" } else { "" };
    if structured {
        let _ = writeln!(out, "tree {depth} {}{rule}{hidden}", t.node);
    } else {
        let _ = writeln!(out, "% {}{}{rule}{hidden}", "  ".repeat(depth), t.node);
    }
    for c in &t.children {
        write_tree(c, depth + 1, structured, out);
    }
}
