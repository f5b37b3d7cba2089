//! Acceptance suite: one PASS or FAIL line per criterion.

mod abductive;
mod assumptions;
mod corpus;
mod growth;
mod random_grammars;
mod support;

use std::process::ExitCode;
use std::time::Instant;

type Check = fn() -> Result<String, String>;

const CRITERIA: &[(u32, &str, Check)] = &[
    (1, "golden dialogue", corpus::golden_dialogue),
    (2, "translation golden forms", corpus::translation_forms),
    (3, "coordination", corpus::coordination),
    (4, "garfield abduction", corpus::garfield),
    (5, "least-model oracle", random_grammars::least_model),
    (6, "disambiguation subset", random_grammars::disambiguation_subset),
    (7, "local unambiguity of simplification grammars", random_grammars::local_unambiguity),
    (8, "complexity scaling", growth::scaling),
    (9, "blowup grammar", growth::blowup),
    (10, "abduction completeness and soundness", abductive::completeness_and_soundness),
    (11, "compaction neutrality", abductive::compaction_neutrality),
    (12, "assumption matchings", assumptions::matchings),
    (13, "cleanup post-processing", corpus::cleanup),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, name, check) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || n.to_string() == *f) {
            continue;
        }
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let ms = start.elapsed().as_millis();
        match result {
            Ok(detail) => println!("PASS {n:>2} {name}: {detail} ({ms} ms)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name}: {detail} ({ms} ms)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
