use chrg::compiler::{compile, CompileOptions, CompiledGrammar};
use chrg::source::parse_source;
use chrg::term::Term;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn grammar(src: &str, opts: CompileOptions) -> Result<CompiledGrammar, String> {
    let s = parse_source(src).map_err(|e| format!("source: {e}"))?;
    compile(&s, opts).map_err(|e| format!("compile: {e:?}"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn strings(ts: impl IntoIterator<Item = Term>) -> Vec<String> {
    ts.into_iter().map(|t| t.to_string()).collect()
}

/// Every word sequence over `alphabet` with length at most `max`.
pub fn all_inputs(alphabet: &[&'static str], max: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<&str>| {
                alphabet.iter().map(move |a| {
                    let mut v = w.clone();
                    v.push(*a);
                    v
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Fails the check with a message unless `cond` holds.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}
pub(crate) use ensure;
