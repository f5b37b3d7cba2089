//! Grammars shipped with the library.

pub const EXAMPLE1: &str = include_str!("../grammars/example1.chrg");
pub const EXAMPLE1_SIMPLIFICATION: &str = include_str!("../grammars/example1_simp.chrg");
pub const COORDINATION: &str = include_str!("../grammars/coordination.chrg");
pub const ARITHMETIC: &str = include_str!("../grammars/arithmetic.chrg");
pub const GARFIELD: &str = include_str!("../grammars/garfield.chrg");
pub const CLEANUP: &str = include_str!("../grammars/cleanup.chrg");
pub const AG_PRONOUN: &str = include_str!("../grammars/ag_pronoun.chrg");
pub const TRANSLATION: &str = include_str!("../grammars/translation.chrg");

pub const COORDINATION_INPUT: &str = "peter and paul likes and mary hates martha and eve";
pub const GARFIELD_INPUT: &str =
    "garfield eats mickey , tom eats jerry , jerry is mouse , tom is cat , mickey is mouse";
pub const CLEANUP_INPUT: &str = "john saw the man in the park with a telescope";
pub const AG_INPUT: &str = "martha and mary like paul . mary hates her";

/// Every bundled grammar by name.
pub const ALL: &[(&str, &str)] = &[
    ("example1", EXAMPLE1),
    ("example1_simp", EXAMPLE1_SIMPLIFICATION),
    ("coordination", COORDINATION),
    ("arithmetic", ARITHMETIC),
    ("garfield", GARFIELD),
    ("cleanup", CLEANUP),
    ("ag_pronoun", AG_PRONOUN),
    ("translation", TRANSLATION),
];

pub fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}
