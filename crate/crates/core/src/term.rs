//! Logic terms, substitutions, unification and syntactic disequality.
//!
//! Terms are immutable values. Variables are identified by a process-wide
//! unique id; the display name is only used for printing.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::Arc;

static NEXT_VAR: AtomicU64 = AtomicU64::new(1);

/// A logic variable.
#[derive(Clone, Debug)]
pub struct Var {
    id: u64,
    name: Arc<str>,
}

impl Var {
    /// Creates a variable with a fresh id.
    pub fn fresh(name: &str) -> Var {
        Var {
            id: NEXT_VAR.fetch_add(1, AtomicOrdering::Relaxed),
            name: Arc::from(name),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Var) -> bool {
        self.id == other.id
    }
}

impl Eq for Var {}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Var) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Var) -> Ordering {
        self.id.cmp(&other.id)
    }
}

/// A first-order term.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    Atom(Arc<str>),
    Int(i64),
    Compound(Arc<str>, Arc<[Term]>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Var::fresh(name))
    }

    pub fn atom(name: &str) -> Term {
        Term::Atom(Arc::from(name))
    }

    pub fn int(value: i64) -> Term {
        Term::Int(value)
    }

    /// Builds `functor(args..)`; an empty argument list yields an atom.
    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::atom(functor)
        } else {
            Term::Compound(Arc::from(functor), Arc::from(args))
        }
    }

    /// Functor name and arity for atoms and compounds.
    pub fn functor(&self) -> Option<(&str, usize)> {
        match self {
            Term::Atom(name) => Some((name, 0)),
            Term::Compound(name, args) => Some((name, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<&Var> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Atom(_) | Term::Int(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Variables in order of first occurrence.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.collect_vars(&mut out, &mut seen);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Var>, seen: &mut HashSet<u64>) {
        match self {
            Term::Var(v) => {
                if seen.insert(v.id) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => {
                for a in args.iter() {
                    a.collect_vars(out, seen);
                }
            }
            _ => {}
        }
    }

    pub fn occurs(&self, var: &Var) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::Compound(_, args) => args.iter().any(|a| a.occurs(var)),
            _ => false,
        }
    }

    /// Replaces variables by id through `f`; unmapped variables are kept.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::Compound(name, args) => {
                let new: Vec<Term> = args.iter().map(|a| a.map_vars(f)).collect();
                Term::Compound(name.clone(), Arc::from(new))
            }
            _ => self.clone(),
        }
    }

    /// Standard order: variables < integers < atoms < compounds; compounds
    /// by arity, then name, then arguments.
    pub fn standard_cmp(&self, other: &Term) -> Ordering {
        fn rank(t: &Term) -> u8 {
            match t {
                Term::Var(_) => 0,
                Term::Int(_) => 1,
                Term::Atom(_) => 2,
                Term::Compound(..) => 3,
            }
        }
        match (self, other) {
            (Term::Var(a), Term::Var(b)) => a.cmp(b),
            (Term::Int(a), Term::Int(b)) => a.cmp(b),
            (Term::Atom(a), Term::Atom(b)) => a.cmp(b),
            (Term::Compound(f, xs), Term::Compound(g, ys)) => xs
                .len()
                .cmp(&ys.len())
                .then_with(|| f.cmp(g))
                .then_with(|| cmp_args(xs, ys)),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.standard_cmp(other)
    }
}

pub(crate) fn cmp_args(xs: &[Term], ys: &[Term]) -> Ordering {
    for (x, y) in xs.iter().zip(ys.iter()) {
        let c = x.standard_cmp(y);
        if c != Ordering::Equal {
            return c;
        }
    }
    xs.len().cmp(&ys.len())
}

/// Bindings from variable ids to terms, kept in triangular form.
///
/// Lookups chase chains of bindings, so `apply` always yields the fully
/// resolved term and is idempotent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: HashMap<u64, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: &Var) -> Option<&Term> {
        self.bindings.get(&var.id)
    }

    pub fn is_bound(&self, var: &Var) -> bool {
        self.bindings.contains_key(&var.id)
    }

    /// Binds `var`; the caller guarantees it is unbound and that the
    /// binding passes the occurs check.
    pub(crate) fn bind(&mut self, var: &Var, term: Term) {
        debug_assert!(!self.bindings.contains_key(&var.id));
        self.bindings.insert(var.id, term);
    }

    pub(crate) fn binding(&self, id: u64) -> Option<&Term> {
        self.bindings.get(&id)
    }

    pub(crate) fn unbind(&mut self, id: u64) {
        self.bindings.remove(&id);
    }

    /// Follows variable bindings at the top level only.
    pub fn walk<'a>(&'a self, mut term: &'a Term) -> &'a Term {
        while let Term::Var(v) = term {
            match self.bindings.get(&v.id) {
                Some(next) => term = next,
                None => break,
            }
        }
        term
    }

    /// Fully resolves `term` under the bindings.
    pub fn resolve(&self, term: &Term) -> Term {
        if self.bindings.is_empty() {
            return term.clone();
        }
        match self.walk(term) {
            Term::Compound(name, args) => {
                let new: Vec<Term> = args.iter().map(|a| self.resolve(a)).collect();
                Term::Compound(name.clone(), Arc::from(new))
            }
            other => other.clone(),
        }
    }

    fn occurs_resolved(&self, var: &Var, term: &Term) -> bool {
        match self.walk(term) {
            Term::Var(v) => v == var,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs_resolved(var, a)),
            _ => false,
        }
    }

    /// Unifies in place, recording newly bound variable ids in `trail`.
    /// On failure, bindings made during this call are left for the caller to
    /// undo from the trail.
    pub(crate) fn unify_in_place(&mut self, a: &Term, b: &Term, trail: &mut Vec<u64>) -> bool {
        let a = self.walk(a).clone();
        let b = self.walk(b).clone();
        match (&a, &b) {
            (Term::Var(x), Term::Var(y)) if x == y => true,
            (Term::Var(x), _) => {
                if self.occurs_resolved(x, &b) {
                    return false;
                }
                self.bind(x, b.clone());
                trail.push(x.id);
                true
            }
            (_, Term::Var(y)) => {
                if self.occurs_resolved(y, &a) {
                    return false;
                }
                self.bind(y, a.clone());
                trail.push(y.id);
                true
            }
            (Term::Atom(x), Term::Atom(y)) => x == y,
            (Term::Int(x), Term::Int(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs
                        .iter()
                        .zip(ys.iter())
                        .all(|(x, y)| self.unify_in_place(x, y, trail))
            }
            _ => false,
        }
    }

    /// Whether the two terms could be unified without changing `self`.
    pub fn unifiable(&self, a: &Term, b: &Term) -> bool {
        let mut scratch = self.clone();
        let mut trail = Vec::new();
        scratch.unify_in_place(a, b, &mut trail)
    }

    /// Syntactic identity after resolving bindings.
    pub fn identical(&self, a: &Term, b: &Term) -> bool {
        let a = self.walk(a);
        let b = self.walk(b);
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => x == y,
            (Term::Atom(x), Term::Atom(y)) => x == y,
            (Term::Int(x), Term::Int(y)) => x == y,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| self.identical(x, y))
            }
            _ => false,
        }
    }

    /// Iterates the raw (triangular) bindings.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &Term)> {
        self.bindings.iter().map(|(k, v)| (*k, v))
    }
}

/// Most general unifier of `a` and `b` extending `s`, with occurs check.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    let mut out = s.clone();
    let mut trail = Vec::new();
    if out.unify_in_place(a, b, &mut trail) {
        Some(out)
    } else {
        None
    }
}

/// Applies `s` to `t`, replacing every bound variable.
pub fn apply(s: &Substitution, t: &Term) -> Term {
    s.resolve(t)
}

/// A variant of `t` with every variable replaced by a fresh one.
pub fn rename_apart(t: &Term) -> Term {
    let mut map: HashMap<u64, Term> = HashMap::new();
    t.map_vars(&mut |v| {
        Some(
            map.entry(v.id)
                .or_insert_with(|| Term::Var(Var::fresh(v.name())))
                .clone(),
        )
    })
}

/// Raised when a disequality is violated.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("disequality violated: {0} and {1} are identical")]
pub struct DifViolation(pub Term, pub Term);

/// Pending constraints `s ≠ t` that must never become syntactically equal.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DisequalitySet {
    pairs: Vec<(Term, Term)>,
}

impl DisequalitySet {
    pub fn new() -> DisequalitySet {
        DisequalitySet::default()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Term, Term)] {
        &self.pairs
    }

    /// Adds `a ≠ b` under `s`. Fails when the terms are already identical;
    /// the pair is dropped when they can never unify.
    pub fn add_dif(
        &self,
        s: &Substitution,
        a: &Term,
        b: &Term,
    ) -> Result<DisequalitySet, DifViolation> {
        let ra = s.resolve(a);
        let rb = s.resolve(b);
        if ra == rb {
            return Err(DifViolation(ra, rb));
        }
        let mut out = self.clone();
        if s.unifiable(&ra, &rb) {
            out.pairs.push((ra, rb));
        }
        Ok(out)
    }

    /// Rechecks every pair after new bindings were made in `s`.
    pub fn recheck(&self, s: &Substitution) -> Result<DisequalitySet, DifViolation> {
        let mut out = DisequalitySet::new();
        for (a, b) in &self.pairs {
            let ra = s.resolve(a);
            let rb = s.resolve(b);
            if ra == rb {
                return Err(DifViolation(ra, rb));
            }
            if s.unifiable(&ra, &rb) {
                out.pairs.push((ra, rb));
            }
        }
        Ok(out)
    }
}

const INFIX: &[(&str, u32, u32, u32)] = &[
    // (operator, priority, left operand max, right operand max)
    ("=", 700, 699, 699),
    ("\\=", 700, 699, 699),
    ("==", 700, 699, 699),
    ("\\==", 700, 699, 699),
    ("=<", 700, 699, 699),
    ("<", 700, 699, 699),
    (">", 700, 699, 699),
    (">=", 700, 699, 699),
    ("=:=", 700, 699, 699),
    ("=\\=", 700, 699, 699),
    ("+", 500, 500, 499),
    ("-", 500, 500, 499),
    ("*", 400, 400, 399),
    ("/", 400, 400, 399),
    ("^", 200, 199, 200),
];

fn infix_op(name: &str) -> Option<(u32, u32, u32)> {
    INFIX
        .iter()
        .find(|(op, _, _, _)| *op == name)
        .map(|(_, p, l, r)| (*p, *l, *r))
}

const PREFIX_HYPOTHESIS: &[&str] = &["=+", "=*", "=-"];
const PREFIX_TIMED: &[&str] = &["+", "*", "-"];

fn is_symbol_char(c: char) -> bool {
    "+-*/\\^<>=~:.?@#&$!".contains(c)
}

/// Whether an atom can be printed without quotes.
pub fn atom_needs_quotes(name: &str) -> bool {
    match name.chars().next() {
        None => true,
        Some(c) if c.is_ascii_lowercase() => {
            !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        Some(_) => {
            // a lone '.' would read as a clause end
            name == "." || !(matches!(name, "[]" | "{}" | "!" | ";") || name.chars().all(is_symbol_char))
        }
    }
}

pub(crate) fn write_atom(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if atom_needs_quotes(name) {
        write!(f, "'")?;
        for c in name.chars() {
            if c == '\'' || c == '\\' {
                write!(f, "\\")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "'")
    } else {
        write!(f, "{name}")
    }
}

impl Term {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, max: u32) -> fmt::Result {
        match self {
            Term::Var(v) => {
                if v.name() == "_" {
                    write!(f, "_")
                } else if v.name().is_empty() {
                    write!(f, "_G{}", v.id())
                } else {
                    write!(f, "{}", v.name())
                }
            }
            Term::Int(i) => {
                if *i < 0 && max < 200 {
                    write!(f, "({i})")
                } else {
                    write!(f, "{i}")
                }
            }
            // operator atoms as operands are bracketed so they read back as atoms
            Term::Atom(a) if max < 999 && !a.is_empty() && a.chars().all(is_symbol_char) => {
                write!(f, "(")?;
                write_atom(f, a)?;
                write!(f, ")")
            }
            Term::Atom(a) => write_atom(f, a),
            Term::Compound(name, args) => {
                if args.len() == 2 {
                    if let Some((prec, lp, rp)) = infix_op(name) {
                        let open = prec > max;
                        if open {
                            write!(f, "(")?;
                        }
                        // operands that would glue into the operator's token get a space
                        let left = Prec(&args[0], lp).to_string();
                        let right = Prec(&args[1], rp).to_string();
                        write!(f, "{left}")?;
                        if left.ends_with(is_symbol_char) {
                            write!(f, " ")?;
                        }
                        write!(f, "{name}")?;
                        if right.starts_with(is_symbol_char) {
                            write!(f, " ")?;
                        }
                        write!(f, "{right}")?;
                        if open {
                            write!(f, ")")?;
                        }
                        return Ok(());
                    }
                }
                if args.len() == 1 && PREFIX_HYPOTHESIS.contains(&name.as_ref()) {
                    let arg = Prec(&args[0], 200).to_string();
                    let text = if arg.starts_with(|c: char| c == '(' || is_symbol_char(c)) {
                        format!("{name} {arg}")
                    } else {
                        format!("{name}{arg}")
                    };
                    return if max < 200 { write!(f, "({text})") } else { write!(f, "{text}") };
                }
                // timed assumptions such as *fem(X) read back as prefix forms
                if args.len() == 1 && PREFIX_TIMED.contains(&name.as_ref()) {
                    if let Term::Compound(inner, _) = &args[0] {
                        if inner.starts_with(|c: char| c.is_ascii_lowercase()) {
                            let text = format!("{name}{}", Prec(&args[0], 0));
                            return if max < 200 { write!(f, "({text})") } else { write!(f, "{text}") };
                        }
                    }
                }
                if args.len() == 1 && name.as_ref() == "{}" {
                    write!(f, "{{")?;
                    args[0].fmt_prec(f, 1200)?;
                    return write!(f, "}}");
                }
                if name.as_ref() == "[|]" && args.len() == 2 {
                    return self.fmt_list(f);
                }
                write_atom(f, name)?;
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    a.fmt_prec(f, 999)?;
                }
                write!(f, ")")
            }
        }
    }

    fn fmt_list(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        let mut cur = self;
        let mut first = true;
        loop {
            match cur {
                Term::Compound(name, args) if name.as_ref() == "[|]" && args.len() == 2 => {
                    if !first {
                        write!(f, ",")?;
                    }
                    first = false;
                    args[0].fmt_prec(f, 999)?;
                    cur = &args[1];
                }
                Term::Atom(a) if a.as_ref() == "[]" => break,
                other => {
                    write!(f, "|")?;
                    other.fmt_prec(f, 999)?;
                    break;
                }
            }
        }
        write!(f, "]")
    }
}

struct Prec<'a>(&'a Term, u32);

impl fmt::Display for Prec<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt_prec(f, self.1)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 1200)
    }
}

/// Whether `a` and `b` are equal up to a bijective renaming of variables.
pub fn variant(a: &[Term], b: &[Term]) -> bool {
    fn go(a: &Term, b: &Term, fw: &mut HashMap<u64, u64>, bw: &mut HashMap<u64, u64>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                *fw.entry(x.id).or_insert(y.id) == y.id && *bw.entry(y.id).or_insert(x.id) == x.id
            }
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| go(x, y, fw, bw))
            }
            (Term::Var(_), _) | (_, Term::Var(_)) => false,
            _ => a == b,
        }
    }
    let (mut fw, mut bw) = (HashMap::new(), HashMap::new());
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| go(x, y, &mut fw, &mut bw))
}

/// Builds a proper list term.
pub fn list(items: Vec<Term>) -> Term {
    items
        .into_iter()
        .rev()
        .fold(Term::atom("[]"), |tail, head| {
            Term::compound("[|]", vec![head, tail])
        })
}

/// Renames variables of `terms` by order of first occurrence to `_G0`, `_G1`..
/// so that printed output does not depend on global variable ids.
pub fn normalize_vars(terms: &[Term]) -> Vec<Term> {
    let mut map: HashMap<u64, Term> = HashMap::new();
    let mut next = 0usize;
    terms
        .iter()
        .map(|t| {
            t.map_vars(&mut |v| {
                Some(
                    map.entry(v.id())
                        .or_insert_with(|| {
                            let name = format!("_G{next}");
                            next += 1;
                            Term::Var(Var::fresh(&name))
                        })
                        .clone(),
                )
            })
        })
        .collect()
}
