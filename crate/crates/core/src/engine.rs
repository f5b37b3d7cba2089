//! Execution of compiled rules under the LR computation rule.
//!
//! The newest constraint is processed first, built-ins before rule trials,
//! rules in textual order, and a body's goals leftmost first, each to
//! completion before the next. Body disjunctions and assumption resolution
//! create choice points; failure restores the newest one from the trail.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::compiler::{AssumeOp, CompiledGrammar, CompiledRule, ConstraintKind, Goal, INPUT_LENGTH};
use crate::source::Arrow;
use crate::term::{DisequalitySet, Substitution, Term, Var};

/// Metadata of a hypothesis or expectation in the store.
#[derive(Clone, Debug)]
pub struct AssumptionInfo {
    pub op: AssumeOp,
    pub timed: bool,
    /// Birth boundary of a timed hypothesis, or start of a timed expectation.
    pub position: Option<i64>,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub id: usize,
    pub term: Term,
    pub kind: ConstraintKind,
    pub alive: bool,
    pub assumption: Option<AssumptionInfo>,
    ground: bool,
}

/// One rule firing.
#[derive(Clone, Debug)]
pub struct Application {
    pub rule: usize,
    /// Matched constraints in head order.
    pub heads: Vec<usize>,
    /// The grammar symbol created by the body, or the existing identical one.
    pub produced: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub applications: u64,
    pub steps: u64,
    pub constraints_added: u64,
    pub isolated_failures: u64,
    pub backtracks: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
    LimitExceeded,
}

type Env = HashMap<u64, Term>;

#[derive(Clone, Debug)]
pub(crate) enum Task {
    Goal(Goal, Option<usize>),
    AddToken(i64, Term),
    Activate(usize),
    Search {
        cid: usize,
        rule: usize,
        head: usize,
    },
    Candidates {
        cid: usize,
        rule: usize,
        head: usize,
        combos: Rc<Vec<Vec<usize>>>,
        pos: usize,
    },
    TxCommit(usize),
    Resolve(usize),
}

#[derive(Clone, Debug)]
pub(crate) enum TrailEntry {
    Bind(u64),
    Added(usize),
    Killed(usize),
    History(usize, Vec<usize>),
    Difs(DisequalitySet),
    Watch(u64),
    Tried(usize, usize),
    Frontier(i64),
    Key(Term, usize),
}

#[derive(Clone, Debug)]
pub(crate) enum Alternative {
    Branches(Vec<Vec<Goal>>),
    Barrier,
    /// Give up the pairing of an expectation with a hypothesis.
    Unpair { expectation: usize, hypothesis: usize },
}

#[derive(Clone, Debug)]
pub(crate) struct ChoicePoint {
    trail_len: usize,
    log_len: usize,
    goals: Vec<Task>,
    alt: Alternative,
    app: Option<usize>,
}

/// State of one derivation.
pub struct Derivation<'g> {
    pub(crate) grammar: &'g CompiledGrammar,
    pub(crate) store: Vec<Constraint>,
    pub(crate) subst: Substitution,
    pub(crate) difs: DisequalitySet,
    history: HashSet<(usize, Vec<usize>)>,
    dedupe: HashMap<Term, usize>,
    by_functor: HashMap<(String, usize), Vec<usize>>,
    by_arg: HashMap<(String, usize, usize, i64), Vec<usize>>,
    watch: HashMap<u64, Vec<usize>>,
    pub(crate) goals: Vec<Task>,
    pub(crate) trail: Vec<TrailEntry>,
    pub(crate) choices: Vec<ChoicePoint>,
    pub(crate) input_length: i64,
    pub(crate) frontier: i64,
    pub(crate) log: Vec<Application>,
    pub(crate) tried: HashSet<(usize, usize)>,
    next_index: i64,
    stats: Stats,
    step_limit: Option<u64>,
    trace: Option<Vec<String>>,
    failed: bool,
}

impl<'g> Derivation<'g> {
    pub fn new(grammar: &'g CompiledGrammar) -> Self {
        Derivation {
            grammar,
            store: Vec::new(),
            subst: Substitution::new(),
            difs: DisequalitySet::new(),
            history: HashSet::new(),
            dedupe: HashMap::new(),
            by_functor: HashMap::new(),
            by_arg: HashMap::new(),
            watch: HashMap::new(),
            goals: Vec::new(),
            trail: Vec::new(),
            choices: Vec::new(),
            input_length: 0,
            frontier: 0,
            log: Vec::new(),
            tried: HashSet::new(),
            next_index: 0,
            stats: Stats::default(),
            step_limit: None,
            trace: None,
            failed: false,
        }
    }

    pub fn grammar(&self) -> &'g CompiledGrammar {
        self.grammar
    }

    pub fn set_input_length(&mut self, n: i64) {
        self.input_length = n;
    }

    pub fn input_length(&self) -> i64 {
        self.input_length
    }

    pub fn set_step_limit(&mut self, limit: Option<u64>) {
        self.step_limit = limit;
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> &[String] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    pub fn log(&self) -> &[Application] {
        &self.log
    }

    pub fn has_choice_points(&self) -> bool {
        !self.choices.is_empty()
    }

    /// Queues a token entry after everything already queued.
    pub fn queue_token(&mut self, position: i64, word: Term) {
        self.goals.insert(0, Task::AddToken(position, word));
    }

    /// Queues a query goal after everything already queued.
    pub fn queue_goal(&mut self, goal: Goal) {
        self.goals.insert(0, Task::Goal(goal, None));
    }

    /// All constraints ever added on the current branch, alive or not.
    pub fn constraints(&self) -> &[Constraint] {
        &self.store
    }

    pub fn constraint(&self, cid: usize) -> &Constraint {
        &self.store[cid]
    }

    /// Current value of a constraint under the bindings made so far.
    pub fn term_of(&self, cid: usize) -> Term {
        let c = &self.store[cid];
        if c.ground {
            c.term.clone()
        } else {
            self.subst.resolve(&c.term)
        }
    }

    pub fn alive(&self) -> impl Iterator<Item = &Constraint> {
        self.store.iter().filter(|c| c.alive)
    }

    /// Live constraints with bindings applied, in creation order.
    pub fn live_terms(&self) -> Vec<Term> {
        self.alive().map(|c| self.term_of(c.id)).collect()
    }

    pub fn resolve(&self, t: &Term) -> Term {
        self.subst.resolve(t)
    }

    pub fn disequalities(&self) -> Vec<(Term, Term)> {
        self.difs
            .pairs()
            .iter()
            .map(|(a, b)| (self.subst.resolve(a), self.subst.resolve(b)))
            .collect()
    }

    /// Runs until the goal stack is empty or every branch has failed.
    pub fn run(&mut self) -> Outcome {
        if self.failed {
            return Outcome::Failure;
        }
        while let Some(task) = self.goals.pop() {
            self.stats.steps += 1;
            if self.step_limit.is_some_and(|l| self.stats.steps > l) {
                return Outcome::LimitExceeded;
            }
            if !self.execute(task) && !self.backtrack() {
                self.failed = true;
                return Outcome::Failure;
            }
        }
        Outcome::Success
    }

    /// Backtracks into the newest choice point and runs to the next answer.
    pub fn next_answer(&mut self) -> Outcome {
        if self.failed || !self.backtrack() {
            self.failed = true;
            return Outcome::Failure;
        }
        self.run()
    }

    /// Restores the newest choice point; false when none is left.
    pub(crate) fn backtrack(&mut self) -> bool {
        self.stats.backtracks += 1;
        while let Some(cp) = self.choices.pop() {
            self.undo_to(cp.trail_len);
            self.log.truncate(cp.log_len);
            self.goals = cp.goals.clone();
            match cp.alt {
                Alternative::Barrier => {
                    self.stats.isolated_failures += 1;
                    return true;
                }
                Alternative::Branches(mut rest) => {
                    if rest.is_empty() {
                        continue;
                    }
                    let branch = rest.remove(0);
                    if !rest.is_empty() {
                        self.choices.push(ChoicePoint {
                            trail_len: cp.trail_len,
                            log_len: cp.log_len,
                            goals: cp.goals,
                            alt: Alternative::Branches(rest),
                            app: cp.app,
                        });
                    }
                    self.push_goals(branch, cp.app);
                    return true;
                }
                Alternative::Unpair { expectation, hypothesis } => {
                    self.tried.insert((expectation, hypothesis));
                    self.trail.push(TrailEntry::Tried(expectation, hypothesis));
                    self.goals.push(Task::Resolve(expectation));
                    return true;
                }
            }
        }
        false
    }

    fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            match self.trail.pop().unwrap() {
                TrailEntry::Bind(id) => self.subst.unbind(id),
                TrailEntry::Added(cid) => {
                    let c = &mut self.store[cid];
                    c.alive = false;
                    let key = c.term.clone();
                    if self.dedupe.get(&key) == Some(&cid) {
                        self.dedupe.remove(&key);
                    }
                }
                TrailEntry::Killed(cid) => {
                    self.store[cid].alive = true;
                    if self.dedupes(cid) {
                        let key = self.store[cid].term.clone();
                        self.dedupe.insert(key, cid);
                    }
                }
                TrailEntry::History(r, key) => {
                    self.history.remove(&(r, key));
                }
                TrailEntry::Difs(old) => self.difs = old,
                TrailEntry::Watch(var) => {
                    if let Some(v) = self.watch.get_mut(&var) {
                        v.pop();
                    }
                }
                TrailEntry::Tried(e, h) => {
                    self.tried.remove(&(e, h));
                }
                TrailEntry::Frontier(f) => self.frontier = f,
                TrailEntry::Key(t, cid) => {
                    if self.dedupe.get(&t) == Some(&cid) {
                        self.dedupe.remove(&t);
                    }
                }
            }
        }
    }

    pub(crate) fn push_goals(&mut self, goals: Vec<Goal>, app: Option<usize>) {
        for g in goals.into_iter().rev() {
            self.goals.push(Task::Goal(g, app));
        }
    }

    pub(crate) fn push_choice(&mut self, alt: Alternative, app: Option<usize>) {
        self.choices.push(ChoicePoint {
            trail_len: self.trail.len(),
            log_len: self.log.len(),
            goals: self.goals.clone(),
            alt,
            app,
        });
    }

    /// Executes one task; false signals failure.
    fn execute(&mut self, task: Task) -> bool {
        match task {
            Task::Goal(goal, app) => self.execute_goal(goal, app),
            Task::AddToken(i, word) => {
                self.trail.push(TrailEntry::Frontier(self.frontier));
                self.frontier = i + 1;
                let t = Term::compound("token", vec![Term::int(i), Term::int(i + 1), word]);
                self.add_constraint(t, None, None);
                true
            }
            Task::Activate(cid) => {
                if self.store[cid].alive && !self.merge_duplicate(cid) {
                    self.goals.push(Task::Search { cid, rule: 0, head: 0 });
                }
                true
            }
            Task::Search { cid, rule, head } => {
                self.search(cid, rule, head);
                true
            }
            Task::Candidates {
                cid,
                rule,
                head,
                combos,
                pos,
            } => {
                if !self.store[cid].alive {
                    return true;
                }
                if pos + 1 < combos.len() {
                    self.goals.push(Task::Candidates {
                        cid,
                        rule,
                        head,
                        combos: combos.clone(),
                        pos: pos + 1,
                    });
                } else {
                    self.goals.push(Task::Search { cid, rule, head: head + 1 });
                }
                self.try_fire(rule, &combos[pos])
            }
            Task::TxCommit(cp) => {
                self.choices.truncate(cp);
                true
            }
            Task::Resolve(e) => self.resolve_expectation(e),
        }
    }

    fn execute_goal(&mut self, goal: Goal, app: Option<usize>) -> bool {
        match goal {
            Goal::True => true,
            Goal::Fail => false,
            Goal::Unify(a, b) => self.unify(&a, &b),
            Goal::Dif(a, b) => self.add_dif(&a, &b),
            Goal::Test(t) => self.eval_test(&t, &Env::new()) == Some(true),
            Goal::Constraint(t) => {
                self.add_constraint(t, None, None);
                true
            }
            Goal::Symbol(t) => {
                self.add_constraint(t, app, None);
                true
            }
            Goal::Disjunction(mut branches) => {
                if branches.is_empty() {
                    return false;
                }
                let first = branches.remove(0);
                if !branches.is_empty() {
                    self.push_choice(Alternative::Branches(branches), app);
                }
                self.push_goals(first, app);
                true
            }
            Goal::Assume {
                op,
                term,
                timed,
                position,
            } => {
                self.add_assumption(op, term, timed, position);
                true
            }
            Goal::NewIndex(v) => {
                let i = Term::int(self.next_index);
                self.next_index += 1;
                self.unify(&v, &i)
            }
            Goal::CopyAbducibles { from, to } => {
                self.copy_abducibles(&from, &to);
                true
            }
            Goal::Transaction(goals) => {
                self.push_choice(Alternative::Barrier, app);
                let cp = self.choices.len() - 1;
                self.goals.push(Task::TxCommit(cp));
                self.push_goals(goals, app);
                true
            }
        }
    }

    fn copy_abducibles(&mut self, from: &[Term], to: &Term) {
        let from: Vec<Term> = from.iter().map(|t| self.subst.resolve(t)).collect();
        let to = self.subst.resolve(to);
        let mut copies = Vec::new();
        for c in self.store.iter().filter(|c| c.alive) {
            if !matches!(c.kind, ConstraintKind::Abducible | ConstraintKind::NegatedAbducible) {
                continue;
            }
            let t = if c.ground { c.term.clone() } else { self.subst.resolve(&c.term) };
            if t.args().first().is_some_and(|i| from.contains(i)) {
                copies.push(t);
            }
        }
        // one renaming for the whole set keeps sharing between the copies
        let mut rename: HashMap<u64, Term> = HashMap::new();
        let mut goals = Vec::new();
        for t in copies {
            let (name, _) = t.functor().unwrap();
            let mut args = vec![to.clone()];
            for a in &t.args()[1..] {
                args.push(a.map_vars(&mut |v| {
                    Some(
                        rename
                            .entry(v.id())
                            .or_insert_with(|| Term::Var(Var::fresh(v.name())))
                            .clone(),
                    )
                }));
            }
            goals.push(Goal::Constraint(Term::compound(name, args)));
        }
        self.push_goals(goals, None);
    }

    /// A constraint that bindings made identical to an older live one is
    /// dropped, keeping the store a set.
    fn merge_duplicate(&mut self, cid: usize) -> bool {
        if self.store[cid].ground || !self.dedupes(cid) {
            return false;
        }
        let now = self.subst.resolve(&self.store[cid].term);
        if now == self.store[cid].term {
            return false;
        }
        match self.dedupe.get(&now) {
            Some(&other) if other != cid && self.store[other].alive && self.term_of(other) == now => {
                self.kill(cid);
                true
            }
            Some(_) => false,
            None => {
                self.dedupe.insert(now.clone(), cid);
                self.trail.push(TrailEntry::Key(now, cid));
                false
            }
        }
    }

    fn dedupes(&self, cid: usize) -> bool {
        !matches!(
            self.store[cid].kind,
            ConstraintKind::Hypothesis | ConstraintKind::Expectation
        )
    }

    /// Inserts a constraint and schedules its activation.
    pub(crate) fn add_constraint(
        &mut self,
        term: Term,
        app: Option<usize>,
        assumption: Option<AssumptionInfo>,
    ) -> Option<usize> {
        let term = self.subst.resolve(&term);
        let kind = self.grammar.kind_of(&term);
        let dedupe = !matches!(kind, ConstraintKind::Hypothesis | ConstraintKind::Expectation);
        if dedupe {
            if let Some(&existing) = self.dedupe.get(&term) {
                if self.store[existing].alive && self.term_of(existing) == term {
                    if let Some(a) = app {
                        self.log[a].produced = Some(existing);
                    }
                    return None;
                }
            }
        }
        let cid = self.store.len();
        let ground = term.is_ground();
        if let Some(a) = app {
            self.log[a].produced = Some(cid);
        }
        if let Some((name, arity)) = term.functor() {
            let name = name.to_string();
            if matches!(kind, ConstraintKind::Token | ConstraintKind::Symbol) {
                for pos in 0..2 {
                    if let Some(i) = term.args().get(pos).and_then(|a| a.as_int()) {
                        self.by_arg.entry((name.clone(), arity, pos, i)).or_default().push(cid);
                    }
                }
            }
            self.by_functor.entry((name, arity)).or_default().push(cid);
        }
        if !ground {
            for v in term.vars() {
                self.watch.entry(v.id()).or_default().push(cid);
                self.trail.push(TrailEntry::Watch(v.id()));
            }
        }
        if dedupe {
            self.dedupe.insert(term.clone(), cid);
        }
        self.store.push(Constraint {
            id: cid,
            term,
            kind,
            alive: true,
            assumption,
            ground,
        });
        self.trail.push(TrailEntry::Added(cid));
        self.stats.constraints_added += 1;
        self.goals.push(Task::Activate(cid));
        Some(cid)
    }

    pub(crate) fn kill(&mut self, cid: usize) {
        let c = &mut self.store[cid];
        if c.alive {
            c.alive = false;
            let key = c.term.clone();
            if self.dedupe.get(&key) == Some(&cid) {
                self.dedupe.remove(&key);
            }
            self.trail.push(TrailEntry::Killed(cid));
        }
    }

    pub(crate) fn unify(&mut self, a: &Term, b: &Term) -> bool {
        let mut bound = Vec::new();
        let ok = self.subst.unify_in_place(a, b, &mut bound);
        for id in &bound {
            self.trail.push(TrailEntry::Bind(*id));
        }
        if !ok {
            return false;
        }
        if bound.is_empty() {
            return true;
        }
        if !self.difs.is_empty() {
            match self.difs.recheck(&self.subst) {
                Ok(d) => {
                    let old = std::mem::replace(&mut self.difs, d);
                    self.trail.push(TrailEntry::Difs(old));
                }
                Err(_) => return false,
            }
        }
        // constraints mentioning a bound variable are activated again
        let mut wake = Vec::new();
        for id in &bound {
            let Some(cids) = self.watch.get(id).cloned() else { continue };
            let value = self.subst.resolve(self.subst.binding(*id).unwrap());
            for v in value.vars() {
                for &c in &cids {
                    self.watch.entry(v.id()).or_default().push(c);
                    self.trail.push(TrailEntry::Watch(v.id()));
                }
            }
            wake.extend(cids);
        }
        let mut seen = HashSet::new();
        wake.retain(|c| seen.insert(*c) && self.store[*c].alive);
        for c in wake.into_iter().rev() {
            self.goals.push(Task::Activate(c));
        }
        true
    }

    fn add_dif(&mut self, a: &Term, b: &Term) -> bool {
        match self.difs.add_dif(&self.subst, a, b) {
            Ok(d) => {
                let old = std::mem::replace(&mut self.difs, d);
                self.trail.push(TrailEntry::Difs(old));
                true
            }
            Err(_) => false,
        }
    }

    /// Finds the next rule head that can take `cid` and schedules its matches.
    fn search(&mut self, cid: usize, mut rule: usize, mut head: usize) {
        if !self.store[cid].alive {
            return;
        }
        let g = self.grammar;
        let term = self.term_of(cid);
        let Some((name, arity)) = term.functor() else { return };
        while rule < g.rules.len() {
            let r = &g.rules[rule];
            while head < r.heads.len() {
                let h = &r.heads[head];
                if h.active && h.term.functor() == Some((name, arity)) {
                    let combos = self.matches(r, head, cid, &term);
                    if !combos.is_empty() {
                        self.goals.push(Task::Candidates {
                            cid,
                            rule,
                            head,
                            combos: Rc::new(combos),
                            pos: 0,
                        });
                        return;
                    }
                }
                head += 1;
            }
            rule += 1;
            head = 0;
        }
    }

    /// All head assignments of `r` with head `j` bound to `cid`, partners newest first.
    fn matches(&self, r: &CompiledRule, j: usize, cid: usize, term: &Term) -> Vec<Vec<usize>> {
        let mut env = Env::new();
        if !match_pattern(&r.heads[j].term, term, &mut env) {
            return Vec::new();
        }
        let mut assigned = vec![usize::MAX; r.heads.len()];
        assigned[j] = cid;
        let mut out = Vec::new();
        self.extend_match(r, 0, j, &mut assigned, &env, &mut out);
        out
    }

    fn extend_match(
        &self,
        r: &CompiledRule,
        k: usize,
        j: usize,
        assigned: &mut Vec<usize>,
        env: &Env,
        out: &mut Vec<Vec<usize>>,
    ) {
        if k == r.heads.len() {
            if self.guard_holds(r, env) && !self.in_history(r, assigned) {
                out.push(assigned.clone());
            }
            return;
        }
        if k == j {
            return self.extend_match(r, k + 1, j, assigned, env, out);
        }
        let pat = &r.heads[k].term;
        for c in self.candidates(pat, env).into_iter().rev() {
            if !self.store[c].alive || assigned.contains(&c) {
                continue;
            }
            let t = self.term_of(c);
            let mut env2 = env.clone();
            if match_pattern(pat, &t, &mut env2) {
                assigned[k] = c;
                self.extend_match(r, k + 1, j, assigned, &env2, out);
                assigned[k] = usize::MAX;
            }
        }
    }

    fn candidates(&self, pat: &Term, env: &Env) -> Vec<usize> {
        let Some((name, arity)) = pat.functor() else {
            return Vec::new();
        };
        let kind = self.grammar.kind_of(pat);
        if matches!(kind, ConstraintKind::Token | ConstraintKind::Symbol) {
            for pos in 0..2 {
                let bound = match &pat.args()[pos] {
                    Term::Var(v) => env.get(&v.id()).and_then(|t| t.as_int()),
                    t => t.as_int(),
                };
                if let Some(i) = bound {
                    return self
                        .by_arg
                        .get(&(name.to_string(), arity, pos, i))
                        .cloned()
                        .unwrap_or_default();
                }
            }
        }
        self.by_functor
            .get(&(name.to_string(), arity))
            .cloned()
            .unwrap_or_default()
    }

    fn history_key(r: &CompiledRule, cids: &[usize]) -> Vec<usize> {
        let mut key = cids.to_vec();
        if r.symmetric_history {
            key.sort_unstable();
        }
        key
    }

    fn in_history(&self, r: &CompiledRule, cids: &[usize]) -> bool {
        r.kind == Arrow::Propagation && self.history.contains(&(r.id, Self::history_key(r, cids)))
    }

    fn guard_holds(&self, r: &CompiledRule, env: &Env) -> bool {
        r.guard.iter().all(|g| self.eval_test(g, env) == Some(true))
    }

    /// Re-checks a scheduled match and fires the rule.
    fn try_fire(&mut self, rule: usize, cids: &[usize]) -> bool {
        let g = self.grammar;
        let r = &g.rules[rule];
        if cids.iter().any(|&c| !self.store[c].alive) || self.in_history(r, cids) {
            return true;
        }
        let mut env = Env::new();
        for (h, &c) in r.heads.iter().zip(cids) {
            let t = self.term_of(c);
            if !match_pattern(&h.term, &t, &mut env) {
                return true;
            }
        }
        if !self.guard_holds(r, &env) {
            return true;
        }
        self.stats.applications += 1;
        if r.kind == Arrow::Propagation {
            let key = Self::history_key(r, cids);
            self.history.insert((r.id, key.clone()));
            self.trail.push(TrailEntry::History(r.id, key));
        }
        for (h, &c) in r.heads.iter().zip(cids) {
            if !h.kept {
                self.kill(c);
            }
        }
        let app = self.log.len();
        self.log.push(Application {
            rule,
            heads: cids.to_vec(),
            produced: None,
        });
        let body = instantiate_goals(&r.body, &mut env);
        if let Some(trace) = self.trace.as_mut() {
            let name = r.name.clone().unwrap_or_else(|| r.id.to_string());
            let heads: Vec<String> = cids.iter().map(|&c| {
                let t = &self.store[c];
                if t.ground { t.term.to_string() } else { self.subst.resolve(&t.term).to_string() }
            }).collect();
            let body: Vec<String> = body.iter().map(|g| crate::compiler::goal_term(g).to_string()).collect();
            trace.push(format!("rule {name}: {} => {}", heads.join(", "), body.join(", ")));
        }
        self.push_goals(body, Some(app));
        true
    }

    /// Evaluates a built-in test; `None` when it cannot be decided.
    pub(crate) fn eval_test(&self, t: &Term, env: &Env) -> Option<bool> {
        let inst = |x: &Term| self.subst.resolve(&instantiate(x, env));
        let (name, arity) = t.functor()?;
        let args = t.args();
        Some(match (name, arity) {
            ("true", 0) => true,
            ("fail" | "false", 0) => false,
            ("=" | "==", 2) => inst(&args[0]) == inst(&args[1]),
            ("\\==", 2) => inst(&args[0]) != inst(&args[1]),
            ("\\=", 2) => !self.subst.unifiable(&inst(&args[0]), &inst(&args[1])),
            ("unifiable", 2) => self.subst.unifiable(&inst(&args[0]), &inst(&args[1])),
            ("integer", 1) => matches!(inst(&args[0]), Term::Int(_)),
            ("atom", 1) => matches!(inst(&args[0]), Term::Atom(_)),
            ("\\+", 1) => !self.eval_test(&args[0], env)?,
            (op @ ("<" | "=<" | ">" | ">=" | "=:=" | "=\\="), 2) => {
                let a = self.eval_arith(&inst(&args[0]))?;
                let b = self.eval_arith(&inst(&args[1]))?;
                match op {
                    "<" => a < b,
                    "=<" => a <= b,
                    ">" => a > b,
                    ">=" => a >= b,
                    "=:=" => a == b,
                    _ => a != b,
                }
            }
            _ => return None,
        })
    }

    fn eval_arith(&self, t: &Term) -> Option<i64> {
        match t {
            Term::Int(i) => Some(*i),
            Term::Atom(a) if a.as_ref() == INPUT_LENGTH => Some(self.input_length),
            Term::Compound(name, args) => {
                let a = self.eval_arith(&args[0])?;
                if args.len() == 1 {
                    return match name.as_ref() {
                        "-" => Some(-a),
                        "+" => Some(a),
                        _ => None,
                    };
                }
                let b = self.eval_arith(args.get(1)?)?;
                match name.as_ref() {
                    "+" => a.checked_add(b),
                    "-" => a.checked_sub(b),
                    "*" => a.checked_mul(b),
                    "/" if b != 0 => Some(a.div_euclid(b)),
                    "^" if b >= 0 => a.checked_pow(b.try_into().ok()?),
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

/// One-way matching: binds pattern variables only; repeated pattern
/// variables must meet identical subterms.
pub(crate) fn match_pattern(pat: &Term, target: &Term, env: &mut Env) -> bool {
    match pat {
        Term::Var(v) => match env.get(&v.id()) {
            Some(t) => t == target,
            None => {
                env.insert(v.id(), target.clone());
                true
            }
        },
        Term::Compound(f, args) => match target {
            Term::Compound(g, targs) if f == g && args.len() == targs.len() => args
                .iter()
                .zip(targs.iter())
                .all(|(p, t)| match_pattern(p, t, env)),
            _ => false,
        },
        _ => pat == target,
    }
}

fn instantiate(t: &Term, env: &Env) -> Term {
    if env.is_empty() {
        return t.clone();
    }
    t.map_vars(&mut |v| env.get(&v.id()).cloned())
}

/// Applies the match to a rule body; unmatched variables become fresh per firing.
fn instantiate_goals(goals: &[Goal], env: &mut Env) -> Vec<Goal> {
    goals.iter().map(|g| instantiate_goal(g, env)).collect()
}

fn instantiate_goal(g: &Goal, env: &mut Env) -> Goal {
    let mut inst = |t: &Term| -> Term {
        t.map_vars(&mut |v| {
            Some(
                env.entry(v.id())
                    .or_insert_with(|| Term::Var(Var::fresh(v.name())))
                    .clone(),
            )
        })
    };
    match g {
        Goal::Constraint(t) => Goal::Constraint(inst(t)),
        Goal::Symbol(t) => Goal::Symbol(inst(t)),
        Goal::Unify(a, b) => Goal::Unify(inst(a), inst(b)),
        Goal::Dif(a, b) => Goal::Dif(inst(a), inst(b)),
        Goal::Test(t) => Goal::Test(inst(t)),
        Goal::Fail => Goal::Fail,
        Goal::True => Goal::True,
        Goal::Assume {
            op,
            term,
            timed,
            position,
        } => Goal::Assume {
            op: *op,
            term: inst(term),
            timed: *timed,
            position: position.as_ref().map(&mut inst),
        },
        Goal::NewIndex(t) => Goal::NewIndex(inst(t)),
        Goal::CopyAbducibles { from, to } => Goal::CopyAbducibles {
            from: from.iter().map(&mut inst).collect(),
            to: inst(to),
        },
        Goal::Disjunction(branches) => Goal::Disjunction(
            branches.iter().map(|b| instantiate_goals(b, env)).collect(),
        ),
        Goal::Transaction(gs) => Goal::Transaction(instantiate_goals(gs, env)),
    }
}
