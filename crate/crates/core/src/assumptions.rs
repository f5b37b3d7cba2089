//! Hypotheses and expectations.
//!
//! A hypothesis `=+h` (consumed once) or `=*h` (reusable) waits in the store
//! until an expectation `=-e` unifies with it. Resolution is eager: an
//! expectation tries the oldest eligible hypothesis when it arrives and
//! whenever a new hypothesis appears. Each pairing is a choice point whose
//! alternative records the pair as tried and looks again, so an expectation
//! with no untried candidate simply stays pending.
//!
//! Timed forms `+h`, `*h`, `-e` carry word boundaries: a hypothesis is born
//! at the right boundary of the node that made it, an expectation sits at the
//! left boundary of its node, and a pairing needs birth =< position.

use crate::compiler::{AssumeOp, ConstraintKind};
use crate::engine::{Alternative, AssumptionInfo, Derivation, Task};
use crate::term::Term;

impl Derivation<'_> {
    pub(crate) fn add_assumption(&mut self, op: AssumeOp, term: Term, timed: bool, position: Option<Term>) {
        let position = match position {
            Some(p) => self.resolve(&p).as_int(),
            None => Some(self.frontier),
        };
        let info = AssumptionInfo { op, timed, position };
        let wrapped = Term::compound(op.symbol(timed), vec![term]);
        if op == AssumeOp::Expectation {
            let n = self.store.len();
            self.goals.push(Task::Resolve(n));
            self.add_constraint(wrapped, None, Some(info));
        } else {
            let pending: Vec<usize> = self.expectation_ids();
            for e in pending.into_iter().rev() {
                self.goals.push(Task::Resolve(e));
            }
            self.add_constraint(wrapped, None, Some(info));
        }
    }

    fn expectation_ids(&self) -> Vec<usize> {
        self.store
            .iter()
            .filter(|c| c.alive && c.kind == ConstraintKind::Expectation)
            .map(|c| c.id)
            .collect()
    }

    fn eligible(&self, e: usize, h: usize) -> bool {
        let (Some(ei), Some(hi)) = (&self.store[e].assumption, &self.store[h].assumption) else {
            return false;
        };
        if !(ei.timed || hi.timed) {
            return true;
        }
        match (ei.position, hi.position) {
            (Some(p), Some(b)) => b <= p,
            _ => true,
        }
    }

    /// Pairs expectation `e` with its oldest eligible untried hypothesis.
    pub(crate) fn resolve_expectation(&mut self, e: usize) -> bool {
        if !self.store[e].alive {
            return true;
        }
        let expected = self.term_of(e).args()[0].clone();
        let candidate = self
            .store
            .iter()
            .filter(|c| c.alive && c.kind == ConstraintKind::Hypothesis)
            .map(|c| c.id)
            .find(|&h| {
                !self.tried.contains(&(e, h))
                    && self.eligible(e, h)
                    && self.subst.unifiable(&expected, &self.term_of(h).args()[0])
            });
        let Some(h) = candidate else {
            return true;
        };
        self.push_choice(
            Alternative::Unpair {
                expectation: e,
                hypothesis: h,
            },
            None,
        );
        let offered = self.term_of(h).args()[0].clone();
        self.kill(e);
        if self.store[h].assumption.as_ref().is_some_and(|i| i.op == AssumeOp::Linear) {
            self.kill(h);
        }
        self.unify(&expected, &offered)
    }

    /// Unresolved expectations, bindings applied.
    pub fn pending_expectations(&self) -> Vec<Term> {
        self.expectation_ids().into_iter().map(|e| self.term_of(e)).collect()
    }

    /// Live hypotheses, bindings applied.
    pub fn hypotheses(&self) -> Vec<Term> {
        self.alive()
            .filter(|c| c.kind == ConstraintKind::Hypothesis)
            .map(|c| self.term_of(c.id))
            .collect()
    }
}
