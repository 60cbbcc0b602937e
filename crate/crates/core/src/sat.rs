//! Propositional machinery of DPLL(T): status variables for neuron phases,
//! the clause database, BCP with an implication graph, conflict analysis,
//! and the decision heuristic.
//!
//! Variables are flat hidden-neuron indices (see [`Network::flat_index`]);
//! positive polarity means Active.

use crate::bounds::{NeuronBounds, Phase, PhaseAssignment};
use crate::net::Network;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Self {
        Literal {
            var,
            positive: false,
        }
    }

    pub fn negated(self) -> Self {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }

    /// Positive literals assert the Active phase.
    pub fn phase(self) -> Phase {
        if self.positive {
            Phase::Active
        } else {
            Phase::Inactive
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "v{}", self.var)
        } else {
            write!(f, "!v{}", self.var)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseOrigin {
    Initial,
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub literals: Vec<Literal>,
    pub origin: ClauseOrigin,
}

impl Clause {
    /// Sorted, deduplicated literal set.
    fn canonical(mut lits: Vec<Literal>) -> Vec<Literal> {
        lits.sort();
        lits.dedup();
        lits
    }

    pub fn is_tautology(&self) -> bool {
        self.literals
            .windows(2)
            .any(|w| w[0].var == w[1].var && w[0].positive != w[1].positive)
    }
}

/// Append-only clause database with a per-variable occurrence index.
/// Tautologies are stored for parity with the initial `v ∨ !v` clauses but
/// excluded from the index, so BCP never touches them.
#[derive(Debug, Clone)]
pub struct ClauseDb {
    clauses: Vec<Clause>,
    occurrence: Vec<Vec<usize>>,
    seen: HashSet<Vec<Literal>>,
    num_initial: usize,
}

impl ClauseDb {
    pub fn new(num_vars: usize) -> Self {
        ClauseDb {
            clauses: Vec::new(),
            occurrence: vec![Vec::new(); num_vars],
            seen: HashSet::new(),
            num_initial: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.occurrence.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, idx: usize) -> &Clause {
        &self.clauses[idx]
    }

    pub fn num_learned(&self) -> usize {
        self.clauses.len() - self.num_initial
    }

    pub fn learned(&self) -> impl Iterator<Item = &Clause> {
        self.clauses
            .iter()
            .filter(|c| c.origin == ClauseOrigin::Learned)
    }

    fn push(&mut self, clause: Clause) -> usize {
        let idx = self.clauses.len();
        if !clause.is_tautology() {
            for lit in &clause.literals {
                self.occurrence[lit.var].push(idx);
            }
        }
        self.seen.insert(clause.literals.clone());
        self.clauses.push(clause);
        idx
    }

    fn add_initial(&mut self, lits: Vec<Literal>) {
        let lits = Clause::canonical(lits);
        self.push(Clause {
            literals: lits,
            origin: ClauseOrigin::Initial,
        });
        self.num_initial += 1;
    }

    /// Adds a learned clause unless an identical one is already present.
    /// Returns its index when added.
    pub fn add_learned(&mut self, lits: Vec<Literal>) -> Option<usize> {
        let lits = Clause::canonical(lits);
        debug_assert!(!lits.is_empty(), "empty learned clause is a global conflict");
        if self.seen.contains(&lits) {
            return None;
        }
        Some(self.push(Clause {
            literals: lits,
            origin: ClauseOrigin::Learned,
        }))
    }

    fn occurrences(&self, var: usize) -> &[usize] {
        &self.occurrence[var]
    }
}

/// One variable per hidden neuron plus the initial `v ∨ !v` clauses.
pub fn boolean_abstraction(net: &Network) -> (usize, ClauseDb) {
    let num_vars = net.num_hidden_neurons();
    let mut db = ClauseDb::new(num_vars);
    for v in 0..num_vars {
        db.add_initial(vec![Literal::pos(v), Literal::neg(v)]);
    }
    (num_vars, db)
}

/// Why a variable is bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    Decision,
    /// Forced by a unit clause (index into the [`ClauseDb`]).
    Implied(usize),
    /// Proven by the theory solver (bound tightening / stability).
    TheoryImplied,
}

#[derive(Debug, Clone, Copy)]
pub struct Binding {
    pub value: bool,
    pub reason: Reason,
    /// Number of decisions at bind time.
    pub level: usize,
    /// Position in the trail.
    pub order: usize,
}

/// Partial truth assignment over status variables, with one reason per
/// binding and the ordered decision sequence.
#[derive(Debug, Clone)]
pub struct Assignment {
    bindings: Vec<Option<Binding>>,
    trail: Vec<Literal>,
    decisions: Vec<Literal>,
}

impl Assignment {
    pub fn new(num_vars: usize) -> Self {
        Assignment {
            bindings: vec![None; num_vars],
            trail: Vec::new(),
            decisions: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.bindings.len()
    }

    pub fn value(&self, var: usize) -> Option<bool> {
        self.bindings[var].map(|b| b.value)
    }

    pub fn binding(&self, var: usize) -> Option<&Binding> {
        self.bindings[var].as_ref()
    }

    /// Some(true): satisfied; Some(false): falsified; None: unassigned.
    pub fn literal_status(&self, lit: Literal) -> Option<bool> {
        self.value(lit.var).map(|v| v == lit.positive)
    }

    pub fn assigned_count(&self) -> usize {
        self.trail.len()
    }

    pub fn is_complete(&self) -> bool {
        self.trail.len() == self.bindings.len()
    }

    pub fn trail(&self) -> &[Literal] {
        &self.trail
    }

    pub fn decision_sequence(&self) -> &[Literal] {
        &self.decisions
    }

    pub fn decision_level(&self) -> usize {
        self.decisions.len()
    }

    /// Binds a literal to true. Panics if the variable is already bound;
    /// callers check status first.
    pub fn bind(&mut self, lit: Literal, reason: Reason) {
        assert!(
            self.bindings[lit.var].is_none(),
            "variable {} bound twice",
            lit.var
        );
        if reason == Reason::Decision {
            self.decisions.push(lit);
        }
        self.bindings[lit.var] = Some(Binding {
            value: lit.positive,
            reason,
            level: self.decisions.len(),
            order: self.trail.len(),
        });
        self.trail.push(lit);
    }

    /// Phase constraints encoded by the current assignment.
    pub fn to_phases(&self, net: &Network) -> PhaseAssignment {
        let mut phases = PhaseAssignment::empty(net);
        for lit in &self.trail {
            phases.set(net.neuron_at(lit.var), lit.phase());
        }
        phases
    }
}

/// Node of the implication graph: a bound literal with its antecedents and
/// the implying clause (None for decisions and theory implications).
#[derive(Debug, Clone)]
pub struct GraphNode {
    pub literal: Literal,
    pub antecedents: Vec<Literal>,
    pub clause: Option<usize>,
    pub level: usize,
}

#[derive(Debug, Clone)]
pub struct ConflictNode {
    pub clause: usize,
    pub antecedents: Vec<Literal>,
    pub level: usize,
}

/// DAG recording each implied literal's antecedents; edges always point from
/// earlier trail positions to later ones, so it is acyclic by construction.
#[derive(Debug, Clone, Default)]
pub struct ImplicationGraph {
    pub nodes: Vec<GraphNode>,
    pub conflict: Option<ConflictNode>,
}

impl ImplicationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(
        &mut self,
        literal: Literal,
        antecedents: Vec<Literal>,
        clause: Option<usize>,
        level: usize,
    ) {
        self.nodes.push(GraphNode {
            literal,
            antecedents,
            clause,
            level,
        });
    }

    pub fn record_conflict(&mut self, clause: usize, antecedents: Vec<Literal>, level: usize) {
        self.conflict = Some(ConflictNode {
            clause,
            antecedents,
            level,
        });
    }

    /// Checks the DAG property: every antecedent was recorded before its
    /// consequence. Decision nodes have no antecedents.
    pub fn is_acyclic(&self) -> bool {
        let mut seen: HashSet<Literal> = HashSet::new();
        for node in &self.nodes {
            if node.antecedents.iter().any(|a| !seen.contains(a)) {
                return false;
            }
            seen.insert(node.literal);
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcpResult {
    Consistent,
    /// Index of the falsified clause.
    Conflict(usize),
}

/// Boolean constraint propagation to fixpoint: binds the forced literal of
/// every unit clause with reason `Implied`, recording graph edges from the
/// falsified antecedents; returns the first falsified clause as a conflict.
pub fn bcp(db: &ClauseDb, sigma: &mut Assignment, graph: &mut ImplicationGraph) -> BcpResult {
    let mut queue: Vec<usize> = (0..db.clauses().len())
        .filter(|&i| !db.clause(i).is_tautology())
        .collect();
    queue.reverse(); // pop() processes clauses in database order
    let mut pending: HashSet<usize> = queue.iter().copied().collect();

    while let Some(idx) = queue.pop() {
        pending.remove(&idx);
        let clause = db.clause(idx);
        let mut unassigned = None;
        let mut satisfied = false;
        let mut n_unassigned = 0;
        for &lit in &clause.literals {
            match sigma.literal_status(lit) {
                Some(true) => {
                    satisfied = true;
                    break;
                }
                Some(false) => {}
                None => {
                    n_unassigned += 1;
                    unassigned = Some(lit);
                }
            }
        }
        if satisfied {
            continue;
        }
        match (n_unassigned, unassigned) {
            (0, _) => {
                let antecedents: Vec<Literal> =
                    clause.literals.iter().map(|l| l.negated()).collect();
                graph.record_conflict(idx, antecedents, sigma.decision_level());
                return BcpResult::Conflict(idx);
            }
            (1, Some(forced)) => {
                let antecedents: Vec<Literal> = clause
                    .literals
                    .iter()
                    .filter(|l| l.var != forced.var)
                    .map(|l| l.negated())
                    .collect();
                sigma.bind(forced, Reason::Implied(idx));
                graph.record(forced, antecedents, Some(idx), sigma.decision_level());
                for &other in db.occurrences(forced.var) {
                    if other != idx && pending.insert(other) {
                        queue.push(other);
                    }
                }
            }
            _ => {}
        }
    }
    BcpResult::Consistent
}

/// Signals a conflict with no decisions to blame: the disjunct is
/// unsatisfiable outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalConflict;

/// Learns a conflict clause.
///
/// With a conflict node in the graph, walks resolution backward from the
/// conflicting clause until exactly one literal of the conflict's decision
/// level remains (first UIP). Decisions and theory-implied literals terminate
/// the walk. Without a conflict node the assignment was declared
/// theory-infeasible and the clause is the negation of the decision sequence.
pub fn analyze_conflict(
    db: &ClauseDb,
    sigma: &Assignment,
    graph: &ImplicationGraph,
) -> Result<Vec<Literal>, GlobalConflict> {
    let Some(conflict) = &graph.conflict else {
        if sigma.decision_sequence().is_empty() {
            return Err(GlobalConflict);
        }
        return Ok(sigma
            .decision_sequence()
            .iter()
            .map(|l| l.negated())
            .collect());
    };

    let level = conflict.level;
    let mut clause: HashSet<Literal> =
        db.clause(conflict.clause).literals.iter().copied().collect();
    loop {
        if clause.is_empty() {
            return Err(GlobalConflict);
        }
        let at_level: Vec<Literal> = clause
            .iter()
            .copied()
            .filter(|l| sigma.binding(l.var).map(|b| b.level) == Some(level))
            .collect();
        if at_level.len() <= 1 {
            break;
        }
        // Most recently bound literal at the conflict level whose binding has
        // a clause reason; decisions and theory implications stay in place.
        let target = at_level
            .iter()
            .copied()
            .filter_map(|l| {
                let b = sigma.binding(l.var)?;
                match b.reason {
                    Reason::Implied(c) => Some((b.order, l, c)),
                    _ => None,
                }
            })
            .max_by_key(|(order, _, _)| *order);
        let Some((_, lit, reason_idx)) = target else {
            break;
        };
        clause.remove(&lit);
        for &other in &db.clause(reason_idx).literals {
            if other.var != lit.var {
                clause.insert(other);
            }
        }
    }
    if clause.is_empty() {
        return Err(GlobalConflict);
    }
    let mut lits: Vec<Literal> = clause.into_iter().collect();
    lits.sort();
    Ok(lits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecideOutcome {
    Chosen(Literal),
    AllAssigned,
}

/// Picks the unassigned neuron maximizing
/// `min(|pre_lo|, |pre_hi|) * (pre_hi - pre_lo)` — widest, most balanced
/// instability — with polarity from the seeded RNG. `jitter` perturbs scores
/// after restarts so decision order changes between runs.
pub fn decide(
    net: &Network,
    bounds: &NeuronBounds,
    sigma: &Assignment,
    rng_seed: u64,
    jitter: Option<&[f64]>,
) -> DecideOutcome {
    let mut best: Option<(f64, usize)> = None;
    for var in 0..sigma.num_vars() {
        if sigma.value(var).is_some() {
            continue;
        }
        let nb = bounds.get(net.neuron_at(var));
        let mut score = nb.pre_lo.abs().min(nb.pre_hi.abs()) * nb.width();
        if let Some(j) = jitter {
            score *= j[var];
        }
        match best {
            Some((s, _)) if score <= s => {}
            _ => best = Some((score, var)),
        }
    }
    match best {
        None => DecideOutcome::AllAssigned,
        Some((_, var)) => {
            let mut rng =
                ChaCha8Rng::seed_from_u64(rng_seed ^ (var as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let positive = rng.gen_bool(0.5);
            DecideOutcome::Chosen(Literal { var, positive })
        }
    }
}
