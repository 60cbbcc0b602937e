//! The outer DPLL(T) loop: a parallel beam over the assignment tree with
//! clause learning, a restart policy, per-disjunct orchestration, and final
//! verdict assembly.
//!
//! Each batch of up to `n` frontier nodes is processed in parallel on private
//! state (BCP, optional stabilization, deduction, decision); learned clauses
//! and children are merged by a single coordinator at the batch barrier.
//! Nodes are never re-expanded: both children enqueue at expansion time, so
//! there is no backtracking.

use crate::bounds::NeuronBounds;
use crate::io::{Conjunction, VerificationProblem};
use crate::lp::{solve_with, LpOutcome};
use crate::sat::{
    analyze_conflict, bcp, boolean_abstraction, decide, Assignment, BcpResult, ClauseDb,
    DecideOutcome, GlobalConflict, ImplicationGraph, Literal, Reason,
};
use crate::theory::{deduce, stabilize, DeduceOutcome, StabilizeResult, TheoryConfig, TheoryCounters};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};
use thiserror::Error;

/// Strictness margin a counterexample must satisfy; boundary points are not
/// witnesses.
pub const WITNESS_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Beam width n: nodes processed per parallel batch.
    pub beam_width: usize,
    /// Neurons to attempt stabilizing per node (k).
    pub stabilize_k: usize,
    /// Stabilize only at depths below this.
    pub stabilize_max_depth: usize,
    pub restarts: bool,
    /// Restart once this many nodes were processed since the last restart.
    pub restart_node_limit: usize,
    /// Restart once the frontier grows beyond this.
    pub restart_frontier_limit: usize,
    pub seed: u64,
    /// Wall-clock budget; None runs to completion.
    pub timeout: Option<Duration>,
    /// Run the LP feasibility confirmation at every node.
    pub full_lp: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            beam_width: 4000,
            stabilize_k: 64,
            stabilize_max_depth: 4,
            restarts: true,
            restart_node_limit: 100_000,
            restart_frontier_limit: 10_000,
            seed: 0,
            timeout: None,
            full_lp: false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("beam width must be at least 1")]
    BeamWidth,
    #[error("restart limits must be at least 1")]
    RestartLimits,
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.beam_width < 1 {
            return Err(ConfigError::BeamWidth);
        }
        if self.restart_node_limit < 1 || self.restart_frontier_limit < 1 {
            return Err(ConfigError::RestartLimits);
        }
        Ok(())
    }

    fn theory(&self) -> TheoryConfig {
        TheoryConfig {
            full_lp: self.full_lp,
            ..TheoryConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Unsat,
    Sat {
        witness: Vec<f64>,
        output: Vec<f64>,
    },
    Unknown {
        reason: String,
    },
    Timeout,
}

impl Verdict {
    pub fn word(&self) -> &'static str {
        match self {
            Verdict::Unsat => "unsat",
            Verdict::Sat { .. } => "sat",
            Verdict::Unknown { .. } => "unknown",
            Verdict::Timeout => "timeout",
        }
    }
}

/// Per-phase cumulative worker time (sums across parallel workers, so it can
/// exceed wall time).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub bcp_ms: u64,
    pub stabilize_lp_ms: u64,
    pub deduce_ms: u64,
    pub conflict_ms: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_processed: u64,
    pub conflicts: u64,
    pub learned_clauses: u64,
    pub restarts: u64,
    pub stabilized: u64,
    pub implied_literals: u64,
    pub bcp_implications: u64,
    pub lp_solves: u64,
    pub max_depth: u64,
    pub sat_candidates: u64,
    pub wall_time_ms: u64,
    pub phase_times: PhaseTimes,
}

impl SearchStats {
    /// Discrete counters only: identical across repeated runs of the same
    /// (instance, config, seed); timings are excluded.
    pub fn discrete(&self) -> [u64; 10] {
        [
            self.nodes_processed,
            self.conflicts,
            self.learned_clauses,
            self.restarts,
            self.stabilized,
            self.implied_literals,
            self.bcp_implications,
            self.lp_solves,
            self.max_depth,
            self.sat_candidates,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult {
    pub verdict: Verdict,
    pub stats: SearchStats,
}

/// One pending node of the search tree.
#[derive(Debug, Clone)]
struct Node {
    sigma: Assignment,
    graph: ImplicationGraph,
    depth: usize,
    /// Bounds inherited from the parent's deduction; the child refines them.
    bounds: Option<Box<NeuronBounds>>,
    seq: u64,
}

/// Frontier of pending nodes. Priority: depth descending, then insertion
/// order — deterministic for a given seed.
struct Frontier {
    heap: BinaryHeap<FrontierEntry>,
    next_seq: u64,
}

struct FrontierEntry(Node);

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.0.depth == other.0.depth && self.0.seq == other.0.seq
    }
}
impl Eq for FrontierEntry {}
impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for FrontierEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0
            .depth
            .cmp(&other.0.depth)
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

impl Frontier {
    fn new() -> Self {
        Frontier {
            heap: BinaryHeap::new(),
            next_seq: 0,
        }
    }

    fn push(&mut self, mut node: Node) {
        node.seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(FrontierEntry(node));
    }

    fn len(&self) -> usize {
        self.heap.len()
    }

    fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Removes up to `n` nodes, deepest first, then insertion order.
    fn select(&mut self, n: usize) -> Vec<Node> {
        let mut batch = Vec::with_capacity(n.min(self.heap.len()));
        for _ in 0..n {
            match self.heap.pop() {
                Some(FrontierEntry(node)) => batch.push(node),
                None => break,
            }
        }
        batch
    }
}

/// Restart policy: too many nodes processed since the last restart, or the
/// frontier has grown past its limit.
pub fn should_restart(
    nodes_since_restart: u64,
    frontier_len: usize,
    config: &SearchConfig,
) -> bool {
    config.restarts
        && (nodes_since_restart > config.restart_node_limit as u64
            || frontier_len > config.restart_frontier_limit)
}

/// A counterexample must lie in the input box and violate the output
/// condition strictly: some disjunct of the negated output holds with every
/// slack greater than [`WITNESS_MARGIN`].
pub fn verify_witness(problem: &VerificationProblem, point: &[f64]) -> bool {
    if point.len() != problem.network.input_dim || !problem.property.contains_input(point) {
        return false;
    }
    match problem.network.infer(point) {
        Ok(y) => problem
            .property
            .negated_output
            .holds_with_margin(&y, WITNESS_MARGIN),
        Err(_) => false,
    }
}

enum NodeOutcome {
    /// Two children: decided literal first, its negation second.
    Children(Box<Node>, Box<Node>),
    /// Conflict clause to merge into the database.
    Learned(Vec<Literal>),
    /// Conflict with no decisions: the disjunct is unsat.
    GlobalUnsat,
    Sat {
        witness: Vec<f64>,
        output: Vec<f64>,
    },
    /// Complete assignment whose witness failed validation: learn the
    /// negation of the decisions and taint the disjunct (Unknown on
    /// exhaustion instead of Unsat).
    FailedWitness(Vec<Literal>),
    /// Witness validation failed with no decisions to negate: the whole
    /// disjunct is tainted and exhausted at once.
    GlobalUnknown,
    /// Deadline passed before the node was processed.
    Aborted,
}

struct NodeReport {
    outcome: NodeOutcome,
    conflicts: u64,
    stabilized: u64,
    implied: u64,
    bcp_implied: u64,
    lp_solves: u64,
    sat_candidates: u64,
    bcp_time: Duration,
    stabilize_time: Duration,
    deduce_time: Duration,
    conflict_time: Duration,
}

impl NodeReport {
    fn new(outcome: NodeOutcome) -> Self {
        NodeReport {
            outcome,
            conflicts: 0,
            stabilized: 0,
            implied: 0,
            bcp_implied: 0,
            lp_solves: 0,
            sat_candidates: 0,
            bcp_time: Duration::ZERO,
            stabilize_time: Duration::ZERO,
            deduce_time: Duration::ZERO,
            conflict_time: Duration::ZERO,
        }
    }
}

struct DisjunctContext<'a> {
    problem: &'a VerificationProblem,
    disjunct: &'a Conjunction,
    config: &'a SearchConfig,
    theory: TheoryConfig,
    deadline: Option<Instant>,
    decide_seed: u64,
    jitter: Option<Vec<f64>>,
}

fn process_node(ctx: &DisjunctContext<'_>, db: &ClauseDb, mut node: Node) -> NodeReport {
    if let Some(deadline) = ctx.deadline {
        if Instant::now() >= deadline {
            return NodeReport::new(NodeOutcome::Aborted);
        }
    }
    let mut report = NodeReport::new(NodeOutcome::Aborted); // outcome replaced below
    let net = &ctx.problem.network;

    // Boolean constraint propagation.
    let t0 = Instant::now();
    let before_bcp = node.sigma.assigned_count();
    let bcp_result = bcp(db, &mut node.sigma, &mut node.graph);
    report.bcp_implied = (node.sigma.assigned_count() - before_bcp) as u64;
    report.bcp_time = t0.elapsed();
    if let BcpResult::Conflict(_) = bcp_result {
        let t1 = Instant::now();
        report.conflicts += 1;
        report.outcome = match analyze_conflict(db, &node.sigma, &node.graph) {
            Ok(clause) => NodeOutcome::Learned(clause),
            Err(GlobalConflict) => NodeOutcome::GlobalUnsat,
        };
        report.conflict_time = t1.elapsed();
        return report;
    }

    let mut counters = TheoryCounters::default();

    // Theory conflict path shared by stabilize and deduce.
    macro_rules! theory_conflict {
        () => {{
            let t1 = Instant::now();
            report.conflicts += 1;
            report.outcome = match analyze_conflict(db, &node.sigma, &node.graph) {
                Ok(clause) => NodeOutcome::Learned(clause),
                Err(GlobalConflict) => NodeOutcome::GlobalUnsat,
            };
            report.conflict_time = t1.elapsed();
            report.lp_solves = counters.lp_solves;
            return report;
        }};
    }

    // Stabilize, guarded by the depth condition and at most once per node.
    if ctx.config.stabilize_k > 0 && node.depth < ctx.config.stabilize_max_depth {
        let t0 = Instant::now();
        let phases = node.sigma.to_phases(net);
        let base = match node.bounds.as_deref() {
            Some(prior) => crate::bounds::refine_bounds(
                net,
                &ctx.problem.property.input_box,
                &phases,
                prior,
            ),
            None => crate::bounds::relaxed_bounds(net, &ctx.problem.property.input_box, &phases),
        };
        let Ok(base) = base else {
            report.stabilize_time = t0.elapsed();
            theory_conflict!();
        };
        match stabilize(
            ctx.problem,
            &node.sigma,
            &base,
            ctx.config.stabilize_k,
            &ctx.theory,
            &mut counters,
        ) {
            StabilizeResult::Done(stab_report, bounds) => {
                report.stabilized += stab_report.newly_stable.len() as u64;
                for (id, _) in &stab_report.newly_stable {
                    let var = net.flat_index(*id);
                    let nb = bounds.get(*id);
                    let lit = if nb.pre_lo >= 0.0 {
                        Literal::pos(var)
                    } else {
                        Literal::neg(var)
                    };
                    if node.sigma.value(var).is_none() {
                        node.sigma.bind(lit, Reason::TheoryImplied);
                        node.graph
                            .record(lit, vec![], None, node.sigma.decision_level());
                    }
                }
                node.bounds = Some(bounds);
            }
            StabilizeResult::Conflict => {
                report.stabilize_time = t0.elapsed();
                theory_conflict!();
            }
        }
        report.stabilize_time = t0.elapsed();
    }

    // Deduce: feasibility of the current pattern.
    let t0 = Instant::now();
    let outcome = deduce(
        ctx.problem,
        &node.sigma,
        ctx.disjunct,
        node.bounds.as_deref(),
        &ctx.theory,
        &mut counters,
    );
    report.deduce_time = t0.elapsed();
    let bounds = match outcome {
        DeduceOutcome::Infeasible => theory_conflict!(),
        DeduceOutcome::Feasible { bounds, implied } => {
            report.implied += implied.len() as u64;
            for lit in implied {
                if node.sigma.value(lit.var).is_none() {
                    node.sigma.bind(lit, Reason::TheoryImplied);
                    node.graph
                        .record(lit, vec![], None, node.sigma.decision_level());
                }
            }
            bounds
        }
    };
    node.bounds = Some(bounds);
    report.lp_solves = counters.lp_solves;

    // Complete assignment: extract and validate a witness via the exact LP
    // (all phases fixed) maximizing the disjunct's worst slack.
    if node.sigma.is_complete() {
        report.sat_candidates += 1;
        let phases = node.sigma.to_phases(net);
        let bounds = node.bounds.as_deref().expect("deduce set bounds");
        let negated_decisions = || {
            node.sigma
                .decision_sequence()
                .iter()
                .map(|l| l.negated())
                .collect::<Vec<_>>()
        };
        match crate::lp::encode_relaxation(net, &ctx.problem.property.input_box, &phases, bounds) {
            Ok(mut rel) => {
                rel.add_max_margin_objective(ctx.disjunct);
                let t1 = Instant::now();
                let solved = solve_with(&rel.lp, &ctx.theory.lp);
                report.lp_solves += 1;
                report.deduce_time += t1.elapsed();
                match solved {
                    LpOutcome::Optimal { value, point } => {
                        if value <= WITNESS_MARGIN {
                            // Best achievable slack over the exact closed
                            // region is below the strictness margin: this
                            // pattern holds no counterexample.
                            theory_conflict!();
                        }
                        let mut x = rel.input_point(&point);
                        ctx.problem.property.clamp_input(&mut x);
                        if verify_witness(ctx.problem, &x) {
                            let output = net.infer(&x).expect("witness dims checked");
                            report.outcome = NodeOutcome::Sat { witness: x, output };
                            return report;
                        }
                        // The LP promised a margin the forward pass does not
                        // reproduce: block the pattern but taint the verdict.
                        report.outcome = if node.sigma.decision_sequence().is_empty() {
                            NodeOutcome::GlobalUnknown
                        } else {
                            NodeOutcome::FailedWitness(negated_decisions())
                        };
                        return report;
                    }
                    LpOutcome::Infeasible => theory_conflict!(),
                    LpOutcome::Unbounded | LpOutcome::IterLimit => {
                        report.outcome = if node.sigma.decision_sequence().is_empty() {
                            NodeOutcome::GlobalUnknown
                        } else {
                            NodeOutcome::FailedWitness(negated_decisions())
                        };
                        return report;
                    }
                }
            }
            Err(_) => {
                report.outcome = if node.sigma.decision_sequence().is_empty() {
                    NodeOutcome::GlobalUnknown
                } else {
                    NodeOutcome::FailedWitness(negated_decisions())
                };
                return report;
            }
        }
    }

    // Decide and enqueue both children.
    let bounds = node.bounds.as_deref().expect("deduce set bounds");
    match decide(
        net,
        bounds,
        &node.sigma,
        ctx.decide_seed,
        ctx.jitter.as_deref(),
    ) {
        DecideOutcome::AllAssigned => unreachable!("complete assignments handled above"),
        DecideOutcome::Chosen(lit) => {
            let make_child = |l: Literal| {
                let mut sigma = node.sigma.clone();
                let mut graph = node.graph.clone();
                sigma.bind(l, Reason::Decision);
                graph.record(l, vec![], None, sigma.decision_level());
                Node {
                    sigma,
                    graph,
                    depth: node.depth + 1,
                    bounds: node.bounds.clone(),
                    seq: 0, // assigned by the frontier
                }
            };
            report.outcome =
                NodeOutcome::Children(Box::new(make_child(lit)), Box::new(make_child(lit.negated())));
            report
        }
    }
}

enum DisjunctVerdict {
    Unsat,
    Sat { witness: Vec<f64>, output: Vec<f64> },
    Unknown,
    Timeout,
}

fn derive_jitter(seed: u64, restart_idx: u64, num_vars: usize) -> Option<Vec<f64>> {
    if restart_idx == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ restart_idx.wrapping_mul(0xa076_1d64_78bd_642f));
    Some((0..num_vars).map(|_| rng.gen_range(0.5..1.5)).collect())
}

fn verify_disjunct(
    problem: &VerificationProblem,
    disjunct: &Conjunction,
    config: &SearchConfig,
    deadline: Option<Instant>,
    stats: &mut SearchStats,
) -> DisjunctVerdict {
    let (num_vars, mut db) = boolean_abstraction(&problem.network);
    let mut restart_idx: u64 = 0;
    let mut tainted = false; // a failed witness forbids concluding Unsat
    // Restart cycles that learn nothing double the effective limits, so a
    // too-aggressive restart policy cannot cycle forever below the conflict
    // depth of an unsat instance.
    let mut stagnant_cycles: u32 = 0;

    'restart: loop {
        let learned_at_cycle_start = db.num_learned();
        let backoff = 1u64 << stagnant_cycles.min(20);
        let cycle_config = SearchConfig {
            restart_node_limit: config.restart_node_limit.saturating_mul(backoff as usize),
            restart_frontier_limit: config.restart_frontier_limit.saturating_mul(backoff as usize),
            ..config.clone()
        };
        let mut frontier = Frontier::new();
        frontier.push(Node {
            sigma: Assignment::new(num_vars),
            graph: ImplicationGraph::new(),
            depth: 0,
            bounds: None,
            seq: 0,
        });
        let mut nodes_since_restart: u64 = 0;
        let ctx = DisjunctContext {
            problem,
            disjunct,
            config,
            theory: config.theory(),
            deadline,
            decide_seed: config.seed ^ restart_idx.wrapping_mul(0x9e37_79b9_7f4a_7c15),
            jitter: derive_jitter(config.seed, restart_idx, num_vars),
        };

        loop {
            if frontier.is_empty() {
                return if tainted {
                    DisjunctVerdict::Unknown
                } else {
                    DisjunctVerdict::Unsat
                };
            }
            if let Some(d) = deadline {
                if Instant::now() >= d {
                    return DisjunctVerdict::Timeout;
                }
            }

            let batch = frontier.select(config.beam_width);
            let batch_len = batch.len() as u64;
            let reports: Vec<NodeReport> = if batch.len() == 1 {
                vec![process_node(&ctx, &db, batch.into_iter().next().unwrap())]
            } else {
                batch
                    .into_par_iter()
                    .map(|node| process_node(&ctx, &db, node))
                    .collect()
            };

            nodes_since_restart += batch_len;
            stats.nodes_processed += batch_len;

            // Merge at the barrier, in node order. A validated witness wins
            // over everything; a global conflict ends the disjunct.
            let mut global_unsat = false;
            let mut global_unknown = false;
            let mut aborted = false;
            for report in &reports {
                if let NodeOutcome::Sat { witness, output } = &report.outcome {
                    return DisjunctVerdict::Sat {
                        witness: witness.clone(),
                        output: output.clone(),
                    };
                }
                match &report.outcome {
                    NodeOutcome::GlobalUnsat => global_unsat = true,
                    NodeOutcome::GlobalUnknown => global_unknown = true,
                    NodeOutcome::Aborted => aborted = true,
                    _ => {}
                }
            }
            if aborted {
                return DisjunctVerdict::Timeout;
            }
            for report in reports {
                stats.conflicts += report.conflicts;
                stats.stabilized += report.stabilized;
                stats.implied_literals += report.implied;
                stats.bcp_implications += report.bcp_implied;
                stats.lp_solves += report.lp_solves;
                stats.sat_candidates += report.sat_candidates;
                stats.phase_times.bcp_ms += report.bcp_time.as_millis() as u64;
                stats.phase_times.stabilize_lp_ms += report.stabilize_time.as_millis() as u64;
                stats.phase_times.deduce_ms += report.deduce_time.as_millis() as u64;
                stats.phase_times.conflict_ms += report.conflict_time.as_millis() as u64;
                match report.outcome {
                    NodeOutcome::Children(first, second) => {
                        stats.max_depth = stats.max_depth.max(first.depth as u64);
                        frontier.push(*first);
                        frontier.push(*second);
                    }
                    NodeOutcome::Learned(clause) => {
                        if db.add_learned(clause).is_some() {
                            stats.learned_clauses += 1;
                        }
                    }
                    NodeOutcome::FailedWitness(clause) => {
                        tainted = true;
                        if db.add_learned(clause).is_some() {
                            stats.learned_clauses += 1;
                        }
                    }
                    NodeOutcome::GlobalUnsat
                    | NodeOutcome::GlobalUnknown
                    | NodeOutcome::Sat { .. }
                    | NodeOutcome::Aborted => {}
                }
            }
            if global_unknown {
                return DisjunctVerdict::Unknown;
            }
            if global_unsat {
                return if tainted {
                    DisjunctVerdict::Unknown
                } else {
                    DisjunctVerdict::Unsat
                };
            }

            if should_restart(nodes_since_restart, frontier.len(), &cycle_config) {
                stagnant_cycles = if db.num_learned() == learned_at_cycle_start {
                    stagnant_cycles + 1
                } else {
                    0
                };
                restart_idx += 1;
                stats.restarts += 1;
                continue 'restart;
            }
        }
    }
}

/// Verifies the problem: Unsat means the property holds; Sat carries a
/// concretely validated counterexample. Disjuncts of the negated output
/// condition are searched independently; the problem is Unsat only if every
/// disjunct is.
pub fn verify(problem: &VerificationProblem, config: &SearchConfig) -> VerifyResult {
    let started = Instant::now();
    let mut stats = SearchStats::default();
    let deadline = config.timeout.map(|t| started + t);
    let mut verdict = None;
    let mut any_unknown = false;

    for disjunct in &problem.property.negated_output.0 {
        match verify_disjunct(problem, disjunct, config, deadline, &mut stats) {
            DisjunctVerdict::Sat { witness, output } => {
                verdict = Some(Verdict::Sat { witness, output });
                break;
            }
            DisjunctVerdict::Timeout => {
                verdict = Some(Verdict::Timeout);
                break;
            }
            DisjunctVerdict::Unknown => any_unknown = true,
            DisjunctVerdict::Unsat => {}
        }
    }
    let verdict = verdict.unwrap_or(if any_unknown {
        Verdict::Unknown {
            reason: "a sat candidate failed witness validation and the frontier was exhausted"
                .into(),
        }
    } else {
        Verdict::Unsat
    });
    stats.wall_time_ms = started.elapsed().as_millis() as u64;
    VerifyResult { verdict, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{build_problem, parse_network, parse_property};

    fn problem(net_json: &str, prop_text: &str) -> VerificationProblem {
        let net = parse_network(net_json).unwrap();
        let prop = parse_property(prop_text).unwrap();
        build_problem(net, prop).unwrap()
    }

    fn quick_config() -> SearchConfig {
        SearchConfig {
            beam_width: 4,
            stabilize_k: 2,
            seed: 7,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn trivially_valid_property_is_unsat_without_decisions() {
        // y = ReLU(x) + 10 >= 10 > 5 on [-1, 1]; condition y >= 5 is valid,
        // so its negation is infeasible at the root.
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[10.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (>= Y_0 5.0))",
        );
        let result = verify(&p, &quick_config());
        assert_eq!(result.verdict, Verdict::Unsat);
        assert_eq!(result.stats.max_depth, 0);
    }

    #[test]
    fn violated_property_yields_validated_witness() {
        // y = ReLU(x): claim y <= 0.5 on [-1, 1] is falsified by x near 1.
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (<= Y_0 0.5))",
        );
        let result = verify(&p, &quick_config());
        match result.verdict {
            Verdict::Sat { witness, output } => {
                assert!(verify_witness(&p, &witness));
                assert_eq!(output, p.network.infer(&witness).unwrap());
                assert!(output[0] > 0.5 + WITNESS_MARGIN);
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn zero_hidden_neurons_is_one_lp_check() {
        let p = problem(
            r#"{"layers":[{"weights":[[1.0,1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 0.0))(assert (<= X_1 1.0))(assert (>= X_1 0.0))\
             (assert (>= Y_0 -1.0))",
        );
        // y = x0 + x1 in [0, 2]; y >= -1 is valid: unsat.
        let result = verify(&p, &quick_config());
        assert_eq!(result.verdict, Verdict::Unsat);
        assert_eq!(result.stats.nodes_processed, 1);
    }

    #[test]
    fn boundary_point_is_not_a_witness() {
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (<= Y_0 0.5))",
        );
        // Exactly on the negated-condition boundary y = 0.5: margin 0.
        assert!(!verify_witness(&p, &[0.5]));
        // Outside the box.
        assert!(!verify_witness(&p, &[2.0]));
        // Strictly violating.
        assert!(verify_witness(&p, &[0.9]));
    }

    #[test]
    fn select_takes_deepest_then_insertion_order() {
        let mut frontier = Frontier::new();
        for depth in [1usize, 3, 2, 3, 1] {
            frontier.push(Node {
                sigma: Assignment::new(0),
                graph: ImplicationGraph::new(),
                depth,
                bounds: None,
                seq: 0,
            });
        }
        let batch = frontier.select(3);
        let depths: Vec<usize> = batch.iter().map(|n| n.depth).collect();
        assert_eq!(depths, vec![3, 3, 2]);
        assert!(batch[0].seq < batch[1].seq);
        let rest = frontier.select(10);
        assert_eq!(rest.len(), 2);
    }

    #[test]
    fn should_restart_thresholds() {
        let mut config = SearchConfig {
            restart_node_limit: 100,
            restart_frontier_limit: 50,
            ..SearchConfig::default()
        };
        assert!(!should_restart(0, 0, &config));
        assert!(should_restart(101, 0, &config));
        assert!(should_restart(0, 51, &config));
        assert!(!should_restart(100, 50, &config));
        config.restarts = false;
        assert!(!should_restart(101, 51, &config));
    }

    #[test]
    fn config_validation() {
        let mut c = SearchConfig::default();
        c.beam_width = 0;
        assert_eq!(c.validate(), Err(ConfigError::BeamWidth));
        let mut c = SearchConfig::default();
        c.restart_node_limit = 0;
        assert_eq!(c.validate(), Err(ConfigError::RestartLimits));
        assert!(SearchConfig::default().validate().is_ok());
    }

    #[test]
    fn determinism_same_seed_same_stats() {
        let p = problem(
            r#"{"layers":[{"weights":[[0.7,-0.4],[0.3,0.8]],"biases":[0.1,-0.2]},
                          {"weights":[[0.5,-0.6],[-0.7,0.2]],"biases":[0.05,0.0]},
                          {"weights":[[1.0,-1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.5))(assert (>= X_0 -1.5))(assert (<= X_1 1.0))(assert (>= X_1 -1.0))\
             (assert (>= Y_0 -0.35))",
        );
        let config = quick_config();
        let a = verify(&p, &config);
        let b = verify(&p, &config);
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.stats.discrete(), b.stats.discrete());
    }
}
