//! Independent brute-force reference verifier and falsifier.
//!
//! Enumerates all 2^N activation patterns; each pattern fixes the network to
//! an affine function whose region is checked exactly by LP. Shares only the
//! LP kernel with the search path — no DPLL, no abstraction. Variable boxes
//! come from a crude local magnitude cap, not from the bounds module.

use crate::io::{Conjunction, VerificationProblem};
use crate::lp::{solve_with, LinearProgram, LpOutcome, LpTolerances, Relation, Sense};
use crate::net::Network;
use crate::search::{verify_witness, Verdict, WITNESS_MARGIN};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Hard cap: enumeration is exponential in the number of hidden neurons.
pub const NEURON_CAP: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{0} hidden neurons exceed the enumeration cap of {NEURON_CAP}")]
    TooManyNeurons(usize),
}

/// Outcome of one fully fixed activation pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum PatternOutcome {
    /// The pattern's region does not intersect the input box.
    RegionEmpty,
    /// The region is reachable but contains no validated counterexample.
    PropertyHolds,
    CounterexampleFound(Vec<f64>),
}

/// All 2^N pattern outcomes, indexed by bitmask (bit v set = neuron v active).
#[derive(Debug, Clone, PartialEq)]
pub struct PatternEnumeration {
    pub outcomes: Vec<PatternOutcome>,
}

impl PatternEnumeration {
    pub fn total(&self) -> usize {
        self.outcomes.len()
    }

    pub fn first_counterexample(&self) -> Option<&[f64]> {
        self.outcomes.iter().find_map(|o| match o {
            PatternOutcome::CounterexampleFound(x) => Some(x.as_slice()),
            _ => None,
        })
    }
}

/// Crude per-layer magnitude caps: |z| <= sum |w| * cap_prev + |b|. Purely
/// local arithmetic, independent of the abstraction module.
fn magnitude_caps(net: &Network, input_box: &[(f64, f64)]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut prev: Vec<f64> = input_box
        .iter()
        .map(|(lo, hi)| lo.abs().max(hi.abs()))
        .collect();
    let mut hidden_caps = Vec::new();
    for layer in net.hidden_layers() {
        let caps: Vec<f64> = layer
            .weights
            .iter()
            .zip(&layer.biases)
            .map(|(row, b)| {
                row.iter()
                    .zip(&prev)
                    .map(|(w, p)| w.abs() * p)
                    .sum::<f64>()
                    + b.abs()
            })
            .collect();
        prev = caps.clone(); // post-activation magnitude never exceeds |z|
        hidden_caps.push(caps);
    }
    let out_caps = match net.layers.last() {
        Some(layer) => layer
            .weights
            .iter()
            .zip(&layer.biases)
            .map(|(row, b)| {
                row.iter()
                    .zip(&prev)
                    .map(|(w, p)| w.abs() * p)
                    .sum::<f64>()
                    + b.abs()
            })
            .collect(),
        None => Vec::new(),
    };
    (hidden_caps, out_caps)
}

struct PatternLp {
    lp: LinearProgram,
    x_vars: Vec<usize>,
    y_vars: Vec<usize>,
}

/// Exact encoding of one pattern: all phases fixed, the network is affine.
fn encode_pattern(
    net: &Network,
    input_box: &[(f64, f64)],
    pattern: usize,
    hidden_caps: &[Vec<f64>],
    out_caps: &[f64],
) -> PatternLp {
    let hidden = net.hidden_layers();
    let n_hidden: usize = hidden.iter().map(|l| l.out_dim()).sum();
    let num_vars = net.input_dim + 2 * n_hidden + net.output_dim();
    let mut lp = LinearProgram::new(num_vars);

    let x_vars: Vec<usize> = (0..net.input_dim).collect();
    for (i, &xv) in x_vars.iter().enumerate() {
        lp.set_bounds(xv, input_box[i].0, input_box[i].1);
    }
    let mut next = net.input_dim;
    let mut z_vars: Vec<Vec<usize>> = Vec::new();
    let mut h_vars: Vec<Vec<usize>> = Vec::new();
    for layer in hidden {
        let z: Vec<usize> = (0..layer.out_dim()).map(|j| next + j).collect();
        next += layer.out_dim();
        let h: Vec<usize> = (0..layer.out_dim()).map(|j| next + j).collect();
        next += layer.out_dim();
        z_vars.push(z);
        h_vars.push(h);
    }
    let y_vars: Vec<usize> = (0..net.output_dim()).map(|j| next + j).collect();

    let mut flat = 0usize;
    for (li, layer) in hidden.iter().enumerate() {
        for ni in 0..layer.out_dim() {
            let zv = z_vars[li][ni];
            let hv = h_vars[li][ni];
            let cap = hidden_caps[li][ni];
            let mut terms: Vec<(usize, f64)> = vec![(zv, 1.0)];
            let prev: &[usize] = if li == 0 { &x_vars } else { &h_vars[li - 1] };
            for (k, &w) in layer.weights[ni].iter().enumerate() {
                terms.push((prev[k], -w));
            }
            lp.add_terms(&terms, Relation::Eq, layer.biases[ni]);
            if pattern & (1 << flat) != 0 {
                // Active: z >= 0, zhat = z.
                lp.set_bounds(zv, 0.0, cap);
                lp.set_bounds(hv, 0.0, cap);
                lp.add_terms(&[(hv, 1.0), (zv, -1.0)], Relation::Eq, 0.0);
            } else {
                // Inactive: z <= 0, zhat = 0.
                lp.set_bounds(zv, -cap, 0.0);
                lp.set_bounds(hv, 0.0, 0.0);
            }
            flat += 1;
        }
    }
    if let Some(out_layer) = net.layers.last() {
        let prev: &[usize] = match h_vars.len() {
            0 => &x_vars,
            n => &h_vars[n - 1],
        };
        for (oi, &yv) in y_vars.iter().enumerate() {
            let mut terms: Vec<(usize, f64)> = vec![(yv, 1.0)];
            for (k, &w) in out_layer.weights[oi].iter().enumerate() {
                terms.push((prev[k], -w));
            }
            lp.add_terms(&terms, Relation::Eq, out_layer.biases[oi]);
            lp.set_bounds(yv, -out_caps[oi], out_caps[oi]);
        }
    }
    PatternLp { lp, x_vars, y_vars }
}

/// Adds the disjunct rows with a free margin variable `t` (`c.y + t <= d`)
/// and maximizes `t`: the optimum is the deepest-interior violation margin.
fn with_max_margin(base: &PatternLp, disjunct: &Conjunction) -> LinearProgram {
    let mut lp = base.lp.clone();
    let t = lp.num_vars();
    lp.lower.push(f64::NEG_INFINITY);
    lp.upper.push(f64::INFINITY);
    lp.objective.push(0.0);
    for row in &mut lp.rows {
        row.coeffs.push(0.0);
    }
    for ineq in disjunct {
        let mut terms: Vec<(usize, f64)> = ineq
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, &c)| (base.y_vars[i], c))
            .collect();
        terms.push((t, 1.0));
        lp.add_terms(&terms, Relation::Le, ineq.rhs);
    }
    lp.set_objective_terms(&[(t, 1.0)], Sense::Maximize);
    lp
}

fn pattern_outcome(
    problem: &VerificationProblem,
    pattern: usize,
    hidden_caps: &[Vec<f64>],
    out_caps: &[f64],
) -> PatternOutcome {
    let net = &problem.network;
    let tol = LpTolerances::default();
    let base = encode_pattern(net, &problem.property.input_box, pattern, hidden_caps, out_caps);
    match solve_with(&base.lp, &tol) {
        LpOutcome::Infeasible => return PatternOutcome::RegionEmpty,
        LpOutcome::Optimal { .. } => {}
        // Boxes make the region bounded; treat solver failure as reachable.
        LpOutcome::Unbounded | LpOutcome::IterLimit => {}
    }
    for disjunct in &problem.property.negated_output.0 {
        let lp = with_max_margin(&base, disjunct);
        if let LpOutcome::Optimal { value, point } = solve_with(&lp, &tol) {
            if value > WITNESS_MARGIN {
                let mut x: Vec<f64> = base.x_vars.iter().map(|&v| point[v]).collect();
                problem.property.clamp_input(&mut x);
                if verify_witness(problem, &x) {
                    return PatternOutcome::CounterexampleFound(x);
                }
            }
        }
    }
    PatternOutcome::PropertyHolds
}

/// Enumerates every activation pattern. Deterministic: patterns are indexed
/// by bitmask and outcomes are reduced in index order.
pub fn enumerate_patterns(
    problem: &VerificationProblem,
) -> Result<PatternEnumeration, OracleError> {
    let n = problem.network.num_hidden_neurons();
    if n > NEURON_CAP {
        return Err(OracleError::TooManyNeurons(n));
    }
    let (hidden_caps, out_caps) = magnitude_caps(&problem.network, &problem.property.input_box);
    let outcomes: Vec<PatternOutcome> = (0usize..1 << n)
        .into_par_iter()
        .map(|pattern| pattern_outcome(problem, pattern, &hidden_caps, &out_caps))
        .collect();
    Ok(PatternEnumeration { outcomes })
}

/// Reference verdict by exhaustive pattern enumeration: Sat with the first
/// validated LP witness in pattern order, Unsat otherwise.
pub fn enumerate_verify(problem: &VerificationProblem) -> Result<Verdict, OracleError> {
    let n = problem.network.num_hidden_neurons();
    if n > NEURON_CAP {
        return Err(OracleError::TooManyNeurons(n));
    }
    let (hidden_caps, out_caps) = magnitude_caps(&problem.network, &problem.property.input_box);
    let found = (0usize..1 << n)
        .into_par_iter()
        .find_map_first(|pattern| {
            match pattern_outcome(problem, pattern, &hidden_caps, &out_caps) {
                PatternOutcome::CounterexampleFound(x) => Some(x),
                _ => None,
            }
        });
    Ok(match found {
        Some(witness) => {
            let output = problem.network.infer(&witness).expect("witness dims");
            Verdict::Sat { witness, output }
        }
        None => Verdict::Unsat,
    })
}

/// True iff some pattern's closed-region violation margin exceeds
/// `threshold`. Early-exits, so it is much cheaper than [`best_margin`] on
/// satisfiable instances; the boolean is deterministic regardless of the
/// parallel search order.
pub fn margin_exceeds(
    problem: &VerificationProblem,
    threshold: f64,
) -> Result<bool, OracleError> {
    let n = problem.network.num_hidden_neurons();
    if n > NEURON_CAP {
        return Err(OracleError::TooManyNeurons(n));
    }
    let (hidden_caps, out_caps) = magnitude_caps(&problem.network, &problem.property.input_box);
    let tol = LpTolerances::default();
    let found = (0usize..1 << n).into_par_iter().any(|pattern| {
        let base = encode_pattern(
            &problem.network,
            &problem.property.input_box,
            pattern,
            &hidden_caps,
            &out_caps,
        );
        problem.property.negated_output.0.iter().any(|disjunct| {
            let lp = with_max_margin(&base, disjunct);
            matches!(solve_with(&lp, &tol), LpOutcome::Optimal { value, .. } if value > threshold)
        })
    });
    Ok(found)
}

/// Best closed-region violation margin across all patterns and disjuncts
/// (negative infinity when every region excludes the disjuncts entirely).
/// Used by the benchmark generator to keep labels unambiguous.
pub fn best_margin(problem: &VerificationProblem) -> Result<f64, OracleError> {
    let n = problem.network.num_hidden_neurons();
    if n > NEURON_CAP {
        return Err(OracleError::TooManyNeurons(n));
    }
    let (hidden_caps, out_caps) = magnitude_caps(&problem.network, &problem.property.input_box);
    let tol = LpTolerances::default();
    let margin = (0usize..1 << n)
        .into_par_iter()
        .map(|pattern| {
            let base = encode_pattern(
                &problem.network,
                &problem.property.input_box,
                pattern,
                &hidden_caps,
                &out_caps,
            );
            let mut best = f64::NEG_INFINITY;
            for disjunct in &problem.property.negated_output.0 {
                let lp = with_max_margin(&base, disjunct);
                if let LpOutcome::Optimal { value, .. } = solve_with(&lp, &tol) {
                    best = best.max(value);
                }
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(margin)
}

/// Uniform sampling in the box: returns the first strict violator of the
/// output condition, if any.
pub fn sample_falsify(problem: &VerificationProblem, trials: usize, seed: u64) -> Option<Vec<f64>> {
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let box_ = &problem.property.input_box;
    for _ in 0..trials {
        let x: Vec<f64> = box_
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo } else { rng.gen_range(lo..=hi) })
            .collect();
        if verify_witness(problem, &x) {
            return Some(x);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{build_problem, parse_network, parse_property};

    fn problem(net_json: &str, prop: &str) -> VerificationProblem {
        build_problem(parse_network(net_json).unwrap(), parse_property(prop).unwrap()).unwrap()
    }

    #[test]
    fn zero_hidden_neurons_is_single_lp_check() {
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (>= Y_0 -2.0))",
        );
        let e = enumerate_patterns(&p).unwrap();
        assert_eq!(e.total(), 1);
        assert_eq!(enumerate_verify(&p).unwrap(), Verdict::Unsat);
    }

    #[test]
    fn finds_counterexample_when_property_false() {
        // y = ReLU(x); claim y <= 0.5 on [-1, 1] fails for x > 0.5.
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (<= Y_0 0.5))",
        );
        match enumerate_verify(&p).unwrap() {
            Verdict::Sat { witness, .. } => assert!(verify_witness(&p, &witness)),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn neuron_cap_is_enforced() {
        let weights: Vec<Vec<f64>> = (0..17).map(|_| vec![1.0]).collect();
        let p = problem(
            &format!(
                r#"{{"layers":[{{"weights":{},"biases":{}}},{{"weights":[[{}]],"biases":[0.0]}}]}}"#,
                serde_json::to_string(&weights).unwrap(),
                serde_json::to_string(&vec![0.0; 17]).unwrap(),
                vec!["1.0"; 17].join(","),
            ),
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (>= Y_0 0.0))",
        );
        assert_eq!(
            enumerate_verify(&p).unwrap_err(),
            OracleError::TooManyNeurons(17)
        );
    }

    #[test]
    fn enumeration_is_deterministic() {
        let p = problem(
            r#"{"layers":[{"weights":[[0.6,-0.3],[0.2,0.9]],"biases":[0.1,-0.4]},{"weights":[[1.0,-1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const X_1 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (<= X_1 1.0))(assert (>= X_1 -1.0))\
             (assert (>= Y_0 -0.2))",
        );
        let a = enumerate_patterns(&p).unwrap();
        let b = enumerate_patterns(&p).unwrap();
        assert_eq!(a, b);
        assert_eq!(enumerate_verify(&p).unwrap(), enumerate_verify(&p).unwrap());
    }

    #[test]
    fn sampling_finds_dense_violations() {
        // Violations on half the box.
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[0.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (<= Y_0 0.0))",
        );
        let w = sample_falsify(&p, 10_000, 3).expect("dense violations must be sampled");
        assert!(verify_witness(&p, &w));
    }

    #[test]
    fn sampling_respects_true_property() {
        let p = problem(
            r#"{"layers":[{"weights":[[1.0]],"biases":[0.0]},{"weights":[[1.0]],"biases":[5.0]}]}"#,
            "(declare-const X_0 Real)(declare-const Y_0 Real)\
             (assert (<= X_0 1.0))(assert (>= X_0 -1.0))(assert (>= Y_0 1.0))",
        );
        assert!(sample_falsify(&p, 10_000, 5).is_none());
        assert_eq!(enumerate_verify(&p).unwrap(), Verdict::Unsat);
    }
}

