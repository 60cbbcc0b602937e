//! The T in DPLL(T): Deduce checks feasibility of the current activation
//! pattern against the network and property; Stabilize tightens bounds by LP
//! to prove neurons stable.

use crate::bounds::{
    feasibility_margin, refine_bounds, relaxed_bounds, MarginVerdict, NeuronBounds, Phase,
};
use crate::io::{Conjunction, VerificationProblem};
use crate::lp::{
    encode_relaxation, solve_with, tighten_with, Direction, LpOutcome, LpTolerances,
    TightenOutcome,
};
use crate::net::NeuronId;
use crate::sat::{Assignment, Literal};
use std::time::{Duration, Instant};

/// Knobs shared by the theory routines. All tolerances are pinned here and
/// logged with run records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryConfig {
    /// Margins within this band of zero get an LP feasibility confirmation.
    pub lp_confirm_band: f64,
    /// Run the LP feasibility check at every node regardless of margin.
    pub full_lp: bool,
    /// Tightened bounds within this distance of zero snap to zero and count
    /// as stable.
    pub epsilon_phase: f64,
    pub lp: LpTolerances,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            lp_confirm_band: 1e-6,
            full_lp: false,
            epsilon_phase: 1e-9,
            lp: LpTolerances::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum DeduceOutcome {
    Feasible {
        bounds: Box<NeuronBounds>,
        /// Unassigned neurons proven stable by the bounds: `pre_lo >= 0`
        /// gives a positive (Active) literal, `pre_hi <= 0` a negative one.
        implied: Vec<Literal>,
    },
    Infeasible,
}

/// Per-call counters so the search can aggregate statistics and timings.
#[derive(Debug, Clone, Copy, Default)]
pub struct TheoryCounters {
    pub lp_solves: u64,
    pub lp_time: Duration,
}

/// Checks feasibility of the partial activation pattern in `sigma` against
/// the network, input box, and one disjunct of the negated output condition.
///
/// Bounds come from the polytope relaxation (refined against `prior` when
/// the branch inherited bounds); infeasibility is decided by phase
/// contradiction or a positive feasibility margin, with an optional LP
/// confirmation for borderline margins.
pub fn deduce(
    problem: &VerificationProblem,
    sigma: &Assignment,
    disjunct: &Conjunction,
    prior: Option<&NeuronBounds>,
    cfg: &TheoryConfig,
    counters: &mut TheoryCounters,
) -> DeduceOutcome {
    let net = &problem.network;
    let box_ = &problem.property.input_box;
    let phases = sigma.to_phases(net);
    let bounds = match prior {
        Some(p) => refine_bounds(net, box_, &phases, p),
        None => relaxed_bounds(net, box_, &phases),
    };
    let Ok(bounds) = bounds else {
        return DeduceOutcome::Infeasible;
    };

    let margin = feasibility_margin(&bounds, disjunct);
    if margin.verdict == MarginVerdict::Infeasible {
        return DeduceOutcome::Infeasible;
    }

    if cfg.full_lp || margin.p.abs() < cfg.lp_confirm_band {
        if let Ok(mut rel) = encode_relaxation(net, box_, &phases, &bounds) {
            rel.add_disjunct(disjunct);
            let t0 = Instant::now();
            let outcome = solve_with(&rel.lp, &cfg.lp);
            counters.lp_solves += 1;
            counters.lp_time += t0.elapsed();
            if outcome == LpOutcome::Infeasible {
                return DeduceOutcome::Infeasible;
            }
            // IterLimit or Optimal: keep the abstraction's verdict.
        }
    }

    let implied = implied_stable_literals(net, sigma, &bounds);
    DeduceOutcome::Feasible {
        bounds: Box::new(bounds),
        implied,
    }
}

fn implied_stable_literals(
    net: &crate::net::Network,
    sigma: &Assignment,
    bounds: &NeuronBounds,
) -> Vec<Literal> {
    let mut implied = Vec::new();
    for var in 0..sigma.num_vars() {
        if sigma.value(var).is_some() {
            continue;
        }
        let nb = bounds.get(net.neuron_at(var));
        if nb.pre_lo >= 0.0 {
            implied.push(Literal::pos(var));
        } else if nb.pre_hi <= 0.0 {
            implied.push(Literal::neg(var));
        }
    }
    implied
}

/// Outcome of one stabilization pass.
#[derive(Debug, Clone, Default)]
pub struct StabilizeReport {
    /// Candidates actually tightened (at most k).
    pub attempted: usize,
    pub newly_stable: Vec<(NeuronId, Phase)>,
    /// Strict bound improvements: neuron -> (new_lo, new_hi).
    pub tightened: Vec<(NeuronId, (f64, f64))>,
    pub lp_time: Duration,
}

#[derive(Debug)]
pub enum StabilizeResult {
    /// Updated bounds (never looser than the input) plus the report.
    Done(StabilizeReport, Box<NeuronBounds>),
    /// An LP turned infeasible: the branch is dead (theory conflict).
    Conflict,
}

/// Unassigned unstable neurons ordered ascending by `min(|lo|, |hi|)`:
/// bounds close to zero are most likely to become stable after tightening.
pub fn stabilization_candidates(
    net: &crate::net::Network,
    sigma: &Assignment,
    bounds: &NeuronBounds,
) -> Vec<NeuronId> {
    let mut cands: Vec<(f64, usize, NeuronId)> = (0..sigma.num_vars())
        .filter(|&v| sigma.value(v).is_none())
        .map(|v| net.neuron_at(v))
        .filter(|&id| bounds.get(id).is_unstable())
        .map(|id| {
            let nb = bounds.get(id);
            (
                nb.pre_lo.abs().min(nb.pre_hi.abs()),
                net.flat_index(id),
                id,
            )
        })
        .collect();
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    cands.into_iter().map(|(_, _, id)| id).collect()
}

/// LP-based bound tightening for up to `k` unassigned unstable neurons.
///
/// Each candidate is re-encoded against the current (already tightened)
/// bounds, and the bound nearer zero is optimized first; the second bound is
/// only optimized if the neuron is still unstable. Neurons whose interval no
/// longer crosses zero are reported newly stable with the forced phase.
pub fn stabilize(
    problem: &VerificationProblem,
    sigma: &Assignment,
    bounds: &NeuronBounds,
    k: usize,
    cfg: &TheoryConfig,
    counters: &mut TheoryCounters,
) -> StabilizeResult {
    let mut report = StabilizeReport::default();
    let mut bounds = bounds.clone();
    if k == 0 {
        return StabilizeResult::Done(report, Box::new(bounds));
    }
    let net = &problem.network;
    let box_ = &problem.property.input_box;
    let phases = sigma.to_phases(net);

    let candidates = stabilization_candidates(net, sigma, &bounds);
    for id in candidates.into_iter().take(k) {
        report.attempted += 1;
        let Ok(rel) = encode_relaxation(net, box_, &phases, &bounds) else {
            return StabilizeResult::Conflict;
        };
        let zv = rel.vars.z_of(id);
        let (lo, hi) = {
            let nb = bounds.get(id);
            (nb.pre_lo, nb.pre_hi)
        };

        // Lower is closer to zero than upper iff lo + hi >= 0.
        let order = if lo + hi >= 0.0 {
            [Direction::Lower, Direction::Upper]
        } else {
            [Direction::Upper, Direction::Lower]
        };
        let mut improved = false;
        for (i, dir) in order.into_iter().enumerate() {
            if i == 1 && !bounds.get(id).is_unstable() {
                break; // already stable: skip the second optimization
            }
            let t0 = Instant::now();
            let outcome = tighten_with(&rel.lp, zv, dir, &cfg.lp);
            counters.lp_solves += 1;
            let dt = t0.elapsed();
            counters.lp_time += dt;
            report.lp_time += dt;
            match outcome {
                TightenOutcome::Improved(mut v) => {
                    if v.abs() <= cfg.epsilon_phase {
                        v = 0.0; // snap LP-tolerance noise to a stable phase
                    }
                    let nb = bounds.get_mut(id);
                    match dir {
                        Direction::Lower => nb.pre_lo = nb.pre_lo.max(v),
                        Direction::Upper => nb.pre_hi = nb.pre_hi.min(v),
                    }
                    improved = true;
                }
                TightenOutcome::NoChange => {}
                TightenOutcome::Infeasible => return StabilizeResult::Conflict,
            }
        }
        let nb = bounds.get(id);
        if improved {
            report.tightened.push((id, (nb.pre_lo, nb.pre_hi)));
        }
        if nb.pre_lo >= 0.0 {
            report.newly_stable.push((id, Phase::Active));
        } else if nb.pre_hi <= 0.0 {
            report.newly_stable.push((id, Phase::Inactive));
        }
    }
    StabilizeResult::Done(report, Box::new(bounds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::interval_bounds;
    use crate::io::{build_problem, Dnf, LinearIneq, Property};
    use crate::net::{AffineLayer, Network};
    use crate::sat::Reason;

    fn simple_property(inputs: usize, outputs: usize) -> Property {
        // Output condition y_0 >= 100 (negation: y_0 < 100, usually feasible).
        let mut coeffs = vec![0.0; outputs];
        coeffs[0] = -1.0;
        let cond = Dnf(vec![vec![LinearIneq {
            coeffs: coeffs.clone(),
            rhs: -100.0,
            strict: false,
        }]]);
        let neg = Dnf(vec![vec![LinearIneq {
            coeffs: coeffs.iter().map(|c| -c).collect(),
            rhs: 100.0,
            strict: true,
        }]]);
        Property {
            input_box: vec![(-1.0, 1.0); inputs],
            output_condition: cond,
            negated_output: neg,
        }
    }

    #[test]
    fn deduce_detects_contradictory_phase() {
        // Hidden neuron pre-activation is [-3, -1]; forcing it Active is
        // infeasible.
        let net = Network::new(
            1,
            vec![
                AffineLayer::new(vec![vec![1.0]], vec![-2.0]),
                AffineLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
        );
        let problem = build_problem(net, simple_property(1, 1)).unwrap();
        let mut sigma = Assignment::new(1);
        sigma.bind(Literal::pos(0), Reason::Decision);
        let disjunct = problem.property.negated_output.0[0].clone();
        let mut counters = TheoryCounters::default();
        let out = deduce(
            &problem,
            &sigma,
            &disjunct,
            None,
            &TheoryConfig::default(),
            &mut counters,
        );
        assert!(matches!(out, DeduceOutcome::Infeasible));
    }

    #[test]
    fn deduce_proves_property_at_root_by_intervals() {
        // y = x + 5 on x in [-1, 1]: the disjunct y <= 0 has margin
        // p = 4 > 0, so the empty assignment is already infeasible.
        let net = Network::new(
            1,
            vec![
                AffineLayer::new(vec![vec![1.0]], vec![5.0]),
                AffineLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
        );
        let mut prop = simple_property(1, 1);
        prop.negated_output = Dnf(vec![vec![LinearIneq {
            coeffs: vec![1.0],
            rhs: 0.0,
            strict: false,
        }]]);
        let problem = build_problem(net, prop).unwrap();
        let sigma = Assignment::new(1);
        let disjunct = problem.property.negated_output.0[0].clone();
        let mut counters = TheoryCounters::default();
        let out = deduce(
            &problem,
            &sigma,
            &disjunct,
            None,
            &TheoryConfig::default(),
            &mut counters,
        );
        assert!(matches!(out, DeduceOutcome::Infeasible));
    }

    #[test]
    fn deduce_reports_implied_stable_literals() {
        // First hidden neuron is x + 3 >= 2 on the box: stable active.
        let net = Network::new(
            1,
            vec![
                AffineLayer::new(vec![vec![1.0], vec![1.0]], vec![3.0, 0.0]),
                AffineLayer::new(vec![vec![1.0, 1.0]], vec![0.0]),
            ],
        );
        let problem = build_problem(net, simple_property(1, 1)).unwrap();
        let sigma = Assignment::new(2);
        let disjunct = problem.property.negated_output.0[0].clone();
        let mut counters = TheoryCounters::default();
        match deduce(
            &problem,
            &sigma,
            &disjunct,
            None,
            &TheoryConfig::default(),
            &mut counters,
        ) {
            DeduceOutcome::Feasible { implied, .. } => {
                assert!(implied.contains(&Literal::pos(0)));
                assert!(!implied.iter().any(|l| l.var == 1));
            }
            DeduceOutcome::Infeasible => panic!("should be feasible"),
        }
    }

    /// Two stable hidden neurons whose difference cancels the input, so the
    /// second-layer neuron is truly in [1.0, 1.5] while intervals see
    /// [-2.5, 3.0].
    fn correlation_net() -> Network {
        Network::new(
            1,
            vec![
                AffineLayer::new(vec![vec![1.0], vec![1.5]], vec![2.0, 3.0]),
                AffineLayer::new(vec![vec![2.0, -1.0]], vec![0.0]),
                AffineLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
        )
    }

    #[test]
    fn stabilize_proves_hidden_neuron_active() {
        let net = correlation_net();
        let problem = build_problem(net, simple_property(1, 1)).unwrap();
        let sigma = Assignment::new(3);
        let phases = sigma.to_phases(&problem.network);
        let iv = interval_bounds(&problem.network, &problem.property.input_box, &phases).unwrap();
        let target = NeuronId::new(1, 0);
        assert!(iv.get(target).is_unstable(), "interval analysis must be loose");

        let mut counters = TheoryCounters::default();
        match stabilize(
            &problem,
            &sigma,
            &iv,
            4,
            &TheoryConfig::default(),
            &mut counters,
        ) {
            StabilizeResult::Done(report, bounds) => {
                assert!(
                    report
                        .newly_stable
                        .iter()
                        .any(|(id, ph)| *id == target && *ph == Phase::Active),
                    "report: {report:?}"
                );
                let nb = bounds.get(target);
                assert!(nb.pre_lo >= 0.0);
                // Grid cross-check at 1e-3 resolution.
                let mut x = -1.0;
                while x <= 1.0 {
                    let (pres, _) = problem.network.infer_with_preactivations(&[x]).unwrap();
                    let v = pres[1][0];
                    assert!(v >= 0.0, "claimed stable-active but pre = {v} at x = {x}");
                    assert!(v >= nb.pre_lo - 1e-9 && v <= nb.pre_hi + 1e-9);
                    x += 1e-3;
                }
            }
            StabilizeResult::Conflict => panic!("unexpected conflict"),
        }
    }

    #[test]
    fn stabilize_k_zero_is_a_no_op() {
        let net = correlation_net();
        let problem = build_problem(net, simple_property(1, 1)).unwrap();
        let sigma = Assignment::new(3);
        let phases = sigma.to_phases(&problem.network);
        let iv = interval_bounds(&problem.network, &problem.property.input_box, &phases).unwrap();
        let mut counters = TheoryCounters::default();
        match stabilize(
            &problem,
            &sigma,
            &iv,
            0,
            &TheoryConfig::default(),
            &mut counters,
        ) {
            StabilizeResult::Done(report, bounds) => {
                assert_eq!(report.attempted, 0);
                assert!(report.newly_stable.is_empty());
                assert!(report.tightened.is_empty());
                assert_eq!(*bounds, iv);
            }
            StabilizeResult::Conflict => panic!("unexpected conflict"),
        }
    }

    #[test]
    fn stabilize_never_loosens_bounds() {
        let net = correlation_net();
        let problem = build_problem(net, simple_property(1, 1)).unwrap();
        let sigma = Assignment::new(3);
        let phases = sigma.to_phases(&problem.network);
        let iv = interval_bounds(&problem.network, &problem.property.input_box, &phases).unwrap();
        let mut counters = TheoryCounters::default();
        if let StabilizeResult::Done(_, out) = stabilize(
            &problem,
            &sigma,
            &iv,
            8,
            &TheoryConfig::default(),
            &mut counters,
        ) {
            for id in problem.network.neuron_ids() {
                assert!(out.get(id).pre_lo >= iv.get(id).pre_lo);
                assert!(out.get(id).pre_hi <= iv.get(id).pre_hi);
            }
        } else {
            panic!("unexpected conflict");
        }
    }

    #[test]
    fn candidates_sorted_by_distance_to_zero() {
        let net = Network::new(
            1,
            vec![
                AffineLayer::new(vec![vec![1.0], vec![1.0], vec![1.0]], vec![0.0, 0.0, 0.0]),
                AffineLayer::new(vec![vec![1.0, 1.0, 1.0]], vec![0.0]),
            ],
        );
        let problem = build_problem(net, simple_property(1, 1)).unwrap();
        let sigma = Assignment::new(3);
        let phases = sigma.to_phases(&problem.network);
        let mut bounds =
            interval_bounds(&problem.network, &problem.property.input_box, &phases).unwrap();
        // min distances: neuron 0 -> 0.1, neuron 1 -> 0.05, neuron 2 -> 0.3.
        bounds.get_mut(NeuronId::new(0, 0)).pre_lo = -0.1;
        bounds.get_mut(NeuronId::new(0, 0)).pre_hi = 0.5;
        bounds.get_mut(NeuronId::new(0, 1)).pre_lo = -0.4;
        bounds.get_mut(NeuronId::new(0, 1)).pre_hi = 0.05;
        bounds.get_mut(NeuronId::new(0, 2)).pre_lo = -0.3;
        bounds.get_mut(NeuronId::new(0, 2)).pre_hi = 0.9;
        let order = stabilization_candidates(&problem.network, &sigma, &bounds);
        assert_eq!(
            order,
            vec![NeuronId::new(0, 1), NeuronId::new(0, 0), NeuronId::new(0, 2)]
        );
    }
}
