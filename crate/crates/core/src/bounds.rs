//! Sound per-neuron pre-activation bounds under an input box plus phase
//! constraints, and output-condition feasibility margins.
//!
//! Two abstractions are provided: plain forward interval arithmetic
//! ([`interval_bounds`]) and a backward-substitution polytope relaxation
//! ([`relaxed_bounds`]) whose concrete bounds are intersected with the
//! interval bounds, so they are never looser.

use crate::io::Conjunction;
use crate::net::{AffineLayer, Network, NeuronId};
use thiserror::Error;

/// Activation phase of a ReLU neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Active,
    Inactive,
}

/// A single phase constraint; at most one per neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseConstraint {
    pub neuron: NeuronId,
    pub phase: Phase,
}

/// Phase constraints laid out per hidden layer for O(1) lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAssignment {
    by_layer: Vec<Vec<Option<Phase>>>,
}

impl PhaseAssignment {
    pub fn empty(net: &Network) -> Self {
        PhaseAssignment {
            by_layer: net.hidden_widths().iter().map(|&w| vec![None; w]).collect(),
        }
    }

    pub fn from_constraints(net: &Network, constraints: &[PhaseConstraint]) -> Self {
        let mut pa = Self::empty(net);
        for c in constraints {
            pa.set(c.neuron, c.phase);
        }
        pa
    }

    pub fn set(&mut self, neuron: NeuronId, phase: Phase) {
        self.by_layer[neuron.layer][neuron.pos] = Some(phase);
    }

    pub fn get(&self, neuron: NeuronId) -> Option<Phase> {
        self.by_layer[neuron.layer][neuron.pos]
    }

    pub fn constraint_count(&self) -> usize {
        self.by_layer
            .iter()
            .flatten()
            .filter(|p| p.is_some())
            .count()
    }
}

/// An affine function of the network inputs: `coeffs . x + constant`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBound {
    pub coeffs: Vec<f64>,
    pub constant: f64,
}

impl AffineBound {
    fn constant(c: f64, dim: usize) -> Self {
        AffineBound {
            coeffs: vec![0.0; dim],
            constant: c,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = self.constant;
        for (&c, &v) in self.coeffs.iter().zip(x) {
            acc += c * v;
        }
        acc
    }
}

/// Bounds for one hidden neuron: concrete pre-activation interval plus
/// symbolic affine lower/upper bounds over the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBound {
    pub pre_lo: f64,
    pub pre_hi: f64,
    pub symbolic_lower: AffineBound,
    pub symbolic_upper: AffineBound,
}

impl NeuronBound {
    pub fn width(&self) -> f64 {
        self.pre_hi - self.pre_lo
    }

    /// Unstable: the pre-activation interval straddles zero.
    pub fn is_unstable(&self) -> bool {
        self.pre_lo < 0.0 && self.pre_hi > 0.0
    }
}

/// Bounds for all hidden neurons and the network outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronBounds {
    pub neurons: Vec<Vec<NeuronBound>>,
    pub out_lo: Vec<f64>,
    pub out_hi: Vec<f64>,
}

impl NeuronBounds {
    pub fn get(&self, id: NeuronId) -> &NeuronBound {
        &self.neurons[id.layer][id.pos]
    }

    pub fn get_mut(&mut self, id: NeuronId) -> &mut NeuronBound {
        &mut self.neurons[id.layer][id.pos]
    }

    /// Intersects concrete pre-activation intervals with externally proven
    /// bounds (e.g. LP tightenings inherited from a parent branch). Symbolic
    /// bounds are left as computed.
    pub fn intersect_pre(&mut self, id: NeuronId, lo: f64, hi: f64) {
        let nb = self.get_mut(id);
        nb.pre_lo = nb.pre_lo.max(lo);
        nb.pre_hi = nb.pre_hi.min(hi);
    }
}

/// Signals that the phase constraints contradict the bounds: some neuron is
/// forced Active with a negative pre-activation ceiling or Inactive with a
/// positive floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("phase constraint on {neuron} is infeasible")]
pub struct InfeasiblePhase {
    pub neuron: NeuronId,
}

fn clip_phase(
    id: NeuronId,
    phase: Option<Phase>,
    pre_lo: &mut f64,
    pre_hi: &mut f64,
) -> Result<(), InfeasiblePhase> {
    match phase {
        Some(Phase::Active) => {
            if *pre_hi < 0.0 {
                return Err(InfeasiblePhase { neuron: id });
            }
            *pre_lo = pre_lo.max(0.0);
        }
        Some(Phase::Inactive) => {
            if *pre_lo > 0.0 {
                return Err(InfeasiblePhase { neuron: id });
            }
            *pre_hi = pre_hi.min(0.0);
        }
        None => {}
    }
    Ok(())
}

fn post_interval(phase: Option<Phase>, pre_lo: f64, pre_hi: f64) -> (f64, f64) {
    match phase {
        Some(Phase::Inactive) => (0.0, 0.0),
        _ => (pre_lo.max(0.0), pre_hi.max(0.0)),
    }
}

/// Interval product bound of `w * [lo, hi]`.
fn term_bounds(w: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = w * lo;
    let b = w * hi;
    (a.min(b), a.max(b))
}

/// Forward interval arithmetic with phase clipping. Terms accumulate in the
/// same order as [`Network::infer`], so f64 rounding monotonicity makes the
/// result dominate every forward evaluation.
pub fn interval_bounds(
    net: &Network,
    input_box: &[(f64, f64)],
    phases: &PhaseAssignment,
) -> Result<NeuronBounds, InfeasiblePhase> {
    interval_bounds_impl(net, input_box, phases, None)
}

fn intersect_with_prior(
    id: NeuronId,
    prior: Option<&NeuronBounds>,
    lo: &mut f64,
    hi: &mut f64,
) -> Result<(), InfeasiblePhase> {
    if let Some(p) = prior {
        let pb = p.get(id);
        *lo = lo.max(pb.pre_lo);
        *hi = hi.min(pb.pre_hi);
        if *lo > *hi {
            return Err(InfeasiblePhase { neuron: id });
        }
    }
    Ok(())
}

fn interval_bounds_impl(
    net: &Network,
    input_box: &[(f64, f64)],
    phases: &PhaseAssignment,
    prior: Option<&NeuronBounds>,
) -> Result<NeuronBounds, InfeasiblePhase> {
    let mut post_lo: Vec<f64> = input_box.iter().map(|b| b.0).collect();
    let mut post_hi: Vec<f64> = input_box.iter().map(|b| b.1).collect();
    let dim = net.input_dim;
    let mut neurons = Vec::with_capacity(net.hidden_layers().len());

    for (li, layer) in net.hidden_layers().iter().enumerate() {
        let mut layer_bounds = Vec::with_capacity(layer.out_dim());
        let mut next_lo = Vec::with_capacity(layer.out_dim());
        let mut next_hi = Vec::with_capacity(layer.out_dim());
        for (ni, (row, &b)) in layer.weights.iter().zip(&layer.biases).enumerate() {
            let id = NeuronId::new(li, ni);
            let mut lo = b;
            let mut hi = b;
            for (j, &w) in row.iter().enumerate() {
                let (tl, th) = term_bounds(w, post_lo[j], post_hi[j]);
                lo += tl;
                hi += th;
            }
            let phase = phases.get(id);
            clip_phase(id, phase, &mut lo, &mut hi)?;
            intersect_with_prior(id, prior, &mut lo, &mut hi)?;
            let (plo, phi) = post_interval(phase, lo, hi);
            next_lo.push(plo);
            next_hi.push(phi);
            layer_bounds.push(NeuronBound {
                pre_lo: lo,
                pre_hi: hi,
                symbolic_lower: AffineBound::constant(lo, dim),
                symbolic_upper: AffineBound::constant(hi, dim),
            });
        }
        neurons.push(layer_bounds);
        post_lo = next_lo;
        post_hi = next_hi;
    }

    let (mut out_lo, mut out_hi) = match net.layers.last() {
        Some(out_layer) => {
            let mut lo = Vec::with_capacity(out_layer.out_dim());
            let mut hi = Vec::with_capacity(out_layer.out_dim());
            for (row, &b) in out_layer.weights.iter().zip(&out_layer.biases) {
                let mut l = b;
                let mut h = b;
                for (j, &w) in row.iter().enumerate() {
                    let (tl, th) = term_bounds(w, post_lo[j], post_hi[j]);
                    l += tl;
                    h += th;
                }
                lo.push(l);
                hi.push(h);
            }
            (lo, hi)
        }
        None => (Vec::new(), Vec::new()),
    };
    if let Some(p) = prior {
        for (o, (lo, hi)) in out_lo.iter_mut().zip(out_hi.iter_mut()).enumerate() {
            intersect_outputs(lo, hi, p.out_lo[o], p.out_hi[o]);
        }
    }

    Ok(NeuronBounds {
        neurons,
        out_lo,
        out_hi,
    })
}

/// Output intervals carry no phase, so a crossed intersection can only come
/// from float noise between two sound routes; collapse it to the midpoint.
fn intersect_outputs(lo: &mut f64, hi: &mut f64, other_lo: f64, other_hi: f64) {
    *lo = lo.max(other_lo);
    *hi = hi.min(other_hi);
    if *lo > *hi {
        let mid = 0.5 * (*lo + *hi);
        *lo = mid;
        *hi = mid;
    }
}

/// (slope, intercept) pairs of the lower and upper linear ReLU relations.
pub type ReluRelaxation = ((f64, f64), (f64, f64));

/// Linear relation `z_hat >= / <= slope * z + intercept` for one ReLU under
/// the clipped bounds `[l, u]` and optional phase.
///
/// Unstable neurons use the triangle relaxation: upper line `u(z-l)/(u-l)`,
/// lower line `lambda * z` with `lambda = 1` if `|u| >= |l|` else `0`.
pub fn relu_relaxation(l: f64, u: f64, phase: Option<Phase>) -> ReluRelaxation {
    match phase {
        Some(Phase::Active) => return ((1.0, 0.0), (1.0, 0.0)),
        Some(Phase::Inactive) => return ((0.0, 0.0), (0.0, 0.0)),
        None => {}
    }
    if l >= 0.0 {
        ((1.0, 0.0), (1.0, 0.0))
    } else if u <= 0.0 {
        ((0.0, 0.0), (0.0, 0.0))
    } else {
        let slope = u / (u - l);
        let upper = (slope, -slope * l);
        let lambda = if u.abs() >= l.abs() { 1.0 } else { 0.0 };
        ((lambda, 0.0), upper)
    }
}

/// One symbolic expression over a layer's post-activations.
struct Expr {
    coeffs: Vec<f64>,
    constant: f64,
}

/// Backward substitution of `expr` (over post-activations of hidden layer
/// `t`) down to the inputs, choosing lower or upper ReLU relations by
/// coefficient sign. `upper` selects which concrete bound is produced.
fn back_substitute(
    net: &Network,
    relaxations: &[Vec<ReluRelaxation>],
    mut expr: Expr,
    mut t: isize,
    upper: bool,
) -> AffineBound {
    while t >= 0 {
        let relax = &relaxations[t as usize];
        // Post-activation -> pre-activation via the chosen ReLU relation.
        let mut pre_coeffs = vec![0.0; relax.len()];
        for (j, &c) in expr.coeffs.iter().enumerate() {
            let ((lo_s, lo_i), (up_s, up_i)) = relax[j];
            let (slope, intercept) = if (c >= 0.0) == upper {
                (up_s, up_i)
            } else {
                (lo_s, lo_i)
            };
            pre_coeffs[j] = c * slope;
            expr.constant += c * intercept;
        }
        // Pre-activation -> previous layer post-activation via the affine map.
        let layer: &AffineLayer = &net.layers[t as usize];
        let mut prev = vec![0.0; layer.in_dim()];
        for (j, &c) in pre_coeffs.iter().enumerate() {
            if c != 0.0 {
                expr.constant += c * layer.biases[j];
                for (k, &w) in layer.weights[j].iter().enumerate() {
                    prev[k] += c * w;
                }
            }
        }
        expr.coeffs = prev;
        t -= 1;
    }
    AffineBound {
        coeffs: expr.coeffs,
        constant: expr.constant,
    }
}

fn eval_over_box(bound: &AffineBound, input_box: &[(f64, f64)], upper: bool) -> f64 {
    let mut acc = bound.constant;
    for (&c, &(lo, hi)) in bound.coeffs.iter().zip(input_box) {
        let (tl, th) = term_bounds(c, lo, hi);
        acc += if upper { th } else { tl };
    }
    acc
}

/// Polytope-style relaxation: every neuron carries symbolic affine bounds
/// back-substituted to the inputs; concrete bounds are the symbolic bounds
/// evaluated over the box, intersected with [`interval_bounds`] so the result
/// is never looser than plain intervals.
pub fn relaxed_bounds(
    net: &Network,
    input_box: &[(f64, f64)],
    phases: &PhaseAssignment,
) -> Result<NeuronBounds, InfeasiblePhase> {
    relaxed_bounds_impl(net, input_box, phases, None)
}

/// Like [`relaxed_bounds`], but every neuron's interval is additionally
/// intersected with `prior` (bounds proved on an ancestor branch) before the
/// next layer's relaxations are built. The result is never looser than
/// `prior`, so bounds shrink monotonically as phase constraints accumulate
/// along a search branch; an empty intersection signals a theory conflict.
pub fn refine_bounds(
    net: &Network,
    input_box: &[(f64, f64)],
    phases: &PhaseAssignment,
    prior: &NeuronBounds,
) -> Result<NeuronBounds, InfeasiblePhase> {
    relaxed_bounds_impl(net, input_box, phases, Some(prior))
}

fn relaxed_bounds_impl(
    net: &Network,
    input_box: &[(f64, f64)],
    phases: &PhaseAssignment,
    prior: Option<&NeuronBounds>,
) -> Result<NeuronBounds, InfeasiblePhase> {
    let mut bounds = interval_bounds_impl(net, input_box, phases, prior)?;
    let mut relaxations: Vec<Vec<ReluRelaxation>> = Vec::new();

    for (li, layer) in net.hidden_layers().iter().enumerate() {
        for ni in 0..layer.out_dim() {
            let id = NeuronId::new(li, ni);
            let row = Expr {
                coeffs: layer.weights[ni].clone(),
                constant: layer.biases[ni],
            };
            let lower = back_substitute(net, &relaxations, row, li as isize - 1, false);
            let row = Expr {
                coeffs: layer.weights[ni].clone(),
                constant: layer.biases[ni],
            };
            let upper = back_substitute(net, &relaxations, row, li as isize - 1, true);

            let mut lo = eval_over_box(&lower, input_box, false);
            let mut hi = eval_over_box(&upper, input_box, true);
            let phase = phases.get(id);
            clip_phase(id, phase, &mut lo, &mut hi)?;

            // Intersect with the interval-and-prior result: dominance over
            // plain intervals (and over any inherited bounds) by construction.
            let nb = &mut bounds.neurons[li][ni];
            nb.pre_lo = nb.pre_lo.max(lo);
            nb.pre_hi = nb.pre_hi.min(hi);
            nb.symbolic_lower = lower;
            nb.symbolic_upper = upper;
            if nb.pre_lo > nb.pre_hi {
                return Err(InfeasiblePhase { neuron: id });
            }
        }
        let relax = (0..layer.out_dim())
            .map(|ni| {
                let nb = &bounds.neurons[li][ni];
                relu_relaxation(nb.pre_lo, nb.pre_hi, phases.get(NeuronId::new(li, ni)))
            })
            .collect();
        relaxations.push(relax);
    }

    if let Some(out_layer) = net.layers.last() {
        let hidden = net.hidden_layers().len() as isize;
        for oi in 0..out_layer.out_dim() {
            let row = Expr {
                coeffs: out_layer.weights[oi].clone(),
                constant: out_layer.biases[oi],
            };
            let lower = back_substitute(net, &relaxations, row, hidden - 1, false);
            let row = Expr {
                coeffs: out_layer.weights[oi].clone(),
                constant: out_layer.biases[oi],
            };
            let upper = back_substitute(net, &relaxations, row, hidden - 1, true);
            let lo = eval_over_box(&lower, input_box, false);
            let hi = eval_over_box(&upper, input_box, true);
            intersect_outputs(&mut bounds.out_lo[oi], &mut bounds.out_hi[oi], lo, hi);
        }
    }

    Ok(bounds)
}

/// Feasibility verdict for one disjunct of the negated output condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginVerdict {
    /// `p > 0`: some inequality cannot be met; the disjunct is unreachable.
    Infeasible,
    /// `p <= 0`: the disjunct might be reachable.
    MaybeFeasible,
}

/// The margin `p` and its verdict. `p` is the maximum over the disjunct's
/// inequalities `c.y <= d` of `(lower bound of c.y) - d`; positive means the
/// inequality is violated for every output in the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityMargin {
    pub p: f64,
    pub verdict: MarginVerdict,
}

pub fn feasibility_margin(bounds: &NeuronBounds, disjunct: &Conjunction) -> FeasibilityMargin {
    let mut p = f64::NEG_INFINITY;
    for ineq in disjunct {
        let mut lo = 0.0;
        for (i, &c) in ineq.coeffs.iter().enumerate() {
            lo += if c >= 0.0 {
                c * bounds.out_lo[i]
            } else {
                c * bounds.out_hi[i]
            };
        }
        p = p.max(lo - ineq.rhs);
    }
    let verdict = if p > 0.0 {
        MarginVerdict::Infeasible
    } else {
        MarginVerdict::MaybeFeasible
    };
    FeasibilityMargin { p, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::LinearIneq;
    use crate::net::AffineLayer;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn paper_neuron_net() -> Network {
        Network::new(
            2,
            vec![
                AffineLayer::new(vec![vec![0.4, -0.5]], vec![-0.8]),
                AffineLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
        )
    }

    const PAPER_BOX: [(f64, f64); 2] = [(-2.0, 2.0), (-1.0, 1.0)];

    #[test]
    fn interval_bounds_paper_first_layer_neuron() {
        let net = paper_neuron_net();
        let b = interval_bounds(&net, &PAPER_BOX, &PhaseAssignment::empty(&net)).unwrap();
        let nb = b.get(NeuronId::new(0, 0));
        assert!((nb.pre_lo - (-2.1)).abs() < 1e-12, "lo = {}", nb.pre_lo);
        assert!((nb.pre_hi - 0.5).abs() < 1e-12, "hi = {}", nb.pre_hi);
    }

    #[test]
    fn zero_weight_neuron_is_point_interval() {
        let net = Network::new(
            2,
            vec![
                AffineLayer::new(vec![vec![0.0, 0.0]], vec![0.3]),
                AffineLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
        );
        let b = interval_bounds(&net, &PAPER_BOX, &PhaseAssignment::empty(&net)).unwrap();
        let nb = b.get(NeuronId::new(0, 0));
        assert_eq!((nb.pre_lo, nb.pre_hi), (0.3, 0.3));
    }

    #[test]
    fn inactive_constraint_on_positive_interval_is_infeasible() {
        // Pre interval [0.2, 0.9] via bias on zero weights.
        let net = Network::new(
            1,
            vec![
                AffineLayer::new(vec![vec![0.35]], vec![0.55]),
                AffineLayer::new(vec![vec![1.0]], vec![0.0]),
            ],
        );
        let mut phases = PhaseAssignment::empty(&net);
        phases.set(NeuronId::new(0, 0), Phase::Inactive);
        let err = interval_bounds(&net, &[(-1.0, 1.0)], &phases).unwrap_err();
        assert_eq!(err.neuron, NeuronId::new(0, 0));
    }

    #[test]
    fn active_constraint_clips_lower_bound() {
        let net = paper_neuron_net();
        let mut phases = PhaseAssignment::empty(&net);
        phases.set(NeuronId::new(0, 0), Phase::Active);
        let b = interval_bounds(&net, &PAPER_BOX, &phases).unwrap();
        let nb = b.get(NeuronId::new(0, 0));
        assert_eq!(nb.pre_lo, 0.0);
        assert!((nb.pre_hi - 0.5).abs() < 1e-12);
    }

    #[test]
    fn triangle_upper_relaxation_midpoint() {
        // l = -1, u = 1: upper line u(z-l)/(u-l) at z = 0 is 0.5.
        let ((_, _), (slope, intercept)) = relu_relaxation(-1.0, 1.0, None);
        assert!((slope * 0.0 + intercept - 0.5).abs() < 1e-15);
    }

    #[test]
    fn relaxed_equals_interval_when_no_neuron_unstable() {
        // Biases push both hidden neurons clearly positive on the box.
        let net = Network::new(
            2,
            vec![
                AffineLayer::new(vec![vec![0.2, 0.1], vec![-0.1, 0.3]], vec![3.0, 2.0]),
                AffineLayer::new(vec![vec![1.0, -1.0]], vec![0.0]),
            ],
        );
        let phases = PhaseAssignment::empty(&net);
        let iv = interval_bounds(&net, &PAPER_BOX, &phases).unwrap();
        let rx = relaxed_bounds(&net, &PAPER_BOX, &phases).unwrap();
        for id in net.neuron_ids() {
            assert!((iv.get(id).pre_lo - rx.get(id).pre_lo).abs() < 1e-12);
            assert!((iv.get(id).pre_hi - rx.get(id).pre_hi).abs() < 1e-12);
        }
    }

    fn random_net(rng: &mut ChaCha8Rng, dims: &[usize]) -> Network {
        let layers = dims
            .windows(2)
            .map(|w| {
                let scale = 1.5 / (w[0] as f64).sqrt();
                AffineLayer::new(
                    (0..w[1])
                        .map(|_| (0..w[0]).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
                        .collect(),
                    (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                )
            })
            .collect();
        Network::new(dims[0], layers)
    }

    #[test]
    fn monte_carlo_containment_and_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let net = random_net(&mut rng, &[2, 3, 3, 2]);
            let box_ = [(-1.5, 1.5), (-1.0, 2.0)];
            let phases = PhaseAssignment::empty(&net);
            let iv = interval_bounds(&net, &box_, &phases).unwrap();
            let rx = relaxed_bounds(&net, &box_, &phases).unwrap();
            for id in net.neuron_ids() {
                assert!(rx.get(id).pre_lo >= iv.get(id).pre_lo);
                assert!(rx.get(id).pre_hi <= iv.get(id).pre_hi);
            }
            for _ in 0..500 {
                let x = [
                    rng.gen_range(box_[0].0..=box_[0].1),
                    rng.gen_range(box_[1].0..=box_[1].1),
                ];
                let (pres, out) = net.infer_with_preactivations(&x).unwrap();
                for (li, layer_pres) in pres.iter().enumerate() {
                    for (ni, &v) in layer_pres.iter().enumerate() {
                        let nb = rx.get(NeuronId::new(li, ni));
                        assert!(
                            nb.pre_lo <= v && v <= nb.pre_hi,
                            "neuron ({li},{ni}): {v} outside [{}, {}]",
                            nb.pre_lo,
                            nb.pre_hi
                        );
                        assert!(nb.symbolic_lower.eval(&x) <= v + 1e-9);
                        assert!(nb.symbolic_upper.eval(&x) >= v - 1e-9);
                    }
                }
                for (oi, &v) in out.iter().enumerate() {
                    assert!(rx.out_lo[oi] <= v && v <= rx.out_hi[oi]);
                }
            }
        }
    }

    #[test]
    fn phase_constraints_respected_by_consistent_samples() {
        // Soundness of clipped bounds: samples consistent with the phases
        // stay inside the phase-constrained bounds.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..10 {
            let net = random_net(&mut rng, &[2, 3, 2]);
            let box_ = [(-1.0, 1.0), (-1.0, 1.0)];
            let target = NeuronId::new(0, rng.gen_range(0..3));
            for phase in [Phase::Active, Phase::Inactive] {
                let mut phases = PhaseAssignment::empty(&net);
                phases.set(target, phase);
                let Ok(rx) = relaxed_bounds(&net, &box_, &phases) else {
                    continue;
                };
                for _ in 0..300 {
                    let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    let (pres, _) = net.infer_with_preactivations(&x).unwrap();
                    let v = pres[target.layer][target.pos];
                    let consistent = match phase {
                        Phase::Active => v >= 0.0,
                        Phase::Inactive => v <= 0.0,
                    };
                    if !consistent {
                        continue;
                    }
                    for (li, layer_pres) in pres.iter().enumerate() {
                        for (ni, &pv) in layer_pres.iter().enumerate() {
                            let nb = rx.get(NeuronId::new(li, ni));
                            assert!(nb.pre_lo <= pv && pv <= nb.pre_hi);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn adding_phase_constraint_never_widens() {
        // Refinement semantics: a child branch computes its bounds relative
        // to the parent's, so accumulating phase constraints can only shrink
        // intervals. (A fresh recomputation is not monotone in general: the
        // lower-relation slope flips with the clipped interval.)
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..30 {
            let net = random_net(&mut rng, &[2, 3, 3, 2]);
            let box_ = [(-1.0, 1.0), (-1.0, 1.0)];
            let base_phases = PhaseAssignment::empty(&net);
            let base = relaxed_bounds(&net, &box_, &base_phases).unwrap();
            let ids: Vec<NeuronId> = net.neuron_ids().collect();
            let target = ids[rng.gen_range(0..ids.len())];
            for phase in [Phase::Active, Phase::Inactive] {
                let mut phases = base_phases.clone();
                phases.set(target, phase);
                let Ok(tightened) = refine_bounds(&net, &box_, &phases, &base) else {
                    continue;
                };
                for id in net.neuron_ids() {
                    assert!(
                        tightened.get(id).pre_lo >= base.get(id).pre_lo,
                        "constraining {target} widened {id} lower"
                    );
                    assert!(
                        tightened.get(id).pre_hi <= base.get(id).pre_hi,
                        "constraining {target} widened {id} upper"
                    );
                }
                for o in 0..net.output_dim() {
                    assert!(tightened.out_lo[o] >= base.out_lo[o]);
                    assert!(tightened.out_hi[o] <= base.out_hi[o]);
                }
            }
        }
    }

    #[test]
    fn stability_detection_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let mut seen_stable = 0;
        for _ in 0..40 {
            let net = random_net(&mut rng, &[2, 3, 2]);
            let box_ = [(-0.5, 0.5), (-0.5, 0.5)];
            let rx = relaxed_bounds(&net, &box_, &PhaseAssignment::empty(&net)).unwrap();
            for id in net.neuron_ids() {
                let nb = rx.get(id);
                if nb.pre_lo >= 0.0 || nb.pre_hi <= 0.0 {
                    seen_stable += 1;
                    for _ in 0..100 {
                        let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
                        let (pres, _) = net.infer_with_preactivations(&x).unwrap();
                        let v = pres[id.layer][id.pos];
                        if nb.pre_lo >= 0.0 {
                            assert!(v.max(0.0) == v, "active-stable neuron went negative");
                        } else {
                            assert!(v.max(0.0) == 0.0, "inactive-stable neuron activated");
                        }
                    }
                }
            }
        }
        assert!(seen_stable > 0, "corpus produced no stable neurons");
    }

    fn ineq(coeffs: Vec<f64>, rhs: f64) -> LinearIneq {
        LinearIneq {
            coeffs,
            rhs,
            strict: false,
        }
    }

    fn out_bounds(lo: Vec<f64>, hi: Vec<f64>) -> NeuronBounds {
        NeuronBounds {
            neurons: vec![],
            out_lo: lo,
            out_hi: hi,
        }
    }

    #[test]
    fn margin_infeasible_when_gap_positive() {
        // y0 in [3,4], y1 in [0,1], disjunct {y0 <= y1}: p = 3 - 1 = 2.
        let b = out_bounds(vec![3.0, 0.0], vec![4.0, 1.0]);
        let m = feasibility_margin(&b, &vec![ineq(vec![1.0, -1.0], 0.0)]);
        assert_eq!(m.verdict, MarginVerdict::Infeasible);
        assert!((m.p - 2.0).abs() < 1e-15);
    }

    #[test]
    fn margin_maybe_feasible_when_overlapping() {
        let b = out_bounds(vec![0.0, 0.0], vec![1.0, 1.0]);
        let m = feasibility_margin(&b, &vec![ineq(vec![1.0, -1.0], 0.0)]);
        assert_eq!(m.verdict, MarginVerdict::MaybeFeasible);
        assert!(m.p <= 0.0);
    }

    #[test]
    fn margin_sign_semantics() {
        // Negative p: might be feasible; positive p (however small): not.
        let b = out_bounds(vec![0.0058, 0.0], vec![0.1, 0.1]);
        let maybe = feasibility_margin(&b, &vec![ineq(vec![1.0, -1.0], 0.1)]);
        assert_eq!(maybe.verdict, MarginVerdict::MaybeFeasible);
        let b2 = out_bounds(vec![0.1001, 0.0], vec![0.2, 0.1]);
        let not = feasibility_margin(&b2, &vec![ineq(vec![1.0, -1.0], 0.0)]);
        assert_eq!(not.verdict, MarginVerdict::Infeasible);
        assert!(not.p > 0.0 && not.p < 0.001);
    }
}
