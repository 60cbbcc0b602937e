//! Dense-tableau linear programming over the network's phase-constrained
//! relaxation: feasibility checks, objective optimization (bound tightening),
//! and witness-point extraction.
//!
//! The solver is a textbook two-phase primal simplex on standard form with
//! Dantzig pricing and a Bland's-rule fallback for anti-cycling. Every solve
//! owns its tableau; there is no shared state.

use crate::bounds::{NeuronBounds, Phase, PhaseAssignment};
use crate::io::Conjunction;
use crate::net::{Network, NeuronId};
use thiserror::Error;

/// Relation of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One constraint row: `coeffs . vars  rel  rhs`.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

/// A linear program over box-bounded variables. Bounds may be infinite.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    pub objective: Vec<f64>,
    pub sense: Sense,
}

/// Centralized numeric tolerances, logged with results for reproducibility
/// of borderline verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpTolerances {
    pub feas: f64,
    pub opt: f64,
    pub improve: f64,
    pub pivot: f64,
    pub bland_after: usize,
    pub max_pivots: usize,
}

impl Default for LpTolerances {
    fn default() -> Self {
        LpTolerances {
            feas: 1e-8,
            opt: 1e-9,
            improve: 1e-9,
            pivot: 1e-10,
            bland_after: 1000,
            max_pivots: 50_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
    IterLimit,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            rows: Vec::new(),
            objective: vec![0.0; num_vars],
            sense: Sense::Minimize,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) {
        self.lower[var] = lo;
        self.upper[var] = hi;
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.rows.push(Row { coeffs, rel, rhs });
    }

    /// Sparse helper: row from (var, coeff) pairs.
    pub fn add_terms(&mut self, terms: &[(usize, f64)], rel: Relation, rhs: f64) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(v, c) in terms {
            coeffs[v] += c;
        }
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn set_objective_terms(&mut self, terms: &[(usize, f64)], sense: Sense) {
        self.objective = vec![0.0; self.num_vars()];
        for &(v, c) in terms {
            self.objective[v] += c;
        }
        self.sense = sense;
    }

    /// Point feasibility check against all rows and bounds.
    pub fn point_feasible(&self, point: &[f64], tol: f64) -> bool {
        if point.len() != self.num_vars() {
            return false;
        }
        for (j, &v) in point.iter().enumerate() {
            if v < self.lower[j] - tol || v > self.upper[j] + tol {
                return false;
            }
        }
        self.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().zip(point).map(|(c, v)| c * v).sum();
            match row.rel {
                Relation::Le => lhs <= row.rhs + tol,
                Relation::Ge => lhs >= row.rhs - tol,
                Relation::Eq => (lhs - row.rhs).abs() <= tol,
            }
        })
    }
}

/// How an original variable maps into nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + s`, `s >= 0`.
    Shifted { col: usize, lo: f64 },
    /// `x = hi - s`, `s >= 0` (no finite lower bound).
    Flipped { col: usize, hi: f64 },
    /// `x = s_pos - s_neg` (free variable).
    Split { pos: usize, neg: usize },
}

struct Tableau {
    a: Vec<Vec<f64>>, // m rows, each of length cols + 1 (last = rhs)
    obj: Vec<f64>,    // reduced-cost row, length cols + 1
    basis: Vec<usize>,
    cols: usize,
    pivots: usize,
    degenerate_streak: usize,
    use_bland: bool,
    tol: LpTolerances,
}

enum Step {
    Optimal,
    Unbounded,
    IterLimit,
    Pivoted,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a[row][col];
        let inv = 1.0 / piv;
        for v in &mut self.a[row] {
            *v *= inv;
        }
        self.a[row][col] = 1.0;
        for r in 0..self.a.len() {
            if r != row {
                let factor = self.a[r][col];
                if factor != 0.0 {
                    for c in 0..=self.cols {
                        self.a[r][c] -= factor * self.a[row][c];
                    }
                    self.a[r][col] = 0.0;
                }
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for c in 0..=self.cols {
                self.obj[c] -= factor * self.a[row][c];
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    fn step(&mut self, allowed_cols: usize) -> Step {
        if self.pivots >= self.tol.max_pivots {
            return Step::IterLimit;
        }
        // Entering column.
        let mut entering = None;
        if self.use_bland {
            for j in 0..allowed_cols {
                if self.obj[j] < -self.tol.opt {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -self.tol.opt;
            for j in 0..allowed_cols {
                if self.obj[j] < best {
                    best = self.obj[j];
                    entering = Some(j);
                }
            }
        }
        let Some(e) = entering else {
            return Step::Optimal;
        };
        // Leaving row by minimum ratio; ties broken by smallest basis column.
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..self.a.len() {
            let coef = self.a[r][e];
            if coef > self.tol.pivot {
                let ratio = self.a[r][self.cols] / coef;
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12
                            || ((ratio - lratio).abs() <= 1e-12 && self.basis[r] < self.basis[lr])
                        {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, ratio)) = leave else {
            return Step::Unbounded;
        };
        if ratio.abs() <= 1e-12 {
            self.degenerate_streak += 1;
            if self.degenerate_streak > self.tol.bland_after {
                self.use_bland = true;
            }
        } else {
            self.degenerate_streak = 0;
        }
        self.pivot(r, e);
        Step::Pivoted
    }

    fn run(&mut self, allowed_cols: usize) -> Step {
        loop {
            match self.step(allowed_cols) {
                Step::Pivoted => continue,
                other => return other,
            }
        }
    }
}

/// Solves the LP. Optimal outcomes carry both the objective value and a
/// witness point; the point satisfies all constraints within `tol.feas`
/// (asserted in debug builds).
pub fn solve(lp: &LinearProgram) -> LpOutcome {
    solve_with(lp, &LpTolerances::default())
}

pub fn solve_with(lp: &LinearProgram, tol: &LpTolerances) -> LpOutcome {
    let n = lp.num_vars();
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] {
            return LpOutcome::Infeasible;
        }
    }

    // Map variables to nonnegative columns.
    let mut maps = Vec::with_capacity(n);
    let mut cols = 0usize;
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let map = if lo.is_finite() {
            let m = VarMap::Shifted { col: cols, lo };
            cols += 1;
            m
        } else if hi.is_finite() {
            let m = VarMap::Flipped { col: cols, hi };
            cols += 1;
            m
        } else {
            let m = VarMap::Split {
                pos: cols,
                neg: cols + 1,
            };
            cols += 2;
            m
        };
        maps.push(map);
    }
    let structural = cols;

    // Transformed rows: original rows plus upper-bound rows for shifted vars.
    struct RawRow {
        coeffs: Vec<f64>,
        rel: Relation,
        rhs: f64,
    }
    let mut raw_rows: Vec<RawRow> = Vec::with_capacity(lp.rows.len() + n);
    let transform = |coeffs: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; structural];
        let mut shift = 0.0;
        for (&c, map) in coeffs.iter().zip(&maps) {
            if c == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shifted { col, lo } => {
                    out[col] += c;
                    shift += c * lo;
                }
                VarMap::Flipped { col, hi } => {
                    out[col] -= c;
                    shift += c * hi;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += c;
                    out[neg] -= c;
                }
            }
        }
        (out, shift)
    };
    for row in &lp.rows {
        let (coeffs, shift) = transform(&row.coeffs);
        raw_rows.push(RawRow {
            coeffs,
            rel: row.rel,
            rhs: row.rhs - shift,
        });
    }
    for (j, map) in maps.iter().enumerate() {
        if let VarMap::Shifted { col, lo } = *map {
            if lp.upper[j].is_finite() {
                let mut coeffs = vec![0.0; structural];
                coeffs[col] = 1.0;
                raw_rows.push(RawRow {
                    coeffs,
                    rel: Relation::Le,
                    rhs: lp.upper[j] - lo,
                });
            }
        }
    }

    // Normalize so every rhs is nonnegative, then add slack/artificial columns.
    let m = raw_rows.len();
    let mut n_slack = 0usize;
    let mut n_art = 0usize;
    for row in &mut raw_rows {
        if row.rhs < 0.0 {
            for c in &mut row.coeffs {
                *c = -*c;
            }
            row.rhs = -row.rhs;
            row.rel = match row.rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        match row.rel {
            Relation::Le => n_slack += 1,
            Relation::Ge => {
                n_slack += 1;
                n_art += 1;
            }
            Relation::Eq => n_art += 1,
        }
    }

    let total = structural + n_slack + n_art;
    let artificial_start = structural + n_slack;
    let mut a = vec![vec![0.0; total + 1]; m];
    let mut basis = vec![0usize; m];
    let mut next_slack = structural;
    let mut next_art = artificial_start;
    for (i, row) in raw_rows.iter().enumerate() {
        a[i][..structural].copy_from_slice(&row.coeffs);
        a[i][total] = row.rhs;
        match row.rel {
            Relation::Le => {
                a[i][next_slack] = 1.0;
                basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                a[i][next_slack] = -1.0;
                next_slack += 1;
                a[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                a[i][next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    let mut tab = Tableau {
        a,
        obj: vec![0.0; total + 1],
        basis,
        cols: total,
        pivots: 0,
        degenerate_streak: 0,
        use_bland: false,
        tol: *tol,
    };

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for i in 0..m {
            if tab.basis[i] >= artificial_start {
                for c in 0..=total {
                    tab.obj[c] -= tab.a[i][c];
                }
            }
        }
        // Artificials never re-enter: price only structural + slack columns.
        match tab.run(artificial_start) {
            Step::IterLimit => return LpOutcome::IterLimit,
            Step::Unbounded => return LpOutcome::Infeasible, // cannot happen; defensive
            _ => {}
        }
        let phase1 = -tab.obj[total];
        if phase1 > tol.feas {
            return LpOutcome::Infeasible;
        }
        // Drive leftover artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] >= artificial_start {
                if let Some(j) = (0..artificial_start).find(|&j| tab.a[i][j].abs() > tol.pivot) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    // Phase 2: the real objective over transformed columns.
    let internal_cost: Vec<f64> = {
        let sign = match lp.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let (coeffs, _) = transform(&lp.objective);
        coeffs.iter().map(|c| sign * c).collect()
    };
    tab.obj = vec![0.0; total + 1];
    tab.obj[..structural].copy_from_slice(&internal_cost);
    for i in 0..m {
        let b = tab.basis[i];
        if b < structural && internal_cost[b] != 0.0 {
            let factor = internal_cost[b];
            for c in 0..=total {
                tab.obj[c] -= factor * tab.a[i][c];
            }
        }
    }
    match tab.run(artificial_start) {
        Step::IterLimit => return LpOutcome::IterLimit,
        Step::Unbounded => return LpOutcome::Unbounded,
        _ => {}
    }

    // Recover the original point.
    let mut s = vec![0.0; total];
    for i in 0..m {
        s[tab.basis[i]] = tab.a[i][total];
    }
    let point: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, lo } => lo + s[col],
            VarMap::Flipped { col, hi } => hi - s[col],
            VarMap::Split { pos, neg } => s[pos] - s[neg],
        })
        .collect();
    let value: f64 = lp.objective.iter().zip(&point).map(|(c, v)| c * v).sum();
    debug_assert!(
        lp.point_feasible(&point, tol.feas.max(1e-7)),
        "simplex returned an infeasible optimum"
    );
    LpOutcome::Optimal { value, point }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TightenOutcome {
    /// Strictly better bound (improvement > `tol.improve`); never looser.
    Improved(f64),
    NoChange,
    /// The whole system is infeasible: the branch is dead.
    Infeasible,
}

/// Optimizes `min`/`max` of one variable over the LP and reports the bound
/// only if it strictly improves. `IterLimit` degrades to `NoChange`.
pub fn tighten(lp: &LinearProgram, variable: usize, direction: Direction) -> TightenOutcome {
    tighten_with(lp, variable, direction, &LpTolerances::default())
}

pub fn tighten_with(
    lp: &LinearProgram,
    variable: usize,
    direction: Direction,
    tol: &LpTolerances,
) -> TightenOutcome {
    let mut probe = lp.clone();
    probe.set_objective_terms(
        &[(variable, 1.0)],
        match direction {
            Direction::Lower => Sense::Minimize,
            Direction::Upper => Sense::Maximize,
        },
    );
    match solve_with(&probe, tol) {
        LpOutcome::Optimal { value, .. } => {
            let (old, improved) = match direction {
                Direction::Lower => (lp.lower[variable], value > lp.lower[variable] + tol.improve),
                Direction::Upper => (lp.upper[variable], value < lp.upper[variable] - tol.improve),
            };
            if improved {
                // Never loosen, whatever the solver's round-off did.
                let new = match direction {
                    Direction::Lower => value.max(old),
                    Direction::Upper => value.min(old),
                };
                TightenOutcome::Improved(new)
            } else {
                TightenOutcome::NoChange
            }
        }
        LpOutcome::Infeasible => TightenOutcome::Infeasible,
        LpOutcome::Unbounded | LpOutcome::IterLimit => TightenOutcome::NoChange,
    }
}

/// Variable layout of an encoded relaxation.
#[derive(Debug, Clone)]
pub struct RelaxationVars {
    pub x: Vec<usize>,
    pub z: Vec<Vec<usize>>,
    pub zhat: Vec<Vec<usize>>,
    pub indicator: Vec<Vec<Option<usize>>>,
    pub y: Vec<usize>,
}

impl RelaxationVars {
    pub fn z_of(&self, id: NeuronId) -> usize {
        self.z[id.layer][id.pos]
    }
}

#[derive(Debug, Clone)]
pub struct RelaxationLp {
    pub lp: LinearProgram,
    pub vars: RelaxationVars,
}

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("neuron {0} has non-finite bounds; caller must pre-bound")]
    NonFiniteBounds(NeuronId),
}

/// Encodes the LP relaxation of the phase-constrained big-M system.
///
/// Per hidden neuron: `z = W zhat_prev + b`; Active fixes `zhat = z >= 0`;
/// Inactive fixes `zhat = 0, z <= 0`; an unassigned unstable neuron gets the
/// relaxed indicator `a` in `[0,1]` with rows `zhat >= z`, `zhat <= a u`,
/// `zhat <= z - l (1 - a)`. Unassigned stable neurons encode exactly.
pub fn encode_relaxation(
    net: &Network,
    input_box: &[(f64, f64)],
    phases: &PhaseAssignment,
    bounds: &NeuronBounds,
) -> Result<RelaxationLp, EncodeError> {
    let hidden = net.hidden_layers();
    let mut count = 0usize;
    let x: Vec<usize> = (0..net.input_dim)
        .map(|_| {
            let v = count;
            count += 1;
            v
        })
        .collect();
    let mut z = Vec::with_capacity(hidden.len());
    let mut zhat = Vec::with_capacity(hidden.len());
    let mut indicator = Vec::with_capacity(hidden.len());
    for (li, layer) in hidden.iter().enumerate() {
        let mut zl = Vec::with_capacity(layer.out_dim());
        let mut hl = Vec::with_capacity(layer.out_dim());
        let mut al = Vec::with_capacity(layer.out_dim());
        for ni in 0..layer.out_dim() {
            let id = NeuronId::new(li, ni);
            let nb = bounds.get(id);
            if !nb.pre_lo.is_finite() || !nb.pre_hi.is_finite() {
                return Err(EncodeError::NonFiniteBounds(id));
            }
            zl.push(count);
            count += 1;
            hl.push(count);
            count += 1;
            let unstable = phases.get(id).is_none() && nb.is_unstable();
            al.push(unstable.then(|| {
                let v = count;
                count += 1;
                v
            }));
        }
        z.push(zl);
        zhat.push(hl);
        indicator.push(al);
    }
    let y: Vec<usize> = (0..net.output_dim())
        .map(|_| {
            let v = count;
            count += 1;
            v
        })
        .collect();

    let mut lp = LinearProgram::new(count);
    for (i, &xv) in x.iter().enumerate() {
        lp.set_bounds(xv, input_box[i].0, input_box[i].1);
    }

    for (li, layer) in hidden.iter().enumerate() {
        for ni in 0..layer.out_dim() {
            let id = NeuronId::new(li, ni);
            let nb = bounds.get(id);
            let (l, u) = (nb.pre_lo, nb.pre_hi);
            let zv = z[li][ni];
            let hv = zhat[li][ni];

            // z = W zhat_prev + b.
            let mut terms: Vec<(usize, f64)> = vec![(zv, 1.0)];
            let prev: &[usize] = if li == 0 { &x } else { &zhat[li - 1] };
            for (k, &w) in layer.weights[ni].iter().enumerate() {
                terms.push((prev[k], -w));
            }
            lp.add_terms(&terms, Relation::Eq, layer.biases[ni]);

            let effective = match phases.get(id) {
                Some(p) => Some(p),
                None if l >= 0.0 => Some(Phase::Active),
                None if u <= 0.0 => Some(Phase::Inactive),
                None => None,
            };
            match effective {
                Some(Phase::Active) => {
                    lp.set_bounds(zv, l.max(0.0), u);
                    lp.set_bounds(hv, l.max(0.0), u.max(0.0));
                    lp.add_terms(&[(hv, 1.0), (zv, -1.0)], Relation::Eq, 0.0);
                }
                Some(Phase::Inactive) => {
                    lp.set_bounds(zv, l, u.min(0.0));
                    lp.set_bounds(hv, 0.0, 0.0);
                }
                None => {
                    let av = indicator[li][ni].expect("unstable neuron has indicator");
                    lp.set_bounds(zv, l, u);
                    lp.set_bounds(hv, 0.0, u.max(0.0));
                    lp.set_bounds(av, 0.0, 1.0);
                    // zhat >= z
                    lp.add_terms(&[(hv, 1.0), (zv, -1.0)], Relation::Ge, 0.0);
                    // zhat <= a u
                    lp.add_terms(&[(hv, 1.0), (av, -u)], Relation::Le, 0.0);
                    // zhat <= z - l (1 - a)  <=>  zhat - z - l a <= -l
                    lp.add_terms(&[(hv, 1.0), (zv, -1.0), (av, -l)], Relation::Le, -l);
                }
            }
        }
    }

    if let Some(out_layer) = net.layers.last() {
        let prev: &[usize] = match hidden.len() {
            0 => &x,
            n => &zhat[n - 1],
        };
        for (oi, &yv) in y.iter().enumerate() {
            let mut terms: Vec<(usize, f64)> = vec![(yv, 1.0)];
            for (k, &w) in out_layer.weights[oi].iter().enumerate() {
                terms.push((prev[k], -w));
            }
            lp.add_terms(&terms, Relation::Eq, out_layer.biases[oi]);
            lp.set_bounds(yv, bounds.out_lo[oi], bounds.out_hi[oi]);
        }
    }

    Ok(RelaxationLp {
        lp,
        vars: RelaxationVars {
            x,
            z,
            zhat,
            indicator,
            y,
        },
    })
}

impl RelaxationLp {
    /// Appends the disjunct's inequalities `c . y <= d` (closed form; strict
    /// flags are handled at witness-validation time).
    pub fn add_disjunct(&mut self, disjunct: &Conjunction) {
        for ineq in disjunct {
            let terms: Vec<(usize, f64)> = ineq
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, &c)| (self.vars.y[i], c))
                .collect();
            self.lp.add_terms(&terms, Relation::Le, ineq.rhs);
        }
    }

    /// Adds a free margin variable `t` with `c . y + t <= d` per inequality
    /// and maximizes it: the optimum is the best worst-case slack of the
    /// disjunct, and the point is the deepest interior witness.
    pub fn add_max_margin_objective(&mut self, disjunct: &Conjunction) -> usize {
        let t = self.lp.num_vars();
        self.lp.lower.push(f64::NEG_INFINITY);
        self.lp.upper.push(f64::INFINITY);
        self.lp.objective.push(0.0);
        for row in &mut self.lp.rows {
            row.coeffs.push(0.0);
        }
        for ineq in disjunct {
            let mut terms: Vec<(usize, f64)> = ineq
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(i, &c)| (self.vars.y[i], c))
                .collect();
            terms.push((t, 1.0));
            self.lp.add_terms(&terms, Relation::Le, ineq.rhs);
        }
        self.lp.set_objective_terms(&[(t, 1.0)], Sense::Maximize);
        t
    }

    /// Extracts the input components of an LP point.
    pub fn input_point(&self, point: &[f64]) -> Vec<f64> {
        self.vars.x.iter().map(|&v| point[v]).collect()
    }
}
