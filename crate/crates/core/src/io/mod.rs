//! Problem input/output: the JSON network format, a VNN-LIB-subset property
//! format, and construction of the internal verification problem.

mod netfmt;
mod vnnlib;

pub use netfmt::{emit_network, parse_network};
pub use vnnlib::{emit_property, parse_property};

use crate::net::{Network, StructuralIssue};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A single linear inequality over network outputs: `coeffs . y <= rhs`,
/// or strictly `<` when `strict` is set. Strict atoms only arise from
/// negation; the source grammar has no strict operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearIneq {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub strict: bool,
}

impl LinearIneq {
    /// Left-hand side value at a concrete output vector.
    pub fn lhs(&self, y: &[f64]) -> f64 {
        self.coeffs.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Slack `rhs - coeffs . y`; positive means strictly inside.
    pub fn slack(&self, y: &[f64]) -> f64 {
        self.rhs - self.lhs(y)
    }

    pub fn holds(&self, y: &[f64]) -> bool {
        let s = self.slack(y);
        if self.strict {
            s > 0.0
        } else {
            s >= 0.0
        }
    }

    /// Logical complement: `c.y <= d` becomes `-c.y < -d` and vice versa.
    pub fn negated(&self) -> LinearIneq {
        LinearIneq {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            rhs: -self.rhs,
            strict: !self.strict,
        }
    }
}

/// Conjunction of linear inequalities over outputs.
pub type Conjunction = Vec<LinearIneq>;

/// Disjunctive normal form: a disjunction of conjunctions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dnf(pub Vec<Conjunction>);

impl Dnf {
    pub fn holds(&self, y: &[f64]) -> bool {
        self.0.iter().any(|conj| conj.iter().all(|a| a.holds(y)))
    }

    /// True iff some disjunct is satisfied with every inequality's slack
    /// strictly greater than `margin` (strictness is restored at validation
    /// time regardless of the atom's own strict flag).
    pub fn holds_with_margin(&self, y: &[f64], margin: f64) -> bool {
        self.0
            .iter()
            .any(|conj| conj.iter().all(|a| a.slack(y) > margin))
    }
}

/// Input box plus output condition and its negation in DNF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub input_box: Vec<(f64, f64)>,
    pub output_condition: Dnf,
    pub negated_output: Dnf,
}

impl Property {
    pub fn input_dim(&self) -> usize {
        self.input_box.len()
    }

    pub fn contains_input(&self, x: &[f64]) -> bool {
        x.len() == self.input_box.len()
            && x.iter()
                .zip(&self.input_box)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    /// Projects a point onto the box. LP witnesses can sit a few ulps outside
    /// their bounds (solver feasibility tolerance); validation is exact, so
    /// candidates are clamped first.
    pub fn clamp_input(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(&self.input_box) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

/// The verification problem: is `net ∧ input_box ∧ negated_output` satisfiable?
/// Unsat means the property is valid.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationProblem {
    pub network: Network,
    pub property: Property,
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("network JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("network is malformed: {}", format_issues(.0))]
    Structural(Vec<StructuralIssue>),
    #[error("property syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unsupported feature: {0}")]
    Unsupported(String),
    #[error("property has no output assertion")]
    NoOutputAssert,
    #[error("input X_{0} is not bounded to a finite box")]
    UnboundedInput(usize),
    #[error("input X_{0} has empty interval [{1}, {2}]")]
    EmptyInputInterval(usize, f64, f64),
    #[error("dimension mismatch: property has {prop} {what}, network has {net}")]
    DimensionMismatch {
        what: &'static str,
        prop: usize,
        net: usize,
    },
    #[error("io: {0}")]
    File(#[from] std::io::Error),
}

fn format_issues(issues: &[StructuralIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Pairs a parsed network and property after checking dimensions.
pub fn build_problem(network: Network, property: Property) -> Result<VerificationProblem, IoError> {
    if property.input_box.len() != network.input_dim {
        return Err(IoError::DimensionMismatch {
            what: "inputs",
            prop: property.input_box.len(),
            net: network.input_dim,
        });
    }
    let out = network.output_dim();
    for dnf in [&property.output_condition, &property.negated_output] {
        for conj in &dnf.0 {
            for atom in conj {
                if atom.coeffs.len() != out {
                    return Err(IoError::DimensionMismatch {
                        what: "output coefficients",
                        prop: atom.coeffs.len(),
                        net: out,
                    });
                }
            }
        }
    }
    Ok(VerificationProblem { network, property })
}
