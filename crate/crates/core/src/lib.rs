//! Complete verifier for ReLU feed-forward networks.
//!
//! Decides validity of properties `phi_in => phi_out` by DPLL(T) search over
//! neuron activation patterns: a polytope abstraction and LP solver form the
//! theory side, with clause learning, LP-based neuron stabilization, parallel
//! beam search, and restarts on top.

pub mod benchgen;
pub mod bounds;
pub mod io;
pub mod lp;
pub mod net;
pub mod oracle;
pub mod sat;
pub mod search;
pub mod theory;

pub use io::{build_problem, parse_network, parse_property, Property, VerificationProblem};
pub use net::{AffineLayer, Network, NeuronId};
pub use search::{verify, verify_witness, SearchConfig, SearchStats, Verdict, VerifyResult};
