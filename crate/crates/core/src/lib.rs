//! Causal ordering and Markov ordering of equation systems, robustness of
//! their predictions under model extensions, and numerical checks of the
//! implied independences.
//!
//! Graph algorithms work on vertex indices. Everything that evaluates
//! expressions is generic over [`num::Scalar`]; the aliases below fix the
//! usual `f64` choice.

pub mod error;
pub mod export;
pub mod expr;
pub mod extension;
pub mod fixtures;
pub mod lab;
pub mod matching;
pub mod model;
pub mod num;
pub mod ordering;
pub mod parser;
pub mod query;

pub use error::Error;
pub use model::{DynamicalModel, ExtensionSpec, IncidenceModel};
pub use ordering::{causal_ordering, markov_ordering, ClusterGraph, MarkovDag};
pub use parser::{parse, ModelSet};

/// Equilibrium solver in double precision.
pub type Solver = lab::NewtonSolver<f64>;
/// Equilibrium solver in single precision.
pub type SolverF32 = lab::NewtonSolver<f32>;
/// Samples in double precision.
pub type Samples = lab::SampleSet<f64>;
/// Samples in single precision.
pub type SamplesF32 = lab::SampleSet<f32>;
