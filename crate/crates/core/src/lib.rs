//! Loopy belief propagation on factor hypergraphs, the Bethe free energy and its Hessian,
//! and matrix-weighted graph zeta functions tying the two together.

pub mod bethe;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod family;
pub mod generators;
pub mod graph;
pub mod io;
pub mod lbp;
pub mod linalg;
pub mod model;
pub mod zeta;

pub use error::{Error, Result};
pub use family::{ExpFamily, FamilySpec, VertexKind};
pub use graph::{FactorGraph, PrimeCycle};
pub use model::ModelSpec;
