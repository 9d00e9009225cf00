//! Boundary-corrected Strang splitting for diffusion-reaction problems on the
//! unit square.

pub mod cli;
pub mod correction;
pub mod discretization;
pub mod error;
pub mod flows;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod scalar;
pub mod splitting;

pub use error::{Error, Result};
pub use scalar::Real;

pub type GridFunction64 = grid::GridFunction<f64>;
pub type DiscreteOperator64 = discretization::DiscreteOperator<f64>;
pub type BoundarySpec64 = discretization::BoundarySpec<f64>;
pub type ProblemDef64 = problems::ProblemDef<f64>;
pub type CorrectionStrategy64 = correction::CorrectionStrategy<f64>;
pub type SchemeConfig64 = splitting::SchemeConfig<f64>;
pub type FlowTolerance64 = flows::FlowTolerance<f64>;
pub type ConvergenceReport64 = harness::ConvergenceReport<f64>;

pub type GridFunction32 = grid::GridFunction<f32>;
pub type DiscreteOperator32 = discretization::DiscreteOperator<f32>;
