//! Maximal operators, commutators and smoothness seminorms on stratified
//! groups, discretized on dilation-adapted lattices.
//!
//! The crate covers three groups (the line, the plane, and the first
//! Heisenberg group), builds gauge-ball stencils on symmetric lattices,
//! evaluates the Hardy-Littlewood, fractional, commutator and local maximal
//! operators by both a fast stencil path and a brute-force oracle, computes
//! Lebesgue/weak/Morrey norms and Lipschitz-type seminorms, and runs the
//! verification suites behind the `stratmax` command line tool.

pub mod accum;
pub mod config;
pub mod error;
pub mod group;
pub mod lattice;
pub mod norms;
pub mod operators;
pub mod report;
pub mod suites;
pub mod symbols;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use group::{Calibration, Group, Point};
pub use lattice::{BallStencil, CoreRegion, GridFunction, Index, LatticeSpec, RadiusFamily};
pub use norms::{BallWitness, ExponentTuple};
pub use operators::{BallField, CenterMode, CoreField, EvalContext};
pub use report::{write_csv, CheckClass, CheckReport, CSV_HEADER};
pub use suites::{refinement_drift, GroupSuite, SUITES};
pub use symbols::{Symbol, TestFunction};
