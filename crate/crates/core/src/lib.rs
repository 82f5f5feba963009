//! Exact-arithmetic kernel for jet calculus on formal neighborhoods of
//! diagonal embeddings.
//!
//! The crate implements, over the Gaussian rationals and at explicit finite
//! truncation order:
//!
//! * sparse truncated power series in three variable groups with per-group
//!   reliable-order tracking ([`series`]);
//! * the shuffle coalgebra / symmetric algebra pair with symmetrization
//!   inclusion and projection, and derivation extensions of degree-raising
//!   homomorphisms ([`tensor`]);
//! * jet groups of automorphisms of the formal disc and their semidirect
//!   structure ([`jets`]);
//! * flat torsion-free connection jets, their exponential jets, and
//!   pushforwards ([`connection`]);
//! * Kähler chart metrics, the Chern connection, its curvature tower, the
//!   curvature-twisted Dolbeault differential and the covariant Taylor
//!   expansion pipeline ([`kahler`], [`dolbeault`]);
//! * families of fiberwise connections, their gauge forms and the
//!   Maurer–Cartan check ([`section`]).
//!
//! Every identity test in the crate asserts *exact* zero inside an
//! explicitly tracked reliability window; there are no tolerances anywhere.

pub mod config;
pub mod connection;
pub mod covariant;
pub mod dolbeault;
pub mod error;
pub mod export;
pub mod jets;
pub mod kahler;
pub mod matrix;
pub mod num;
pub mod rng;
pub mod section;
pub mod series;
pub mod suites;
pub mod tensor;


pub use config::{Certificate, MetricKind, RunConfig, SuiteKind};
pub use suites::{resolve_metric, run_suite, run_suites};
pub use error::{Error, Result};
pub use num::GaussianRational;
pub use series::{Group, MultiIndex, TruncSeries, VarSpec, RELIABLE_EXACT};
pub use tensor::{sym_include, sym_project, HomTensor, SymPoly, TensorWord};
