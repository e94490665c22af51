//! Numerical laboratory for energy-minimizing maps from two-dimensional
//! metric cones into non-positively curved targets.
//!
//! The crate is organized bottom-up:
//!
//! - [`domain`]: cone meshes with exact cone distances, cotangent weights and
//!   lumped vertex measures.
//! - [`target`]: NPC targets (Euclidean space, the hyperbolic plane, metric
//!   trees) with geodesics, barycenters and the quadruple comparison inequality.
//! - [`energy`]: approximating (ball-averaged) energy densities and the graph
//!   Dirichlet energy.
//! - [`solver`]: the Dirichlet problem for harmonic maps and the scalar
//!   Poisson problem.
//! - [`regularity`]: pointwise Lipschitz constants, Hölder fits, the
//!   Lipschitz-ratio diagnostic and mean-value / sub-harmonicity residuals.
//! - [`hopf_lax`]: the two-parameter infimal convolution and its inequality
//!   checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod energy;
mod error;
pub mod hopf_lax;
pub mod linalg;
pub mod regularity;
pub mod solver;
pub mod target;

pub use domain::{ChartPoint, ComparisonGeometry, ConeSpec, CurvatureBound, DomainMesh, Location};
pub use energy::{DensityTag, EnergyDensityField, MapState};
pub use error::{Error, Result};
pub use hopf_lax::{CylinderCheckReport, HopfLaxConfig, HopfLaxConstants, HopfLaxField};
pub use regularity::LipschitzReport;
pub use solver::{DirichletProblem, InitPolicy, SolverOptions, SolverReport};
pub use target::{MetricTree, NpcTarget, QuadrupleResidual, TargetPoint, TreePoint};
