//! Mass-lumped P1 finite element solver and verification toolkit for the
//! heat equation with Dirichlet boundary conditions and data of low
//! integrability (initial condition and right hand side merely in L¹).
//!
//! The crate provides:
//! - simplicial meshes of intervals and of the unit square, with
//!   nonobtuseness / discrete-comparison-principle diagnostics ([`mesh`]),
//! - a small sparse/dense linear algebra kernel ([`linalg`]),
//! - the P1 Lagrange space with consistent and lumped mass, stiffness,
//!   interpolation, L² projection, and measured lumping constants
//!   ([`fespace`]),
//! - scalar truncation operators and the executable forms of the
//!   truncation inequalities they satisfy on nonobtuse meshes
//!   ([`truncation`]),
//! - the mass-lumped implicit Euler time stepper together with the
//!   space-time trial/test norms and form assembly used for inf-sup
//!   diagnostics ([`scheme`]),
//! - estimate monitors, weak-Lᵖ space-time norms, residual evaluation and
//!   refinement studies ([`diagnostics`]),
//! - a registry of named problem data used by the command line front end
//!   ([`registry`]).
//!
//! All numerical kernels are generic over the floating point type through
//! the [`Scalar`] trait; the type aliases below fix the `f64`
//! instantiations used by the command line tools.

pub mod diagnostics;
pub mod fespace;
pub mod levelset;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod registry;
pub mod rng;
pub mod scalar;
pub mod scheme;
pub mod truncation;

pub use scalar::Scalar;

/// Double precision mesh.
pub type Mesh64 = mesh::Mesh<f64>;
/// Double precision sparse matrix.
pub type CsrMatrix64 = linalg::CsrMatrix<f64>;
/// Double precision dense matrix.
pub type DenseMatrix64 = linalg::DenseMatrix<f64>;
/// Double precision P1 function.
pub type FeFunction64 = fespace::FeFunction<f64>;
/// Double precision time partition.
pub type TimePartition64 = scheme::TimePartition<f64>;
/// Double precision space-time trajectory.
pub type SpaceTimeFeFunction64 = scheme::SpaceTimeFeFunction<f64>;
/// Double precision problem data.
pub type ProblemData64 = scheme::ProblemData<f64>;
