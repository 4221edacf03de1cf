//! Symbolic and numeric tools for generalized Euler coordinates on the
//! compact groups SU(N) and SO(N).
//!
//! The crate provides:
//! - exact scalar arithmetic over rationals, roots of unity, and powers of pi;
//! - the standard generator basis and the closed-form exponentials used by the
//!   factorized coordinates;
//! - the recursive parametrization map, its inverse, and the diagonal-shift
//!   identities it satisfies;
//! - Haar measure in these coordinates: densities, normalization constants,
//!   exact samplers, Monte Carlo and quadrature integration;
//! - finite-type functions (trigonometric polynomials in the coordinates) and
//!   symbolic matrix entries;
//! - the abelianization map sending finite-type functions to Laurent-style
//!   data on a torus, exact moment evaluation, spectra, and the convex-hull
//!   test behind the moment-vanishing probe.

pub mod abelianize;
pub mod cli;
pub mod euler;
pub mod exact;
pub mod finite_type;
pub mod generators;
pub mod haar;

pub use abelianize::{AbelianError, AdmissibleFunction, HullVerdict, ProbeReport, Spectrum};
pub use euler::{EulerAngles, EulerError, Group};
pub use exact::{CyclotomicNumber, ExactError, ExactScalar};
pub use finite_type::{EntryPolynomial, FiniteTypeError, FiniteTypeFunction};
pub use generators::{CMatrix, GeneratorError};
