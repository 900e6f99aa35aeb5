//! A desk-scale numerical laboratory for weighted norm inequalities.
//!
//! Everything here is built on exact piecewise-constant calculus: weights,
//! test functions, and operator outputs are step functions with binary64
//! breakpoints, so averages, level-set measures, and Muckenhoupt-type
//! functionals are computed by finite sums rather than generic quadrature.
//! On top of that base the crate provides shifted dyadic lattices and the
//! covering trick that makes three of them suffice, sparse families with
//! verified carving constants, extremal weight families whose A_p constants
//! and maximal-function lower bounds can be measured against their predicted
//! growth, and matrix-weight machinery (reducing operators, Christ–Goldberg
//! maximal functions) for small dimensions.
//!
//! The `experiment` module and the `sharpweights` binary drive the scaling
//! experiments and the randomized verification suites; `suites` hosts the
//! seeded instance generators those share with the test suite.

pub mod dyadic;
pub mod error;
pub mod experiment;
pub mod functionals;
pub mod matweight;
pub mod operators;
pub mod quadrature;
pub mod sparse;
pub mod stepfn;
pub mod suites;
pub mod weights;

pub use error::{Error, Result};

// Compile-and-run every fenced Rust block in the book so the guide can
// never drift from the library. These items exist only under rustdoc's
// doctest pass; `cargo doc` and normal builds never see them.
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/intro.md")]
pub struct BookIntro;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/step-functions.md")]
pub struct BookStepFunctions;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/dyadic-lattices.md")]
pub struct BookDyadicLattices;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/extremal-weights.md")]
pub struct BookExtremalWeights;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/functionals.md")]
pub struct BookFunctionals;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/operators.md")]
pub struct BookOperators;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sparse-families.md")]
pub struct BookSparseFamilies;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/matrix-weights.md")]
pub struct BookMatrixWeights;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
pub struct BookExperiments;
