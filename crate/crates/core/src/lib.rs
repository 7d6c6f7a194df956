//! Estimation of a finite-population mean under linear systematic sampling,
//! using an auxiliary variable with known mean.
//!
//! The crate provides
//!
//! - the population model and its design moments ([`population`]),
//! - the systematic design and its exhaustive enumeration ([`design`]),
//! - the mean, ratio, product, exponential-ratio and transformed exponential
//!   estimators, including optimal constants for the last one ([`estimators`]),
//! - first-order bias, variance and MSE expressions with a PRE table
//!   ([`theory`]),
//! - exact design evaluation, synthetic populations and intraclass
//!   correlation sweeps ([`evaluate`]),
//! - the `syssamp` command-line front end ([`cli`]).
//!
//! ```
//! use syssamp::population::{load_population, moments_from_population};
//! use syssamp::theory::var_t0;
//! use syssamp::evaluate::{exact_design_eval, EstimatorSpec};
//!
//! let pop = load_population([1.0, 2.0, 3.0, 4.0].map(|v| (v, v)))?;
//! let m = moments_from_population(&pop, 2)?;
//! let exact = exact_design_eval(&pop, 2, EstimatorSpec::Mean)?;
//! assert!((var_t0(&m, pop.mean_y()) - exact.mse).abs() < 1e-12);
//! # Ok::<(), syssamp::Error>(())
//! ```

pub mod cli;
pub mod design;
pub mod error;
pub mod estimators;
pub mod evaluate;
pub mod population;
pub mod theory;

pub use error::{Error, Result};

// Chapters of the guide in book/ are compiled as doctests so their snippets
// stay in sync with the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/population.md")]
    mod population {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/theory.md")]
    mod theory {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
