//! Position-biased weight and dropout for aspect sentiment classification.
//!
//! The crate covers the whole pipeline: reading SemEval and ARTS corpora
//! ([`corpus`]), the position weights and position dropout ([`posbias`]), a
//! small tape-based autodiff core ([`numcore`]), five neural encoders
//! ([`models`]), training ([`trainer`]), the in-domain / out-of-domain /
//! adversarial evaluation grid ([`robeval`]) and token-level explanations
//! ([`explain`]).
//!
//! ```
//! use posasc::posbias::position_weights;
//! let p = position_weights(5, 1, 2)?;
//! assert_eq!(p.values, vec![0.5, 0.75, 0.25, 0.75, 0.5]);
//! # Ok::<(), posasc::posbias::PosBiasError>(())
//! ```

pub mod corpus;
pub mod explain;
pub mod models;
pub mod numcore;
pub mod posbias;
pub mod robeval;
pub mod synthetic;
pub mod trainer;

/// The guide's chapters, compiled as doctests so their snippets stay current.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/position-weights.md")]
    pub mod position_weights {}
    #[doc = include_str!("../../../book/src/position-dropout.md")]
    pub mod position_dropout {}
    #[doc = include_str!("../../../book/src/models.md")]
    pub mod models {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/robustness.md")]
    pub mod robustness {}
    #[doc = include_str!("../../../book/src/proximity.md")]
    pub mod proximity {}
    #[doc = include_str!("../../../book/src/explain.md")]
    pub mod explain {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
}
