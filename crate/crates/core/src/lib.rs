//! Hypoelliptic log-Sobolev constants on SU(2) and the quantum Markov
//! semigroups transferred from them.
//!
//! Modules build on each other in order: [`numkit`] (Hermitian spectra and
//! matrix functions), [`su2repr`], [`qms`], [`entfun`], [`pwfun`],
//! [`gradest`], [`mlsiopt`] and [`transfer`]. The guide in `book/` walks
//! through them; its examples run as doctests.

pub mod entfun;
pub mod error;
pub mod gradest;
pub mod mlsiopt;
pub mod numkit;
pub mod pwfun;
pub mod qms;
pub mod su2repr;
pub mod transfer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/representations.md")]
    mod representations {}
    #[doc = include_str!("../../../book/src/semigroup.md")]
    mod semigroup {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/band_limited.md")]
    mod band_limited {}
    #[doc = include_str!("../../../book/src/gradient.md")]
    mod gradient {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/transference.md")]
    mod transference {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
