pub mod boundary;
pub mod error;
pub mod experiments;
pub mod field;
pub mod geometry;
pub mod identities;
pub mod io;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/boundary.md")]
    mod boundary {}
    #[doc = include_str!("../../../book/src/identities.md")]
    mod identities {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/inviscid_limit.md")]
    mod inviscid_limit {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
