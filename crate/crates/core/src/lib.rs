//! Workbench for N-phase interleaved series-capacitor step-down converters.

pub mod analysis;
pub mod config;
pub mod engine;
mod error;
pub mod gates;
pub mod regulator;
pub mod spec;
pub mod svg;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/topology.md")]
    mod topology {}
    #[doc = include_str!("../../../book/src/gates.md")]
    mod gates {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/regulator.md")]
    mod regulator {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
