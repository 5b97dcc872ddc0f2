//! A synchronous mesh-connected computer simulator with exact step
//! accounting, and the minimal spanning forest and connected component
//! algorithms that run on it.
//!
//! The crate is layered bottom-up:
//!
//! - [`mesh`]: the processor grid, synchronous steps, per-processor storage
//!   limits and the step counter.
//! - [`curve`]: Hilbert ranks, which fix the processor order every sort
//!   targets.
//! - [`primitives`]: sorting, segmented scans, batched lookup and routing,
//!   all built from synchronous steps.
//! - [`msf`]: Borůvka-style coarsening, tree labeling and the recursive
//!   spanning forest driver.
//! - [`oracle`]: sequential ground truth (Kruskal, union-find) and result
//!   verification.
//! - [`graph`] and [`experiment`]: graph files, generators, end-to-end runs
//!   and scaling benchmarks.

pub mod curve;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod mesh;
pub mod msf;
pub mod oracle;
pub mod primitives;
pub mod record;
pub mod trace;

pub use error::{MeshError, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/mesh-model.md")]
    pub mod mesh_model {}
    #[doc = include_str!("../../../book/src/hilbert-order.md")]
    pub mod hilbert_order {}
    #[doc = include_str!("../../../book/src/primitives.md")]
    pub mod primitives {}
    #[doc = include_str!("../../../book/src/coarsening.md")]
    pub mod coarsening {}
    #[doc = include_str!("../../../book/src/labeling.md")]
    pub mod labeling {}
    #[doc = include_str!("../../../book/src/recursion.md")]
    pub mod recursion {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
