//! Active learning of ε-accurate Pareto fronts over discrete design grids.
//!
//! The crate is organised around the pieces of a measurement campaign:
//!
//! - [`gp`]: Gaussian-process regression with ARD squared-exponential kernels.
//! - [`pal`]: the ε-PAL engine (uncertainty regions, classification, sampling).
//! - [`fls`]: fuzzy linguistic summaries of the optimizer state.
//! - [`embed`]: a UMAP-style 2-D embedding of the design grid.
//! - [`campaign`]: grid construction, measurement ingestion, batch suggestions
//!   and the persisted campaign document.
//! - [`bench`]: Binh-Korn, a synthetic spin-coating surrogate and brute-force
//!   Pareto oracles.
//! - [`suites`]: self-checking benchmark suites with their raw data.
//! - [`api`]: JSON views shared by the HTTP service and its client.

pub mod api;
pub mod bench;
pub mod campaign;
pub mod embed;
pub mod error;
pub mod fls;
pub mod gp;
pub mod pal;
pub mod suites;

pub use error::{Error, Result};
