//! Blurring mean shift (BMS) clustering with runtime convergence diagnostics.
//!
//! Every point is repeatedly replaced by a kernel-weighted mean of the current
//! points. [`engine`] runs the iteration, [`graph`] describes the pairwise
//! interaction structure, [`diagnostics`] checks the contraction and ascent
//! inequalities step by step, and [`clusterer`] turns terminal configurations
//! into labels.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clusterer;
pub mod configuration;
pub mod datasets;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod oracles;

pub use clusterer::{cluster, ClusterResult};
pub use configuration::Configuration;
pub use engine::{bms_step, run_bms, IterationRecord, StopReason, StopRule};
pub use error::{BmsError, Result};
pub use graph::{build_graph, BmsGraph};
pub use kernels::{KernelId, KernelSpec, TruncationClass};
