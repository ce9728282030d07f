//! Max-Cut QAOA training workbench.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: Max-Cut instances, random graph models and the exact
//!   brute-force solver used as the approximation-ratio denominator.
//! * [`statevec`]: a dense state-vector simulator with the gate kernels
//!   needed by the ansatz (ZZ phases, X/Y rotations, XY exchange).
//! * [`ansatz`]: multi-angle and single-angle QAOA circuits over a graph.
//! * [`optim`]: parameter-shift gradients restricted to a mask, and AdaGrad.
//! * [`trainer`]: the training strategies (joint, layerwise grafting,
//!   round-robin, round-robin with layer freezing, sublayer variants).
//! * [`metrics`]: ACR, steps to converge, RPS, GIPS and aggregation.
//! * [`experiment`]: run/sweep configuration files and the sweep runner.

pub mod ansatz;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod optim;
pub mod statevec;
pub mod trainer;

pub use ansatz::{Ansatz, EvalMode, Layout, Mixer, ParamSet};
pub use error::{Error, Result};
pub use graph::{CutResult, Graph};
pub use optim::{AdaGrad, Gradient};
pub use statevec::{SampleCounts, StateVector};
pub use trainer::{History, Strategy, TrainerConfig};
