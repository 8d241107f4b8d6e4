//! Simulation and model-based characterization of photon-subtraction phase
//! gates acting on coherent-state ("cat") qubits.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod characterization;
pub mod error;
pub mod fock;
pub mod homodyne;
pub mod optimize;
pub mod pipeline;
pub mod states;

pub use channel::{
    arm_branches, gate, gate_on_arm, loss_channel, subtract_bad, subtract_good, success_probability, ChannelOutput,
    GateParams,
};
pub use error::{Error, Result};
pub use fock::{
    fidelity_pure, overlap, partial_trace, tensor, wigner, wigner_at, DensityOperator, FockKet, GridSpec, Mode,
    ModeOperator, WignerGrid, C64,
};
pub use pipeline::{run_pipeline, PipelineReport, Preset, RunConfig};
pub use states::{BellKind, BlochPoint, CatQubitSpec, Parity, SqueezerModel};
