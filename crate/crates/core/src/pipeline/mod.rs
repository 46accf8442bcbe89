//! Packet/pipe/component/chain substrate.
//!
//! Components exchange packets through bounded pipes and run concurrently;
//! a chain links them, validates payload-kind compatibility, supervises
//! errors, and stops the whole pipeline cleanly.

mod chain;
mod component;
mod pipe;

pub use chain::{Chain, RunningChain};
pub use component::{
    emit_all, Boundary, Component, Emit, Emitter, PassThrough, StageComponent, StreamStage,
};
pub use pipe::{Pipe, PipeState, DEFAULT_PIPE_CAPACITY};
