//! Library behind the `ekrt` command-line tools: chain configuration and
//! assembly, WAV replay, toy-model generation, and RTF benchmarking.

pub mod builder;
pub mod config;
pub mod replay;
pub mod rtf;
pub mod runner;
pub mod toy;
pub mod wav;

pub use builder::{build_chain, ChainInfo, ChainIo};
pub use config::ChainConfig;
pub use replay::ReplayComponent;
pub use rtf::{bench_rtf, RtfReport};
pub use runner::run_chain_collect;
pub use toy::{make_toy_model, write_toy_model, ToyModel, ToySpec};
pub use wav::{read_wav_mono16, write_wav_mono16};
