//! Frame-synchronous WFST decoding: graph and word-table formats, token
//! passing with beam pruning, endpoint-triggered finalization, and N-best
//! extraction.

pub mod component;
pub mod search;
pub mod wfst;
pub mod words;

pub use component::DecoderComponent;
pub use search::{DecoderConfig, TokenDecoder};
pub use wfst::{StateId, Transition, Wfst};
pub use words::{WordTable, EPSILON_SYMBOL};
