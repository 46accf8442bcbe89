//! Client-server packet transmission: framed wire format with header
//! verification, stop-and-wait acknowledgment, and resend on failure.

pub mod link;
pub mod receiver;
pub mod sender;
pub mod wire;

pub use link::{memory_duplex, LossyLink, MemoryLink};
pub use receiver::{read_message, receive_loop, ReceiverComponent};
pub use sender::{PacketSender, SenderComponent, DEFAULT_MAX_RETRIES};
pub use wire::{
    decode_and_verify, decode_packet, encode_packet, peek_seq, Ack, AckStatus, ACK_LEN,
    HEADER_LEN, WIRE_MAGIC, WIRE_VERSION,
};
