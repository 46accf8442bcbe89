//! Drive a built chain to completion and collect its output.

use std::time::Duration;

use ekrt_core::error::Result;
use ekrt_core::packet::Packet;
use ekrt_core::pipeline::Chain;

pub const RUN_TIMEOUT: Duration = Duration::from_secs(600);

/// Start the chain, drain the final pipe until end of stream, and join all
/// components. Returns every packet the last component emitted, in order.
pub fn run_chain_collect(chain: Chain) -> Result<Vec<Packet>> {
    let mut running = chain.start()?;
    let output = running.output();
    let mut packets = Vec::new();
    let mut stall: Option<ekrt_core::error::PipeError> = None;
    loop {
        match output.get() {
            Ok(p) => {
                let eos = p.flags.eos;
                packets.push(p);
                if eos {
                    break;
                }
            }
            Err(ekrt_core::error::PipeError::Terminated) => break,
            Err(e) => {
                stall = Some(e);
                break;
            }
        }
    }
    running.wait(RUN_TIMEOUT)?;
    if let Some(e) = stall {
        return Err(e.into());
    }
    Ok(packets)
}
