//! Blocking TCP transport: one session per connection.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::time::Duration;

use rand::RngCore;

use super::wire;
use crate::error::{Error, Result};
use crate::protocol::{self, Message, SessionConfig, SessionState};

pub const IO_TIMEOUT: Duration = Duration::from_secs(10);

/// Runs one session over `stream` until it completes or fails.
pub fn run_session<S, R>(
    stream: &mut S,
    config: SessionConfig,
    password: &[u8],
    rng: &mut R,
) -> Result<SessionState>
where
    S: Read + Write,
    R: RngCore + ?Sized,
{
    let params = std::sync::Arc::clone(&config.params);
    let (mut state, hello) = protocol::start_session(config, password, rng)?;
    wire::send_message(stream, &hello)?;
    while !state.is_complete() {
        let msg = wire::recv_message(stream, &params)?;
        match &msg {
            Message::Exchange { .. } => state.process_exchange(&msg)?,
            Message::Confirm { .. } => state.verify_confirmation(&msg)?,
        }
        while state.can_confirm() {
            let tag = state.make_confirmation()?;
            wire::send_message(stream, &tag)?;
        }
    }
    Ok(state)
}

/// Accepts a single connection on `listener` and plays the responder.
pub fn serve<R: RngCore + ?Sized>(
    listener: &TcpListener,
    config: SessionConfig,
    password: &[u8],
    rng: &mut R,
) -> Result<SessionState> {
    let (mut stream, _) = listener.accept()?;
    prepare(&stream)?;
    run_session(&mut stream, config, password, rng)
}

/// Connects to `addr` and plays the initiator.
pub fn connect<A: ToSocketAddrs, R: RngCore + ?Sized>(
    addr: A,
    config: SessionConfig,
    password: &[u8],
    rng: &mut R,
) -> Result<SessionState> {
    let mut stream = TcpStream::connect(addr)?;
    prepare(&stream)?;
    run_session(&mut stream, config, password, rng)
}

fn prepare(stream: &TcpStream) -> Result<()> {
    stream.set_read_timeout(Some(IO_TIMEOUT)).map_err(Error::from)?;
    stream.set_write_timeout(Some(IO_TIMEOUT)).map_err(Error::from)?;
    stream.set_nodelay(true).map_err(Error::from)
}
