//! Byte framing for the socket transport.
//!
//! ```text
//! frame    = len:u32be payload
//! EXCHANGE = 0x01 identity element
//! CONFIRM  = 0x02 tag[32]
//! ```

use std::io::{self, Read, Write};
use std::sync::Arc;

use crate::codec::{self, Digest, DIGEST_LEN};
use crate::error::{DecodeError, Error, Result};
use crate::group::GroupParams;
use crate::protocol::Message;

pub const KIND_EXCHANGE: u8 = 0x01;
pub const KIND_CONFIRM: u8 = 0x02;

/// Largest payload accepted from the network.
pub const MAX_FRAME: usize = 1 << 20;

pub fn encode_message(msg: &Message) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    match msg {
        Message::Exchange { sender, element } => {
            out.push(KIND_EXCHANGE);
            out.extend(codec::encode_identity(sender)?);
            out.extend(codec::encode_element(element));
        }
        Message::Confirm { tag } => {
            out.push(KIND_CONFIRM);
            out.extend_from_slice(tag.as_bytes());
        }
    }
    Ok(out)
}

pub fn decode_message(payload: &[u8], params: &Arc<GroupParams>) -> Result<Message> {
    let (&kind, body) = payload.split_first().ok_or(DecodeError::Truncated)?;
    match kind {
        KIND_EXCHANGE => {
            let (sender, rest) = codec::decode_label(body)?;
            let width = params.element_width();
            if rest.len() < width {
                return Err(DecodeError::Truncated.into());
            }
            if rest.len() > width {
                return Err(DecodeError::TrailingBytes.into());
            }
            Ok(Message::Exchange {
                sender: sender.to_owned(),
                element: codec::decode_element(rest, params)?,
            })
        }
        KIND_CONFIRM => match body.len() {
            DIGEST_LEN => Ok(Message::Confirm {
                tag: Digest::from_slice(body).expect("length checked"),
            }),
            n if n < DIGEST_LEN => Err(DecodeError::Truncated.into()),
            _ => Err(DecodeError::TrailingBytes.into()),
        },
        k => Err(DecodeError::UnknownKind(k).into()),
    }
}

pub fn write_frame<W: Write>(w: &mut W, payload: &[u8]) -> Result<()> {
    if payload.len() > MAX_FRAME {
        return Err(DecodeError::FrameTooLarge(payload.len()).into());
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

fn read_exact_or_truncated<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => Error::Decode(DecodeError::Truncated),
        _ => Error::from(e),
    })
}

pub fn read_frame<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let mut len = [0u8; 4];
    read_exact_or_truncated(r, &mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(DecodeError::FrameTooLarge(len).into());
    }
    let mut payload = vec![0u8; len];
    read_exact_or_truncated(r, &mut payload)?;
    Ok(payload)
}

pub fn send_message<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    write_frame(w, &encode_message(msg)?)
}

pub fn recv_message<R: Read>(r: &mut R, params: &Arc<GroupParams>) -> Result<Message> {
    decode_message(&read_frame(r)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupElement;

    #[test]
    fn exchange_layout() {
        let toy = GroupParams::toy23();
        let msg = Message::Exchange {
            sender: "A".into(),
            element: GroupElement::from_u64(&toy, 8).unwrap(),
        };
        let bytes = encode_message(&msg).unwrap();
        assert_eq!(bytes, vec![0x01, 0x00, 0x01, b'A', 0x08]);
        assert_eq!(decode_message(&bytes, &toy).unwrap(), msg);
    }

    #[test]
    fn confirm_layout() {
        let toy = GroupParams::toy23();
        let msg = Message::Confirm {
            tag: codec::hash(b""),
        };
        let bytes = encode_message(&msg).unwrap();
        assert_eq!(bytes.len(), 33);
        assert_eq!(bytes[0], 0x02);
        assert_eq!(decode_message(&bytes, &toy).unwrap(), msg);
    }

    #[test]
    fn decode_rejects_malformed() {
        let toy = GroupParams::toy23();
        let cases: [(&[u8], DecodeError); 6] = [
            (&[], DecodeError::Truncated),
            (&[0x07], DecodeError::UnknownKind(0x07)),
            (&[0x01, 0x00, 0x01, b'A'], DecodeError::Truncated),
            (&[0x01, 0x00, 0x01, b'A', 0x08, 0x00], DecodeError::TrailingBytes),
            (&[0x01, 0x00, 0x01, b'A', 0x17], DecodeError::ElementOutOfRange),
            (&[0x02, 0x00], DecodeError::Truncated),
        ];
        for (bytes, err) in cases {
            assert_eq!(decode_message(bytes, &toy).unwrap_err(), Error::Decode(err), "{bytes:?}");
        }
    }

    #[test]
    fn frames_round_trip_and_truncate() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"hello").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 5]);
        assert_eq!(read_frame(&mut buf.as_slice()).unwrap(), b"hello");
        let short = &buf[..7];
        assert_eq!(
            read_frame(&mut &short[..]).unwrap_err(),
            Error::Decode(DecodeError::Truncated)
        );
        let huge = (MAX_FRAME as u32 + 1).to_be_bytes();
        assert!(matches!(
            read_frame(&mut &huge[..]).unwrap_err(),
            Error::Decode(DecodeError::FrameTooLarge(_))
        ));
    }
}
