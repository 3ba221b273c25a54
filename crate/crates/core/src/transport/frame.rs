//! Wire framing: 26-byte header followed by the payload.

use crate::error::{Error, Result};

pub const HEADER_LEN: usize = 16 + 1 + 4 + 1 + 4;
pub const MAX_PAYLOAD: usize = 1 << 31;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub session: [u8; 16],
    pub sender: u8,
    pub round: u32,
    pub kind: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.session);
        out.push(self.sender);
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(self.kind);
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses the header and returns the frame skeleton plus the declared payload length.
    pub fn decode_header(h: &[u8]) -> Result<(Frame, usize)> {
        if h.len() < HEADER_LEN {
            return Err(Error::Parse(format!("frame header of {} bytes", h.len())));
        }
        let mut session = [0u8; 16];
        session.copy_from_slice(&h[..16]);
        let sender = h[16];
        let round = u32::from_le_bytes(h[17..21].try_into().unwrap());
        let kind = h[21];
        let len = u32::from_le_bytes(h[22..26].try_into().unwrap()) as usize;
        if len > MAX_PAYLOAD {
            return Err(Error::Parse(format!("payload length {len}")));
        }
        Ok((Frame { session, sender, round, kind, payload: Vec::new() }, len))
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        let (mut f, len) = Frame::decode_header(bytes)?;
        if bytes.len() != HEADER_LEN + len {
            return Err(Error::Parse(format!(
                "frame declares {len} payload bytes but carries {}",
                bytes.len() - HEADER_LEN
            )));
        }
        f.payload = bytes[HEADER_LEN..].to_vec();
        Ok(f)
    }
}

pub fn ring_to_bytes(values: &[u64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn bytes_to_ring(bytes: &[u8]) -> Result<Vec<u64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse(format!("{} bytes is not a whole number of words", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let f = Frame { session: [7; 16], sender: 2, round: 99, kind: 4, payload: vec![1, 2, 3] };
        let bytes = f.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 3);
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
        assert!(Frame::decode(&bytes[..HEADER_LEN + 2]).is_err());
    }
}
