//! `length (4B BE) | type (1B) | payload`, where length counts the payload
//! only.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAX_PAYLOAD: u32 = 16 << 20;
pub const HEADER_LEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameType {
    Query = 0x01,
    Answer = 0x02,
    Error = 0x03,
}

impl FrameType {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(FrameType::Query),
            0x02 => Some(FrameType::Answer),
            0x03 => Some(FrameType::Error),
            _ => None,
        }
    }
}

/// Reason codes carried in the first payload byte of an ERROR frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    Malformed = 0x01,
    UnknownType = 0x02,
    WrongRecipient = 0x03,
    ParamsMismatch = 0x04,
    BadQuery = 0x05,
    UnexpectedFrame = 0x06,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameType,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("frame header truncated")]
    TruncatedHeader,
    #[error("frame payload truncated: expected {expected} bytes")]
    TruncatedPayload { expected: u32 },
    #[error("payload length {0} exceeds limit")]
    Oversized(u32),
    #[error("unknown frame type {0:#04x}")]
    UnknownType(u8),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FrameError {
    pub fn code(&self) -> ErrorCode {
        match self {
            FrameError::UnknownType(_) => ErrorCode::UnknownType,
            _ => ErrorCode::Malformed,
        }
    }
}

impl Frame {
    pub fn query(payload: Vec<u8>) -> Self {
        Frame { kind: FrameType::Query, payload }
    }

    pub fn answer(payload: Vec<u8>) -> Self {
        Frame { kind: FrameType::Answer, payload }
    }

    pub fn error(code: ErrorCode, reason: &str) -> Self {
        let mut payload = vec![code as u8];
        payload.extend_from_slice(reason.as_bytes());
        Frame { kind: FrameType::Error, payload }
    }

    /// `(code, reason)` of an ERROR frame.
    pub fn error_parts(&self) -> Option<(u8, String)> {
        if self.kind != FrameType::Error {
            return None;
        }
        let (code, rest) = self.payload.split_first()?;
        Some((*code, String::from_utf8_lossy(rest).into_owned()))
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.kind as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.encode())?;
        w.flush()
    }

    /// `Ok(None)` on a clean end of stream before any header byte.
    pub fn read_from(r: &mut impl Read) -> Result<Option<Frame>, FrameError> {
        let mut header = [0u8; HEADER_LEN];
        let mut got = 0;
        while got < HEADER_LEN {
            match r.read(&mut header[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => return Err(FrameError::TruncatedHeader),
                Ok(k) => got += k,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let len = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
        if len > MAX_PAYLOAD {
            return Err(FrameError::Oversized(len));
        }
        let kind = FrameType::from_byte(header[4]).ok_or(FrameError::UnknownType(header[4]))?;
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => FrameError::TruncatedPayload { expected: len },
            _ => FrameError::Io(e),
        })?;
        Ok(Some(Frame { kind, payload }))
    }
}
