//! N isolated database actors, the retrieval client that talks to them, and
//! the transcript of a session.
//!
//! The client sends exactly one QUERY frame to each database and needs all
//! N ANSWER frames before it decodes anything. Transports are pluggable via
//! [`Endpoint`]: TCP sockets for separate processes, or an actor called
//! directly for in-process runs. Both carry the same canonical bytes.

mod actor;
pub mod frame;

use std::fmt::Write as _;
use std::io::{self, BufReader};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::RngCore;

pub use actor::{DatabaseActor, ServerHandle};
pub use frame::{ErrorCode, Frame, FrameError, FrameType};

use crate::audit::{measure_cost, CostReport, Rational};
use crate::error::{Error, Result};
use crate::schemes::{scheme_for, Answer, PirScheme, RandomnessToken, SchemeParams};
use crate::store::MessageStore;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Something that turns one request frame into one reply frame.
pub trait Endpoint: Sync {
    fn label(&self) -> String;
    fn exchange(&self, request: &Frame) -> Result<Frame>;
}

#[derive(Debug, Clone)]
pub struct TcpEndpoint {
    addr: String,
    timeout: Duration,
}

impl TcpEndpoint {
    pub fn new(addr: impl Into<String>) -> Self {
        TcpEndpoint { addr: addr.into(), timeout: DEFAULT_TIMEOUT }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn transport_err(&self, source: io::Error) -> Error {
        Error::Transport { endpoint: self.addr.clone(), source }
    }
}

impl Endpoint for TcpEndpoint {
    fn label(&self) -> String {
        self.addr.clone()
    }

    fn exchange(&self, request: &Frame) -> Result<Frame> {
        let mut stream = TcpStream::connect(&self.addr).map_err(|e| self.transport_err(e))?;
        stream.set_read_timeout(Some(self.timeout)).map_err(|e| self.transport_err(e))?;
        stream.set_nodelay(true).map_err(|e| self.transport_err(e))?;
        request.write_to(&mut stream).map_err(|e| self.transport_err(e))?;
        let mut reader = BufReader::new(stream);
        match Frame::read_from(&mut reader) {
            Ok(Some(f)) => Ok(f),
            Ok(None) => Err(self.transport_err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                "connection closed before an answer arrived",
            ))),
            Err(FrameError::Io(e)) => Err(self.transport_err(e)),
            Err(e) => Err(Error::Wire(format!("{}: {e}", self.addr))),
        }
    }
}

impl Endpoint for DatabaseActor {
    fn label(&self) -> String {
        format!("in-process db {}", self.db_index())
    }

    fn exchange(&self, request: &Frame) -> Result<Frame> {
        Ok(self.handle(request))
    }
}

/// What one database saw and returned. Holds nothing about the desired
/// index or the user's randomness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatabaseRecord {
    pub db_index: usize,
    pub query_bytes: Vec<u8>,
    pub answer_bytes: Vec<u8>,
    /// Whole frames, headers included.
    pub uploaded_bytes: usize,
    pub downloaded_bytes: usize,
    pub downloaded_symbols: usize,
}

#[derive(Debug, Clone)]
pub struct Transcript {
    pub params: SchemeParams,
    /// Client-side only.
    pub index: usize,
    pub databases: Vec<DatabaseRecord>,
    /// Decoded message including any padding.
    pub message: Vec<u16>,
    pub wall_time: Duration,
}

impl Transcript {
    pub fn downloaded_symbols(&self) -> usize {
        self.databases.iter().map(|d| d.downloaded_symbols).sum()
    }

    pub fn measured_eta(&self) -> Result<Rational> {
        measure_cost(self.downloaded_symbols(), self.message.len())
    }

    pub fn cost_report(&self) -> Result<CostReport> {
        CostReport::new(self.params.scheme.to_string(), self.params, self.measured_eta()?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "scheme {} k={} n={} field={} index={}", p.scheme, p.k, p.n, p.field, self.index);
        for d in &self.databases {
            let _ = writeln!(
                s,
                "  db {}: query {} B, answer {} B, {} symbols downloaded",
                d.db_index, d.uploaded_bytes, d.downloaded_bytes, d.downloaded_symbols
            );
        }
        let _ = writeln!(s, "  message symbols: {}", self.message.len());
        let _ = writeln!(s, "  downloaded symbols: {}", self.downloaded_symbols());
        if let Ok(eta) = self.measured_eta() {
            let _ = writeln!(s, "  eta = {eta}");
        }
        s
    }

    /// Deterministic for a fixed seed: wall time is left out.
    pub fn to_kv(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "transcript.scheme={}", p.scheme);
        let _ = writeln!(s, "transcript.k={}", p.k);
        let _ = writeln!(s, "transcript.n={}", p.n);
        let _ = writeln!(s, "transcript.field={}", p.field);
        let _ = writeln!(s, "transcript.index={}", self.index);
        for d in &self.databases {
            let j = d.db_index;
            let _ = writeln!(s, "transcript.db{j}.query={}", hex::encode(&d.query_bytes));
            let _ = writeln!(s, "transcript.db{j}.answer={}", hex::encode(&d.answer_bytes));
            let _ = writeln!(s, "transcript.db{j}.uploaded_bytes={}", d.uploaded_bytes);
            let _ = writeln!(s, "transcript.db{j}.downloaded_bytes={}", d.downloaded_bytes);
            let _ = writeln!(s, "transcript.db{j}.downloaded_symbols={}", d.downloaded_symbols);
        }
        let _ = writeln!(s, "transcript.message={}", format_symbols(&self.message));
        let _ = writeln!(s, "transcript.message_symbols={}", self.message.len());
        let _ = writeln!(s, "transcript.downloaded_symbols={}", self.downloaded_symbols());
        if let Ok(eta) = self.measured_eta() {
            let _ = writeln!(s, "transcript.eta={eta}");
        }
        s
    }
}

pub fn format_symbols(symbols: &[u16]) -> String {
    symbols.iter().map(|s| format!("{s:02x}")).collect::<Vec<_>>().join(" ")
}

/// Sends query `j` to endpoint `j` only, concurrently, then decodes once
/// every answer is in. Any failure aborts the whole retrieval.
pub fn retrieve_with<E: Endpoint>(
    scheme: &dyn PirScheme,
    index: usize,
    token: &RandomnessToken,
    endpoints: &[E],
) -> Result<(Vec<u16>, Transcript)> {
    let params = *scheme.params();
    if endpoints.len() != params.n {
        return Err(Error::InvalidParams(format!("need {} endpoints, got {}", params.n, endpoints.len())));
    }
    let started = Instant::now();
    let queries = scheme.query_gen(index, token)?;
    let requests: Vec<Frame> = queries.iter().map(|q| Frame::query(q.to_bytes())).collect();

    let replies: Vec<Result<Frame>> = thread::scope(|scope| {
        let handles: Vec<_> =
            endpoints.iter().zip(&requests).map(|(ep, req)| scope.spawn(move || ep.exchange(req))).collect();
        handles.into_iter().map(|h| h.join().expect("endpoint exchange panicked")).collect()
    });

    let mut answers = Vec::with_capacity(params.n);
    let mut databases = Vec::with_capacity(params.n);
    for (j, (reply, request)) in replies.into_iter().zip(&requests).enumerate() {
        let reply = reply?;
        let db_index = j + 1;
        match reply.kind {
            FrameType::Answer => {}
            FrameType::Error => {
                let (code, reason) = reply.error_parts().unwrap_or((0, String::new()));
                return Err(Error::Remote { db_index, code, reason });
            }
            FrameType::Query => return Err(Error::Wire(format!("database {db_index} replied with a QUERY frame"))),
        }
        let answer = Answer::from_bytes(&reply.payload)?;
        if answer.db_index != db_index || answer.field != params.field {
            return Err(Error::Shape(format!("endpoint {} answered as database {}", db_index, answer.db_index)));
        }
        databases.push(DatabaseRecord {
            db_index,
            query_bytes: request.payload.clone(),
            answer_bytes: reply.payload.clone(),
            uploaded_bytes: request.encoded_len(),
            downloaded_bytes: reply.encoded_len(),
            downloaded_symbols: answer.symbol_count(),
        });
        answers.push(answer);
    }
    let message = scheme.decode(index, token, &answers)?;
    let transcript = Transcript { params, index, databases, message: message.clone(), wall_time: started.elapsed() };
    Ok((message, transcript))
}

/// Draws a fresh session token and retrieves over TCP.
pub fn retrieve(
    params: SchemeParams,
    index: usize,
    endpoints: &[String],
    rng: &mut dyn RngCore,
) -> Result<(Vec<u16>, Transcript)> {
    let scheme = scheme_for(params)?;
    let token = scheme.draw_randomness(rng);
    let eps: Vec<TcpEndpoint> = endpoints.iter().map(TcpEndpoint::new).collect();
    retrieve_with(scheme.as_ref(), index, &token, &eps)
}

/// Same byte path as [`retrieve`] with actors called directly. The returned
/// message has its padding removed; the transcript keeps it.
pub fn run_inprocess(
    params: SchemeParams,
    index: usize,
    store: &MessageStore,
    token: &RandomnessToken,
) -> Result<(Vec<u16>, Transcript)> {
    let scheme = scheme_for(params)?;
    let shared = Arc::new(store.clone());
    let actors: Vec<DatabaseActor> = (1..=params.n).map(|j| DatabaseActor::new(j, Arc::clone(&shared))).collect();
    let (message, transcript) = retrieve_with(scheme.as_ref(), index, token, &actors)?;
    Ok((store.unpad(index, &message)?, transcript))
}
