//! Retrieval schemes behind a single [`PirScheme`] interface.
//!
//! A scheme splits each message into blocks of [`PirScheme::block_len`]
//! symbols. One query per database is generated per session and applied to
//! every block; each database answers with a fixed number of equations per
//! block.

mod download_all;
mod k_rep;
mod symmetrize;
mod two_opt;

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::field::{decode_symbols, encode_symbols, FieldId, SYMBOL_BYTES};
use crate::grid::ShiftToken;
use crate::store::MessageStore;

pub use download_all::DownloadAll;
pub use k_rep::KMessageRepetition;
pub use symmetrize::Symmetrized;
pub use two_opt::{equation_coefficients, TwoMessageOptimal};

/// Canonical query/answer encoding version.
pub const WIRE_VERSION: u8 = 0x01;

/// Randomness spaces larger than this are refused by enumeration.
pub const MAX_ENUMERATION: u128 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseScheme {
    DownloadAll,
    TwoMessageOptimal,
    KMessageRepetition,
}

impl BaseScheme {
    pub fn wire_id(self) -> u8 {
        match self {
            BaseScheme::DownloadAll => 0x00,
            BaseScheme::TwoMessageOptimal => 0x01,
            BaseScheme::KMessageRepetition => 0x02,
        }
    }

    fn label(self) -> &'static str {
        match self {
            BaseScheme::DownloadAll => "all",
            BaseScheme::TwoMessageOptimal => "two-opt",
            BaseScheme::KMessageRepetition => "k-rep",
        }
    }
}

const SYM_FLAG: u8 = 0x80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Base(BaseScheme),
    Symmetrized(BaseScheme),
}

impl SchemeId {
    pub const TWO_OPT: SchemeId = SchemeId::Base(BaseScheme::TwoMessageOptimal);
    pub const K_REP: SchemeId = SchemeId::Base(BaseScheme::KMessageRepetition);
    pub const ALL: SchemeId = SchemeId::Base(BaseScheme::DownloadAll);

    pub fn base(self) -> BaseScheme {
        match self {
            SchemeId::Base(b) | SchemeId::Symmetrized(b) => b,
        }
    }

    /// One byte: 0x00 all, 0x01 two-opt, 0x02 k-rep; symmetrized variants
    /// set the high bit on the inner id.
    pub fn to_wire(self) -> u8 {
        match self {
            SchemeId::Base(b) => b.wire_id(),
            SchemeId::Symmetrized(b) => SYM_FLAG | b.wire_id(),
        }
    }

    pub fn from_wire(byte: u8) -> Result<Self> {
        let base = match byte & !SYM_FLAG {
            0x00 => BaseScheme::DownloadAll,
            0x01 => BaseScheme::TwoMessageOptimal,
            0x02 => BaseScheme::KMessageRepetition,
            _ => return Err(Error::Wire(format!("unknown scheme id {byte:#04x}"))),
        };
        Ok(if byte & SYM_FLAG != 0 { SchemeId::Symmetrized(base) } else { SchemeId::Base(base) })
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeId::Base(b) => f.write_str(b.label()),
            SchemeId::Symmetrized(b) => write!(f, "sym:{}", b.label()),
        }
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let base = |t: &str| match t {
            "two-opt" => Ok(BaseScheme::TwoMessageOptimal),
            "k-rep" => Ok(BaseScheme::KMessageRepetition),
            "all" => Ok(BaseScheme::DownloadAll),
            _ => Err(Error::InvalidParams(format!("unknown scheme {s:?}"))),
        };
        match s.strip_prefix("sym:") {
            Some(inner) => Ok(SchemeId::Symmetrized(base(inner)?)),
            None => Ok(SchemeId::Base(base(s)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeParams {
    pub scheme: SchemeId,
    pub k: usize,
    pub n: usize,
    pub field: FieldId,
}

impl SchemeParams {
    pub fn new(scheme: SchemeId, k: usize, n: usize, field: FieldId) -> Result<Self> {
        let p = SchemeParams { scheme, k, n, field };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("need n >= 2 databases, got {}", self.n)));
        }
        if self.k < 2 {
            return Err(Error::InvalidParams(format!("need k >= 2 messages, got {}", self.k)));
        }
        if self.k > u16::MAX as usize || self.n > u16::MAX as usize {
            return Err(Error::InvalidParams("k and n must fit in 16 bits".into()));
        }
        if self.scheme.base() == BaseScheme::TwoMessageOptimal && self.k != 2 {
            return Err(Error::InvalidParams(format!("two-opt requires k = 2, got {}", self.k)));
        }
        Ok(())
    }

    pub fn with_scheme(self, scheme: SchemeId) -> Self {
        SchemeParams { scheme, ..self }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.k {
            return Err(Error::InvalidIndex { index: i, max: self.k });
        }
        Ok(())
    }
}

/// The user's private randomness for one session. Never sent anywhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RandomnessToken {
    Shift(ShiftToken),
    /// One mask row of length `n - 1` per message.
    Masks(Vec<Vec<u16>>),
    Empty,
    /// One inner token per database rotation.
    Rotations(Vec<RandomnessToken>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryPayload {
    /// Unit-vector index per grid cell of the database's group.
    TwoOpt(Vec<u16>),
    /// Coefficient vector per message.
    KRep(Vec<Vec<u16>>),
    All,
    /// Inner payloads in rotation order.
    Sym(Vec<QueryPayload>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query {
    pub params: SchemeParams,
    pub db_index: usize,
    pub payload: QueryPayload,
}

impl Query {
    /// `version | scheme | k | n | field | db_index | payload`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![WIRE_VERSION, self.params.scheme.to_wire()];
        out.extend_from_slice(&(self.params.k as u16).to_be_bytes());
        out.extend_from_slice(&(self.params.n as u16).to_be_bytes());
        out.push(self.params.field.to_wire());
        out.extend_from_slice(&(self.db_index as u16).to_be_bytes());
        encode_payload(&self.payload, &mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != WIRE_VERSION {
            return Err(Error::Wire(format!("unsupported query version {version:#04x}")));
        }
        let scheme = SchemeId::from_wire(r.u8()?)?;
        let k = r.u16()? as usize;
        let n = r.u16()? as usize;
        let field = FieldId::from_wire(r.u8()?)?;
        let params = SchemeParams::new(scheme, k, n, field).map_err(|e| Error::Wire(e.to_string()))?;
        let db_index = r.u16()? as usize;
        if db_index == 0 || db_index > n {
            return Err(Error::Wire(format!("db index {db_index} outside 1..={n}")));
        }
        let payload = match scheme {
            SchemeId::Base(b) => decode_payload(b, &params, &mut r)?,
            SchemeId::Symmetrized(b) => {
                let count = r.u16()? as usize;
                if count != n {
                    return Err(Error::Wire(format!("symmetrized query has {count} parts, expected {n}")));
                }
                let parts = (0..count).map(|_| decode_payload(b, &params, &mut r)).collect::<Result<_>>()?;
                QueryPayload::Sym(parts)
            }
        };
        r.finish()?;
        Ok(Query { params, db_index, payload })
    }
}

fn encode_payload(p: &QueryPayload, out: &mut Vec<u8>) {
    match p {
        QueryPayload::TwoOpt(units) => {
            out.extend_from_slice(&(units.len() as u16).to_be_bytes());
            encode_symbols(units, out);
        }
        QueryPayload::KRep(rows) => rows.iter().for_each(|r| encode_symbols(r, out)),
        QueryPayload::All => {}
        QueryPayload::Sym(parts) => {
            out.extend_from_slice(&(parts.len() as u16).to_be_bytes());
            parts.iter().for_each(|q| encode_payload(q, out));
        }
    }
}

fn decode_payload(base: BaseScheme, params: &SchemeParams, r: &mut Reader<'_>) -> Result<QueryPayload> {
    let n = params.n;
    match base {
        BaseScheme::TwoMessageOptimal => {
            let count = r.u16()? as usize;
            if count > n {
                return Err(Error::Wire(format!("{count} cells exceeds group size bound {n}")));
            }
            let units = (0..count).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
            if let Some(u) = units.iter().find(|&&u| u == 0 || u as usize > n) {
                return Err(Error::Wire(format!("unit index {u} outside 1..={n}")));
            }
            Ok(QueryPayload::TwoOpt(units))
        }
        BaseScheme::KMessageRepetition => {
            let rows = (0..params.k)
                .map(|_| decode_symbols(r.take((n - 1) * SYMBOL_BYTES)?, params.field))
                .collect::<Result<Vec<_>>>()?;
            Ok(QueryPayload::KRep(rows))
        }
        BaseScheme::DownloadAll => Ok(QueryPayload::All),
    }
}

/// One database's equations, grouped per message block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub db_index: usize,
    pub field: FieldId,
    pub blocks: Vec<Vec<u16>>,
}

impl Answer {
    pub fn symbol_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    /// `version | field | db_index (2B) | blocks (4B) | equations per block
    /// (2B) | equations (2B each, block-major)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let per_block = self.blocks.first().map_or(0, Vec::len);
        let mut out = vec![WIRE_VERSION, self.field.to_wire()];
        out.extend_from_slice(&(self.db_index as u16).to_be_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_be_bytes());
        out.extend_from_slice(&(per_block as u16).to_be_bytes());
        self.blocks.iter().for_each(|b| encode_symbols(b, &mut out));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let version = r.u8()?;
        if version != WIRE_VERSION {
            return Err(Error::Wire(format!("unsupported answer version {version:#04x}")));
        }
        let field = FieldId::from_wire(r.u8()?)?;
        let db_index = r.u16()? as usize;
        let block_count = r.u32()? as usize;
        let per_block = r.u16()? as usize;
        let body = r.take(
            block_count
                .checked_mul(per_block * SYMBOL_BYTES)
                .ok_or_else(|| Error::Wire("answer size overflows".into()))?,
        )?;
        r.finish()?;
        let symbols = decode_symbols(body, field)?;
        let blocks = if per_block == 0 {
            vec![Vec::new(); block_count]
        } else {
            symbols.chunks(per_block).map(<[u16]>::to_vec).collect()
        };
        Ok(Answer { db_index, field, blocks })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < len {
            return Err(Error::Wire(format!("truncated: need {len} bytes at offset {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Wire(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// Everything one local retrieval produced, before any transport.
#[derive(Debug, Clone)]
pub struct Retrieval {
    pub message: Vec<u16>,
    pub queries: Vec<Query>,
    pub answers: Vec<Answer>,
}

impl Retrieval {
    pub fn downloaded_symbols(&self) -> Vec<usize> {
        self.answers.iter().map(Answer::symbol_count).collect()
    }
}

pub trait PirScheme: Send + Sync {
    fn params(&self) -> &SchemeParams;

    /// Message symbols covered by one block.
    fn block_len(&self) -> usize;

    /// Equations database `db` (1-based) returns per block.
    fn equations_per_block(&self, db: usize) -> usize;

    fn draw_randomness(&self, rng: &mut dyn RngCore) -> RandomnessToken;

    /// Number of distinct tokens; saturates at `u128::MAX`.
    fn randomness_space_size(&self) -> u128;

    /// Every token, each equally likely under `draw_randomness`.
    fn randomness_space(&self) -> Result<Vec<RandomnessToken>>;

    /// Queries for databases `1..=n`, in order. Depends only on the
    /// parameters, the desired index and the token.
    fn query_gen(&self, index: usize, token: &RandomnessToken) -> Result<Vec<Query>>;

    /// Equations for one block; `block[m]` is that block of message `m + 1`.
    fn answer_block(&self, payload: &QueryPayload, db: usize, block: &[&[u16]]) -> Result<Vec<u16>>;

    /// Recovers one block of message `index` from the per-database answers
    /// to that block, in database order.
    fn decode_block(&self, index: usize, token: &RandomnessToken, answers: &[&[u16]]) -> Result<Vec<u16>>;

    fn name(&self) -> String {
        self.params().scheme.to_string()
    }

    fn answer(&self, store: &MessageStore, query: &Query) -> Result<Answer> {
        let p = self.params();
        if query.params != *p {
            return Err(Error::Shape(format!("query parameters {:?} do not match scheme {:?}", query.params, p)));
        }
        if store.field() != p.field || store.k() != p.k {
            return Err(Error::Shape(format!(
                "store holds k = {} over {}, scheme expects k = {} over {}",
                store.k(),
                store.field(),
                p.k,
                p.field
            )));
        }
        let bl = self.block_len();
        let blocks = (0..store.block_count(bl)?)
            .map(|b| self.answer_block(&query.payload, query.db_index, &store.block(b, bl)))
            .collect::<Result<_>>()?;
        Ok(Answer { db_index: query.db_index, field: p.field, blocks })
    }

    fn decode(&self, index: usize, token: &RandomnessToken, answers: &[Answer]) -> Result<Vec<u16>> {
        let p = self.params();
        p.check_index(index)?;
        if answers.len() != p.n {
            return Err(Error::Shape(format!("need {} answers, got {}", p.n, answers.len())));
        }
        let block_count = answers[0].blocks.len();
        for (j, a) in answers.iter().enumerate() {
            if a.db_index != j + 1 || a.field != p.field {
                return Err(Error::Shape(format!("answer {} is from database {} over {}", j + 1, a.db_index, a.field)));
            }
            if a.blocks.len() != block_count {
                return Err(Error::Shape("answers cover different numbers of blocks".into()));
            }
            if a.blocks.iter().any(|b| b.len() != self.equations_per_block(j + 1)) {
                return Err(Error::Shape(format!(
                    "database {} must return {} equations per block",
                    j + 1,
                    self.equations_per_block(j + 1)
                )));
            }
        }
        let mut out = Vec::with_capacity(block_count * self.block_len());
        for b in 0..block_count {
            let per_db: Vec<&[u16]> = answers.iter().map(|a| a.blocks[b].as_slice()).collect();
            out.extend(self.decode_block(index, token, &per_db)?);
        }
        Ok(out)
    }

    /// One query per database, reused for every block of the store.
    fn retrieve_blocks(&self, index: usize, store: &MessageStore, token: &RandomnessToken) -> Result<Retrieval> {
        let queries = self.query_gen(index, token)?;
        let answers = queries.iter().map(|q| self.answer(store, q)).collect::<Result<Vec<_>>>()?;
        let message = self.decode(index, token, &answers)?;
        Ok(Retrieval { message, queries, answers })
    }
}

/// Builds the scheme named by `params.scheme`.
pub fn scheme_for(params: SchemeParams) -> Result<Box<dyn PirScheme>> {
    params.validate()?;
    let base = |b: BaseScheme| -> Result<Box<dyn PirScheme>> {
        let p = params.with_scheme(SchemeId::Base(b));
        Ok(match b {
            BaseScheme::TwoMessageOptimal => Box::new(TwoMessageOptimal::new(p)?),
            BaseScheme::KMessageRepetition => Box::new(KMessageRepetition::new(p)?),
            BaseScheme::DownloadAll => Box::new(DownloadAll::new(p)?),
        })
    };
    match params.scheme {
        SchemeId::Base(b) => base(b),
        SchemeId::Symmetrized(b) => Ok(Box::new(Symmetrized::new(base(b)?)?)),
    }
}

fn expect_token<'t, T>(token: &'t RandomnessToken, pick: impl FnOnce(&'t RandomnessToken) -> Option<T>) -> Result<T> {
    pick(token).ok_or_else(|| Error::Shape(format!("randomness token {token:?} does not belong to this scheme")))
}

fn check_answer_count(answers: &[&[u16]], n: usize) -> Result<()> {
    if answers.len() != n {
        return Err(Error::Shape(format!("need {n} answers, got {}", answers.len())));
    }
    Ok(())
}
