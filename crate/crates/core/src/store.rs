//! The replicated message set and its on-disk form.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{decode_symbols, encode_symbols, FieldId};

pub const STORE_FILE_VERSION: u32 = 1;

/// K equal-length messages, identical at every database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageStore {
    field: FieldId,
    messages: Vec<Vec<u16>>,
    original_lengths: Vec<usize>,
}

impl MessageStore {
    /// Takes messages that already share one length.
    pub fn new(field: FieldId, messages: Vec<Vec<u16>>) -> Result<Self> {
        let lens = messages.iter().map(Vec::len).collect();
        Self::with_original_lengths(field, messages, lens)
    }

    pub fn with_original_lengths(
        field: FieldId,
        messages: Vec<Vec<u16>>,
        original_lengths: Vec<usize>,
    ) -> Result<Self> {
        if messages.is_empty() {
            return Err(Error::InvalidParams("store needs at least one message".into()));
        }
        if original_lengths.len() != messages.len() {
            return Err(Error::LengthMismatch { left: messages.len(), right: original_lengths.len() });
        }
        let len = messages[0].len();
        for m in &messages {
            if m.len() != len {
                return Err(Error::LengthMismatch { left: len, right: m.len() });
            }
            if let Some(&v) = m.iter().find(|&&v| !field.contains(v)) {
                return Err(Error::ValueOutOfRange { value: v, field });
            }
        }
        if original_lengths.iter().any(|&o| o > len) {
            return Err(Error::StoreFormat("original length exceeds stored length".into()));
        }
        Ok(MessageStore { field, messages, original_lengths })
    }

    /// Zero-pads every message to the smallest common multiple of
    /// `block_len` that fits the longest one.
    pub fn padded(field: FieldId, mut messages: Vec<Vec<u16>>, block_len: usize) -> Result<Self> {
        if block_len == 0 {
            return Err(Error::InvalidParams("block length must be positive".into()));
        }
        let original: Vec<usize> = messages.iter().map(Vec::len).collect();
        let longest = original.iter().copied().max().unwrap_or(0);
        let target = longest.div_ceil(block_len).max(1) * block_len;
        for m in &mut messages {
            m.resize(target, 0);
        }
        Self::with_original_lengths(field, messages, original)
    }

    pub fn random(field: FieldId, k: usize, len: usize, block_len: usize, rng: &mut dyn RngCore) -> Result<Self> {
        let order = field.order();
        let messages = (0..k).map(|_| (0..len).map(|_| rng.gen_range(0..order)).collect()).collect();
        Self::padded(field, messages, block_len)
    }

    pub fn field(&self) -> FieldId {
        self.field
    }

    pub fn k(&self) -> usize {
        self.messages.len()
    }

    /// Stored (padded) symbols per message.
    pub fn len(&self) -> usize {
        self.messages[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn messages(&self) -> &[Vec<u16>] {
        &self.messages
    }

    /// Message `i`, 1-based, including padding.
    pub fn message(&self, i: usize) -> Result<&[u16]> {
        self.check_index(i)?;
        Ok(&self.messages[i - 1])
    }

    pub fn original_lengths(&self) -> &[usize] {
        &self.original_lengths
    }

    /// Drops padding from a decoded copy of message `i`.
    pub fn unpad(&self, i: usize, decoded: &[u16]) -> Result<Vec<u16>> {
        self.check_index(i)?;
        let keep = self.original_lengths[i - 1].min(decoded.len());
        Ok(decoded[..keep].to_vec())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.k() {
            return Err(Error::InvalidIndex { index: i, max: self.k() });
        }
        Ok(())
    }

    pub fn block_count(&self, block_len: usize) -> Result<usize> {
        if block_len == 0 || !self.len().is_multiple_of(block_len) || self.is_empty() {
            return Err(Error::Shape(format!(
                "stored length {} is not a positive multiple of block length {block_len}",
                self.len()
            )));
        }
        Ok(self.len() / block_len)
    }

    /// Block `b` (0-based) of every message.
    pub fn block(&self, b: usize, block_len: usize) -> Vec<&[u16]> {
        self.messages.iter().map(|m| &m[b * block_len..(b + 1) * block_len]).collect()
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update([self.field.to_wire()]);
        h.update((self.k() as u32).to_be_bytes());
        for m in &self.messages {
            let mut buf = Vec::with_capacity(m.len() * 2);
            encode_symbols(m, &mut buf);
            h.update((m.len() as u64).to_be_bytes());
            h.update(&buf);
        }
        hex::encode(&h.finalize()[..])
    }

    pub fn to_json(&self) -> String {
        let doc = StoreDocument {
            version: STORE_FILE_VERSION,
            k: self.k(),
            field: self.field.to_string(),
            original_lengths: self.original_lengths.clone(),
            messages: self
                .messages
                .iter()
                .map(|m| {
                    let mut buf = Vec::new();
                    encode_symbols(m, &mut buf);
                    B64.encode(buf)
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("store document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: StoreDocument = serde_json::from_str(text).map_err(|e| Error::StoreFormat(e.to_string()))?;
        if doc.version != STORE_FILE_VERSION {
            return Err(Error::StoreFormat(format!("unsupported version {}", doc.version)));
        }
        let field: FieldId = doc.field.parse()?;
        if doc.messages.len() != doc.k {
            return Err(Error::StoreFormat(format!("k = {} but {} messages present", doc.k, doc.messages.len())));
        }
        let messages = doc
            .messages
            .iter()
            .map(|s| {
                let bytes = B64.decode(s).map_err(|e| Error::StoreFormat(e.to_string()))?;
                decode_symbols(&bytes, field)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::with_original_lengths(field, messages, doc.original_lengths)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreDocument {
    version: u32,
    k: usize,
    field: String,
    original_lengths: Vec<usize>,
    messages: Vec<String>,
}
