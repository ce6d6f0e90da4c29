//! Small finite fields: GF(2^8) with reduction polynomial 0x11B, and GF(p)
//! for primes p <= 251.
//!
//! Symbols are carried as raw `u16` values inside vectors whose field is
//! known from context (a store or scheme parameters). [`FieldElement`] is the
//! checked, self-describing form used at API boundaries.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Reduction polynomial x^8 + x^4 + x^3 + x + 1.
pub const GF256_POLY: u16 = 0x11B;

/// Byte width of one field element on the wire, for every supported field.
pub const SYMBOL_BYTES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldId {
    Gf256,
    Prime(u8),
}

fn is_prime(p: u16) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

impl FieldId {
    pub fn prime(p: u16) -> Result<Self> {
        if p > 251 || !is_prime(p) {
            return Err(Error::InvalidField(format!("GF({p}) is not a supported prime field")));
        }
        Ok(FieldId::Prime(p as u8))
    }

    pub fn order(self) -> u16 {
        match self {
            FieldId::Gf256 => 256,
            FieldId::Prime(p) => p as u16,
        }
    }

    pub fn characteristic(self) -> u16 {
        match self {
            FieldId::Gf256 => 2,
            FieldId::Prime(p) => p as u16,
        }
    }

    /// One byte: 0x00 for GF(256), otherwise the prime itself.
    pub fn to_wire(self) -> u8 {
        match self {
            FieldId::Gf256 => 0x00,
            FieldId::Prime(p) => p,
        }
    }

    pub fn from_wire(byte: u8) -> Result<Self> {
        match byte {
            0x00 => Ok(FieldId::Gf256),
            p => FieldId::prime(p as u16),
        }
    }

    pub fn contains(self, value: u16) -> bool {
        value < self.order()
    }

    pub fn element(self, value: u16) -> Result<FieldElement> {
        FieldElement::new(value, self)
    }

    pub fn zero(self) -> FieldElement {
        FieldElement { value: 0, field: self }
    }

    pub fn one(self) -> FieldElement {
        FieldElement { value: 1, field: self }
    }

    // Raw symbol arithmetic. Inputs are assumed to already lie in the field.

    #[inline]
    pub fn add(self, x: u16, y: u16) -> u16 {
        match self {
            FieldId::Gf256 => x ^ y,
            FieldId::Prime(p) => (x + y) % p as u16,
        }
    }

    #[inline]
    pub fn neg(self, x: u16) -> u16 {
        match self {
            FieldId::Gf256 => x,
            FieldId::Prime(p) => (p as u16 - x) % p as u16,
        }
    }

    #[inline]
    pub fn sub(self, x: u16, y: u16) -> u16 {
        self.add(x, self.neg(y))
    }

    #[inline]
    pub fn mul(self, x: u16, y: u16) -> u16 {
        match self {
            FieldId::Gf256 => gf256_mul(x as u8, y as u8) as u16,
            FieldId::Prime(p) => (x * y) % p as u16,
        }
    }

    pub fn pow(self, mut base: u16, mut exp: u32) -> u16 {
        let mut acc = 1;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(self, x: u16) -> Result<u16> {
        if x == 0 {
            return Err(Error::ZeroInverse);
        }
        // Fermat: x^(q-2) for a field of order q.
        Ok(self.pow(x, self.order() as u32 - 2))
    }

    pub fn dot(self, u: &[u16], v: &[u16]) -> Result<u16> {
        if u.len() != v.len() {
            return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
        }
        Ok(u.iter().zip(v).fold(0, |acc, (&a, &b)| self.add(acc, self.mul(a, b))))
    }

    /// Rank of a matrix given as rows of raw symbols.
    pub fn rank(self, rows: &[Vec<u16>]) -> Result<usize> {
        let Some(width) = rows.first().map(Vec::len) else {
            return Ok(0);
        };
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::LengthMismatch { left: width, right: bad.len() });
        }
        let mut m: Vec<Vec<u16>> = rows.to_vec();
        let mut rank = 0;
        for col in 0..width {
            let Some(pivot) = (rank..m.len()).find(|&r| m[r][col] != 0) else {
                continue;
            };
            m.swap(rank, pivot);
            let scale = self.inv(m[rank][col])?;
            for x in m[rank].iter_mut() {
                *x = self.mul(*x, scale);
            }
            for r in 0..m.len() {
                if r != rank && m[r][col] != 0 {
                    let f = m[r][col];
                    let (pivot_row, row) = if r < rank {
                        let (lo, hi) = m.split_at_mut(rank);
                        (&hi[0], &mut lo[r])
                    } else {
                        let (lo, hi) = m.split_at_mut(r);
                        (&lo[rank], &mut hi[0])
                    };
                    for (x, &p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x = self.sub(*x, self.mul(f, p));
                    }
                }
            }
            rank += 1;
        }
        Ok(rank)
    }
}

fn gf256_mul(mut a: u8, mut b: u8) -> u8 {
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        let carry = a & 0x80 != 0;
        a <<= 1;
        if carry {
            a ^= (GF256_POLY & 0xFF) as u8;
        }
        b >>= 1;
    }
    acc
}

impl fmt::Display for FieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldId::Gf256 => write!(f, "gf256"),
            FieldId::Prime(p) => write!(f, "gf{p}"),
        }
    }
}

impl FromStr for FieldId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let digits = lower
            .strip_prefix("gf(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| lower.strip_prefix("gf"))
            .unwrap_or(&lower);
        match digits.parse::<u16>() {
            Ok(256) => Ok(FieldId::Gf256),
            Ok(p) => FieldId::prime(p),
            Err(_) => Err(Error::InvalidField(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u16,
    field: FieldId,
}

// Checked ops: mixing fields is an error, so these cannot be the operator traits.
#[allow(clippy::should_implement_trait)]
impl FieldElement {
    pub fn new(value: u16, field: FieldId) -> Result<Self> {
        if !field.contains(value) {
            return Err(Error::ValueOutOfRange { value, field });
        }
        Ok(FieldElement { value, field })
    }

    pub fn value(self) -> u16 {
        self.value
    }

    pub fn field(self) -> FieldId {
        self.field
    }

    fn same_field(self, other: Self) -> Result<FieldId> {
        if self.field != other.field {
            return Err(Error::FieldMismatch(self.field, other.field));
        }
        Ok(self.field)
    }

    pub fn add(self, other: Self) -> Result<Self> {
        let f = self.same_field(other)?;
        Ok(FieldElement { value: f.add(self.value, other.value), field: f })
    }

    pub fn sub(self, other: Self) -> Result<Self> {
        let f = self.same_field(other)?;
        Ok(FieldElement { value: f.sub(self.value, other.value), field: f })
    }

    pub fn mul(self, other: Self) -> Result<Self> {
        let f = self.same_field(other)?;
        Ok(FieldElement { value: f.mul(self.value, other.value), field: f })
    }

    pub fn inv(self) -> Result<Self> {
        Ok(FieldElement { value: self.field.inv(self.value)?, field: self.field })
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn to_be_bytes(self) -> [u8; SYMBOL_BYTES] {
        self.value.to_be_bytes()
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Inner product of two equal-length vectors over the same field.
pub fn dot(u: &[FieldElement], v: &[FieldElement]) -> Result<FieldElement> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let Some(first) = u.first() else {
        return Err(Error::Shape("inner product of empty vectors has no field".into()));
    };
    u.iter().zip(v).try_fold(first.field.zero(), |acc, (&a, &b)| acc.add(a.mul(b)?))
}

pub fn encode_symbols(symbols: &[u16], out: &mut Vec<u8>) {
    for s in symbols {
        out.extend_from_slice(&s.to_be_bytes());
    }
}

pub fn decode_symbols(bytes: &[u8], field: FieldId) -> Result<Vec<u16>> {
    if !bytes.len().is_multiple_of(SYMBOL_BYTES) {
        return Err(Error::Wire(format!("{} bytes is not a whole number of symbols", bytes.len())));
    }
    bytes
        .chunks_exact(SYMBOL_BYTES)
        .map(|c| {
            let v = u16::from_be_bytes([c[0], c[1]]);
            if field.contains(v) {
                Ok(v)
            } else {
                Err(Error::ValueOutOfRange { value: v, field })
            }
        })
        .collect()
}
