use rand::{Rng, RngCore};

use super::{
    check_answer_count, expect_token, PirScheme, Query, QueryPayload, RandomnessToken, SchemeParams, MAX_ENUMERATION,
};
use crate::error::{Error, Result};

/// Any number of messages at cost `n / (n - 1)`: one equation per database
/// per block of `n - 1` symbols.
///
/// Every message gets a uniform mask row `U_m`. Database 1 sees the masks
/// as they are; database `j >= 2` sees them with a one added at position
/// `j - 1` of the desired message's row. Differences against database 1's
/// answer reveal the desired block symbol by symbol.
#[derive(Debug, Clone)]
pub struct KMessageRepetition {
    params: SchemeParams,
}

impl KMessageRepetition {
    pub fn new(params: SchemeParams) -> Result<Self> {
        params.validate()?;
        Ok(KMessageRepetition { params })
    }

    fn masks<'t>(&self, token: &'t RandomnessToken) -> Result<&'t [Vec<u16>]> {
        let rows = expect_token(token, |t| match t {
            RandomnessToken::Masks(rows) => Some(rows.as_slice()),
            _ => None,
        })?;
        let SchemeParams { k, n, field, .. } = self.params;
        let well_formed =
            rows.len() == k && rows.iter().all(|r| r.len() == n - 1 && r.iter().all(|&v| field.contains(v)));
        if !well_formed {
            return Err(Error::Shape(format!("mask matrix must be {k} x {} over {field}", n - 1)));
        }
        Ok(rows)
    }
}

impl PirScheme for KMessageRepetition {
    fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn block_len(&self) -> usize {
        self.params.n - 1
    }

    fn equations_per_block(&self, _db: usize) -> usize {
        1
    }

    fn draw_randomness(&self, rng: &mut dyn RngCore) -> RandomnessToken {
        let order = self.params.field.order();
        RandomnessToken::Masks(
            (0..self.params.k).map(|_| (0..self.params.n - 1).map(|_| rng.gen_range(0..order)).collect()).collect(),
        )
    }

    fn randomness_space_size(&self) -> u128 {
        let entries = (self.params.k * (self.params.n - 1)) as u32;
        (self.params.field.order() as u128).checked_pow(entries).unwrap_or(u128::MAX)
    }

    fn randomness_space(&self) -> Result<Vec<RandomnessToken>> {
        let size = self.randomness_space_size();
        if size > MAX_ENUMERATION {
            return Err(Error::SpaceTooLarge { size });
        }
        let SchemeParams { k, n, field, .. } = self.params;
        let width = n - 1;
        let mut flat = vec![0u16; k * width];
        let mut out = Vec::with_capacity(size as usize);
        loop {
            out.push(RandomnessToken::Masks(flat.chunks(width).map(<[u16]>::to_vec).collect()));
            // odometer over the flattened matrix, last entry fastest
            let mut pos = flat.len();
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                flat[pos] += 1;
                if flat[pos] < field.order() {
                    break;
                }
                flat[pos] = 0;
            }
        }
    }

    fn query_gen(&self, index: usize, token: &RandomnessToken) -> Result<Vec<Query>> {
        self.params.check_index(index)?;
        let masks = self.masks(token)?;
        let field = self.params.field;
        Ok((1..=self.params.n)
            .map(|j| {
                let mut rows = masks.to_vec();
                if j >= 2 {
                    let x = &mut rows[index - 1][j - 2];
                    *x = field.add(*x, 1);
                }
                Query { params: self.params, db_index: j, payload: QueryPayload::KRep(rows) }
            })
            .collect())
    }

    fn answer_block(&self, payload: &QueryPayload, _db: usize, block: &[&[u16]]) -> Result<Vec<u16>> {
        let QueryPayload::KRep(rows) = payload else {
            return Err(Error::Shape("k-rep database received a foreign payload".into()));
        };
        if rows.len() != block.len() {
            return Err(Error::LengthMismatch { left: rows.len(), right: block.len() });
        }
        let field = self.params.field;
        let y = rows
            .iter()
            .zip(block)
            .try_fold(0, |acc, (coeffs, symbols)| Ok::<_, Error>(field.add(acc, field.dot(coeffs, symbols)?)))?;
        Ok(vec![y])
    }

    fn decode_block(&self, index: usize, token: &RandomnessToken, answers: &[&[u16]]) -> Result<Vec<u16>> {
        self.params.check_index(index)?;
        self.masks(token)?;
        check_answer_count(answers, self.params.n)?;
        if answers.iter().any(|a| a.len() != 1) {
            return Err(Error::Shape("k-rep answers carry exactly one equation per block".into()));
        }
        let field = self.params.field;
        let base = answers[0][0];
        Ok(answers[1..].iter().map(|a| field.sub(a[0], base)).collect())
    }
}
