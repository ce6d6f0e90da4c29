use rand::RngCore;

use super::{
    check_answer_count, expect_token, PirScheme, Query, QueryPayload, RandomnessToken, SchemeId, SchemeParams,
    MAX_ENUMERATION,
};
use crate::error::{Error, Result};

/// Runs an inner scheme `n` times with database roles rotated cyclically,
/// so every database serves the same number of equations.
///
/// Rotation `s` covers sub-block `s` of each block; there inner role `r` is
/// played by database `((r - 1 + s) mod n) + 1`. Each rotation draws its own
/// inner token.
pub struct Symmetrized {
    params: SchemeParams,
    inner: Box<dyn PirScheme>,
}

impl Symmetrized {
    pub fn new(inner: Box<dyn PirScheme>) -> Result<Self> {
        let SchemeId::Base(base) = inner.params().scheme else {
            return Err(Error::InvalidParams("cannot symmetrize a symmetrized scheme".into()));
        };
        let params = inner.params().with_scheme(SchemeId::Symmetrized(base));
        Ok(Symmetrized { params, inner })
    }

    pub fn inner(&self) -> &dyn PirScheme {
        self.inner.as_ref()
    }

    fn n(&self) -> usize {
        self.params.n
    }

    /// Inner role that database `db` plays in rotation `s`.
    fn role(&self, db: usize, s: usize) -> usize {
        let n = self.n();
        (db - 1 + n - s % n) % n + 1
    }

    fn rotations<'t>(&self, token: &'t RandomnessToken) -> Result<&'t [RandomnessToken]> {
        let toks = expect_token(token, |t| match t {
            RandomnessToken::Rotations(v) => Some(v.as_slice()),
            _ => None,
        })?;
        if toks.len() != self.n() {
            return Err(Error::Shape(format!("need {} rotation tokens, got {}", self.n(), toks.len())));
        }
        Ok(toks)
    }
}

impl PirScheme for Symmetrized {
    fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn block_len(&self) -> usize {
        self.n() * self.inner.block_len()
    }

    fn equations_per_block(&self, db: usize) -> usize {
        (0..self.n()).map(|s| self.inner.equations_per_block(self.role(db, s))).sum()
    }

    fn draw_randomness(&self, rng: &mut dyn RngCore) -> RandomnessToken {
        RandomnessToken::Rotations((0..self.n()).map(|_| self.inner.draw_randomness(rng)).collect())
    }

    fn randomness_space_size(&self) -> u128 {
        self.inner.randomness_space_size().checked_pow(self.n() as u32).unwrap_or(u128::MAX)
    }

    fn randomness_space(&self) -> Result<Vec<RandomnessToken>> {
        let size = self.randomness_space_size();
        if size > MAX_ENUMERATION {
            return Err(Error::SpaceTooLarge { size });
        }
        let inner = self.inner.randomness_space()?;
        let mut acc: Vec<Vec<RandomnessToken>> = vec![Vec::new()];
        for _ in 0..self.n() {
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    inner.iter().map(move |t| {
                        let mut next = prefix.clone();
                        next.push(t.clone());
                        next
                    })
                })
                .collect();
        }
        Ok(acc.into_iter().map(RandomnessToken::Rotations).collect())
    }

    fn query_gen(&self, index: usize, token: &RandomnessToken) -> Result<Vec<Query>> {
        let toks = self.rotations(token)?;
        let per_rotation = toks.iter().map(|t| self.inner.query_gen(index, t)).collect::<Result<Vec<_>>>()?;
        Ok((1..=self.n())
            .map(|db| Query {
                params: self.params,
                db_index: db,
                payload: QueryPayload::Sym(
                    (0..self.n()).map(|s| per_rotation[s][self.role(db, s) - 1].payload.clone()).collect(),
                ),
            })
            .collect())
    }

    fn answer_block(&self, payload: &QueryPayload, db: usize, block: &[&[u16]]) -> Result<Vec<u16>> {
        let QueryPayload::Sym(parts) = payload else {
            return Err(Error::Shape("symmetrized database received a foreign payload".into()));
        };
        if parts.len() != self.n() {
            return Err(Error::Shape(format!("need {} rotation payloads, got {}", self.n(), parts.len())));
        }
        let ib = self.inner.block_len();
        let mut out = Vec::with_capacity(self.equations_per_block(db));
        for (s, part) in parts.iter().enumerate() {
            let sub: Vec<&[u16]> = block.iter().map(|m| &m[s * ib..(s + 1) * ib]).collect();
            out.extend(self.inner.answer_block(part, self.role(db, s), &sub)?);
        }
        Ok(out)
    }

    fn decode_block(&self, index: usize, token: &RandomnessToken, answers: &[&[u16]]) -> Result<Vec<u16>> {
        let toks = self.rotations(token)?;
        let n = self.n();
        check_answer_count(answers, n)?;
        for (j, a) in answers.iter().enumerate() {
            if a.len() != self.equations_per_block(j + 1) {
                return Err(Error::Shape(format!("database {} returned {} equations", j + 1, a.len())));
            }
        }
        let mut offsets = vec![0usize; n];
        let mut out = Vec::with_capacity(self.block_len());
        for (s, tok) in toks.iter().enumerate() {
            let mut by_role: Vec<&[u16]> = vec![&[]; n];
            for (j, a) in answers.iter().enumerate() {
                let role = self.role(j + 1, s);
                let len = self.inner.equations_per_block(role);
                by_role[role - 1] = &a[offsets[j]..offsets[j] + len];
                offsets[j] += len;
            }
            out.extend(self.inner.decode_block(index, tok, &by_role)?);
        }
        Ok(out)
    }
}
