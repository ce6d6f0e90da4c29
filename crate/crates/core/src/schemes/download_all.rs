use rand::RngCore;

use super::{check_answer_count, PirScheme, Query, QueryPayload, RandomnessToken, SchemeParams};
use crate::error::{Error, Result};

/// Baseline: database 1 returns every message, the others return nothing.
/// Cost `k`.
#[derive(Debug, Clone)]
pub struct DownloadAll {
    params: SchemeParams,
}

impl DownloadAll {
    pub fn new(params: SchemeParams) -> Result<Self> {
        params.validate()?;
        Ok(DownloadAll { params })
    }
}

impl PirScheme for DownloadAll {
    fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn block_len(&self) -> usize {
        1
    }

    fn equations_per_block(&self, db: usize) -> usize {
        if db == 1 {
            self.params.k
        } else {
            0
        }
    }

    fn draw_randomness(&self, _rng: &mut dyn RngCore) -> RandomnessToken {
        RandomnessToken::Empty
    }

    fn randomness_space_size(&self) -> u128 {
        1
    }

    fn randomness_space(&self) -> Result<Vec<RandomnessToken>> {
        Ok(vec![RandomnessToken::Empty])
    }

    fn query_gen(&self, index: usize, token: &RandomnessToken) -> Result<Vec<Query>> {
        self.params.check_index(index)?;
        if *token != RandomnessToken::Empty {
            return Err(Error::Shape("download-all takes no randomness".into()));
        }
        Ok((1..=self.params.n)
            .map(|j| Query { params: self.params, db_index: j, payload: QueryPayload::All })
            .collect())
    }

    fn answer_block(&self, payload: &QueryPayload, db: usize, block: &[&[u16]]) -> Result<Vec<u16>> {
        if *payload != QueryPayload::All {
            return Err(Error::Shape("download-all database received a foreign payload".into()));
        }
        if db != 1 {
            return Ok(Vec::new());
        }
        Ok(block.iter().flat_map(|m| m.iter().copied()).collect())
    }

    fn decode_block(&self, index: usize, _token: &RandomnessToken, answers: &[&[u16]]) -> Result<Vec<u16>> {
        self.params.check_index(index)?;
        check_answer_count(answers, self.params.n)?;
        answers[0]
            .get(index - 1)
            .map(|&s| vec![s])
            .ok_or_else(|| Error::Shape("download-all answer is missing messages".into()))
    }
}
