use rand::{Rng, RngCore};

use super::{check_answer_count, expect_token, PirScheme, Query, QueryPayload, RandomnessToken, SchemeParams};
use crate::error::{Error, Result};
use crate::grid::{answer_at_cell, build_grid, shift_perm, Cell, CoherenceGrid, ShiftToken};

/// Download-optimal scheme for two messages: `n^2 - 1` equations per
/// `n^2 - n` symbols of the desired message.
///
/// Database `j` answers the cells of grid group `j`. The unit vector used at
/// cell `(r, c)` is chosen by the desired message's channel state: column
/// `c` when message 1 is wanted, row `r` when message 2 is, both passed
/// through the private cyclic shift.
#[derive(Debug, Clone)]
pub struct TwoMessageOptimal {
    params: SchemeParams,
    grid: CoherenceGrid,
}

impl TwoMessageOptimal {
    pub fn new(params: SchemeParams) -> Result<Self> {
        params.validate()?;
        if params.k != 2 {
            return Err(Error::InvalidParams("two-opt requires k = 2".into()));
        }
        Ok(TwoMessageOptimal { grid: build_grid(params.n)?, params })
    }

    pub fn grid(&self) -> &CoherenceGrid {
        &self.grid
    }

    fn shift(&self, token: &RandomnessToken) -> Result<ShiftToken> {
        let l = expect_token(token, |t| match t {
            RandomnessToken::Shift(l) => Some(*l),
            _ => None,
        })?;
        if l.0 >= self.params.n {
            return Err(Error::Shape(format!("shift {} outside 0..{}", l.0, self.params.n)));
        }
        Ok(l)
    }
}

fn unit_for(cell: Cell, index: usize, l: ShiftToken, n: usize) -> usize {
    match index {
        1 => shift_perm(l, cell.col, n),
        _ => shift_perm(l, cell.row, n),
    }
}

impl PirScheme for TwoMessageOptimal {
    fn params(&self) -> &SchemeParams {
        &self.params
    }

    fn block_len(&self) -> usize {
        self.params.n * (self.params.n - 1)
    }

    fn equations_per_block(&self, db: usize) -> usize {
        self.grid.group(db).map_or(0, <[Cell]>::len)
    }

    fn draw_randomness(&self, rng: &mut dyn RngCore) -> RandomnessToken {
        RandomnessToken::Shift(ShiftToken(rng.gen_range(0..self.params.n)))
    }

    fn randomness_space_size(&self) -> u128 {
        self.params.n as u128
    }

    fn randomness_space(&self) -> Result<Vec<RandomnessToken>> {
        Ok((0..self.params.n).map(|l| RandomnessToken::Shift(ShiftToken(l))).collect())
    }

    fn query_gen(&self, index: usize, token: &RandomnessToken) -> Result<Vec<Query>> {
        self.params.check_index(index)?;
        let l = self.shift(token)?;
        let n = self.params.n;
        Ok(self
            .grid
            .groups()
            .iter()
            .enumerate()
            .map(|(j, group)| Query {
                params: self.params,
                db_index: j + 1,
                payload: QueryPayload::TwoOpt(group.iter().map(|&c| unit_for(c, index, l, n) as u16).collect()),
            })
            .collect())
    }

    fn answer_block(&self, payload: &QueryPayload, db: usize, block: &[&[u16]]) -> Result<Vec<u16>> {
        let QueryPayload::TwoOpt(units) = payload else {
            return Err(Error::Shape("two-opt database received a foreign payload".into()));
        };
        let group = self.grid.group(db)?;
        if units.len() != group.len() {
            return Err(Error::Shape(format!(
                "database {db} serves {} cells, query names {}",
                group.len(),
                units.len()
            )));
        }
        let n = self.params.n;
        group
            .iter()
            .zip(units)
            .map(|(&cell, &m)| answer_at_cell(self.params.field, block[0], block[1], n, cell, m as usize))
            .collect()
    }

    fn decode_block(&self, index: usize, token: &RandomnessToken, answers: &[&[u16]]) -> Result<Vec<u16>> {
        self.params.check_index(index)?;
        let n = self.params.n;
        check_answer_count(answers, n)?;
        let l = self.shift(token)?;
        let field = self.params.field;

        // received symbol per cell, indexed by (row - 1) * n + (col - 1)
        let mut seen = vec![None; n * n];
        for (j, group) in self.grid.groups().iter().enumerate() {
            if answers[j].len() != group.len() {
                return Err(Error::Shape(format!("database {} returned {} equations", j + 1, answers[j].len())));
            }
            for (cell, &y) in group.iter().zip(answers[j]) {
                seen[(cell.row - 1) * n + cell.col - 1] = Some(y);
            }
        }
        let at = |r: usize, c: usize| seen[(r - 1) * n + c - 1].expect("grid covers every cell but (n, n)");

        let mut out = vec![0; n * (n - 1)];
        // For message 1 each column c reuses one transmitter and its bottom
        // cell (n, c) carries only the interference; message 2 mirrors this
        // with rows and the rightmost cell (r, n).
        for state in 1..=n {
            let m = shift_perm(l, state, n);
            for p in 1..n {
                let (cell, pivot) = if index == 1 { ((p, state), (n, state)) } else { ((state, p), (state, n)) };
                let mut y = at(cell.0, cell.1);
                if state < n {
                    y = field.sub(y, at(pivot.0, pivot.1));
                }
                out[(p - 1) * n + m - 1] = y;
            }
        }
        Ok(out)
    }
}

type Matrix = Vec<Vec<u16>>;

/// Coefficient rows of the `n^2 - 1` equations (database order, then cell
/// order) with respect to the desired and interfering message symbols,
/// derived from the repetition rule on the grid.
pub fn equation_coefficients(n: usize, l: usize, index: usize) -> Result<(Matrix, Matrix)> {
    let grid = build_grid(n)?;
    if l >= n || !(1..=2).contains(&index) {
        return Err(Error::InvalidParams(format!("need l < {n} and index in 1..=2")));
    }
    let width = n * (n - 1);
    let mut desired = Vec::new();
    let mut interference = Vec::new();
    for &cell in grid.groups().iter().flatten() {
        let m = unit_for(cell, index, ShiftToken(l), n);
        let mut a_row = vec![0u16; width];
        let mut b_row = vec![0u16; width];
        if cell.row < n {
            a_row[(cell.row - 1) * n + m - 1] = 1;
        }
        if cell.col < n {
            b_row[(cell.col - 1) * n + m - 1] = 1;
        }
        if index == 1 {
            desired.push(a_row);
            interference.push(b_row);
        } else {
            desired.push(b_row);
            interference.push(a_row);
        }
    }
    Ok((desired, interference))
}
