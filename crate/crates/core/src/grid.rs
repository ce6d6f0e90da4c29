//! The N x N coherence grid (minus its last cell) behind the two-message
//! scheme, split into N database groups along cyclically shifted diagonals.
//!
//! Rows index the second message's channel state, columns the first
//! message's. Cell `(r, c)` carries `a[r][m]` whenever `r < N` and
//! `b[c][m]` whenever `c < N`, where `m` is the transmitter selected by the
//! unit-vector channel at that cell.

use crate::error::{Error, Result};
use crate::field::FieldId;

/// One channel use, 1-based. `(n, n)` is never a member of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    /// Linear channel-use index `(row - 1) * n + col`, in `1..n*n`.
    pub fn linear_index(self, n: usize) -> usize {
        (self.row - 1) * n + self.col
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoherenceGrid {
    n: usize,
    groups: Vec<Vec<Cell>>,
}

/// Builds the grid for `n >= 2` databases. Group `j` (1-based) holds the
/// cells with `(col - row) mod n == j - 1`, in ascending linear index.
pub fn build_grid(n: usize) -> Result<CoherenceGrid> {
    if n < 2 {
        return Err(Error::InvalidParams(format!("grid needs n >= 2 databases, got {n}")));
    }
    let mut groups = vec![Vec::new(); n];
    for row in 1..=n {
        for col in 1..=n {
            if row == n && col == n {
                continue;
            }
            groups[(col + n - row) % n].push(Cell::new(row, col));
        }
    }
    Ok(CoherenceGrid { n, groups })
}

impl CoherenceGrid {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[Vec<Cell>] {
        &self.groups
    }

    /// Cells assigned to database `db` (1-based).
    pub fn group(&self, db: usize) -> Result<&[Cell]> {
        if db == 0 || db > self.n {
            return Err(Error::InvalidIndex { index: db, max: self.n });
        }
        Ok(&self.groups[db - 1])
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n - 1
    }
}

/// The user's private cyclic shift `l` in `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ShiftToken(pub usize);

/// `((x - 1 + l) mod n) + 1`: the transmitter picked by channel state `x`.
pub fn shift_perm(l: ShiftToken, x: usize, n: usize) -> usize {
    debug_assert!((1..=n).contains(&x) && l.0 < n);
    (x - 1 + l.0) % n + 1
}

/// Received symbol at `cell` when the channel is the unit vector selecting
/// transmitter `m`. `a` and `b` hold one block of each message, symbol
/// `(p, i)` at flat index `(p - 1) * n + (i - 1)`.
pub fn answer_at_cell(field: FieldId, a: &[u16], b: &[u16], n: usize, cell: Cell, m: usize) -> Result<u16> {
    let block = n * (n - 1);
    if a.len() != block || b.len() != block {
        return Err(Error::Shape(format!("grid block must hold {block} symbols per message")));
    }
    let in_grid = (1..=n).contains(&cell.row) && (1..=n).contains(&cell.col) && (cell.row, cell.col) != (n, n);
    if !in_grid {
        return Err(Error::Shape(format!("cell ({}, {}) not in the {n}x{n} grid", cell.row, cell.col)));
    }
    if m == 0 || m > n {
        return Err(Error::InvalidIndex { index: m, max: n });
    }
    let mut y = 0;
    if cell.row < n {
        y = field.add(y, a[(cell.row - 1) * n + m - 1]);
    }
    if cell.col < n {
        y = field.add(y, b[(cell.col - 1) * n + m - 1]);
    }
    Ok(y)
}

/// True when `seq` is `s, s+1, ...` taken cyclically over `1..=n`.
pub fn is_cyclic_run(seq: &[usize], n: usize) -> bool {
    seq.windows(2).all(|w| w[1] == w[0] % n + 1) && seq.iter().all(|&x| (1..=n).contains(&x))
}
