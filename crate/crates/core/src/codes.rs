//! Orthogonal block codes built from the five transformations
//! `0, s, -s, conj(s), -conj(s)`.
//!
//! A code `C(M, P, T)` carries `P` symbols over `T` time/frequency slots on
//! `M` transmit antennas. Each slot is either a plain slot (all entries are
//! `±s`) or a conjugate slot (all entries are `±conj(s)`); the receiver
//! conjugates the latter before combining, which turns every symbol into a
//! linear channel vector of length `T` with exactly `M` nonzero entries.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four designs with period at most 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CodeId {
    C111,
    C222,
    C334,
    C468,
}

impl CodeId {
    pub const ALL: [CodeId; 4] = [CodeId::C111, CodeId::C222, CodeId::C334, CodeId::C468];

    /// The code used by a cluster with `antennas` transmit antennas.
    pub fn for_antennas(antennas: usize) -> Option<CodeId> {
        match antennas {
            1 => Some(CodeId::C111),
            2 => Some(CodeId::C222),
            3 => Some(CodeId::C334),
            4 => Some(CodeId::C468),
            _ => None,
        }
    }

    pub fn m_tx(self) -> usize {
        match self {
            CodeId::C111 => 1,
            CodeId::C222 => 2,
            CodeId::C334 => 3,
            CodeId::C468 => 4,
        }
    }

    pub fn p_syms(self) -> usize {
        match self {
            CodeId::C111 => 1,
            CodeId::C222 => 2,
            CodeId::C334 => 3,
            CodeId::C468 => 6,
        }
    }

    pub fn t_period(self) -> usize {
        match self {
            CodeId::C111 => 1,
            CodeId::C222 => 2,
            CodeId::C334 => 4,
            CodeId::C468 => 8,
        }
    }
}

/// How a symbol appears in one cell of the code matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    Plus,
    Minus,
    PlusConj,
    MinusConj,
}

impl Transform {
    pub fn apply(self, s: Complex64) -> Complex64 {
        match self {
            Transform::Plus => s,
            Transform::Minus => -s,
            Transform::PlusConj => s.conj(),
            Transform::MinusConj => -s.conj(),
        }
    }

    pub fn is_conj(self) -> bool {
        matches!(self, Transform::PlusConj | Transform::MinusConj)
    }

    fn sign(self) -> f64 {
        match self {
            Transform::Plus | Transform::PlusConj => 1.0,
            Transform::Minus | Transform::MinusConj => -1.0,
        }
    }
}

/// One occurrence of a symbol in the code matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub slot: usize,
    pub antenna: usize,
    pub transform: Transform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeSpec {
    pub id: CodeId,
    pub m_tx: usize,
    pub p_syms: usize,
    pub t_period: usize,
    /// `columns[p]` lists every cell where symbol `p` is transmitted.
    pub columns: Vec<Vec<Entry>>,
}

// Code matrices as (slot, antenna, symbol, transform) cells, 0-based.
use Transform::{Minus as N, MinusConj as NC, Plus as P, PlusConj as PC};

const CELLS_111: &[(usize, usize, usize, Transform)] = &[(0, 0, 0, P)];

const CELLS_222: &[(usize, usize, usize, Transform)] = &[
    (0, 0, 0, P),
    (0, 1, 1, P),
    (1, 0, 1, NC),
    (1, 1, 0, PC),
];

const CELLS_334: &[(usize, usize, usize, Transform)] = &[
    (0, 0, 0, P),
    (0, 1, 1, P),
    (0, 2, 2, P),
    (1, 0, 1, NC),
    (1, 1, 0, PC),
    (2, 0, 2, NC),
    (2, 2, 0, PC),
    (3, 1, 2, NC),
    (3, 2, 1, PC),
];

const CELLS_468: &[(usize, usize, usize, Transform)] = &[
    (0, 0, 0, P),
    (0, 1, 1, P),
    (0, 2, 2, P),
    (1, 0, 1, NC),
    (1, 1, 0, PC),
    (1, 3, 3, PC),
    (2, 0, 2, NC),
    (2, 2, 0, PC),
    (2, 3, 4, PC),
    (3, 1, 2, NC),
    (3, 2, 1, PC),
    (3, 3, 5, PC),
    (4, 1, 3, N),
    (4, 2, 4, N),
    (4, 3, 0, P),
    (5, 0, 3, P),
    (5, 2, 5, N),
    (5, 3, 1, P),
    (6, 0, 4, P),
    (6, 1, 5, P),
    (6, 3, 2, P),
    (7, 0, 5, NC),
    (7, 1, 4, PC),
    (7, 2, 3, NC),
];

/// Returns the fixed design for `id`.
pub fn get_code(id: CodeId) -> CodeSpec {
    let cells = match id {
        CodeId::C111 => CELLS_111,
        CodeId::C222 => CELLS_222,
        CodeId::C334 => CELLS_334,
        CodeId::C468 => CELLS_468,
    };
    let mut columns = vec![Vec::new(); id.p_syms()];
    for &(slot, antenna, sym, transform) in cells {
        columns[sym].push(Entry {
            slot,
            antenna,
            transform,
        });
    }
    for col in &mut columns {
        col.sort_by_key(|e| e.slot);
    }
    CodeSpec {
        id,
        m_tx: id.m_tx(),
        p_syms: id.p_syms(),
        t_period: id.t_period(),
        columns,
    }
}

impl CodeSpec {
    pub fn rate(&self) -> f64 {
        self.p_syms as f64 / self.t_period as f64
    }

    /// Whether the receiver conjugates slot `t` before combining.
    pub fn conj_slots(&self) -> Vec<bool> {
        let mut conj = vec![false; self.t_period];
        for col in &self.columns {
            for e in col {
                conj[e.slot] = e.transform.is_conj();
            }
        }
        conj
    }

    fn check_symbol(&self, sym_index: usize) -> Result<()> {
        if sym_index >= self.p_syms {
            return Err(Error::SymbolIndex {
                index: sym_index,
                symbols: self.p_syms,
            });
        }
        Ok(())
    }

    /// Channel vector seen by symbol `sym_index` after the receiver has
    /// conjugated the conjugate slots.
    pub fn symbol_channel_vector(
        &self,
        sym_index: usize,
        link_gains: &[Complex64],
    ) -> Result<Vec<Complex64>> {
        self.check_symbol(sym_index)?;
        if link_gains.len() != self.m_tx {
            return Err(Error::LengthMismatch {
                expected: self.m_tx,
                got: link_gains.len(),
            });
        }
        let mut v = vec![Complex64::new(0.0, 0.0); self.t_period];
        for e in &self.columns[sym_index] {
            let h = link_gains[e.antenna];
            let h = if e.transform.is_conj() { h.conj() } else { h };
            v[e.slot] = h * e.transform.sign();
        }
        Ok(v)
    }

    /// Dense `T x M` transmit grid, `grid[t][m]`.
    pub fn encode_block(&self, symbols: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
        if symbols.len() != self.p_syms {
            return Err(Error::LengthMismatch {
                expected: self.p_syms,
                got: symbols.len(),
            });
        }
        let mut grid = vec![vec![Complex64::new(0.0, 0.0); self.m_tx]; self.t_period];
        for (p, col) in self.columns.iter().enumerate() {
            for e in col {
                grid[e.slot][e.antenna] = e.transform.apply(symbols[p]);
            }
        }
        Ok(grid)
    }

    /// Matched-filter combining for one symbol given the raw received
    /// samples of one receive antenna over a code period.
    ///
    /// Returns `(estimate, gain)` with `gain = sum |h_m|^2`; in the absence
    /// of noise `estimate = gain * s`.
    pub fn combine_block(
        &self,
        sym_index: usize,
        link_gains: &[Complex64],
        received: &[Complex64],
    ) -> Result<(Complex64, f64)> {
        if received.len() != self.t_period {
            return Err(Error::LengthMismatch {
                expected: self.t_period,
                got: received.len(),
            });
        }
        let col = self.symbol_channel_vector(sym_index, link_gains)?;
        let conj = self.conj_slots();
        let mut estimate = Complex64::new(0.0, 0.0);
        for t in 0..self.t_period {
            let y = if conj[t] { received[t].conj() } else { received[t] };
            estimate += col[t].conj() * y;
        }
        let gain = link_gains.iter().map(|h| h.norm_sqr()).sum();
        Ok((estimate, gain))
    }
}

/// Noiseless received samples `r[t] = sum_m h_m grid[t][m]` for one receive
/// antenna.
pub fn propagate(grid: &[Vec<Complex64>], link_gains: &[Complex64]) -> Vec<Complex64> {
    grid.iter()
        .map(|row| row.iter().zip(link_gains).map(|(x, h)| x * h).sum())
        .collect()
}
