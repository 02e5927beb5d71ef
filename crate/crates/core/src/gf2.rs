//! Linear algebra over GF(2) on bit-packed rows, for Simon post-processing.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Parity of the overlap of `a` and `b`.
pub fn dot(a: u64, b: u64) -> u8 {
    ((a & b).count_ones() & 1) as u8
}

/// Rows of n-bit vectors over GF(2), each packed in a `u64`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Gf2Matrix {
    n: u32,
    rows: Vec<u64>,
}

impl Gf2Matrix {
    pub fn new(n: u32) -> Result<Self> {
        if n > 64 {
            return Err(invalid("n", format!("{n} columns do not fit in a word")));
        }
        Ok(Self { n, rows: Vec::new() })
    }

    pub fn from_rows(n: u32, rows: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut m = Self::new(n)?;
        for r in rows {
            m.push(r)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: u64) -> Result<()> {
        if self.n < 64 && row >> self.n != 0 {
            return Err(invalid("row", format!("{row:#x} wider than {} bits", self.n)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> u32 {
        self.n
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn rank(&self) -> u32 {
        echelon(&self.rows).len() as u32
    }

    /// Reduced row echelon basis of the row span, sorted by pivot from the
    /// highest bit down. Two matrices span the same space iff these agree.
    pub fn rref(&self) -> Vec<u64> {
        reduce(echelon(&self.rows))
    }

    /// Basis of `{v : row · v = 0 for every row}`, of size n − rank.
    pub fn nullspace_basis(&self) -> Vec<u64> {
        let basis = self.rref();
        let pivots: Vec<u32> = basis.iter().map(|r| 63 - r.leading_zeros()).collect();
        let pivot_mask = pivots.iter().fold(0u64, |m, &p| m | 1 << p);
        (0..self.n)
            .filter(|c| pivot_mask >> c & 1 == 0)
            .map(|free| {
                // set the free column, then solve each pivot from its row
                let mut v = 1u64 << free;
                for (row, &p) in basis.iter().zip(&pivots) {
                    if row >> free & 1 == 1 {
                        v |= 1 << p;
                    }
                }
                v
            })
            .collect()
    }

    pub fn recover_period(&self) -> PeriodOutcome {
        let rank = self.rank();
        if rank == self.n {
            PeriodOutcome::Injective
        } else if rank + 1 == self.n {
            PeriodOutcome::Period(self.nullspace_basis()[0])
        } else {
            PeriodOutcome::Undetermined
        }
    }
}

/// Period recovery from Simon samples at block size `n`.
pub fn recover_period(n: u32, samples: &[u64]) -> Result<PeriodOutcome> {
    Ok(Gf2Matrix::from_rows(n, samples.iter().copied())?.recover_period())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PeriodOutcome {
    Period(u64),
    Injective,
    Undetermined,
}

/// Row echelon basis with distinct leading bits, in insertion order.
fn echelon(rows: &[u64]) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::with_capacity(rows.len().min(64));
    for &r in rows {
        let mut v = r;
        for &b in &basis {
            let lead = 63 - b.leading_zeros();
            if v >> lead & 1 == 1 {
                v ^= b;
            }
        }
        if v != 0 {
            // keep the basis ordered by leading bit so one pass reduces
            let lead = 63 - v.leading_zeros();
            let pos = basis.partition_point(|&b| 63 - b.leading_zeros() > lead);
            basis.insert(pos, v);
        }
    }
    basis
}

fn reduce(mut basis: Vec<u64>) -> Vec<u64> {
    for i in 0..basis.len() {
        let lead = 63 - basis[i].leading_zeros();
        for j in 0..basis.len() {
            if j != i && basis[j] >> lead & 1 == 1 {
                basis[j] ^= basis[i];
            }
        }
    }
    basis
}

/// Incremental echelon basis, for rank tests inside hot loops.
#[derive(Clone, Debug)]
pub struct Basis {
    rows: [u64; 64],
    len: u32,
}

impl Default for Basis {
    fn default() -> Self {
        Self { rows: [0; 64], len: 0 }
    }
}

impl Basis {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `v` and reports whether it increased the rank.
    pub fn insert(&mut self, mut v: u64) -> bool {
        for &b in &self.rows[..self.len as usize] {
            let lead = 63 - b.leading_zeros();
            if v >> lead & 1 == 1 {
                v ^= b;
            }
        }
        if v == 0 {
            return false;
        }
        let lead = 63 - v.leading_zeros();
        let mut pos = self.len as usize;
        while pos > 0 && 63 - self.rows[pos - 1].leading_zeros() < lead {
            self.rows[pos] = self.rows[pos - 1];
            pos -= 1;
        }
        self.rows[pos] = v;
        self.len += 1;
        true
    }

    pub fn rank(&self) -> u32 {
        self.len
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows[..self.len as usize]
    }

    /// Canonical reduced form, usable as a key for the spanned subspace.
    pub fn canonical(&self) -> Vec<u64> {
        reduce(self.rows().to_vec())
    }
}

/// Rank of a slice of rows.
pub fn rank_of(rows: &[u64]) -> u32 {
    let mut b = Basis::new();
    rows.iter().filter(|&&r| b.insert(r)).count() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(rows: &[u64]) -> std::collections::BTreeSet<u64> {
        let mut set = std::collections::BTreeSet::from([0u64]);
        for &r in rows {
            let more: Vec<u64> = set.iter().map(|&s| s ^ r).collect();
            set.extend(more);
        }
        set
    }

    #[test]
    fn small_examples() {
        let id = Gf2Matrix::from_rows(5, (0..5).map(|i| 1 << i)).unwrap();
        assert_eq!(id.rank(), 5);
        assert!(id.nullspace_basis().is_empty());
        let m = Gf2Matrix::from_rows(3, [0b011, 0b101, 0b110]).unwrap();
        assert_eq!(m.rank(), 2);
        assert_eq!(Gf2Matrix::new(3).unwrap().nullspace_basis().len(), 3);
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(0b101, 0b101), 0);
        assert_eq!(dot(0b101, 0b100), 1);
        assert!((0..256).all(|x| dot(x, 0) == 0));
    }

    #[test]
    fn period_from_orthogonal_complement() {
        for s in [0b101u64, 0b110] {
            let ys: Vec<u64> = (0..8).filter(|&y| dot(y, s) == 0).collect();
            let m = Gf2Matrix::from_rows(3, ys.iter().copied()).unwrap();
            assert_eq!(m.nullspace_basis(), vec![s]);
            assert_eq!(m.recover_period(), PeriodOutcome::Period(s));
        }
        assert_eq!(recover_period(3, &(0..8).collect::<Vec<_>>()).unwrap(), PeriodOutcome::Injective);
        assert_eq!(recover_period(3, &[0]).unwrap(), PeriodOutcome::Undetermined);
    }

    #[test]
    fn wide_rows_are_rejected() {
        assert!(Gf2Matrix::from_rows(3, [0b1000]).is_err());
        assert!(Gf2Matrix::new(65).is_err());
    }

    proptest! {
        #[test]
        fn rank_matches_span_size(rows in prop::collection::vec(0u64..256, 0..20)) {
            let m = Gf2Matrix::from_rows(8, rows.iter().copied()).unwrap();
            let size = span(&rows).len();
            prop_assert_eq!(1usize << m.rank(), size);
            prop_assert_eq!(rank_of(&rows), m.rank());
        }

        #[test]
        fn nullspace_is_orthogonal_and_complete(rows in prop::collection::vec(0u64..1024, 0..14)) {
            let m = Gf2Matrix::from_rows(10, rows.iter().copied()).unwrap();
            let null = m.nullspace_basis();
            prop_assert_eq!(m.rank() as usize + null.len(), 10);
            prop_assert_eq!(rank_of(&null) as usize, null.len());
            for v in &null {
                for r in &rows {
                    prop_assert_eq!(dot(*r, *v), 0);
                }
            }
        }

        #[test]
        fn period_invariant_under_reordering_and_span_rows(
            rows in prop::collection::vec(0u64..64, 1..12),
            extra in prop::collection::vec(any::<bool>(), 12),
        ) {
            let m = Gf2Matrix::from_rows(6, rows.iter().copied()).unwrap();
            let mut shuffled: Vec<u64> = rows.iter().rev().copied().collect();
            let combo = rows.iter().zip(&extra).filter(|(_, &e)| e).fold(0, |a, (r, _)| a ^ r);
            shuffled.push(combo);
            let m2 = Gf2Matrix::from_rows(6, shuffled).unwrap();
            prop_assert_eq!(m.recover_period(), m2.recover_period());
            prop_assert_eq!(m.rref(), m2.rref());
        }

        #[test]
        fn incremental_basis_agrees(rows in prop::collection::vec(0u64..4096, 0..30)) {
            let mut b = Basis::new();
            for &r in &rows {
                b.insert(r);
            }
            let m = Gf2Matrix::from_rows(12, rows.iter().copied()).unwrap();
            prop_assert_eq!(b.rank(), m.rank());
            prop_assert_eq!(b.canonical(), m.rref());
        }
    }
}
