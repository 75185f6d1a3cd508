//! Barycentric multi-indices and their canonical enumeration.

use std::collections::HashMap;

/// Barycentric exponent tuple `(alpha_0, ..., alpha_d)` with `|alpha| = sum alpha_i`.
///
/// Only the first `dim + 1` entries are meaningful; trailing entries are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: [u16; 4],
    dim: u8,
}

impl MultiIndex {
    pub fn new(entries: &[u16]) -> Self {
        assert!(entries.len() >= 2 && entries.len() <= 4);
        let mut e = [0u16; 4];
        e[..entries.len()].copy_from_slice(entries);
        Self {
            entries: e,
            dim: (entries.len() - 1) as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn entries(&self) -> &[u16] {
        &self.entries[..=self.dim as usize]
    }

    pub fn degree(&self) -> usize {
        self.entries().iter().map(|&x| x as usize).sum()
    }

    pub fn get(&self, i: usize) -> u16 {
        self.entries[i]
    }

    /// `self + e_j`.
    pub fn raised(&self, j: usize) -> Self {
        let mut out = *self;
        out.entries[j] += 1;
        out
    }

    /// `self - e_j`, or `None` if the j-th entry is zero.
    pub fn lowered(&self, j: usize) -> Option<Self> {
        if self.entries[j] == 0 {
            return None;
        }
        let mut out = *self;
        out.entries[j] -= 1;
        Some(out)
    }

    /// Drop position `m`, producing a face index on the opposite (d-1)-simplex.
    pub fn drop_position(&self, m: usize) -> Self {
        let mut e = Vec::with_capacity(self.dim as usize);
        for i in 0..=self.dim as usize {
            if i != m {
                e.push(self.entries[i]);
            }
        }
        Self::new(&e)
    }
}

/// Dimension of the degree-`n` polynomial space on a `d`-simplex: `binom(n+d, d)`.
pub fn space_dim(n: usize, d: usize) -> usize {
    debug_assert!(d >= 1 && d <= 3);
    match d {
        1 => n + 1,
        2 => (n + 1) * (n + 2) / 2,
        _ => (n + 1) * (n + 2) * (n + 3) / 6,
    }
}

/// All multi-indices of total degree `n` on a `d`-simplex, in the canonical order
/// shared by every operator in the crate, with O(1) index -> position lookup.
///
/// The order is graded lexicographic on `(alpha_1, ..., alpha_d)` (alpha_0 is
/// determined by the degree constraint).
#[derive(Debug, Clone)]
pub struct IndexSet {
    pub degree: usize,
    pub dim: usize,
    list: Vec<MultiIndex>,
    pos: HashMap<MultiIndex, usize>,
}

impl IndexSet {
    pub fn new(degree: usize, dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "dim must be 1, 2 or 3");
        let n = degree as u16;
        let mut list = Vec::with_capacity(space_dim(degree, dim));
        match dim {
            1 => {
                for a1 in 0..=n {
                    list.push(MultiIndex::new(&[n - a1, a1]));
                }
            }
            2 => {
                for a1 in 0..=n {
                    for a2 in 0..=n - a1 {
                        list.push(MultiIndex::new(&[n - a1 - a2, a1, a2]));
                    }
                }
            }
            _ => {
                for a1 in 0..=n {
                    for a2 in 0..=n - a1 {
                        for a3 in 0..=n - a1 - a2 {
                            list.push(MultiIndex::new(&[n - a1 - a2 - a3, a1, a2, a3]));
                        }
                    }
                }
            }
        }
        let pos = list.iter().enumerate().map(|(i, &a)| (a, i)).collect();
        Self {
            degree,
            dim,
            list,
            pos,
        }
    }

    pub fn len(&self) -> usize {
        self.list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.list.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MultiIndex> {
        self.list.iter()
    }

    pub fn index(&self, i: usize) -> MultiIndex {
        self.list[i]
    }

    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.pos.get(a).copied()
    }
}

/// Multinomial coefficient `n! / prod(alpha_i!)` for `|alpha| = n`.
pub fn multinomial(a: &MultiIndex) -> f64 {
    let n = a.degree();
    let mut v = factorial(n);
    for &ai in a.entries() {
        v /= factorial(ai as usize);
    }
    v
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}
