//! Dense rank-3 and rank-4 component arrays.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank3 {
    dim: usize,
    data: Vec<f64>,
}

impl Rank3 {
    pub fn zeros(dim: usize) -> Self {
        Rank3 {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn offset(&self, (a, b, c): (usize, usize, usize)) -> usize {
        debug_assert!(a < self.dim && b < self.dim && c < self.dim);
        (a * self.dim + b) * self.dim + c
    }
}

impl Index<(usize, usize, usize)> for Rank3 {
    type Output = f64;
    fn index(&self, idx: (usize, usize, usize)) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<(usize, usize, usize)> for Rank3 {
    fn index_mut(&mut self, idx: (usize, usize, usize)) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank4 {
    dim: usize,
    data: Vec<f64>,
}

impl Rank4 {
    pub fn zeros(dim: usize) -> Self {
        Rank4 {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Rank4::zeros(dim);
        for (a, b, c, d) in indices4(dim) {
            t[(a, b, c, d)] = f(a, b, c, d);
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Rank4) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn scaled(&self, s: f64) -> Rank4 {
        Rank4 {
            dim: self.dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Rank4) -> Rank4 {
        assert_eq!(self.dim, other.dim);
        Rank4 {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Rank4) -> Rank4 {
        assert_eq!(self.dim, other.dim);
        Rank4 {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Contracts one slot with `m`: `out[..i..] = sum_p self[..p..] * m[(p, i)]`.
    pub fn transform_slot(&self, slot: usize, m: &DMatrix<f64>) -> Rank4 {
        let n = self.dim;
        let mut out = Rank4::zeros(n);
        for idx in indices4(n) {
            let mut acc = 0.0;
            for p in 0..n {
                let mut src = [idx.0, idx.1, idx.2, idx.3];
                let i = src[slot];
                src[slot] = p;
                acc += self[(src[0], src[1], src[2], src[3])] * m[(p, i)];
            }
            out[idx] = acc;
        }
        out
    }

    /// `T(u, v, w, z)` for vectors in each slot.
    pub fn contract4(&self, u: &[f64], v: &[f64], w: &[f64], z: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for a in 0..n {
            if u[a] == 0.0 {
                continue;
            }
            for b in 0..n {
                if v[b] == 0.0 {
                    continue;
                }
                let ab = u[a] * v[b];
                for c in 0..n {
                    let abc = ab * w[c];
                    if abc == 0.0 {
                        continue;
                    }
                    let base = ((a * n + b) * n + c) * n;
                    for d in 0..n {
                        acc += abc * self.data[base + d] * z[d];
                    }
                }
            }
        }
        acc
    }

    /// Entries with magnitude above `threshold`, in index order.
    pub fn nonzero_entries(&self, threshold: f64) -> Vec<([usize; 4], f64)> {
        indices4(self.dim)
            .filter_map(|(a, b, c, d)| {
                let v = self[(a, b, c, d)];
                (v.abs() > threshold).then_some(([a, b, c, d], v))
            })
            .collect()
    }

    fn offset(&self, (a, b, c, d): (usize, usize, usize, usize)) -> usize {
        debug_assert!(a < self.dim && b < self.dim && c < self.dim && d < self.dim);
        ((a * self.dim + b) * self.dim + c) * self.dim + d
    }
}

impl Index<(usize, usize, usize, usize)> for Rank4 {
    type Output = f64;
    fn index(&self, idx: (usize, usize, usize, usize)) -> &f64 {
        &self.data[self.offset(idx)]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Rank4 {
    fn index_mut(&mut self, idx: (usize, usize, usize, usize)) -> &mut f64 {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

pub fn indices4(dim: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    (0..dim.pow(4)).map(move |k| {
        (
            k / (dim * dim * dim),
            (k / (dim * dim)) % dim,
            (k / dim) % dim,
            k % dim,
        )
    })
}

/// Largest absolute entry of a matrix.
pub fn matrix_max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_is_row_major() {
        let t = Rank4::from_fn(3, |a, b, c, d| (a * 1000 + b * 100 + c * 10 + d) as f64);
        assert_eq!(t[(2, 1, 0, 2)], 2102.0);
        assert_eq!(t.as_slice()[1], 1.0);
        assert_eq!(indices4(3).count(), 81);
    }

    #[test]
    fn slot_transform_with_identity_is_noop() {
        let t = Rank4::from_fn(2, |a, b, c, d| (a + 2 * b + 3 * c + 5 * d) as f64);
        let id = DMatrix::identity(2, 2);
        for slot in 0..4 {
            assert_eq!(t.transform_slot(slot, &id), t);
        }
    }

    #[test]
    fn contraction_matches_component() {
        let t = Rank4::from_fn(3, |a, b, c, d| (a * 27 + b * 9 + c * 3 + d) as f64);
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        assert_eq!(t.contract4(&e(1), &e(2), &e(0), &e(1)), t[(1, 2, 0, 1)]);
    }
}
