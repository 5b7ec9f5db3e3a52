use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::scalar::{self, Scalar};

/// Dense `n×n×n` array, row-major in `(i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3<T> {
    n: usize,
    data: Vec<T>,
}

/// Dense `n×n×n×n` array, row-major in `(h, i, j, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    n: usize,
    data: Vec<T>,
}

macro_rules! dense_common {
    ($name:ident, $rank:literal) => {
        impl<T: Scalar> $name<T> {
            pub fn zeros(n: usize) -> Self {
                Self {
                    n,
                    data: vec![T::zero(); n.pow($rank)],
                }
            }

            pub fn from_fn(n: usize, mut f: impl FnMut([usize; $rank]) -> T) -> Self {
                let mut out = Self::zeros(n);
                for flat in 0..out.data.len() {
                    out.data[flat] = f(Self::unflatten(n, flat));
                }
                out
            }

            fn unflatten(n: usize, mut flat: usize) -> [usize; $rank] {
                let mut idx = [0usize; $rank];
                for slot in (0..$rank).rev() {
                    idx[slot] = flat % n;
                    flat /= n;
                }
                idx
            }

            fn flatten(&self, idx: [usize; $rank]) -> usize {
                idx.iter().fold(0, |acc, &i| {
                    debug_assert!(i < self.n);
                    acc * self.n + i
                })
            }

            pub fn dim(&self) -> usize {
                self.n
            }

            pub fn as_slice(&self) -> &[T] {
                &self.data
            }

            pub fn indices(&self) -> impl Iterator<Item = [usize; $rank]> + '_ {
                (0..self.data.len()).map(move |f| Self::unflatten(self.n, f))
            }

            pub fn norm(&self) -> T {
                scalar::sqrt(self.data.iter().fold(T::zero(), |a, &v| a + v * v))
            }

            pub fn max_abs(&self) -> T {
                self.data
                    .iter()
                    .fold(T::zero(), |a, &v| scalar::fmax(a, scalar::abs(v)))
            }

            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                Self {
                    n: self.n,
                    data: self.data.iter().map(|&v| f(v)).collect(),
                }
            }

            pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
                assert_eq!(self.n, other.n);
                Self {
                    n: self.n,
                    data: self
                        .data
                        .iter()
                        .zip(&other.data)
                        .map(|(&a, &b)| f(a, b))
                        .collect(),
                }
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.zip_map(other, |a, b| a - b)
            }

            pub fn add(&self, other: &Self) -> Self {
                self.zip_map(other, |a, b| a + b)
            }

            pub fn scale(&self, s: T) -> Self {
                self.map(|v| v * s)
            }

            /// Frobenius inner product.
            pub fn dot(&self, other: &Self) -> T {
                self.data
                    .iter()
                    .zip(&other.data)
                    .fold(T::zero(), |a, (&p, &q)| a + p * q)
            }

            pub fn is_finite(&self) -> bool {
                self.data.iter().all(|v| scalar::is_finite(*v))
            }

            /// Largest deviation under any permutation of the index slots.
            pub fn symmetry_defect(&self) -> T {
                let mut worst = T::zero();
                for idx in self.indices() {
                    let v = self[idx];
                    for perm in permutations::<$rank>() {
                        let mut p = [0usize; $rank];
                        for (slot, &src) in perm.iter().enumerate() {
                            p[slot] = idx[src];
                        }
                        worst = scalar::fmax(worst, scalar::abs(v - self[p]));
                    }
                }
                worst
            }

            pub fn to_nested_f64(&self) -> serde_json::Value {
                nested(&self.data, self.n, $rank)
            }
        }

        impl<T: Scalar> Index<[usize; $rank]> for $name<T> {
            type Output = T;
            fn index(&self, idx: [usize; $rank]) -> &T {
                &self.data[self.flatten(idx)]
            }
        }

        impl<T: Scalar> IndexMut<[usize; $rank]> for $name<T> {
            fn index_mut(&mut self, idx: [usize; $rank]) -> &mut T {
                let f = self.flatten(idx);
                &mut self.data[f]
            }
        }

        impl<T: Scalar> Serialize for $name<T> {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                self.to_nested_f64().serialize(s)
            }
        }
    };
}

dense_common!(Tensor3, 3);
dense_common!(Tensor4, 4);

impl<T: Scalar> Tensor3<T> {
    /// `Σ_k self[i][j][k] v^k`.
    pub fn contract_last(&self, v: &[T]) -> DMatrix<T> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |a, k| a + self[[i, j, k]] * v[k])
        })
    }

    /// `Σ_i v^i self[i][j][k]`.
    pub fn contract_first(&self, v: &[T]) -> DMatrix<T> {
        let n = self.n;
        DMatrix::from_fn(n, n, |j, k| {
            (0..n).fold(T::zero(), |a, i| a + v[i] * self[[i, j, k]])
        })
    }

    /// Matrix slice with the last index fixed.
    pub fn slice_last(&self, k: usize) -> DMatrix<T> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| self[[i, j, k]])
    }

    /// Raises the first index with `ginv`: `out^i_{jk} = g^{ir} self_{rjk}`.
    pub fn raise_first(&self, ginv: &DMatrix<T>) -> Tensor3<T> {
        let n = self.n;
        Tensor3::from_fn(n, |[i, j, k]| {
            (0..n).fold(T::zero(), |a, r| a + ginv[(i, r)] * self[[r, j, k]])
        })
    }

    /// `Σ_{jk} self[i][j][k] m^{jk}`.
    pub fn trace_last_two(&self, m: &DMatrix<T>) -> DVector<T> {
        let n = self.n;
        DVector::from_fn(n, |i, _| {
            let mut acc = T::zero();
            for j in 0..n {
                for k in 0..n {
                    acc = acc + self[[i, j, k]] * m[(j, k)];
                }
            }
            acc
        })
    }

    /// `Σ_cyc a_{ij} v_k = a_ij v_k + a_jk v_i + a_ki v_j`.
    pub fn cyclic(a: &DMatrix<T>, v: &[T]) -> Tensor3<T> {
        let n = v.len();
        Tensor3::from_fn(n, |[i, j, k]| {
            a[(i, j)] * v[k] + a[(j, k)] * v[i] + a[(k, i)] * v[j]
        })
    }

    /// `u_i v_j w_k`.
    pub fn outer(u: &[T], v: &[T], w: &[T]) -> Tensor3<T> {
        Tensor3::from_fn(u.len(), |[i, j, k]| u[i] * v[j] * w[k])
    }
}

impl<T: Scalar> Tensor4<T> {
    /// `Σ_k self[h][i][j][k] v^k`.
    pub fn contract_last(&self, v: &[T]) -> Tensor3<T> {
        let n = self.n;
        Tensor3::from_fn(n, |[h, i, j]| {
            (0..n).fold(T::zero(), |a, k| a + self[[h, i, j, k]] * v[k])
        })
    }

    /// `Σ_h v^h self[h][i][j][k]`.
    pub fn contract_first(&self, v: &[T]) -> Tensor3<T> {
        let n = self.n;
        Tensor3::from_fn(n, |[i, j, k]| {
            (0..n).fold(T::zero(), |a, h| a + v[h] * self[[h, i, j, k]])
        })
    }

    /// `Σ_{hk} self[i][j][h][k] m^{hk}`.
    pub fn trace_last_two(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let n = self.n;
        DMatrix::from_fn(n, n, |i, j| {
            let mut acc = T::zero();
            for h in 0..n {
                for k in 0..n {
                    acc = acc + self[[i, j, h, k]] * m[(h, k)];
                }
            }
            acc
        })
    }
}

fn nested<T: Scalar>(data: &[T], n: usize, rank: u32) -> serde_json::Value {
    if rank == 1 {
        return serde_json::Value::Array(
            data.iter()
                .map(|v| serde_json::json!(v.to_f64_lossy()))
                .collect(),
        );
    }
    let stride = n.pow(rank - 1);
    serde_json::Value::Array(
        (0..n)
            .map(|i| nested(&data[i * stride..(i + 1) * stride], n, rank - 1))
            .collect(),
    )
}

fn permutations<const R: usize>() -> Vec<[usize; R]> {
    fn rec<const R: usize>(
        cur: &mut [usize; R],
        used: &mut [bool; R],
        d: usize,
        out: &mut Vec<[usize; R]>,
    ) {
        if d == R {
            out.push(*cur);
            return;
        }
        for i in 0..R {
            if !used[i] {
                used[i] = true;
                cur[d] = i;
                rec(cur, used, d + 1, out);
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut [0; R], &mut [false; R], 0, &mut out);
    out
}

/// Frobenius norm of a matrix.
pub fn mat_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    scalar::sqrt(m.iter().fold(T::zero(), |a, &v| a + v * v))
}

pub fn vec_norm<T: Scalar>(v: &[T]) -> T {
    scalar::sqrt(v.iter().fold(T::zero(), |a, &x| a + x * x))
}

pub fn mat_to_nested<T: Scalar>(m: &DMatrix<T>) -> serde_json::Value {
    serde_json::Value::Array(
        (0..m.nrows())
            .map(|i| {
                serde_json::Value::Array(
                    (0..m.ncols())
                        .map(|j| serde_json::json!(m[(i, j)].to_f64_lossy()))
                        .collect(),
                )
            })
            .collect(),
    )
}

pub fn vec_to_json<T: Scalar>(v: &[T]) -> serde_json::Value {
    serde_json::Value::Array(
        v.iter()
            .map(|x| serde_json::json!(x.to_f64_lossy()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_and_symmetry() {
        let t = Tensor3::<f64>::from_fn(3, |[i, j, k]| (i + j + k) as f64);
        assert_eq!(t[[1, 2, 0]], 3.0);
        assert_eq!(t.symmetry_defect(), 0.0);
        let u = Tensor3::<f64>::from_fn(2, |[i, j, k]| (i * 4 + j * 2 + k) as f64);
        assert!(u.symmetry_defect() > 0.0);
        assert_eq!(permutations::<4>().len(), 24);
    }

    #[test]
    fn contractions() {
        let t = Tensor4::<f64>::from_fn(2, |[h, i, j, k]| (h + 2 * i + 3 * j + 5 * k) as f64);
        let c = t.contract_last(&[1.0, 0.0]);
        assert_eq!(c[[1, 1, 1]], 6.0);
        let c = t.contract_first(&[0.0, 2.0]);
        assert_eq!(c[[0, 0, 1]], 2.0 * 6.0);
        let id = DMatrix::<f64>::identity(2, 2);
        let tr = t.trace_last_two(&id);
        assert_eq!(tr[(0, 0)], 0.0 + 8.0);
    }

    #[test]
    fn nested_json_shape() {
        let t = Tensor3::<f64>::from_fn(2, |[i, j, k]| (i * 4 + j * 2 + k) as f64);
        let v = t.to_nested_f64();
        assert_eq!(v[1][0][1], serde_json::json!(5.0));
    }
}
