//! Raw partial derivatives of `Q = F²` at one support element.
//!
//! Everything downstream is algebra on these arrays, so swapping the source
//! (jets or finite differences) gives two fully independent pipelines that
//! share only the tensor formulas.

use std::collections::HashMap;

use nalgebra::DMatrix;

use super::dense::{Tensor3, Tensor4};
use super::TensorError;
use crate::dsl::{eval_jet, fd_oracle, MetricSpec};
use crate::jet::{FdSettings, Jet, MultiIndex};
use crate::scalar::Scalar;

/// Partials of `Q = F²`. Index convention: x-derivative slots first, then
/// y-derivative slots, e.g. `qxyy[[k, a, b]] = ∂_{x^k} ∂_{y^a} ∂_{y^b} Q`.
#[derive(Debug, Clone)]
pub struct Derivatives<T: Scalar> {
    pub f: T,
    pub q: T,
    pub qy: Vec<T>,
    pub qyy: DMatrix<T>,
    pub qyyy: Tensor3<T>,
    pub qyyyy: Tensor4<T>,
    pub qx: Vec<T>,
    pub qxy: DMatrix<T>,
    pub qxyy: Tensor3<T>,
    pub qxyyy: Tensor4<T>,
}

impl<T: Scalar> Derivatives<T> {
    pub fn dim(&self) -> usize {
        self.qy.len()
    }

    /// Jet pipeline: one forward sweep through the expression.
    pub fn from_jet(spec: &MetricSpec, x: &[T], y: &[T]) -> Result<Self, TensorError> {
        let fj = eval_jet(&spec.expr, x, y, &spec.params)?;
        let q = fj.square();
        Ok(Self::from_q_jet(fj.value(), &q))
    }

    fn from_q_jet(f: T, q: &Jet<T>) -> Self {
        Self::assemble(f, q.layout().dim(), |xs, ys| q.partial(xs, ys))
    }

    /// Finite-difference pipeline: every entry is an independent stencil
    /// evaluation of `F²`, memoized over index permutations.
    pub fn from_fd(
        spec: &MetricSpec,
        x: &[T],
        y: &[T],
        settings: &FdSettings<T>,
    ) -> Result<Self, TensorError> {
        let n = y.len();
        if x.len() != n || n != spec.dim {
            return Err(TensorError::Dimension {
                expected: spec.dim,
                x: x.len(),
                y: n,
            });
        }
        let f = spec.eval(x, y)?;
        let mut cache: HashMap<(Vec<usize>, Vec<usize>), T> = HashMap::new();
        let mut failure = None;
        let out = Self::assemble(f, n, |xs, ys| {
            let mut key = (xs.to_vec(), ys.to_vec());
            key.1.sort_unstable();
            if let Some(v) = cache.get(&key) {
                return *v;
            }
            let mi = MultiIndex::from_indices(n, &key.0, &key.1);
            let v = match fd_oracle(&spec.expr, &spec.params, x, y, &mi, settings) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    T::nan()
                }
            };
            cache.insert(key, v);
            v
        });
        match failure {
            Some(e) => Err(TensorError::Fd(e)),
            None => Ok(out),
        }
    }

    fn assemble(f: T, n: usize, mut d: impl FnMut(&[usize], &[usize]) -> T) -> Self {
        let q = d(&[], &[]);
        let qy = (0..n).map(|a| d(&[], &[a])).collect();
        let qx = (0..n).map(|k| d(&[k], &[])).collect();
        let qyy = DMatrix::from_fn(n, n, |a, b| d(&[], &[a, b]));
        let qxy = DMatrix::from_fn(n, n, |k, a| d(&[k], &[a]));
        let qyyy = Tensor3::from_fn(n, |[a, b, c]| d(&[], &[a, b, c]));
        let qxyy = Tensor3::from_fn(n, |[k, a, b]| d(&[k], &[a, b]));
        let qyyyy = Tensor4::from_fn(n, |[a, b, c, e]| d(&[], &[a, b, c, e]));
        let qxyyy = Tensor4::from_fn(n, |[k, a, b, c]| d(&[k], &[a, b, c]));
        Self {
            f,
            q,
            qy,
            qyy,
            qyyy,
            qyyyy,
            qx,
            qxy,
            qxyy,
            qxyyy,
        }
    }
}
