//! Moor frame `(l, m, n)` and main scalars `H, I, J` of a 3-dimensional space.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{self, Scalar};
use crate::tensors::{mat_norm, Tensor3, TensorBundle};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MoorError {
    #[error("the Moor frame needs n = 3, got n = {0}")]
    Dimension(usize),
    #[error(
        "C² = {c_norm2:e}: mean Cartan vector vanishes, m is undefined (metric is Riemannian here)"
    )]
    Degenerate { c_norm2: f64 },
}

/// Frame vectors are stored with lower indices.
#[derive(Debug, Clone, Serialize)]
pub struct MoorFrame {
    pub l: Vec<f64>,
    pub m: Vec<f64>,
    pub nvec: Vec<f64>,
    #[serde(rename = "H")]
    pub h_scalar: f64,
    #[serde(rename = "I")]
    pub i_scalar: f64,
    #[serde(rename = "J")]
    pub j_scalar: f64,
    /// Largest deviation among the six `g`-inner-product constraints.
    pub orthonormality_residual: f64,
    /// `‖h − m⊗m − n⊗n‖`.
    pub angular_residual: f64,
    /// `‖C_rec − C‖ / ‖C‖` with `C_rec` rebuilt from `(H, I, J)` and the frame.
    pub reconstruction_residual: f64,
    /// Coefficients of the `Σ_cyc{h a + C C b}` form as printed alongside
    /// the frame expansion; reported, never asserted.
    pub a_printed: Vec<f64>,
    pub b_printed: Vec<f64>,
}

/// `a a b + a b a + b a a`: the three distinct placements of `b`.
fn three_placements<T: Scalar>(a: &[T], b: &[T]) -> Tensor3<T> {
    Tensor3::outer(a, a, b)
        .add(&Tensor3::outer(a, b, a))
        .add(&Tensor3::outer(b, a, a))
}

/// `C(u, v, w)` with upper-index vectors.
fn c_eval<T: Scalar>(c: &Tensor3<T>, u: &[T], v: &[T], w: &[T]) -> T {
    c.indices().fold(T::zero(), |acc, [i, j, k]| {
        acc + c[[i, j, k]] * u[i] * v[j] * w[k]
    })
}

pub fn moor_frame_3d<T: Scalar>(b: &TensorBundle<T>) -> Result<MoorFrame, MoorError> {
    let n = b.dim();
    if n != 3 {
        return Err(MoorError::Dimension(n));
    }
    if !(b.c_norm2.to_f64_lossy() > 1e-24) {
        return Err(MoorError::Degenerate {
            c_norm2: b.c_norm2.to_f64_lossy(),
        });
    }
    let f = b.f();
    let g = &b.g;
    let gi = &b.g_inv;
    let cn = scalar::sqrt(b.c_norm2);
    let l_lo = DVector::from_column_slice(&b.l_lo);
    let m_lo = DVector::from_iterator(3, b.c_mean.iter().map(|&v| v / cn));
    let det = g.determinant();
    let sdet = scalar::sqrt(det);
    // n^i = ε^{ijk} l_j m_k / √det g
    let cross = [
        l_lo[1] * m_lo[2] - l_lo[2] * m_lo[1],
        l_lo[2] * m_lo[0] - l_lo[0] * m_lo[2],
        l_lo[0] * m_lo[1] - l_lo[1] * m_lo[0],
    ];
    let n_up = DVector::from_iterator(3, cross.iter().map(|&v| v / sdet));
    let n_lo = g * &n_up;
    let l_up = gi * &l_lo;
    let m_up = gi * &m_lo;

    let frame_up = [&l_up, &m_up, &n_up];
    let frame_lo = [&l_lo, &m_lo, &n_lo];
    let mut ortho = T::zero();
    for a in 0..3 {
        for c in a..3 {
            let target = if a == c { T::one() } else { T::zero() };
            let ip = frame_lo[a].dot(frame_up[c]);
            ortho = scalar::fmax(ortho, scalar::abs(ip - target));
        }
    }

    let mm = &m_lo * m_lo.transpose();
    let nn = &n_lo * n_lo.transpose();
    let angular = mat_norm(&(&b.h - mm - nn));

    let (mu, nu) = (m_up.as_slice(), n_up.as_slice());
    let hh = f * c_eval(&b.c, mu, mu, mu);
    let ii = f * c_eval(&b.c, mu, nu, nu);
    let jj = f * c_eval(&b.c, nu, nu, nu);

    let (ml, nl) = (m_lo.as_slice(), n_lo.as_slice());
    let rec = Tensor3::outer(ml, ml, ml)
        .scale(hh)
        .sub(&three_placements(ml, nl).scale(jj))
        .add(&three_placements(nl, ml).scale(ii))
        .add(&Tensor3::outer(nl, nl, nl).scale(jj))
        .scale(T::one() / f);
    let recon = rec.sub(&b.c).norm() / b.c.norm();

    let three = T::lit(3.0);
    let a_printed: Vec<f64> = (0..3)
        .map(|k| ((ii * m_lo[k] + jj / three * n_lo[k]) / f).to_f64_lossy())
        .collect();
    let b_printed: Vec<f64> = (0..3)
        .map(|k| {
            (((hh / three - ii) * m_lo[k] + T::lit(4.0) * jj / three * n_lo[k]) / (f * b.c_norm2))
                .to_f64_lossy()
        })
        .collect();

    let to = |v: &DVector<T>| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
    Ok(MoorFrame {
        l: to(&l_lo),
        m: to(&m_lo),
        nvec: to(&n_lo),
        h_scalar: hh.to_f64_lossy(),
        i_scalar: ii.to_f64_lossy(),
        j_scalar: jj.to_f64_lossy(),
        orthonormality_residual: ortho.to_f64_lossy(),
        angular_residual: angular.to_f64_lossy(),
        reconstruction_residual: recon.to_f64_lossy(),
        a_printed,
        b_printed,
    })
}
