//! Pointwise Finsler tensors at a support element.
//!
//! Conventions (all indices 0-based, `Q = F²`):
//! - `c[[i, j, k]] = C_ijk`, `c_mixed[[i, j, k]] = C^i_jk`;
//! - `n_conn[(i, j)] = N^i_j`, `g_berwald[[i, j, h]] = G^i_jh`,
//!   `gamma[[i, j, k]] = Γ^i_jk`;
//! - `c_hder[[i, j, k, h]] = C_ijk|h` (derivative slot last), and a trailing
//!   `0` means that slot contracted with `y`;
//! - `p[[h, i, j, k]] = P_hijk`, `t[[h, i, j, k]] = T_hijk`.

mod dense;
mod derivatives;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

pub use dense::{mat_norm, mat_to_nested, vec_norm, vec_to_json, Tensor3, Tensor4};
pub use derivatives::Derivatives;

use crate::dsl::{EvalError, MetricSpec};
use crate::jet::{FdError, FdSettings};
use crate::scalar::{self, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("F must be positive at a support element, got {value:e}")]
    NonPositiveF { value: f64 },
    #[error("fundamental tensor is not positive-definite (min eigenvalue {min_eigenvalue:e}, mean {mean_eigenvalue:e})")]
    NotPositiveDefinite {
        min_eigenvalue: f64,
        mean_eigenvalue: f64,
    },
    #[error("fundamental tensor is singular")]
    Singular,
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Fd(#[from] FdError),
    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),
    #[error(
        "dimension mismatch: metric has dim {expected}, got x of length {x} and y of length {y}"
    )]
    Dimension { expected: usize, x: usize, y: usize },
}

/// A point `(x, y)` of the slit tangent bundle with its `F` value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportElement<T: Scalar> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub f: T,
}

#[derive(Debug, Clone)]
pub struct MetricBlock<T: Scalar> {
    pub g: DMatrix<T>,
    pub g_inv: DMatrix<T>,
    pub l_lo: Vec<T>,
    pub h: DMatrix<T>,
    pub f: T,
    pub min_eigenvalue: T,
}

#[derive(Debug, Clone)]
pub struct CartanBlock<T: Scalar> {
    pub c: Tensor3<T>,
    pub c_mixed: Tensor3<T>,
    pub c_mean: Vec<T>,
    pub c_norm2: T,
}

#[derive(Debug, Clone)]
pub struct Connections<T: Scalar> {
    pub g_spray: Vec<T>,
    pub n_conn: DMatrix<T>,
    pub g_berwald: Tensor3<T>,
    pub gamma: Tensor3<T>,
}

#[derive(Debug, Clone)]
pub struct HCurvature<T: Scalar> {
    pub p: Tensor4<T>,
    pub p_lo: Tensor3<T>,
    pub p_mean: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct TBlock<T: Scalar> {
    /// `C_hij|k`, vertical derivative slot last.
    pub c_vder: Tensor4<T>,
    pub t: Tensor4<T>,
    pub t2: DMatrix<T>,
}

/// `g = ½ Q_yy`, inverse, `l_i = Q_y / 2F`, angular metric.
///
/// `pd_tol` is the minimum admissible ratio of smallest to mean eigenvalue.
pub fn metric_block<T: Scalar>(
    d: &Derivatives<T>,
    pd_tol: T,
) -> Result<MetricBlock<T>, TensorError> {
    let n = d.dim();
    let half = T::lit(0.5);
    if !(d.f > T::zero()) {
        return Err(TensorError::NonPositiveF {
            value: d.f.to_f64_lossy(),
        });
    }
    let g = d.qyy.map(|v| v * half);
    if !g.iter().all(|v| scalar::is_finite(*v)) {
        return Err(TensorError::NonFinite("g"));
    }
    let g = (&g + g.transpose()).map(|v| v * half);
    let eig = SymmetricEigen::new(g.clone()).eigenvalues;
    let min = eig
        .iter()
        .copied()
        .fold(T::infinity(), num_traits::Float::min);
    let mean = eig.iter().copied().fold(T::zero(), |a, b| a + b) / T::lit(n as f64);
    if !(min > pd_tol * mean) || !(mean > T::zero()) {
        return Err(TensorError::NotPositiveDefinite {
            min_eigenvalue: min.to_f64_lossy(),
            mean_eigenvalue: mean.to_f64_lossy(),
        });
    }
    let g_inv = g.clone().try_inverse().ok_or(TensorError::Singular)?;
    let g_inv = (&g_inv + g_inv.transpose()).map(|v| v * half);
    let two_f = d.f + d.f;
    let l_lo: Vec<T> = d.qy.iter().map(|&v| v / two_f).collect();
    let h = DMatrix::from_fn(n, n, |i, j| g[(i, j)] - l_lo[i] * l_lo[j]);
    Ok(MetricBlock {
        g,
        g_inv,
        l_lo,
        h,
        f: d.f,
        min_eigenvalue: min,
    })
}

/// `C_ijk = ¼ Q_yyy`, `C^i_jk`, `C_i = C_ijk g^jk`, `C² = g^ij C_i C_j`.
pub fn cartan_block<T: Scalar>(d: &Derivatives<T>, g_inv: &DMatrix<T>) -> CartanBlock<T> {
    let c = d.qyyy.scale(T::lit(0.25));
    let c_mixed = c.raise_first(g_inv);
    let c_mean: Vec<T> = c.trace_last_two(g_inv).iter().copied().collect();
    let cm = DVector::from_column_slice(&c_mean);
    let c_norm2 = scalar::fmax((g_inv * &cm).dot(&cm), T::zero());
    CartanBlock {
        c,
        c_mixed,
        c_mean,
        c_norm2,
    }
}

/// `W_l = y^k Q_{x^k y^l} − Q_{x^l}`, so that `G = ¼ g⁻¹ W`.
fn spray_w<T: Scalar>(d: &Derivatives<T>, y: &[T]) -> DVector<T> {
    let n = d.dim();
    DVector::from_fn(n, |l, _| {
        (0..n).fold(T::zero(), |a, k| a + y[k] * d.qxy[(k, l)]) - d.qx[l]
    })
}

/// Spray, Barthel connection, Berwald coefficients and the Cartan
/// connection's horizontal coefficients `Γ`.
///
/// Everything is obtained by differentiating `G = ¼ g⁻¹ W` in closed form
/// using `∂̇_j g⁻¹ = −2 g⁻¹ C_j g⁻¹`, so no derivative beyond the jet's
/// truncation set is needed.
pub fn spray_connections<T: Scalar>(
    d: &Derivatives<T>,
    y: &[T],
    metric: &MetricBlock<T>,
    cartan: &CartanBlock<T>,
) -> Connections<T> {
    let n = d.dim();
    let quarter = T::lit(0.25);
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let gi = &metric.g_inv;
    let w = spray_w(d, y);
    let g_spray: Vec<T> = (gi * &w).map(|v| v * quarter).iter().copied().collect();

    // ∂̇_j W_l
    let dw: Vec<DVector<T>> = (0..n)
        .map(|j| {
            DVector::from_fn(n, |l, _| {
                d.qxy[(j, l)] + (0..n).fold(T::zero(), |a, k| a + y[k] * d.qxyy[[k, l, j]])
                    - d.qxy[(l, j)]
            })
        })
        .collect();
    // ∂̇_h ∂̇_j W_l
    let ddw = |h: usize, j: usize| -> DVector<T> {
        DVector::from_fn(n, |l, _| {
            d.qxyy[[j, l, h]]
                + d.qxyy[[h, l, j]]
                + (0..n).fold(T::zero(), |a, k| a + y[k] * d.qxyyy[[k, l, j, h]])
                - d.qxyy[[l, j, h]]
        })
    };
    let c_slices: Vec<DMatrix<T>> = (0..n).map(|j| cartan.c.slice_last(j)).collect();
    let gcg: Vec<DMatrix<T>> = c_slices.iter().map(|cj| gi * cj * gi).collect();
    let dginv: Vec<DMatrix<T>> = gcg.iter().map(|m| m.map(|v| -v * two)).collect();

    let mut n_conn = DMatrix::zeros(n, n);
    for j in 0..n {
        let col = (&dginv[j] * &w + gi * &dw[j]).map(|v| v * quarter);
        n_conn.set_column(j, &col);
    }

    let mut g_berwald = Tensor3::zeros(n);
    for j in 0..n {
        for h in j..n {
            // (∂̇_h C)_{ab j} = ¼ Q_{y^a y^b y^j y^h}
            let dc = DMatrix::from_fn(n, n, |a, b| d.qyyyy[[a, b, j, h]] * quarter);
            let ddginv = (&gcg[h] * &c_slices[j] * gi).map(|v| v * four)
                - (gi * dc * gi).map(|v| v * two)
                + (&gcg[j] * &c_slices[h] * gi).map(|v| v * four);
            let v = ddginv * &w + &dginv[j] * &dw[h] + &dginv[h] * &dw[j] + gi * ddw(h, j);
            for i in 0..n {
                let val = v[i] * quarter;
                g_berwald[[i, j, h]] = val;
                g_berwald[[i, h, j]] = val;
            }
        }
    }

    // δ_a g_bc = ½ Q_{x^a y^b y^c} − N^s_a · 2 C_bcs
    let half = T::lit(0.5);
    let delta_g = Tensor3::from_fn(n, |[a, b, c]| {
        d.qxyy[[a, b, c]] * half
            - (0..n).fold(T::zero(), |acc, s| {
                acc + n_conn[(s, a)] * two * cartan.c[[b, c, s]]
            })
    });
    let gamma_lo = Tensor3::from_fn(n, |[r, j, k]| {
        half * (delta_g[[j, k, r]] + delta_g[[k, j, r]] - delta_g[[r, j, k]])
    });
    let gamma = gamma_lo.raise_first(gi);
    Connections {
        g_spray,
        n_conn,
        g_berwald,
        gamma,
    }
}

/// `C_ijk|h = δ_h C_ijk − C_mjk Γ^m_ih − C_imk Γ^m_jh − C_ijm Γ^m_kh`, with
/// `δ_h C_ijk = ∂_h C_ijk − N^s_h ∂̇_s C_ijk`. Returns `(C_ijk|h, C_ijk|0)`.
pub fn cartan_h_derivative<T: Scalar>(
    d: &Derivatives<T>,
    y: &[T],
    cartan: &CartanBlock<T>,
    conn: &Connections<T>,
) -> (Tensor4<T>, Tensor3<T>) {
    let n = d.dim();
    let quarter = T::lit(0.25);
    let c = &cartan.c;
    let gm = &conn.gamma;
    let hder = Tensor4::from_fn(n, |[i, j, k, h]| {
        let mut v = d.qxyyy[[h, i, j, k]] * quarter;
        for s in 0..n {
            v = v - conn.n_conn[(s, h)] * d.qyyyy[[i, j, k, s]] * quarter;
        }
        for m in 0..n {
            v = v
                - c[[m, j, k]] * gm[[m, i, h]]
                - c[[i, m, k]] * gm[[m, j, h]]
                - c[[i, j, m]] * gm[[m, k, h]];
        }
        v
    });
    let hder0 = hder.contract_last(y);
    (hder, hder0)
}

/// hv-curvature assembled from
/// `P_hijk = C_ijk|h − C_hjk|i + C_hjr C^r_ik|0 − C_ijr C^r_hk|0`.
///
/// `P_lo = C_ijk|0` and `P_i = P^r_ir = g^rs P_sir`.
pub fn hv_curvature<T: Scalar>(
    g_inv: &DMatrix<T>,
    cartan: &CartanBlock<T>,
    hder: &Tensor4<T>,
    hder0: &Tensor3<T>,
) -> HCurvature<T> {
    let n = hder0.dim();
    let c = &cartan.c;
    let hder0_mixed = hder0.raise_first(g_inv);
    let p = Tensor4::from_fn(n, |[h, i, j, k]| {
        let mut v = hder[[i, j, k, h]] - hder[[h, j, k, i]];
        for r in 0..n {
            v = v + c[[h, j, r]] * hder0_mixed[[r, i, k]] - c[[i, j, r]] * hder0_mixed[[r, h, k]];
        }
        v
    });
    let p_lo = hder0.clone();
    let p_mean = (0..n)
        .map(|i| {
            let mut acc = T::zero();
            for r in 0..n {
                for s in 0..n {
                    acc = acc + g_inv[(r, s)] * p_lo[[s, i, r]];
                }
            }
            acc
        })
        .collect();
    HCurvature { p, p_lo, p_mean }
}

/// `C_hij|k = ∂̇_k C_hij − C_mij C^m_hk − C_hmj C^m_ik − C_him C^m_jk`.
pub fn cartan_v_derivative<T: Scalar>(d: &Derivatives<T>, cartan: &CartanBlock<T>) -> Tensor4<T> {
    let n = d.dim();
    let quarter = T::lit(0.25);
    let c = &cartan.c;
    let cm = &cartan.c_mixed;
    Tensor4::from_fn(n, |[h, i, j, k]| {
        let mut v = d.qyyyy[[h, i, j, k]] * quarter;
        for m in 0..n {
            v = v
                - c[[m, i, j]] * cm[[m, h, k]]
                - c[[h, m, j]] * cm[[m, i, k]]
                - c[[h, i, m]] * cm[[m, j, k]];
        }
        v
    })
}

/// `T_hijk = F C_hij|k + C_hij l_k + C_hik l_j + C_hjk l_i + C_ijk l_h` and
/// its trace `T_ij = T_ijhk g^hk`.
pub fn t_tensor<T: Scalar>(
    d: &Derivatives<T>,
    metric: &MetricBlock<T>,
    cartan: &CartanBlock<T>,
) -> TBlock<T> {
    let n = d.dim();
    let c_vder = cartan_v_derivative(d, cartan);
    let c = &cartan.c;
    let l = &metric.l_lo;
    let f = metric.f;
    let t = Tensor4::from_fn(n, |[h, i, j, k]| {
        f * c_vder[[h, i, j, k]]
            + c[[h, i, j]] * l[k]
            + c[[h, i, k]] * l[j]
            + c[[h, j, k]] * l[i]
            + c[[i, j, k]] * l[h]
    });
    let t2 = t.trace_last_two(&metric.g_inv);
    TBlock { c_vder, t, t2 }
}

/// Every pointwise tensor at one support element.
#[derive(Debug, Clone)]
pub struct TensorBundle<T: Scalar> {
    pub point: SupportElement<T>,
    pub g: DMatrix<T>,
    pub g_inv: DMatrix<T>,
    pub min_eigenvalue: T,
    pub l_lo: Vec<T>,
    pub h: DMatrix<T>,
    pub c: Tensor3<T>,
    pub c_mixed: Tensor3<T>,
    pub c_mean: Vec<T>,
    pub c_norm2: T,
    pub g_spray: Vec<T>,
    pub n_conn: DMatrix<T>,
    pub g_berwald: Tensor3<T>,
    pub gamma: Tensor3<T>,
    pub c_hder: Tensor4<T>,
    pub c_hder0: Tensor3<T>,
    pub p: Tensor4<T>,
    pub p_lo: Tensor3<T>,
    pub p_mean: Vec<T>,
    pub c_vder: Tensor4<T>,
    pub t: Tensor4<T>,
    pub t2: DMatrix<T>,
    /// `∂̇_h C_ijk`, kept for frame and fit diagnostics.
    pub dc: Tensor4<T>,
}

impl<T: Scalar> TensorBundle<T> {
    /// Jet pipeline.
    pub fn at(spec: &MetricSpec, x: &[T], y: &[T], pd_tol: T) -> Result<Self, TensorError> {
        check_dims(spec, x, y)?;
        let d = Derivatives::from_jet(spec, x, y)?;
        Self::from_derivatives(&d, x, y, pd_tol)
    }

    /// Finite-difference pipeline, sharing all algebra with [`Self::at`].
    pub fn at_fd(
        spec: &MetricSpec,
        x: &[T],
        y: &[T],
        pd_tol: T,
        settings: &FdSettings<T>,
    ) -> Result<Self, TensorError> {
        check_dims(spec, x, y)?;
        let d = Derivatives::from_fd(spec, x, y, settings)?;
        Self::from_derivatives(&d, x, y, pd_tol)
    }

    pub fn from_derivatives(
        d: &Derivatives<T>,
        x: &[T],
        y: &[T],
        pd_tol: T,
    ) -> Result<Self, TensorError> {
        let metric = metric_block(d, pd_tol)?;
        let cartan = cartan_block(d, &metric.g_inv);
        let conn = spray_connections(d, y, &metric, &cartan);
        let (c_hder, c_hder0) = cartan_h_derivative(d, y, &cartan, &conn);
        let hv = hv_curvature(&metric.g_inv, &cartan, &c_hder, &c_hder0);
        let tb = t_tensor(d, &metric, &cartan);
        let bundle = Self {
            point: SupportElement {
                x: x.to_vec(),
                y: y.to_vec(),
                f: metric.f,
            },
            g: metric.g,
            g_inv: metric.g_inv,
            min_eigenvalue: metric.min_eigenvalue,
            l_lo: metric.l_lo,
            h: metric.h,
            c: cartan.c,
            c_mixed: cartan.c_mixed,
            c_mean: cartan.c_mean,
            c_norm2: cartan.c_norm2,
            g_spray: conn.g_spray,
            n_conn: conn.n_conn,
            g_berwald: conn.g_berwald,
            gamma: conn.gamma,
            c_hder,
            c_hder0,
            p: hv.p,
            p_lo: hv.p_lo,
            p_mean: hv.p_mean,
            c_vder: tb.c_vder,
            t: tb.t,
            t2: tb.t2,
            dc: d.qyyyy.scale(T::lit(0.25)),
        };
        bundle.check_finite()?;
        Ok(bundle)
    }

    fn check_finite(&self) -> Result<(), TensorError> {
        let mats = [
            ("g_inv", &self.g_inv),
            ("h", &self.h),
            ("N", &self.n_conn),
            ("T_ij", &self.t2),
        ];
        for (name, m) in mats {
            if !m.iter().all(|v| scalar::is_finite(*v)) {
                return Err(TensorError::NonFinite(name));
            }
        }
        let t3 = [
            ("C", &self.c),
            ("G_berwald", &self.g_berwald),
            ("Gamma", &self.gamma),
            ("C_hder0", &self.c_hder0),
        ];
        for (name, t) in t3 {
            if !t.is_finite() {
                return Err(TensorError::NonFinite(name));
            }
        }
        let t4 = [("C_hder", &self.c_hder), ("P", &self.p), ("T", &self.t)];
        for (name, t) in t4 {
            if !t.is_finite() {
                return Err(TensorError::NonFinite(name));
            }
        }
        if !self.g_spray.iter().all(|v| scalar::is_finite(*v)) {
            return Err(TensorError::NonFinite("G_spray"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.point.y.len()
    }

    pub fn f(&self) -> T {
        self.point.f
    }

    pub fn y(&self) -> &[T] {
        &self.point.y
    }

    pub fn x(&self) -> &[T] {
        &self.point.x
    }

    /// `l^i = y^i / F`.
    pub fn l_up(&self) -> Vec<T> {
        self.point.y.iter().map(|&v| v / self.point.f).collect()
    }

    /// `‖C‖_F`.
    pub fn c_norm(&self) -> T {
        self.c.norm()
    }

    /// `C^r_ik|0`.
    pub fn c_hder0_mixed(&self) -> Tensor3<T> {
        self.c_hder0.raise_first(&self.g_inv)
    }

    /// Skew-symmetry defect of `P` in its first two slots.
    pub fn p_skew_defect(&self) -> T {
        let n = self.dim();
        let mut worst = T::zero();
        for idx in self.p.indices() {
            let [h, i, j, k] = idx;
            debug_assert!(h < n);
            worst = scalar::fmax(worst, scalar::abs(self.p[idx] + self.p[[i, h, j, k]]));
        }
        worst
    }

    /// Everything as a JSON object with stable key order.
    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        let put =
            |m: &mut serde_json::Map<String, serde_json::Value>, k: &str, v: serde_json::Value| {
                m.insert(k.to_string(), v);
            };
        put(&mut m, "x", vec_to_json(&self.point.x));
        put(&mut m, "y", vec_to_json(&self.point.y));
        put(&mut m, "F", serde_json::json!(self.point.f.to_f64_lossy()));
        put(&mut m, "g", mat_to_nested(&self.g));
        put(&mut m, "g_inv", mat_to_nested(&self.g_inv));
        put(
            &mut m,
            "min_eigenvalue",
            serde_json::json!(self.min_eigenvalue.to_f64_lossy()),
        );
        put(&mut m, "l_lo", vec_to_json(&self.l_lo));
        put(&mut m, "h", mat_to_nested(&self.h));
        put(&mut m, "C_lo", self.c.to_nested_f64());
        put(&mut m, "C_mixed", self.c_mixed.to_nested_f64());
        put(&mut m, "C_mean", vec_to_json(&self.c_mean));
        put(
            &mut m,
            "C_norm2",
            serde_json::json!(self.c_norm2.to_f64_lossy()),
        );
        put(&mut m, "G_spray", vec_to_json(&self.g_spray));
        put(&mut m, "N", mat_to_nested(&self.n_conn));
        put(&mut m, "G_berwald", self.g_berwald.to_nested_f64());
        put(&mut m, "Gamma", self.gamma.to_nested_f64());
        put(&mut m, "C_hder", self.c_hder.to_nested_f64());
        put(&mut m, "C_hder0", self.c_hder0.to_nested_f64());
        put(&mut m, "P", self.p.to_nested_f64());
        put(&mut m, "P_lo", self.p_lo.to_nested_f64());
        put(&mut m, "P_mean", vec_to_json(&self.p_mean));
        put(&mut m, "T", self.t.to_nested_f64());
        put(&mut m, "T2", mat_to_nested(&self.t2));
        serde_json::Value::Object(m)
    }
}

fn check_dims<T: Scalar>(spec: &MetricSpec, x: &[T], y: &[T]) -> Result<(), TensorError> {
    if x.len() != spec.dim || y.len() != spec.dim {
        return Err(TensorError::Dimension {
            expected: spec.dim,
            x: x.len(),
            y: y.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
