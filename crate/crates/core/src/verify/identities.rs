//! Unconditional identities every admissible metric must satisfy, plus the
//! jet-vs-finite-difference agreement of the derived tensors.

use nalgebra::DVector;
use serde::Serialize;

use super::SamplingConfig;
use crate::dsl::MetricSpec;
use crate::jet::FdSettings;
use crate::sampling::{sample_bundles, SampleError};
use crate::spaces::{is_degenerate, moor_frame_3d};
use crate::tensors::{mat_norm, vec_norm, Tensor3, TensorBundle};
use crate::tolerance::{TolKey, Tolerances};

/// Samples the finite-difference pipeline is re-run at; it costs a few
/// hundred `F` evaluations per derivative.
const FD_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResult {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Diagnostics are reported but never fail the suite.
    pub asserted: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySuite {
    pub metric: String,
    pub samples: usize,
    pub identities: Vec<IdentityResult>,
    pub passed: bool,
    pub notes: Vec<String>,
}

struct Acc {
    out: Vec<IdentityResult>,
}

impl Acc {
    fn push(
        &mut self,
        name: &str,
        values: impl IntoIterator<Item = f64>,
        tolerance: f64,
        asserted: bool,
    ) {
        let mut samples = 0;
        let mut worst: f64 = 0.0;
        let mut nan = false;
        for v in values {
            samples += 1;
            nan |= v.is_nan();
            worst = worst.max(v);
        }
        if samples == 0 {
            return;
        }
        self.out.push(IdentityResult {
            name: name.into(),
            max_residual: if nan { f64::NAN } else { worst },
            tolerance,
            samples,
            asserted,
            passed: !nan && worst <= tolerance,
        });
    }
}

fn indicatory3(t: &Tensor3<f64>, y: &[f64]) -> f64 {
    mat_norm(&t.contract_last(y)) / ((1.0 + t.norm()) * vec_norm(y))
}

fn gamma_asym(b: &TensorBundle<f64>) -> f64 {
    let g = &b.gamma;
    let d = g
        .indices()
        .map(|[i, j, k]| (g[[i, j, k]] - g[[i, k, j]]).abs())
        .fold(0.0, f64::max);
    d / (1.0 + g.norm())
}

fn rel_diff(a: f64, b: f64) -> f64 {
    a / (1.0 + b)
}

pub fn identity_suite(
    spec: &MetricSpec,
    cfg: SamplingConfig,
    tols: &Tolerances,
) -> Result<IdentitySuite, SampleError> {
    let tols = spec.tolerances.merged(tols);
    let set = sample_bundles::<f64>(spec, &tols, cfg.samples, cfg.seed)?;
    let bs = &set.bundles;
    let id_tol = tols.get(TolKey::Identity);
    let mut acc = Acc { out: Vec::new() };

    acc.push(
        "g_ij y^i y^j = F^2",
        bs.iter().map(|b| {
            let y = DVector::from_column_slice(b.y());
            let f2 = b.f() * b.f();
            ((&b.g * &y).dot(&y) - f2).abs() / f2
        }),
        id_tol,
        true,
    );
    acc.push(
        "h_ij y^j = 0",
        bs.iter().map(|b| {
            let y = DVector::from_column_slice(b.y());
            (&b.h * &y).norm() / ((1.0 + mat_norm(&b.h)) * y.norm())
        }),
        id_tol,
        true,
    );
    acc.push(
        "l_i l^i = 1",
        bs.iter().map(|b| {
            let l: f64 = b.l_lo.iter().zip(b.l_up()).map(|(a, c)| a * c).sum();
            (l - 1.0).abs()
        }),
        id_tol,
        true,
    );
    acc.push(
        "C_ijk y^k = 0",
        bs.iter().map(|b| indicatory3(&b.c, b.y())),
        id_tol,
        true,
    );
    acc.push(
        "C_ijk totally symmetric",
        bs.iter()
            .map(|b| rel_diff(b.c.symmetry_defect(), b.c.norm())),
        id_tol,
        true,
    );
    acc.push(
        "N^i_j y^j = 2 G^i",
        bs.iter().map(|b| {
            let y = DVector::from_column_slice(b.y());
            let ny = &b.n_conn * &y;
            let d: Vec<f64> = ny
                .iter()
                .zip(&b.g_spray)
                .map(|(a, g)| a - 2.0 * g)
                .collect();
            vec_norm(&d) / (1.0 + mat_norm(&b.n_conn) * y.norm())
        }),
        id_tol,
        true,
    );
    acc.push(
        "Gamma^i_jk = Gamma^i_kj",
        bs.iter().map(gamma_asym),
        id_tol,
        true,
    );
    acc.push(
        "T_hijk y^k = 0",
        bs.iter().map(|b| {
            let t = b.t.contract_last(b.y());
            t.norm() / ((1.0 + b.t.norm()) * vec_norm(b.y()))
        }),
        id_tol,
        true,
    );
    acc.push(
        "T_hijk totally symmetric",
        bs.iter()
            .map(|b| rel_diff(b.t.symmetry_defect(), b.t.norm())),
        id_tol,
        true,
    );
    acc.push(
        "T_ij = g^hk T_ijhk",
        bs.iter().map(|b| {
            let d = &b.t2 - b.t.trace_last_two(&b.g_inv);
            mat_norm(&d) / (1.0 + mat_norm(&b.t2))
        }),
        id_tol,
        true,
    );
    let mut notes = Vec::new();
    if spec.dim == 3 {
        let deg = tols.get(TolKey::Degenerate);
        let live: Vec<_> = bs.iter().filter(|b| !is_degenerate(b, deg)).collect();
        acc.push(
            "h_ij = m_i m_j + n_i n_j (3D Moor frame)",
            live.iter()
                .filter_map(|b| moor_frame_3d(b).ok().map(|f| f.angular_residual)),
            id_tol,
            true,
        );
        if live.is_empty() {
            notes.push("Moor frame skipped: C vanishes at every sample".into());
        }
    }

    let pipe_tol = tols.get(TolKey::TwoPipeline);
    let pd = tols.get(TolKey::PositiveDefinite);
    let settings = FdSettings::default();
    let pairs: Vec<_> = bs
        .iter()
        .take(FD_SAMPLES)
        .filter_map(|b| {
            TensorBundle::at_fd(spec, b.x(), b.y(), pd, &settings)
                .ok()
                .map(|fd| (b, fd))
        })
        .collect();
    if pairs.len() < bs.len().min(FD_SAMPLES) {
        notes.push(format!(
            "finite-difference pipeline failed at {} sample(s)",
            bs.len().min(FD_SAMPLES) - pairs.len()
        ));
    }
    acc.push(
        "two-pipeline C_ijk",
        pairs
            .iter()
            .map(|(a, b)| rel_diff(a.c.sub(&b.c).norm(), a.c.norm())),
        pipe_tol,
        true,
    );
    acc.push(
        "two-pipeline Gamma^i_jk",
        pairs
            .iter()
            .map(|(a, b)| rel_diff(a.gamma.sub(&b.gamma).norm(), a.gamma.norm())),
        pipe_tol,
        true,
    );
    acc.push(
        "two-pipeline C_ijk|h",
        pairs
            .iter()
            .map(|(a, b)| rel_diff(a.c_hder.sub(&b.c_hder).norm(), a.c_hder.norm())),
        pipe_tol,
        true,
    );
    acc.push(
        "two-pipeline P_hijk",
        pairs
            .iter()
            .map(|(a, b)| rel_diff(a.p.sub(&b.p).norm(), a.p.norm())),
        pipe_tol,
        true,
    );
    acc.push(
        "two-pipeline T_hijk",
        pairs
            .iter()
            .map(|(a, b)| rel_diff(a.t.sub(&b.t).norm(), a.t.norm())),
        pipe_tol,
        true,
    );

    acc.push(
        "P_i = C_i",
        bs.iter().map(|b| {
            let d: Vec<f64> = b.p_mean.iter().zip(&b.c_mean).map(|(p, c)| p - c).collect();
            vec_norm(&d) / (1.0 + vec_norm(&b.c_mean))
        }),
        id_tol,
        false,
    );
    acc.push(
        "P_hijk = -P_ihjk",
        bs.iter().map(|b| rel_diff(b.p_skew_defect(), b.p.norm())),
        id_tol,
        false,
    );

    let passed = acc.out.iter().all(|r| !r.asserted || r.passed);
    Ok(IdentitySuite {
        metric: spec.name.clone(),
        samples: bs.len(),
        identities: acc.out,
        passed,
        notes,
    })
}
