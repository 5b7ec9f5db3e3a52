//! Seeded support-element sampling.
//!
//! The generator is fixed and named so reports can record exactly how their
//! samples were produced. Candidates are drawn strictly sequentially from one
//! stream; evaluation may fan out over threads, but acceptance happens in
//! draw order, so results never depend on the worker count.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{MetricSpec, SampleRegion};
use crate::scalar::Scalar;
use crate::tensors::{TensorBundle, TensorError};
use crate::tolerance::{TolKey, Tolerances};

/// Recorded verbatim in every report.
pub const GENERATOR: &str =
    "chacha8/rand_chacha-0.9/seed_from_u64; x ~ U(box), y = r*N/|N| with sign mask; v1";

/// Environment variable that sets the default worker count.
pub const WORKERS_ENV: &str = "FINSLER_WORKERS";

#[derive(Debug, Clone)]
pub struct RegionSampler {
    rng: ChaCha8Rng,
    region: SampleRegion,
}

impl RegionSampler {
    pub fn new(region: &SampleRegion, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            region: region.clone(),
        }
    }

    pub fn draw_x(&mut self) -> Vec<f64> {
        let r = &self.region;
        (0..r.x_min.len())
            .map(|i| {
                let (lo, hi) = (r.x_min[i], r.x_max[i]);
                if lo == hi {
                    lo
                } else {
                    self.rng.random_range(lo..hi)
                }
            })
            .collect()
    }

    /// Uniform direction on the sphere of radius `y_radius`, folded into the
    /// sign cone.
    pub fn draw_y(&mut self) -> Vec<f64> {
        let n = self.region.y_sign.len();
        loop {
            let v: Vec<f64> = (0..n).map(|_| self.rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let scale = self.region.y_radius / norm;
            return v
                .iter()
                .zip(&self.region.y_sign)
                .map(|(&a, &s)| match s {
                    1 => a.abs() * scale,
                    -1 => -a.abs() * scale,
                    _ => a * scale,
                })
                .collect();
        }
    }

    pub fn draw(&mut self) -> (Vec<f64>, Vec<f64>) {
        let x = self.draw_x();
        let y = self.draw_y();
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("empty admissible region: all {attempts} candidate support elements were rejected ({reasons})")]
    EmptyRegion { attempts: usize, reasons: String },
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

/// Admissible tensor bundles plus bookkeeping on what was rejected.
#[derive(Debug, Clone)]
pub struct SampleSet<T: Scalar> {
    pub bundles: Vec<TensorBundle<T>>,
    pub requested: usize,
    pub attempts: usize,
    pub rejected: BTreeMap<String, usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleMeta {
    pub generator: &'static str,
    pub seed: u64,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: usize,
    pub rejected: BTreeMap<String, usize>,
}

impl<T: Scalar> SampleSet<T> {
    pub fn meta(&self) -> SampleMeta {
        SampleMeta {
            generator: GENERATOR,
            seed: self.seed,
            requested: self.requested,
            accepted: self.bundles.len(),
            attempts: self.attempts,
            rejected: self.rejected.clone(),
        }
    }
}

fn reject_reason(e: &TensorError) -> &'static str {
    match e {
        TensorError::NotPositiveDefinite { .. } => "not_positive_definite",
        TensorError::NonPositiveF { .. } => "non_positive_F",
        TensorError::Singular => "singular_metric",
        TensorError::Evaluation(_) => "evaluation_error",
        TensorError::Fd(_) => "finite_difference_error",
        TensorError::NonFinite(_) => "non_finite",
        TensorError::Dimension { .. } => "dimension",
    }
}

/// Draws up to `count` admissible support elements and evaluates their
/// tensor bundles through the jet pipeline.
///
/// At most `20·count + 100` candidates are tried; if fewer than `count`
/// survive, the set is returned short and `rejected` says why. Only a
/// completely empty set is an error.
pub fn sample_bundles<T: Scalar>(
    spec: &MetricSpec,
    tol: &Tolerances,
    count: usize,
    seed: u64,
) -> Result<SampleSet<T>, SampleError> {
    if count == 0 {
        return Err(SampleError::ZeroSamples);
    }
    let pd_tol = T::lit(tol.get(TolKey::PositiveDefinite));
    let mut sampler = RegionSampler::new(&spec.region, seed);
    let budget = 20 * count + 100;
    let mut out = SampleSet {
        bundles: Vec::with_capacity(count),
        requested: count,
        attempts: 0,
        rejected: BTreeMap::new(),
        seed,
    };
    while out.bundles.len() < count && out.attempts < budget {
        let want = (count - out.bundles.len()).min(budget - out.attempts);
        let candidates: Vec<_> = (0..want).map(|_| sampler.draw()).collect();
        let results: Vec<_> = candidates
            .par_iter()
            .map(|(x, y)| {
                let x: Vec<T> = x.iter().map(|&v| T::lit(v)).collect();
                let y: Vec<T> = y.iter().map(|&v| T::lit(v)).collect();
                TensorBundle::at(spec, &x, &y, pd_tol)
            })
            .collect();
        for r in results {
            out.attempts += 1;
            match r {
                Ok(b) => out.bundles.push(b),
                Err(e) => *out.rejected.entry(reject_reason(&e).into()).or_default() += 1,
            }
        }
    }
    if out.bundles.is_empty() {
        let reasons = out
            .rejected
            .iter()
            .map(|(k, v)| format!("{k}: {v}"))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(SampleError::EmptyRegion {
            attempts: out.attempts,
            reasons,
        });
    }
    Ok(out)
}

/// Installs a global worker pool sized from `FINSLER_WORKERS`, if set.
/// Safe to call more than once; later calls are no-ops.
pub fn configure_workers_from_env() {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_reproducible_and_respect_region() {
        let region = SampleRegion {
            x_min: vec![0.5, -1.0],
            x_max: vec![1.5, -1.0],
            y_sign: vec![1, -1],
            y_radius: 2.0,
        };
        let mut a = RegionSampler::new(&region, 9);
        let mut b = RegionSampler::new(&region, 9);
        for _ in 0..50 {
            let (xa, ya) = a.draw();
            assert_eq!((xa.clone(), ya.clone()), b.draw());
            assert!((0.5..1.5).contains(&xa[0]));
            assert_eq!(xa[1], -1.0);
            assert!(ya[0] >= 0.0 && ya[1] <= 0.0);
            let r = (ya[0] * ya[0] + ya[1] * ya[1]).sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
        let mut c = RegionSampler::new(&region, 10);
        assert_ne!(RegionSampler::new(&region, 9).draw(), c.draw());
    }
}
