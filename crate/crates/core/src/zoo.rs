//! Built-in reference metrics and vector fields.
//!
//! The metric sources live in `zoo/*.fml` and are compiled in, so the files
//! on disk double as CLI examples.

use crate::dsl::{MetricSpec, VectorFieldSpec};

pub const EUCLIDEAN: &str = include_str!("../zoo/euclidean.fml");
pub const EXP_RIEMANNIAN: &str = include_str!("../zoo/exp_riemannian.fml");
pub const RANDERS: &str = include_str!("../zoo/randers.fml");
pub const RANDERS_PERTURBED: &str = include_str!("../zoo/randers_perturbed.fml");
pub const QUARTIC: &str = include_str!("../zoo/quartic.fml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ZooMetric {
    Euclidean,
    ExpRiemannian,
    Randers,
    RandersPerturbed,
    Quartic,
}

impl ZooMetric {
    pub const ALL: [ZooMetric; 5] = [
        ZooMetric::Euclidean,
        ZooMetric::ExpRiemannian,
        ZooMetric::Randers,
        ZooMetric::RandersPerturbed,
        ZooMetric::Quartic,
    ];

    pub fn source(self) -> &'static str {
        match self {
            ZooMetric::Euclidean => EUCLIDEAN,
            ZooMetric::ExpRiemannian => EXP_RIEMANNIAN,
            ZooMetric::Randers => RANDERS,
            ZooMetric::RandersPerturbed => RANDERS_PERTURBED,
            ZooMetric::Quartic => QUARTIC,
        }
    }

    pub fn spec(self) -> MetricSpec {
        MetricSpec::from_toml_str(self.source()).expect("zoo metrics parse")
    }

    pub fn is_riemannian(self) -> bool {
        matches!(self, ZooMetric::Euclidean | ZooMetric::ExpRiemannian)
    }

    /// Independent of `x`.
    pub fn is_locally_minkowski(self) -> bool {
        matches!(
            self,
            ZooMetric::Euclidean | ZooMetric::Randers | ZooMetric::Quartic
        )
    }
}

/// `X^i = −x^i`.
pub fn position_field(n: usize) -> VectorFieldSpec {
    let comps: Vec<String> = (1..=n).map(|i| format!("-x{i}")).collect();
    VectorFieldSpec::build("position", n, &comps, Default::default())
        .expect("position field parses")
}

/// Constant unit vector along the `k`-th axis (0-based).
pub fn axis_field(n: usize, k: usize) -> VectorFieldSpec {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    VectorFieldSpec::constant(format!("e{}", k + 1), &v)
}

pub fn zero_field(n: usize) -> VectorFieldSpec {
    VectorFieldSpec::constant("zero", &vec![0.0; n])
}

/// The fields every theorem run is exercised with.
pub fn standard_fields(n: usize) -> Vec<VectorFieldSpec> {
    vec![position_field(n), axis_field(n, 0), zero_field(n)]
}
