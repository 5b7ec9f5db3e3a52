//! Named tolerances with per-spec and per-run overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

macro_rules! tolerance_keys {
    ($($variant:ident => ($name:literal, $default:expr)),+ $(,)?) => {
        /// Every tolerance the workbench consults.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum TolKey {
            $($variant),+
        }

        impl TolKey {
            pub const ALL: &'static [TolKey] = &[$(TolKey::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $(TolKey::$variant => $name),+
                }
            }

            pub fn default_value(self) -> f64 {
                match self {
                    $(TolKey::$variant => $default),+
                }
            }
        }
    };
}

tolerance_keys! {
    Riemannian => ("riemannian", 1e-6),
    CReducible => ("c_reducible", 1e-6),
    SemiCReducible => ("semi_c_reducible", 1e-6),
    QuasiCReducible => ("quasi_c_reducible", 1e-6),
    C3Like => ("c3_like", 1e-6),
    ChRecurrent => ("ch_recurrent", 1e-6),
    P2Like => ("p2_like", 1e-6),
    PReducible => ("p_reducible", 1e-6),
    Landsberg => ("landsberg", 1e-6),
    TCondition => ("t_condition", 1e-6),
    Sc => ("sc", 1e-6),
    Cc => ("cc", 1e-6),
    Concurrent => ("concurrent", 1e-6),
    Conclusion => ("conclusion", 1e-6),
    SideMargin => ("side_margin", 1e-3),
    Identity => ("identity", 1e-9),
    TwoPipeline => ("two_pipeline", 1e-4),
    Homogeneity => ("homogeneity", 1e-9),
    PositiveDefinite => ("positive_definite", 1e-8),
    Degenerate => ("degenerate", 1e-9),
    NullspaceRelative => ("nullspace_rel", 1e-8),
    NullspaceAbsolute => ("nullspace_abs", 1e-10),
    Independence => ("independence", 1e-6),
}

impl fmt::Display for TolKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToleranceError {
    #[error("unknown tolerance '{0}'")]
    UnknownKey(String),
    #[error("tolerance '{key}' must be positive and finite, got {value}")]
    InvalidValue { key: String, value: f64 },
}

impl FromStr for TolKey {
    type Err = ToleranceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TolKey::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| ToleranceError::UnknownKey(s.to_string()))
    }
}

/// Defaults plus overrides; overrides are kept separately so reports can
/// record exactly what was changed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tolerances {
    overrides: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn with_overrides<'a>(
        pairs: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self, ToleranceError> {
        let mut t = Self::default();
        for (k, v) in pairs {
            t.set(k, v)?;
        }
        Ok(t)
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<(), ToleranceError> {
        let k: TolKey = key.parse()?;
        if !(value > 0.0) || !value.is_finite() {
            return Err(ToleranceError::InvalidValue {
                key: key.to_string(),
                value,
            });
        }
        self.overrides.insert(k.name().to_string(), value);
        Ok(())
    }

    pub fn get(&self, key: TolKey) -> f64 {
        self.overrides
            .get(key.name())
            .copied()
            .unwrap_or_else(|| key.default_value())
    }

    /// Layers `other`'s overrides on top of these.
    pub fn merged(&self, other: &Tolerances) -> Tolerances {
        let mut out = self.clone();
        for (k, v) in &other.overrides {
            out.overrides.insert(k.clone(), *v);
        }
        out
    }

    pub fn overrides(&self) -> &BTreeMap<String, f64> {
        &self.overrides
    }

    /// Every effective value, keyed by name.
    pub fn effective(&self) -> BTreeMap<&'static str, f64> {
        TolKey::ALL
            .iter()
            .map(|k| (k.name(), self.get(*k)))
            .collect()
    }
}
