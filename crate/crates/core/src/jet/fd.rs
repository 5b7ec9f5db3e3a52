//! Central finite differences with Richardson extrapolation.
//!
//! This is the independent derivative route: it only ever evaluates the
//! function at perturbed points and never touches jet arithmetic.

use std::fmt::Display;

use num_traits::Float;
use thiserror::Error;

use super::MultiIndex;
use crate::scalar::Scalar;

/// How the base step of the central-difference stencil is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule<T> {
    /// Relative step `h = scale · s` for every order, where `s` is `|y|` for
    /// fiber coordinates and `1 + |x^i|` for base coordinates.
    Fixed(T),
    /// `h = ε^(1/(k + 2L)) · s` for a `k`-th order partial and `L`
    /// Richardson levels, balancing truncation and round-off.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSettings<T> {
    pub step: StepRule<T>,
    /// Number of step sizes in the Richardson tableau; `1` is a plain
    /// central difference.
    pub richardson_levels: usize,
}

impl<T: Scalar> Default for FdSettings<T> {
    fn default() -> Self {
        Self {
            step: StepRule::Adaptive,
            richardson_levels: 3,
        }
    }
}

impl<T: Scalar> FdSettings<T> {
    /// `ε^(1/3)` relative step with two Richardson levels.
    pub fn classic() -> Self {
        Self {
            step: StepRule::Fixed(Float::cbrt(T::epsilon())),
            richardson_levels: 2,
        }
    }

    pub fn validate(&self) -> Result<(), FdError> {
        if self.richardson_levels < 1 {
            return Err(FdError::InvalidSettings(
                "richardson_levels must be at least 1".into(),
            ));
        }
        if let StepRule::Fixed(s) = self.step {
            if !(s > T::zero()) || !Float::is_finite(s) {
                return Err(FdError::InvalidSettings(
                    "step_scale must be positive and finite".into(),
                ));
            }
        }
        Ok(())
    }

    fn base_step(&self, order: u32) -> T {
        match self.step {
            StepRule::Fixed(s) => s,
            StepRule::Adaptive => {
                let denom = order as f64 + 2.0 * self.richardson_levels as f64;
                Float::powf(T::epsilon(), T::lit(1.0 / denom))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError {
    #[error("finite-difference step underflows near y = 0 (|y| = {norm:e}, reach = {reach:e})")]
    StepUnderflow { norm: f64, reach: f64 },
    #[error("derivative order {0} exceeds the supported stencils (max 5 per coordinate)")]
    OrderTooHigh(u32),
    #[error("dimension mismatch: x has {x}, y has {y}, multi-index has {mi}")]
    DimensionMismatch { x: usize, y: usize, mi: usize },
    #[error("evaluation failed at a stencil point: {0}")]
    Evaluation(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

/// `(offset, weight)` pairs of the O(h²) central stencil for the `m`-th
/// derivative, to be divided by `h^m`.
fn stencil(m: u8) -> Option<&'static [(i32, f64)]> {
    const S0: &[(i32, f64)] = &[(0, 1.0)];
    const S1: &[(i32, f64)] = &[(-1, -0.5), (1, 0.5)];
    const S2: &[(i32, f64)] = &[(-1, 1.0), (0, -2.0), (1, 1.0)];
    const S3: &[(i32, f64)] = &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)];
    const S4: &[(i32, f64)] = &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)];
    const S5: &[(i32, f64)] = &[
        (-3, -0.5),
        (-2, 2.0),
        (-1, -2.5),
        (1, 2.5),
        (2, -2.0),
        (3, 0.5),
    ];
    match m {
        0 => Some(S0),
        1 => Some(S1),
        2 => Some(S2),
        3 => Some(S3),
        4 => Some(S4),
        5 => Some(S5),
        _ => None,
    }
}

/// Estimates the mixed partial `∂^β_x ∂^α_y f` at `(x, y)`.
pub fn fd_partial<T, E, F>(
    f: F,
    x: &[T],
    y: &[T],
    which: &MultiIndex,
    settings: &FdSettings<T>,
) -> Result<T, FdError>
where
    T: Scalar,
    E: Display,
    F: Fn(&[T], &[T]) -> Result<T, E>,
{
    settings.validate()?;
    let n = y.len();
    if x.len() != n || which.dim() != n {
        return Err(FdError::DimensionMismatch {
            x: x.len(),
            y: n,
            mi: which.dim(),
        });
    }
    let order = which.order();
    if order == 0 {
        return f(x, y).map_err(|e| FdError::Evaluation(e.to_string()));
    }

    // active coordinates: (slot in the joined (x, y) vector, derivative order)
    let mut active: Vec<(usize, u8)> = Vec::new();
    for (i, &e) in which.x.iter().enumerate() {
        if e > 0 {
            active.push((i, e));
        }
    }
    for (i, &e) in which.y.iter().enumerate() {
        if e > 0 {
            active.push((n + i, e));
        }
    }
    let stencils: Vec<&[(i32, f64)]> = active
        .iter()
        .map(|&(_, m)| stencil(m).ok_or(FdError::OrderTooHigh(m as u32)))
        .collect::<Result<_, _>>()?;

    let joined: Vec<T> = x.iter().chain(y.iter()).copied().collect();
    let base = settings.base_step(order);
    let ynorm = crate::scalar::sqrt(y.iter().fold(T::zero(), |a, &v| a + v * v));

    let estimate = |t: T| -> Result<T, FdError> {
        // fiber steps follow the homogeneity scale |y|, base steps 1 + |x^i|
        let steps: Vec<T> = active
            .iter()
            .map(|&(slot, _)| {
                if slot >= n {
                    t * ynorm
                } else {
                    t * (T::one() + Float::abs(joined[slot]))
                }
            })
            .collect();
        // worst-case displacement of y in Euclidean norm
        let mut reach2 = T::zero();
        for ((&(slot, _), s), h) in active.iter().zip(&stencils).zip(&steps) {
            if slot >= n {
                let k = s.iter().map(|(o, _)| o.abs()).max().unwrap_or(0);
                let d = *h * T::lit(k as f64);
                reach2 = reach2 + d * d;
            }
            if joined[slot] + *h == joined[slot] {
                return Err(FdError::StepUnderflow {
                    norm: ynorm.to_f64_lossy(),
                    reach: h.to_f64_lossy(),
                });
            }
        }
        let reach = crate::scalar::sqrt(reach2);
        if reach >= T::lit(0.5) * ynorm {
            return Err(FdError::StepUnderflow {
                norm: ynorm.to_f64_lossy(),
                reach: reach.to_f64_lossy(),
            });
        }

        let mut sum = T::zero();
        let mut counters = vec![0usize; active.len()];
        let mut point = joined.clone();
        loop {
            let mut weight = T::one();
            for (a, &c) in counters.iter().enumerate() {
                let (offset, w) = stencils[a][c];
                let slot = active[a].0;
                point[slot] = joined[slot] + steps[a] * T::lit(offset as f64);
                weight = weight * T::lit(w);
            }
            if weight != T::zero() {
                let v =
                    f(&point[..n], &point[n..]).map_err(|e| FdError::Evaluation(e.to_string()))?;
                sum = sum + weight * v;
            }
            // odometer over the stencil product
            let mut a = 0;
            loop {
                if a == counters.len() {
                    let denom = active
                        .iter()
                        .zip(&steps)
                        .fold(T::one(), |acc, (&(_, m), h)| {
                            acc * Float::powi(*h, m as i32)
                        });
                    return Ok(sum / denom);
                }
                counters[a] += 1;
                if counters[a] < stencils[a].len() {
                    break;
                }
                counters[a] = 0;
                a += 1;
            }
        }
    };

    let levels = settings.richardson_levels;
    let mut table: Vec<T> = Vec::with_capacity(levels);
    let mut t = base;
    for _ in 0..levels {
        table.push(estimate(t)?);
        t = t / T::lit(2.0);
    }
    // Richardson tableau over even powers of the step
    for k in 1..levels {
        let factor = T::lit(4f64.powi(k as i32));
        for i in (k..levels).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - T::one());
        }
    }
    Ok(table[levels - 1])
}
