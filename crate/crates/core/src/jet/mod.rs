//! Truncated multivariate Taylor jets in the chart variables `(x, y)`.
//!
//! A [`Jet`] stores Taylor coefficients (derivative / multi-index factorial)
//! for every monomial of a downward-closed truncation set. The set used for
//! Finsler work keeps at most one `x` factor and total degree at most four,
//! which covers fourth `y`-derivatives of `F²` and one `x`-derivative of its
//! third `y`-derivatives. Because the set is downward closed, truncated
//! multiplication is a ring homomorphism and composition with a univariate
//! function through its Taylor series is exact on the set.

mod fd;

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{Float, ToPrimitive};
use thiserror::Error;

use crate::scalar::Scalar;

pub use fd::{fd_partial, FdError, FdSettings, StepRule};

/// Maximum number of `x` factors in a monomial of the Finsler truncation set.
pub const MAX_X_ORDER: u8 = 1;
/// Maximum total degree of a monomial of the Finsler truncation set.
pub const MAX_TOTAL_ORDER: u8 = 4;

/// A mixed partial-derivative request: exponents over `x` and over `y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    pub x: Vec<u8>,
    pub y: Vec<u8>,
}

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self {
            x: vec![0; dim],
            y: vec![0; dim],
        }
    }

    /// Builds a multi-index from lists of differentiated coordinates,
    /// e.g. `from_indices(3, &[0], &[1, 1, 2])` for `∂_{x1} ∂_{y2}² ∂_{y3}`.
    pub fn from_indices(dim: usize, xs: &[usize], ys: &[usize]) -> Self {
        let mut mi = Self::zero(dim);
        for &i in xs {
            mi.x[i] += 1;
        }
        for &i in ys {
            mi.y[i] += 1;
        }
        mi
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    pub fn x_order(&self) -> u32 {
        self.x.iter().map(|&e| e as u32).sum()
    }

    pub fn y_order(&self) -> u32 {
        self.y.iter().map(|&e| e as u32).sum()
    }

    pub fn order(&self) -> u32 {
        self.x_order() + self.y_order()
    }

    /// Product of the factorials of all exponents.
    pub fn factorial(&self) -> u64 {
        self.x
            .iter()
            .chain(self.y.iter())
            .map(|&e| (1..=e as u64).product::<u64>())
            .product()
    }

    fn exponents(&self) -> Vec<u8> {
        let mut e = self.x.clone();
        e.extend_from_slice(&self.y);
        e
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{:?} y{:?}", self.x, self.y)
    }
}

/// Monomial table and product table for one truncation set.
#[derive(Debug)]
pub struct Layout {
    dim: usize,
    max_x: u8,
    max_total: u8,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `(a, b, c)`: monomial `a` times monomial `b` is monomial `c`.
    products: Vec<(u32, u32, u32)>,
}

impl Layout {
    pub fn new(dim: usize, max_x: u8, max_total: u8) -> Self {
        let nvars = 2 * dim;
        let mut monomials = Vec::new();
        let mut current = vec![0u8; nvars];
        enumerate(&mut current, 0, dim, max_x, max_total, &mut monomials);
        // graded ordering keeps the constant term first
        monomials.sort_by(|a, b| {
            let da: u32 = a.iter().map(|&e| e as u32).sum();
            let db: u32 = b.iter().map(|&e| e as u32).sum();
            da.cmp(&db).then_with(|| b.cmp(a))
        });
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (a, ma) in monomials.iter().enumerate() {
            for (b, mb) in monomials.iter().enumerate() {
                let sum: Vec<u8> = ma.iter().zip(mb).map(|(p, q)| p + q).collect();
                if let Some(&c) = index.get(&sum) {
                    products.push((a as u32, b as u32, c as u32));
                }
            }
        }
        Self {
            dim,
            max_x,
            max_total,
            monomials,
            index,
            products,
        }
    }

    /// Shared layout for the Finsler truncation set in dimension `dim`.
    pub fn finsler(dim: usize) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Layout>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(dim)
            .or_insert_with(|| Arc::new(Layout::new(dim, MAX_X_ORDER, MAX_TOTAL_ORDER)))
            .clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn max_total(&self) -> u8 {
        self.max_total
    }

    pub fn max_x(&self) -> u8 {
        self.max_x
    }

    pub fn contains(&self, mi: &MultiIndex) -> bool {
        mi.dim() == self.dim && self.index.contains_key(&mi.exponents())
    }

    /// Every multi-index of the truncation set, constant term first.
    pub fn multi_indices(&self) -> Vec<MultiIndex> {
        self.monomials
            .iter()
            .map(|m| MultiIndex {
                x: m[..self.dim].to_vec(),
                y: m[self.dim..].to_vec(),
            })
            .collect()
    }

    fn position(&self, mi: &MultiIndex) -> Option<usize> {
        if mi.dim() != self.dim {
            return None;
        }
        self.index.get(&mi.exponents()).copied()
    }
}

fn enumerate(
    current: &mut Vec<u8>,
    var: usize,
    dim: usize,
    max_x: u8,
    max_total: u8,
    out: &mut Vec<Vec<u8>>,
) {
    if var == current.len() {
        out.push(current.clone());
        return;
    }
    let total: u8 = current[..var].iter().sum();
    let xdeg: u8 = current[..var.min(dim)].iter().sum();
    let mut cap = max_total - total;
    if var < dim {
        cap = cap.min(max_x - xdeg);
    }
    for e in 0..=cap {
        current[var] = e;
        enumerate(current, var + 1, dim, max_x, max_total, out);
    }
    current[var] = 0;
}

/// Failure of an elementary function on a jet whose value leaves the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum JetDomainError {
    #[error("square root of a non-positive value")]
    SqrtNonPositive,
    #[error("logarithm of a non-positive value")]
    LogNonPositive,
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-integer power of a non-positive value")]
    PowNonPositiveBase,
}

/// Truncated Taylor expansion of a scalar function of `(x, y)`.
#[derive(Clone)]
pub struct Jet<T> {
    layout: Arc<Layout>,
    coeffs: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.layout.dim)
            .field("value", &self.value())
            .field("len", &self.coeffs.len())
            .finish()
    }
}

impl<T: Scalar> Jet<T> {
    pub fn constant(layout: &Arc<Layout>, value: T) -> Self {
        let mut coeffs = vec![T::zero(); layout.len()];
        coeffs[0] = value;
        Self {
            layout: layout.clone(),
            coeffs,
        }
    }

    fn seed(layout: &Arc<Layout>, var: usize, value: T) -> Self {
        let mut jet = Self::constant(layout, value);
        let mut e = vec![0u8; 2 * layout.dim];
        e[var] = 1;
        let pos = layout.index[&e];
        jet.coeffs[pos] = T::one();
        jet
    }

    /// Jet of the coordinate function `x^i` at the value `value` (0-based `i`).
    pub fn seed_x(layout: &Arc<Layout>, i: usize, value: T) -> Self {
        assert!(i < layout.dim, "x index {i} out of range");
        Self::seed(layout, i, value)
    }

    /// Jet of the coordinate function `y^i` at the value `value` (0-based `i`).
    pub fn seed_y(layout: &Arc<Layout>, i: usize, value: T) -> Self {
        assert!(i < layout.dim, "y index {i} out of range");
        Self::seed(layout, layout.dim + i, value)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Raw Taylor coefficients in layout order.
    pub fn coefficients(&self) -> &[T] {
        &self.coeffs
    }

    /// Taylor coefficient of a multi-index; zero outside the truncation set.
    pub fn coeff(&self, mi: &MultiIndex) -> T {
        self.layout
            .position(mi)
            .map_or_else(T::zero, |p| self.coeffs[p])
    }

    /// Mixed partial derivative `∂^β_x ∂^α_y` at the expansion point.
    ///
    /// Returns `None` when the multi-index lies outside the truncation set.
    pub fn derivative(&self, mi: &MultiIndex) -> Option<T> {
        let p = self.layout.position(mi)?;
        Some(self.coeffs[p] * T::lit(mi.factorial() as f64))
    }

    /// Derivative by coordinate lists; panics outside the truncation set.
    pub fn partial(&self, xs: &[usize], ys: &[usize]) -> T {
        let mi = MultiIndex::from_indices(self.layout.dim, xs, ys);
        self.derivative(&mi)
            .unwrap_or_else(|| panic!("{mi} is outside the jet truncation set"))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| Float::is_finite(*c))
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = out.coeffs[0] + s;
        out
    }

    pub fn square(&self) -> Self {
        self * self
    }

    /// Composes a univariate function given its derivatives `φ^(k)(u₀)`,
    /// `k = 0..=max_total`, at `u₀ = self.value()`.
    pub fn compose(&self, derivs: &[T]) -> Self {
        let order = self.layout.max_total as usize;
        debug_assert!(derivs.len() > order);
        let mut delta = self.clone();
        delta.coeffs[0] = T::zero();
        // Horner in δ with Taylor coefficients φ^(k)/k!
        let mut fact = T::one();
        let mut taylor = Vec::with_capacity(order + 1);
        for (k, d) in derivs.iter().take(order + 1).enumerate() {
            if k > 0 {
                fact = fact * T::lit(k as f64);
            }
            taylor.push(*d / fact);
        }
        let mut acc = Self::constant(&self.layout, taylor[order]);
        for k in (0..order).rev() {
            acc = (&acc * &delta).add_scalar(taylor[k]);
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = Float::exp(self.value());
        self.compose(&vec![e; self.layout.max_total as usize + 1])
    }

    pub fn sin(&self) -> Self {
        let (s, c) = (Float::sin(self.value()), Float::cos(self.value()));
        let cycle = [s, c, -s, -c];
        let derivs: Vec<T> = (0..=self.layout.max_total as usize)
            .map(|k| cycle[k % 4])
            .collect();
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = (Float::sin(self.value()), Float::cos(self.value()));
        let cycle = [c, -s, -c, s];
        let derivs: Vec<T> = (0..=self.layout.max_total as usize)
            .map(|k| cycle[k % 4])
            .collect();
        self.compose(&derivs)
    }

    pub fn ln(&self) -> Result<Self, JetDomainError> {
        let u = self.value();
        if !(u > T::zero()) {
            return Err(JetDomainError::LogNonPositive);
        }
        let mut derivs = vec![Float::ln(u)];
        // d^k/du^k ln u = (-1)^(k-1) (k-1)! / u^k
        let mut term = T::one() / u;
        for k in 1..=self.layout.max_total as usize {
            derivs.push(term);
            term = -term * T::lit(k as f64) / u;
        }
        Ok(self.compose(&derivs))
    }

    pub fn sqrt(&self) -> Result<Self, JetDomainError> {
        if !(self.value() > T::zero()) {
            return Err(JetDomainError::SqrtNonPositive);
        }
        self.powf(T::lit(0.5))
    }

    pub fn recip(&self) -> Result<Self, JetDomainError> {
        if self.value() == T::zero() {
            return Err(JetDomainError::DivisionByZero);
        }
        self.powf(-T::one())
    }

    /// `self^p` for a constant exponent.
    ///
    /// Integer exponents accept any base (non-zero when negative); other
    /// exponents need a positive base.
    pub fn powf(&self, p: T) -> Result<Self, JetDomainError> {
        let u = self.value();
        let integral = Float::fract(p) == T::zero();
        if integral {
            if p < T::zero() && u == T::zero() {
                return Err(JetDomainError::DivisionByZero);
            }
        } else if !(u > T::zero()) {
            return Err(JetDomainError::PowNonPositiveBase);
        }
        let order = self.layout.max_total as usize;
        let mut derivs = Vec::with_capacity(order + 1);
        let mut falling = T::one();
        for k in 0..=order {
            let kk = T::lit(k as f64);
            if k > 0 {
                falling = falling * (p - kk + T::one());
            }
            if falling == T::zero() {
                derivs.push(T::zero());
                continue;
            }
            let e = p - kk;
            let power = if integral {
                Float::powi(u, ToPrimitive::to_i32(&e).unwrap_or(i32::MAX))
            } else {
                Float::powf(u, e)
            };
            derivs.push(falling * power);
        }
        Ok(self.compose(&derivs))
    }

    /// `self^other` for a jet-valued exponent, via `exp(other · ln self)`.
    pub fn pow_jet(&self, other: &Self) -> Result<Self, JetDomainError> {
        if other.is_constant() {
            return self.powf(other.value());
        }
        Ok((&self.ln()? * other).exp())
    }

    pub fn div(&self, other: &Self) -> Result<Self, JetDomainError> {
        Ok(self * &other.recip()?)
    }

    /// True when every derivative coefficient vanishes.
    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| *c == T::zero())
    }

    fn same_layout(&self, other: &Self) {
        debug_assert!(
            Arc::ptr_eq(&self.layout, &other.layout)
                || (self.layout.dim == other.layout.dim
                    && self.layout.max_total == other.layout.max_total
                    && self.layout.max_x == other.layout.max_x),
            "jets from different truncation sets"
        );
    }
}

impl<'a, T: Scalar> Add<&'a Jet<T>> for &'a Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &'a Jet<T>) -> Jet<T> {
        self.same_layout(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }
}

impl<'a, T: Scalar> Sub<&'a Jet<T>> for &'a Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &'a Jet<T>) -> Jet<T> {
        self.same_layout(rhs);
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| *a - *b)
                .collect(),
        }
    }
}

impl<'a, T: Scalar> Mul<&'a Jet<T>> for &'a Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &'a Jet<T>) -> Jet<T> {
        self.same_layout(rhs);
        let mut coeffs = vec![T::zero(); self.coeffs.len()];
        for &(a, b, c) in &self.layout.products {
            let (a, b, c) = (a as usize, b as usize, c as usize);
            coeffs[c] = coeffs[c] + self.coeffs[a] * rhs.coeffs[b];
        }
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Jet<T>) -> Jet<T> {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Jet<T>) -> Jet<T> {
        &self - &rhs
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Jet<T>) -> Jet<T> {
        &self * &rhs
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout2() -> Arc<Layout> {
        Layout::finsler(2)
    }

    #[test]
    fn truncation_set_sizes() {
        // y-monomials of degree <= 4 in n vars plus n * (y-monomials of degree <= 3)
        let binom =
            |n: usize, k: usize| -> usize { (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1)) };
        for n in 2..=5 {
            let expected = binom(n + 4, 4) + n * binom(n + 3, 3);
            assert_eq!(Layout::finsler(n).len(), expected, "n = {n}");
        }
    }

    #[test]
    fn truncation_set_is_the_documented_one() {
        let layout = Layout::finsler(3);
        for mi in layout.multi_indices() {
            assert!(mi.x_order() <= 1);
            assert!(mi.order() <= 4);
            if mi.x_order() == 1 {
                assert!(mi.y_order() <= 3);
            }
        }
        let outside = MultiIndex::from_indices(3, &[0], &[1, 1, 1, 1]);
        assert!(!layout.contains(&outside));
        let outside = MultiIndex::from_indices(3, &[0, 1], &[]);
        assert!(!layout.contains(&outside));
    }

    #[test]
    fn seeding_gives_unit_first_order_entry() {
        let l = layout2();
        let j = Jet::<f64>::seed_y(&l, 1, 0.7);
        assert_eq!(j.value(), 0.7);
        for mi in l.multi_indices().into_iter().skip(1) {
            let d = j.derivative(&mi).unwrap();
            let expected = if mi == MultiIndex::from_indices(2, &[], &[1]) {
                1.0
            } else {
                0.0
            };
            assert_eq!(d, expected, "{mi}");
        }
    }

    #[test]
    fn euclidean_norm_first_derivatives() {
        let l = layout2();
        let y1 = Jet::<f64>::seed_y(&l, 0, 3.0);
        let y2 = Jet::<f64>::seed_y(&l, 1, 4.0);
        let f = (&y1 * &y1 + &y2 * &y2).sqrt().unwrap();
        assert!((f.value() - 5.0).abs() < 1e-15);
        assert!((f.partial(&[], &[0]) - 0.6).abs() < 1e-15);
        assert!((f.partial(&[], &[1]) - 0.8).abs() < 1e-15);
        let q = f.square();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert!((q.partial(&[], &[i, j]) - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x1 * y1^3 + y2^4
        let l = layout2();
        let x1 = Jet::<f64>::seed_x(&l, 0, 2.0);
        let y1 = Jet::<f64>::seed_y(&l, 0, 1.5);
        let y2 = Jet::<f64>::seed_y(&l, 1, -0.5);
        let f = &(&x1 * &y1.powf(3.0).unwrap()) + &y2.powf(4.0).unwrap();
        assert_eq!(f.partial(&[0], &[0, 0, 0]), 6.0);
        assert_eq!(f.partial(&[], &[1, 1, 1, 1]), 24.0);
        assert_eq!(f.partial(&[], &[0, 0, 0]), 12.0);
        assert_eq!(f.partial(&[0], &[0]), 3.0 * 1.5 * 1.5);
        assert_eq!(f.partial(&[], &[1, 1, 1]), 24.0 * -0.5);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let l = Layout::finsler(1);
        let u = Jet::<f64>::seed_y(&l, 0, 0.3);
        let d4 = |j: &Jet<f64>| j.partial(&[], &[0, 0, 0, 0]);
        assert!((d4(&u.exp()) - 0.3f64.exp()).abs() < 1e-14);
        assert!((d4(&u.sin()) - 0.3f64.sin()).abs() < 1e-14);
        assert!((d4(&u.cos()) - 0.3f64.cos()).abs() < 1e-14);
        assert!((d4(&u.ln().unwrap()) - (-6.0 / 0.3f64.powi(4))).abs() < 1e-9);
        let s = u.sqrt().unwrap();
        let expected = -15.0 / 16.0 * 0.3f64.powf(-3.5);
        assert!((d4(&s) - expected).abs() < 1e-10 * expected.abs());
    }

    #[test]
    fn integer_powers_of_zero_are_finite() {
        let l = layout2();
        let y1 = Jet::<f64>::seed_y(&l, 0, 0.0);
        let sq = y1.powf(2.0).unwrap();
        assert!(sq.is_finite());
        assert_eq!(sq.partial(&[], &[0, 0]), 2.0);
        assert_eq!(sq.partial(&[], &[0, 0, 0]), 0.0);
    }

    #[test]
    fn domain_errors() {
        let l = layout2();
        let neg = Jet::<f64>::seed_y(&l, 0, -1.0);
        assert_eq!(neg.sqrt().unwrap_err(), JetDomainError::SqrtNonPositive);
        assert_eq!(neg.ln().unwrap_err(), JetDomainError::LogNonPositive);
        assert_eq!(
            neg.powf(0.25).unwrap_err(),
            JetDomainError::PowNonPositiveBase
        );
        let zero = Jet::<f64>::constant(&l, 0.0);
        assert_eq!(zero.recip().unwrap_err(), JetDomainError::DivisionByZero);
        assert!(neg.powf(3.0).is_ok());
    }

    #[test]
    fn division_inverts_multiplication() {
        let l = layout2();
        let a = Jet::<f64>::seed_y(&l, 0, 1.2).exp();
        let b = Jet::<f64>::seed_x(&l, 1, 0.4).sin().add_scalar(2.0);
        let q = a.div(&b).unwrap();
        let back = &q * &b;
        for (p, r) in back.coefficients().iter().zip(a.coefficients()) {
            assert!((p - r).abs() < 1e-13 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn works_in_single_precision() {
        let l = layout2();
        let y1 = Jet::<f32>::seed_y(&l, 0, 3.0);
        let y2 = Jet::<f32>::seed_y(&l, 1, 4.0);
        let f = (&y1 * &y1 + &y2 * &y2).sqrt().unwrap();
        assert!((f.value() - 5.0).abs() < 1e-6);
        assert!((f.partial(&[], &[0]) - 0.6).abs() < 1e-6);
    }
}
