use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use super::tape::Var;

/// Scalar arithmetic shared by plain `f64` evaluation and taped [`Var`]s.
///
/// Physics and loss code is written once against this trait; instantiating
/// it with `Var` records a differentiable graph, with `f64` it runs at full
/// speed for evaluation and long rollouts.
pub trait Real:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign<f64>
{
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;
    /// Square root with derivative defined as 0 at 0.
    fn sqrt(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn abs(self) -> Self;
    fn min(self, other: Self) -> Self;
    fn max(self, other: Self) -> Self;
    /// `max(x, 0)`.
    fn relu(self) -> Self;
    fn leaky_min_zero(self, alpha: f64) -> Self;
    /// Inserts a node with caller-computed partials.
    fn custom(value: f64, deps: &[(Self, f64)]) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn square(self) -> Self {
        self * self
    }
}

impl Real for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self.max(0.0))
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn min(self, other: Self) -> Self {
        if self < other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn max(self, other: Self) -> Self {
        if self > other {
            self
        } else {
            other
        }
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn leaky_min_zero(self, _alpha: f64) -> Self {
        if self < 0.0 {
            self
        } else {
            0.0
        }
    }
    #[inline]
    fn custom(value: f64, _deps: &[(Self, f64)]) -> Self {
        value
    }
}

impl<'t> Real for Var<'t> {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn sqrt(self) -> Self {
        if self.value > 0.0 {
            let s = self.value.sqrt();
            self.unary(s, 0.5 / s)
        } else {
            self.unary(0.0, 0.0)
        }
    }
    fn sin(self) -> Self {
        self.unary(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.unary(self.value.cos(), -self.value.sin())
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }
    fn abs(self) -> Self {
        if self.value < 0.0 {
            self.unary(-self.value, -1.0)
        } else {
            self.unary(self.value, 1.0)
        }
    }
    fn min(self, other: Self) -> Self {
        if self.value < other.value {
            self.binary(other, self.value, 1.0, 0.0)
        } else {
            self.binary(other, other.value, 0.0, 1.0)
        }
    }
    fn max(self, other: Self) -> Self {
        if self.value > other.value {
            self.binary(other, self.value, 1.0, 0.0)
        } else {
            self.binary(other, other.value, 0.0, 1.0)
        }
    }
    fn relu(self) -> Self {
        if self.value > 0.0 {
            self.unary(self.value, 1.0)
        } else {
            self.unary(0.0, 0.0)
        }
    }
    fn leaky_min_zero(self, alpha: f64) -> Self {
        Var::leaky_min_zero(self, alpha)
    }
    fn custom(value: f64, deps: &[(Self, f64)]) -> Self {
        Var::custom(value, deps)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Add<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        rhs + self
    }
}

impl<'t> Sub<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        rhs.unary(self - rhs.value, -1.0)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        rhs * self
    }
}

impl<'t> AddAssign for Var<'t> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<'t> SubAssign for Var<'t> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<'t> MulAssign<f64> for Var<'t> {
    fn mul_assign(&mut self, rhs: f64) {
        *self = *self * rhs;
    }
}

/// Sum that records a single n-ary node instead of a chain of additions.
pub fn sum<T: Real>(items: &[T]) -> T {
    let value: f64 = items.iter().map(|x| x.value()).sum();
    let deps: Vec<(T, f64)> = items.iter().map(|&x| (x, 1.0)).collect();
    T::custom(value, &deps)
}

/// Euclidean norm of a stacked vector as a single node; derivative 0 at 0.
pub fn norm<T: Real>(items: &[T]) -> T {
    let value = items.iter().map(|x| x.value() * x.value()).sum::<f64>().sqrt();
    if value > 0.0 {
        let deps: Vec<(T, f64)> = items.iter().map(|&x| (x, x.value() / value)).collect();
        T::custom(value, &deps)
    } else {
        let deps: Vec<(T, f64)> = items.iter().map(|&x| (x, 0.0)).collect();
        T::custom(0.0, &deps)
    }
}
