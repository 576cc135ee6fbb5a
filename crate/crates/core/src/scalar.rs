//! Scalar abstractions shared by every module.

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed, ToPrimitive};
use std::fmt::{Debug, Display};

/// Exact or floating field used for parameter bookkeeping.
///
/// Floating types compare with a small relative tolerance, rationals compare exactly.
pub trait Field: Clone + PartialOrd + Num + FromPrimitive + Debug + Display {
    fn near(&self, other: &Self) -> bool;

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("dimension fits the scalar type")
    }
}

macro_rules! float_field {
    ($t:ty, $rel:expr) => {
        impl Field for $t {
            fn near(&self, other: &Self) -> bool {
                let scale = self.abs().max(other.abs()).max(1.0);
                (self - other).abs() <= $rel * scale
            }
        }
    };
}

float_field!(f32, 1e-6);
float_field!(f64, 1e-12);

impl<I> Field for Ratio<I>
where
    I: Integer + Clone + Signed + FromPrimitive + ToPrimitive + Debug + Display,
    Ratio<I>: FromPrimitive,
{
    fn near(&self, other: &Self) -> bool {
        self == other
    }
}

/// Floating scalar used by all numerical kernels.
pub trait Real:
    Field
    + Float
    + FloatConst
    + Display
    + Default
    + Send
    + Sync
    + 'static
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
{
    /// Converts an `f64` literal.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn n(k: usize) -> Self {
        Self::from_usize(k).expect("integer representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean dot product.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub fn norm_sq<T: Real>(a: &[T]) -> T {
    dot(a, a)
}

pub fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| {
        let d = *x - *y;
        acc + d * d
    })
}

/// Surface area of the unit sphere in `R^n`, i.e. `2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area<T: Real>(n: usize) -> T {
    T::c(2.0) * T::PI().powf(T::n(n) / T::c(2.0)) / gamma_half_integer::<T>(n)
}

/// `Gamma(x)` for half-integers and integers `x > 0`.
pub fn gamma_half_integer<T: Real>(twice_x: usize) -> T {
    let mut g = if twice_x % 2 == 0 { T::one() } else { T::PI().sqrt() };
    let mut k = if twice_x % 2 == 0 { 1.0 } else { 0.5 };
    let x = twice_x as f64 / 2.0;
    while k + 1.0 <= x + 1e-9 {
        g = g * T::c(k);
        k += 1.0;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((sphere_area::<f64>(1) - 2.0).abs() < 1e-15);
        assert!((sphere_area::<f64>(2) - 2.0 * pi).abs() < 1e-14);
        assert!((sphere_area::<f64>(3) - 4.0 * pi).abs() < 1e-13);
        assert!((sphere_area::<f64>(4) - 2.0 * pi * pi).abs() < 1e-13);
        assert!((sphere_area::<f64>(5) - 8.0 * pi * pi / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_values() {
        assert!((gamma_half_integer::<f64>(1) - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer::<f64>(8) - 6.0).abs() < 1e-14);
        assert!((gamma_half_integer::<f64>(7) - 3.323_350_970_447_842_6).abs() < 1e-13);
    }

    #[test]
    fn rational_near_is_exact() {
        let a = Ratio::new(7i64, 3);
        assert!(a.near(&Ratio::new(14, 6)));
        assert!(!a.near(&Ratio::new(7000001, 3000000)));
    }
}
