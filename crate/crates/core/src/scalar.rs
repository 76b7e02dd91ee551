//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

/// Floating point type the model, sampler and summaries are written against.
///
/// Random variates are drawn through the trait so generic code never has to
/// carry `StandardNormal: Distribution<T>` bounds around.
pub trait Real:
    Float + FloatConst + FromPrimitive + Sum + Debug + Display + FromStr + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    fn lit(x: f64) -> Self;

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma(shape, 1) draw.
    fn gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;

    /// Largest representable value strictly below `self`.
    fn next_below(self) -> Self;

    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }
}

macro_rules! impl_real {
    ($t:ty, $bits:ty) => {
        impl Real for $t {
            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            #[inline]
            fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
                Open01.sample(rng)
            }

            fn gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
                Gamma::new(shape, 1.0).expect("gamma shape must be positive").sample(rng)
            }

            fn next_below(self) -> Self {
                if self.is_nan() || self == <$t>::NEG_INFINITY {
                    return self;
                }
                if self == 0.0 {
                    return -<$t>::from_bits(1);
                }
                let bits = self.to_bits();
                if self > 0.0 {
                    <$t>::from_bits(bits - 1)
                } else {
                    <$t>::from_bits(bits + 1)
                }
            }
        }
    };
}

impl_real!(f32, u32);
impl_real!(f64, u64);

/// Numerically stable logistic function.
pub fn logistic<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

/// Bernoulli draw with success probability `logistic(log_odds)`.
pub(crate) fn bernoulli_logit<T: Real, R: Rng + ?Sized>(log_odds: T, rng: &mut R) -> bool {
    T::open01(rng) < logistic(log_odds)
}

/// Inverse-gamma(shape, rate) draw.
pub(crate) fn inv_gamma<T: Real, R: Rng + ?Sized>(shape: T, rate: T, rng: &mut R) -> T {
    rate / T::gamma(shape, rng)
}
