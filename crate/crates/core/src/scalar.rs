//! Numeric traits the algorithms are written against.
//!
//! [`Scalar`] covers everything that only needs field arithmetic and ordering,
//! so exact types such as [`num_rational::Rational64`] can be plugged in where
//! sums must be reproduced without rounding. [`Real`] adds the transcendental
//! functions required by likelihoods, ranks and kernels (f32 and f64).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field element usable by the exact metric routines.
pub trait Scalar: Num + Clone + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("value representable in scalar type")
    }

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }
}

impl<T> Scalar for T where T: Num + Clone + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

/// Floating point scalar (f32 / f64).
pub trait Real: Scalar + Float + ToPrimitive + Display + Sum + Copy + Default {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }
}

impl<T> Real for T where T: Scalar + Float + ToPrimitive + Display + Sum + Copy + Default {}
