//! Numeric traits the vector and metric code is written against.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point element type of an embedding: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
    + Serialize + DeserializeOwned
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Value type of an overlap metric.
///
/// Every ROUGE quantity is a ratio of counts, so an exact rational type works
/// as well as a float.
pub trait MetricValue: Num + Copy + PartialOrd + Debug {
    fn from_count(n: usize) -> Self;

    fn to_f64(self) -> f64;
}

impl MetricValue for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl MetricValue for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl MetricValue for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits in i64"))
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}
