//! Floating-point abstraction shared by every numerical routine.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable by the solvers. Implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Tolerance for "sums to one" style validation checks.
    const PROB_TOL: f64;
    /// Tolerance for fixed-point style residual checks.
    const FIXED_POINT_TOL: f64;
    /// Condition-number ceiling above which linear solves are rejected.
    const COND_LIMIT: f64;
    /// Relative gap below which two action values count as tied.
    const TIE_TOL: f64;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("representable count")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    const PROB_TOL: f64 = 1e-12;
    const FIXED_POINT_TOL: f64 = 1e-9;
    const COND_LIMIT: f64 = 1e12;
    const TIE_TOL: f64 = 1e-11;
}

impl Scalar for f32 {
    const PROB_TOL: f64 = 1e-5;
    const FIXED_POINT_TOL: f64 = 1e-3;
    const COND_LIMIT: f64 = 1e6;
    const TIE_TOL: f64 = 1e-5;
}
