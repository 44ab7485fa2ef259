//! Scalar abstraction for the optimization core.
//!
//! Everything that solves LPs, computes centers or scores cuts is generic over
//! [`Real`], which is implemented for `f32` and `f64`. Statistics and the
//! regression model work in `f64` only.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar usable throughout the solver stack.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal or tolerance into this scalar type.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest magnitude treated as a usable pivot in dense eliminations.
    fn pivot_tol() -> Self;
}

impl Real for f64 {
    fn pivot_tol() -> Self {
        1e-11
    }
}

impl Real for f32 {
    fn pivot_tol() -> Self {
        1e-6
    }
}

/// Magnitude at or above which a bound read from a file is taken as infinite.
pub const INFINITE_BOUND: f64 = 1e20;
