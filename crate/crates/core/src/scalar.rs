//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the physics is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy conversion back to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Snaps `u` onto the nearest quarter turn when it lies within a few ulps of it.
///
/// Arguments such as `nu * tau` carry one rounding each, so a value that is a
/// quarter turn in exact arithmetic can arrive as `0.5 - ulp`. Treating those
/// as the node keeps symmetric cancellations (odd/even harmonics, 90° nodes)
/// exact instead of leaving 1e-16 residue.
fn snap_quarter<T: Real>(u: T) -> T {
    let four = T::lit(4.0);
    let q = (u * four).round();
    let tol = T::epsilon() * T::lit(8.0) * q.abs().max(T::one());
    if (u * four - q).abs() <= tol {
        q / four
    } else {
        u
    }
}

/// `(sin, cos)` of `2π·u` with exact values at quarter turns.
pub fn sin_cos_turns<T: Real>(u: T) -> (T, T) {
    let u = snap_quarter(u);
    let r = u - u.round();
    let q = (r * T::lit(4.0)).round();
    let s = r - q / T::lit(4.0);
    let (sa, ca) = if s == T::zero() {
        (T::zero(), T::one())
    } else {
        (s * T::TAU()).sin_cos()
    };
    let quadrant = q.to_i64().unwrap_or(0).rem_euclid(4);
    match quadrant {
        0 => (sa, ca),
        1 => (ca, -sa),
        2 => (-sa, -ca),
        _ => (-ca, sa),
    }
}

/// `sin(2π·u)`.
pub fn sin_turns<T: Real>(u: T) -> T {
    sin_cos_turns(u).0
}

/// `cos(2π·u)`.
pub fn cos_turns<T: Real>(u: T) -> T {
    sin_cos_turns(u).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turns_are_exact() {
        assert_eq!(sin_turns(0.5_f64), 0.0);
        assert_eq!(sin_turns(1.0_f64), 0.0);
        assert_eq!(cos_turns(0.25_f64), 0.0);
        assert_eq!(cos_turns(0.75_f64), 0.0);
        assert_eq!(sin_turns(0.25_f64), 1.0);
        assert_eq!(sin_turns(-0.25_f64), -1.0);
        assert_eq!(cos_turns(0.5_f32), -1.0);
        // one ulp off the node still lands on it
        assert_eq!(sin_turns(0.5_f64 - f64::EPSILON / 4.0), 0.0);
    }

    #[test]
    fn matches_libm_away_from_nodes() {
        for i in 0..1000 {
            let u = -3.0 + 0.00731 * i as f64;
            let (s, c) = sin_cos_turns(u);
            let a = u * std::f64::consts::TAU;
            assert!((s - a.sin()).abs() < 1e-13, "sin at {u}");
            assert!((c - a.cos()).abs() < 1e-13, "cos at {u}");
        }
    }
}
