//! ULP-exact stepping on binary32 values.
//!
//! Every interval trick the traversal kernels rely on (re-tracing with a
//! `t_min` one float below a previous hit, single-float executor intervals)
//! depends on these two functions returning the *adjacent* representable
//! value, with nothing representable in between.
//!
//! The implementation maps floats onto a signed integer line where adjacent
//! floats have adjacent keys and both zeros share key `0`, so stepping is a
//! plain `+1`/`-1`. Subnormals are stepped like any other value.

use thiserror::Error;

/// Largest key on the ordered line that is still finite (`f32::MAX`).
const MAX_FINITE_KEY: i64 = 0x7f7f_ffff;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FloatDomainError {
    #[error("cannot step from NaN")]
    NaN,
    #[error("cannot step from non-finite value {0}")]
    NonFinite(f32),
    #[error("no finite value above {0}")]
    NoneAbove(f32),
    #[error("no finite value below {0}")]
    NoneBelow(f32),
}

/// Position of `f` on the ordered integer line. `-0.0` and `+0.0` both map to 0.
fn ordered_key(f: f32) -> i64 {
    let magnitude = i64::from(f.to_bits() & 0x7fff_ffff);
    if f.is_sign_negative() {
        -magnitude
    } else {
        magnitude
    }
}

fn from_ordered_key(key: i64) -> f32 {
    // Keys only ever come from stepping a finite key by one, so the magnitude
    // always fits in 31 bits.
    let magnitude = key.unsigned_abs() as u32;
    let value = f32::from_bits(magnitude);
    if key < 0 {
        -value
    } else {
        value
    }
}

fn check_finite(f: f32) -> Result<i64, FloatDomainError> {
    if f.is_nan() {
        return Err(FloatDomainError::NaN);
    }
    if !f.is_finite() {
        return Err(FloatDomainError::NonFinite(f));
    }
    Ok(ordered_key(f))
}

/// Smallest binary32 value strictly greater than `f`.
///
/// `just_above(±0.0)` is the smallest positive subnormal. Fails for NaN,
/// infinities, and `f32::MAX`.
pub fn just_above(f: f32) -> Result<f32, FloatDomainError> {
    let key = check_finite(f)?;
    if key == MAX_FINITE_KEY {
        return Err(FloatDomainError::NoneAbove(f));
    }
    Ok(from_ordered_key(key + 1))
}

/// Largest binary32 value strictly less than `f`.
///
/// `just_below(±0.0)` is the largest negative subnormal. Fails for NaN,
/// infinities, and `f32::MIN`.
pub fn just_below(f: f32) -> Result<f32, FloatDomainError> {
    let key = check_finite(f)?;
    if key == -MAX_FINITE_KEY {
        return Err(FloatDomainError::NoneBelow(f));
    }
    Ok(from_ordered_key(key - 1))
}

/// Number of representable values strictly between `a` and `b` (zeros
/// counted once). Both must be finite; order does not matter.
pub fn floats_strictly_between(a: f32, b: f32) -> Result<u64, FloatDomainError> {
    let (ka, kb) = (check_finite(a)?, check_finite(b)?);
    Ok(ka.abs_diff(kb).saturating_sub(1))
}

/// Distance in ULPs between two finite values along the ordered line.
pub fn ulp_distance(a: f32, b: f32) -> Result<u64, FloatDomainError> {
    Ok(check_finite(a)?.abs_diff(check_finite(b)?))
}
