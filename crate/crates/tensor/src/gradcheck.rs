//! Finite-difference helpers for checking analytic gradients.
//!
//! These only evaluate the forward function, so they stay independent of the
//! backward rules they check. Use them in wide (`f64`) precision.

use crate::real::Real;

/// Relative perturbation used when no step is specified.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Below this magnitude gradients are compared in absolute terms.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// Central difference of `f` along `values[index]`, with the step scaled by
/// `max(|value|, 1)`. `values` is restored before returning.
pub fn central_difference<T, F>(values: &mut [T], index: usize, rel_step: T, mut f: F) -> T
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    let original = values[index];
    let h = rel_step * original.abs().max(T::one());
    values[index] = original + h;
    let plus = f(values);
    values[index] = original - h;
    let minus = f(values);
    values[index] = original;
    (plus - minus) / (h + h)
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error<T: Real>(analytic: T, numeric: T, floor: T) -> T {
    let scale = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / scale
}
