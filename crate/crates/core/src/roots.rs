//! Bracketing bisection shared by every scalar inversion in the crate.

pub(crate) const MAX_ITERATIONS: usize = 200;

/// Bisection on `[lo, hi]` for a predicate `above` that is false on the left
/// part of the bracket and true on the right part.
///
/// Stops when `done(lo, hi)` holds, when the bracket can no longer be split
/// in floating point, or after [`MAX_ITERATIONS`] steps. Returns the final
/// bracket; `above(lo)` is false and `above(hi)` is true whenever they were
/// on entry.
pub(crate) fn bisect(
    mut lo: f64,
    mut hi: f64,
    mut above: impl FnMut(f64) -> bool,
    mut done: impl FnMut(f64, f64) -> bool,
) -> (f64, f64) {
    for _ in 0..MAX_ITERATIONS {
        if done(lo, hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}
