//! Scalar optimization helpers for the per-node control problems.
//!
//! Every control problem in this crate is the minimization of a smooth,
//! strictly unimodal function on an open interval. Golden-section search
//! shrinks the interval to [`CONTROL_TOL`]; a single guarded Newton step on
//! the first-order condition then polishes the result, which matters when the
//! optimum sits within ~1e-8 of the admissibility boundary.

/// Absolute width at which the golden-section interval is considered resolved.
pub(crate) const CONTROL_TOL: f64 = 1e-12;

/// Fraction of the interval kept away from each open endpoint.
pub(crate) const INTERVAL_GUARD: f64 = 1e-12;

const INVPHI: f64 = 0.618_033_988_749_894_9;

/// Minimizes a strictly unimodal `f` on the open interval `(lo, hi)`.
///
/// The search is confined to `[lo + g, hi - g]` with `g = INTERVAL_GUARD *
/// (hi - lo)` so `f` is never evaluated at an endpoint where it may blow up.
pub(crate) fn golden_section_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    debug_assert!(hi > lo);
    let guard = INTERVAL_GUARD * (hi - lo);
    let mut a = lo + guard;
    let mut b = hi - guard;
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while b - a > CONTROL_TOL && iter < 400 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2);
        }
        iter += 1;
    }
    0.5 * (a + b)
}

/// One guarded Newton step on the first-order condition `g(x) = 0`.
///
/// The step is accepted only if it stays strictly inside `(lo, hi)` and does
/// not increase `|g|`.
pub(crate) fn newton_polish<G, D>(g: G, dg: D, x: f64, lo: f64, hi: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let gx = g(x);
    let slope = dg(x);
    if !gx.is_finite() || !slope.is_finite() || slope == 0.0 {
        return x;
    }
    let candidate = x - gx / slope;
    if candidate > lo && candidate < hi {
        let gc = g(candidate);
        if gc.is_finite() && gc.abs() <= gx.abs() {
            return candidate;
        }
    }
    x
}
