//! Bracketing scans and bisection.

/// A grid interval on which the scanned function changes sign.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
}

#[inline]
fn positive(v: f64) -> bool {
    v > 0.0
}

/// Evaluates `f` on the supplied grid (in order) and returns every adjacent
/// pair whose values fall on opposite sides of zero. An exact zero counts as
/// non-positive.
pub(crate) fn scan<F, I>(f: F, grid: I) -> Vec<Bracket>
where
    F: Fn(f64) -> f64,
    I: IntoIterator<Item = f64>,
{
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for x in grid {
        let v = f(x);
        if let Some((px, pv)) = prev {
            if positive(pv) != positive(v) {
                out.push(Bracket {
                    lo: px,
                    hi: x,
                    f_lo: pv,
                });
            }
        }
        prev = Some((x, v));
    }
    out
}

/// Like [`scan`] but stops at the first sign change.
pub(crate) fn scan_first<F, I>(f: F, grid: I) -> Option<Bracket>
where
    F: Fn(f64) -> f64,
    I: IntoIterator<Item = f64>,
{
    let mut prev: Option<(f64, f64)> = None;
    for x in grid {
        let v = f(x);
        if let Some((px, pv)) = prev {
            if positive(pv) != positive(v) {
                return Some(Bracket {
                    lo: px,
                    hi: x,
                    f_lo: pv,
                });
            }
        }
        prev = Some((x, v));
    }
    None
}

/// Bisection on a sign-change bracket. `lo` and `hi` may be given in either
/// order. Stops when `|f| <= f_tol`, when the bracket is narrower than
/// `x_tol`, or when the midpoint no longer separates the endpoints.
pub(crate) fn bisect<F>(f: F, b: Bracket, x_tol: f64, f_tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut c) = (b.lo, b.hi);
    let side_a = positive(b.f_lo);
    let mut best = 0.5 * (a + c);
    for _ in 0..2000 {
        let mid = 0.5 * (a + c);
        if mid == a || mid == c {
            return mid;
        }
        let v = f(mid);
        best = mid;
        if v.abs() <= f_tol || (c - a).abs() <= x_tol {
            return mid;
        }
        if positive(v) == side_a {
            a = mid;
        } else {
            c = mid;
        }
    }
    best
}

/// Evenly spaced grid from `start` towards `stop` (inclusive when it lands on
/// the grid), computed by index to avoid drift.
pub(crate) fn grid(start: f64, stop: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = ((stop - start) / step).abs().floor() as usize;
    let step = if stop >= start {
        step.abs()
    } else {
        -step.abs()
    };
    (0..=count).map(move |i| start + i as f64 * step)
}
