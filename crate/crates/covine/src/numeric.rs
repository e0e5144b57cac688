//! Small shared numerical helpers.

/// log(exp(a) + exp(b)) without overflow.
pub fn logaddexp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Solves f(x) = target for a continuous strictly increasing f on [lo, hi]
/// by bisection with Newton acceleration when a derivative is supplied.
/// Returns the best x found; accuracy is limited by `xtol` on the bracket
/// and `ftol` on the residual.
pub fn invert_monotone<F, D>(
    f: F,
    deriv: Option<D>,
    target: f64,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    ftol: f64,
) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let fx = f(x) - target;
        if fx.abs() <= ftol {
            return x;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= xtol {
            return 0.5 * (lo + hi);
        }
        let mut next = f64::NAN;
        if let Some(d) = deriv.as_ref() {
            let dx = d(x);
            if dx > 0.0 {
                let cand = x - fx / dx;
                if cand > lo && cand < hi {
                    next = cand;
                }
            }
        }
        x = if next.is_finite() { next } else { 0.5 * (lo + hi) };
        if x <= lo || x >= hi {
            // The bracket has collapsed to adjacent floats; no further
            // progress is representable.
            return x.clamp(lo, hi);
        }
    }
    x
}

/// Minimizes a unimodal-ish scalar function on [lo, hi]: a uniform bracketing
/// scan followed by golden-section refinement inside the best bracket.
/// Deterministic; returns (argmin, min).
pub fn golden_section_min<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    scan_points: usize,
    xtol: f64,
) -> (f64, f64) {
    debug_assert!(scan_points >= 3);
    let n = scan_points.max(3);
    let mut best_i = 0usize;
    let mut best_v = f64::INFINITY;
    let xs: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let vs: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let v = f(x);
            if v.is_nan() {
                f64::INFINITY
            } else {
                v
            }
        })
        .collect();
    for (i, &v) in vs.iter().enumerate() {
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let mut a = xs[best_i.saturating_sub(1)];
    let mut b = xs[(best_i + 1).min(n - 1)];
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - (b - a) * INVPHI;
    let mut d = a + (b - a) * INVPHI;
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > xtol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INVPHI;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INVPHI;
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let v = f(x);
    if v <= best_v {
        (x, v)
    } else {
        (xs[best_i], best_v)
    }
}
