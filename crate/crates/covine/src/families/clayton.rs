//! Clayton copula in its unrotated (lower tail dependent) form.
//!
//! All quantities are computed in log space where the generator sums
//! u^-theta + v^-theta - 1 would otherwise overflow for strong dependence.

pub fn par_from_tau(tau: f64) -> f64 {
    2.0 * tau / (1.0 - tau)
}

#[cfg(test)]
pub fn tau_from_par(theta: f64) -> f64 {
    theta / (theta + 2.0)
}

pub fn dpar_dtau(tau: f64) -> f64 {
    let s = 1.0 - tau;
    2.0 / (s * s)
}

pub fn d2par_dtau2(tau: f64) -> f64 {
    let s = 1.0 - tau;
    4.0 / (s * s * s)
}

/// log of u^-theta + v^-theta - 1, evaluated without overflow.
fn ln_m(la: f64, lb: f64) -> f64 {
    let lmax = la.max(lb);
    if lmax < 30.0 {
        // Both terms are of moderate size; expm1 keeps accuracy when the
        // sum is close to 1 (weak dependence or u, v near 1).
        (la.exp_m1() + lb.exp_m1()).ln_1p()
    } else {
        lmax + ((la - lmax).exp() + (lb - lmax).exp() - (-lmax).exp()).ln()
    }
}

pub fn logpdf(u: f64, v: f64, theta: f64) -> f64 {
    let lu = u.ln();
    let lv = v.ln();
    let lnm = ln_m(-theta * lu, -theta * lv);
    (1.0 + theta).ln() - (theta + 1.0) * (lu + lv) - (2.0 + 1.0 / theta) * lnm
}

pub fn dlogpdf_dpar(u: f64, v: f64, theta: f64) -> f64 {
    let lu = u.ln();
    let lv = v.ln();
    let la = -theta * lu;
    let lb = -theta * lv;
    let lnm = ln_m(la, lb);
    // ra = u^-theta / M and rb = v^-theta / M stay in [0, ~1].
    let ra = (la - lnm).exp();
    let rb = (lb - lnm).exp();
    let mp_over_m = -(ra * lu + rb * lv);
    1.0 / (1.0 + theta) - (lu + lv) + lnm / (theta * theta) - (2.0 + 1.0 / theta) * mp_over_m
}

pub fn d2logpdf_dpar2(u: f64, v: f64, theta: f64) -> f64 {
    let lu = u.ln();
    let lv = v.ln();
    let la = -theta * lu;
    let lb = -theta * lv;
    let lnm = ln_m(la, lb);
    let ra = (la - lnm).exp();
    let rb = (lb - lnm).exp();
    let mp_over_m = -(ra * lu + rb * lv);
    let mpp_over_m = ra * lu * lu + rb * lv * lv;
    let t2 = theta * theta;
    -1.0 / ((1.0 + theta) * (1.0 + theta)) - 2.0 * lnm / (t2 * theta)
        + 2.0 * mp_over_m / t2
        - (2.0 + 1.0 / theta) * (mpp_over_m - mp_over_m * mp_over_m)
}

/// Conditional CDF of the first argument given the second:
/// v^-(theta+1) * (u^-theta + v^-theta - 1)^-(1+1/theta).
pub fn hfunc(u: f64, v: f64, theta: f64) -> f64 {
    let lu = u.ln();
    let lv = v.ln();
    let lnm = ln_m(-theta * lu, -theta * lv);
    (-(theta + 1.0) * lv - (1.0 + 1.0 / theta) * lnm).exp()
}

/// Closed-form inverse of `hfunc` in its first argument.
pub fn hinv(p: f64, v: f64, theta: f64) -> f64 {
    let lb = -theta * v.ln();
    // Solve p = v^-(theta+1) M^-(1+1/theta) for u. With q = -theta ln(p) / (theta+1):
    // u^-theta = v^-theta expm1(q) + 1.
    let q = -theta * p.ln() / (theta + 1.0);
    let ln_inner = if lb + q < 30.0 {
        ((lb.exp() * q.exp_m1()).ln_1p()).max(0.0)
    } else {
        // v^-theta expm1(q) = exp(lb + q) (1 - e^-q), then add 1 in log space.
        crate::numeric::logaddexp(lb + q + (-(-q).exp_m1()).ln(), 0.0)
    };
    (-ln_inner / theta).exp()
}
