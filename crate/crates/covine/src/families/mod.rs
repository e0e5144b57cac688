//! Bivariate copula families, parameterized by Kendall's tau.
//!
//! Every family exposes its log density, the first two tau derivatives of
//! the log density, conditional CDFs (h-functions) and their inverses. The
//! Clayton and Gumbel families support 90/180/270 degree rotations so that
//! negative or lower/upper tail dependence can be represented; rotations by
//! 90 and 270 degrees negate the attainable tau range.
//!
//! Arguments are defensively clamped to the open unit square and tau to the
//! family's admissible interval, so evaluation never produces NaN for inputs
//! on the boundary.

mod clayton;
mod gaussian;
mod gumbel;
mod student_t;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CovineError, Result};

/// Margin kept between copula arguments and the unit square boundary.
pub const UV_EPS: f64 = 1e-10;
/// Margin kept between tau and the ends of its admissible interval.
pub const TAU_EPS: f64 = 1e-4;

fn clip_unit(x: f64) -> f64 {
    x.clamp(UV_EPS, 1.0 - UV_EPS)
}

/// Which argument a conditional CDF is taken in.
///
/// `First` conditions the first argument on the second (the derivative of
/// the copula in its second argument); `Second` is the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Indep,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub fn degrees(self) -> u16 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// Sign applied to tau when passing it to the unrotated family.
    fn tau_sign(self) -> f64 {
        match self {
            Rotation::R0 | Rotation::R180 => 1.0,
            Rotation::R90 | Rotation::R270 => -1.0,
        }
    }
}

/// A fully specified pair-copula family: kind, rotation and any fixed
/// auxiliary parameter (the Student-t degrees of freedom).
///
/// Serialized as a compact id string such as `"gaussian"`, `"t(nu=4)"`,
/// `"clayton@90"` or `"gumbel@270"`.
///
/// One-sign families also exist in an *extended* form (`"clayton@pm"`,
/// `"gumbel@pm"`) that covers the whole tau range by switching between the
/// unrotated copula for positive tau and its 90 degree rotation for negative
/// tau. This is the natural parameterization when tau is a function of
/// covariates and may change sign across observations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FamilySpec {
    kind: FamilyKind,
    rotation: Rotation,
    nu: Option<f64>,
    extended: bool,
}

impl FamilySpec {
    pub fn new(kind: FamilyKind, rotation: Rotation, nu: Option<f64>) -> Result<Self> {
        match kind {
            FamilyKind::StudentT => {
                let nu = nu.ok_or_else(|| {
                    CovineError::invalid("student t family requires degrees of freedom")
                })?;
                if !nu.is_finite() || nu <= 2.0 {
                    return Err(CovineError::invalid(format!(
                        "student t degrees of freedom must be finite and exceed 2, got {nu}"
                    )));
                }
            }
            _ => {
                if nu.is_some() {
                    return Err(CovineError::invalid(format!(
                        "{kind:?} family takes no degrees of freedom"
                    )));
                }
            }
        }
        if rotation != Rotation::R0 && !matches!(kind, FamilyKind::Clayton | FamilyKind::Gumbel) {
            return Err(CovineError::invalid(format!(
                "rotation {} is only valid for clayton and gumbel",
                rotation.degrees()
            )));
        }
        Ok(FamilySpec { kind, rotation, nu, extended: false })
    }

    pub fn indep() -> Self {
        FamilySpec { kind: FamilyKind::Indep, rotation: Rotation::R0, nu: None, extended: false }
    }

    pub fn gaussian() -> Self {
        FamilySpec { kind: FamilyKind::Gaussian, rotation: Rotation::R0, nu: None, extended: false }
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        FamilySpec::new(FamilyKind::StudentT, Rotation::R0, Some(nu))
    }

    pub fn clayton(rotation: Rotation) -> Self {
        FamilySpec { kind: FamilyKind::Clayton, rotation, nu: None, extended: false }
    }

    pub fn gumbel(rotation: Rotation) -> Self {
        FamilySpec { kind: FamilyKind::Gumbel, rotation, nu: None, extended: false }
    }

    /// Sign-switching variant of a one-sign family: behaves as the unrotated
    /// copula where tau is positive and as its 90 degree rotation where tau
    /// is negative, so a single spec covers tau anywhere in (-1, 1).
    pub fn extended(kind: FamilyKind) -> Result<Self> {
        if !matches!(kind, FamilyKind::Clayton | FamilyKind::Gumbel) {
            return Err(CovineError::invalid(format!(
                "extended form only applies to clayton and gumbel, not {kind:?}"
            )));
        }
        Ok(FamilySpec { kind, rotation: Rotation::R0, nu: None, extended: true })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn rotation(&self) -> Rotation {
        self.rotation
    }

    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    pub fn is_extended(&self) -> bool {
        self.extended
    }

    /// Fixed-rotation family an extended spec delegates to at this tau.
    fn branch(&self, tau: f64) -> FamilySpec {
        let rotation = if tau < 0.0 { Rotation::R90 } else { Rotation::R0 };
        FamilySpec { kind: self.kind, rotation, nu: None, extended: false }
    }

    /// Same family with a different fixed degrees of freedom; only valid for
    /// the Student-t kind.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        FamilySpec::new(self.kind, self.rotation, Some(nu))
    }

    /// Canonical id string, e.g. `"t(nu=4)"` or `"clayton@270"`.
    pub fn id(&self) -> String {
        let base = match self.kind {
            FamilyKind::Indep => "indep".to_string(),
            FamilyKind::Gaussian => "gaussian".to_string(),
            FamilyKind::StudentT => format!("t(nu={})", self.nu.unwrap()),
            FamilyKind::Clayton => "clayton".to_string(),
            FamilyKind::Gumbel => "gumbel".to_string(),
        };
        if self.extended {
            return format!("{base}@pm");
        }
        match self.rotation {
            Rotation::R0 => base,
            r => format!("{base}@{}", r.degrees()),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let (base, rotation, extended) = match s.split_once('@') {
            None => (s, Rotation::R0, false),
            Some((b, "pm")) => (b, Rotation::R0, true),
            Some((b, r)) => {
                let rot = match r {
                    "90" => Rotation::R90,
                    "180" => Rotation::R180,
                    "270" => Rotation::R270,
                    other => {
                        return Err(CovineError::invalid(format!(
                            "unknown rotation suffix '@{other}' in family id '{s}'"
                        )))
                    }
                };
                (b, rot, false)
            }
        };
        let (kind, nu) = if base == "indep" {
            (FamilyKind::Indep, None)
        } else if base == "gaussian" {
            (FamilyKind::Gaussian, None)
        } else if base == "clayton" {
            (FamilyKind::Clayton, None)
        } else if base == "gumbel" {
            (FamilyKind::Gumbel, None)
        } else if let Some(inner) = base.strip_prefix("t(nu=").and_then(|r| r.strip_suffix(')')) {
            let nu: f64 = inner.parse().map_err(|_| {
                CovineError::invalid(format!("cannot parse degrees of freedom in '{s}'"))
            })?;
            (FamilyKind::StudentT, Some(nu))
        } else {
            return Err(CovineError::invalid(format!("unknown family id '{s}'")));
        };
        if extended {
            if nu.is_some() || kind == FamilyKind::Indep || kind == FamilyKind::Gaussian {
                return Err(CovineError::invalid(format!(
                    "suffix '@pm' only applies to clayton and gumbel, got '{s}'"
                )));
            }
            return FamilySpec::extended(kind);
        }
        FamilySpec::new(kind, rotation, nu)
    }

    /// Admissible Kendall tau interval, already shrunk by [`TAU_EPS`] at
    /// each end so that parameter transforms stay finite.
    pub fn tau_bounds(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::Indep => (0.0, 0.0),
            FamilyKind::Gaussian | FamilyKind::StudentT => (-1.0 + TAU_EPS, 1.0 - TAU_EPS),
            FamilyKind::Clayton | FamilyKind::Gumbel if self.extended => {
                (-1.0 + TAU_EPS, 1.0 - TAU_EPS)
            }
            FamilyKind::Clayton | FamilyKind::Gumbel => match self.rotation {
                Rotation::R0 | Rotation::R180 => (TAU_EPS, 1.0 - TAU_EPS),
                Rotation::R90 | Rotation::R270 => (-1.0 + TAU_EPS, -TAU_EPS),
            },
        }
    }

    pub fn clip_tau(&self, tau: f64) -> f64 {
        let (lo, hi) = self.tau_bounds();
        tau.clamp(lo, hi)
    }

    /// True when the family can only represent tau of one sign.
    pub fn is_archimedean(&self) -> bool {
        matches!(self.kind, FamilyKind::Clayton | FamilyKind::Gumbel)
    }

    fn rot_args(&self, u: f64, v: f64) -> (f64, f64) {
        match self.rotation {
            Rotation::R0 => (u, v),
            Rotation::R90 => (v, 1.0 - u),
            Rotation::R180 => (1.0 - u, 1.0 - v),
            Rotation::R270 => (1.0 - v, u),
        }
    }

    /// Copula parameter and its first two derivatives with respect to the
    /// (sign-adjusted) tau of the unrotated family.
    fn par_maps(&self, bt: f64) -> (f64, f64, f64) {
        match self.kind {
            FamilyKind::Indep => (0.0, 0.0, 0.0),
            FamilyKind::Gaussian | FamilyKind::StudentT => (
                gaussian::par_from_tau(bt),
                gaussian::dpar_dtau(bt),
                gaussian::d2par_dtau2(bt),
            ),
            FamilyKind::Clayton => (
                clayton::par_from_tau(bt),
                clayton::dpar_dtau(bt),
                clayton::d2par_dtau2(bt),
            ),
            FamilyKind::Gumbel => (
                gumbel::par_from_tau(bt),
                gumbel::dpar_dtau(bt),
                gumbel::d2par_dtau2(bt),
            ),
        }
    }

    fn base_logpdf(&self, x: f64, y: f64, par: f64) -> f64 {
        match self.kind {
            FamilyKind::Indep => 0.0,
            FamilyKind::Gaussian => gaussian::logpdf(x, y, par),
            FamilyKind::StudentT => student_t::logpdf(x, y, par, self.nu.unwrap()),
            FamilyKind::Clayton => clayton::logpdf(x, y, par),
            FamilyKind::Gumbel => gumbel::logpdf(x, y, par),
        }
    }

    fn base_dlogpdf(&self, x: f64, y: f64, par: f64) -> f64 {
        match self.kind {
            FamilyKind::Indep => 0.0,
            FamilyKind::Gaussian => gaussian::dlogpdf_dpar(x, y, par),
            FamilyKind::StudentT => student_t::dlogpdf_dpar(x, y, par, self.nu.unwrap()),
            FamilyKind::Clayton => clayton::dlogpdf_dpar(x, y, par),
            FamilyKind::Gumbel => gumbel::dlogpdf_dpar(x, y, par),
        }
    }

    fn base_d2logpdf(&self, x: f64, y: f64, par: f64) -> f64 {
        match self.kind {
            FamilyKind::Indep => 0.0,
            FamilyKind::Gaussian => gaussian::d2logpdf_dpar2(x, y, par),
            FamilyKind::StudentT => student_t::d2logpdf_dpar2(x, y, par, self.nu.unwrap()),
            FamilyKind::Clayton => clayton::d2logpdf_dpar2(x, y, par),
            FamilyKind::Gumbel => gumbel::d2logpdf_dpar2(x, y, par),
        }
    }

    /// Conditional CDF of the first argument given the second for the
    /// unrotated family (all base families are exchangeable).
    fn base_h(&self, x: f64, y: f64, par: f64) -> f64 {
        match self.kind {
            FamilyKind::Indep => x,
            FamilyKind::Gaussian => gaussian::hfunc(x, y, par),
            FamilyKind::StudentT => student_t::hfunc(x, y, par, self.nu.unwrap()),
            FamilyKind::Clayton => clayton::hfunc(x, y, par),
            FamilyKind::Gumbel => gumbel::hfunc(x, y, par),
        }
    }

    fn base_hinv(&self, p: f64, y: f64, par: f64) -> f64 {
        match self.kind {
            FamilyKind::Indep => p,
            FamilyKind::Gaussian => gaussian::hinv(p, y, par),
            FamilyKind::StudentT => student_t::hinv(p, y, par, self.nu.unwrap()),
            FamilyKind::Clayton => clayton::hinv(p, y, par),
            FamilyKind::Gumbel => gumbel::hinv(p, y, par),
        }
    }

    /// Log copula density at `(u, v)` with Kendall tau `tau`.
    pub fn logpdf(&self, u: f64, v: f64, tau: f64) -> f64 {
        if self.extended {
            return self.branch(tau).logpdf(u, v, tau);
        }
        let (u, v) = (clip_unit(u), clip_unit(v));
        let bt = self.rotation.tau_sign() * self.clip_tau(tau);
        let (par, _, _) = self.par_maps(bt);
        let (x, y) = self.rot_args(u, v);
        self.base_logpdf(x, y, par)
    }

    /// First derivative of the log density with respect to tau.
    pub fn dlogpdf_dtau(&self, u: f64, v: f64, tau: f64) -> f64 {
        if self.kind == FamilyKind::Indep {
            return 0.0;
        }
        if self.extended {
            return self.branch(tau).dlogpdf_dtau(u, v, tau);
        }
        let (u, v) = (clip_unit(u), clip_unit(v));
        let sign = self.rotation.tau_sign();
        let bt = sign * self.clip_tau(tau);
        let (par, dpar, _) = self.par_maps(bt);
        let (x, y) = self.rot_args(u, v);
        self.base_dlogpdf(x, y, par) * dpar * sign
    }

    /// Second derivative of the log density with respect to tau.
    pub fn d2logpdf_dtau2(&self, u: f64, v: f64, tau: f64) -> f64 {
        if self.kind == FamilyKind::Indep {
            return 0.0;
        }
        if self.extended {
            return self.branch(tau).d2logpdf_dtau2(u, v, tau);
        }
        let (u, v) = (clip_unit(u), clip_unit(v));
        let bt = self.rotation.tau_sign() * self.clip_tau(tau);
        let (par, dpar, d2par) = self.par_maps(bt);
        let (x, y) = self.rot_args(u, v);
        let d1 = self.base_dlogpdf(x, y, par);
        let d2 = self.base_d2logpdf(x, y, par);
        d2 * dpar * dpar + d1 * d2par
    }

    /// Conditional CDF: with `Side::First` the distribution of the first
    /// argument given the second, with `Side::Second` the reverse.
    pub fn hfunc(&self, side: Side, u: f64, v: f64, tau: f64) -> f64 {
        if self.extended {
            return self.branch(tau).hfunc(side, u, v, tau);
        }
        let (u, v) = (clip_unit(u), clip_unit(v));
        let bt = self.rotation.tau_sign() * self.clip_tau(tau);
        let (par, _, _) = self.par_maps(bt);
        let h = match (self.rotation, side) {
            (Rotation::R0, Side::First) => self.base_h(u, v, par),
            (Rotation::R0, Side::Second) => self.base_h(v, u, par),
            (Rotation::R90, Side::First) => 1.0 - self.base_h(1.0 - u, v, par),
            (Rotation::R90, Side::Second) => self.base_h(v, 1.0 - u, par),
            (Rotation::R180, Side::First) => 1.0 - self.base_h(1.0 - u, 1.0 - v, par),
            (Rotation::R180, Side::Second) => 1.0 - self.base_h(1.0 - v, 1.0 - u, par),
            (Rotation::R270, Side::First) => self.base_h(u, 1.0 - v, par),
            (Rotation::R270, Side::Second) => 1.0 - self.base_h(1.0 - v, u, par),
        };
        clip_unit(h)
    }

    /// Inverse of [`FamilySpec::hfunc`] in its non-conditioning argument:
    /// for `Side::First`, `given` is the second argument and the return
    /// value solves `hfunc(First, u, given, tau) = p` for `u`.
    pub fn hinv(&self, side: Side, p: f64, given: f64, tau: f64) -> f64 {
        if self.extended {
            return self.branch(tau).hinv(side, p, given, tau);
        }
        let (p, given) = (clip_unit(p), clip_unit(given));
        let bt = self.rotation.tau_sign() * self.clip_tau(tau);
        let (par, _, _) = self.par_maps(bt);
        let x = match (self.rotation, side) {
            (Rotation::R0, _) => self.base_hinv(p, given, par),
            (Rotation::R90, Side::First) => 1.0 - self.base_hinv(1.0 - p, given, par),
            (Rotation::R90, Side::Second) => self.base_hinv(p, 1.0 - given, par),
            (Rotation::R180, _) => 1.0 - self.base_hinv(1.0 - p, 1.0 - given, par),
            (Rotation::R270, Side::First) => self.base_hinv(p, 1.0 - given, par),
            (Rotation::R270, Side::Second) => 1.0 - self.base_hinv(1.0 - p, given, par),
        };
        clip_unit(x)
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for FamilySpec {
    type Err = CovineError;

    fn from_str(s: &str) -> Result<Self> {
        FamilySpec::parse(s)
    }
}

impl From<FamilySpec> for String {
    fn from(spec: FamilySpec) -> String {
        spec.id()
    }
}

impl TryFrom<String> for FamilySpec {
    type Error = CovineError;

    fn try_from(s: String) -> Result<Self> {
        FamilySpec::parse(&s)
    }
}
