//! Application utility functions and the log-utility calculus the UE
//! subproblem runs on.
//!
//! Two families are supported:
//!
//! * sigmoidal-like, `U(r) = c (1 / (1 + e^{-a(r-b)}) - d)` with
//!   `c = (1 + e^{ab}) / e^{ab}` and `d = 1 / (1 + e^{ab})`, modelling
//!   real-time traffic with a minimum acceptable rate near `b`;
//! * logarithmic, `U(r) = ln(1 + k r) / ln(1 + k r_max)`, modelling
//!   delay-tolerant traffic.
//!
//! Everything the iteration needs is expressed through the slope of the
//! natural log of the utility, `S(r) = d/dr ln U(r)`, which is strictly
//! decreasing for both families. Demand at a price `p` is the root of
//! `S(r) = p`, found by bisection in [`UtilityFunction::inverse_log_slope`].
//!
//! The sigmoidal constants overflow for `a*b` beyond ~700, and lose all
//! precision well before that, so the sigmoidal formulas are evaluated in the
//! equivalent forms
//!
//! ```text
//! U(r) = (1 - e^{-ar}) * logistic(a(r - b))
//! S(r) = a / (e^{ar} - 1) + a * logistic(-a(r - b))
//! ```
//!
//! which never form `e^{ab}`.

use serde::{Deserialize, Serialize};

use crate::error::UtilityError;

/// Lower end of the demand bracket. `S` diverges at zero, and no user is ever
/// allocated zero rate, so bisection starts here.
pub const RATE_FLOOR: f64 = 1e-6;

/// Default bracket width for [`UtilityFunction::inverse_log_slope`].
pub const DEFAULT_TOL: f64 = 1e-9;

/// A non-negative, finite amount of rate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Rate(f64);

impl Rate {
    pub const ZERO: Rate = Rate(0.0);

    pub fn new(value: f64) -> Result<Rate, UtilityError> {
        if value.is_finite() && value >= 0.0 {
            Ok(Rate(value))
        } else {
            Err(UtilityError::InvalidRate(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Rate {
    type Error = UtilityError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Rate::new(value)
    }
}

/// First and second derivative of the log-slope `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeCurvature {
    /// `dS/dr`, always negative.
    pub first: f64,
    /// `d²S/dr²`.
    pub second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum UtilityFunction {
    /// `a` is the steepness (1/rate), `b` the inflection rate.
    #[serde(rename = "sigmoidal", alias = "sig")]
    Sigmoidal { a: f64, b: f64 },
    /// `k` is the utility growth rate (1/rate), `r_max` the rate at 100% utility.
    #[serde(rename = "log", alias = "logarithmic")]
    Logarithmic { k: f64, r_max: f64 },
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 - e^{-x})` for `x > 0`.
fn log1mexp(x: f64) -> f64 {
    if x < std::f64::consts::LN_2 {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

fn check_param(name: &'static str, value: f64) -> Result<(), UtilityError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(UtilityError::InvalidParameter { name, value })
    }
}

impl UtilityFunction {
    pub fn sigmoidal(a: f64, b: f64) -> Result<Self, UtilityError> {
        let u = UtilityFunction::Sigmoidal { a, b };
        u.validate()?;
        Ok(u)
    }

    pub fn logarithmic(k: f64, r_max: f64) -> Result<Self, UtilityError> {
        let u = UtilityFunction::Logarithmic { k, r_max };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<(), UtilityError> {
        match *self {
            UtilityFunction::Sigmoidal { a, b } => {
                check_param("a", a)?;
                check_param("b", b)
            }
            UtilityFunction::Logarithmic { k, r_max } => {
                check_param("k", k)?;
                check_param("r_max", r_max)
            }
        }
    }

    pub fn is_sigmoidal(&self) -> bool {
        matches!(self, UtilityFunction::Sigmoidal { .. })
    }

    /// Sigmoidal normalisation constant `c = 1 + e^{-ab}`; `None` for logarithmic.
    pub fn c(&self) -> Option<f64> {
        match *self {
            UtilityFunction::Sigmoidal { a, b } => Some(1.0 + (-a * b).exp()),
            UtilityFunction::Logarithmic { .. } => None,
        }
    }

    /// Sigmoidal offset `d = 1 / (1 + e^{ab})`; `None` for logarithmic.
    pub fn d(&self) -> Option<f64> {
        match *self {
            UtilityFunction::Sigmoidal { a, b } => Some(logistic(-a * b)),
            UtilityFunction::Logarithmic { .. } => None,
        }
    }

    /// Utility of a total rate. Zero at zero; the sigmoid tends to 1, the
    /// logarithm reaches 1 at `r_max` and keeps growing past it.
    pub fn evaluate(&self, r: Rate) -> f64 {
        let r = r.value();
        match *self {
            UtilityFunction::Sigmoidal { a, b } => -(-a * r).exp_m1() * logistic(a * (r - b)),
            UtilityFunction::Logarithmic { k, r_max } => (k * r).ln_1p() / (k * r_max).ln_1p(),
        }
    }

    /// `ln U(r)`, computed without forming `U` so that it stays accurate
    /// where `U` rounds to 1. Returns `-inf` at `r = 0`.
    pub fn log_evaluate(&self, r: Rate) -> f64 {
        let r = r.value();
        if r == 0.0 {
            return f64::NEG_INFINITY;
        }
        match *self {
            UtilityFunction::Sigmoidal { a, b } => log1mexp(a * r) - softplus(-a * (r - b)),
            UtilityFunction::Logarithmic { k, r_max } => {
                (k * r).ln_1p().ln() - (k * r_max).ln_1p().ln()
            }
        }
    }

    pub(crate) fn slope_unchecked(&self, r: f64) -> f64 {
        match *self {
            UtilityFunction::Sigmoidal { a, b } => a / (a * r).exp_m1() + a * logistic(-a * (r - b)),
            UtilityFunction::Logarithmic { k, .. } => {
                let x = k * r;
                k / ((1.0 + x) * x.ln_1p())
            }
        }
    }

    /// `S(r) = d/dr ln U(r)`: strictly positive and strictly decreasing.
    pub fn log_slope(&self, r: Rate) -> Result<f64, UtilityError> {
        let r = positive(r)?;
        Ok(self.slope_unchecked(r))
    }

    /// Closed-form `dS/dr` and `d²S/dr²`.
    ///
    /// For the sigmoid the second derivative is the sum of a term that is
    /// positive and decays like `e^{-ar}` and a term with the sign of `r - b`;
    /// it is negative on roughly `(b/2, b)` and positive past `b`.
    pub fn log_slope_curvature(&self, r: Rate) -> Result<SlopeCurvature, UtilityError> {
        let r = positive(r)?;
        Ok(match *self {
            UtilityFunction::Sigmoidal { a, b } => {
                // v = e^{-ar}; e^{ar}/(e^{ar}-1)^2 = v/(1-v)^2
                let v = (-a * r).exp();
                let one_minus_v = -(-a * r).exp_m1();
                let s = logistic(a * (r - b));
                let s_comp = logistic(-a * (r - b));
                let a2 = a * a;
                let a3 = a2 * a;
                SlopeCurvature {
                    first: -a2 * v / (one_minus_v * one_minus_v) - a2 * s * s_comp,
                    second: a3 * v * (1.0 + v) / (one_minus_v * one_minus_v * one_minus_v)
                        + a3 * s * s_comp * (s - s_comp),
                }
            }
            UtilityFunction::Logarithmic { k, .. } => {
                let x = 1.0 + k * r;
                let l = (k * r).ln_1p();
                SlopeCurvature {
                    first: -k * k * (l + 1.0) / (x * x * l * l),
                    second: k * k * k * (2.0 * (l + 1.0) * (l + 1.0) - l) / (x * x * x * l * l * l),
                }
            }
        })
    }

    /// Total demand at price `p`: the root of `S(r) = p` in
    /// `[RATE_FLOOR, r_cap]`, bisected until the bracket is narrower than
    /// `tol` and the slope at its midpoint is within `tol` of `p` (or the
    /// bracket cannot shrink further). Prices above `S(RATE_FLOOR)` return the floor; prices at or
    /// below `S(r_cap)` return the cap.
    pub fn inverse_log_slope(&self, p: f64, r_cap: f64, tol: f64) -> Result<Rate, UtilityError> {
        check_param("price", p)?;
        check_param("r_cap", r_cap)?;
        check_param("tol", tol)?;
        Ok(Rate(self.demand(p, r_cap, tol)))
    }

    pub(crate) fn demand(&self, p: f64, r_cap: f64, tol: f64) -> f64 {
        if r_cap <= RATE_FLOOR {
            return r_cap;
        }
        let mut lo = RATE_FLOOR;
        let mut hi = r_cap;
        if p >= self.slope_unchecked(lo) {
            return lo;
        }
        if p <= self.slope_unchecked(hi) {
            return hi;
        }
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            let s = self.slope_unchecked(mid);
            if hi - lo <= tol && (s - p).abs() <= tol {
                return mid;
            }
            if s > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }

    /// Rate at the utility's inflection point: `b` for the sigmoid, zero for
    /// the (everywhere concave) logarithm.
    pub fn inflection_rate(&self) -> Rate {
        match *self {
            UtilityFunction::Sigmoidal { b, .. } => Rate(b),
            UtilityFunction::Logarithmic { .. } => Rate::ZERO,
        }
    }

    /// The two closed forms for the steady-state price ceiling of a sigmoidal
    /// user, `a d/(1-d) + a/2` and `S(b) = a d/(1-2d) + a/2`. They differ by
    /// roughly `a e^{-2ab}`; the second is always the larger.
    pub fn price_ceiling(&self) -> Option<PriceCeiling> {
        match *self {
            UtilityFunction::Sigmoidal { a, b } => Some(PriceCeiling {
                // d/(1-d) = e^{-ab}, d/(1-2d) = 1/(e^{ab}-1)
                closed_form: a * (-a * b).exp() + 0.5 * a,
                slope_at_inflection: a / (a * b).exp_m1() + 0.5 * a,
            }),
            UtilityFunction::Logarithmic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceCeiling {
    pub closed_form: f64,
    pub slope_at_inflection: f64,
}

impl PriceCeiling {
    pub fn larger(&self) -> f64 {
        self.closed_form.max(self.slope_at_inflection)
    }
}

fn positive(r: Rate) -> Result<f64, UtilityError> {
    if r.value() > 0.0 {
        Ok(r.value())
    } else {
        Err(UtilityError::NonPositiveRate(r.value()))
    }
}
