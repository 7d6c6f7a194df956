//! Point estimators of the population mean `Ybar` from one systematic sample.
//!
//! | estimator | form |
//! |-----------|------|
//! | `t0` | `ybar*` |
//! | `t1` | `ybar* Xbar / xbar*` (ratio) |
//! | `t2` | `ybar* xbar* / Xbar` (product) |
//! | `t3` | `ybar* exp[(Xbar - xbar*) / (Xbar + xbar*)]` (exponential ratio) |
//! | `t4` | `[k1 ybar* + k2 (Xbar - xbar*)] exp[(A - a*) / (A + a*)]` with `a* = xbar* + N Xbar`, `A = Xbar + N Xbar` |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::SystematicSample;
use crate::error::{Error, Result, Variate};
use crate::population::MomentSet;
use crate::theory::TransformedMse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "t0")]
    Mean,
    #[serde(rename = "t1")]
    Ratio,
    #[serde(rename = "t2")]
    Product,
    #[serde(rename = "t3")]
    ExpRatio,
    #[serde(rename = "t4")]
    Transformed,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Mean,
        Estimator::Ratio,
        Estimator::Product,
        Estimator::ExpRatio,
        Estimator::Transformed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Mean => "t0",
            Estimator::Ratio => "t1",
            Estimator::Product => "t2",
            Estimator::ExpRatio => "t3",
            Estimator::Transformed => "t4",
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Estimator {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label() == s.trim())
            .ok_or_else(|| format!("unknown estimator `{s}` (expected t0..t4)"))
    }
}

/// Unbiased sample mean `ybar*`.
pub fn est_mean(s: &SystematicSample) -> f64 {
    s.mean_y_star
}

/// Ratio estimator `ybar* Xbar / xbar*`.
pub fn est_ratio_t1(s: &SystematicSample, mean_x: f64) -> Result<f64> {
    if s.mean_x_star == 0.0 {
        return Err(Error::EstimatorDomain {
            estimator: Estimator::Ratio,
            reason: "sample mean of x is zero",
        });
    }
    if s.mean_x_star.signum() != mean_x.signum() {
        log::warn!(
            "t1: sample mean of x ({}) and population mean ({mean_x}) differ in sign",
            s.mean_x_star
        );
    }
    Ok(s.mean_y_star / s.mean_x_star * mean_x)
}

/// Product estimator `ybar* xbar* / Xbar`.
pub fn est_product_t2(s: &SystematicSample, mean_x: f64) -> Result<f64> {
    if mean_x == 0.0 {
        return Err(Error::EstimatorDomain {
            estimator: Estimator::Product,
            reason: "population mean of x is zero",
        });
    }
    Ok(s.mean_y_star * (s.mean_x_star / mean_x))
}

/// Exponential ratio-type estimator `ybar* exp[(Xbar - xbar*) / (Xbar + xbar*)]`.
pub fn est_exp_ratio_t3(s: &SystematicSample, mean_x: f64) -> Result<f64> {
    let denom = mean_x + s.mean_x_star;
    if denom == 0.0 {
        return Err(Error::EstimatorDomain {
            estimator: Estimator::ExpRatio,
            reason: "Xbar + xbar* is zero",
        });
    }
    Ok(s.mean_y_star * ((mean_x - s.mean_x_star) / denom).exp())
}

/// Exponent of the transformed estimator, `(A - a*) / (A + a*)`.
///
/// With `a_i = x_i + N Xbar` this is `-(xbar* - Xbar) / (2(1+N) Xbar + (xbar* - Xbar))`,
/// which avoids cancellation between the two large shifted means.
fn transformed_exponent(mean_x_star: f64, mean_x: f64, cap_n: usize) -> Option<f64> {
    let dev = mean_x_star - mean_x;
    let denom = 2.0 * (1.0 + cap_n as f64) * mean_x + dev;
    (denom != 0.0).then(|| -dev / denom)
}

/// Transformed exponential estimator with constants `(k1, k2)` and shift
/// `cap_n` (the `N` in `a_i = x_i + N Xbar`).
pub fn est_transformed_t4(
    s: &SystematicSample,
    mean_x: f64,
    cap_n: usize,
    k1: f64,
    k2: f64,
) -> Result<f64> {
    let exponent = transformed_exponent(s.mean_x_star, mean_x, cap_n).ok_or(
        Error::EstimatorDomain {
            estimator: Estimator::Transformed,
            reason: "A + a* is zero",
        },
    )?;
    Ok((k1 * s.mean_y_star + k2 * (mean_x - s.mean_x_star)) * exponent.exp())
}

/// Auxiliary terms `A1..A5` and the optimal `(k1, k2)` of `t4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformConstants {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    /// Minimiser of the first-order MSE, from its normal equations.
    pub k1: f64,
    pub k2: f64,
    pub cap_n: usize,
    /// `(A4 A5 - 2 Ybar^2 (1+A2) A3) / D` evaluated independently of the
    /// normal-equation solve.
    pub closed_form_k1: f64,
    /// `Ybar^2 (2 A5 (1+A2) - A4 (1+A1)) / D`.
    pub closed_form_k2: f64,
    /// `D = 2 A5^2 - 2 A3 Ybar^2 (1 + A1)`.
    pub denominator: f64,
}

impl TransformConstants {
    /// Largest relative gap between the normal-equation solution and the
    /// closed forms. Anything beyond rounding means the two disagree.
    pub fn closed_form_mismatch(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        rel(self.k1, self.closed_form_k1).max(rel(self.k2, self.closed_form_k2))
    }
}

/// Relative singularity threshold on `D`.
pub const SINGULARITY_TOL: f64 = 1e-12;

/// Mismatch above this between solve and closed form is logged.
const CLOSED_FORM_WARN: f64 = 1e-8;

/// Optimal constants for `t4` under the first-order MSE.
///
/// `(k1, k2)` solve the normal equations of [`TransformedMse`], whose
/// coefficients come straight from the second-order expansion of `t4`. The
/// closed forms in `A1..A5` are evaluated separately and kept as a
/// cross-check; the solve is authoritative.
///
/// Fails when `C1^2 = 0` (constant auxiliary variate) or when
/// `|D| <= 1e-12 * max(1, |2 A5^2|, |2 A3 Ybar^2 (1 + A1)|)`.
pub fn optimal_constants(
    m: &MomentSet,
    mean_y: f64,
    mean_x: f64,
    cap_n: usize,
) -> Result<TransformConstants> {
    if m.c1sq == 0.0 {
        return Err(Error::DegenerateVariate(Variate::Auxiliary));
    }
    let np = 1.0 + cap_n as f64;
    let th = m.theta;
    let y2 = mean_y * mean_y;
    let a1 = th * (m.c0sq + m.c1sq / (np * np) - 2.0 * m.c0c1 / np);
    let a2 = th * (3.0 * m.c1sq / (8.0 * np * np) - m.c0c1 / (2.0 * np));
    let a3 = mean_x * mean_x * th * m.c1sq;
    let a4 = mean_y * mean_x * th * m.c1sq / np;
    let a5 = mean_y * mean_x * th * (m.c1sq / np - m.c0c1);

    let lhs = 2.0 * a5 * a5;
    let rhs = 2.0 * a3 * y2 * (1.0 + a1);
    let denominator = lhs - rhs;
    let tol = SINGULARITY_TOL * 1f64.max(lhs.abs()).max(rhs.abs());
    if !(denominator.abs() > tol) {
        return Err(Error::Singular {
            det: denominator.abs(),
            tol,
        });
    }

    let closed_form_k1 = (a4 * a5 - 2.0 * y2 * (1.0 + a2) * a3) / denominator;
    let closed_form_k2 = y2 * (2.0 * a5 * (1.0 + a2) - a4 * (1.0 + a1)) / denominator;

    let quad = TransformedMse::from_expansion(m, mean_y, mean_x, cap_n);
    let (k1, k2) = quad.stationary_point().ok_or(Error::Singular {
        det: denominator.abs(),
        tol,
    })?;

    let tc = TransformConstants {
        a1,
        a2,
        a3,
        a4,
        a5,
        k1,
        k2,
        cap_n,
        closed_form_k1,
        closed_form_k2,
        denominator,
    };
    let mismatch = tc.closed_form_mismatch();
    if mismatch > CLOSED_FORM_WARN {
        log::warn!("t4 constants: normal equations and closed form differ by {mismatch:e} (relative)");
    }
    Ok(tc)
}
