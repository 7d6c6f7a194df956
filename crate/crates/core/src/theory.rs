//! First-order (Taylor) variances, biases and MSEs for `t0..t4`, and the
//! percent relative efficiency table.
//!
//! Everything is written in the [`MomentSet`] quantities, with
//! `E(e0^2) = theta C0^2`, `E(e1^2) = theta C1^2`, `E(e0 e1) = theta C0C1`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{optimal_constants, Estimator, TransformConstants};
use crate::population::MomentSet;

/// Variance of `ybar*`: `theta Ybar^2 C0^2`.
///
/// With the `N - 1` variance divisor this is the exact design variance, not an
/// approximation.
pub fn var_t0(m: &MomentSet, mean_y: f64) -> f64 {
    m.theta * mean_y * mean_y * m.c0sq
}

/// Ratio estimator: `theta Ybar^2 (C0^2 + C1^2 - 2 C0C1)`.
pub fn var_t1(m: &MomentSet, mean_y: f64) -> f64 {
    m.theta * mean_y * mean_y * (m.c0sq + m.c1sq - 2.0 * m.c0c1)
}

/// Product estimator: `theta Ybar^2 (C0^2 + C1^2 + 2 C0C1)`.
pub fn var_t2(m: &MomentSet, mean_y: f64) -> f64 {
    m.theta * mean_y * mean_y * (m.c0sq + m.c1sq + 2.0 * m.c0c1)
}

/// `var_t1` in the factored form `theta Ybar^2 f_x (rho*^2 C_y^2 + (1 - 2 k rho*) C_x^2)`.
/// Equal to [`var_t1`] when `rho* = sqrt(f_y / f_x)`.
pub fn var_t1_factored(m: &MomentSet, mean_y: f64) -> f64 {
    let rs = m.rho_star;
    m.theta * mean_y * mean_y * m.f_x * (rs * rs * m.cy2 + (1.0 - 2.0 * m.k_coef * rs) * m.cx2)
}

/// `var_t2` in the factored form, see [`var_t1_factored`].
pub fn var_t2_factored(m: &MomentSet, mean_y: f64) -> f64 {
    let rs = m.rho_star;
    m.theta * mean_y * mean_y * m.f_x * (rs * rs * m.cy2 + (1.0 + 2.0 * m.k_coef * rs) * m.cx2)
}

/// Bias of `t3`: `Ybar theta (3 C1^2 / 8 - C0C1 / 2)`.
pub fn bias_t3(m: &MomentSet, mean_y: f64) -> f64 {
    mean_y * m.theta * (3.0 * m.c1sq / 8.0 - m.c0c1 / 2.0)
}

/// MSE of `t3`: `theta Ybar^2 (C0^2 + C1^2 / 4 - C0C1)`.
pub fn mse_t3(m: &MomentSet, mean_y: f64) -> f64 {
    m.theta * mean_y * mean_y * (m.c0sq + m.c1sq / 4.0 - m.c0c1)
}

/// Bias of `t4` at constants `tc`:
/// `Ybar [(k1 - 1) + k1 A2] + k2 Xbar theta C1^2 / (2 (1 + N))`.
pub fn bias_t4(m: &MomentSet, mean_y: f64, mean_x: f64, tc: &TransformConstants) -> f64 {
    let np = 1.0 + tc.cap_n as f64;
    let a2 = m.theta * (3.0 * m.c1sq / (8.0 * np * np) - m.c0c1 / (2.0 * np));
    mean_y * ((tc.k1 - 1.0) + tc.k1 * a2) + tc.k2 * mean_x * m.theta * m.c1sq / (2.0 * np)
}

/// First-order MSE of `t4` as a quadratic in `(k1, k2)`:
///
/// `mse = k1k1 k1^2 + k2k2 k2^2 + k1k2 k1 k2 + lin_k1 k1 + lin_k2 k2 + constant`.
///
/// With `h = 1 / (2 (1 + N))`, the expansion of `t4` to second order is
///
/// ```text
/// t4 - Ybar = Ybar (k1 - 1) + k1 Ybar u + k2 Xbar v
/// u = e0 - h e1 - h e0 e1 + (3/2) h^2 e1^2
/// v = -e1 + h e1^2
/// ```
///
/// and the MSE keeps `Ybar^2 (k1-1)^2`, the cross term `2 Ybar (k1-1) E[...]`
/// with the quadratic parts of `u`, `v`, and the second moments of their
/// linear parts. The coefficients below are those expectations; they do not
/// go through `A1..A5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedMse {
    pub k1k1: f64,
    pub k2k2: f64,
    pub k1k2: f64,
    pub lin_k1: f64,
    pub lin_k2: f64,
    pub constant: f64,
}

impl TransformedMse {
    pub fn from_expansion(m: &MomentSet, mean_y: f64, mean_x: f64, cap_n: usize) -> Self {
        let h = 1.0 / (2.0 * (1.0 + cap_n as f64));
        let e00 = m.theta * m.c0sq;
        let e11 = m.theta * m.c1sq;
        let e01 = m.theta * m.c0c1;
        // expectations of the quadratic parts
        let eu = -h * e01 + 1.5 * h * h * e11;
        let ev = h * e11;
        // second moments of the linear parts u_l = e0 - h e1, v_l = -e1
        let euu = e00 - 2.0 * h * e01 + h * h * e11;
        let evv = e11;
        let euv = -e01 + h * e11;

        let y2 = mean_y * mean_y;
        let yx = mean_y * mean_x;
        TransformedMse {
            k1k1: y2 * (1.0 + 2.0 * eu + euu),
            k2k2: mean_x * mean_x * evv,
            k1k2: 2.0 * yx * (ev + euv),
            lin_k1: -2.0 * y2 * (1.0 + eu),
            lin_k2: -2.0 * yx * ev,
            constant: y2,
        }
    }

    pub fn eval(&self, k1: f64, k2: f64) -> f64 {
        self.k1k1 * k1 * k1
            + self.k2k2 * k2 * k2
            + self.k1k2 * k1 * k2
            + self.lin_k1 * k1
            + self.lin_k2 * k2
            + self.constant
    }

    /// Zero of the gradient, or `None` when the Hessian is singular.
    pub fn stationary_point(&self) -> Option<(f64, f64)> {
        // [2a c; c 2d] [k1; k2] = -[b1; b2]
        let (a, d, c) = (self.k1k1, self.k2k2, self.k1k2);
        let det = 4.0 * a * d - c * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let k1 = (c * self.lin_k2 - 2.0 * d * self.lin_k1) / det;
        let k2 = (c * self.lin_k1 - 2.0 * a * self.lin_k2) / det;
        Some((k1, k2))
    }
}

/// First-order MSE of `t4` at arbitrary `(k1, k2)`.
pub fn mse_t4(m: &MomentSet, mean_y: f64, mean_x: f64, cap_n: usize, k1: f64, k2: f64) -> f64 {
    TransformedMse::from_expansion(m, mean_y, mean_x, cap_n).eval(k1, k2)
}

/// `mse_t4` in the `A1..A5` form,
/// `Ybar^2 [(k1-1)^2 + k1^2 A1 - 2 k1 A2] + k2^2 A3 - k2 A4 + 2 k1 k2 A5`.
///
/// The A-terms are taken from `tc`; only its `k1`, `k2` are ignored in favour
/// of the arguments.
pub fn mse_t4_a_form(mean_y: f64, tc: &TransformConstants, k1: f64, k2: f64) -> f64 {
    mean_y * mean_y * ((k1 - 1.0).powi(2) + k1 * k1 * tc.a1 - 2.0 * k1 * tc.a2)
        + k2 * k2 * tc.a3
        - k2 * tc.a4
        + 2.0 * k1 * k2 * tc.a5
}

/// Optimal constants and the minimised first-order MSE of `t4`.
pub fn mse_t4_min(
    m: &MomentSet,
    mean_y: f64,
    mean_x: f64,
    cap_n: usize,
) -> Result<(TransformConstants, f64)> {
    let tc = optimal_constants(m, mean_y, mean_x, cap_n)?;
    let mse = mse_t4(m, mean_y, mean_x, cap_n, tc.k1, tc.k2);
    Ok((tc, mse))
}

/// How a PRE row should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Valid,
    /// MSE is exactly zero; PRE is infinite.
    Exact,
    /// MSE came out negative, so the first-order approximation is outside
    /// its range (or the baseline variance is zero).
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalMoments {
    pub estimator: Estimator,
    pub variance_or_mse: f64,
    /// Zero where no bias expression is given (`t0`, `t1`, `t2`).
    pub bias: f64,
    /// `100 var_t0 / variance_or_mse`.
    pub pre: f64,
    pub status: RowStatus,
}

/// The PRE table for `t0..t4`, in that order. `t4` is at its optimum.
pub fn pre_table(
    m: &MomentSet,
    mean_y: f64,
    mean_x: f64,
    cap_n: usize,
) -> Result<Vec<TheoreticalMoments>> {
    let (tc, mse4) = mse_t4_min(m, mean_y, mean_x, cap_n)?;
    let base = var_t0(m, mean_y);
    let rows = [
        (Estimator::Mean, base, 0.0),
        (Estimator::Ratio, var_t1(m, mean_y), 0.0),
        (Estimator::Product, var_t2(m, mean_y), 0.0),
        (Estimator::ExpRatio, mse_t3(m, mean_y), bias_t3(m, mean_y)),
        (Estimator::Transformed, mse4, bias_t4(m, mean_y, mean_x, &tc)),
    ];
    Ok(rows
        .into_iter()
        .map(|(estimator, mse, bias)| {
            let (pre, status) = if estimator == Estimator::Mean {
                (100.0, if base > 0.0 { RowStatus::Valid } else { RowStatus::Invalid })
            } else if !(base > 0.0) || mse < 0.0 || !mse.is_finite() {
                (f64::NAN, RowStatus::Invalid)
            } else if mse == 0.0 {
                (f64::INFINITY, RowStatus::Exact)
            } else {
                (100.0 * base / mse, RowStatus::Valid)
            };
            TheoreticalMoments {
                estimator,
                variance_or_mse: mse,
                bias,
                pre,
                status,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{load_population, moments_from_population, moments_from_summary, SummaryStats};
    use approx::assert_relative_eq;

    fn forest(rho_w: f64) -> MomentSet {
        moments_from_summary(&SummaryStats {
            population_size: 176,
            n: 16,
            mean_y: 282.6136,
            mean_x: 6.9943,
            s2_y: 24114.67,
            s2_x: 8.76,
            rho: 0.871,
            rho_wy: rho_w,
            rho_wx: rho_w,
        })
        .unwrap()
    }

    fn worked() -> MomentSet {
        let pop = load_population([1.0, 2.0, 3.0, 4.0].map(|v| (v, v))).unwrap();
        moments_from_population(&pop, 2).unwrap()
    }

    #[test]
    fn worked_example_variances() {
        let m = worked();
        assert_relative_eq!(var_t0(&m, 2.5), 0.25, max_relative = 1e-12);
        assert_relative_eq!(var_t2(&m, 2.5), 1.0, max_relative = 1e-12);
        assert_relative_eq!(mse_t3(&m, 2.5), 0.0625, max_relative = 1e-12);
        assert_relative_eq!(bias_t3(&m, 2.5), -0.0125, max_relative = 1e-12);
        assert!(var_t1(&m, 2.5).abs() < 1e-15);
    }

    #[test]
    fn factored_forms_match() {
        for m in [forest(0.3), worked()] {
            assert_relative_eq!(var_t1_factored(&m, 3.0), var_t1(&m, 3.0), max_relative = 1e-12);
            assert_relative_eq!(var_t2_factored(&m, 3.0), var_t2(&m, 3.0), max_relative = 1e-12);
        }
        // unequal intraclass correlations exercise rho* != 1
        let m = moments_from_summary(&SummaryStats {
            population_size: 40,
            n: 8,
            mean_y: 5.0,
            mean_x: 2.0,
            s2_y: 3.0,
            s2_x: 0.7,
            rho: -0.4,
            rho_wy: 0.3,
            rho_wx: -0.1,
        })
        .unwrap();
        assert_relative_eq!(var_t1_factored(&m, 5.0), var_t1(&m, 5.0), max_relative = 1e-12);
        assert_relative_eq!(var_t2_factored(&m, 5.0), var_t2(&m, 5.0), max_relative = 1e-12);
    }

    #[test]
    fn degenerate_cases() {
        let m = MomentSet { c0sq: 0.0, c0c1: 0.0, ..forest(0.1) };
        assert_eq!(var_t0(&m, m.mean_y), 0.0);
        let m = MomentSet { c1sq: 0.0, c0c1: 0.0, ..forest(0.1) };
        assert_eq!(bias_t3(&m, m.mean_y), 0.0);
        assert_eq!(mse_t3(&m, m.mean_y), var_t0(&m, m.mean_y));
        // bias vanishes where C0C1 = 3 C1^2 / 4
        let m = MomentSet { c0c1: 0.75 * forest(0.1).c1sq, ..forest(0.1) };
        assert!(bias_t3(&m, m.mean_y).abs() < 1e-12);
    }

    #[test]
    fn uncorrelated_ratio_is_worse_than_mean() {
        let m = MomentSet { c0c1: 0.0, k_coef: 0.0, ..forest(0.2) };
        assert!(var_t1(&m, m.mean_y) > var_t0(&m, m.mean_y));
        assert_eq!(var_t1(&m, m.mean_y), var_t2(&m, m.mean_y));
    }

    #[test]
    fn quadratic_matches_a_form() {
        for rho_w in [0.0, 0.5, 0.95] {
            let m = forest(rho_w);
            let tc = optimal_constants(&m, m.mean_y, m.mean_x, 176).unwrap();
            for (k1, k2) in [(1.0, 0.0), (0.9, 40.0), (-0.3, 7.0), (tc.k1, tc.k2)] {
                let a = mse_t4_a_form(m.mean_y, &tc, k1, k2);
                let q = mse_t4(&m, m.mean_y, m.mean_x, 176, k1, k2);
                assert_relative_eq!(a, q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn t4_simple_points() {
        let m = forest(0.5);
        assert_relative_eq!(
            mse_t4(&m, m.mean_y, m.mean_x, 176, 0.0, 0.0),
            m.mean_y * m.mean_y,
            max_relative = 1e-15
        );
        let far = mse_t4(&m, m.mean_y, m.mean_x, 100_000_000, 1.0, 0.0);
        assert_relative_eq!(far, var_t0(&m, m.mean_y), max_relative = 1e-6);

        let tc = TransformConstants {
            k1: 0.0,
            k2: 0.0,
            ..optimal_constants(&m, m.mean_y, m.mean_x, 176).unwrap()
        };
        assert_relative_eq!(bias_t4(&m, m.mean_y, m.mean_x, &tc), -m.mean_y, max_relative = 1e-15);
        let flat = MomentSet { c1sq: 0.0, c0c1: 0.0, ..m };
        let tc = TransformConstants { k1: 1.0, k2: 0.0, ..tc };
        assert_eq!(bias_t4(&flat, m.mean_y, m.mean_x, &tc), 0.0);
    }

    #[test]
    fn minimum_is_consistent() {
        let m = forest(0.5);
        let (tc, best) = mse_t4_min(&m, m.mean_y, m.mean_x, 176).unwrap();
        assert_eq!(best, mse_t4(&m, m.mean_y, m.mean_x, 176, tc.k1, tc.k2));
        assert!(best <= mse_t4(&m, m.mean_y, m.mean_x, 176, 1.0, 0.0));
    }

    #[test]
    fn pre_table_shape() {
        let m = forest(0.5);
        let rows = pre_table(&m, m.mean_y, m.mean_x, 176).unwrap();
        let labels: Vec<_> = rows.iter().map(|r| r.estimator.label()).collect();
        assert_eq!(labels, ["t0", "t1", "t2", "t3", "t4"]);
        assert_eq!(rows[0].pre, 100.0);
        assert!(rows.iter().all(|r| r.status == RowStatus::Valid));
    }

    #[test]
    fn pre_table_flags_exact_estimator() {
        let pop = load_population((1..=12).map(|i| (3.0 * i as f64, i as f64))).unwrap();
        let m = moments_from_population(&pop, 3).unwrap();
        // y = 3x gives C0 = C1 = C0C1 up to rounding; pin it exactly
        let m = MomentSet { c0sq: m.c1sq, c0c1: m.c1sq, ..m };
        let rows = pre_table(&m, m.mean_y, m.mean_x, 12).unwrap();
        assert_eq!(rows[1].status, RowStatus::Exact);
        assert!(rows[1].pre.is_infinite());
    }
}
