//! Exact design evaluation and the tools built on it.
//!
//! A systematic design has only `k` possible samples, so the exact
//! expectation, bias and MSE of any estimator follow from evaluating it on
//! every start. That makes enumeration the reference against which the
//! first-order formulas in [`crate::theory`] are checked.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{enumerate_samples, SystematicSample};
use crate::error::{Error, Result};
use crate::estimators::{
    est_exp_ratio_t3, est_mean, est_product_t2, est_ratio_t1, est_transformed_t4,
    optimal_constants, Estimator,
};
use crate::population::{interval_k, load_population, moments_from_population, moments_from_summary, Population, SummaryStats};
use crate::theory;

/// An estimator together with whatever constants it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorSpec {
    Mean,
    Ratio,
    Product,
    ExpRatio,
    Transformed { cap_n: usize, k1: f64, k2: f64 },
}

impl EstimatorSpec {
    pub fn estimator(&self) -> Estimator {
        match self {
            EstimatorSpec::Mean => Estimator::Mean,
            EstimatorSpec::Ratio => Estimator::Ratio,
            EstimatorSpec::Product => Estimator::Product,
            EstimatorSpec::ExpRatio => Estimator::ExpRatio,
            EstimatorSpec::Transformed { .. } => Estimator::Transformed,
        }
    }

    pub fn apply(&self, s: &SystematicSample, mean_x: f64) -> Result<f64> {
        match *self {
            EstimatorSpec::Mean => Ok(est_mean(s)),
            EstimatorSpec::Ratio => est_ratio_t1(s, mean_x),
            EstimatorSpec::Product => est_product_t2(s, mean_x),
            EstimatorSpec::ExpRatio => est_exp_ratio_t3(s, mean_x),
            EstimatorSpec::Transformed { cap_n, k1, k2 } => {
                est_transformed_t4(s, mean_x, cap_n, k1, k2)
            }
        }
    }
}

/// Exact design moments of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments {
    pub estimator: Estimator,
    pub expectation: f64,
    /// `expectation - Ybar`.
    pub bias: f64,
    /// Mean squared deviation from the true `Ybar`, not from `expectation`.
    pub mse: f64,
    /// Estimator value for starts `1..=k`.
    pub per_start_values: Vec<f64>,
}

impl ExactMoments {
    /// Variance of the per-start values, divisor `k`.
    pub fn variance(&self) -> f64 {
        let k = self.per_start_values.len() as f64;
        self.per_start_values
            .iter()
            .map(|v| (v - self.expectation).powi(2))
            .sum::<f64>()
            / k
    }
}

/// Evaluates `spec` on every systematic sample of size `n`.
pub fn exact_design_eval(pop: &Population, n: usize, spec: EstimatorSpec) -> Result<ExactMoments> {
    let samples = enumerate_samples(pop, n)?;
    let mean_x = pop.mean_x();
    let mean_y = pop.mean_y();
    let per_start_values = samples
        .iter()
        .map(|s| {
            spec.apply(s, mean_x).map_err(|e| match e {
                Error::EstimatorDomain { estimator, reason } => Error::DomainAtStart {
                    estimator,
                    start: s.start,
                    reason,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let k = per_start_values.len() as f64;
    let expectation = per_start_values.iter().sum::<f64>() / k;
    let mse = per_start_values.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / k;
    Ok(ExactMoments {
        estimator: spec.estimator(),
        expectation,
        bias: expectation - mean_y,
        mse,
        per_start_values,
    })
}

/// Denominator floor for relative errors against an exact value of zero.
pub const REL_ERROR_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub theory: f64,
    pub exact: f64,
    /// `|theory - exact| / max(|exact|, 1e-300)`.
    pub rel_error: f64,
}

impl Comparison {
    pub fn new(theory: f64, exact: f64) -> Self {
        Comparison {
            theory,
            exact,
            rel_error: (theory - exact).abs() / exact.abs().max(REL_ERROR_FLOOR),
        }
    }
}

/// Theory against enumeration for one estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub estimator: Estimator,
    /// Variance (t0) or MSE.
    pub mse: Comparison,
    /// Present for estimators with a bias expression: t0 (zero), t3, t4.
    pub bias: Option<Comparison>,
}

/// Compares first-order theory with exact enumeration, `t4` at the optimal
/// constants of the population's own moments and `cap_n = N`.
pub fn compare_theory_exact(
    pop: &Population,
    n: usize,
    estimators: &[Estimator],
) -> Result<Vec<ComparisonRow>> {
    compare_theory_exact_with(pop, n, estimators, pop.size())
}

/// [`compare_theory_exact`] with an explicit transformation constant.
pub fn compare_theory_exact_with(
    pop: &Population,
    n: usize,
    estimators: &[Estimator],
    cap_n: usize,
) -> Result<Vec<ComparisonRow>> {
    let m = moments_from_population(pop, n)?;
    let (ybar, xbar) = (pop.mean_y(), pop.mean_x());
    let mut rows = Vec::with_capacity(estimators.len());
    for &estimator in estimators {
        let row = match estimator {
            Estimator::Mean => {
                let exact = exact_design_eval(pop, n, EstimatorSpec::Mean)?;
                ComparisonRow {
                    estimator,
                    mse: Comparison::new(theory::var_t0(&m, ybar), exact.mse),
                    bias: Some(Comparison::new(0.0, exact.bias)),
                }
            }
            Estimator::Ratio => {
                let exact = exact_design_eval(pop, n, EstimatorSpec::Ratio)?;
                ComparisonRow {
                    estimator,
                    mse: Comparison::new(theory::var_t1(&m, ybar), exact.mse),
                    bias: None,
                }
            }
            Estimator::Product => {
                let exact = exact_design_eval(pop, n, EstimatorSpec::Product)?;
                ComparisonRow {
                    estimator,
                    mse: Comparison::new(theory::var_t2(&m, ybar), exact.mse),
                    bias: None,
                }
            }
            Estimator::ExpRatio => {
                let exact = exact_design_eval(pop, n, EstimatorSpec::ExpRatio)?;
                ComparisonRow {
                    estimator,
                    mse: Comparison::new(theory::mse_t3(&m, ybar), exact.mse),
                    bias: Some(Comparison::new(theory::bias_t3(&m, ybar), exact.bias)),
                }
            }
            Estimator::Transformed => {
                let tc = optimal_constants(&m, ybar, xbar, cap_n)?;
                let spec = EstimatorSpec::Transformed {
                    cap_n,
                    k1: tc.k1,
                    k2: tc.k2,
                };
                let exact = exact_design_eval(pop, n, spec)?;
                ComparisonRow {
                    estimator,
                    mse: Comparison::new(
                        theory::mse_t4(&m, ybar, xbar, cap_n, tc.k1, tc.k2),
                        exact.mse,
                    ),
                    bias: Some(Comparison::new(theory::bias_t4(&m, ybar, xbar, &tc), exact.bias)),
                }
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Unit ordering of a generated population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arrangement {
    /// Random order; intraclass correlation near `-1/(N-1)`.
    Shuffled,
    /// Ascending `x`; each sample spans the range, so `rho_w < 0`.
    SortedByX,
    /// `k` distinct units repeated `n` times; every sample is constant, so
    /// `rho_w = 1`.
    Periodic,
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arrangement::Shuffled => "shuffled",
            Arrangement::SortedByX => "sorted_by_x",
            Arrangement::Periodic => "periodic",
        })
    }
}

impl FromStr for Arrangement {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "shuffled" => Ok(Arrangement::Shuffled),
            "sorted_by_x" => Ok(Arrangement::SortedByX),
            "periodic" => Ok(Arrangement::Periodic),
            other => Err(format!(
                "unknown arrangement `{other}` (expected shuffled, sorted_by_x or periodic)"
            )),
        }
    }
}

/// Recipe for a synthetic bivariate population.
///
/// The generated population hits its targets exactly: `S_y / Ybar = cv_y`,
/// `S_x / Xbar = cv_x` and correlation `rho`, all with divisor `N - 1`.
/// Draws are antithetic (`z` and `-z` both appear), so odd central moments
/// of the standardized scores vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub size: usize,
    pub n: usize,
    pub rho: f64,
    pub cv_y: f64,
    pub cv_x: f64,
    pub arrangement: Arrangement,
    pub mean_y: f64,
    pub mean_x: f64,
}

impl PopulationSpec {
    pub const DEFAULT_MEAN_Y: f64 = 100.0;
    pub const DEFAULT_MEAN_X: f64 = 10.0;

    pub fn new(size: usize, n: usize, rho: f64, cv_y: f64, cv_x: f64, arrangement: Arrangement) -> Self {
        PopulationSpec {
            size,
            n,
            rho,
            cv_y,
            cv_x,
            arrangement,
            mean_y: Self::DEFAULT_MEAN_Y,
            mean_x: Self::DEFAULT_MEAN_X,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Population> {
        let k = interval_k(self.size, self.n)?;
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(Error::Infeasible(format!("rho = {} outside [-1, 1]", self.rho)));
        }
        for (name, v) in [("cv_y", self.cv_y), ("cv_x", self.cv_x), ("mean_y", self.mean_y), ("mean_x", self.mean_x)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Infeasible(format!("{name} must be positive, got {v}")));
            }
        }
        let distinct = match self.arrangement {
            Arrangement::Periodic => k,
            _ => self.size,
        };
        if distinct < 4 {
            return Err(Error::Infeasible(format!(
                "{} arrangement needs at least 4 distinct units, got {distinct}",
                self.arrangement
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = distinct / 2;
        let draws: Vec<(f64, f64)> = (0..half)
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut base: Vec<(f64, f64)> = draws
            .iter()
            .copied()
            .chain(draws.iter().map(|&(a, b)| (-a, -b)))
            .collect();
        if distinct % 2 == 1 {
            base.push((0.0, 0.0));
        }

        let scores: Vec<(f64, f64)> = match self.arrangement {
            Arrangement::Shuffled => {
                base.shuffle(&mut rng);
                base
            }
            Arrangement::SortedByX => {
                base.sort_by(|a, b| a.0.total_cmp(&b.0));
                base
            }
            Arrangement::Periodic => base.iter().copied().cycle().take(self.size).collect(),
        };

        let (z1, z2): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
        let a = standardize(center(z1), self.size)
            .ok_or_else(|| Error::Infeasible("degenerate draw".into()))?;
        let z2 = center(z2);
        let proj = dot(&z2, &a) / dot(&a, &a);
        let resid: Vec<f64> = z2.iter().zip(&a).map(|(v, u)| v - proj * u).collect();
        let b = standardize(resid, self.size)
            .ok_or_else(|| Error::Infeasible("degenerate draw".into()))?;

        let tail = (1.0 - self.rho * self.rho).sqrt();
        let units: Vec<(f64, f64)> = a
            .iter()
            .zip(&b)
            .map(|(&za, &zb)| {
                let zy = self.rho * za + tail * zb;
                (self.mean_y * (1.0 + self.cv_y * zy), self.mean_x * (1.0 + self.cv_x * za))
            })
            .collect();
        if units.iter().any(|&(y, x)| !(y > 0.0 && x > 0.0)) {
            return Err(Error::Infeasible(
                "coefficients of variation too large to keep every value positive".into(),
            ));
        }
        load_population(units)
    }
}

fn center(mut v: Vec<f64>) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
    v
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales centered `v` to unit variance with divisor `len - 1`.
fn standardize(v: Vec<f64>, len: usize) -> Option<Vec<f64>> {
    let ss = dot(&v, &v);
    if !(ss > 1e-24 * len as f64) {
        return None;
    }
    let scale = ((len - 1) as f64 / ss).sqrt();
    Some(v.into_iter().map(|x| x * scale).collect())
}

/// Generates a synthetic population with default means (`Ybar = 100`,
/// `Xbar = 10`). See [`PopulationSpec`].
pub fn generate_population(
    size: usize,
    n: usize,
    rho_target: f64,
    cv_y: f64,
    cv_x: f64,
    arrangement: Arrangement,
    seed: u64,
) -> Result<Population> {
    PopulationSpec::new(size, n, rho_target, cv_y, cv_x, arrangement).generate(seed)
}

/// PRE value `t4` is matched against in a sweep.
pub const REFERENCE_PRE_T4: f64 = 468.68;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho_w: f64,
    pub pre_t1: f64,
    pub pre_t2: f64,
    pub pre_t3: f64,
    /// `None` when the optimum could not be computed at this point.
    pub pre_t4: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    /// Why the row has no `t4` value.
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub target: f64,
    /// Index of the row whose `pre_t4` is closest to `target`.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best.map(|i| &self.rows[i])
    }
}

/// PRE of `t1..t4` as the common intraclass correlation `rho_w = rho_wy = rho_wx`
/// runs over `grid`, with the row nearest [`REFERENCE_PRE_T4`] marked.
///
/// Rows are computed in parallel and returned in grid order; a failed `t4`
/// optimum flags its row without stopping the sweep.
pub fn rho_sweep_t4(s: &SummaryStats, grid: &[f64], cap_n: usize) -> Result<SweepResult> {
    s.interval_k()?;
    let lower = if s.n > 1 { -1.0 / (s.n as f64 - 1.0) } else { f64::NEG_INFINITY };
    if let Some(&bad) = grid.iter().find(|&&r| !(r > lower && r <= 1.0)) {
        return Err(Error::InvalidSummary(format!(
            "grid value {bad} outside ({lower}, 1]"
        )));
    }
    let rows = grid
        .par_iter()
        .map(|&rho_w| sweep_row(s, rho_w, cap_n))
        .collect::<Result<Vec<_>>>()?;
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.pre_t4.map(|p| (i, (p - REFERENCE_PRE_T4).abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(SweepResult {
        rows,
        target: REFERENCE_PRE_T4,
        best,
    })
}

fn sweep_row(s: &SummaryStats, rho_w: f64, cap_n: usize) -> Result<SweepRow> {
    let m = moments_from_summary(&s.with_intraclass(rho_w))?;
    let (ybar, xbar) = (s.mean_y, s.mean_x);
    let base = theory::var_t0(&m, ybar);
    let pre = |v: f64| 100.0 * base / v;
    let mut row = SweepRow {
        rho_w,
        pre_t1: pre(theory::var_t1(&m, ybar)),
        pre_t2: pre(theory::var_t2(&m, ybar)),
        pre_t3: pre(theory::mse_t3(&m, ybar)),
        pre_t4: None,
        k1: None,
        k2: None,
        flag: None,
    };
    match theory::mse_t4_min(&m, ybar, xbar, cap_n) {
        Ok((tc, mse)) if mse > 0.0 => {
            row.pre_t4 = Some(pre(mse));
            row.k1 = Some(tc.k1);
            row.k2 = Some(tc.k2);
        }
        Ok((_, mse)) => row.flag = Some(format!("non-positive t4 MSE {mse:e}")),
        Err(e) => row.flag = Some(e.to_string()),
    }
    Ok(row)
}

/// Points `lo, lo + step, ...` up to and including `hi` when `hi` lies on the
/// step (within `1e-9` of a step).
pub fn inclusive_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(Error::InvalidSummary(format!(
            "grid {lo}:{hi}:{step} needs finite lo <= hi and step > 0"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::intraclass_correlation;
    use approx::assert_relative_eq;

    fn diag(values: &[f64]) -> Population {
        load_population(values.iter().map(|&v| (v, v))).unwrap()
    }

    #[test]
    fn mean_is_design_unbiased() {
        let pop = load_population((1..=30).map(|i| ((i * i % 17) as f64 + 0.5, i as f64))).unwrap();
        let ex = exact_design_eval(&pop, 5, EstimatorSpec::Mean).unwrap();
        assert!(ex.bias.abs() <= 1e-12 * pop.mean_y().abs());
        assert_eq!(ex.per_start_values.len(), 6);
    }

    #[test]
    fn worked_example_t3() {
        let ex = exact_design_eval(&diag(&[1.0, 2.0, 3.0, 4.0]), 2, EstimatorSpec::ExpRatio).unwrap();
        let v = [2.0 * (0.5f64 / 4.5).exp(), 3.0 * (-0.5f64 / 5.5).exp()];
        assert_eq!(ex.per_start_values, v);
        assert!((ex.expectation - 2.487170).abs() < 1e-6);
        assert!((ex.bias + 0.012830).abs() < 1e-6);
        assert!((ex.mse - 0.063735).abs() < 1e-6);
        assert_relative_eq!(ex.mse, ex.bias.powi(2) + ex.variance(), max_relative = 1e-12);
    }

    #[test]
    fn proportional_population_makes_ratio_exact() {
        let pop = load_population((1..=20).map(|i| (2.0 * i as f64, i as f64))).unwrap();
        let ex = exact_design_eval(&pop, 4, EstimatorSpec::Ratio).unwrap();
        assert_eq!(ex.mse, 0.0);
        let rows = compare_theory_exact(&pop, 4, &[Estimator::Ratio]).unwrap();
        assert_eq!(rows[0].mse.exact, 0.0);
        assert!(rows[0].mse.theory.abs() < 1e-12);
    }

    #[test]
    fn domain_violation_names_start() {
        let pop = load_population([(1.0, -1.0), (1.0, 1.0), (2.0, 1.0), (2.0, 3.0)]).unwrap();
        let err = exact_design_eval(&pop, 2, EstimatorSpec::Ratio).unwrap_err();
        assert_eq!(
            err,
            Error::DomainAtStart {
                estimator: Estimator::Ratio,
                start: 1,
                reason: "sample mean of x is zero"
            }
        );
    }

    #[test]
    fn mean_row_is_exact() {
        let pop = generate_population(60, 6, 0.6, 0.2, 0.3, Arrangement::Shuffled, 4).unwrap();
        let rows = compare_theory_exact(&pop, 6, &Estimator::ALL).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows[0].mse.rel_error <= 1e-9);
    }

    #[test]
    fn generator_hits_targets() {
        for arrangement in [Arrangement::Shuffled, Arrangement::SortedByX, Arrangement::Periodic] {
            let pop = generate_population(120, 10, 0.7, 0.1, 0.2, arrangement, 11).unwrap();
            let s = SummaryStats::from_population(&pop, 10).unwrap();
            assert_relative_eq!(s.rho, 0.7, max_relative = 1e-9);
            assert_relative_eq!(s.s2_y.sqrt() / s.mean_y, 0.1, max_relative = 1e-9);
            assert_relative_eq!(s.s2_x.sqrt() / s.mean_x, 0.2, max_relative = 1e-9);
            assert!(pop.units().iter().all(|u| u.x > 0.0 && u.y > 0.0));
        }
    }

    #[test]
    fn arrangements_shape_intraclass_correlation() {
        let sorted = generate_population(20, 4, 0.8, 0.1, 0.1, Arrangement::SortedByX, 1).unwrap();
        assert!(intraclass_correlation(&sorted.xs(), 4, 5).unwrap() < 0.0);
        let periodic = generate_population(40, 4, 0.8, 0.1, 0.1, Arrangement::Periodic, 1).unwrap();
        let r = intraclass_correlation(&periodic.xs(), 4, 10).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_population(50, 5, 0.3, 0.1, 0.1, Arrangement::Shuffled, 77).unwrap();
        let b = generate_population(50, 5, 0.3, 0.1, 0.1, Arrangement::Shuffled, 77).unwrap();
        let c = generate_population(50, 5, 0.3, 0.1, 0.1, Arrangement::Shuffled, 78).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn generator_rejects_infeasible() {
        assert!(matches!(
            generate_population(50, 5, 0.3, 3.0, 0.1, Arrangement::Shuffled, 1),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            generate_population(50, 7, 0.3, 0.1, 0.1, Arrangement::Shuffled, 1),
            Err(Error::NotDivisible { .. })
        ));
        assert!(matches!(
            generate_population(12, 4, 0.3, 0.1, 0.1, Arrangement::Periodic, 1),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(inclusive_grid(0.0, 0.9, 0.01).unwrap().len(), 91);
        assert_eq!(inclusive_grid(0.0, 0.95, 0.1).unwrap().len(), 10);
        assert_eq!(inclusive_grid(0.5, 0.5, 0.1).unwrap(), vec![0.5]);
        assert!(inclusive_grid(0.0, 1.0, 0.0).is_err());
        assert!(inclusive_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn sweep_rejects_out_of_range_grid() {
        let s = SummaryStats {
            population_size: 176,
            n: 16,
            mean_y: 282.6136,
            mean_x: 6.9943,
            s2_y: 24114.67,
            s2_x: 8.76,
            rho: 0.871,
            rho_wy: 0.0,
            rho_wx: 0.0,
        };
        assert!(rho_sweep_t4(&s, &[-1.0 / 15.0], 176).is_err());
        assert!(rho_sweep_t4(&s, &[1.01], 176).is_err());
        let r = rho_sweep_t4(&s, &[0.0, 0.5, 1.0], 176).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.best, Some(2));
    }
}
