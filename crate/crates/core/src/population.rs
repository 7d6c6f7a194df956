//! Population data model and the design moments derived from it.
//!
//! A [`Population`] is an ordered list of `(y, x)` units. Order is part of the
//! data: the systematic sample with start `i` takes units `i, i+k, i+2k, ...`,
//! so rearranging units changes every design moment except the means.
//!
//! Moments can be computed from raw units ([`moments_from_population`]) or from
//! published summary statistics ([`moments_from_summary`]). Both routes go
//! through [`SummaryStats`], so they agree to the last bit.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Variate};

/// One population unit: study value `y` and auxiliary value `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub y: f64,
    pub x: f64,
}

impl From<(f64, f64)> for Unit {
    fn from((y, x): (f64, f64)) -> Self {
        Unit { y, x }
    }
}

/// Ordered finite population of `(y, x)` units.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    units: Vec<Unit>,
}

/// Packs records into a [`Population`], preserving order.
///
/// Rejects empty input, fewer than two units, and non-finite values (the
/// reported row is 1-based).
pub fn load_population<I, U>(records: I) -> Result<Population>
where
    I: IntoIterator<Item = U>,
    U: Into<Unit>,
{
    let units: Vec<Unit> = records.into_iter().map(Into::into).collect();
    if units.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    if let Some(row) = units
        .iter()
        .position(|u| !u.y.is_finite() || !u.x.is_finite())
    {
        return Err(Error::NonFinite { row: row + 1 });
    }
    if units.len() < 2 {
        return Err(Error::TooFewUnits(units.len()));
    }
    Ok(Population { units })
}

impl Population {
    pub fn new(units: Vec<Unit>) -> Result<Self> {
        load_population(units)
    }

    /// Population size `N`.
    pub fn size(&self) -> usize {
        self.units.len()
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn ys(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.y).collect()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.x).collect()
    }

    pub fn mean_y(&self) -> f64 {
        mean(self.units.iter().map(|u| u.y), self.units.len())
    }

    pub fn mean_x(&self) -> f64 {
        mean(self.units.iter().map(|u| u.x), self.units.len())
    }

    /// Applies `f` to every unit, keeping order.
    pub fn map_units(&self, f: impl Fn(Unit) -> Unit) -> Result<Population> {
        load_population(self.units.iter().copied().map(f))
    }

    /// Reads the delimited population format: header `y,x`, one unit per row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Population> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 0,
                message: e.to_string(),
            })?
            .clone();
        if headers.len() != 2 || &headers[0] != "y" || &headers[1] != "x" {
            return Err(Error::Parse {
                row: 0,
                message: format!("expected header `y,x`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut units = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if record.len() != 2 {
                return Err(Error::Parse {
                    row,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let field = |j: usize| -> Result<f64> {
                record[j].parse::<f64>().map_err(|_| Error::Parse {
                    row,
                    message: format!("cannot parse `{}` as a number", &record[j]),
                })
            };
            units.push(Unit { y: field(0)?, x: field(1)? });
        }
        load_population(units)
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Population> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Population::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the population format. Values use the shortest representation
    /// that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "y,x")?;
        for u in &self.units {
            writeln!(writer, "{},{}", u.y, u.x)?;
        }
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>, len: usize) -> f64 {
    values.sum::<f64>() / len as f64
}

/// Sampling interval `k = N / n`, or an error when `n` does not divide `N`.
pub fn interval_k(population_size: usize, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::ZeroSampleSize);
    }
    if !population_size.is_multiple_of(n) {
        return Err(Error::NotDivisible {
            population: population_size,
            sample: n,
        });
    }
    Ok(population_size / n)
}

/// Within-sample intraclass correlation for a systematic design with `k`
/// samples of size `n`. Sample `i` holds positions `i, i+k, ..., i+(n-1)k`.
///
/// Computed as `sum_i [(sum_j d_ij)^2 - sum_j d_ij^2] / ((n-1) * sum d^2)`,
/// which is the sum over ordered within-sample pairs `j != u` of
/// `d_ij * d_iu`. With `n = 1` there are no pairs and the result is `0`.
pub fn intraclass_correlation(values: &[f64], n: usize, k: usize) -> Result<f64> {
    if n == 0 || k == 0 {
        return Err(Error::ZeroSampleSize);
    }
    if values.len() != n * k {
        return Err(Error::LengthMismatch {
            len: values.len(),
            expected: n * k,
        });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::ZeroVariance);
    }
    if n == 1 {
        return Ok(0.0);
    }
    let center = mean(values.iter().copied(), values.len());
    let total_ss: f64 = values.iter().map(|v| (v - center).powi(2)).sum();
    let mut within_pairs = 0.0;
    for start in 0..k {
        let (sum, sum_sq) = values[start..]
            .iter()
            .step_by(k)
            .map(|v| v - center)
            .fold((0.0, 0.0), |(s, q), d| (s + d, q + d * d));
        within_pairs += sum * sum - sum_sq;
    }
    Ok(within_pairs / ((n - 1) as f64 * total_ss))
}

/// Population summary in the form surveys usually publish it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    /// Population size `N`.
    pub population_size: usize,
    /// Sample size `n`.
    pub n: usize,
    pub mean_y: f64,
    pub mean_x: f64,
    /// `S_Y^2` with divisor `N - 1`.
    pub s2_y: f64,
    pub s2_x: f64,
    /// Correlation between `y` and `x`.
    pub rho: f64,
    /// Within-sample intraclass correlation of `y`.
    pub rho_wy: f64,
    /// Within-sample intraclass correlation of `x`.
    pub rho_wx: f64,
}

impl SummaryStats {
    /// Reads every summary quantity off a population for sample size `n`.
    pub fn from_population(pop: &Population, n: usize) -> Result<SummaryStats> {
        let k = interval_k(pop.size(), n)?;
        let ys = pop.ys();
        let xs = pop.xs();
        let mean_y = pop.mean_y();
        let mean_x = pop.mean_x();
        let denom = (pop.size() - 1) as f64;
        let (mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
        for u in pop.units() {
            let (dy, dx) = (u.y - mean_y, u.x - mean_x);
            syy += dy * dy;
            sxx += dx * dx;
            sxy += dy * dx;
        }
        let rho_wy = intraclass_correlation(&ys, n, k).map_err(|e| match e {
            Error::ZeroVariance => Error::DegenerateVariate(Variate::Study),
            other => other,
        })?;
        let rho_wx = intraclass_correlation(&xs, n, k).map_err(|e| match e {
            Error::ZeroVariance => Error::DegenerateVariate(Variate::Auxiliary),
            other => other,
        })?;
        Ok(SummaryStats {
            population_size: pop.size(),
            n,
            mean_y,
            mean_x,
            s2_y: syy / denom,
            s2_x: sxx / denom,
            rho: (sxy / (syy * sxx).sqrt()).clamp(-1.0, 1.0),
            rho_wy,
            rho_wx,
        })
    }

    /// Sampling interval `k = N / n`.
    pub fn interval_k(&self) -> Result<usize> {
        interval_k(self.population_size, self.n)
    }

    /// Same statistics with `rho_wy = rho_wx = rho_w`.
    pub fn with_intraclass(self, rho_w: f64) -> SummaryStats {
        SummaryStats {
            rho_wy: rho_w,
            rho_wx: rho_w,
            ..self
        }
    }
}

/// Design-moment quantities every first-order formula is written in.
///
/// `theta * c0sq`, `theta * c1sq` and `theta * c0c1` are `E(e0^2)`, `E(e1^2)`
/// and `E(e0 e1)` for the relative errors `e0 = (ybar* - Ybar)/Ybar` and
/// `e1 = (xbar* - Xbar)/Xbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// `(N - 1) / (N n)`.
    pub theta: f64,
    /// Squared coefficient of variation of `y`.
    pub cy2: f64,
    pub cx2: f64,
    /// `1 + (n - 1) rho_wy`.
    pub f_y: f64,
    /// `1 + (n - 1) rho_wx`.
    pub f_x: f64,
    pub c0sq: f64,
    pub c1sq: f64,
    pub c0c1: f64,
    /// `sqrt(f_y / f_x)`.
    pub rho_star: f64,
    /// `rho * C_y / C_x`.
    pub k_coef: f64,
    pub mean_y: f64,
    pub mean_x: f64,
}

/// Slack allowed on `1 + (n-1) rho_w >= 0` before rejecting; absorbs rounding
/// at the `rho_w = -1/(n-1)` boundary.
const VARIANCE_RATIO_SLACK: f64 = 1e-9;

fn variance_ratio(n: usize, rho_w: f64, variate: Variate) -> Result<f64> {
    let f = 1.0 + (n as f64 - 1.0) * rho_w;
    if !f.is_finite() || f < -VARIANCE_RATIO_SLACK {
        return Err(Error::InvalidSummary(format!(
            "1 + (n-1)*rho_w for the {variate} variate is {f}, must be >= 0"
        )));
    }
    Ok(f.max(0.0))
}

/// Derives the [`MomentSet`] from summary statistics.
pub fn moments_from_summary(s: &SummaryStats) -> Result<MomentSet> {
    s.interval_k()?;
    let finite = [s.mean_y, s.mean_x, s.s2_y, s.s2_x, s.rho, s.rho_wy, s.rho_wx];
    if finite.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSummary("non-finite value".into()));
    }
    if s.mean_y == 0.0 {
        return Err(Error::ZeroMean(Variate::Study));
    }
    if s.mean_x == 0.0 {
        return Err(Error::ZeroMean(Variate::Auxiliary));
    }
    if s.s2_y < 0.0 || s.s2_x < 0.0 {
        return Err(Error::InvalidSummary("negative variance".into()));
    }
    if s.s2_y == 0.0 {
        return Err(Error::DegenerateVariate(Variate::Study));
    }
    if s.s2_x == 0.0 {
        return Err(Error::DegenerateVariate(Variate::Auxiliary));
    }
    if !(-1.0..=1.0).contains(&s.rho) {
        return Err(Error::InvalidSummary(format!("rho = {} outside [-1, 1]", s.rho)));
    }
    let f_y = variance_ratio(s.n, s.rho_wy, Variate::Study)?;
    let f_x = variance_ratio(s.n, s.rho_wx, Variate::Auxiliary)?;

    let big_n = s.population_size as f64;
    let theta = (big_n - 1.0) / (big_n * s.n as f64);
    let cy2 = s.s2_y / (s.mean_y * s.mean_y);
    let cx2 = s.s2_x / (s.mean_x * s.mean_x);
    // Signed CV product so that E(e0 e1) keeps the sign of Cov(ybar*, xbar*)
    // when a mean is negative.
    let cycx = (s.s2_y * s.s2_x).sqrt() / (s.mean_y * s.mean_x);
    let k_coef = s.rho * (s.s2_y.sqrt() / s.mean_y) / (s.s2_x.sqrt() / s.mean_x);

    Ok(MomentSet {
        theta,
        cy2,
        cx2,
        f_y,
        f_x,
        c0sq: f_y * cy2,
        c1sq: f_x * cx2,
        c0c1: (f_y * f_x).sqrt() * s.rho * cycx,
        rho_star: (f_y / f_x).sqrt(),
        k_coef,
        mean_y: s.mean_y,
        mean_x: s.mean_x,
    })
}

/// Derives the [`MomentSet`] from raw units for sample size `n`.
///
/// Zero-variance variates are rejected per variate.
pub fn moments_from_population(pop: &Population, n: usize) -> Result<MomentSet> {
    moments_from_summary(&SummaryStats::from_population(pop, n)?)
}
