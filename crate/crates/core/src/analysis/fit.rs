//! Convergence fits on a trace.
//!
//! The distance limit is estimated by choosing `a` and `b` so that
//! `y = |ln(D² - a)|^b` is as linear as possible in the success count, as
//! measured by the sample correlation. The number of successes is also fit
//! as a power of the number of trials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gilbert::{Trace, TraceRecord};

/// Default subsampling stride, keeping records with `c_s % stride == 0`.
pub const DEFAULT_STRIDE: u64 = 100;
/// Minimum number of points a fit needs.
pub const MIN_POINTS: usize = 10;

const A_GRID: usize = 200;
const B_GRID: usize = 96;
const B_MIN: f64 = 1.0;
const B_MAX: f64 = 20.0;
const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationFit {
    /// Estimated limit of D².
    pub a: f64,
    pub b: f64,
    /// Correlation achieved at (a, b).
    pub r: f64,
    pub subsample_stride: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    /// Exponent in c_s ∝ c_t^f.
    pub f: f64,
    /// Prefactor.
    pub c: f64,
    /// Coefficient of determination of the log-log line.
    pub r2: f64,
}

/// Pearson sample correlation (<xy> - <x><y>) / sqrt(var x · var y).
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Parameter(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Parameter("need at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let (dx, dy) = (xi - mx, yi - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0) || !(syy > 0.0) {
        return Err(Error::Degenerate("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Records kept by the stride, as (index, d2) with consecutive indices.
fn strided(trace: &[TraceRecord], stride: u64) -> Result<Vec<f64>> {
    if stride == 0 {
        return Err(Error::Parameter("stride must be >= 1".into()));
    }
    let d2: Vec<f64> = trace
        .iter()
        .filter(|r| r.c_s % stride == 0)
        .map(|r| r.d2)
        .collect();
    if d2.len() < MIN_POINTS {
        return Err(Error::Parameter(format!(
            "{} points after striding by {stride}, need {MIN_POINTS}",
            d2.len()
        )));
    }
    if d2.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Validation("D² must decrease strictly".into()));
    }
    if !(d2[d2.len() - 1] > 0.0) {
        return Err(Error::Validation("D² must stay positive".into()));
    }
    Ok(d2)
}

/// Correlation of the success index with |ln(d2 - a)|^b.
struct Objective<'a> {
    d2: &'a [f64],
    x: Vec<f64>,
    logs: Vec<f64>,
    y: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(d2: &'a [f64]) -> Self {
        let n = d2.len();
        Self {
            d2,
            x: (1..=n).map(|i| i as f64).collect(),
            logs: vec![0.0; n],
            y: vec![0.0; n],
        }
    }

    fn set_a(&mut self, a: f64) {
        for (l, &d) in self.logs.iter_mut().zip(self.d2) {
            *l = (d - a).ln().abs().ln();
        }
    }

    fn r_for_b(&mut self, b: f64) -> f64 {
        for (y, &l) in self.y.iter_mut().zip(&self.logs) {
            *y = (b * l).exp();
        }
        correlation(&self.x, &self.y).unwrap_or(f64::NEG_INFINITY)
    }

    fn r(&mut self, a: f64, b: f64) -> f64 {
        self.set_a(a);
        self.r_for_b(b)
    }
}

/// Candidate values of `a` in [0, m): zero, a log-spaced run up from the
/// origin and a run whose gap to `m` shrinks logarithmically.
fn a_grid(m: f64) -> Vec<f64> {
    let half = A_GRID / 2;
    let mut grid = vec![0.0];
    for i in 0..half {
        let t = i as f64 / (half - 1) as f64;
        grid.push(m * 10f64.powf(-6.0 + t * (6.0 - 2f64.log10())));
    }
    for i in 1..half {
        let t = i as f64 / (half - 1) as f64;
        grid.push(m - m * 10f64.powf(-2f64.log10() - t * (6.0 - 2f64.log10())));
    }
    grid
}

/// Fits the extrapolation model on the records with `c_s % stride == 0`.
pub fn fit_extrapolation(trace: &Trace, stride: u64) -> Result<ExtrapolationFit> {
    fit_extrapolation_records(trace.records(), stride)
}

pub fn fit_extrapolation_records(records: &[TraceRecord], stride: u64) -> Result<ExtrapolationFit> {
    let d2 = strided(records, stride)?;
    let m = d2[d2.len() - 1];
    let mut obj = Objective::new(&d2);

    let b_step = (B_MAX - B_MIN) / (B_GRID - 1) as f64;
    let (mut best_a, mut best_b, mut best_r) = (0.0, B_MIN, f64::NEG_INFINITY);
    for a in a_grid(m) {
        obj.set_a(a);
        for j in 0..B_GRID {
            let b = B_MIN + j as f64 * b_step;
            let r = obj.r_for_b(b);
            if r > best_r {
                (best_a, best_b, best_r) = (a, b, r);
            }
        }
    }

    // Coordinate refinement. `a` moves in terms of its gap to m so that the
    // step can resolve values close to the singularity.
    let mut gap = m - best_a;
    let mut step_gap = (gap * 0.5).max(m * 1e-6);
    let mut step_b = b_step;
    let eval = |obj: &mut Objective, gap: f64, b: f64| -> f64 {
        if !(gap > 0.0) || gap > m || !(B_MIN..=B_MAX).contains(&b) {
            f64::NEG_INFINITY
        } else {
            obj.r(m - gap, b)
        }
    };
    for _ in 0..10_000 {
        let mut moved = false;
        for (dg, db) in [
            (step_gap, 0.0),
            (-step_gap, 0.0),
            (0.0, step_b),
            (0.0, -step_b),
        ] {
            // gap is searched multiplicatively near zero
            let cand_gap = if dg > 0.0 {
                gap + dg.min(m - gap)
            } else if dg < 0.0 {
                gap + dg.max(-0.5 * gap)
            } else {
                gap
            };
            let r = eval(&mut obj, cand_gap, best_b + db);
            if r > best_r {
                best_r = r;
                gap = cand_gap;
                best_b += db;
                moved = true;
            }
        }
        if !moved {
            step_gap *= 0.5;
            step_b *= 0.5;
            if step_gap < REFINE_TOL * m && step_b < REFINE_TOL {
                break;
            }
        }
    }
    best_a = (m - gap).max(0.0);

    Ok(ExtrapolationFit {
        a: best_a,
        b: best_b,
        r: best_r,
        subsample_stride: stride,
    })
}

/// Least-squares line through (ln c_t, ln c_s).
pub fn fit_power(trace: &Trace) -> Result<PowerFit> {
    fit_power_records(trace.records())
}

pub fn fit_power_records(records: &[TraceRecord]) -> Result<PowerFit> {
    if records.iter().any(|r| r.c_t == 0 || r.c_s == 0) {
        return Err(Error::Validation("counters must be positive".into()));
    }
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.c_t as f64, r.c_s as f64))
        .collect();
    fit_power_pairs(&pairs)
}

/// Power-law fit on real-valued (c_t, c_s) pairs.
pub fn fit_power_pairs(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    if pairs.len() < MIN_POINTS {
        return Err(Error::Parameter(format!(
            "{} points, need {MIN_POINTS}",
            pairs.len()
        )));
    }
    if pairs.iter().any(|&(t, s)| !(t > 0.0) || !(s > 0.0)) {
        return Err(Error::Validation("counters must be positive".into()));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(&y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all trial counts equal".into()));
    }
    let f = sxy / sxx;
    let intercept = my - f * mx;
    let ss_res: f64 = x
        .iter()
        .zip(&y)
        .map(|(&xi, &yi)| (yi - intercept - f * xi).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(PowerFit {
        f,
        c: intercept.exp(),
        r2,
    })
}
