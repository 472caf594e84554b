//! Ratio of the replace-one CV standard error to the true standard deviation
//! of the 5-fold CV estimate, for `y = x + e`, `x ~ N(0, 1)`, `e ~ N(0, 0.2^2)`,
//! least squares and squared loss.
//!
//! Least squares in one feature only needs five sums per fold, so each
//! replaced CV costs `O(K)` instead of `K - 1` refits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{usage, Result};
use crate::evaluation::{mean, sample_variance};
use crate::inference::{rocv_sigma, ReplaceOneEstimates, RocvVariant};
use crate::resampling::{generate_plan, Scheme, SchemeSpec};
use crate::rng::{self, domain};

pub const NOISE_SD: f64 = 0.2;
pub const FOLDS: usize = 5;
pub const SIZES: [usize; 4] = [500, 1000, 5000, 10000];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AzcheckRow {
    pub n: usize,
    pub ratio_uncorrected: f64,
    pub ratio_corrected: f64,
    pub sd_cv: f64,
    pub mean_se_uncorrected: f64,
    pub mean_se_corrected: f64,
    pub outer_reps: usize,
    pub estimator_reps: usize,
}

/// Draws `n` rows of the linear model for replicate `rep`.
pub fn simulate(seed: u64, n: usize, rep: u64) -> Dataset {
    let mut rng = rng::stream(seed, &[domain::AZCHECK, n as u64, rep]);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi = rng::standard_normal(&mut rng);
        x.push(xi);
        y.push(xi + NOISE_SD * rng::standard_normal(&mut rng));
    }
    Dataset::new(x, 1, y, Task::Regression).expect("finite simulated data")
}

/// Sums over a set of rows.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Sums {
    fn row(x: f64, y: f64) -> Self {
        Sums { n: 1.0, x, y, xx: x * x, xy: x * y, yy: y * y }
    }

    fn of(data: &Dataset, rows: &[usize]) -> Self {
        rows.iter().fold(Sums::default(), |s, &i| s + Sums::row(data.row(i)[0], data.target()[i]))
    }

    /// Least-squares `(intercept, slope)`; a flat design gives the mean.
    fn fit(&self) -> (f64, f64) {
        let (mx, my) = (self.x / self.n, self.y / self.n);
        let sxx = self.xx - self.n * mx * mx;
        let sxy = self.xy - self.n * mx * my;
        let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        (my - b * mx, b)
    }

    /// Sum of squared residuals of `(a, b)` over these rows.
    fn sse(&self, (a, b): (f64, f64)) -> f64 {
        self.yy - 2.0 * a * self.y - 2.0 * b * self.xy + self.n * a * a + 2.0 * a * b * self.x + b * b * self.xx
    }
}

impl std::ops::Add for Sums {
    type Output = Sums;
    fn add(self, o: Sums) -> Sums {
        Sums { n: self.n + o.n, x: self.x + o.x, y: self.y + o.y, xx: self.xx + o.xx, xy: self.xy + o.xy, yy: self.yy + o.yy }
    }
}

impl std::ops::Sub for Sums {
    type Output = Sums;
    fn sub(self, o: Sums) -> Sums {
        Sums { n: self.n - o.n, x: self.x - o.x, y: self.y - o.y, xx: self.xx - o.xx, xy: self.xy - o.xy, yy: self.yy - o.yy }
    }
}

/// K-fold CV estimate from the test folds (row ids).
fn cv_from_folds(data: &Dataset, folds: &[Vec<usize>]) -> f64 {
    let sums: Vec<Sums> = folds.iter().map(|f| Sums::of(data, f)).collect();
    let total = sums.iter().fold(Sums::default(), |a, &b| a + b);
    sums.iter().map(|&t| t.sse((total - t).fit())).sum::<f64>() / total.n
}

/// 5-fold CV estimate of least squares on `data`.
pub fn cv_estimate(data: &Dataset, seed: u64, stream: u64) -> Result<f64> {
    let plan = generate_plan(&SchemeSpec::new(Scheme::KfoldCv { k: FOLDS }, seed), data.n_rows(), stream)?;
    let folds: Vec<Vec<usize>> = plan.pairs().iter().map(|p| p.test.clone()).collect();
    Ok(cv_from_folds(data, &folds))
}

/// Replace-one CV estimates of least squares on `data`.
pub fn replace_one_estimates(data: &Dataset, seed: u64, stream: u64) -> Result<ReplaceOneEstimates> {
    let plan = generate_plan(&SchemeSpec::new(Scheme::Rocv { k: FOLDS }, seed), data.n_rows(), stream)?;
    let ro = plan.replace_one().expect("replace-one layout");
    let half = ro.half_size() as f64;
    let folds = &ro.folds[0];
    let test: Vec<Sums> = folds.iter().map(|f| f.iter().fold(Sums::default(), |s, &p| s + Sums::of(data, &[ro.d1[p]]))).collect();
    let total = test.iter().fold(Sums::default(), |a, &b| a + b);
    let models: Vec<(f64, f64)> = test.iter().map(|&t| (total - t).fit()).collect();
    let sse: Vec<f64> = test.iter().zip(&models).map(|(t, &m)| t.sse(m)).collect();
    let base = sse.iter().sum::<f64>() / half;
    let fold_of = ro.fold_of(0);
    let replaced = (0..ro.half_size())
        .map(|l| {
            let delta = Sums::of(data, &[ro.d2[l]]) - Sums::of(data, &[ro.d1[l]]);
            let new_total = total + delta;
            let f = fold_of[l];
            let sum: f64 = (0..folds.len())
                .map(|k| if k == f { (test[k] + delta).sse(models[k]) } else { test[k].sse((new_total - test[k]).fit()) })
                .sum();
            sum / half
        })
        .collect();
    Ok(ReplaceOneEstimates { base, replaced })
}

/// Runs the check for one sample size.
pub fn run_azcheck_n(seed: u64, n: usize, outer_reps: usize, estimator_reps: usize) -> Result<AzcheckRow> {
    if outer_reps < 2 || estimator_reps < 1 {
        return Err(usage!("azcheck needs at least 2 outer and 1 estimator replications"));
    }
    let points = (0..outer_reps)
        .into_par_iter()
        .map(|r| cv_estimate(&simulate(seed, n, r as u64), seed, r as u64))
        .collect::<Result<Vec<_>>>()?;
    let ses = (0..estimator_reps)
        .into_par_iter()
        .map(|e| {
            let stream = (outer_reps + e) as u64;
            let est = replace_one_estimates(&simulate(seed, n, stream), seed, stream)?;
            let se = |v| rocv_sigma(n, &est, v).map(|s| s / (n as f64).sqrt());
            Ok((se(RocvVariant::Uncorrected)?, se(RocvVariant::Corrected)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let sd_cv = sample_variance(&points).sqrt();
    let mean_se_uncorrected = mean(&ses.iter().map(|s| s.0).collect::<Vec<_>>());
    let mean_se_corrected = mean(&ses.iter().map(|s| s.1).collect::<Vec<_>>());
    Ok(AzcheckRow {
        n,
        ratio_uncorrected: mean_se_uncorrected / sd_cv,
        ratio_corrected: mean_se_corrected / sd_cv,
        sd_cv,
        mean_se_uncorrected,
        mean_se_corrected,
        outer_reps,
        estimator_reps,
    })
}

pub fn run_azcheck(seed: u64, sizes: &[usize], outer_reps: usize, estimator_reps: usize) -> Result<Vec<AzcheckRow>> {
    sizes.iter().map(|&n| run_azcheck_n(seed, n, outer_reps, estimator_reps)).collect()
}
