//! Confidence intervals for the generalization error, computed from loss tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{degenerate, usage, Result};
use crate::evaluation::{compensated_sum, mean, normal_quantile, sample_variance, sorted_quantile, t_quantile};
use crate::resampling::{Label, Role};

/// Losses of one train/test pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossEntry {
    pub label: Label,
    /// Test indices (row ids or frame positions), aligned with `losses`.
    pub test: Vec<usize>,
    pub losses: Vec<f64>,
    /// Multiplicity of every index in the training multiset (bootstrap family).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_counts: Option<Vec<u32>>,
    /// `(1/n^2) sum_i sum_j L(y_j, f(x_i))` for an in-sample fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub no_information: Option<f64>,
}

impl LossEntry {
    pub fn new(label: Label, test: Vec<usize>, losses: Vec<f64>) -> Self {
        Self { label, test, losses, train_counts: None, no_information: None }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.losses)
    }

    fn sum(&self) -> f64 {
        compensated_sum(self.losses.iter().copied())
    }
}

/// Per-pair losses of a split plan over data of size `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossTable {
    pub n: usize,
    pub entries: Vec<LossEntry>,
}

impl LossTable {
    pub fn new(n: usize, entries: Vec<LossEntry>) -> Result<Self> {
        for (b, e) in entries.iter().enumerate() {
            if e.test.len() != e.losses.len() {
                return Err(usage!("entry {b}: {} test indices but {} losses", e.test.len(), e.losses.len()));
            }
            if e.losses.iter().any(|v| !v.is_finite()) {
                return Err(degenerate!("entry {b} contains non-finite losses"));
            }
            if e.test.iter().any(|&i| i >= n) {
                return Err(usage!("entry {b} has a test index outside 0..{n}"));
            }
        }
        Ok(Self { n, entries })
    }

    /// Mean over every loss in the table.
    pub fn grand_mean(&self) -> f64 {
        let count: usize = self.entries.iter().map(|e| e.losses.len()).sum();
        compensated_sum(self.entries.iter().flat_map(|e| e.losses.iter().copied())) / count as f64
    }

    fn with_role(&self, role: Role) -> impl Iterator<Item = &LossEntry> {
        self.entries.iter().filter(move |e| e.label.role == role)
    }

    /// Entries grouped by repetition `r`, in order.
    fn by_rep(&self) -> BTreeMap<usize, Vec<&LossEntry>> {
        let mut out: BTreeMap<usize, Vec<&LossEntry>> = BTreeMap::new();
        for e in &self.entries {
            out.entry(e.label.r).or_default().push(e);
        }
        out
    }

    /// Sub-table of the entries of repetition `r`.
    pub fn rep(&self, r: usize) -> LossTable {
        LossTable { n: self.n, entries: self.entries.iter().filter(|e| e.label.r == r).cloned().collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub method: String,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    pub fits_used: usize,
}

impl IntervalEstimate {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn with_fits(mut self, fits: usize) -> Self {
        self.fits_used = fits;
        self
    }

    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(usage!("alpha must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

fn z(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    normal_quantile(1.0 - alpha / 2.0)
}

/// `center -/+ q * se` with `point` and `bias` reported as given.
fn wald(method: &str, point: f64, bias: Option<f64>, se: f64, q: f64, alpha: f64) -> IntervalEstimate {
    let center = point - bias.unwrap_or(0.0);
    IntervalEstimate {
        method: method.into(),
        point,
        lower: center - q * se,
        upper: center + q * se,
        alpha,
        se: Some(se),
        bias,
        fits_used: 0,
    }
}

/// Two-sided percentile interval of `values`, shifted down by `shift`.
pub fn percentile_bounds(values: &[f64], alpha: f64, shift: f64) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(usage!("percentile interval of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((sorted_quantile(&sorted, alpha / 2.0) - shift, sorted_quantile(&sorted, 1.0 - alpha / 2.0) - shift))
}

fn single_entry<'a>(table: &'a LossTable, what: &str) -> Result<&'a LossEntry> {
    match table.entries.as_slice() {
        [e] => Ok(e),
        other => Err(usage!("{what} expects a single split, got {}", other.len())),
    }
}

pub fn holdout_ci(table: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let e = single_entry(table, "holdout")?;
    let m = e.losses.len();
    if m < 2 {
        return Err(degenerate!("holdout needs at least 2 test observations, got {m}"));
    }
    let se = (sample_variance(&e.losses) / m as f64).sqrt();
    Ok(wald("holdout", e.mean(), None, se, z(alpha)?, alpha))
}

/// CV estimates of the base replace-one CV on `D1` and of each replaced CV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaceOneEstimates {
    pub base: f64,
    pub replaced: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RocvVariant {
    /// Factor `n/4`.
    Corrected,
    /// Factor `n/2` of the original proposal.
    Uncorrected,
}

/// `sigma_hat` of the replace-one variance estimate for data size `n`.
pub fn rocv_sigma(n: usize, est: &ReplaceOneEstimates, variant: RocvVariant) -> Result<f64> {
    if est.replaced.len() != n / 2 {
        return Err(usage!("replace-one CV needs floor(n/2) = {} replaced estimates, got {}", n / 2, est.replaced.len()));
    }
    let factor = match variant {
        RocvVariant::Corrected => n as f64 / 4.0,
        RocvVariant::Uncorrected => n as f64 / 2.0,
    };
    let ss = compensated_sum(est.replaced.iter().map(|p| (est.base - p) * (est.base - p)));
    Ok((factor * ss).sqrt())
}

/// Replace-one CV interval; `full` is the (repeated) K-fold CV on all data.
pub fn rocv_ci(
    full: &LossTable,
    est: &ReplaceOneEstimates,
    variant: RocvVariant,
    alpha: f64,
) -> Result<IntervalEstimate> {
    let n = full.n;
    let sigma = rocv_sigma(n, est, variant)?;
    Ok(wald("rocv", full.grand_mean(), None, sigma / (n as f64).sqrt(), z(alpha)?, alpha))
}

/// Repeated replace-one CV: [`rocv_ci`] with repeated-CV estimates.
pub fn hrcv_ci(full: &LossTable, est: &ReplaceOneEstimates, variant: RocvVariant, alpha: f64) -> Result<IntervalEstimate> {
    Ok(rocv_ci(full, est, variant, alpha)?.with_method("hrcv"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaldVariant {
    AllPairs,
    WithinFold,
}

pub fn cv_wald_ci(table: &LossTable, variant: WaldVariant, alpha: f64) -> Result<IntervalEstimate> {
    let n: usize = table.entries.iter().map(|e| e.losses.len()).sum();
    if n < 2 || table.entries.len() < 2 {
        return Err(degenerate!("CV Wald needs at least two folds and two losses"));
    }
    let point = table.grand_mean();
    let variance = match variant {
        WaldVariant::AllPairs => {
            compensated_sum(table.entries.iter().flat_map(|e| e.losses.iter().map(|v| (v - point) * (v - point))))
                / n as f64
        }
        WaldVariant::WithinFold => {
            if table.entries.iter().any(|e| e.losses.len() < 2) {
                return Err(usage!("within-fold variance needs every fold to hold at least 2 observations (not LOOCV)"));
            }
            let vars: Vec<f64> = table.entries.iter().map(|e| sample_variance(&e.losses)).collect();
            mean(&vars)
        }
    };
    let se = variance.sqrt() / (n as f64).sqrt();
    Ok(wald("cv_wald", point, None, se, z(alpha)?, alpha))
}

fn subsampling_point(table: &LossTable) -> f64 {
    let means: Vec<f64> = table.entries.iter().map(LossEntry::mean).collect();
    mean(&means)
}

/// Correction factor `1/K + n2/(n - n2)`.
pub fn corrected_t_factor(k: usize, n2: usize, n: usize) -> f64 {
    1.0 / k as f64 + n2 as f64 / (n - n2) as f64
}

pub fn corrected_t_ci(table: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let k = table.entries.len();
    if k < 2 {
        return Err(degenerate!("corrected resampled-t needs K >= 2 subsamples, got {k}"));
    }
    let n2 = table.entries[0].losses.len();
    if n2 == 0 || table.entries.iter().any(|e| e.losses.len() != n2) || n2 >= table.n {
        return Err(usage!("corrected resampled-t needs equal, non-empty test sets smaller than n"));
    }
    let means: Vec<f64> = table.entries.iter().map(LossEntry::mean).collect();
    let point = mean(&means);
    let se = (corrected_t_factor(k, n2, table.n) * sample_variance(&means)).sqrt();
    check_alpha(alpha)?;
    let q = t_quantile((k - 1) as f64, 1.0 - alpha / 2.0)?;
    Ok(wald("corrected_t", point, None, se, q, alpha))
}

/// `main` is the subsampling table, `paired` the paired-subsampling table
/// (`label.l` is the half).
pub fn conservative_z_ci(main: &LossTable, paired: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    if main.entries.is_empty() {
        return Err(usage!("conservative-Z needs at least one subsample"));
    }
    let point = subsampling_point(main);
    let reps = paired.by_rep();
    if reps.is_empty() {
        return Err(usage!("conservative-Z needs R >= 1 paired replicates"));
    }
    let mut ss = Vec::with_capacity(reps.len());
    for (r, entries) in &reps {
        let half = |t: usize| {
            let means: Vec<f64> = entries.iter().filter(|e| e.label.l == t).map(|e| e.mean()).collect();
            if means.is_empty() {
                Err(usage!("paired replicate {r} is missing half {t}"))
            } else {
                Ok(mean(&means))
            }
        };
        let d = half(0)? - half(1)?;
        ss.push(d * d);
    }
    let se = (compensated_sum(ss.iter().copied()) / (2.0 * reps.len() as f64)).sqrt();
    Ok(wald("conservative_z", point, None, se, z(alpha)?, alpha))
}

pub fn cv52_ci(table: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let reps = table.by_rep();
    let shape_ok = reps.len() == 5
        && reps.values().all(|e| e.len() == 2 && e.iter().map(|x| x.label.k).collect::<Vec<_>>() == [0, 1]);
    if !shape_ok {
        return Err(usage!("5x2 CV needs exactly 5 repetitions of 2-fold CV"));
    }
    let point = reps[&0][0].mean();
    let terms = reps.values().map(|e| {
        let d = e[0].mean() / 2.0 - e[1].mean() / 2.0;
        d * d
    });
    let se = (0.4 * compensated_sum(terms)).sqrt();
    check_alpha(alpha)?;
    let q = t_quantile(5.0, 1.0 - alpha / 2.0)?;
    Ok(wald("cv52", point, None, se, q, alpha))
}

/// Intermediate quantities of the nested CV interval.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedCvParts {
    pub point: f64,
    pub outer_cv: f64,
    pub sigma_in: f64,
    pub mse: f64,
    pub se: f64,
    pub bias: f64,
}

pub fn nested_cv_parts(table: &LossTable, c: f64) -> Result<NestedCvParts> {
    let n = table.n as f64;
    let outer: Vec<&LossEntry> = table.with_role(Role::Outer).collect();
    let inner: Vec<&LossEntry> = table.with_role(Role::Inner).collect();
    if outer.is_empty() || inner.is_empty() {
        return Err(usage!("nested CV needs outer and inner splits"));
    }
    let reps = outer.iter().map(|e| e.label.r).max().unwrap_or(0) + 1;
    let k = outer.iter().map(|e| e.label.k).max().unwrap_or(0) + 1;
    if k < 2 {
        return Err(usage!("nested CV needs K >= 2"));
    }
    let inner_losses = || inner.iter().flat_map(|e| e.losses.iter().copied());
    let n_in = inner.iter().map(|e| e.losses.len()).sum::<usize>();
    if n_in < 2 {
        return Err(degenerate!("nested CV needs at least two inner losses"));
    }
    let point = compensated_sum(inner_losses()) / n_in as f64;
    let sigma_in = (compensated_sum(inner_losses().map(|v| (v - point) * (v - point))) / (n_in - 1) as f64).sqrt();
    let mut mse_terms = Vec::with_capacity(outer.len());
    for o in &outer {
        let m = o.losses.len();
        if m < 2 {
            return Err(degenerate!("nested CV needs outer folds with at least two observations"));
        }
        let (r, kk) = (o.label.r, o.label.k);
        let fold_inner: Vec<&&LossEntry> = inner.iter().filter(|e| e.label.r == r && e.label.k == kk).collect();
        let train_size: usize = fold_inner.iter().map(|e| e.losses.len()).sum();
        if train_size == 0 {
            return Err(usage!("outer fold ({r}, {kk}) has no inner splits"));
        }
        let p_in = compensated_sum(fold_inner.iter().map(|e| e.sum())) / train_size as f64;
        let p_out = o.mean();
        let var = sample_variance(&o.losses);
        mse_terms.push((p_in - p_out).powi(2) - var / m as f64);
    }
    let mse = compensated_sum(mse_terms.iter().copied()) / (reps * k) as f64;
    let kf = k as f64;
    let upper = sigma_in * kf.sqrt() / n.sqrt();
    let se = (sigma_in / n.sqrt()).max((0.0f64).max((kf - 1.0) / kf * mse).sqrt().min(upper));
    let outer_cv = compensated_sum(outer.iter().map(|e| e.sum())) / (reps as f64 * n);
    let bias = (1.0 + (kf - 2.0) / kf).powf(c) * (point - outer_cv);
    Ok(NestedCvParts { point, outer_cv, sigma_in, mse, se, bias })
}

pub fn nested_cv_ci(table: &LossTable, c: f64, alpha: f64) -> Result<IntervalEstimate> {
    let parts = nested_cv_parts(table, c)?;
    Ok(wald("nested_cv", parts.point, Some(parts.bias), parts.se, z(alpha)?, alpha))
}

/// Out-of-bag point and standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OobEstimate {
    pub point: f64,
    pub se: f64,
    /// Number of observations that were out-of-bag at least once.
    pub covered: usize,
}

pub fn oob_estimate(table: &LossTable) -> Result<OobEstimate> {
    let n = table.n;
    let k = table.entries.len();
    if k < 2 || n < 2 {
        return Err(usage!("out-of-bag needs K >= 2 bootstrap samples and n >= 2, got K = {k}, n = {n}"));
    }
    let mut counts = Vec::with_capacity(k);
    for e in &table.entries {
        match &e.train_counts {
            Some(c) if c.len() == n => counts.push(c),
            _ => return Err(usage!("out-of-bag entries need in-bag counts for all {n} observations")),
        }
    }
    // loss_sum[i], times_out[i]: over replicates where i is out-of-bag
    let mut loss_sum = vec![0.0; n];
    let mut times_out = vec![0usize; n];
    let mut q = Vec::with_capacity(k);
    for e in &table.entries {
        for (&i, &v) in e.test.iter().zip(&e.losses) {
            loss_sum[i] += v;
            times_out[i] += 1;
        }
        q.push(e.sum() / n as f64);
    }
    let covered: Vec<usize> = (0..n).filter(|&i| times_out[i] > 0).collect();
    if covered.is_empty() {
        return Err(degenerate!("no observation is out-of-bag in any bootstrap sample"));
    }
    let per_obs: Vec<f64> = covered.iter().map(|&i| loss_sum[i] / times_out[i] as f64).collect();
    let point = mean(&per_obs);
    let nf = n as f64;
    let d2 = covered.iter().zip(&per_obs).map(|(&i, &p_i)| {
        let n_bar = counts.iter().map(|c| f64::from(c[i])).sum::<f64>() / k as f64;
        let cov = compensated_sum(counts.iter().zip(&q).map(|(c, qk)| (f64::from(c[i]) - n_bar) * qk));
        let d = (2.0 + 1.0 / (nf - 1.0)) * (p_i - point) / nf + cov / times_out[i] as f64;
        d * d
    });
    let se = (nf / covered.len() as f64 * compensated_sum(d2)).sqrt();
    Ok(OobEstimate { point, se, covered: covered.len() })
}

pub fn oob_ci(table: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let est = oob_estimate(table)?;
    Ok(wald("oob", est.point, None, est.se, z(alpha)?, alpha))
}

/// Intermediate quantities of the .632+ estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plus632 {
    pub point: f64,
    pub se: f64,
    pub p_oob: f64,
    pub p_in: f64,
    pub no_information: f64,
    pub relative_overfit: f64,
    pub weight: f64,
}

/// Relative overfitting rate, set to 0 when the numerator or the denominator
/// is not positive and capped at 1.
pub fn relative_overfit(p_oob: f64, p_in: f64, no_information: f64) -> f64 {
    let num = p_oob - p_in;
    let den = no_information - p_in;
    if num <= 0.0 || den <= 0.0 {
        0.0
    } else {
        (num / den).min(1.0)
    }
}

/// `boot` is a bootstrap table, `insample` the in-sample fit on the same data
/// carrying the no-information term.
pub fn plus632_parts(boot: &LossTable, insample: &LossTable) -> Result<Plus632> {
    let oob = oob_estimate(boot)?;
    let ins = single_entry(insample, "the in-sample part of .632+")?;
    let no_information =
        ins.no_information.ok_or_else(|| usage!(".632+ needs the no-information term of the in-sample fit"))?;
    let p_in = ins.mean();
    let r = relative_overfit(oob.point, p_in, no_information);
    let weight = 0.632 / (1.0 - 0.368 * r);
    let point = weight * oob.point + (1.0 - weight) * p_in;
    let se = if oob.point == 0.0 { 0.0 } else { oob.se * point / oob.point };
    Ok(Plus632 { point, se, p_oob: oob.point, p_in, no_information, relative_overfit: r, weight })
}

pub fn b632plus_ci(boot: &LossTable, insample: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let parts = plus632_parts(boot, insample)?;
    Ok(wald("b632plus", parts.point, None, parts.se, z(alpha)?, alpha))
}

/// `P_{n,r} = (1/n) sum_k m_{r,k} e_{r,k}` for every BCCV repetition.
pub fn bccv_rep_estimates(table: &LossTable) -> Vec<f64> {
    table
        .by_rep()
        .values()
        .map(|entries| {
            compensated_sum(entries.iter().flat_map(|e| e.losses.iter().map(|v| e.label.multiplicity as f64 * v)))
                / table.n as f64
        })
        .collect()
}

pub fn bccv_interval(per_rep: &[f64], loocv_point: Option<f64>, alpha: f64) -> Result<IntervalEstimate> {
    if per_rep.len() < 2 {
        return Err(usage!("BCCV percentile interval needs R >= 2, got {}", per_rep.len()));
    }
    let point = mean(per_rep);
    let bias = loocv_point.map(|p| point - p);
    let (lower, upper) = percentile_bounds(per_rep, alpha, bias.unwrap_or(0.0))?;
    Ok(IntervalEstimate { method: "bccv".into(), point, lower, upper, alpha, se: None, bias, fits_used: 0 })
}

/// BCCV percentile interval; with `loocv` the bounds are bias corrected.
pub fn bccv_ci(table: &LossTable, loocv: Option<&LossTable>, alpha: f64) -> Result<IntervalEstimate> {
    let per_rep = bccv_rep_estimates(table);
    bccv_interval(&per_rep, loocv.map(LossTable::grand_mean), alpha)
}

pub fn tsb_interval(inner: &[f64], full_point: f64, alpha: f64) -> Result<IntervalEstimate> {
    if inner.len() < 2 {
        return Err(usage!("two-stage bootstrap needs R >= 2, got {}", inner.len()));
    }
    let (lower, upper) = percentile_bounds(inner, alpha, 0.0)?;
    Ok(IntervalEstimate { method: "tsb".into(), point: full_point, lower, upper, alpha, se: None, bias: None, fits_used: 0 })
}

/// .632+ estimate within every outer sample of a two-stage bootstrap table.
pub fn tsb_inner_estimates(table: &LossTable) -> Result<Vec<f64>> {
    table
        .by_rep()
        .keys()
        .map(|&r| {
            let rep = table.rep(r);
            let (ins, boot): (Vec<_>, Vec<_>) = rep.entries.into_iter().partition(|e| e.label.role == Role::InSample);
            let boot = LossTable { n: table.n, entries: boot };
            let ins = LossTable { n: table.n, entries: ins };
            Ok(plus632_parts(&boot, &ins)?.point)
        })
        .collect()
}

pub fn tsb_ci(table: &LossTable, boot: &LossTable, insample: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let inner = tsb_inner_estimates(table)?;
    let full = plus632_parts(boot, insample)?;
    tsb_interval(&inner, full.point, alpha)
}

pub fn lsb_interval(performances: &[f64], full_in: f64, corrected_point: f64, alpha: f64) -> Result<IntervalEstimate> {
    if performances.len() < 2 {
        return Err(usage!("location-shifted bootstrap needs K >= 2, got {}", performances.len()));
    }
    let bias = full_in - corrected_point;
    let (lower, upper) = percentile_bounds(performances, alpha, bias)?;
    Ok(IntervalEstimate {
        method: "lsb".into(),
        point: corrected_point,
        lower,
        upper,
        alpha,
        se: None,
        bias: Some(bias),
        fits_used: 0,
    })
}

/// `insample_boot` is an in-sample bootstrap table; `boot` and `insample`
/// give the .632+ point on the whole data.
pub fn lsb_ci(insample_boot: &LossTable, boot: &LossTable, insample: &LossTable, alpha: f64) -> Result<IntervalEstimate> {
    let perf: Vec<f64> = insample_boot.entries.iter().map(LossEntry::mean).collect();
    let parts = plus632_parts(boot, insample)?;
    lsb_interval(&perf, parts.p_in, parts.point, alpha)
}
