//! Fits a learner on every pair of a split plan and collects the losses.

use std::time::Instant;

use crate::data::{Dataset, Task};
use crate::error::{degenerate, Result};
use crate::evaluation::{compensated_sum, mean};
use crate::inducers::{fit, loss_context, predict_loss_rows, InducerKind, InducerSpec, Model};
use crate::inference::{
    b632plus_ci, bccv_ci, conservative_z_ci, corrected_t_ci, cv52_ci, cv_wald_ci, hrcv_ci, holdout_ci, lsb_ci,
    nested_cv_ci, oob_ci, rocv_ci, tsb_ci, IntervalEstimate, LossEntry, LossTable, ReplaceOneEstimates,
};
use crate::losses::{LossContext, LossSpec};
use crate::methods::{Method, MethodSpec, NCV_BIAS_EXPONENT};
use crate::resampling::{train_counts, Pair, ReplaceOne, Role, Scheme, SplitPlan};
use crate::rng;

/// What to fit with and where to measure risks.
#[derive(Clone, Copy)]
pub struct FitContext<'a> {
    pub data: &'a Dataset,
    pub inducer: &'a InducerSpec,
    pub loss: &'a LossSpec,
    /// When set, every fitted model's risk on this data is recorded.
    pub validation: Option<&'a Dataset>,
    /// Base for per-fit seeds of randomized inducers.
    pub seed: u64,
    pub record_timing: bool,
}

/// A fitted model together with its loss context.
pub struct Fitted {
    pub model: Model,
    pub ctx: LossContext,
}

impl FitContext<'_> {
    fn fit(&self, train: &Dataset, fit_id: u64) -> Result<Fitted> {
        let model = if self.inducer.kind == InducerKind::RandomForest {
            let mut spec = self.inducer.clone();
            spec.seed = rng::derive(self.seed, &[fit_id]);
            fit(&spec, train)?
        } else {
            fit(self.inducer, train)?
        };
        let ctx = loss_context(&model, train, self.loss)?;
        Ok(Fitted { model, ctx })
    }

    fn validation_risk(&self, fitted: &Fitted) -> Result<Option<f64>> {
        self.validation.map(|v| true_risk_with(fitted, v, self.loss)).transpose()
    }
}

/// Mean loss of a fitted model on `validation`.
pub fn true_risk_with(fitted: &Fitted, validation: &Dataset, loss: &LossSpec) -> Result<f64> {
    Ok(mean(&predict_loss_rows(&fitted.model, validation, loss, &fitted.ctx)?))
}

/// Result of evaluating one split plan.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub table: Option<LossTable>,
    pub replace_one: Option<ReplaceOneEstimates>,
    /// Fits the scheme calls for.
    pub nominal_fits: usize,
    /// Fits actually performed.
    pub actual_fits: usize,
    pub fallback_fits: usize,
    pub seconds: f64,
    /// `(test size, validation risk)` of every pair, when validation was requested.
    pub validation_risks: Vec<(usize, f64)>,
}

struct Clock {
    start: Option<Instant>,
}

impl Clock {
    fn start(on: bool) -> Self {
        Clock { start: on.then(Instant::now) }
    }

    fn seconds(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
    }
}

/// `(1/n^2) sum_i sum_j L(y_j, f(x_i))` over the rows of `data`.
pub fn no_information(fitted: &Fitted, data: &Dataset, loss: &LossSpec) -> Result<f64> {
    let preds = fitted.model.predict(data);
    let y = data.target();
    let mut rows = Vec::with_capacity(preds.len());
    for &p in &preds {
        let mut row = Vec::with_capacity(y.len());
        for &yj in y {
            row.push(loss.pointwise(yj, p, &fitted.ctx)?);
        }
        rows.push(compensated_sum(row));
    }
    let n = y.len() as f64;
    Ok(compensated_sum(rows) / (n * n))
}

fn wants_counts(scheme: &Scheme, pair: &Pair) -> bool {
    matches!(scheme, Scheme::Bootstrap { .. } | Scheme::TwoStageBootstrap { .. }) && pair.label.role != Role::InSample
}

/// Fits every pair of `plan` and returns the loss table.
pub fn evaluate_plan(ctx: &FitContext<'_>, plan: &SplitPlan) -> Result<PlanOutcome> {
    if let Some(ro) = plan.replace_one() {
        return evaluate_replace_one(ctx, plan, ro);
    }
    let frames: Vec<Dataset> = plan.frames().iter().map(|f| ctx.data.select(f)).collect();
    let mut entries = Vec::with_capacity(plan.pair_count());
    let mut out = PlanOutcome {
        table: None,
        replace_one: None,
        nominal_fits: plan.pair_count(),
        actual_fits: 0,
        fallback_fits: 0,
        seconds: 0.0,
        validation_risks: Vec::new(),
    };
    for (b, pair) in plan.pairs().iter().enumerate() {
        let source = pair.frame.map_or(ctx.data, |f| &frames[f]);
        if pair.train.is_empty() {
            return Err(degenerate!("pair {b} of the {} plan has an empty training set", plan.scheme.name()));
        }
        let clock = Clock::start(ctx.record_timing);
        let train = source.select(&pair.train);
        let fitted = ctx.fit(&train, b as u64)?;
        let test = source.select(&pair.test);
        let losses =
            if pair.test.is_empty() { Vec::new() } else { predict_loss_rows(&fitted.model, &test, ctx.loss, &fitted.ctx)? };
        out.seconds += clock.seconds();
        out.actual_fits += 1;
        out.fallback_fits += usize::from(fitted.model.fallback);
        let mut entry = LossEntry::new(pair.label, pair.test.clone(), losses);
        if wants_counts(&plan.scheme, pair) {
            entry.train_counts = Some(train_counts(&pair.train, source.n_rows()));
        }
        if pair.label.role == Role::InSample {
            entry.no_information = Some(no_information(&fitted, source, ctx.loss)?);
        }
        if let Some(risk) = ctx.validation_risk(&fitted)? {
            out.validation_risks.push((pair.test.len(), risk));
        }
        entries.push(entry);
    }
    out.table = Some(LossTable::new(plan.n, entries)?);
    Ok(out)
}

/// Base CV on `d1` and every replaced CV. The fold holding the replaced
/// position keeps its training set, so its base model is reused.
fn evaluate_replace_one(ctx: &FitContext<'_>, plan: &SplitPlan, ro: &ReplaceOne) -> Result<PlanOutcome> {
    let half = ro.half_size();
    let (reps, k) = (ro.reps(), ro.k());
    let clock = Clock::start(ctx.record_timing);
    let mut fallback_fits = 0;
    let mut fits = 0;
    let base_pairs = ro.cv_pairs(None);
    // base[r][k] = (fitted, per-position losses of the fold)
    let mut base_models = Vec::with_capacity(base_pairs.len());
    let mut base_losses = vec![vec![0.0; half]; reps];
    let mut validation_risks = Vec::new();
    for (b, pair) in base_pairs.iter().enumerate() {
        let (r, kk) = (pair.label.r, pair.label.k);
        let fitted = ctx.fit(&ctx.data.select(&pair.train), b as u64)?;
        fits += 1;
        fallback_fits += usize::from(fitted.model.fallback);
        let losses = predict_loss_rows(&fitted.model, &ctx.data.select(&pair.test), ctx.loss, &fitted.ctx)?;
        for (&pos, v) in ro.folds[r][kk].iter().zip(losses) {
            base_losses[r][pos] = v;
        }
        base_models.push(fitted);
    }
    let total = (reps * half) as f64;
    let base_sum: Vec<f64> = base_losses.iter().map(|l| compensated_sum(l.iter().copied())).collect();
    let base = compensated_sum(base_sum.iter().copied()) / total;
    let fold_of: Vec<Vec<usize>> = (0..reps).map(|r| ro.fold_of(r)).collect();
    let mut replaced = Vec::with_capacity(half);
    for l in 0..half {
        let ids = ro.sample(Some(l));
        let mut rep_sums = Vec::with_capacity(reps);
        for r in 0..reps {
            let mut losses = base_losses[r].clone();
            for kk in 0..k {
                let fold = &ro.folds[r][kk];
                if fold_of[r][l] == kk {
                    let fitted = &base_models[r * k + kk];
                    let row = ctx.data.select(&[ro.d2[l]]);
                    losses[l] = predict_loss_rows(&fitted.model, &row, ctx.loss, &fitted.ctx)?[0];
                    continue;
                }
                let mut in_test = vec![false; half];
                fold.iter().for_each(|&p| in_test[p] = true);
                let train: Vec<usize> = (0..half).filter(|&p| !in_test[p]).map(|p| ids[p]).collect();
                let fit_id = ((l + 1) * reps * k + r * k + kk) as u64;
                let fitted = ctx.fit(&ctx.data.select(&train), fit_id)?;
                fits += 1;
                fallback_fits += usize::from(fitted.model.fallback);
                let test: Vec<usize> = fold.iter().map(|&p| ids[p]).collect();
                let fold_losses = predict_loss_rows(&fitted.model, &ctx.data.select(&test), ctx.loss, &fitted.ctx)?;
                for (&pos, v) in fold.iter().zip(fold_losses) {
                    losses[pos] = v;
                }
            }
            rep_sums.push(compensated_sum(losses));
        }
        replaced.push(compensated_sum(rep_sums) / total);
    }
    let seconds = clock.seconds();
    if ctx.validation.is_some() {
        for (fitted, pair) in base_models.iter().zip(&base_pairs) {
            if let Some(risk) = ctx.validation_risk(fitted)? {
                validation_risks.push((pair.test.len(), risk));
            }
        }
    }
    Ok(PlanOutcome {
        table: None,
        replace_one: Some(ReplaceOneEstimates { base, replaced }),
        nominal_fits: plan.pair_count(),
        actual_fits: fits,
        fallback_fits,
        seconds,
        validation_risks,
    })
}

fn table(outcomes: &[PlanOutcome], i: usize) -> &LossTable {
    outcomes[i].table.as_ref().expect("plan evaluated with explicit pairs")
}

/// Interval of `method` from the outcomes of its plans (in the order of
/// [`MethodSpec::schemes`]).
pub fn interval(method: &MethodSpec, outcomes: &[PlanOutcome], alpha: f64) -> Result<IntervalEstimate> {
    let t = |i| table(outcomes, i);
    let ro = || outcomes[1].replace_one.as_ref().expect("replace-one plan");
    let ci = match method.method {
        Method::Holdout { .. } => holdout_ci(t(0), alpha)?,
        Method::Rocv { variant, .. } => rocv_ci(t(0), ro(), variant, alpha)?,
        Method::Hrcv { variant, .. } => hrcv_ci(t(0), ro(), variant, alpha)?,
        Method::CvWald { variant, .. } => cv_wald_ci(t(0), variant, alpha)?,
        Method::CorrectedT { .. } => corrected_t_ci(t(0), alpha)?,
        Method::ConservativeZ { .. } => conservative_z_ci(t(0), t(1), alpha)?,
        Method::Cv52 => cv52_ci(t(0), alpha)?,
        Method::NestedCv { .. } => nested_cv_ci(t(0), NCV_BIAS_EXPONENT, alpha)?,
        Method::Oob { .. } => oob_ci(t(0), alpha)?,
        Method::B632Plus { .. } => b632plus_ci(t(0), t(1), alpha)?,
        Method::Bccv { bias, .. } => bccv_ci(t(0), bias.then(|| t(1)), alpha)?,
        Method::Lsb { .. } => lsb_ci(t(0), t(1), t(2), alpha)?,
        Method::Tsb { .. } => tsb_ci(t(0), t(1), t(2), alpha)?,
    };
    let fits = outcomes.iter().map(|o| o.nominal_fits).sum();
    Ok(ci.with_method(method.to_string()).with_fits(fits))
}

/// Proxy quantity from the validation risks of the first plan's models.
pub fn proxy_from_risks(method: &MethodSpec, risks: &[(usize, f64)]) -> Option<f64> {
    if risks.is_empty() {
        return None;
    }
    match method.method {
        Method::Holdout { .. } => Some(risks[0].1),
        Method::CvWald { .. } => {
            let total: usize = risks.iter().map(|r| r.0).sum();
            Some(compensated_sum(risks.iter().map(|&(w, v)| w as f64 * v)) / total as f64)
        }
        Method::Rocv { .. } | Method::Hrcv { .. } => {
            let v: Vec<f64> = risks.iter().map(|r| r.1).collect();
            Some(mean(&v))
        }
        _ => None,
    }
}

/// Whether `task` admits the configured inducer and loss.
pub fn check_compatible(task: Task, inducer: &InducerSpec, loss: &LossSpec) -> Result<()> {
    inducer.check_task(task)?;
    loss.check_task(task)
}
