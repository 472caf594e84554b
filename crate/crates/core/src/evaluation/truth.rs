use super::numeric::{compensated_sum, mean};
use crate::data::Dataset;
use crate::error::{usage, Result};
use crate::harness::engine::{evaluate_plan, proxy_from_risks, FitContext};
use crate::inducers::{loss_context, predict_loss_rows, InducerSpec, Model};
use crate::losses::LossSpec;
use crate::methods::MethodSpec;
use crate::resampling::SplitPlan;

/// Mean loss on `validation` of `model`, which was fit on `train`.
pub fn true_risk(model: &Model, train: &Dataset, validation: &Dataset, loss: &LossSpec) -> Result<f64> {
    let ctx = loss_context(model, train, loss)?;
    Ok(mean(&predict_loss_rows(model, validation, loss, &ctx)?))
}

/// Proxy quantity of `method` for the first plan of the method, or `None`
/// for methods without one.
pub fn proxy_quantity(
    method: &MethodSpec,
    plan: &SplitPlan,
    data: &Dataset,
    validation: &Dataset,
    inducer: &InducerSpec,
    loss: &LossSpec,
) -> Result<Option<f64>> {
    if !method.has_proxy() {
        return Ok(None);
    }
    let ctx = FitContext { data, inducer, loss, validation: Some(validation), seed: 0, record_timing: false };
    let outcome = evaluate_plan(&ctx, plan)?;
    Ok(proxy_from_risks(method, &outcome.validation_risks))
}

/// Splits `mean_b(test mean loss) - expected_risk` into the validation term
/// `mean_b(test mean loss - risk_b)` and the training term
/// `mean_b(risk_b) - expected_risk`, where `risk_b` is the validation risk
/// of the model fit on pair `b`.
pub fn uncertainty_decomposition(
    plan: &SplitPlan,
    data: &Dataset,
    validation: &Dataset,
    inducer: &InducerSpec,
    loss: &LossSpec,
    expected_risk: f64,
) -> Result<(f64, f64)> {
    let ctx = FitContext { data, inducer, loss, validation: Some(validation), seed: 0, record_timing: false };
    let outcome = evaluate_plan(&ctx, plan)?;
    let table = outcome.table.ok_or_else(|| usage!("the replace-one layout has no per-pair losses"))?;
    let risks: Vec<f64> = outcome.validation_risks.iter().map(|r| r.1).collect();
    if risks.is_empty() {
        return Err(usage!("decomposition needs a plan with at least one pair"));
    }
    let validation_term = compensated_sum(table.entries.iter().zip(&risks).map(|(e, r)| e.mean() - r)) / risks.len() as f64;
    Ok((validation_term, mean(&risks) - expected_risk))
}
