//! Pointwise loss functions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{usage, Error, Result};
use crate::evaluation::{empirical_quantile, sample_variance};

/// Floor for the denominators of the percentual and standardized losses.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ZeroOne,
    LogLoss,
    Brier,
    Squared,
    Absolute,
    WinsorizedSquared,
    PercentualAbsolute,
    StandardizedAbsolute,
}

impl LossKind {
    pub const ALL: [LossKind; 8] = [
        LossKind::ZeroOne,
        LossKind::LogLoss,
        LossKind::Brier,
        LossKind::Squared,
        LossKind::Absolute,
        LossKind::WinsorizedSquared,
        LossKind::PercentualAbsolute,
        LossKind::StandardizedAbsolute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::ZeroOne => "zero_one",
            LossKind::LogLoss => "log_loss",
            LossKind::Brier => "brier",
            LossKind::Squared => "squared",
            LossKind::Absolute => "absolute",
            LossKind::WinsorizedSquared => "winsorized_squared",
            LossKind::PercentualAbsolute => "percentual_absolute",
            LossKind::StandardizedAbsolute => "standardized_absolute",
        }
    }

    /// Task the loss is defined for; `None` when it applies to both.
    pub fn task(self) -> Option<Task> {
        match self {
            LossKind::ZeroOne | LossKind::LogLoss | LossKind::Brier => Some(Task::Classification),
            LossKind::Squared | LossKind::Absolute => None,
            _ => Some(Task::Regression),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = LossKind::ALL.iter().map(|k| k.name()).collect();
                usage!("unknown loss '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    #[serde(default = "default_winsor_quantile")]
    pub winsor_quantile: f64,
    #[serde(default = "default_log_loss_clip")]
    pub log_loss_clip: f64,
}

fn default_winsor_quantile() -> f64 {
    0.9
}

fn default_log_loss_clip() -> f64 {
    1e-15
}

impl From<LossKind> for LossSpec {
    fn from(kind: LossKind) -> Self {
        LossSpec::new(kind)
    }
}

/// Train-set statistics some losses need.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossContext {
    /// Cutoff on absolute residuals (winsorized squared error).
    pub winsor_cutoff: Option<f64>,
    /// Standard deviation of the training targets (standardized absolute error).
    pub target_sd: Option<f64>,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self { kind, winsor_quantile: default_winsor_quantile(), log_loss_clip: default_log_loss_clip() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.winsor_quantile > 0.0 && self.winsor_quantile < 1.0) {
            return Err(Error::Config(format!("winsor_quantile must lie in (0, 1), got {}", self.winsor_quantile)));
        }
        if !(self.log_loss_clip > 0.0 && self.log_loss_clip < 0.5) {
            return Err(Error::Config(format!("log_loss_clip must lie in (0, 0.5), got {}", self.log_loss_clip)));
        }
        Ok(())
    }

    pub fn check_task(&self, task: Task) -> Result<()> {
        match self.kind.task() {
            Some(t) if t != task => Err(usage!("loss {} is not defined for {:?} tasks", self.kind, task)),
            _ => Ok(()),
        }
    }

    /// Whether [`LossSpec::context`] needs predictions on the training rows.
    pub fn needs_train_predictions(&self) -> bool {
        self.kind == LossKind::WinsorizedSquared
    }

    /// Builds the context from the training targets and, for the winsorized
    /// loss, the fitted model's predictions on those same rows.
    pub fn context(&self, train_targets: &[f64], train_predictions: Option<&[f64]>) -> Result<LossContext> {
        let mut ctx = LossContext::default();
        match self.kind {
            LossKind::WinsorizedSquared => {
                let preds = train_predictions
                    .ok_or_else(|| usage!("winsorized loss needs predictions on the training rows"))?;
                let resid: Vec<f64> = train_targets.iter().zip(preds).map(|(y, p)| (y - p).abs()).collect();
                ctx.winsor_cutoff = Some(empirical_quantile(&resid, self.winsor_quantile)?);
            }
            LossKind::StandardizedAbsolute => {
                let var = sample_variance(train_targets);
                let sd = if var.is_finite() { var.sqrt() } else { 0.0 };
                ctx.target_sd = Some(sd.max(DENOMINATOR_FLOOR));
            }
            _ => {}
        }
        Ok(ctx)
    }

    /// Loss of prediction `yhat` for target `y`.
    pub fn pointwise(&self, y: f64, yhat: f64, ctx: &LossContext) -> Result<f64> {
        let r = y - yhat;
        let value = match self.kind {
            LossKind::ZeroOne | LossKind::LogLoss | LossKind::Brier if !(0.0..=1.0).contains(&yhat) => {
                return Err(usage!("classification loss needs a probability, got {yhat}"))
            }
            LossKind::ZeroOne => {
                let label = if yhat >= 0.5 { 1.0 } else { 0.0 };
                if label == y {
                    0.0
                } else {
                    1.0
                }
            }
            LossKind::LogLoss => {
                let p = yhat.clamp(self.log_loss_clip, 1.0 - self.log_loss_clip);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
            LossKind::Brier | LossKind::Squared => r * r,
            LossKind::Absolute => r.abs(),
            LossKind::WinsorizedSquared => {
                let c = ctx.winsor_cutoff.ok_or_else(|| usage!("winsorized loss needs a cutoff"))?;
                let clipped = r.abs().min(c);
                clipped * clipped
            }
            LossKind::PercentualAbsolute => r.abs() / y.abs().max(DENOMINATOR_FLOOR),
            LossKind::StandardizedAbsolute => {
                let sd = ctx.target_sd.ok_or_else(|| usage!("standardized loss needs the training target sd"))?;
                r.abs() / sd
            }
        };
        Ok(value)
    }

    /// Losses for aligned target and prediction vectors.
    pub fn losses(&self, y: &[f64], yhat: &[f64], ctx: &LossContext) -> Result<Vec<f64>> {
        if y.len() != yhat.len() {
            return Err(usage!("{} targets but {} predictions", y.len(), yhat.len()));
        }
        y.iter().zip(yhat).map(|(&a, &b)| self.pointwise(a, b, ctx)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eval(kind: LossKind, y: f64, yhat: f64) -> f64 {
        LossSpec::new(kind).pointwise(y, yhat, &LossContext::default()).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(eval(LossKind::Squared, 2.0, 0.0), 4.0);
        assert_eq!(eval(LossKind::Brier, 1.0, 0.5), 0.25);
        assert_eq!(eval(LossKind::PercentualAbsolute, 2.0, 1.0), 0.5);
        assert_eq!(eval(LossKind::ZeroOne, 1.0, 0.5), 0.0);
        assert_eq!(eval(LossKind::ZeroOne, 0.0, 0.5), 1.0);
        assert_eq!(eval(LossKind::Absolute, -1.0, 2.0), 3.0);
    }

    #[test]
    fn winsorized_clips_at_train_quantile() {
        let spec = LossSpec::new(LossKind::WinsorizedSquared);
        // absolute residuals 0..=10: the 0.9 quantile is exactly 9
        let y: Vec<f64> = (0..=10).map(f64::from).collect();
        let preds = vec![0.0; 11];
        let ctx = spec.context(&y, Some(&preds)).unwrap();
        assert_eq!(ctx.winsor_cutoff, Some(9.0));
        assert_eq!(spec.pointwise(10.0, 0.0, &ctx).unwrap(), 81.0);
        assert_eq!(spec.pointwise(3.0, 0.0, &ctx).unwrap(), 9.0);
    }

    #[test]
    fn missing_context_is_usage_error() {
        let err = LossSpec::new(LossKind::StandardizedAbsolute)
            .pointwise(1.0, 0.0, &LossContext::default())
            .unwrap_err();
        assert!(err.is_usage());
        assert!(LossSpec::new(LossKind::WinsorizedSquared).context(&[1.0], None).unwrap_err().is_usage());
    }

    #[test]
    fn task_mismatch() {
        assert!(LossSpec::new(LossKind::Brier).check_task(Task::Regression).unwrap_err().is_usage());
        assert!(LossSpec::new(LossKind::PercentualAbsolute).check_task(Task::Classification).is_err());
        assert!(LossSpec::new(LossKind::Squared).check_task(Task::Classification).is_ok());
    }

    #[test]
    fn names_round_trip() {
        for kind in LossKind::ALL {
            assert_eq!(kind.name().parse::<LossKind>().unwrap(), kind);
        }
        assert!("hinge".parse::<LossKind>().unwrap_err().is_usage());
    }

    #[test]
    fn percentual_guard_at_zero_target() {
        let v = eval(LossKind::PercentualAbsolute, 0.0, 1e-13);
        assert!((v - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn classification_losses_bounded(y in 0u8..2, p in 0.0f64..=1.0) {
            let y = f64::from(y);
            let zo = eval(LossKind::ZeroOne, y, p);
            prop_assert!(zo == 0.0 || zo == 1.0);
            let br = eval(LossKind::Brier, y, p);
            prop_assert!((0.0..=1.0).contains(&br));
            let ll = eval(LossKind::LogLoss, y, p);
            prop_assert!(ll >= 0.0 && ll <= -(1e-15f64).ln() + 1e-9);
        }

        #[test]
        fn winsorized_never_exceeds_squared(
            resid in prop::collection::vec(-5.0f64..5.0, 2..30),
            y in -10.0f64..10.0,
            yhat in -10.0f64..10.0,
        ) {
            let spec = LossSpec::new(LossKind::WinsorizedSquared);
            let targets: Vec<f64> = resid.clone();
            let preds = vec![0.0; resid.len()];
            let ctx = spec.context(&targets, Some(&preds)).unwrap();
            let w = spec.pointwise(y, yhat, &ctx).unwrap();
            let s = eval(LossKind::Squared, y, yhat);
            prop_assert!(w <= s + 1e-12);
            if (y - yhat).abs() <= ctx.winsor_cutoff.unwrap() {
                prop_assert_eq!(w, s);
            }
        }

        #[test]
        fn standardized_is_scale_invariant(
            targets in prop::collection::vec(-5.0f64..5.0, 3..20),
            y in -5.0f64..5.0,
            yhat in -5.0f64..5.0,
            c in 0.1f64..10.0,
        ) {
            let spec = LossSpec::new(LossKind::StandardizedAbsolute);
            let ctx = spec.context(&targets, None).unwrap();
            prop_assume!(ctx.target_sd.unwrap() > 1e-6);
            let scaled: Vec<f64> = targets.iter().map(|t| t * c).collect();
            let ctx_c = spec.context(&scaled, None).unwrap();
            let a = spec.pointwise(y, yhat, &ctx).unwrap();
            let b = spec.pointwise(c * y, c * yhat, &ctx_c).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn all_losses_nonnegative(y in -5.0f64..5.0, yhat in -5.0f64..5.0) {
            for kind in [LossKind::Squared, LossKind::Absolute, LossKind::PercentualAbsolute] {
                prop_assert!(eval(kind, y, yhat) >= 0.0);
            }
        }
    }
}
