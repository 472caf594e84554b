//! Learners: `D -> f_D`.
//!
//! Fitting never fails on non-empty input. Degenerate training sets (a single
//! class, a singular system that survives jittering, too few rows for a tree)
//! produce a constant model with [`Model::fallback`] set.

mod linear;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{usage, Error, Result};
use crate::evaluation::mean;
use crate::losses::{LossContext, LossSpec};

pub use linear::{logistic_gradient, COEF_CLAMP, IRLS_MAX_ITER};
pub use tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InducerKind {
    Ols,
    Ridge,
    Logistic,
    RidgeLogistic,
    Cart,
    RandomForest,
    MajorityFallback,
}

impl InducerKind {
    pub const ALL: [InducerKind; 7] = [
        InducerKind::Ols,
        InducerKind::Ridge,
        InducerKind::Logistic,
        InducerKind::RidgeLogistic,
        InducerKind::Cart,
        InducerKind::RandomForest,
        InducerKind::MajorityFallback,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InducerKind::Ols => "ols",
            InducerKind::Ridge => "ridge",
            InducerKind::Logistic => "logistic",
            InducerKind::RidgeLogistic => "ridge_logistic",
            InducerKind::Cart => "cart",
            InducerKind::RandomForest => "random_forest",
            InducerKind::MajorityFallback => "majority_fallback",
        }
    }
}

impl fmt::Display for InducerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InducerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InducerKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = InducerKind::ALL.iter().map(|k| k.name()).collect();
            usage!("unknown inducer '{s}' (expected one of {})", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InducerSpec {
    pub kind: InducerKind,
    /// Ridge penalty, scaled per observation: the objective is
    /// `loss / n + lambda / 2 * |beta|^2` with an unpenalized intercept.
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "defaults::min_split")]
    pub min_split: usize,
    /// Minimum rows per leaf; `round(min_split / 3)` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_leaf: Option<usize>,
    #[serde(default = "defaults::complexity")]
    pub complexity_threshold: f64,
    #[serde(default = "defaults::max_depth")]
    pub max_depth: usize,
    #[serde(default = "defaults::n_trees")]
    pub n_trees: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mtry: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    pub fn min_split() -> usize {
        20
    }
    pub fn complexity() -> f64 {
        0.01
    }
    pub fn max_depth() -> usize {
        30
    }
    pub fn n_trees() -> usize {
        50
    }
}

impl InducerSpec {
    pub fn new(kind: InducerKind) -> Self {
        Self {
            kind,
            lambda: 0.0,
            min_split: defaults::min_split(),
            min_leaf: None,
            complexity_threshold: defaults::complexity(),
            max_depth: defaults::max_depth(),
            n_trees: defaults::n_trees(),
            mtry: None,
            seed: 0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be a finite non-negative number, got {}", self.lambda)));
        }
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.min_split < 2 {
            return Err(Error::Config("min_split must be at least 2".into()));
        }
        if self.min_leaf == Some(0) || self.mtry == Some(0) {
            return Err(Error::Config("min_leaf and mtry must be positive".into()));
        }
        if !(self.complexity_threshold >= 0.0) {
            return Err(Error::Config("complexity_threshold must be non-negative".into()));
        }
        Ok(())
    }

    pub fn check_task(&self, task: Task) -> Result<()> {
        match (self.kind, task) {
            (InducerKind::Ols | InducerKind::Ridge, Task::Classification) => {
                Err(usage!("{} is a regression inducer", self.kind))
            }
            (InducerKind::Logistic | InducerKind::RidgeLogistic, Task::Regression) => {
                Err(usage!("{} is a classification inducer", self.kind))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Predictor {
    Constant(f64),
    Linear { intercept: f64, coef: Vec<f64> },
    Logistic { intercept: f64, coef: Vec<f64> },
    Tree(Tree),
    Forest(Vec<Tree>),
}

/// A fitted prediction function. Classification models return the
/// probability of class 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    predictor: Predictor,
    task: Task,
    /// Set when fitting degenerated to a constant predictor.
    pub fallback: bool,
}

impl Model {
    /// The constant predictor: training mean (regression) or training
    /// class-1 frequency (classification).
    pub fn constant(train: &Dataset, fallback: bool) -> Model {
        Model { predictor: Predictor::Constant(mean(train.target())), task: train.task(), fallback }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.predictor {
            Predictor::Constant(c) => *c,
            Predictor::Linear { intercept, coef } => intercept + dot(coef, x),
            Predictor::Logistic { intercept, coef } => linear::sigmoid(intercept + dot(coef, x)),
            Predictor::Tree(t) => t.predict(x),
            Predictor::Forest(trees) => trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64,
        }
    }

    pub fn predict(&self, data: &Dataset) -> Vec<f64> {
        (0..data.n_rows()).map(|i| self.predict_row(data.row(i))).collect()
    }

    /// `(intercept, coefficients)` for linear and logistic models.
    pub fn coefficients(&self) -> Option<(f64, &[f64])> {
        match &self.predictor {
            Predictor::Linear { intercept, coef } | Predictor::Logistic { intercept, coef } => {
                Some((*intercept, coef))
            }
            _ => None,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit(spec: &InducerSpec, train: &Dataset) -> Result<Model> {
    spec.check_task(train.task())?;
    let task = train.task();
    if task == Task::Classification && spec.kind != InducerKind::MajorityFallback {
        let y = train.target();
        if y.iter().all(|&v| v == y[0]) {
            log::debug!("single-class training set of {} rows; using the majority predictor", y.len());
            return Ok(Model::constant(train, true));
        }
    }
    let model = match spec.kind {
        InducerKind::MajorityFallback => Model::constant(train, false),
        InducerKind::Ols => linear::fit_ridge(train, 0.0),
        InducerKind::Ridge => linear::fit_ridge(train, spec.lambda),
        InducerKind::Logistic => linear::fit_logistic(train, 0.0),
        InducerKind::RidgeLogistic => linear::fit_logistic(train, spec.lambda),
        InducerKind::Cart => {
            if train.n_rows() < 2 {
                Model::constant(train, true)
            } else {
                let rows: Vec<usize> = (0..train.n_rows()).collect();
                let params = tree::TreeParams::cart(spec, train.n_features());
                Model { predictor: Predictor::Tree(Tree::grow(train, &rows, &params, None)), task, fallback: false }
            }
        }
        InducerKind::RandomForest => {
            if train.n_rows() < 2 {
                Model::constant(train, true)
            } else {
                Model { predictor: Predictor::Forest(tree::grow_forest(spec, train)), task, fallback: false }
            }
        }
    };
    if model.fallback {
        log::debug!("{} fit on {} rows fell back to a constant model", spec.kind, train.n_rows());
    }
    Ok(model)
}

/// Loss context for `model` trained on `train`.
pub fn loss_context(model: &Model, train: &Dataset, loss: &LossSpec) -> Result<LossContext> {
    let preds = loss.needs_train_predictions().then(|| model.predict(train));
    loss.context(train.target(), preds.as_deref())
}

/// Per-row losses of `model` on `test`.
pub fn predict_loss_rows(model: &Model, test: &Dataset, loss: &LossSpec, ctx: &LossContext) -> Result<Vec<f64>> {
    loss.check_task(test.task())?;
    let preds = model.predict(test);
    loss.losses(test.target(), &preds, ctx)
}
