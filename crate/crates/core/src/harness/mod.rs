//! Monte-Carlo coverage experiments.
//!
//! For every replication `r` a fresh dataset is drawn from stream `r` of the
//! data-generating process, the learner is fit on it to obtain the risk, and
//! every configured method computes its interval from its own split plans.
//! All randomness is addressed by `(seed, rep, method, plan)`, so results do
//! not depend on the number of worker threads.

pub mod azcheck;
pub mod engine;
mod records;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

pub use records::*;

use crate::data::{Dataset, Dgp, DgpSpec, VALIDATION_STREAM};
use crate::error::{usage, Error, Result};
use crate::evaluation::{mean, summarize, true_risk, CoverageRow, CoverageSummary};
use crate::inducers::{fit, InducerKind, InducerSpec};
use crate::inference::IntervalEstimate;
use crate::losses::{LossKind, LossSpec};
use crate::methods::MethodSpec;
use crate::resampling::{generate_plan, SchemeSpec};
use crate::rng;
use engine::{check_compatible, evaluate_plan, interval, proxy_from_risks, FitContext, PlanOutcome};

fn default_reps() -> usize {
    500
}

fn default_n_val() -> usize {
    100_000
}

fn default_alpha() -> f64 {
    0.05
}

/// A benchmark problem: data-generating process, sample size, learner, loss
/// and the methods to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(deserialize_with = "dgp_or_name")]
    pub dgp: DgpSpec,
    pub n: usize,
    #[serde(deserialize_with = "inducer_or_name")]
    pub inducer: InducerSpec,
    #[serde(deserialize_with = "loss_or_name")]
    pub loss: LossSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default = "default_n_val")]
    pub n_val: usize,
    /// Seed of the resampling plans and randomized learners.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Named<T> {
    Name(String),
    Full(T),
}

fn dgp_or_name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DgpSpec, D::Error> {
    match Named::<DgpSpec>::deserialize(d)? {
        Named::Name(s) => DgpSpec::from_name(&s).map_err(serde::de::Error::custom),
        Named::Full(spec) => Ok(spec),
    }
}

fn inducer_or_name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<InducerSpec, D::Error> {
    match Named::<InducerSpec>::deserialize(d)? {
        Named::Name(s) => s.parse::<InducerKind>().map(InducerSpec::new).map_err(serde::de::Error::custom),
        Named::Full(spec) => Ok(spec),
    }
}

fn loss_or_name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<LossSpec, D::Error> {
    match Named::<LossSpec>::deserialize(d)? {
        Named::Name(s) => s.parse::<LossKind>().map(LossSpec::new).map_err(serde::de::Error::custom),
        Named::Full(spec) => Ok(spec),
    }
}

impl ProblemSpec {
    pub fn new(dgp: DgpSpec, n: usize, inducer: InducerSpec, loss: LossSpec, methods: Vec<MethodSpec>) -> Self {
        Self { dgp, n, inducer, loss, methods, n_reps: default_reps(), n_val: default_n_val(), seed: 0, alpha: default_alpha() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be at least 1".into()));
        }
        if self.n == 0 || self.n_val == 0 {
            return Err(Error::Config("n and n_val must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(usage!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        self.inducer.validate()?;
        self.loss.validate()
    }
}

/// A benchmark configuration: one problem or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BenchConfig {
    Many { problems: Vec<ProblemSpec> },
    One(ProblemSpec),
}

impl BenchConfig {
    pub fn problems(self) -> Vec<ProblemSpec> {
        match self {
            BenchConfig::Many { problems } => problems,
            BenchConfig::One(p) => vec![p],
        }
    }
}

/// Execution options that do not change what is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Measure split-level fit and predict times. Without timing, result
    /// files are bit-identical across runs.
    pub record_timing: bool,
    /// Report lower bounds below zero as zero.
    pub truncate_at_zero: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: None, record_timing: true, truncate_at_zero: false }
    }
}

/// Per-method result of one replication.
#[derive(Debug, Clone)]
struct MethodRep {
    interval: Option<IntervalEstimate>,
    pq: Option<f64>,
    seconds: f64,
    fits_used: usize,
    actual_fits: usize,
    fallback_fits: usize,
}

struct Rep {
    risk: f64,
    methods: Vec<MethodRep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub coverage: CoverageSummary,
    pub mean_fits_used: f64,
    pub mean_actual_fits: f64,
    pub fallback_fits: usize,
    pub total_wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub problem: ProblemSpec,
    pub expected_risk: f64,
    pub methods: Vec<MethodSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub records: Vec<ReplicationRecord>,
}

/// Stream id of plan `index` of `method` in replication `rep`.
pub fn plan_stream(method: &MethodSpec, rep: usize, index: usize) -> u64 {
    rng::derive(rng::name_hash(&method.to_string()), &[rep as u64, index as u64])
}

/// Evaluates all plans of `method` on `data` and computes the interval.
/// `validation` enables the proxy quantity.
#[allow(clippy::too_many_arguments)]
fn run_method(
    method: &MethodSpec,
    data: &Dataset,
    validation: Option<&Dataset>,
    inducer: &InducerSpec,
    loss: &LossSpec,
    seed: u64,
    rep: usize,
    alpha: f64,
    record_timing: bool,
) -> Result<MethodRep> {
    let schemes = method.schemes();
    let mut outcomes: Vec<PlanOutcome> = Vec::with_capacity(schemes.len());
    let mut failure = None;
    for (i, scheme) in schemes.iter().enumerate() {
        let stream = plan_stream(method, rep, i);
        let plan = generate_plan(&SchemeSpec::new(*scheme, seed), data.n_rows(), stream)?;
        let ctx = FitContext {
            data,
            inducer,
            loss,
            validation: validation.filter(|_| i == 0 && method.has_proxy()),
            seed: rng::derive(seed, &[rep as u64, stream]),
            record_timing,
        };
        match evaluate_plan(&ctx, &plan) {
            Ok(o) => outcomes.push(o),
            Err(e) if e.is_usage() => return Err(e),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let ci = match failure {
        Some(e) => Err(e),
        None => interval(method, &outcomes, alpha),
    };
    let interval = match ci {
        Ok(ci) => Some(ci),
        Err(e) if e.is_usage() => return Err(e),
        Err(e) => {
            log::warn!("{method} failed in replication {rep}: {e}");
            None
        }
    };
    let evaluated: usize = outcomes.iter().map(|o| o.nominal_fits).sum();
    Ok(MethodRep {
        pq: outcomes.first().and_then(|o| proxy_from_risks(method, &o.validation_risks)),
        seconds: outcomes.iter().map(|o| o.seconds).sum(),
        fits_used: interval.as_ref().map_or_else(|| method.cost(data.n_rows()).unwrap_or(evaluated), |c| c.fits_used),
        actual_fits: outcomes.iter().map(|o| o.actual_fits).sum(),
        fallback_fits: outcomes.iter().map(|o| o.fallback_fits).sum(),
        interval,
    })
}

/// Interval of `method` on a single dataset.
pub fn compute_interval(
    method: &MethodSpec,
    data: &Dataset,
    inducer: &InducerSpec,
    loss: &LossSpec,
    alpha: f64,
    seed: u64,
) -> Result<IntervalEstimate> {
    check_compatible(data.task(), inducer, loss)?;
    inducer.validate()?;
    loss.validate()?;
    let schemes = method.schemes();
    let mut outcomes = Vec::with_capacity(schemes.len());
    for (i, scheme) in schemes.iter().enumerate() {
        let stream = plan_stream(method, 0, i);
        let plan = generate_plan(&SchemeSpec::new(*scheme, seed), data.n_rows(), stream)?;
        let ctx = FitContext {
            data,
            inducer,
            loss,
            validation: None,
            seed: rng::derive(seed, &[0, stream]),
            record_timing: false,
        };
        outcomes.push(evaluate_plan(&ctx, &plan)?);
    }
    interval(method, &outcomes, alpha)
}

/// Replaces failed intervals by the mean point and bounds of the completed
/// replications. Returns the imputed flags.
fn impute(reps: &mut [Option<IntervalEstimate>], name: &str, alpha: f64) -> Vec<bool> {
    let done: Vec<&IntervalEstimate> = reps.iter().flatten().collect();
    let avg = |f: fn(&IntervalEstimate) -> f64| mean(&done.iter().map(|c| f(c)).collect::<Vec<_>>());
    let fill = IntervalEstimate {
        method: name.to_string(),
        point: avg(|c| c.point),
        lower: avg(|c| c.lower),
        upper: avg(|c| c.upper),
        alpha,
        se: None,
        bias: None,
        fits_used: 0,
    };
    if done.is_empty() {
        log::warn!("{name}: no replication produced an interval");
    }
    reps.iter_mut()
        .map(|slot| {
            let missing = slot.is_none();
            if missing {
                *slot = Some(fill.clone());
            }
            missing
        })
        .collect()
}

/// Runs `f` on a pool of `threads` workers (rayon's default when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Resource(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_problem(spec: &ProblemSpec, options: &RunOptions) -> Result<RunOutput> {
    spec.validate()?;
    let dgp = Dgp::new(&spec.dgp)?;
    check_compatible(dgp.task(), &spec.inducer, &spec.loss)?;
    for m in &spec.methods {
        if let Some(cost) = m.cost(spec.n) {
            log::debug!("{m}: {cost} fits per replication");
        }
    }
    let started = Instant::now();
    let validation = dgp.generate(spec.n_val, VALIDATION_STREAM)?;
    let run_rep = |r: usize| -> Result<Rep> {
        let data = dgp.generate(spec.n, r as u64)?;
        let mut full_spec = spec.inducer.clone();
        full_spec.seed = rng::derive(spec.seed, &[r as u64, u64::MAX]);
        let model = fit(&full_spec, &data)?;
        let risk = true_risk(&model, &data, &validation, &spec.loss)?;
        let methods = spec
            .methods
            .iter()
            .map(|m| {
                run_method(m, &data, Some(&validation), &spec.inducer, &spec.loss, spec.seed, r, spec.alpha, options.record_timing)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Rep { risk, methods })
    };
    let reps: Vec<Rep> =
        with_threads(options.threads, || (0..spec.n_reps).into_par_iter().map(run_rep).collect::<Result<Vec<_>>>())??;
    log::info!("{} replications of n = {} in {:.1}s", spec.n_reps, spec.n, started.elapsed().as_secs_f64());
    Ok(aggregate(spec, options, reps))
}

fn aggregate(spec: &ProblemSpec, options: &RunOptions, reps: Vec<Rep>) -> RunOutput {
    let risks: Vec<f64> = reps.iter().map(|r| r.risk).collect();
    let erisk = mean(&risks);
    let mut records = Vec::with_capacity(reps.len() * spec.methods.len());
    let mut summaries = Vec::with_capacity(spec.methods.len());
    for (m, method) in spec.methods.iter().enumerate() {
        let name = method.to_string();
        let per_rep: Vec<&MethodRep> = reps.iter().map(|r| &r.methods[m]).collect();
        let mut intervals: Vec<Option<IntervalEstimate>> = per_rep.iter().map(|r| r.interval.clone()).collect();
        let imputed = impute(&mut intervals, &name, spec.alpha);
        let n_imputed = imputed.iter().filter(|&&f| f).count();
        if n_imputed > 0 {
            log::warn!("{name}: imputed mean bounds in {n_imputed} of {} replications", reps.len());
        }
        let pqs: Option<Vec<f64>> = per_rep.iter().map(|r| r.pq).collect();
        let pq_avg = pqs.map(|v| mean(&v));
        let mut rows = Vec::with_capacity(reps.len());
        for (r, (mr, ci)) in per_rep.iter().zip(intervals).enumerate() {
            let mut ci = ci.expect("imputed");
            if options.truncate_at_zero {
                ci.lower = ci.lower.max(0.0);
                ci.upper = ci.upper.max(ci.lower);
            }
            let risk = reps[r].risk;
            let record = ReplicationRecord {
                dgp: spec.dgp.label(),
                n: spec.n,
                inducer: spec.inducer.kind.to_string(),
                loss: spec.loss.kind.to_string(),
                method: name.clone(),
                rep: r,
                point: ci.point,
                lower: ci.lower,
                upper: ci.upper,
                risk,
                pq: mr.pq,
                covered_risk: ci.contains(risk),
                covered_erisk: ci.contains(erisk),
                covered_pq: mr.pq.map(|pq| ci.contains(pq)),
                wall_time_s: mr.seconds,
                fits_used: mr.fits_used,
                covered_pq_avg: pq_avg.map(|pq| ci.contains(pq)),
                imputed: imputed[r],
                fallback_fits: mr.fallback_fits,
                actual_fits: mr.actual_fits,
            };
            rows.push(record.coverage_row());
            records.push(record);
        }
        let coverage = summarize(&rows, spec.alpha).expect("at least one replication");
        let fits: Vec<f64> = per_rep.iter().map(|r| r.fits_used as f64).collect();
        let actual: Vec<f64> = per_rep.iter().map(|r| r.actual_fits as f64).collect();
        summaries.push(MethodSummary {
            method: name,
            coverage,
            mean_fits_used: mean(&fits),
            mean_actual_fits: mean(&actual),
            fallback_fits: per_rep.iter().map(|r| r.fallback_fits).sum(),
            total_wall_time_s: per_rep.iter().map(|r| r.seconds).sum(),
        });
    }
    RunOutput { summary: RunSummary { problem: spec.clone(), expected_risk: erisk, methods: summaries }, records }
}

impl ReplicationRecord {
    pub fn coverage_row(&self) -> CoverageRow {
        CoverageRow {
            point: self.point,
            width: self.upper - self.lower,
            covered_risk: self.covered_risk,
            covered_erisk: self.covered_erisk,
            covered_pq: self.covered_pq,
            covered_pq_avg: self.covered_pq_avg,
            imputed: self.imputed,
        }
    }
}
