//! Datasets and the simulated data-generating processes.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Error, Result};
use crate::rng::{self, domain};

/// Stream id reserved for the validation sample of a problem.
pub const VALIDATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// An `n x p` sample with a real (regression) or 0/1 (classification) target.
///
/// Features are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    target: Vec<f64>,
    n_features: usize,
    task: Task,
}

impl Dataset {
    pub fn new(features: Vec<f64>, n_features: usize, target: Vec<f64>, task: Task) -> Result<Self> {
        let n = target.len();
        if n == 0 {
            return Err(usage!("a dataset needs at least one row"));
        }
        if features.len() != n * n_features {
            return Err(usage!(
                "feature buffer has {} values, expected {n} rows x {n_features} columns",
                features.len()
            ));
        }
        if features.iter().chain(&target).any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset contains non-finite values".into()));
        }
        if task == Task::Classification && target.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(usage!("classification targets must be 0 or 1"));
        }
        Ok(Self { features, target, n_features, task })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.features[i * self.n_features + j]).collect()
    }

    /// Rows at `indices`, in order, repeats included.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut target = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            target.push(self.target[i]);
        }
        Dataset { features, target, n_features: self.n_features, task: self.task }
    }

    /// Writes a CSV with header `x1..xp,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.n_features).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(self.n_features + 1);
        for i in 0..self.n_rows() {
            record.clear();
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            record.push(self.target[i].to_string());
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Reads a headered CSV; every column other than `target` becomes a feature.
    ///
    /// Without an explicit `task`, a target taking only the values 0 and 1 is
    /// treated as classification.
    pub fn read_csv<R: Read>(input: R, target: &str, task: Option<Task>) -> Result<Dataset> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader.headers()?.clone();
        let target_col = headers
            .iter()
            .position(|h| h == target)
            .ok_or_else(|| usage!("target column '{target}' not found in header"))?;
        let n_features = headers.len() - 1;
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            for (j, field) in record.iter().enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| {
                    Error::Config(format!("row {}: column {} is not numeric: '{field}'", line + 1, j + 1))
                })?;
                if j == target_col {
                    targets.push(value);
                } else {
                    features.push(value);
                }
            }
        }
        let task = task.unwrap_or_else(|| {
            if targets.iter().all(|&y| y == 0.0 || y == 1.0) {
                Task::Classification
            } else {
                Task::Regression
            }
        });
        Dataset::new(features, n_features, targets, task)
    }

    pub fn from_csv_path(path: &Path, target: &str, task: Option<Task>) -> Result<Dataset> {
        Dataset::read_csv(File::open(path)?, target, task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    BatesRegr,
    BatesClassif,
    Friedman1,
    #[serde(rename = "chen_10")]
    Chen10,
    #[serde(rename = "chen_10_null")]
    Chen10Null,
    CovLogistic,
    TabularFile,
}

/// Configuration of a data-generating process.
///
/// Unset fields take the defaults of the corresponding simulator: `p = 20`
/// and `theta = (1, 1, 1, 1, 1, 0, ..., 0)` for the Bates processes, `p = 10`
/// for Friedman1, unit noise for Bates and Friedman1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Covariance matrix given inline (cov_logistic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    /// Covariance matrix stored as a CSV matrix (cov_logistic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_csv: Option<PathBuf>,
    /// Raw data whose empirical covariance is used (cov_logistic).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Data file for the tabular DGP.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Target column (tabular file; also dropped from `source_csv`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    /// Rows reserved at the start of a tabular file for validation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_rows: Option<usize>,
}

impl DgpSpec {
    pub fn new(kind: DgpKind) -> Self {
        Self {
            kind,
            p: None,
            theta: None,
            sigma: None,
            sigma_csv: None,
            source_csv: None,
            noise_sd: None,
            seed: 0,
            path: None,
            target: None,
            task: None,
            validation_rows: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }

    /// Resolves benchmark names such as `bates_regr_20`, `friedman1` or `chen_10_null`.
    pub fn from_name(name: &str) -> Result<Self> {
        let spec = match name {
            "bates_regr" | "bates_regr_20" => DgpSpec::new(DgpKind::BatesRegr).with_p(20),
            "bates_regr_100" => DgpSpec::new(DgpKind::BatesRegr).with_p(100),
            "bates_classif" | "bates_classif_20" => DgpSpec::new(DgpKind::BatesClassif).with_p(20),
            "bates_classif_100" => DgpSpec::new(DgpKind::BatesClassif).with_p(100),
            "friedman1" => DgpSpec::new(DgpKind::Friedman1),
            "chen_10" => DgpSpec::new(DgpKind::Chen10),
            "chen_10_null" => DgpSpec::new(DgpKind::Chen10Null),
            "cov_logistic" => DgpSpec::new(DgpKind::CovLogistic),
            other => {
                return Err(usage!(
                    "unknown dgp '{other}' (expected one of bates_regr_20, bates_regr_100, \
                     bates_classif_20, bates_classif_100, friedman1, chen_10, chen_10_null, cov_logistic)"
                ))
            }
        };
        Ok(spec)
    }

    /// Short label used in result files.
    pub fn label(&self) -> String {
        match self.kind {
            DgpKind::BatesRegr => format!("bates_regr_{}", self.p.unwrap_or(20)),
            DgpKind::BatesClassif => format!("bates_classif_{}", self.p.unwrap_or(20)),
            DgpKind::Friedman1 => "friedman1".into(),
            DgpKind::Chen10 => "chen_10".into(),
            DgpKind::Chen10Null => "chen_10_null".into(),
            DgpKind::CovLogistic => "cov_logistic".into(),
            DgpKind::TabularFile => match &self.path {
                Some(p) => format!(
                    "file:{}",
                    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
                ),
                None => "tabular_file".into(),
            },
        }
    }
}

const CHEN_LATENT: usize = 6;
const CHEN_COPIES: usize = 10;
const COV_THETA_SUPPORT: [f64; 9] = [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];

#[derive(Debug)]
enum Law {
    Bates { theta: Vec<f64>, noise_sd: f64, classification: bool },
    Friedman1 { p: usize, noise_sd: f64 },
    Chen { null: bool, noise_sd: f64 },
    CovLogistic { chol: DMatrix<f64>, theta: Vec<f64> },
    Table { table: Arc<Dataset>, validation_rows: usize },
}

/// A resolved data-generating process. Generation is a pure function of
/// `(seed, stream, row)`, so instances can be shared across threads.
#[derive(Debug)]
pub struct Dgp {
    spec: DgpSpec,
    law: Law,
}

impl Dgp {
    pub fn new(spec: &DgpSpec) -> Result<Self> {
        let law = match spec.kind {
            DgpKind::BatesRegr | DgpKind::BatesClassif => {
                let p = spec.p.or(spec.theta.as_ref().map(Vec::len)).unwrap_or(20);
                let theta = match &spec.theta {
                    Some(t) => t.clone(),
                    None => (0..p).map(|j| if j < 5 { 1.0 } else { 0.0 }).collect(),
                };
                if theta.len() != p {
                    return Err(Error::Config(format!("theta has length {}, expected p = {p}", theta.len())));
                }
                Law::Bates {
                    theta,
                    noise_sd: spec.noise_sd.unwrap_or(1.0),
                    classification: spec.kind == DgpKind::BatesClassif,
                }
            }
            DgpKind::Friedman1 => {
                let p = spec.p.unwrap_or(10);
                if p < 5 {
                    return Err(Error::Config("friedman1 needs p >= 5".into()));
                }
                Law::Friedman1 { p, noise_sd: spec.noise_sd.unwrap_or(1.0) }
            }
            DgpKind::Chen10 | DgpKind::Chen10Null => Law::Chen {
                null: spec.kind == DgpKind::Chen10Null,
                noise_sd: spec.noise_sd.unwrap_or(0.2),
            },
            DgpKind::CovLogistic => {
                let sigma = resolve_covariance(spec)?;
                let p = sigma.nrows();
                let chol = checked_cholesky(&sigma)?;
                let theta = match &spec.theta {
                    Some(t) if t.len() != p => {
                        return Err(Error::Config(format!("theta has length {}, expected p = {p}", t.len())))
                    }
                    Some(t) => t.clone(),
                    None => {
                        let mut rng = rng::stream(spec.seed, &[domain::PARAMS]);
                        (0..p)
                            .map(|j| {
                                let z = COV_THETA_SUPPORT[rng::below(&mut rng, COV_THETA_SUPPORT.len())];
                                z / sigma[(j, j)].sqrt()
                            })
                            .collect()
                    }
                };
                Law::CovLogistic { chol, theta }
            }
            DgpKind::TabularFile => {
                let path = spec
                    .path
                    .as_ref()
                    .ok_or_else(|| Error::Config("tabular_file dgp needs 'path'".into()))?;
                let target = spec.target.as_deref().unwrap_or("y");
                let table = Dataset::from_csv_path(path, target, spec.task)?;
                let validation_rows = spec.validation_rows.unwrap_or(0);
                if validation_rows > table.n_rows() {
                    return Err(Error::Resource(format!(
                        "{} has {} rows, fewer than the {validation_rows} reserved for validation",
                        path.display(),
                        table.n_rows()
                    )));
                }
                Law::Table { table: Arc::new(table), validation_rows }
            }
        };
        Ok(Self { spec: spec.clone(), law })
    }

    pub fn spec(&self) -> &DgpSpec {
        &self.spec
    }

    pub fn task(&self) -> Task {
        match &self.law {
            Law::Bates { classification: true, .. } | Law::CovLogistic { .. } => Task::Classification,
            Law::Table { table, .. } => table.task(),
            _ => Task::Regression,
        }
    }

    pub fn n_features(&self) -> usize {
        match &self.law {
            Law::Bates { theta, .. } | Law::CovLogistic { theta, .. } => theta.len(),
            Law::Friedman1 { p, .. } => *p,
            Law::Chen { .. } => CHEN_LATENT * CHEN_COPIES,
            Law::Table { table, .. } => table.n_features(),
        }
    }

    /// Coefficient vector of the linear predictor, where the law has one.
    pub fn theta(&self) -> Option<&[f64]> {
        match &self.law {
            Law::Bates { theta, .. } | Law::CovLogistic { theta, .. } => Some(theta),
            _ => None,
        }
    }

    /// Draws `n` rows for `stream`. [`VALIDATION_STREAM`] addresses the
    /// validation sample; for tabular files it is the reserved leading block.
    pub fn generate(&self, n: usize, stream: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(usage!("cannot generate an empty dataset"));
        }
        if let Law::Table { table, validation_rows } = &self.law {
            return take_block(table, *validation_rows, n, stream);
        }
        let p = self.n_features();
        let mut features = Vec::with_capacity(n * p);
        let mut target = Vec::with_capacity(n);
        let mut latent = vec![0.0; CHEN_LATENT];
        for row in 0..n as u64 {
            let mut frng = rng::stream(self.spec.seed, &[domain::FEATURES, stream, row]);
            let mut trng = rng::stream(self.spec.seed, &[domain::TARGET, stream, row]);
            let start = features.len();
            let y = match &self.law {
                Law::Bates { theta, noise_sd, classification } => {
                    features.extend((0..p).map(|_| rng::standard_normal(&mut frng)));
                    let eta = dot(&features[start..], theta);
                    if *classification {
                        bernoulli(&mut trng, eta)
                    } else {
                        eta + noise_sd * rng::standard_normal(&mut trng)
                    }
                }
                Law::Friedman1 { p, noise_sd } => {
                    features.extend((0..*p).map(|_| rng::open_unit(&mut frng)));
                    let x = &features[start..];
                    10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                        + 20.0 * (x[2] - 0.5).powi(2)
                        + 10.0 * x[3]
                        + 5.0 * x[4]
                        + noise_sd * rng::standard_normal(&mut trng)
                }
                Law::Chen { null, noise_sd } => {
                    for slot in latent.iter_mut() {
                        *slot = rng::open_unit(&mut frng);
                    }
                    for &x in &latent {
                        for j in 0..CHEN_COPIES {
                            let scale = 0.01 + 0.5 * j as f64 / 10.0;
                            features.push(x + scale * 0.3 * rng::standard_normal(&mut frng));
                        }
                    }
                    let drivers: [f64; 3] = if *null {
                        let sd = 0.2f64.sqrt();
                        [0, 1, 2].map(|_| sd * rng::standard_normal(&mut trng))
                    } else {
                        [latent[0], latent[1], latent[2]]
                    };
                    chen_signal(drivers) + noise_sd * rng::standard_normal(&mut trng)
                }
                Law::CovLogistic { chol, theta } => {
                    let z: Vec<f64> = (0..p).map(|_| rng::standard_normal(&mut frng)).collect();
                    for i in 0..p {
                        features.push((0..=i).map(|k| chol[(i, k)] * z[k]).sum());
                    }
                    bernoulli(&mut trng, dot(&features[start..], theta))
                }
                Law::Table { .. } => unreachable!(),
            };
            target.push(y);
        }
        Dataset::new(features, p, target, self.task())
    }
}

/// Convenience wrapper: resolve `spec` and draw `n` rows for `stream`.
pub fn generate(spec: &DgpSpec, n: usize, stream: u64) -> Result<Dataset> {
    Dgp::new(spec)?.generate(n, stream)
}

fn chen_signal([x1, x2, x3]: [f64; 3]) -> f64 {
    0.25 * (4.0 * x1).exp() + 4.0 / (1.0 + (-20.0 * (x2 - 0.5)).exp()) + 3.0 * x3
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn bernoulli<R: rand::RngCore>(rng: &mut R, eta: f64) -> f64 {
    let prob = 1.0 / (1.0 + (-eta).exp());
    if rng::open_unit(rng) < prob {
        1.0
    } else {
        0.0
    }
}

fn take_block(table: &Dataset, validation_rows: usize, n: usize, stream: u64) -> Result<Dataset> {
    let (start, end) = if stream == VALIDATION_STREAM {
        if n > validation_rows {
            return Err(Error::Resource(format!(
                "requested {n} validation rows but only {validation_rows} are reserved"
            )));
        }
        (0, n)
    } else {
        let start = (stream as u128) * (n as u128) + validation_rows as u128;
        (start.min(usize::MAX as u128) as usize, (start + n as u128).min(usize::MAX as u128) as usize)
    };
    if end > table.n_rows() {
        return Err(Error::Resource(format!(
            "tabular data exhausted: stream {stream} needs rows {start}..{end} but the file has {}",
            table.n_rows()
        )));
    }
    let idx: Vec<usize> = (start..end).collect();
    Ok(table.select(&idx))
}

fn resolve_covariance(spec: &DgpSpec) -> Result<DMatrix<f64>> {
    if let Some(rows) = &spec.sigma {
        return matrix_from_rows(rows);
    }
    if let Some(path) = &spec.sigma_csv {
        return matrix_from_rows(&read_numeric_rows(File::open(path)?)?);
    }
    if let Some(path) = &spec.source_csv {
        let mut reader = csv::Reader::from_reader(File::open(path)?);
        let headers = reader.headers()?.clone();
        let drop = spec.target.as_deref().and_then(|t| headers.iter().position(|h| h == t));
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .enumerate()
                .filter(|(j, _)| Some(*j) != drop)
                .map(|(_, f)| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            rows.push(row);
        }
        return empirical_covariance(&rows);
    }
    let p = spec.p.unwrap_or(20);
    Ok(DMatrix::identity(p, p))
}

/// Sample covariance with denominator `n - 1`.
pub fn empirical_covariance(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::Config("covariance estimation needs at least two rows".into()));
    }
    let p = rows[0].len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Config("ragged rows in covariance source".into()));
    }
    let means: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = DMatrix::zeros(p, p);
    for r in rows {
        for a in 0..p {
            let da = r[a] - means[a];
            for b in a..p {
                cov[(a, b)] += da * (r[b] - means[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(cov)
}

fn read_numeric_rows<R: Read>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            // A non-numeric first line is a header.
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Config(format!("covariance csv line {}: {e}", i + 1))),
        }
    }
    Ok(rows)
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = rows.len();
    if p == 0 || rows.iter().any(|r| r.len() != p) {
        return Err(Error::Config("covariance matrix must be square and non-empty".into()));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

/// Lower Cholesky factor of a symmetric PSD matrix. Singular PSD matrices are
/// factored after a relative diagonal jitter of at most 1e-8.
fn checked_cholesky(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = sigma.nrows();
    let scale = (0..p).map(|i| sigma[(i, i)].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..p {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::Config(format!("covariance matrix is not symmetric at ({i}, {j})")));
            }
        }
    }
    for jitter in [0.0, 1e-12, 1e-10, 1e-8] {
        let shifted = sigma + DMatrix::identity(p, p) * (jitter * scale);
        if let Some(c) = nalgebra::Cholesky::new(shifted) {
            return Ok(c.l());
        }
    }
    Err(Error::Config("covariance matrix is not positive semi-definite".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ols_r2(data: &Dataset) -> f64 {
        let n = data.n_rows();
        let p = data.n_features();
        let x = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { data.row(i)[j - 1] });
        let y = nalgebra::DVector::from_column_slice(data.target());
        let beta = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
        let resid = &y - &x * beta;
        let ybar = y.mean();
        1.0 - resid.norm_squared() / y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>()
    }

    #[test]
    fn bates_regression_r2_near_five_sixths() {
        let spec = DgpSpec::from_name("bates_regr_20").unwrap().with_seed(11);
        let data = generate(&spec, 10_000, 0).unwrap();
        let r2 = ols_r2(&data);
        assert!((0.80..=0.86).contains(&r2), "R^2 = {r2}");
    }

    #[test]
    fn generation_is_bit_reproducible_and_streams_differ() {
        let spec = DgpSpec::from_name("friedman1").unwrap().with_seed(3);
        let a = generate(&spec, 50, 4).unwrap();
        let b = generate(&spec, 50, 4).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, 50, 5).unwrap();
        assert_ne!(a.target(), c.target());
    }

    #[test]
    fn prefix_rows_do_not_depend_on_n() {
        let spec = DgpSpec::from_name("bates_regr_20").unwrap().with_seed(9);
        let small = generate(&spec, 10, 2).unwrap();
        let large = generate(&spec, 30, 2).unwrap();
        assert_eq!(small.row(7), large.row(7));
        assert_eq!(small.target()[7], large.target()[7]);
    }

    #[test]
    fn chen_has_sixty_columns_and_null_shares_features() {
        let chen = generate(&DgpSpec::new(DgpKind::Chen10).with_seed(5), 40, 1).unwrap();
        let null = generate(&DgpSpec::new(DgpKind::Chen10Null).with_seed(5), 40, 1).unwrap();
        assert_eq!(chen.n_features(), 60);
        assert_eq!(chen.features(), null.features());
        assert_ne!(chen.target(), null.target());
    }

    #[test]
    fn friedman_noise_columns_carry_no_signal() {
        let spec = DgpSpec::new(DgpKind::Friedman1).with_seed(21);
        let data = generate(&spec, 20_000, 0).unwrap();
        let y = data.target();
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        for j in 5..10 {
            let col = data.column(j);
            let cbar = col.iter().sum::<f64>() / col.len() as f64;
            let cov: f64 = col.iter().zip(y).map(|(c, v)| (c - cbar) * (v - ybar)).sum::<f64>();
            let sc: f64 = col.iter().map(|c| (c - cbar).powi(2)).sum::<f64>().sqrt();
            let sy: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>().sqrt();
            let corr = cov / (sc * sy);
            assert!(corr.abs() < 0.03, "column {j}: corr {corr}");
        }
    }

    #[test]
    fn bates_classif_is_balanced() {
        let spec = DgpSpec::from_name("bates_classif_20").unwrap().with_seed(2);
        let data = generate(&spec, 10_000, 0).unwrap();
        let rate = data.target().iter().sum::<f64>() / 10_000.0;
        assert!((0.45..=0.55).contains(&rate), "{rate}");
        assert_eq!(data.task(), Task::Classification);
    }

    #[test]
    fn cov_logistic_theta_is_frozen_and_from_support() {
        let mut spec = DgpSpec::new(DgpKind::CovLogistic).with_seed(17);
        spec.sigma = Some(vec![vec![4.0, 1.0, 0.0], vec![1.0, 2.0, 0.5], vec![0.0, 0.5, 1.0]]);
        let a = Dgp::new(&spec).unwrap();
        let b = Dgp::new(&spec).unwrap();
        assert_eq!(a.theta(), b.theta());
        let diag = [4.0f64, 2.0, 1.0];
        for (t, d) in a.theta().unwrap().iter().zip(diag) {
            let z = t * d.sqrt();
            assert!(COV_THETA_SUPPORT.iter().any(|s| (s - z).abs() < 1e-12), "{z}");
        }
        let data = a.generate(20_000, 0).unwrap();
        let x0 = data.column(0);
        let var0 = x0.iter().map(|v| v * v).sum::<f64>() / x0.len() as f64;
        assert!((var0 - 4.0).abs() < 0.2, "{var0}");
    }

    #[test]
    fn invalid_covariance_is_a_configuration_error() {
        let mut spec = DgpSpec::new(DgpKind::CovLogistic);
        spec.sigma = Some(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(Dgp::new(&spec), Err(Error::Config(_))));
        spec.sigma = Some(vec![vec![1.0, 0.3], vec![0.2, 1.0]]);
        assert!(matches!(Dgp::new(&spec), Err(Error::Config(_))));
    }

    #[test]
    fn empirical_covariance_uses_n_minus_one() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let cov = empirical_covariance(&rows).unwrap();
        assert_eq!(cov[(0, 0)], 2.0);
        assert_eq!(cov[(0, 1)], 4.0);
        assert_eq!(cov[(1, 1)], 8.0);
    }

    #[test]
    fn tabular_blocks_are_disjoint_and_exhaust() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut text = String::from("a,b,y\n");
        for i in 0..25 {
            text.push_str(&format!("{i},{},{}\n", 2 * i, i % 2));
        }
        std::fs::write(&path, text).unwrap();
        let mut spec = DgpSpec::new(DgpKind::TabularFile);
        spec.path = Some(path);
        spec.validation_rows = Some(5);
        let dgp = Dgp::new(&spec).unwrap();
        assert_eq!(dgp.task(), Task::Classification);
        let val = dgp.generate(5, VALIDATION_STREAM).unwrap();
        assert_eq!(val.row(0), &[0.0, 0.0]);
        let r0 = dgp.generate(10, 0).unwrap();
        let r1 = dgp.generate(10, 1).unwrap();
        assert_eq!(r0.row(0), &[5.0, 10.0]);
        assert_eq!(r1.row(0), &[15.0, 30.0]);
        assert!(matches!(dgp.generate(10, 2), Err(Error::Resource(_))));
    }

    #[test]
    fn csv_round_trip() {
        let spec = DgpSpec::from_name("friedman1").unwrap();
        let data = generate(&spec, 5, 0).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 11);
        let back = Dataset::read_csv(buf.as_slice(), "y", Some(Task::Regression)).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn dataset_rejects_bad_inputs() {
        assert!(Dataset::new(vec![], 1, vec![], Task::Regression).is_err());
        assert!(Dataset::new(vec![1.0], 1, vec![0.5], Task::Classification).is_err());
        assert!(Dataset::new(vec![f64::NAN], 1, vec![0.0], Task::Regression).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], 1, vec![0.0], Task::Regression).is_err());
    }

    #[test]
    fn unknown_name_is_usage_error() {
        assert!(DgpSpec::from_name("nope").unwrap_err().is_usage());
    }
}
