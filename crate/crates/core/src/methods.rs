//! Inference methods by name, the resampling plans each one needs, and their cost.
//!
//! Names are underscore-joined tokens:
//!
//! ```text
//! holdout_{p} | ho_{p}            rocv_{K}          rep_rocv_{R}_{K}
//! cv_{K|n}_{allpairs|within}      cort_{K}[_{p}]    conz_{R}_{K}[_{p}]
//! 52cv                            ncv_{R}_{K}       oob_{K}
//! 632plus_{K}                     bccv[_{R}][_bias] lsb_{K} | lsb_{R}_{K}
//! tsb_{R}_{K}
//! ```
//!
//! `p` is the training fraction in percent. Replace-one names accept a trailing
//! `_uncorrected` for the variance without the `1/sqrt(2)` correction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{usage, Error, Result};
use crate::inference::{RocvVariant, WaldVariant};
use crate::resampling::Scheme;

pub const GRAMMAR: &str = "holdout_{p} | ho_{p} | rocv_{K} | rep_rocv_{R}_{K} | cv_{K|n}_{allpairs|within} | \
cort_{K}[_{p}] | conz_{R}_{K}[_{p}] | 52cv | ncv_{R}_{K} | oob_{K} | 632plus_{K} | bccv[_{R}][_bias] | \
lsb_{K} | lsb_{R}_{K} | tsb_{R}_{K}   (p in percent; rocv/rep_rocv accept a trailing _uncorrected)";

const DEFAULT_P_TRAIN: f64 = 0.9;
const DEFAULT_BCCV_REPS: usize = 100;
/// Bias exponent of the nested CV interval.
pub const NCV_BIAS_EXPONENT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Holdout { p_train: f64 },
    Rocv { k: usize, variant: RocvVariant },
    Hrcv { r: usize, k: usize, variant: RocvVariant },
    /// `k = None` is leave-one-out.
    CvWald { k: Option<usize>, variant: WaldVariant },
    CorrectedT { k: usize, p_train: f64 },
    ConservativeZ { r: usize, k: usize, p_train: f64 },
    Cv52,
    NestedCv { r: usize, k: usize },
    Oob { k: usize },
    B632Plus { k: usize },
    Bccv { r: usize, bias: bool },
    /// `r` in-sample bootstrap replicates, `k` bootstrap replicates for the .632+ point.
    Lsb { r: usize, k: usize },
    Tsb { r: usize, k: usize },
}

/// A parsed method name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self { method }
    }

    /// Family identifier, e.g. `corrected_t` or `cv_wald_within`.
    pub fn id(&self) -> &'static str {
        match self.method {
            Method::Holdout { .. } => "holdout",
            Method::Rocv { .. } => "rocv",
            Method::Hrcv { .. } => "hrcv",
            Method::CvWald { variant: WaldVariant::AllPairs, .. } => "cv_wald_allpairs",
            Method::CvWald { variant: WaldVariant::WithinFold, .. } => "cv_wald_within",
            Method::CorrectedT { .. } => "corrected_t",
            Method::ConservativeZ { .. } => "conservative_z",
            Method::Cv52 => "cv52",
            Method::NestedCv { .. } => "nested_cv",
            Method::Oob { .. } => "oob",
            Method::B632Plus { .. } => "b632plus",
            Method::Bccv { bias: false, .. } => "bccv",
            Method::Bccv { bias: true, .. } => "bccv_bias",
            Method::Lsb { .. } => "lsb",
            Method::Tsb { .. } => "tsb",
        }
    }

    /// Resampling schemes evaluated for this method, in order.
    pub fn schemes(&self) -> Vec<Scheme> {
        match self.method {
            Method::Holdout { p_train } => vec![Scheme::Holdout { p_train }],
            Method::Rocv { k, .. } => vec![Scheme::KfoldCv { k }, Scheme::Rocv { k }],
            Method::Hrcv { r, k, .. } => vec![Scheme::RepeatedCv { r, k }, Scheme::Rorcv { r, k }],
            Method::CvWald { k: Some(k), .. } => vec![Scheme::KfoldCv { k }],
            Method::CvWald { k: None, .. } => vec![Scheme::Loocv],
            Method::CorrectedT { k, p_train } => vec![Scheme::Subsampling { k, p_train }],
            Method::ConservativeZ { r, k, p_train } => {
                vec![Scheme::Subsampling { k, p_train }, Scheme::PairedSubsampling { r, k, p_train }]
            }
            Method::Cv52 => vec![Scheme::RepeatedCv { r: 5, k: 2 }],
            Method::NestedCv { r, k } => vec![Scheme::NestedCv { r, k }],
            Method::Oob { k } => vec![Scheme::Bootstrap { k }],
            Method::B632Plus { k } => vec![Scheme::Bootstrap { k }, Scheme::Insample],
            Method::Bccv { r, bias: false } => vec![Scheme::Bccv { r }],
            Method::Bccv { r, bias: true } => vec![Scheme::Bccv { r }, Scheme::Loocv],
            Method::Lsb { r, k } => vec![Scheme::InsampleBootstrap { k: r }, Scheme::Bootstrap { k }, Scheme::Insample],
            Method::Tsb { r, k } => {
                vec![Scheme::TwoStageBootstrap { r, k }, Scheme::Bootstrap { k }, Scheme::Insample]
            }
        }
    }

    /// Number of model fits at data size `n`; `None` when it is random (BCCV).
    pub fn cost(&self, n: usize) -> Option<usize> {
        let half = n / 2;
        Some(match self.method {
            Method::Holdout { .. } => 1,
            Method::Rocv { k, .. } => (half + 2) * k,
            Method::Hrcv { r, k, .. } => (half + 2) * r * k,
            Method::CvWald { k, .. } => k.unwrap_or(n),
            Method::CorrectedT { k, .. } => k,
            Method::ConservativeZ { r, k, .. } => (2 * r + 1) * k,
            Method::Cv52 => 10,
            Method::NestedCv { r, k } => r * k * k,
            Method::Oob { k } => k,
            Method::B632Plus { k } => k + 1,
            Method::Bccv { .. } => return None,
            Method::Lsb { r, k } => 1 + r + k,
            Method::Tsb { r, k } => (r + 1) * (k + 1),
        })
    }

    /// Whether the method has a proxy quantity.
    pub fn has_proxy(&self) -> bool {
        matches!(self.method, Method::Holdout { .. } | Method::CvWald { .. } | Method::Rocv { .. } | Method::Hrcv { .. })
    }

    pub fn is_wald(&self) -> bool {
        !matches!(self.method, Method::NestedCv { .. } | Method::Bccv { .. } | Method::Lsb { .. } | Method::Tsb { .. })
    }

    pub fn parse(name: &str) -> Result<Self> {
        parse(name).map_err(|e| match e {
            Error::Usage(msg) => usage!("{msg}\nvalid method names: {GRAMMAR}"),
            other => other,
        })
    }
}

fn percent(p: f64) -> String {
    let v = p * 100.0;
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v}")
    }
}

fn suffix(variant: RocvVariant) -> &'static str {
    match variant {
        RocvVariant::Corrected => "",
        RocvVariant::Uncorrected => "_uncorrected",
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            Method::Holdout { p_train } => write!(f, "holdout_{}", percent(p_train)),
            Method::Rocv { k, variant } => write!(f, "rocv_{k}{}", suffix(variant)),
            Method::Hrcv { r, k, variant } => write!(f, "rep_rocv_{r}_{k}{}", suffix(variant)),
            Method::CvWald { k, variant } => {
                let k = k.map_or("n".to_string(), |k| k.to_string());
                let v = match variant {
                    WaldVariant::AllPairs => "allpairs",
                    WaldVariant::WithinFold => "within",
                };
                write!(f, "cv_{k}_{v}")
            }
            Method::CorrectedT { k, p_train } => write!(f, "cort_{k}_{}", percent(p_train)),
            Method::ConservativeZ { r, k, p_train } if p_train == DEFAULT_P_TRAIN => write!(f, "conz_{r}_{k}"),
            Method::ConservativeZ { r, k, p_train } => write!(f, "conz_{r}_{k}_{}", percent(p_train)),
            Method::Cv52 => f.write_str("52cv"),
            Method::NestedCv { r, k } => write!(f, "ncv_{r}_{k}"),
            Method::Oob { k } => write!(f, "oob_{k}"),
            Method::B632Plus { k } => write!(f, "632plus_{k}"),
            Method::Bccv { r, bias } => write!(f, "bccv_{r}{}", if bias { "_bias" } else { "" }),
            Method::Lsb { r, k } if r == k => write!(f, "lsb_{k}"),
            Method::Lsb { r, k } => write!(f, "lsb_{r}_{k}"),
            Method::Tsb { r, k } => write!(f, "tsb_{r}_{k}"),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodSpec::parse(s)
    }
}

impl Serialize for MethodSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MethodSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        MethodSpec::parse(&s).map_err(serde::de::Error::custom)
    }
}

struct Tokens<'a> {
    name: &'a str,
    rest: std::slice::Iter<'a, &'a str>,
}

impl<'a> Tokens<'a> {
    fn count(&mut self, what: &str) -> Result<usize> {
        let tok = self.rest.next().ok_or_else(|| usage!("method '{}' is missing {what}", self.name))?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(usage!("method '{}': {what} must be a positive integer, got '{tok}'", self.name)),
        }
    }

    fn percent(&mut self) -> Result<f64> {
        let tok = self.rest.next().ok_or_else(|| usage!("method '{}' is missing p_train", self.name))?;
        match tok.parse::<f64>() {
            Ok(v) if v > 0.0 && v < 100.0 => Ok(v / 100.0),
            _ => Err(usage!("method '{}': p_train must be a percentage in (0, 100), got '{tok}'", self.name)),
        }
    }

    fn peek(&self) -> Option<&'a str> {
        self.rest.clone().next().copied()
    }

    fn accept(&mut self, token: &str) -> bool {
        if self.peek() == Some(token) {
            self.rest.next();
            true
        } else {
            false
        }
    }

    fn variant(&mut self) -> RocvVariant {
        if self.accept("uncorrected") {
            RocvVariant::Uncorrected
        } else {
            RocvVariant::Corrected
        }
    }

    fn remaining(&self) -> usize {
        self.rest.len()
    }

    fn finish(mut self, method: Method) -> Result<MethodSpec> {
        match self.rest.next() {
            None => Ok(MethodSpec::new(method)),
            Some(tok) => Err(usage!("method '{}': unexpected token '{tok}'", self.name)),
        }
    }
}

fn parse(name: &str) -> Result<MethodSpec> {
    let parts: Vec<&str> = name.trim().split('_').collect();
    let (head, tail) = parts.split_first().expect("split yields at least one part");
    let mut t = Tokens { name, rest: tail.iter() };
    let method = match *head {
        "holdout" | "ho" => Method::Holdout { p_train: t.percent()? },
        "rocv" => Method::Rocv { k: t.count("K")?, variant: t.variant() },
        "rep" => {
            if !t.accept("rocv") {
                return Err(usage!("unknown method '{name}'"));
            }
            let r = t.count("R")?;
            let k = t.count("K")?;
            Method::Hrcv { r, k, variant: t.variant() }
        }
        "cv" => {
            let k = if t.accept("n") { None } else { Some(t.count("K")?) };
            let variant = if t.accept("allpairs") {
                WaldVariant::AllPairs
            } else if t.accept("within") {
                WaldVariant::WithinFold
            } else {
                return Err(usage!("method '{name}' needs a variance variant: allpairs or within"));
            };
            if k.is_none() && variant == WaldVariant::WithinFold {
                return Err(usage!("method '{name}': the within-fold variance is not applicable to leave-one-out CV"));
            }
            Method::CvWald { k, variant }
        }
        "cort" => {
            let k = t.count("K")?;
            let p_train = if t.remaining() > 0 { t.percent()? } else { DEFAULT_P_TRAIN };
            Method::CorrectedT { k, p_train }
        }
        "conz" => {
            let r = t.count("R")?;
            let k = t.count("K")?;
            let p_train = if t.remaining() > 0 { t.percent()? } else { DEFAULT_P_TRAIN };
            Method::ConservativeZ { r, k, p_train }
        }
        "52cv" => Method::Cv52,
        "ncv" => {
            let r = t.count("R")?;
            Method::NestedCv { r, k: t.count("K")? }
        }
        "oob" => Method::Oob { k: t.count("K")? },
        "632plus" => Method::B632Plus { k: t.count("K")? },
        "bccv" => {
            let r = match t.peek() {
                Some(tok) if tok != "bias" => t.count("R")?,
                _ => DEFAULT_BCCV_REPS,
            };
            Method::Bccv { r, bias: t.accept("bias") }
        }
        "lsb" => {
            let first = t.count("K")?;
            if t.remaining() > 0 {
                Method::Lsb { r: first, k: t.count("K")? }
            } else {
                Method::Lsb { r: first, k: first }
            }
        }
        "tsb" => {
            let r = t.count("R")?;
            Method::Tsb { r, k: t.count("K")? }
        }
        _ => return Err(usage!("unknown method '{name}'")),
    };
    t.finish(method)
}
