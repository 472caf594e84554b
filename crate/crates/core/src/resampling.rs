//! Split plans: the `(train, test)` index pairs produced by each resampling scheme.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Holdout { p_train: f64 },
    Subsampling { k: usize, p_train: f64 },
    /// `r` times: split into two disjoint halves, then `k` subsamplings per
    /// half with the test size `n - round(p_train * n)` of the full data.
    PairedSubsampling { r: usize, k: usize, p_train: f64 },
    KfoldCv { k: usize },
    Loocv,
    RepeatedCv { r: usize, k: usize },
    NestedCv { r: usize, k: usize },
    Rocv { k: usize },
    Rorcv { r: usize, k: usize },
    Bootstrap { k: usize },
    InsampleBootstrap { k: usize },
    Bccv { r: usize },
    TwoStageBootstrap { r: usize, k: usize },
    Insample,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Holdout { .. } => "holdout",
            Scheme::Subsampling { .. } => "subsampling",
            Scheme::PairedSubsampling { .. } => "paired_subsampling",
            Scheme::KfoldCv { .. } => "kfold_cv",
            Scheme::Loocv => "loocv",
            Scheme::RepeatedCv { .. } => "repeated_cv",
            Scheme::NestedCv { .. } => "nested_cv",
            Scheme::Rocv { .. } => "rocv",
            Scheme::Rorcv { .. } => "rorcv",
            Scheme::Bootstrap { .. } => "bootstrap",
            Scheme::InsampleBootstrap { .. } => "insample_bootstrap",
            Scheme::Bccv { .. } => "bccv",
            Scheme::TwoStageBootstrap { .. } => "two_stage_bootstrap",
            Scheme::Insample => "insample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    #[serde(flatten)]
    pub scheme: Scheme,
    #[serde(default)]
    pub seed: u64,
}

impl SchemeSpec {
    pub fn new(scheme: Scheme, seed: u64) -> Self {
        Self { scheme, seed }
    }
}

/// Which sub-procedure of a scheme a pair belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Main,
    /// Outer CV of nested CV.
    Outer,
    /// Inner CV of nested CV; `l` is the inner fold.
    Inner,
    /// Paired subsampling; `l` is the half (0 or 1).
    Half,
    /// Train = test = the whole (frame) data.
    InSample,
}

/// Hierarchy labels of a pair. `r` is the repetition / outer sample, `k` the
/// fold or iteration, `l` the inner fold or half. `multiplicity` is the
/// bootstrap count `m_{r,k}` of the left-out case (BCCV only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub role: Role,
    pub r: usize,
    pub k: usize,
    pub l: usize,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub multiplicity: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl Label {
    pub fn main(r: usize, k: usize) -> Self {
        Label { role: Role::Main, r, k, l: 0, multiplicity: 0 }
    }

    fn with(role: Role, r: usize, k: usize, l: usize) -> Self {
        Label { role, r, k, l, multiplicity: 0 }
    }
}

/// One train/test pair. Indices are row ids of the source data, or positions
/// within `frames[frame]` when `frame` is set (two-stage bootstrap).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<usize>,
}

/// The compact form of a (repeated) replace-one CV.
///
/// `d1` and `d2` are disjoint halves of size `floor(n/2)`. `folds[r][k]` lists
/// positions of `d1`; the `l`-th replaced CV uses the same positions with
/// `d1[l]` swapped for `d2[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaceOne {
    pub d1: Vec<usize>,
    pub d2: Vec<usize>,
    pub folds: Vec<Vec<Vec<usize>>>,
}

impl ReplaceOne {
    pub fn half_size(&self) -> usize {
        self.d1.len()
    }

    pub fn reps(&self) -> usize {
        self.folds.len()
    }

    pub fn k(&self) -> usize {
        self.folds.first().map_or(0, Vec::len)
    }

    /// Row ids of the CV data: `d1`, or `d1` with position `l` replaced.
    pub fn sample(&self, replaced: Option<usize>) -> Vec<usize> {
        let mut ids = self.d1.clone();
        if let Some(l) = replaced {
            ids[l] = self.d2[l];
        }
        ids
    }

    /// Pairs of the base CV (`None`) or of the `l`-th replaced CV, as row ids.
    pub fn cv_pairs(&self, replaced: Option<usize>) -> Vec<Pair> {
        let ids = self.sample(replaced);
        let mut pairs = Vec::with_capacity(self.reps() * self.k());
        for (r, folds) in self.folds.iter().enumerate() {
            for (k, fold) in folds.iter().enumerate() {
                let mut in_test = vec![false; ids.len()];
                fold.iter().for_each(|&p| in_test[p] = true);
                let test = fold.iter().map(|&p| ids[p]).collect();
                let train = (0..ids.len()).filter(|&p| !in_test[p]).map(|p| ids[p]).collect();
                pairs.push(Pair { train, test, label: Label::main(r, k), frame: None });
            }
        }
        pairs
    }

    /// Fold of every `d1` position in repetition `r`.
    pub fn fold_of(&self, r: usize) -> Vec<usize> {
        let mut out = vec![0; self.half_size()];
        for (k, fold) in self.folds[r].iter().enumerate() {
            for &p in fold {
                out[p] = k;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Pairs {
        pairs: Vec<Pair>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        frames: Vec<Vec<usize>>,
    },
    ReplaceOne(ReplaceOne),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: Scheme,
    pub n: usize,
    pub layout: Layout,
}

impl SplitPlan {
    /// Explicit pairs; empty for the replace-one layout, see [`SplitPlan::replace_one`].
    pub fn pairs(&self) -> &[Pair] {
        match &self.layout {
            Layout::Pairs { pairs, .. } => pairs,
            Layout::ReplaceOne(_) => &[],
        }
    }

    pub fn frames(&self) -> &[Vec<usize>] {
        match &self.layout {
            Layout::Pairs { frames, .. } => frames,
            Layout::ReplaceOne(_) => &[],
        }
    }

    pub fn replace_one(&self) -> Option<&ReplaceOne> {
        match &self.layout {
            Layout::ReplaceOne(ro) => Some(ro),
            Layout::Pairs { .. } => None,
        }
    }

    /// Number of train/test pairs, i.e. model fits the scheme calls for.
    pub fn pair_count(&self) -> usize {
        match &self.layout {
            Layout::Pairs { pairs, .. } => pairs.len(),
            Layout::ReplaceOne(ro) => (ro.half_size() + 1) * ro.reps() * ro.k(),
        }
    }

    /// Maps an index of `pair` to a source row id.
    pub fn resolve(&self, pair: &Pair, index: usize) -> usize {
        match pair.frame {
            Some(f) => self.frames()[f][index],
            None => index,
        }
    }

    /// Size of the index space `pair` lives in.
    pub fn frame_size(&self, pair: &Pair) -> usize {
        match pair.frame {
            Some(f) => self.frames()[f].len(),
            None => self.n,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn check_p_train(p_train: f64, n: usize) -> Result<(usize, usize)> {
    if !(p_train > 0.0 && p_train < 1.0) {
        return Err(usage!("p_train must lie in (0, 1), got {p_train}"));
    }
    let n1 = (p_train * n as f64).round() as usize;
    if n1 == 0 || n1 >= n {
        return Err(usage!("p_train = {p_train} leaves an empty train or test set at n = {n}"));
    }
    Ok((n1, n - n1))
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(usage!("K-fold CV needs 2 <= K <= n, got K = {k}, n = {n}"));
    }
    Ok(())
}

fn check_reps(r: usize, what: &str) -> Result<()> {
    if r == 0 {
        return Err(usage!("{what} must be at least 1"));
    }
    Ok(())
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    rng::shuffle(rng, &mut ids);
    ids
}

/// Deals `items` round-robin into `k` folds; the first `len % k` folds get one more.
fn deal(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::with_capacity(items.len() / k + 1); k];
    for (j, &item) in items.iter().enumerate() {
        folds[j % k].push(item);
    }
    folds
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// K-fold pairs over `items`, which are ids or positions.
fn cv_pairs(items: &[usize], k: usize, rng: &mut ChaCha8Rng, mut label: impl FnMut(usize) -> Label) -> Vec<Pair> {
    let mut order = items.to_vec();
    rng::shuffle(rng, &mut order);
    let folds = deal(&order, k);
    folds
        .iter()
        .enumerate()
        .map(|(j, fold)| {
            let train = folds.iter().enumerate().filter(|(i, _)| *i != j).flat_map(|(_, f)| f.iter().copied());
            Pair { train: sorted(train.collect()), test: sorted(fold.clone()), label: label(j), frame: None }
        })
        .collect()
}

fn subsample(items: &[usize], n_train: usize, rng: &mut ChaCha8Rng, label: Label) -> Pair {
    let mut order = items.to_vec();
    rng::shuffle(rng, &mut order);
    let test = order.split_off(n_train);
    Pair { train: sorted(order), test: sorted(test), label, frame: None }
}

/// Bootstrap draw of size `n` from `0..n`: sorted multiset and per-index counts.
fn bootstrap_draw(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut counts = vec![0usize; n];
    for _ in 0..n {
        counts[rng::below(rng, n)] += 1;
    }
    let multiset = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect();
    (multiset, counts)
}

fn out_of_bag(counts: &[usize]) -> Vec<usize> {
    counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i).collect()
}

pub fn generate_plan(spec: &SchemeSpec, n: usize, stream: u64) -> Result<SplitPlan> {
    if n == 0 {
        return Err(usage!("cannot resample an empty dataset"));
    }
    let mut rng = rng::stream(spec.seed, &[domain::PLAN, stream]);
    let all: Vec<usize> = (0..n).collect();
    let mut frames = Vec::new();
    let pairs = match spec.scheme {
        Scheme::Holdout { p_train } => {
            let (n1, _) = check_p_train(p_train, n)?;
            vec![subsample(&all, n1, &mut rng, Label::main(0, 0))]
        }
        Scheme::Subsampling { k, p_train } => {
            check_reps(k, "subsampling K")?;
            let (n1, _) = check_p_train(p_train, n)?;
            (0..k).map(|j| subsample(&all, n1, &mut rng, Label::main(0, j))).collect()
        }
        Scheme::PairedSubsampling { r, k, p_train } => {
            check_reps(r, "paired subsampling R")?;
            check_reps(k, "paired subsampling K")?;
            let (_, n2) = check_p_train(p_train, n)?;
            let half = n / 2;
            if half <= n2 {
                return Err(usage!("halves of size {half} cannot hold a test set of size {n2}"));
            }
            let mut pairs = Vec::with_capacity(2 * r * k);
            for rep in 0..r {
                let order = permutation(&mut rng, n);
                for (t, part) in [&order[..half], &order[half..2 * half]].into_iter().enumerate() {
                    for j in 0..k {
                        pairs.push(subsample(part, half - n2, &mut rng, Label::with(Role::Half, rep, j, t)));
                    }
                }
            }
            pairs
        }
        Scheme::KfoldCv { k } => {
            check_k(k, n)?;
            cv_pairs(&all, k, &mut rng, |j| Label::main(0, j))
        }
        Scheme::Loocv => {
            check_k(n, n)?;
            (0..n)
                .map(|i| Pair {
                    train: all.iter().copied().filter(|&j| j != i).collect(),
                    test: vec![i],
                    label: Label::main(0, i),
                    frame: None,
                })
                .collect()
        }
        Scheme::RepeatedCv { r, k } => {
            check_reps(r, "repeated CV R")?;
            check_k(k, n)?;
            (0..r).flat_map(|rep| cv_pairs(&all, k, &mut rng, |j| Label::main(rep, j))).collect()
        }
        Scheme::NestedCv { r, k } => {
            check_reps(r, "nested CV R")?;
            check_k(k, n)?;
            if k < 3 {
                return Err(usage!("nested CV needs K >= 3 so the inner CV has at least 2 folds"));
            }
            if n - n.div_ceil(k) < k - 1 {
                return Err(usage!("outer training sets at n = {n} are too small for an inner {}-fold CV", k - 1));
            }
            let mut pairs = Vec::with_capacity(r * k * k);
            for rep in 0..r {
                let outer = cv_pairs(&all, k, &mut rng, |j| Label::with(Role::Outer, rep, j, 0));
                for pair in outer {
                    let fold = pair.label.k;
                    let inner =
                        cv_pairs(&pair.train, k - 1, &mut rng, |l| Label::with(Role::Inner, rep, fold, l));
                    pairs.push(pair);
                    pairs.extend(inner);
                }
            }
            pairs
        }
        Scheme::Rocv { k } => return replace_one(spec.scheme, n, 1, k, &mut rng),
        Scheme::Rorcv { r, k } => {
            check_reps(r, "replace-one repeated CV R")?;
            return replace_one(spec.scheme, n, r, k, &mut rng);
        }
        Scheme::Bootstrap { k } => {
            check_reps(k, "bootstrap K")?;
            (0..k)
                .map(|j| {
                    let (train, counts) = bootstrap_draw(&mut rng, n);
                    Pair { train, test: out_of_bag(&counts), label: Label::main(0, j), frame: None }
                })
                .collect()
        }
        Scheme::InsampleBootstrap { k } => {
            check_reps(k, "in-sample bootstrap K")?;
            (0..k)
                .map(|j| {
                    let (train, _) = bootstrap_draw(&mut rng, n);
                    Pair { test: train.clone(), train, label: Label::main(0, j), frame: None }
                })
                .collect()
        }
        Scheme::Bccv { r } => {
            check_reps(r, "BCCV R")?;
            if n < 2 {
                return Err(usage!("BCCV needs n >= 2"));
            }
            let mut pairs = Vec::new();
            for rep in 0..r {
                let (_, counts) = bootstrap_draw(&mut rng, n);
                let unique: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
                for (j, &case) in unique.iter().enumerate() {
                    let train = (0..n)
                        .filter(|&i| i != case)
                        .flat_map(|i| std::iter::repeat_n(i, counts[i]))
                        .collect();
                    let mut label = Label::main(rep, j);
                    label.multiplicity = counts[case];
                    pairs.push(Pair { train, test: vec![case], label, frame: None });
                }
            }
            pairs
        }
        Scheme::TwoStageBootstrap { r, k } => {
            check_reps(r, "two-stage bootstrap R")?;
            check_reps(k, "two-stage bootstrap K")?;
            let mut pairs = Vec::with_capacity(r * (k + 1));
            for rep in 0..r {
                let (outer, _) = bootstrap_draw(&mut rng, n);
                frames.push(outer);
                for j in 0..k {
                    let (train, counts) = bootstrap_draw(&mut rng, n);
                    pairs.push(Pair { train, test: out_of_bag(&counts), label: Label::main(rep, j), frame: Some(rep) });
                }
                pairs.push(Pair {
                    train: all.clone(),
                    test: all.clone(),
                    label: Label::with(Role::InSample, rep, k, 0),
                    frame: Some(rep),
                });
            }
            pairs
        }
        Scheme::Insample => {
            vec![Pair { train: all.clone(), test: all, label: Label::with(Role::InSample, 0, 0, 0), frame: None }]
        }
    };
    Ok(SplitPlan { scheme: spec.scheme, n, layout: Layout::Pairs { pairs, frames } })
}

fn replace_one(scheme: Scheme, n: usize, reps: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<SplitPlan> {
    let half = n / 2;
    if k < 2 || k > half {
        return Err(usage!("replace-one CV needs 2 <= K <= floor(n/2), got K = {k}, n = {n}"));
    }
    // With odd n the last shuffled index is dropped.
    let order = permutation(rng, n);
    let d1 = order[..half].to_vec();
    let d2 = order[half..2 * half].to_vec();
    let positions: Vec<usize> = (0..half).collect();
    let folds = (0..reps)
        .map(|_| {
            let mut p = positions.clone();
            rng::shuffle(rng, &mut p);
            deal(&p, k).into_iter().map(sorted).collect()
        })
        .collect();
    Ok(SplitPlan { scheme, n, layout: Layout::ReplaceOne(ReplaceOne { d1, d2, folds }) })
}

/// Multiplicity of every index of `0..size` in `train`.
pub fn train_counts(train: &[usize], size: usize) -> Vec<u32> {
    let mut counts = vec![0u32; size];
    for &i in train {
        counts[i] += 1;
    }
    counts
}

/// Number of distinct indices in `train`.
pub fn unique_count(train: &[usize]) -> usize {
    let mut seen = BTreeMap::new();
    for &i in train {
        *seen.entry(i).or_insert(0usize) += 1;
    }
    seen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn plan(scheme: Scheme, n: usize) -> SplitPlan {
        generate_plan(&SchemeSpec::new(scheme, 42), n, 0).unwrap()
    }

    #[test]
    fn kfold_example() {
        let p = plan(Scheme::KfoldCv { k: 3 }, 6);
        assert_eq!(p.pair_count(), 3);
        let mut all: Vec<usize> = p.pairs().iter().flat_map(|q| q.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
        for q in p.pairs() {
            assert_eq!(q.test.len(), 2);
            assert_eq!(q.train.len(), 4);
            assert!(q.train.iter().all(|i| !q.test.contains(i)));
        }
    }

    #[test]
    fn holdout_example() {
        let p = plan(Scheme::Holdout { p_train: 0.9 }, 10);
        assert_eq!(p.pair_count(), 1);
        assert_eq!(p.pairs()[0].train.len(), 9);
        assert_eq!(p.pairs()[0].test.len(), 1);
    }

    #[test]
    fn nested_cv_example() {
        let p = plan(Scheme::NestedCv { r: 3, k: 5 }, 100);
        assert_eq!(p.pair_count(), 75);
        let outer = p.pairs().iter().filter(|q| q.label.role == Role::Outer).count();
        assert_eq!(outer, 15);
        for q in p.pairs().iter().filter(|q| q.label.role == Role::Inner) {
            let parent = p
                .pairs()
                .iter()
                .find(|o| o.label.role == Role::Outer && o.label.r == q.label.r && o.label.k == q.label.k)
                .unwrap();
            assert!(q.train.iter().chain(&q.test).all(|i| parent.train.contains(i)));
            assert_eq!(q.train.len() + q.test.len(), parent.train.len());
        }
    }

    #[test]
    fn two_stage_bootstrap_example() {
        let p = plan(Scheme::TwoStageBootstrap { r: 4, k: 3 }, 30);
        assert_eq!(p.pair_count(), 16);
        assert_eq!(p.frames().len(), 4);
        let insample: Vec<_> = p.pairs().iter().filter(|q| q.label.role == Role::InSample).collect();
        assert_eq!(insample.len(), 4);
        for q in insample {
            assert_eq!(q.train, q.test);
            assert_eq!(q.train.len(), 30);
        }
    }

    #[test]
    fn rocv_counts_and_single_swap() {
        let p = plan(Scheme::Rocv { k: 5 }, 21);
        let ro = p.replace_one().unwrap();
        assert_eq!(ro.half_size(), 10);
        assert_eq!(p.pair_count(), (10 + 1) * 5);
        assert!(ro.d1.iter().all(|i| !ro.d2.contains(i)));
        let base = ro.cv_pairs(None);
        for l in 0..10 {
            let replaced = ro.cv_pairs(Some(l));
            for (b, q) in base.iter().zip(&replaced) {
                let diff_train = b.train.iter().filter(|i| !q.train.contains(i)).count();
                let diff_test = b.test.iter().filter(|i| !q.test.contains(i)).count();
                assert!(diff_train + diff_test <= 1);
            }
        }
    }

    #[test]
    fn bccv_pairs_and_multiplicities() {
        let p = plan(Scheme::Bccv { r: 3 }, 20);
        for rep in 0..3 {
            let pairs: Vec<_> = p.pairs().iter().filter(|q| q.label.r == rep).collect();
            let total: usize = pairs.iter().map(|q| q.label.multiplicity).sum();
            assert_eq!(total, 20);
            for q in &pairs {
                assert_eq!(q.train.len(), 20 - q.label.multiplicity);
                assert!(!q.train.contains(&q.test[0]));
            }
        }
    }

    #[test]
    fn incompatible_parameters_are_usage_errors() {
        let bad = [
            Scheme::KfoldCv { k: 7 },
            Scheme::KfoldCv { k: 1 },
            Scheme::Holdout { p_train: 1.0 },
            Scheme::Rocv { k: 4 },
            Scheme::NestedCv { r: 1, k: 2 },
            Scheme::Subsampling { k: 0, p_train: 0.5 },
        ];
        for scheme in bad {
            let err = generate_plan(&SchemeSpec::new(scheme, 0), 6, 0).unwrap_err();
            assert!(err.is_usage(), "{scheme:?}");
        }
    }

    #[test]
    fn plan_json_round_trip() {
        let p = plan(Scheme::TwoStageBootstrap { r: 2, k: 2 }, 8);
        let back: SplitPlan = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
        let p = plan(Scheme::Rorcv { r: 2, k: 2 }, 8);
        let back: SplitPlan = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        #[test]
        fn cv_family_partitions(n in 4usize..60, k in 2usize..8, r in 1usize..3, seed: u64) {
            prop_assume!(k <= n);
            let p = generate_plan(&SchemeSpec::new(Scheme::RepeatedCv { r, k }, seed), n, 3).unwrap();
            prop_assert_eq!(p.pair_count(), r * k);
            for rep in 0..r {
                let folds: Vec<_> = p.pairs().iter().filter(|q| q.label.r == rep).collect();
                let mut all: Vec<usize> = folds.iter().flat_map(|q| q.test.clone()).collect();
                all.sort_unstable();
                prop_assert_eq!(&all, &(0..n).collect::<Vec<_>>());
                let sizes: Vec<usize> = folds.iter().map(|q| q.test.len()).collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                for q in &folds {
                    prop_assert_eq!(q.train.len() + q.test.len(), n);
                }
            }
        }

        #[test]
        fn bootstrap_family(n in 1usize..80, k in 1usize..6, seed: u64) {
            let p = generate_plan(&SchemeSpec::new(Scheme::Bootstrap { k }, seed), n, 0).unwrap();
            for q in p.pairs() {
                prop_assert_eq!(q.train.len(), n);
                let counts = train_counts(&q.train, n);
                for i in 0..n {
                    prop_assert_eq!(counts[i] == 0, q.test.contains(&i));
                }
            }
        }

        #[test]
        fn subsampling_sizes(n in 3usize..100, p_train in 0.2f64..0.8, seed: u64) {
            let plan = generate_plan(&SchemeSpec::new(Scheme::Subsampling { k: 4, p_train }, seed), n, 0).unwrap();
            let n1 = (p_train * n as f64).round() as usize;
            for q in plan.pairs() {
                prop_assert_eq!(q.train.len(), n1);
                prop_assert_eq!(q.test.len(), n - n1);
                prop_assert!(q.train.iter().all(|i| !q.test.contains(i)));
            }
        }

        #[test]
        fn paired_halves_disjoint(n in 20usize..80, seed: u64) {
            let plan = generate_plan(
                &SchemeSpec::new(Scheme::PairedSubsampling { r: 2, k: 3, p_train: 0.9 }, seed), n, 0,
            ).unwrap();
            prop_assert_eq!(plan.pair_count(), 12);
            for rep in 0..2 {
                let half = |t: usize| {
                    let mut ids: Vec<usize> = plan.pairs().iter()
                        .filter(|q| q.label.r == rep && q.label.l == t && q.label.k == 0)
                        .flat_map(|q| q.train.iter().chain(&q.test).copied())
                        .collect();
                    ids.sort_unstable();
                    ids
                };
                let (a, b) = (half(0), half(1));
                prop_assert_eq!(a.len(), n / 2);
                prop_assert_eq!(b.len(), n / 2);
                prop_assert!(a.iter().all(|i| !b.contains(i)));
            }
        }

        #[test]
        fn plans_are_deterministic(n in 10usize..40, seed: u64, stream: u64) {
            let spec = SchemeSpec::new(Scheme::NestedCv { r: 2, k: 3 }, seed);
            prop_assert_eq!(generate_plan(&spec, n, stream).unwrap(), generate_plan(&spec, n, stream).unwrap());
        }
    }
}
