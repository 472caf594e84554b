//! CART regression/classification trees and a bagged random forest.

use rand_chacha::ChaCha8Rng;

use super::InducerSpec;
use crate::data::{Dataset, Task};
use crate::rng::{self, domain};

pub(super) struct TreeParams {
    min_split: usize,
    min_leaf: usize,
    /// Minimum impurity decrease, relative to the root impurity.
    cp: f64,
    max_depth: usize,
    /// Features tried per node; all when `None`.
    mtry: Option<usize>,
}

impl TreeParams {
    pub(super) fn cart(spec: &InducerSpec, _p: usize) -> Self {
        let min_leaf = spec.min_leaf.unwrap_or_else(|| ((spec.min_split as f64 / 3.0).round() as usize).max(1));
        Self { min_split: spec.min_split, min_leaf, cp: spec.complexity_threshold, max_depth: spec.max_depth, mtry: None }
    }

    fn forest(spec: &InducerSpec, p: usize, task: Task) -> Self {
        let default_mtry = match task {
            Task::Classification => (p as f64).sqrt().floor() as usize,
            Task::Regression => p.div_ceil(3),
        };
        let mtry = spec.mtry.unwrap_or(default_mtry).clamp(1, p.max(1));
        Self { min_split: 2, min_leaf: spec.min_leaf.unwrap_or(1), cp: 0.0, max_depth: spec.max_depth, mtry: Some(mtry) }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A binary tree; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

struct Builder<'a> {
    data: &'a Dataset,
    params: &'a TreeParams,
    classification: bool,
    min_gain: f64,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Tree {
    /// Grows a tree on `rows` of `data` (repeats allowed). With `rng`, each
    /// node draws its candidate features from it.
    pub(super) fn grow(data: &Dataset, rows: &[usize], params: &TreeParams, rng: Option<&mut ChaCha8Rng>) -> Tree {
        let classification = data.task() == Task::Classification;
        let root = impurity(data, rows, classification);
        let mut builder = Builder {
            data,
            params,
            classification,
            min_gain: (params.cp * root).max(1e-12 * root),
            rng,
            nodes: Vec::new(),
            scratch: Vec::with_capacity(rows.len()),
        };
        builder.build(rows.to_vec(), 0);
        Tree { nodes: builder.nodes }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Total impurity: `n * gini` for classification, the sum of squares for regression.
fn impurity(data: &Dataset, rows: &[usize], classification: bool) -> f64 {
    let y = data.target();
    let n = rows.len() as f64;
    let mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n;
    if classification {
        2.0 * n * mean * (1.0 - mean)
    } else {
        rows.iter().map(|&i| (y[i] - mean).powi(2)).sum()
    }
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let y = self.data.target();
        let value = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf(value));
        if rows.len() < self.params.min_split || depth >= self.params.max_depth {
            return id;
        }
        let Some(split) = self.best_split(&rows) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.data.row(i)[split.feature] <= split.threshold);
        drop(rows);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split { feature: split.feature, threshold: split.threshold, left, right };
        id
    }

    fn candidates(&mut self) -> Vec<usize> {
        let p = self.data.n_features();
        match (self.params.mtry, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut all: Vec<usize> = (0..p).collect();
                for i in 0..m {
                    let j = i + rng::below(rng, p - i);
                    all.swap(i, j);
                }
                let mut chosen = all[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        if n < 2 * min_leaf {
            return None;
        }
        let y = self.data.target();
        let node_mean = rows.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let parent = impurity(self.data, rows, self.classification);
        if parent <= self.min_gain {
            return None;
        }
        let mut best: Option<Split> = None;
        for feature in self.candidates() {
            let pairs = &mut self.scratch;
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (self.data.row(i)[feature], y[i] - node_mean)));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for i in 1..n {
                let d = pairs[i - 1].1;
                sum += d;
                sum_sq += d * d;
                if i < min_leaf || n - i < min_leaf || pairs[i - 1].0 == pairs[i].0 {
                    continue;
                }
                let (nl, nr) = (i as f64, (n - i) as f64);
                let children = if self.classification {
                    let pl = sum / nl + node_mean;
                    let pr = (total - sum) / nr + node_mean;
                    2.0 * nl * pl * (1.0 - pl) + 2.0 * nr * pr * (1.0 - pr)
                } else {
                    (sum_sq - sum * sum / nl) + ((total_sq - sum_sq) - (total - sum).powi(2) / nr)
                };
                let gain = parent - children;
                if gain > best.as_ref().map_or(0.0, |b| b.gain) {
                    let (lo, hi) = (pairs[i - 1].0, pairs[i].0);
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Split { feature, threshold, gain });
                }
            }
        }
        best.filter(|b| b.gain >= self.min_gain)
    }
}

pub(super) fn grow_forest(spec: &InducerSpec, train: &Dataset) -> Vec<Tree> {
    let n = train.n_rows();
    let params = TreeParams::forest(spec, train.n_features(), train.task());
    (0..spec.n_trees as u64)
        .map(|t| {
            let mut rng = rng::stream(spec.seed, &[domain::FOREST, t]);
            let rows: Vec<usize> = (0..n).map(|_| rng::below(&mut rng, n)).collect();
            Tree::grow(train, &rows, &params, Some(&mut rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, DgpSpec};
    use crate::inducers::{fit, InducerKind};

    fn step_data() -> Dataset {
        // y jumps from 0 to 10 at x = 4.5; a noise column is constant.
        let x: Vec<f64> = (0..40).flat_map(|i| [f64::from(i % 10), 1.0]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i % 10 >= 5 { 10.0 } else { 0.0 }).collect();
        Dataset::new(x, 2, y, Task::Regression).unwrap()
    }

    #[test]
    fn finds_the_step() {
        let data = step_data();
        let rows: Vec<usize> = (0..40).collect();
        let params = TreeParams::cart(&InducerSpec::new(InducerKind::Cart), 2);
        let tree = Tree::grow(&data, &rows, &params, None);
        assert_eq!(tree.n_leaves(), 2);
        assert_eq!(tree.nodes[0], Node::Split { feature: 0, threshold: 4.5, left: 1, right: 2 });
        assert_eq!(tree.predict(&[3.0, 1.0]), 0.0);
        assert_eq!(tree.predict(&[7.0, 1.0]), 10.0);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // two identical columns: the split must use column 0
        let x: Vec<f64> = (0..30).flat_map(|i| [f64::from(i), f64::from(i)]).collect();
        let y: Vec<f64> = (0..30).map(|i| if i >= 15 { 1.0 } else { 0.0 }).collect();
        let data = Dataset::new(x, 2, y, Task::Classification).unwrap();
        let model = fit(&InducerSpec::new(InducerKind::Cart), &data).unwrap();
        let super::super::Predictor::Tree(tree) = &model.predictor else { panic!() };
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, threshold: 14.5, .. }));
    }

    #[test]
    fn min_split_stops_growth() {
        let data = step_data();
        let rows: Vec<usize> = (0..10).collect();
        let params = TreeParams::cart(&InducerSpec::new(InducerKind::Cart), 2);
        assert_eq!(Tree::grow(&data, &rows, &params, None).n_leaves(), 1);
    }

    #[test]
    fn depth_is_bounded() {
        let spec = DgpSpec::from_name("friedman1").unwrap().with_seed(1);
        let data = generate(&spec, 300, 0).unwrap();
        let mut s = InducerSpec::new(InducerKind::Cart);
        s.max_depth = 3;
        s.complexity_threshold = 0.0;
        s.min_split = 2;
        let rows: Vec<usize> = (0..300).collect();
        let tree = Tree::grow(&data, &rows, &TreeParams::cart(&s, 10), None);
        assert!(tree.depth() <= 3);
        assert!(tree.n_leaves() <= 8);
    }

    #[test]
    fn forest_beats_constant_on_friedman() {
        let spec = DgpSpec::from_name("friedman1").unwrap().with_seed(6);
        let train = generate(&spec, 300, 0).unwrap();
        let test = generate(&spec, 2000, 1).unwrap();
        let mse = |kind| {
            let m = fit(&InducerSpec::new(kind), &train).unwrap();
            m.predict(&test).iter().zip(test.target()).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / 2000.0
        };
        let forest = mse(InducerKind::RandomForest);
        let cart = mse(InducerKind::Cart);
        let constant = mse(InducerKind::MajorityFallback);
        assert!(forest < cart && cart < constant, "{forest} {cart} {constant}");
    }

    #[test]
    fn classification_leaves_are_probabilities() {
        let spec = DgpSpec::from_name("bates_classif_20").unwrap().with_seed(2);
        let data = generate(&spec, 200, 0).unwrap();
        for kind in [InducerKind::Cart, InducerKind::RandomForest] {
            let model = fit(&InducerSpec::new(kind), &data).unwrap();
            assert!(model.predict(&data).iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
