//! Gradient boosting and random forests over the histogram trees.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{ClassSet, Dataset, FeatureMatrix};
use super::tree::{grow_tree, BinnedMatrix, Criterion, Tree, TreeConfig};
use crate::error::{Error, Result};

/// L2 penalty on boosted leaf values.
const LEAF_L2: f64 = 1.0;
/// Lower bound on softmax hessians.
const MIN_HESSIAN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GbClassifier,
    GbRegressor,
    RfClassifier,
    RfRegressor,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::RfClassifier,
        ModelKind::RfRegressor,
        ModelKind::GbClassifier,
        ModelKind::GbRegressor,
    ];

    pub fn is_classifier(self) -> bool {
        matches!(self, ModelKind::GbClassifier | ModelKind::RfClassifier)
    }

    pub fn is_boosted(self) -> bool {
        matches!(self, ModelKind::GbClassifier | ModelKind::GbRegressor)
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::GbClassifier => "GB Classifier",
            ModelKind::GbRegressor => "GB Regressor",
            ModelKind::RfClassifier => "RF Classifier",
            ModelKind::RfRegressor => "RF Regressor",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::GbClassifier => "gb_classifier",
            ModelKind::GbRegressor => "gb_regressor",
            ModelKind::RfClassifier => "rf_classifier",
            ModelKind::RfRegressor => "rf_regressor",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub tree_count: usize,
    /// Shrinkage per boosting stage; ignored by forests.
    pub learning_rate: f64,
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Fraction of features drawn per split; forests only.
    pub feature_subsample: f64,
    /// Forests draw a bootstrap resample per tree; off trains every tree on all rows.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    pub seed: u64,
}

fn default_bootstrap() -> bool {
    true
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            tree_count: 100,
            learning_rate: 0.1,
            max_depth: Some(3),
            min_samples_leaf: 1,
            feature_subsample: 1.0,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.tree_count == 0 {
            return bad("tree_count must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must be in (0, 1], got {}", self.learning_rate));
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be >= 1".into());
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be >= 1".into());
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return bad(format!("feature_subsample must be in (0, 1], got {}", self.feature_subsample));
        }
        Ok(())
    }

    /// Boosting grid: 3 tree counts x 3 learning rates x 3 depths.
    pub fn default_gb_grid(seed: u64) -> Vec<HyperParams> {
        let mut grid = Vec::new();
        for tree_count in [50, 100, 200] {
            for learning_rate in [0.05, 0.1, 0.2] {
                for depth in [2, 3, 4] {
                    grid.push(HyperParams {
                        tree_count,
                        learning_rate,
                        max_depth: Some(depth),
                        seed,
                        ..HyperParams::default()
                    });
                }
            }
        }
        grid
    }

    /// Forest grid: 100 trees, unbounded or depth 8, sqrt(p)/p features per split.
    pub fn default_rf_grid(n_features: usize, seed: u64) -> Vec<HyperParams> {
        let sqrt_share = (n_features as f64).sqrt().ceil() / n_features.max(1) as f64;
        [None, Some(8)]
            .into_iter()
            .map(|max_depth| HyperParams {
                tree_count: 100,
                max_depth,
                feature_subsample: sqrt_share.min(1.0),
                seed,
                ..HyperParams::default()
            })
            .collect()
    }

    pub fn default_grid(kind: ModelKind, n_features: usize, seed: u64) -> Vec<HyperParams> {
        if kind.is_boosted() {
            Self::default_gb_grid(seed)
        } else {
            Self::default_rf_grid(n_features, seed)
        }
    }

    fn tree_config(&self, n_features: usize, forest: bool) -> TreeConfig {
        let max_features = forest.then(|| {
            ((self.feature_subsample * n_features as f64).ceil() as usize).clamp(1, n_features.max(1))
        });
        TreeConfig {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            max_features,
        }
    }
}

/// Output for one feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowPrediction {
    /// Predicted class index; regressors report the class whose value is nearest.
    pub class: usize,
    /// Per-class scores with `class` at the argmax: softmax probabilities
    /// (boosting), vote shares (forests) or negative distances to each class
    /// value (regressors).
    pub scores: Vec<f64>,
    /// Raw regression output.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Labels(Vec<usize>),
    Values(Vec<f64>),
}

/// A trained tree ensemble. Immutable once fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub(crate) kind: ModelKind,
    pub(crate) n_features: usize,
    pub(crate) feature_schema_version: String,
    pub(crate) classes: ClassSet,
    pub(crate) params: HyperParams,
    /// Boosting start scores (one per class, or the target mean); empty for forests.
    pub(crate) init: Vec<f64>,
    /// Boosted classifiers store `stage * n_classes + class`.
    pub(crate) trees: Vec<Tree>,
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

impl EnsembleModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn feature_schema_version(&self) -> &str {
        &self.feature_schema_version
    }

    pub fn classes(&self) -> &ClassSet {
        &self.classes
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn init(&self) -> &[f64] {
        &self.init
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn check_schema(&self, schema: &str, n_features: usize) -> Result<()> {
        if schema != self.feature_schema_version || n_features != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: format!("{} ({} features)", self.feature_schema_version, self.n_features),
                found: format!("{schema} ({n_features} features)"),
            });
        }
        Ok(())
    }

    fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let k = self.classes.len();
        match self.kind {
            ModelKind::GbClassifier => {
                let mut scores = self.init.clone();
                for (t, tree) in self.trees.iter().enumerate() {
                    scores[t % k] += tree.leaf(row)[0];
                }
                softmax_in_place(&mut scores);
                scores
            }
            ModelKind::GbRegressor => {
                vec![self.init[0] + self.trees.iter().map(|t| t.leaf(row)[0]).sum::<f64>()]
            }
            ModelKind::RfClassifier => {
                let mut votes = vec![0.0; k];
                for tree in &self.trees {
                    votes[argmax(tree.leaf(row))] += 1.0;
                }
                let n = self.trees.len() as f64;
                votes.iter_mut().for_each(|v| *v /= n);
                votes
            }
            ModelKind::RfRegressor => {
                vec![self.trees.iter().map(|t| t.leaf(row)[0]).sum::<f64>() / self.trees.len() as f64]
            }
        }
    }

    fn predict_unchecked(&self, row: &[f64]) -> RowPrediction {
        let raw = self.raw_scores(row);
        if self.kind.is_classifier() {
            RowPrediction {
                class: argmax(&raw),
                scores: raw,
                value: None,
            }
        } else {
            let value = raw[0];
            let scores: Vec<f64> = self.classes.values.iter().map(|c| -(value - c).abs()).collect();
            RowPrediction {
                class: argmax(&scores),
                scores,
                value: Some(value),
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<RowPrediction> {
        if row.len() != self.n_features {
            return Err(Error::SchemaMismatch {
                expected: format!("{} features", self.n_features),
                found: format!("{} features", row.len()),
            });
        }
        Ok(self.predict_unchecked(row))
    }

    /// Class indices for classifiers, raw outputs for regressors.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Predictions> {
        self.check_schema(x.schema(), x.n_features())?;
        let rows = x.rows().take(x.n_rows());
        Ok(if self.kind.is_classifier() {
            Predictions::Labels(rows.map(|r| self.predict_unchecked(r).class).collect())
        } else {
            Predictions::Values(rows.map(|r| self.predict_unchecked(r).value.unwrap_or(0.0)).collect())
        })
    }

    /// Predicted class per row for any kind (regressors snap to the nearest class value).
    pub fn predict_classes(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        self.check_schema(x.schema(), x.n_features())?;
        Ok(x.rows()
            .take(x.n_rows())
            .map(|r| self.predict_unchecked(r).class)
            .collect())
    }
}

/// Trains a model of `kind`; deterministic given `params.seed`.
pub fn fit(kind: ModelKind, data: &Dataset, params: &HyperParams) -> Result<EnsembleModel> {
    fit_traced(kind, data, params).map(|(m, _)| m)
}

/// Like [`fit`], also returning the training loss after each boosting stage
/// (log-loss or mean squared error). Forests return an empty trace.
pub fn fit_traced(kind: ModelKind, data: &Dataset, params: &HyperParams) -> Result<(EnsembleModel, Vec<f64>)> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::Data("cannot fit on an empty dataset".into()));
    }
    if data.x.n_features() == 0 {
        return Err(Error::Data("dataset has no features".into()));
    }
    if kind.is_classifier() {
        let first = data.labels[0];
        if data.labels.iter().all(|&l| l == first) {
            return Err(Error::Data("classification needs at least two distinct classes".into()));
        }
    }
    let binned = BinnedMatrix::new(&data.x);
    let (init, trees, trace) = match kind {
        ModelKind::GbClassifier => boost_classifier(&binned, data, params),
        ModelKind::GbRegressor => boost_regressor(&binned, data, params),
        ModelKind::RfClassifier | ModelKind::RfRegressor => (Vec::new(), grow_forest(kind, &binned, data, params), Vec::new()),
    };
    let model = EnsembleModel {
        kind,
        n_features: data.x.n_features(),
        feature_schema_version: data.x.schema().to_string(),
        classes: data.classes.clone(),
        params: params.clone(),
        init,
        trees,
    };
    Ok((model, trace))
}

fn all_rows(n: usize) -> Vec<u32> {
    (0..n as u32).collect()
}

fn boost_classifier(binned: &BinnedMatrix, data: &Dataset, params: &HyperParams) -> (Vec<f64>, Vec<Tree>, Vec<f64>) {
    let n = data.len();
    let k = data.classes.len();
    let mut counts = vec![0.0; k];
    for &l in &data.labels {
        counts[l] += 1.0;
    }
    // Laplace-smoothed log priors keep absent classes finite.
    let init: Vec<f64> = counts.iter().map(|c| ((c + 1.0) / (n as f64 + k as f64)).ln()).collect();
    let mut raw: Vec<f64> = (0..n).flat_map(|_| init.iter().copied()).collect();
    let mut probs = vec![0.0; n * k];
    let config = params.tree_config(data.x.n_features(), false);
    let criterion = Criterion::Newton { lambda: LEAF_L2 };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.tree_count * k);
    let mut trace = Vec::with_capacity(params.tree_count);
    let mut stats = vec![0.0; n * 2];
    let mut rows = all_rows(n);

    for _stage in 0..params.tree_count {
        probs.copy_from_slice(&raw);
        probs.chunks_exact_mut(k).for_each(softmax_in_place);
        for class in 0..k {
            for i in 0..n {
                let p = probs[i * k + class];
                let y = if data.labels[i] == class { 1.0 } else { 0.0 };
                stats[2 * i] = p - y;
                stats[2 * i + 1] = (p * (1.0 - p)).max(MIN_HESSIAN);
            }
            let mut tree = grow_tree(binned, &stats, 2, &mut rows, criterion, config, &mut rng);
            shrink(&mut tree, params.learning_rate);
            for i in 0..n {
                raw[i * k + class] += tree.leaf(data.x.row(i))[0];
            }
            trees.push(tree);
        }
        trace.push(log_loss(&raw, &data.labels, k));
    }
    (init, trees, trace)
}

fn boost_regressor(binned: &BinnedMatrix, data: &Dataset, params: &HyperParams) -> (Vec<f64>, Vec<Tree>, Vec<f64>) {
    let n = data.len();
    let targets = data.targets();
    let mean = targets.iter().sum::<f64>() / n as f64;
    let mut pred = vec![mean; n];
    let config = params.tree_config(data.x.n_features(), false);
    let criterion = Criterion::Newton { lambda: LEAF_L2 };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trees = Vec::with_capacity(params.tree_count);
    let mut trace = Vec::with_capacity(params.tree_count);
    let mut stats = vec![0.0; n * 2];
    let mut rows = all_rows(n);
    for _stage in 0..params.tree_count {
        for i in 0..n {
            stats[2 * i] = pred[i] - targets[i];
            stats[2 * i + 1] = 1.0;
        }
        let mut tree = grow_tree(binned, &stats, 2, &mut rows, criterion, config, &mut rng);
        shrink(&mut tree, params.learning_rate);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += tree.leaf(data.x.row(i))[0];
        }
        trees.push(tree);
        trace.push(pred.iter().zip(&targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n as f64);
    }
    (vec![mean], trees, trace)
}

fn shrink(tree: &mut Tree, rate: f64) {
    for node in &mut tree.nodes {
        if let super::tree::Node::Leaf { value } = node {
            value.iter_mut().for_each(|v| *v *= rate);
        }
    }
}

fn log_loss(raw: &[f64], labels: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for (scores, &l) in raw.chunks_exact(k).zip(labels) {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += lse - scores[l];
    }
    total / labels.len() as f64
}

fn grow_forest(kind: ModelKind, binned: &BinnedMatrix, data: &Dataset, params: &HyperParams) -> Vec<Tree> {
    let n = data.len();
    let (stats, channels, criterion) = if kind.is_classifier() {
        let k = data.classes.len();
        let mut s = vec![0.0; n * k];
        for (i, &l) in data.labels.iter().enumerate() {
            s[i * k + l] = 1.0;
        }
        (s, k, Criterion::Gini)
    } else {
        (data.targets(), 1, Criterion::Variance)
    };
    let config = params.tree_config(data.x.n_features(), true);
    (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            // Per-tree stream of the master seed: independent of scheduling.
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64 + 1);
            let mut rows: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n as u32)).collect()
            } else {
                all_rows(n)
            };
            grow_tree(binned, &stats, channels, &mut rows, criterion, config, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::tree::Node;

    fn classes(k: usize) -> ClassSet {
        ClassSet {
            names: (0..k).map(|i| i.to_string()).collect(),
            values: (0..k).map(|i| i as f64).collect(),
        }
    }

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = FeatureMatrix::new(3);
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 3;
            let row = [
                l as f64 * 2.0 + rng.random_range(-0.8..0.8),
                rng.random_range(-1.0..1.0),
                (l as f64 - 1.0) * rng.random_range(0.5..1.5),
            ];
            x.push_row(&row).unwrap();
            labels.push(l);
        }
        Dataset::new(x, labels, classes(3)).unwrap()
    }

    fn accuracy(model: &EnsembleModel, d: &Dataset) -> f64 {
        let pred = model.predict_classes(&d.x).unwrap();
        pred.iter().zip(&d.labels).filter(|(a, b)| a == b).count() as f64 / d.len() as f64
    }

    #[test]
    fn constant_target_regressor_predicts_constant() {
        let mut d = blobs(60, 1);
        d.labels = vec![2; 60];
        let m = fit(ModelKind::GbRegressor, &d, &HyperParams::default()).unwrap();
        for r in d.x.rows() {
            assert_eq!(m.predict_row(r).unwrap().value, Some(2.0));
        }
        assert_eq!(m.predict_row(&[100.0, -5.0, 3.0]).unwrap().class, 2);
    }

    #[test]
    fn init_only_regressor_predicts_mean() {
        let d = blobs(30, 2);
        let mut m = fit(ModelKind::GbRegressor, &d, &HyperParams { tree_count: 1, ..Default::default() }).unwrap();
        m.trees.clear();
        let mean = d.targets().iter().sum::<f64>() / 30.0;
        assert!((m.predict_row(&[0.0, 0.0, 0.0]).unwrap().value.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn single_class_input_is_rejected() {
        let mut d = blobs(20, 3);
        d.labels = vec![1; 20];
        assert!(fit(ModelKind::GbClassifier, &d, &HyperParams::default()).is_err());
        assert!(fit(ModelKind::RfClassifier, &d, &HyperParams::default()).is_err());
    }

    #[test]
    fn invalid_params_are_rejected() {
        let d = blobs(20, 3);
        for p in [
            HyperParams { tree_count: 0, ..Default::default() },
            HyperParams { learning_rate: 0.0, ..Default::default() },
            HyperParams { max_depth: Some(0), ..Default::default() },
            HyperParams { feature_subsample: 1.5, ..Default::default() },
        ] {
            assert!(matches!(fit(ModelKind::GbClassifier, &d, &p), Err(Error::Config(_))));
        }
    }

    #[test]
    fn every_kind_learns_blobs() {
        let train = blobs(300, 4);
        let test = blobs(150, 5);
        for kind in ModelKind::ALL {
            let params = HyperParams { tree_count: 30, max_depth: Some(4), feature_subsample: 0.67, ..Default::default() };
            let m = fit(kind, &train, &params).unwrap();
            assert!(accuracy(&m, &test) > 0.9, "{kind}");
            for t in m.trees() {
                for node in t.nodes() {
                    if let Node::Split { feature, .. } = node {
                        assert!(*feature < 3);
                    }
                }
            }
        }
    }

    #[test]
    fn boosting_loss_never_increases() {
        let d = blobs(200, 6);
        for kind in [ModelKind::GbClassifier, ModelKind::GbRegressor] {
            let params = HyperParams { tree_count: 40, learning_rate: 0.1, ..Default::default() };
            let (_, trace) = fit_traced(kind, &d, &params).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{kind}: {trace:?}");
        }
    }

    #[test]
    fn fits_are_deterministic() {
        let d = blobs(120, 7);
        for kind in ModelKind::ALL {
            let p = HyperParams { tree_count: 10, seed: 9, feature_subsample: 0.5, ..Default::default() };
            assert_eq!(fit(kind, &d, &p).unwrap(), fit(kind, &d, &p).unwrap());
        }
    }

    #[test]
    fn deep_single_tree_memorizes_training_rows() {
        let d = blobs(90, 8);
        let p = HyperParams {
            tree_count: 1,
            max_depth: None,
            bootstrap: false,
            ..Default::default()
        };
        let m = fit(ModelKind::RfClassifier, &d, &p).unwrap();
        assert_eq!(m.predict_classes(&d.x).unwrap(), d.labels);
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    #[test]
    fn wrong_width_is_a_schema_error() {
        let d = blobs(30, 9);
        let m = fit(ModelKind::RfRegressor, &d, &HyperParams { tree_count: 3, ..Default::default() }).unwrap();
        assert!(matches!(m.predict_row(&[1.0]), Err(Error::SchemaMismatch { .. })));
        let x = FeatureMatrix::new(40);
        assert!(m.predict(&x).is_err());
        let empty = FeatureMatrix::new(3);
        assert_eq!(m.predict(&empty).unwrap(), Predictions::Values(vec![]));
    }
}
