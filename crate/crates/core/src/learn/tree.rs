//! Histogram-based CART used by both ensembles.
//!
//! Each feature column is discretized once per fit into at most
//! [`MAX_BINS`] ordered bins whose upper edges are actual data values, so a
//! split "bin <= b" is exactly the test `x <= edge[b]` at prediction time.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::FeatureMatrix;

pub(crate) const MAX_BINS: usize = 256;

/// One node of a fitted tree. Children always have larger indices than
/// their parent.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Column-major bin indices plus the upper edge of every bin.
pub(crate) struct BinnedMatrix {
    n_rows: usize,
    bins: Vec<u8>,
    edges: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub(crate) fn new(x: &FeatureMatrix) -> Self {
        let n_rows = x.n_rows();
        let n_features = x.n_features();
        let mut bins = vec![0u8; n_rows * n_features];
        let mut edges = Vec::with_capacity(n_features);
        let mut column = Vec::with_capacity(n_rows);
        for f in 0..n_features {
            column.clear();
            column.extend((0..n_rows).map(|r| x.get(r, f)));
            let feature_edges = bin_edges(&mut column);
            let out = &mut bins[f * n_rows..(f + 1) * n_rows];
            for (r, slot) in out.iter_mut().enumerate() {
                let v = x.get(r, f);
                *slot = feature_edges.partition_point(|&e| e < v) as u8;
            }
            edges.push(feature_edges);
        }
        BinnedMatrix { n_rows, bins, edges }
    }

    fn column(&self, feature: usize) -> &[u8] {
        &self.bins[feature * self.n_rows..(feature + 1) * self.n_rows]
    }

    fn n_features(&self) -> usize {
        self.edges.len()
    }
}

/// Distinct values when there are few of them, otherwise quantile cut points.
fn bin_edges(values: &mut [f64]) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut unique: Vec<f64> = Vec::new();
    for &v in values.iter() {
        if unique.last() != Some(&v) {
            unique.push(v);
        }
    }
    if unique.len() <= MAX_BINS {
        return unique;
    }
    let n = values.len();
    let mut edges: Vec<f64> = (1..MAX_BINS).map(|i| values[i * n / MAX_BINS - 1]).collect();
    edges.push(values[n - 1]);
    edges.dedup();
    edges
}

/// Split quality measure; every variant scores a node from channel sums.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Criterion {
    /// One-hot class channels; leaf = class fractions.
    Gini,
    /// Single target channel; leaf = mean.
    Variance,
    /// Gradient and hessian channels; leaf = -G / (H + lambda).
    Newton { lambda: f64 },
}

impl Criterion {
    /// Larger is purer; gain = score(left) + score(right) - score(parent).
    fn score(self, sums: &[f64], count: f64) -> f64 {
        match self {
            Criterion::Gini => sums.iter().map(|s| s * s).sum::<f64>() / count,
            Criterion::Variance => sums[0] * sums[0] / count,
            Criterion::Newton { lambda } => sums[0] * sums[0] / (sums[1] + lambda),
        }
    }

    fn leaf(self, sums: &[f64], count: f64) -> Vec<f64> {
        match self {
            Criterion::Gini | Criterion::Variance => sums.iter().map(|s| s / count).collect(),
            Criterion::Newton { lambda } => vec![-sums[0] / (sums[1] + lambda)],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` = all.
    pub max_features: Option<usize>,
}

/// Fits one tree over `rows` (indices into `binned`, duplicates allowed).
/// `stats` is row-major with `channels` values per row.
pub(crate) fn grow_tree(
    binned: &BinnedMatrix,
    stats: &[f64],
    channels: usize,
    rows: &mut [u32],
    criterion: Criterion,
    config: TreeConfig,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let mut grower = Grower {
        binned,
        stats,
        channels,
        criterion,
        config,
        nodes: Vec::new(),
        hist: vec![0.0; MAX_BINS * (channels + 1)],
        features: (0..binned.n_features()).collect(),
    };
    grower.grow(rows, 0, rng);
    Tree { nodes: grower.nodes }
}

struct Grower<'a> {
    binned: &'a BinnedMatrix,
    stats: &'a [f64],
    channels: usize,
    criterion: Criterion,
    config: TreeConfig,
    nodes: Vec<Node>,
    hist: Vec<f64>,
    features: Vec<usize>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl Grower<'_> {
    fn totals(&self, rows: &[u32]) -> Vec<f64> {
        let m = self.channels;
        let mut sums = vec![0.0; m];
        for &r in rows {
            let s = &self.stats[r as usize * m..(r as usize + 1) * m];
            for (acc, v) in sums.iter_mut().zip(s) {
                *acc += v;
            }
        }
        sums
    }

    fn grow(&mut self, rows: &mut [u32], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let sums = self.totals(rows);
        let count = rows.len() as f64;
        let at_depth_limit = self.config.max_depth.is_some_and(|d| depth >= d);
        let split = if at_depth_limit || rows.len() < 2 * self.config.min_samples_leaf.max(1) {
            None
        } else {
            self.best_split(rows, &sums, rng)
        };
        let Some(split) = split else {
            self.nodes.push(Node::Leaf {
                value: self.criterion.leaf(&sums, count),
            });
            return self.nodes.len() - 1;
        };

        let column = self.binned.column(split.feature);
        let mut mid = 0;
        for j in 0..rows.len() {
            if (column[rows[j] as usize] as usize) <= split.bin {
                rows.swap(mid, j);
                mid += 1;
            }
        }
        let index = self.nodes.len();
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: self.binned.edges[split.feature][split.bin],
            left: 0,
            right: 0,
        });
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[index] {
            *l = left;
            *r = right;
        }
        index
    }

    fn candidate_features(&mut self, rng: &mut ChaCha8Rng) -> usize {
        let p = self.features.len();
        match self.config.max_features {
            Some(k) if k < p => {
                // partial Fisher-Yates over a persistent permutation
                for i in 0..k {
                    let j = rng.random_range(i..p);
                    self.features.swap(i, j);
                }
                k
            }
            _ => {
                for (i, f) in self.features.iter_mut().enumerate() {
                    *f = i;
                }
                p
            }
        }
    }

    fn best_split(&mut self, rows: &[u32], sums: &[f64], rng: &mut ChaCha8Rng) -> Option<BestSplit> {
        let m = self.channels;
        let width = m + 1;
        let count = rows.len() as f64;
        let parent = self.criterion.score(sums, count);
        let min_leaf = self.config.min_samples_leaf.max(1) as f64;
        let mut best: Option<BestSplit> = None;
        let threshold = 1e-12 * parent.abs().max(1.0);

        let n_candidates = self.candidate_features(rng);
        let mut candidates: Vec<usize> = self.features[..n_candidates].to_vec();
        // Scan in feature order so ties resolve to the lowest feature index.
        candidates.sort_unstable();

        let mut left = vec![0.0; m];
        let mut right = vec![0.0; m];
        for feature in candidates {
            let n_bins = self.binned.edges[feature].len();
            if n_bins < 2 {
                continue;
            }
            let hist = &mut self.hist[..n_bins * width];
            hist.fill(0.0);
            let column = self.binned.column(feature);
            for &r in rows {
                let b = column[r as usize] as usize;
                let s = &self.stats[r as usize * m..(r as usize + 1) * m];
                let h = &mut hist[b * width..(b + 1) * width];
                for (acc, v) in h.iter_mut().zip(s) {
                    *acc += v;
                }
                h[m] += 1.0;
            }
            left.fill(0.0);
            let mut left_count = 0.0;
            for bin in 0..n_bins - 1 {
                let h = &hist[bin * width..(bin + 1) * width];
                for (acc, v) in left.iter_mut().zip(h) {
                    *acc += v;
                }
                left_count += h[m];
                let right_count = count - left_count;
                if left_count < min_leaf {
                    continue;
                }
                if right_count < min_leaf {
                    break;
                }
                for ((r, s), l) in right.iter_mut().zip(sums).zip(&left) {
                    *r = s - l;
                }
                let gain = self.criterion.score(&left, left_count)
                    + self.criterion.score(&right, right_count)
                    - parent;
                if gain > threshold && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit { gain, feature, bin });
                }
            }
        }
        best
    }
}
