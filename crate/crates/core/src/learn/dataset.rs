//! Feature matrices, labeled datasets and packet-level splitting.
//!
//! Overlapping windows from one packet are near-duplicates, so every split
//! (train/test and cross-validation folds) happens on whole packets.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datamodel::Task;
use crate::error::{Error, Result};
use crate::features::{FEATURE_COUNT, FEATURE_SCHEMA_VERSION};

/// Row-major matrix of finite features, tagged with the layout it follows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_features: usize,
    schema: String,
}

fn default_schema(n_features: usize) -> String {
    if n_features == FEATURE_COUNT {
        FEATURE_SCHEMA_VERSION.to_string()
    } else {
        format!("generic-{n_features}")
    }
}

impl FeatureMatrix {
    pub fn new(n_features: usize) -> Self {
        FeatureMatrix {
            data: Vec::new(),
            n_features,
            schema: default_schema(n_features),
        }
    }

    pub fn with_schema(n_features: usize, schema: impl Into<String>) -> Self {
        FeatureMatrix {
            data: Vec::new(),
            n_features,
            schema: schema.into(),
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = FeatureMatrix::new(n_features);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features {
            return Err(Error::InvalidArgument(format!(
                "row has {} features, matrix has {}",
                row.len(),
                self.n_features
            )));
        }
        if let Some(i) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite feature at column {i}")));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.data.len().checked_div(self.n_features).unwrap_or(0)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn schema(&self) -> &str {
        &self.schema
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_features.max(1))
    }

    pub(crate) fn get(&self, row: usize, feature: usize) -> f64 {
        self.data[row * self.n_features + feature]
    }

    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.n_features != self.n_features || other.schema != self.schema {
            return Err(Error::SchemaMismatch {
                expected: self.schema.clone(),
                found: other.schema.clone(),
            });
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// Multiplies one column by `factor`.
    pub fn scale_column(&mut self, feature: usize, factor: f64) {
        for row in self.data.chunks_exact_mut(self.n_features) {
            row[feature] *= factor;
        }
    }
}

/// The closed class set of a task plus each class's numeric regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSet {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl ClassSet {
    pub fn for_task(task: Task) -> Self {
        ClassSet {
            names: task.class_names(),
            values: task.class_values(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Flat labeled rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: FeatureMatrix,
    pub labels: Vec<usize>,
    pub classes: ClassSet,
}

impl Dataset {
    pub fn new(x: FeatureMatrix, labels: Vec<usize>, classes: ClassSet) -> Result<Self> {
        if x.n_rows() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but {} labels",
                x.n_rows(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes.len()) {
            return Err(Error::Data(format!("label {l} outside the {}-class set", classes.len())));
        }
        Ok(Dataset { x, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Regression targets: each label's class value.
    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| self.classes.values[l]).collect()
    }
}

/// All windows of one packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRows {
    pub drone_id: u32,
    pub label: usize,
    pub rows: FeatureMatrix,
}

/// Rows grouped by source packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketDataset {
    pub packets: Vec<PacketRows>,
    pub classes: ClassSet,
    pub n_features: usize,
}

impl PacketDataset {
    pub fn new(classes: ClassSet, n_features: usize) -> Self {
        PacketDataset {
            packets: Vec::new(),
            classes,
            n_features,
        }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn row_count(&self) -> usize {
        self.packets.iter().map(|p| p.rows.n_rows()).sum()
    }

    pub fn drone_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.packets.iter().map(|p| p.drone_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn subset(&self, indices: &[usize]) -> PacketDataset {
        PacketDataset {
            packets: indices.iter().map(|&i| self.packets[i].clone()).collect(),
            classes: self.classes.clone(),
            n_features: self.n_features,
        }
    }

    pub fn for_drone(&self, drone_id: u32) -> PacketDataset {
        let idx: Vec<usize> = (0..self.packets.len())
            .filter(|&i| self.packets[i].drone_id == drone_id)
            .collect();
        self.subset(&idx)
    }

    /// Concatenates every packet's rows in packet order.
    pub fn flatten(&self) -> Result<Dataset> {
        let mut x = match self.packets.first() {
            Some(p) => FeatureMatrix::with_schema(self.n_features, p.rows.schema()),
            None => FeatureMatrix::new(self.n_features),
        };
        let mut labels = Vec::new();
        for p in &self.packets {
            x.append(&p.rows)?;
            labels.extend(std::iter::repeat_n(p.label, p.rows.n_rows()));
        }
        Dataset::new(x, labels, self.classes.clone())
    }

    /// Packet indices ordered for stratified splitting: shuffled within each
    /// class, then dealt out class by class in a shuffled class order per round.
    fn stratified_order(&self, seed: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, p) in self.packets.iter().enumerate() {
            by_class.entry(p.label).or_default().push(i);
        }
        let mut queues: Vec<Vec<usize>> = by_class.into_values().collect();
        for q in &mut queues {
            q.shuffle(&mut rng);
            q.reverse();
        }
        let mut order = Vec::with_capacity(self.packets.len());
        while order.len() < self.packets.len() {
            let mut class_order: Vec<usize> = (0..queues.len()).collect();
            class_order.shuffle(&mut rng);
            for c in class_order {
                if let Some(i) = queues[c].pop() {
                    order.push(i);
                }
            }
        }
        order
    }

    /// Packet-level folds for cross-validation; fold `f` holds every
    /// `folds`-th packet of the stratified order, re-sorted by index.
    pub fn folds(&self, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        if folds < 2 {
            return Err(Error::InvalidArgument("need at least 2 folds".into()));
        }
        if self.packets.len() < folds {
            return Err(Error::Data(format!(
                "{} packets cannot fill {folds} folds",
                self.packets.len()
            )));
        }
        let mut out = vec![Vec::new(); folds];
        for (pos, i) in self.stratified_order(seed).into_iter().enumerate() {
            out[pos % folds].push(i);
        }
        for f in &mut out {
            f.sort_unstable();
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: PacketDataset,
    pub test: PacketDataset,
    pub seed: u64,
}

/// Seeded, class-stratified split of whole packets; `ratio` is the training
/// share (0.8 gives 4:1).
pub fn split_train_test(dataset: &PacketDataset, ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("train ratio must be in (0, 1), got {ratio}")));
    }
    let n = dataset.len();
    let n_test = (((1.0 - ratio) * n as f64).round() as usize).min(n - 1);
    let order = dataset.stratified_order(seed);
    let mut test: Vec<usize> = order[..n_test].to_vec();
    let mut train: Vec<usize> = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(DatasetSplit {
        train: dataset.subset(&train),
        test: dataset.subset(&test),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(labels: &[usize]) -> PacketDataset {
        let mut d = PacketDataset::new(ClassSet::for_task(Task::Speed), 2);
        for (i, &l) in labels.iter().enumerate() {
            let rows = FeatureMatrix::from_rows(&[[i as f64, l as f64], [i as f64 + 0.5, l as f64]]).unwrap();
            d.packets.push(PacketRows { drone_id: 1, label: l, rows });
        }
        d
    }

    #[test]
    fn ten_packets_split_eight_two() {
        let d = dataset(&[0; 10]);
        let s = split_train_test(&d, 0.8, 7).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let d = dataset(&[0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3]);
        let a = split_train_test(&d, 0.8, 42).unwrap();
        let b = split_train_test(&d, 0.8, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test.len(), 5);
        let key = |p: &PacketRows| p.rows.row(0)[0] as i64;
        let train: Vec<i64> = a.train.packets.iter().map(key).collect();
        assert!(a.test.packets.iter().all(|p| !train.contains(&key(p))));
        // every class is represented on both sides
        for c in 0..4 {
            assert!(a.test.packets.iter().any(|p| p.label == c));
            assert!(a.train.packets.iter().any(|p| p.label == c));
        }
        let c = split_train_test(&d, 0.8, 43).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn empty_dataset_cannot_split() {
        assert!(split_train_test(&dataset(&[]), 0.8, 1).is_err());
    }

    #[test]
    fn folds_cover_every_packet_once() {
        let d = dataset(&[0, 0, 1, 1, 2, 2, 3]);
        let folds = d.folds(3, 5).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| !f.is_empty()));
        assert!(dataset(&[0, 1]).folds(3, 1).is_err());
    }

    #[test]
    fn flatten_keeps_packet_order() {
        let d = dataset(&[2, 0]);
        let flat = d.flatten().unwrap();
        assert_eq!(flat.labels, vec![2, 2, 0, 0]);
        assert_eq!(flat.x.row(2), &[1.0, 0.0]);
        assert_eq!(flat.targets(), vec![2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn matrix_rejects_bad_rows() {
        let mut m = FeatureMatrix::new(2);
        assert!(m.push_row(&[1.0]).is_err());
        assert!(m.push_row(&[1.0, f64::INFINITY]).is_err());
        assert_eq!(FeatureMatrix::new(40).schema(), FEATURE_SCHEMA_VERSION);
    }
}
