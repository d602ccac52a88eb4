//! Hyper-parameter grid search with packet-level cross-validation, and the
//! drone-to-drone transfer matrix.

use rayon::prelude::*;
use serde::Serialize;

use super::dataset::{Dataset, PacketDataset};
use super::ensemble::{fit, EnsembleModel, HyperParams, ModelKind};
use super::eval::evaluate;
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 3;

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: HyperParams,
    /// Mean validation score per candidate, in grid order; NaN when the grid
    /// has a single candidate and cross-validation was skipped.
    pub scores: Vec<(HyperParams, f64)>,
    /// Best candidate refit on the whole training set.
    pub model: EnsembleModel,
}

/// Accuracy for classifiers, R^2 for regressors.
fn validation_score(kind: ModelKind, model: &EnsembleModel, data: &Dataset) -> Result<f64> {
    let report = evaluate(model, data)?;
    Ok(if kind.is_classifier() {
        report.accuracy
    } else {
        report.r_squared.unwrap_or(f64::NEG_INFINITY)
    })
}

/// Scores every candidate by mean validation score over `folds` packet-level
/// folds; the first candidate wins ties. A single-candidate grid is fitted
/// directly.
pub fn grid_search(
    kind: ModelKind,
    train: &PacketDataset,
    grid: &[HyperParams],
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::Config("hyper-parameter grid is empty".into()));
    }
    for p in grid {
        p.validate()?;
    }
    if grid.len() == 1 {
        let model = fit(kind, &train.flatten()?, &grid[0])?;
        return Ok(GridSearchResult {
            best: grid[0].clone(),
            scores: vec![(grid[0].clone(), f64::NAN)],
            model,
        });
    }
    let fold_sets = train.folds(folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = fold_sets
        .iter()
        .map(|held_out| {
            let rest: Vec<usize> = (0..train.len()).filter(|i| !held_out.contains(i)).collect();
            Ok((train.subset(&rest).flatten()?, train.subset(held_out).flatten()?))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..splits.len()).map(move |f| (c, f)))
        .collect();
    let fold_scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (fit_set, val_set) = &splits[f];
            let model = fit(kind, fit_set, &grid[c])?;
            validation_score(kind, &model, val_set)
        })
        .collect::<Result<_>>()?;

    let scores: Vec<(HyperParams, f64)> = grid
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let s = &fold_scores[c * splits.len()..(c + 1) * splits.len()];
            (p.clone(), s.iter().sum::<f64>() / s.len() as f64)
        })
        .collect();
    let mut best = 0;
    for (i, (_, s)) in scores.iter().enumerate() {
        if *s > scores[best].1 {
            best = i;
        }
    }
    let best_params = scores[best].0.clone();
    let model = fit(kind, &train.flatten()?, &best_params)?;
    Ok(GridSearchResult {
        best: best_params,
        scores,
        model,
    })
}

/// Accuracy of a model trained on one drone and tested on another.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossDroneMatrix {
    pub drone_ids: Vec<u32>,
    /// `accuracy[train][test]`; `None` on the diagonal.
    pub accuracy: Vec<Vec<Option<f64>>>,
}

impl CrossDroneMatrix {
    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        self.accuracy.iter().flatten().filter_map(|c| *c)
    }

    pub fn mean_off_diagonal(&self) -> f64 {
        let v: Vec<f64> = self.off_diagonal().collect();
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Train-drone rows, test-drone columns, `-` on the diagonal.
    pub fn to_csv(&self) -> String {
        let cols: Vec<String> = self.drone_ids.iter().map(|d| format!("Drone {d}")).collect();
        let mut out = format!("Train/Test,{}\n", cols.join(","));
        for (id, row) in self.drone_ids.iter().zip(&self.accuracy) {
            out.push_str(&format!("Drone {id}"));
            for cell in row {
                match cell {
                    Some(a) => out.push_str(&format!(",{a:.4}")),
                    None => out.push_str(",-"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Trains on all of each drone's data and tests on every other drone.
pub fn cross_drone_eval(per_drone: &[(u32, Dataset)], kind: ModelKind, params: &HyperParams) -> Result<CrossDroneMatrix> {
    if per_drone.len() < 2 {
        return Err(Error::Data(format!(
            "cross-drone evaluation needs at least 2 drones, got {}",
            per_drone.len()
        )));
    }
    let classes = &per_drone[0].1.classes;
    if let Some((id, _)) = per_drone.iter().find(|(_, d)| &d.classes != classes) {
        return Err(Error::Data(format!("drone {id} uses a different class set")));
    }
    let models: Vec<EnsembleModel> = per_drone
        .par_iter()
        .map(|(_, d)| fit(kind, d, params))
        .collect::<Result<_>>()?;
    let n = per_drone.len();
    let mut accuracy = vec![vec![None; n]; n];
    for (i, model) in models.iter().enumerate() {
        for (j, (_, test)) in per_drone.iter().enumerate() {
            if i != j {
                accuracy[i][j] = Some(evaluate(model, test)?.accuracy);
            }
        }
    }
    Ok(CrossDroneMatrix {
        drone_ids: per_drone.iter().map(|(id, _)| *id).collect(),
        accuracy,
    })
}
