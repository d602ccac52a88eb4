//! End-to-end experiment drivers shared by the CLI and the test suites.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::datamodel::{FlightPacket, SensorKind, Task, WindCondition};
use crate::error::{Error, Result};
use crate::learn::{
    cross_drone_eval, evaluate, grid_search, split_train_test, CrossDroneMatrix, EnsembleModel, EvalReport,
    HyperParams, ModelKind, PacketDataset, DEFAULT_FOLDS,
};
use crate::pipeline::{build_dataset, FeaturizeConfig};
use crate::spectral::{self, KSelection, PsdEstimate};

/// Upper-triangular lag-0 correlations; `None` below the diagonal.
pub type CorrelationTable = Vec<Vec<Option<f64>>>;

pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub task: Task,
    pub featurize: FeaturizeConfig,
    pub kind: ModelKind,
    pub grid: Vec<HyperParams>,
    pub split_seed: u64,
    pub train_ratio: f64,
    pub folds: usize,
}

impl TrainSpec {
    pub fn new(task: Task, kind: ModelKind, grid: Vec<HyperParams>) -> Self {
        TrainSpec {
            task,
            featurize: FeaturizeConfig::default(),
            kind,
            grid,
            split_seed: 0,
            train_ratio: DEFAULT_TRAIN_RATIO,
            folds: DEFAULT_FOLDS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EnsembleModel,
    pub report: EvalReport,
    pub best: HyperParams,
    pub grid_scores: Vec<(HyperParams, f64)>,
    pub train_packets: usize,
    pub test_packets: usize,
}

/// Serializable digest of a [`TrainOutcome`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub task: Task,
    pub sensor: SensorKind,
    pub model_kind: ModelKind,
    pub fft_k: usize,
    pub split_seed: u64,
    pub train_packets: usize,
    pub test_packets: usize,
    pub best_params: HyperParams,
    pub grid_scores: Vec<f64>,
    pub report: EvalReport,
}

impl TrainOutcome {
    pub fn summary(&self, spec: &TrainSpec) -> TrainSummary {
        TrainSummary {
            task: spec.task,
            sensor: spec.featurize.sensor,
            model_kind: spec.kind,
            fft_k: spec.featurize.fft_k,
            split_seed: spec.split_seed,
            train_packets: self.train_packets,
            test_packets: self.test_packets,
            best_params: self.best.clone(),
            grid_scores: self.grid_scores.iter().map(|(_, s)| *s).collect(),
            report: self.report.clone(),
        }
    }
}

/// Packet-level split, grid search on the training share, evaluation on the
/// held-out packets.
pub fn train_on_dataset(data: &PacketDataset, spec: &TrainSpec) -> Result<TrainOutcome> {
    let split = split_train_test(data, spec.train_ratio, spec.split_seed)?;
    let search = grid_search(spec.kind, &split.train, &spec.grid, spec.folds, spec.split_seed)?;
    let report = evaluate(&search.model, &split.test.flatten()?)?;
    log::info!(
        "{} on {} train / {} test packets: accuracy {:.4}",
        spec.kind.label(),
        split.train.len(),
        split.test.len(),
        report.accuracy
    );
    Ok(TrainOutcome {
        model: search.model,
        report,
        best: search.best,
        grid_scores: search.scores,
        train_packets: split.train.len(),
        test_packets: split.test.len(),
    })
}

pub fn train(packets: &[FlightPacket], spec: &TrainSpec) -> Result<TrainOutcome> {
    train_on_dataset(&build_dataset(packets, spec.task, &spec.featurize)?, spec)
}

/// Trains and tests separately on each drone's packets; results keyed by drone.
pub fn train_per_drone(packets: &[FlightPacket], spec: &TrainSpec) -> Result<BTreeMap<u32, TrainOutcome>> {
    let data = build_dataset(packets, spec.task, &spec.featurize)?;
    data.drone_ids()
        .into_iter()
        .map(|id| Ok((id, train_on_dataset(&data.for_drone(id), spec)?)))
        .collect()
}

/// Drone-to-drone transfer matrix with fixed hyper-parameters.
pub fn cross_drone(
    packets: &[FlightPacket],
    task: Task,
    featurize: &FeaturizeConfig,
    kind: ModelKind,
    params: &HyperParams,
) -> Result<CrossDroneMatrix> {
    let data = build_dataset(packets, task, featurize)?;
    let per_drone = data
        .drone_ids()
        .into_iter()
        .map(|id| Ok((id, data.for_drone(id).flatten()?)))
        .collect::<Result<Vec<_>>>()?;
    cross_drone_eval(&per_drone, kind, params)
}

/// Test accuracy for each top-k filter setting, everything else fixed.
pub fn fft_sweep(packets: &[FlightPacket], spec: &TrainSpec, candidates: &[usize]) -> Result<KSelection> {
    spectral::select_k(candidates, |k| {
        let mut s = spec.clone();
        s.featurize.fft_k = k;
        Ok(train(packets, &s)?.report.accuracy)
    })
}

fn by_condition(packets: &[FlightPacket], task: Task) -> BTreeMap<WindCondition, Vec<&FlightPacket>> {
    let mut groups: BTreeMap<WindCondition, Vec<&FlightPacket>> = BTreeMap::new();
    for p in packets.iter().filter(|p| p.condition.task() == task) {
        groups.entry(p.condition).or_default().push(p);
    }
    groups
}

/// Per-condition PSD of one axis, averaged over that condition's packets
/// (each truncated to the shortest packet of the task).
pub fn psd_by_condition(
    packets: &[FlightPacket],
    task: Task,
    sensor: SensorKind,
    axis: usize,
) -> Result<Vec<(WindCondition, PsdEstimate<f64>)>> {
    let groups = by_condition(packets, task);
    let len = groups.values().flatten().map(|p| p.len()).min().unwrap_or(0);
    if len < 2 {
        return Err(Error::Data(format!("no {task:?} packets to analyze")));
    }
    groups
        .into_iter()
        .map(|(condition, group)| {
            let mut avg: Option<PsdEstimate<f64>> = None;
            for p in &group {
                let est = spectral::psd(&p.axis(sensor, axis)[..len], p.sample_rate_hz)?;
                match &mut avg {
                    None => avg = Some(est),
                    Some(a) => a.power_density.iter_mut().zip(&est.power_density).for_each(|(x, y)| *x += y),
                }
            }
            let mut avg = avg.expect("non-empty group");
            let n = group.len() as f64;
            avg.power_density.iter_mut().for_each(|x| *x /= n);
            Ok((condition, avg))
        })
        .collect()
}

/// Lag-0 correlation between conditions. Each condition contributes its
/// packets' axis series concatenated in corpus order.
pub fn condition_correlation(
    packets: &[FlightPacket],
    task: Task,
    sensor: SensorKind,
    axis: usize,
) -> Result<(Vec<String>, CorrelationTable)> {
    let series: Vec<(String, Vec<f64>)> = by_condition(packets, task)
        .into_iter()
        .map(|(c, group)| (c.class_name(), group.iter().flat_map(|p| p.axis(sensor, axis)).collect()))
        .collect();
    if series.is_empty() {
        return Err(Error::Data(format!("no {task:?} packets to analyze")));
    }
    let table = spectral::correlation_table(&series)?;
    Ok((series.into_iter().map(|(n, _)| n).collect(), table))
}
