use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use windgust::datamodel::{SensorKind, Task};
use windgust::features::{DEFAULT_WINDOW_STEP, DEFAULT_WINDOW_WIDTH};
use windgust::learn::{HyperParams, ModelKind, DEFAULT_FOLDS};
use windgust::experiment::{TrainSpec, DEFAULT_TRAIN_RATIO};
use windgust::pipeline::FeaturizeConfig;
use windgust::Error;

/// One experiment, as stored in a JSON file. Missing fields take defaults;
/// command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentManifest {
    pub corpus: PathBuf,
    pub sensor: SensorKind,
    pub task: Task,
    pub split_seed: u64,
    pub model_kind: ModelKind,
    /// Candidates for the grid search; `None` uses the built-in grid.
    pub grid: Option<Vec<HyperParams>>,
    pub fft_k: usize,
    pub output_dir: PathBuf,
    pub window_width: usize,
    pub window_step: usize,
    pub train_ratio: f64,
    pub folds: usize,
    /// Restrict the corpus to these drones.
    pub drones: Option<Vec<u32>>,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        ExperimentManifest {
            corpus: PathBuf::from("corpus"),
            sensor: SensorKind::Gyro,
            task: Task::Speed,
            split_seed: 0,
            model_kind: ModelKind::GbClassifier,
            grid: None,
            fft_k: 0,
            output_dir: PathBuf::from("out"),
            window_width: DEFAULT_WINDOW_WIDTH,
            window_step: DEFAULT_WINDOW_STEP,
            train_ratio: DEFAULT_TRAIN_RATIO,
            folds: DEFAULT_FOLDS,
            drones: None,
        }
    }
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> windgust::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: ExperimentManifest =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Relative paths are taken relative to the manifest itself.
        let base = path.parent().unwrap_or(Path::new(""));
        if m.corpus.is_relative() {
            m.corpus = base.join(&m.corpus);
        }
        if m.output_dir.is_relative() {
            m.output_dir = base.join(&m.output_dir);
        }
        Ok(m)
    }

    pub fn grid(&self) -> windgust::Result<Vec<HyperParams>> {
        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => HyperParams::default_grid(self.model_kind, windgust::features::FEATURE_COUNT, self.split_seed),
        };
        if grid.is_empty() {
            return Err(Error::Config("manifest grid is empty".into()));
        }
        Ok(grid)
    }

    pub fn featurize(&self) -> FeaturizeConfig {
        FeaturizeConfig {
            sensor: self.sensor,
            width: self.window_width,
            step: self.window_step,
            fft_k: self.fft_k,
        }
    }

    pub fn train_spec(&self) -> windgust::Result<TrainSpec> {
        Ok(TrainSpec {
            task: self.task,
            featurize: self.featurize(),
            kind: self.model_kind,
            grid: self.grid()?,
            split_seed: self.split_seed,
            train_ratio: self.train_ratio,
            folds: self.folds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_lossless() {
        let m = ExperimentManifest {
            grid: Some(vec![HyperParams { learning_rate: 0.05, ..Default::default() }]),
            drones: Some(vec![1, 3]),
            fft_k: 10,
            ..Default::default()
        };
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentManifest>(&text).unwrap(), m);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let m = ExperimentManifest { grid: Some(vec![]), ..Default::default() };
        assert!(matches!(m.grid(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentManifest>(r#"{"corpsu": "x"}"#).is_err());
    }
}
