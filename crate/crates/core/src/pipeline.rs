//! Packets to model-ready feature rows, shared by training, analysis and the
//! streaming detector so that all three featurize identically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{FlightPacket, SensorKind, Task};
use crate::error::{Error, Result};
use crate::features::{self, FEATURE_COUNT};
use crate::learn::{ClassSet, FeatureMatrix, PacketDataset, PacketRows};
use crate::spectral::TopKFilter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizeConfig {
    pub sensor: SensorKind,
    pub width: usize,
    pub step: usize,
    /// Dominant frequencies kept per axis before featurizing; 0 disables.
    pub fft_k: usize,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig {
            sensor: SensorKind::Gyro,
            width: features::DEFAULT_WINDOW_WIDTH,
            step: features::DEFAULT_WINDOW_STEP,
            fft_k: 0,
        }
    }
}

impl FeaturizeConfig {
    pub fn filter(&self) -> Result<Option<TopKFilter<f64>>> {
        if self.fft_k == 0 {
            Ok(None)
        } else {
            TopKFilter::new(self.width, self.fft_k).map(Some)
        }
    }
}

/// Features of one window, after per-axis top-k filtering when a filter is
/// given.
pub fn window_features(rows: &[[f64; 3]], filter: Option<&TopKFilter<f64>>) -> Result<[f64; FEATURE_COUNT]> {
    let Some(filter) = filter else {
        return features::features_of(rows);
    };
    let mut filtered = vec![[0.0; 3]; rows.len()];
    for axis in 0..3 {
        let column: Vec<f64> = rows.iter().map(|r| r[axis]).collect();
        for (dst, v) in filtered.iter_mut().zip(filter.apply(&column)?) {
            dst[axis] = v;
        }
    }
    features::features_of(&filtered)
}

/// Feature rows of every window of one packet, in window order.
pub fn packet_features(packet: &FlightPacket, config: &FeaturizeConfig) -> Result<FeatureMatrix> {
    let filter = config.filter()?;
    let windows = features::segment::<f64>(packet, config.sensor, config.width, config.step)?;
    let mut x = FeatureMatrix::new(FEATURE_COUNT);
    for w in &windows {
        x.push_row(&window_features(&w.values, filter.as_ref())?)?;
    }
    Ok(x)
}

/// Featurizes the packets belonging to `task`; packets of other tasks are
/// skipped. Packet order is preserved.
pub fn build_dataset(packets: &[FlightPacket], task: Task, config: &FeaturizeConfig) -> Result<PacketDataset> {
    features::check_uniform_rate(packets)?;
    let selected: Vec<&FlightPacket> = packets.iter().filter(|p| p.condition.task() == task).collect();
    if selected.len() < packets.len() {
        log::debug!("skipping {} packets of other tasks", packets.len() - selected.len());
    }
    let rows: Vec<PacketRows> = selected
        .par_iter()
        .map(|p| {
            Ok(PacketRows {
                drone_id: p.drone_id,
                label: p.condition.class_index(),
                rows: packet_features(p, config)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut data = PacketDataset::new(ClassSet::for_task(task), FEATURE_COUNT);
    data.packets = rows.into_iter().filter(|p| p.rows.n_rows() > 0).collect();
    if data.is_empty() {
        return Err(Error::Data(format!("no {task:?} packets long enough for {}-sample windows", config.width)));
    }
    Ok(data)
}
