//! Overlapping-window segmentation and the 40-feature window summary.
//!
//! Feature layout (indices):
//!
//! | range  | content                                         |
//! |--------|-------------------------------------------------|
//! | 0..3   | mean per axis                                   |
//! | 3..6   | population standard deviation per axis          |
//! | 6..9   | mean absolute deviation from the mean per axis  |
//! | 9      | mean per-sample Euclidean norm over the 3 axes  |
//! | 10..40 | 10-bin range histogram fractions, axis-major    |

use std::fmt::Write as _;

use rayon::prelude::*;
use serde_json::json;

use crate::datamodel::{FlightPacket, SensorKind, WindCondition};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FEATURE_COUNT: usize = 40;
pub const BIN_COUNT: usize = 10;
pub const DEFAULT_WINDOW_WIDTH: usize = 100;
pub const DEFAULT_WINDOW_STEP: usize = 1;
/// Identifies the layout above; stored in trained models.
pub const FEATURE_SCHEMA_VERSION: &str = "imu40-v1";

const AXES: [&str; 3] = ["x", "y", "z"];

/// Descriptive name of every feature, in canonical order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_COUNT);
    for stat in ["mean", "std", "avg_abs_diff"] {
        names.extend(AXES.iter().map(|a| format!("{stat}.{a}")));
    }
    names.push("avg_resultant".to_string());
    for a in AXES {
        names.extend((0..BIN_COUNT).map(|b| format!("bin.{a}.{b}")));
    }
    names
}

/// CSV column names `f00` .. `f39`.
pub fn feature_columns() -> Vec<String> {
    (0..FEATURE_COUNT).map(|i| format!("f{i:02}")).collect()
}

/// JSON descriptor of the feature matrix export.
pub fn schema_descriptor() -> serde_json::Value {
    let columns: Vec<_> = feature_columns()
        .into_iter()
        .zip(feature_names())
        .map(|(c, n)| json!({ "column": c, "feature": n }))
        .collect();
    json!({
        "schema_version": FEATURE_SCHEMA_VERSION,
        "feature_count": FEATURE_COUNT,
        "features": columns,
        "extra_columns": ["label", "drone_id", "packet", "offset"],
    })
}

/// Where a window came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WindowSource {
    pub drone_id: u32,
    pub packet_index: usize,
    pub start: usize,
}

/// `width` consecutive samples of one sensor's three axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Window<T> {
    pub sensor: SensorKind,
    pub values: Vec<[T; 3]>,
    pub label: WindCondition,
    pub source: WindowSource,
}

impl<T: Scalar> Window<T> {
    pub fn width(&self) -> usize {
        self.values.len()
    }

    pub fn axis(&self, axis: usize) -> Vec<T> {
        self.values.iter().map(|v| v[axis]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub features: [T; FEATURE_COUNT],
    pub label: WindCondition,
    pub source: WindowSource,
}

/// Number of windows `segment` produces.
pub fn window_count(samples: usize, width: usize, step: usize) -> usize {
    if width == 0 || step == 0 || samples < width {
        0
    } else {
        (samples - width) / step + 1
    }
}

/// Cuts a packet into windows starting at offsets `0, step, 2*step, ...`.
/// Packets shorter than `width` yield no windows.
pub fn segment<T: Scalar>(
    packet: &FlightPacket,
    sensor: SensorKind,
    width: usize,
    step: usize,
) -> Result<Vec<Window<T>>> {
    segment_indexed(packet, 0, sensor, width, step)
}

pub(crate) fn segment_indexed<T: Scalar>(
    packet: &FlightPacket,
    packet_index: usize,
    sensor: SensorKind,
    width: usize,
    step: usize,
) -> Result<Vec<Window<T>>> {
    check_geometry(width, step)?;
    let axes: Vec<[T; 3]> = packet
        .samples
        .iter()
        .map(|s| s.sensor(sensor).map(T::of))
        .collect();
    let count = window_count(axes.len(), width, step);
    Ok((0..count)
        .map(|w| {
            let start = w * step;
            Window {
                sensor,
                values: axes[start..start + width].to_vec(),
                label: packet.condition,
                source: WindowSource {
                    drone_id: packet.drone_id,
                    packet_index,
                    start,
                },
            }
        })
        .collect())
}

pub(crate) fn check_geometry(width: usize, step: usize) -> Result<()> {
    if width == 0 {
        return Err(Error::InvalidArgument("window width must be >= 1".into()));
    }
    if step == 0 {
        return Err(Error::InvalidArgument("window step must be >= 1".into()));
    }
    Ok(())
}

pub fn extract_features<T: Scalar>(window: &Window<T>) -> Result<FeatureVector<T>> {
    Ok(FeatureVector {
        features: features_of(&window.values)?,
        label: window.label,
        source: window.source,
    })
}

/// The 40 features of a block of 3-axis rows.
pub fn features_of<T: Scalar>(rows: &[[T; 3]]) -> Result<[T; FEATURE_COUNT]> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("cannot summarize an empty window".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("window contains non-finite values".into()));
    }
    let n = T::of_usize(rows.len());
    let mut out = [T::zero(); FEATURE_COUNT];
    let mut column = Vec::with_capacity(rows.len());
    for axis in 0..3 {
        column.clear();
        column.extend(rows.iter().map(|r| r[axis]));
        let mean = column.iter().copied().sum::<T>() / n;
        let var = column.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let mad = column.iter().map(|&v| (v - mean).abs()).sum::<T>() / n;
        out[axis] = mean;
        out[3 + axis] = var.sqrt();
        out[6 + axis] = mad;
        let bins = binned_distribution(&column);
        out[10 + axis * BIN_COUNT..10 + (axis + 1) * BIN_COUNT].copy_from_slice(&bins);
    }
    out[9] = rows
        .iter()
        .map(|r| (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt())
        .sum::<T>()
        / n;
    Ok(out)
}

/// Fraction of values in each of 10 equal-width bins spanning `[min, max]`.
///
/// Bin `i` is `[min + i*w, min + (i+1)*w)` with `w = (max - min) / 10`; the
/// maximum lands in bin 9. A constant input puts everything in bin 0.
pub fn binned_distribution<T: Scalar>(values: &[T]) -> [T; BIN_COUNT] {
    let mut fractions = [T::zero(); BIN_COUNT];
    if values.is_empty() {
        return fractions;
    }
    let (min, max) = values
        .iter()
        .fold((values[0], values[0]), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if max == min {
        fractions[0] = T::one();
        return fractions;
    }
    let width = (max - min) / T::of_usize(BIN_COUNT);
    let mut counts = [0usize; BIN_COUNT];
    for &v in values {
        counts[bin_index(v, min, width)] += 1;
    }
    let n = T::of_usize(values.len());
    for (f, c) in fractions.iter_mut().zip(counts) {
        *f = T::of_usize(c) / n;
    }
    fractions
}

fn bin_index<T: Scalar>(v: T, min: T, width: T) -> usize {
    let last = BIN_COUNT - 1;
    let guess = ((v - min) / width).floor().to_usize().unwrap_or(0).min(last);
    // The division can round across an edge; settle against the edges themselves.
    let lower = |i: usize| min + T::of_usize(i) * width;
    let mut idx = guess;
    while idx > 0 && v < lower(idx) {
        idx -= 1;
    }
    while idx < last && v >= lower(idx + 1) {
        idx += 1;
    }
    idx
}

/// Segments and featurizes every packet, preserving packet and window order.
pub fn featurize_dataset<T: Scalar>(
    packets: &[FlightPacket],
    sensor: SensorKind,
    width: usize,
    step: usize,
) -> Result<Vec<FeatureVector<T>>> {
    check_geometry(width, step)?;
    check_uniform_rate(packets)?;
    let per_packet: Result<Vec<Vec<FeatureVector<T>>>> = packets
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            segment_indexed::<T>(p, i, sensor, width, step)?
                .iter()
                .map(extract_features)
                .collect()
        })
        .collect();
    Ok(per_packet?.into_iter().flatten().collect())
}

pub(crate) fn check_uniform_rate(packets: &[FlightPacket]) -> Result<()> {
    if let Some(first) = packets.first() {
        if let Some(p) = packets.iter().find(|p| p.sample_rate_hz != first.sample_rate_hz) {
            return Err(Error::Data(format!(
                "mixed sample rates: {} Hz and {} Hz",
                first.sample_rate_hz, p.sample_rate_hz
            )));
        }
    }
    Ok(())
}

/// Feature matrix as CSV: `f00..f39,label,drone_id,packet,offset`.
pub fn to_csv<T: Scalar>(rows: &[FeatureVector<T>]) -> String {
    let mut out = feature_columns().join(",");
    out.push_str(",label,drone_id,packet,offset\n");
    for r in rows {
        for f in &r.features {
            let _ = write!(out, "{f},");
        }
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.label, r.source.drone_id, r.source.packet_index, r.source.start
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{ImuSample, WindSpeed};

    fn window(values: Vec<[f64; 3]>) -> Window<f64> {
        Window {
            sensor: SensorKind::Gyro,
            values,
            label: WindCondition::Speed(WindSpeed::Calm),
            source: WindowSource { drone_id: 1, packet_index: 0, start: 0 },
        }
    }

    fn packet(n: usize) -> FlightPacket {
        let samples = (0..n)
            .map(|i| ImuSample::from_channels(10 * i as i64, [i as f64; 9]))
            .collect();
        let mut p = FlightPacket::new(3, WindCondition::Speed(WindSpeed::Two), samples);
        p.trimmed = true;
        p
    }

    #[test]
    fn names_and_columns_have_forty_entries() {
        assert_eq!(feature_names().len(), FEATURE_COUNT);
        assert_eq!(feature_columns()[39], "f39");
        assert_eq!(feature_names()[9], "avg_resultant");
        assert_eq!(feature_names()[20], "bin.y.0");
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(6000, 100, 1), 5901);
        assert_eq!(window_count(100, 100, 7), 1);
        assert_eq!(window_count(99, 100, 1), 0);
        assert_eq!(segment::<f64>(&packet(6000), SensorKind::Gyro, 100, 1).unwrap().len(), 5901);
        assert_eq!(segment::<f64>(&packet(100), SensorKind::Gyro, 100, 13).unwrap().len(), 1);
        assert!(segment::<f64>(&packet(99), SensorKind::Gyro, 100, 1).unwrap().is_empty());
        assert!(segment::<f64>(&packet(99), SensorKind::Gyro, 100, 0).is_err());
    }

    #[test]
    fn windows_start_at_step_multiples() {
        let ws = segment::<f64>(&packet(130), SensorKind::Accel, 100, 10).unwrap();
        let starts: Vec<_> = ws.iter().map(|w| w.source.start).collect();
        assert_eq!(starts, vec![0, 10, 20, 30]);
        assert_eq!(ws[2].values[0], [20.0; 3]);
        assert!(ws.iter().all(|w| w.width() == 100));
    }

    #[test]
    fn constant_window() {
        let fv = extract_features(&window(vec![[2.0; 3]; 100])).unwrap();
        let f = fv.features;
        assert_eq!(&f[0..3], &[2.0; 3]);
        assert_eq!(&f[3..9], &[0.0; 6]);
        assert!((f[9] - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        for axis in 0..3 {
            let bins = &f[10 + 10 * axis..20 + 10 * axis];
            assert_eq!(bins[0], 1.0);
            assert!(bins[1..].iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn table_rows_mean() {
        let rows = vec![
            [-1.589356, 12.612753, -0.499988],
            [0.026600, 12.252775, -0.453511],
            [3.461869, 2.456149, -0.193813],
            [4.814377, -1.529192, -0.630970],
        ];
        let f: [f64; 40] = features_of(&rows).unwrap();
        assert!((f[0] - 1.6783725).abs() < 1e-12);
    }

    #[test]
    fn ramp_bins_are_uniform() {
        let ramp: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(binned_distribution(&ramp), [0.1; 10]);
        let f = features_of(&ramp.iter().map(|&v| [v, 0.0, 0.0]).collect::<Vec<_>>()).unwrap();
        assert_eq!(&f[10..20], &[0.1; 10]);
    }

    #[test]
    fn degenerate_and_two_point_bins() {
        assert_eq!(binned_distribution(&[5.0f64; 100])[0], 1.0);
        let mut v = vec![0.0f64; 50];
        v.extend(std::iter::repeat_n(10.0, 50));
        assert_eq!(
            binned_distribution(&v),
            [0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5]
        );
    }

    #[test]
    fn works_in_single_precision() {
        let ramp: Vec<f32> = (0..100).map(|i| i as f32).collect();
        let bins = binned_distribution(&ramp);
        assert!(bins.iter().all(|&b| (b - 0.1).abs() < 1e-6));
        let f = features_of(&[[1.0f32, 2.0, 2.0]; 10]).unwrap();
        assert!((f[9] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_window_is_rejected() {
        assert!(features_of(&[[f64::NAN, 0.0, 0.0]]).is_err());
        assert!(features_of::<f64>(&[]).is_err());
    }

    #[test]
    fn dataset_labels_follow_packets() {
        let a = packet(120);
        let mut b = packet(110);
        b.condition = WindCondition::Speed(WindSpeed::Three);
        let rows = featurize_dataset::<f64>(&[a, b], SensorKind::Gyro, 100, 1).unwrap();
        assert_eq!(rows.len(), 21 + 11);
        assert!(rows[..21].iter().all(|r| r.label == WindCondition::Speed(WindSpeed::Two)));
        assert!(rows[21..].iter().all(|r| r.label == WindCondition::Speed(WindSpeed::Three)));
        assert_eq!(rows[21].source.packet_index, 1);
        assert!(featurize_dataset::<f64>(&[], SensorKind::Gyro, 100, 1).unwrap().is_empty());
    }

    #[test]
    fn mixed_rates_are_rejected() {
        let a = packet(120);
        let mut b = packet(120);
        b.sample_rate_hz = 50.0;
        assert!(featurize_dataset::<f64>(&[a, b], SensorKind::Gyro, 100, 1).is_err());
    }

    #[test]
    fn csv_export_shape() {
        let rows = featurize_dataset::<f64>(&[packet(101)], SensorKind::Gyro, 100, 1).unwrap();
        let csv = to_csv(&rows);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 44);
        assert!(lines[2].ends_with("speed-2,3,0,1"));
        assert_eq!(schema_descriptor()["features"][10]["feature"], "bin.x.0");
    }
}
