//! Streaming detector.
//!
//! Samples go into a ring buffer one window wide. Once the buffer is full, a
//! prediction is made every `emit_stride` samples (25 Hz for a 100 Hz feed at
//! stride 4), so consecutive windows overlap by `width - stride` samples.
//! The first prediction covers samples `0..width` and is reported at stream
//! offset `width - 1`.
//!
//! Direction models can be loaded, but they generalize poorly to live flights;
//! speed models are the intended use.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, BufRead, Write};
use std::net::UdpSocket;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::datamodel::{ImuSample, SensorKind, Task, WindCondition, LOG_COLUMNS};
use crate::error::{Error, Result};
use crate::features::{self, DEFAULT_WINDOW_WIDTH, FEATURE_COUNT, FEATURE_SCHEMA_VERSION};
use crate::learn::{argmax, load_model, EnsembleModel};
use crate::pipeline::window_features;
use crate::spectral::TopKFilter;

pub const DEFAULT_EMIT_STRIDE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub window_width: usize,
    pub emit_stride: usize,
    pub fft_k: usize,
    pub sensor: SensorKind,
    pub model_path: PathBuf,
    /// Majority vote over the last `smoothing` predictions; 1 disables it.
    pub smoothing: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            window_width: DEFAULT_WINDOW_WIDTH,
            emit_stride: DEFAULT_EMIT_STRIDE,
            fft_k: 0,
            sensor: SensorKind::Gyro,
            model_path: PathBuf::new(),
            smoothing: 1,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_width == 0 {
            return Err(Error::Config("window_width must be >= 1".into()));
        }
        if self.emit_stride == 0 {
            return Err(Error::Config("emit_stride must be >= 1".into()));
        }
        if self.smoothing == 0 {
            return Err(Error::Config("smoothing must be >= 1".into()));
        }
        if self.fft_k > self.window_width {
            return Err(Error::Config(format!(
                "fft_k {} exceeds window width {}",
                self.fft_k, self.window_width
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: WindCondition,
    pub class: usize,
    pub scores: Vec<f64>,
    /// Index of the newest sample in the window, counting accepted samples.
    pub stream_offset: u64,
    pub wall_latency_ms: f64,
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    offset: u64,
    label: WindCondition,
    scores: &'a [f64],
    latency_ms: f64,
}

/// The task whose class set the model was trained on.
pub fn task_of(model: &EnsembleModel) -> Result<Task> {
    [Task::Speed, Task::DirectionHover, Task::DirectionMotion]
        .into_iter()
        .find(|t| t.class_names() == model.classes().names)
        .ok_or_else(|| Error::SchemaMismatch {
            expected: "a wind-condition class set".into(),
            found: model.classes().names.join(","),
        })
}

/// Ring buffer plus emission schedule; produces the windows to classify.
#[derive(Debug, Clone)]
struct Ingest {
    width: usize,
    stride: usize,
    sensor: SensorKind,
    ring: VecDeque<[f64; 3]>,
    accepted: u64,
    since_emit: usize,
    rejected: u64,
}

impl Ingest {
    fn new(config: &DetectorConfig) -> Self {
        Ingest {
            width: config.window_width,
            stride: config.emit_stride,
            sensor: config.sensor,
            ring: VecDeque::with_capacity(config.window_width),
            accepted: 0,
            since_emit: config.emit_stride,
            rejected: 0,
        }
    }

    /// Window and its offset when this sample completes an emission slot.
    fn push(&mut self, sample: &ImuSample) -> Option<(Vec<[f64; 3]>, u64)> {
        if !sample.is_finite() {
            self.rejected += 1;
            log::warn!("rejected non-finite sample at t={} ms", sample.timestamp_ms);
            return None;
        }
        if self.ring.len() == self.width {
            self.ring.pop_front();
        }
        self.ring.push_back(sample.sensor(self.sensor));
        let offset = self.accepted;
        self.accepted += 1;
        self.since_emit += 1;
        if self.ring.len() == self.width && self.since_emit >= self.stride {
            self.since_emit = 0;
            Some((self.ring.iter().copied().collect(), offset))
        } else {
            None
        }
    }
}

/// Featurize, predict and smooth one window.
#[derive(Debug, Clone)]
struct Infer {
    model: Arc<EnsembleModel>,
    task: Task,
    filter: Option<TopKFilter<f64>>,
    smoothing: usize,
    recent: VecDeque<usize>,
}

impl Infer {
    fn new(config: &DetectorConfig, model: Arc<EnsembleModel>) -> Result<Self> {
        config.validate()?;
        model.check_schema(FEATURE_SCHEMA_VERSION, FEATURE_COUNT)?;
        let task = task_of(&model)?;
        let filter = if config.fft_k > 0 {
            Some(TopKFilter::new(config.window_width, config.fft_k)?)
        } else {
            None
        };
        Ok(Infer {
            model,
            task,
            filter,
            smoothing: config.smoothing,
            recent: VecDeque::with_capacity(config.smoothing),
        })
    }

    fn classify(&mut self, window: &[[f64; 3]], offset: u64, arrived: Instant) -> Result<Prediction> {
        let row = window_features(window, self.filter.as_ref())?;
        let raw = self.model.predict_row(&row)?;
        let (class, scores) = if self.smoothing > 1 {
            if self.recent.len() == self.smoothing {
                self.recent.pop_front();
            }
            self.recent.push_back(raw.class);
            let mut votes = vec![0.0; raw.scores.len()];
            for &c in &self.recent {
                votes[c] += 1.0;
            }
            let n = self.recent.len() as f64;
            votes.iter_mut().for_each(|v| *v /= n);
            (argmax(&votes), votes)
        } else {
            (raw.class, raw.scores)
        };
        let label = WindCondition::from_class_index(self.task, class).expect("class index within task");
        Ok(Prediction {
            label,
            class,
            scores,
            stream_offset: offset,
            wall_latency_ms: arrived.elapsed().as_secs_f64() * 1e3,
        })
    }
}

/// Synchronous detector: each pushed sample may yield one prediction.
#[derive(Debug, Clone)]
pub struct Detector {
    ingest: Ingest,
    infer: Infer,
}

impl Detector {
    pub fn new(config: &DetectorConfig, model: EnsembleModel) -> Result<Self> {
        Ok(Detector {
            infer: Infer::new(config, Arc::new(model))?,
            ingest: Ingest::new(config),
        })
    }

    /// Loads the model named by `config.model_path`.
    pub fn from_config(config: &DetectorConfig) -> Result<Self> {
        Self::new(config, load_model(&config.model_path)?)
    }

    pub fn task(&self) -> Task {
        self.infer.task
    }

    pub fn push_sample(&mut self, sample: &ImuSample) -> Result<Option<Prediction>> {
        let arrived = Instant::now();
        match self.ingest.push(sample) {
            Some((window, offset)) => self.infer.classify(&window, offset, arrived).map(Some),
            None => Ok(None),
        }
    }

    /// Non-finite samples dropped so far.
    pub fn rejected(&self) -> u64 {
        self.ingest.rejected
    }
}

/// Labels the batch pipeline assigns to a recorded stream: windows at stride
/// `emit_stride`, optional top-k filtering, features, prediction.
pub fn offline_predictions(samples: &[ImuSample], config: &DetectorConfig, model: &EnsembleModel) -> Result<Vec<(u64, usize)>> {
    config.validate()?;
    let filter = if config.fft_k > 0 {
        Some(TopKFilter::new(config.window_width, config.fft_k)?)
    } else {
        None
    };
    let rows: Vec<[f64; 3]> = samples.iter().map(|s| s.sensor(config.sensor)).collect();
    let count = features::window_count(rows.len(), config.window_width, config.emit_stride);
    (0..count)
        .map(|w| {
            let start = w * config.emit_stride;
            let window = &rows[start..start + config.window_width];
            let p = model.predict_row(&window_features(window, filter.as_ref())?)?;
            Ok(((start + config.window_width - 1) as u64, p.class))
        })
        .collect()
}

/// End-of-stream report.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StreamSummary {
    pub samples: u64,
    pub predictions: u64,
    /// Emissions per class name.
    pub per_class: BTreeMap<String, u64>,
    pub rejected_non_finite: u64,
    pub unparseable_lines: u64,
    /// Emission slots discarded because inference fell behind.
    pub dropped: u64,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
    pub p99_latency_ms: f64,
    pub wall_seconds: f64,
    pub predictions_per_second: f64,
}

#[derive(Default)]
struct Tally {
    summary: StreamSummary,
    latencies: Vec<f64>,
}

impl Tally {
    fn record(&mut self, p: &Prediction, names: &[String], out: &mut dyn Write) -> Result<()> {
        let line = PredictionLine {
            offset: p.stream_offset,
            label: p.label,
            scores: &p.scores,
            latency_ms: p.wall_latency_ms,
        };
        serde_json::to_writer(&mut *out, &line)?;
        out.write_all(b"\n")?;
        self.summary.predictions += 1;
        *self.summary.per_class.entry(names[p.class].clone()).or_default() += 1;
        self.latencies.push(p.wall_latency_ms);
        Ok(())
    }

    fn finish(mut self, names: &[String], started: Instant) -> StreamSummary {
        let s = &mut self.summary;
        for n in names {
            s.per_class.entry(n.clone()).or_default();
        }
        s.wall_seconds = started.elapsed().as_secs_f64();
        if !self.latencies.is_empty() {
            let n = self.latencies.len();
            s.mean_latency_ms = self.latencies.iter().sum::<f64>() / n as f64;
            self.latencies.sort_by(f64::total_cmp);
            s.max_latency_ms = self.latencies[n - 1];
            s.p99_latency_ms = self.latencies[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
        }
        if s.wall_seconds > 0.0 {
            s.predictions_per_second = s.predictions as f64 / s.wall_seconds;
        }
        self.summary
    }
}

fn is_header(line: &str) -> bool {
    line.trim_start().starts_with(LOG_COLUMNS[0])
}

/// Turns raw lines into samples, counting blank-free lines that fail to parse.
fn parse_line(line: &str, unparseable: &mut u64) -> Option<ImuSample> {
    let line = line.trim();
    if line.is_empty() || is_header(line) {
        return None;
    }
    match ImuSample::parse_row(line) {
        Ok(s) => Some(s),
        Err(e) => {
            *unparseable += 1;
            log::warn!("skipping line: {e}");
            None
        }
    }
}

/// Drives a detector over CSV lines, writing one JSON object per prediction
/// to `out`. Returns once the source is exhausted.
pub fn run_stream<I>(lines: I, detector: &mut Detector, out: &mut dyn Write) -> Result<StreamSummary>
where
    I: IntoIterator<Item = io::Result<String>>,
{
    let started = Instant::now();
    let names = detector.infer.model.classes().names.clone();
    let mut tally = Tally::default();
    for line in lines {
        let line = line?;
        let Some(sample) = parse_line(&line, &mut tally.summary.unparseable_lines) else {
            continue;
        };
        tally.summary.samples += 1;
        if let Some(p) = detector.push_sample(&sample)? {
            tally.record(&p, &names, out)?;
        }
    }
    out.flush()?;
    tally.summary.rejected_non_finite = detector.rejected();
    Ok(tally.finish(&names, started))
}

/// Bounded queue that evicts its oldest entry when full.
struct SlotQueue<T> {
    state: Mutex<(VecDeque<T>, bool, u64)>,
    ready: Condvar,
    capacity: usize,
}

impl<T> SlotQueue<T> {
    fn new(capacity: usize) -> Self {
        SlotQueue {
            state: Mutex::new((VecDeque::with_capacity(capacity), false, 0)),
            ready: Condvar::new(),
            capacity,
        }
    }

    fn push(&self, item: T) {
        let mut st = self.state.lock().expect("queue lock");
        if st.0.len() == self.capacity {
            st.0.pop_front();
            st.2 += 1;
        }
        st.0.push_back(item);
        self.ready.notify_one();
    }

    fn close(&self) {
        self.state.lock().expect("queue lock").1 = true;
        self.ready.notify_all();
    }

    fn pop(&self) -> Option<T> {
        let mut st = self.state.lock().expect("queue lock");
        loop {
            if let Some(item) = st.0.pop_front() {
                return Some(item);
            }
            if st.1 {
                return None;
            }
            st = self.ready.wait(st).expect("queue lock");
        }
    }

    fn dropped(&self) -> u64 {
        self.state.lock().expect("queue lock").2
    }
}

type Slot = (Vec<[f64; 3]>, u64, Instant);

/// Two-stage variant of [`run_stream`]: the calling thread ingests samples
/// while a worker classifies windows. When the worker falls behind, the
/// oldest pending windows beyond `queue_capacity` are dropped and counted.
/// Without drops the output matches [`run_stream`].
pub fn run_stream_threaded<I>(
    lines: I,
    config: &DetectorConfig,
    model: EnsembleModel,
    queue_capacity: usize,
    out: &mut (dyn Write + Send),
) -> Result<StreamSummary>
where
    I: IntoIterator<Item = io::Result<String>>,
{
    if queue_capacity == 0 {
        return Err(Error::Config("queue capacity must be >= 1".into()));
    }
    let started = Instant::now();
    let mut infer = Infer::new(config, Arc::new(model))?;
    let names = infer.model.classes().names.clone();
    let mut ingest = Ingest::new(config);
    let queue: SlotQueue<Slot> = SlotQueue::new(queue_capacity);
    let mut samples = 0u64;
    let mut unparseable = 0u64;

    let (ingested, tally) = std::thread::scope(|scope| {
        let worker = scope.spawn(|| -> Result<Tally> {
            let mut tally = Tally::default();
            while let Some((window, offset, arrived)) = queue.pop() {
                let p = infer.classify(&window, offset, arrived)?;
                tally.record(&p, &names, out)?;
            }
            Ok(tally)
        });
        let ingested = (|| -> Result<()> {
            for line in lines {
                let line = line?;
                let Some(sample) = parse_line(&line, &mut unparseable) else {
                    continue;
                };
                samples += 1;
                let arrived = Instant::now();
                if let Some((window, offset)) = ingest.push(&sample) {
                    queue.push((window, offset, arrived));
                }
            }
            Ok(())
        })();
        queue.close();
        (ingested, worker.join().expect("inference thread panicked"))
    });
    ingested?;
    let mut tally = tally?;
    out.flush()?;
    tally.summary.samples = samples;
    tally.summary.unparseable_lines = unparseable;
    tally.summary.rejected_non_finite = ingest.rejected;
    tally.summary.dropped = queue.dropped();
    Ok(tally.finish(&names, started))
}

/// Lines from a buffered reader, e.g. stdin or a file.
pub fn reader_lines<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<String>> {
    reader.lines()
}

pub fn file_lines(path: &Path) -> Result<impl Iterator<Item = io::Result<String>>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(reader_lines(io::BufReader::new(f)))
}

/// Rows received as UDP datagrams (one or more lines each). The stream ends
/// after `idle_timeout` without traffic, or never when it is `None`.
pub struct UdpLines {
    socket: UdpSocket,
    buf: Vec<u8>,
    pending: VecDeque<String>,
}

impl UdpLines {
    pub fn bind(addr: &str, idle_timeout: Option<Duration>) -> Result<Self> {
        // Accept the `:7777` shorthand for all interfaces.
        let addr = if addr.starts_with(':') {
            format!("0.0.0.0{addr}")
        } else {
            addr.to_string()
        };
        let socket = UdpSocket::bind(&addr).map_err(|e| Error::io(&addr, e))?;
        socket.set_read_timeout(idle_timeout)?;
        Ok(UdpLines {
            socket,
            buf: vec![0; 64 * 1024],
            pending: VecDeque::new(),
        })
    }

    pub fn local_addr(&self) -> Result<std::net::SocketAddr> {
        Ok(self.socket.local_addr()?)
    }
}

impl Iterator for UdpLines {
    type Item = io::Result<String>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(line) = self.pending.pop_front() {
                return Some(Ok(line));
            }
            match self.socket.recv(&mut self.buf) {
                Ok(n) => {
                    let text = String::from_utf8_lossy(&self.buf[..n]);
                    self.pending.extend(text.lines().map(str::to_string));
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => return None,
                Err(e) => return Some(Err(e)),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::WindSpeed;
    use crate::learn::{fit, ClassSet, Dataset, FeatureMatrix, HyperParams, ModelKind};

    fn model() -> EnsembleModel {
        // Class follows the gyro-x mean (feature 0) so synthetic ramps are easy to label.
        let mut x = FeatureMatrix::new(FEATURE_COUNT);
        let mut labels = Vec::new();
        for i in 0..80 {
            let mut row = [0.0; FEATURE_COUNT];
            row[0] = i as f64 / 20.0;
            x.push_row(&row).unwrap();
            labels.push(i / 20);
        }
        let d = Dataset::new(x, labels, ClassSet::for_task(Task::Speed)).unwrap();
        let p = HyperParams { tree_count: 10, ..Default::default() };
        fit(ModelKind::GbClassifier, &d, &p).unwrap()
    }

    fn sample(i: usize, level: f64) -> ImuSample {
        ImuSample::from_channels(i as i64 * 10, [level, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn warm_up_then_every_stride() {
        let mut d = Detector::new(&DetectorConfig::default(), model()).unwrap();
        let mut offsets = Vec::new();
        for i in 0..120 {
            if let Some(p) = d.push_sample(&sample(i, 0.0)).unwrap() {
                assert_eq!(p.class, argmax(&p.scores));
                offsets.push(p.stream_offset);
            }
        }
        assert_eq!(offsets, vec![99, 103, 107, 111, 115, 119]);
    }

    #[test]
    fn non_finite_samples_leave_buffer_untouched() {
        let mut d = Detector::new(&DetectorConfig::default(), model()).unwrap();
        let mut bad = sample(0, 0.0);
        bad.gyro[1] = f64::NAN;
        assert!(d.push_sample(&bad).unwrap().is_none());
        assert_eq!(d.rejected(), 1);
        assert_eq!(d.ingest.ring.len(), 0);
    }

    #[test]
    fn label_follows_level() {
        let mut d = Detector::new(&DetectorConfig::default(), model()).unwrap();
        let mut last = None;
        for i in 0..200 {
            last = d.push_sample(&sample(i, 3.5)).unwrap().or(last);
        }
        assert_eq!(last.unwrap().label, WindCondition::Speed(WindSpeed::Three));
    }

    #[test]
    fn empty_source_gives_clean_summary() {
        let mut d = Detector::new(&DetectorConfig::default(), model()).unwrap();
        let mut out = Vec::new();
        let s = run_stream(Vec::<io::Result<String>>::new(), &mut d, &mut out).unwrap();
        assert_eq!(s.predictions, 0);
        assert_eq!(s.per_class.len(), 4);
        assert!(out.is_empty());
    }

    #[test]
    fn bad_lines_are_counted() {
        let mut d = Detector::new(&DetectorConfig::default(), model()).unwrap();
        let lines = vec![LOG_COLUMNS.join(","), "1,2,3".into(), sample(0, 0.0).to_row()];
        let s = run_stream(lines.into_iter().map(Ok), &mut d, &mut Vec::new()).unwrap();
        assert_eq!((s.samples, s.unparseable_lines), (1, 1));
    }

    #[test]
    fn smoothing_votes_over_recent_labels() {
        let cfg = DetectorConfig { smoothing: 5, emit_stride: 1, ..Default::default() };
        let mut d = Detector::new(&cfg, model()).unwrap();
        let mut labels = Vec::new();
        for i in 0..100 {
            d.push_sample(&sample(i, 0.0)).unwrap();
        }
        for i in 100..300 {
            if let Some(p) = d.push_sample(&sample(i, 3.5)).unwrap() {
                labels.push(p.class);
            }
        }
        assert_eq!(labels.last(), Some(&3));
        assert!(labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn threaded_matches_synchronous() {
        let lines: Vec<String> = (0..400).map(|i| sample(i, (i as f64 / 100.0).floor()).to_row()).collect();
        let cfg = DetectorConfig::default();
        let mut sync_out = Vec::new();
        let mut d = Detector::new(&cfg, model()).unwrap();
        let a = run_stream(lines.clone().into_iter().map(Ok), &mut d, &mut sync_out).unwrap();
        let mut thr_out = Vec::new();
        let b = run_stream_threaded(lines.into_iter().map(Ok), &cfg, model(), 10_000, &mut thr_out).unwrap();
        assert_eq!(b.dropped, 0);
        assert_eq!(a.per_class, b.per_class);
        let labels = |out: &[u8]| -> Vec<String> {
            String::from_utf8_lossy(out)
                .lines()
                .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["label"].to_string())
                .collect()
        };
        assert_eq!(labels(&sync_out), labels(&thr_out));
    }

    #[test]
    fn non_wind_class_sets_are_rejected() {
        let mut x = FeatureMatrix::new(FEATURE_COUNT);
        x.push_row(&[0.0; FEATURE_COUNT]).unwrap();
        x.push_row(&[1.0; FEATURE_COUNT]).unwrap();
        let classes = ClassSet {
            names: vec!["a".into(), "b".into()],
            values: vec![0.0, 1.0],
        };
        let d = Dataset::new(x, vec![0, 1], classes).unwrap();
        let m = fit(ModelKind::GbClassifier, &d, &HyperParams::default()).unwrap();
        assert!(Detector::new(&DetectorConfig::default(), m).is_err());
    }
}
