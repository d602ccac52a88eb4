use windgust::datamodel::{ImuSample, MotionDirection, SensorKind, Task, WindCondition, WindSpeed};
use windgust::learn::{fit, EnsembleModel, HyperParams, ModelKind};
use windgust::pipeline::{build_dataset, FeaturizeConfig};
use windgust::realtime::{offline_predictions, run_stream, run_stream_threaded, Detector, DetectorConfig};
use windgust::synth::{gen_fleet, gen_packet, FleetConfig, SynthConfig};

fn train_model(task: Task, sensor: SensorKind, fft_k: usize) -> EnsembleModel {
    let fleet = FleetConfig::for_task(task, 1, 3, 1.0, 42);
    let cfg = FeaturizeConfig { sensor, step: 20, fft_k, ..Default::default() };
    let data = build_dataset(&gen_fleet(&fleet).unwrap(), task, &cfg).unwrap().flatten().unwrap();
    let p = HyperParams { tree_count: 60, max_depth: Some(3), ..Default::default() };
    fit(ModelKind::GbClassifier, &data, &p).unwrap()
}

/// A fresh packet from drone 1 with a seed the training fleet never used.
fn recording(condition: WindCondition, duration_s: f64, seed: u64) -> Vec<ImuSample> {
    let cfg = SynthConfig { condition, duration_s, seed, ..Default::default() };
    gen_packet(&cfg).unwrap().samples
}

fn labels(samples: &[ImuSample], config: &DetectorConfig, model: EnsembleModel) -> Vec<(u64, usize)> {
    let mut det = Detector::new(config, model).unwrap();
    samples
        .iter()
        .filter_map(|s| det.push_sample(s).unwrap())
        .map(|p| (p.stream_offset, p.class))
        .collect()
}

#[test]
fn calm_stream_is_labeled_no_wind() {
    let config = DetectorConfig { sensor: SensorKind::Stab, ..Default::default() };
    let model = train_model(Task::DirectionMotion, SensorKind::Stab, 0);
    let samples = recording(WindCondition::DirectionInMotion(MotionDirection::NoWind), 64.0, 9_001);
    assert_eq!(samples.len(), 6000);
    let out = labels(&samples, &config, model);
    let calm = out.iter().filter(|(_, c)| *c == MotionDirection::NoWind as usize).count();
    let share = calm as f64 / out.len() as f64;
    assert!(share >= 0.95, "no-wind share {share}");
}

#[test]
fn one_prediction_every_four_samples_after_warm_up() {
    let model = train_model(Task::Speed, SensorKind::Gyro, 0);
    let samples = recording(WindCondition::Speed(WindSpeed::One), 8.0, 1);
    let out = labels(&samples[..100 + 100], &DetectorConfig::default(), model);
    // One warm-up emission then 25 per second of stream.
    assert_eq!(out.len(), 26);
    assert_eq!(out[0].0, 99);
    assert!(out.windows(2).all(|w| w[1].0 - w[0].0 == 4));
}

#[test]
fn labels_follow_a_speed_change_within_one_window() {
    let model = train_model(Task::Speed, SensorKind::Gyro, 0);
    let mut samples = recording(WindCondition::Speed(WindSpeed::One), 34.0, 7_001);
    let splice = samples.len() as u64;
    samples.extend(recording(WindCondition::Speed(WindSpeed::Three), 34.0, 7_002));
    let out = labels(&samples, &DetectorConfig::default(), model);

    let (one, three) = (WindSpeed::One as usize, WindSpeed::Three as usize);
    let share = |sel: &dyn Fn(u64) -> bool, class: usize| {
        let hits: Vec<_> = out.iter().filter(|(o, _)| sel(*o)).collect();
        hits.iter().filter(|(_, c)| *c == class).count() as f64 / hits.len() as f64
    };
    assert!(share(&|o| o < splice, one) >= 0.9);
    assert!(share(&|o| o >= splice + 99, three) >= 0.9);
    let first_three = out.iter().find(|(o, c)| *o >= splice && *c == three).unwrap().0;
    assert!(first_three <= splice + 99, "first 3 m/s label at {} (splice {splice})", first_three);
}

#[test]
fn filtered_stream_matches_batch_pipeline() {
    let config = DetectorConfig { fft_k: 10, ..Default::default() };
    let model = train_model(Task::Speed, SensorKind::Gyro, 10);
    let samples = recording(WindCondition::Speed(WindSpeed::Two), 20.0, 3);
    let online = labels(&samples, &config, model.clone());
    assert_eq!(online, offline_predictions(&samples, &config, &model).unwrap());
}

#[test]
fn threaded_stream_without_drops_matches_synchronous() {
    let config = DetectorConfig { fft_k: 5, ..Default::default() };
    let model = train_model(Task::Speed, SensorKind::Gyro, 5);
    let samples = recording(WindCondition::Speed(WindSpeed::Calm), 10.0, 4);
    let lines = || samples.iter().map(|s| Ok(s.to_row())).collect::<Vec<_>>();

    let mut sync_out = Vec::new();
    let mut det = Detector::new(&config, model.clone()).unwrap();
    let sync = run_stream(lines(), &mut det, &mut sync_out).unwrap();

    let mut threaded_out = Vec::new();
    let threaded = run_stream_threaded(lines(), &config, model, samples.len(), &mut threaded_out).unwrap();
    assert_eq!(threaded.dropped, 0);
    assert_eq!(threaded.predictions, sync.predictions);
    assert_eq!(threaded.per_class, sync.per_class);

    let strip = |buf: &[u8]| -> Vec<(u64, String)> {
        String::from_utf8_lossy(buf)
            .lines()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                (v["offset"].as_u64().unwrap(), v["label"].as_str().unwrap().to_owned())
            })
            .collect()
    };
    assert_eq!(strip(&threaded_out), strip(&sync_out));
}

#[test]
fn non_finite_and_garbage_lines_are_skipped() {
    let model = train_model(Task::Speed, SensorKind::Gyro, 0);
    let samples = recording(WindCondition::Speed(WindSpeed::Two), 8.0, 5);
    let mut lines: Vec<std::io::Result<String>> = samples.iter().map(|s| Ok(s.to_row())).collect();
    lines.insert(50, Ok("not,a,row".into()));
    let mut bad = samples[0];
    bad.gyro[1] = f64::NAN;
    lines.insert(60, Ok(bad.to_row()));

    let mut det = Detector::new(&DetectorConfig::default(), model.clone()).unwrap();
    let mut out = Vec::new();
    let summary = run_stream(lines, &mut det, &mut out).unwrap();
    assert_eq!(summary.unparseable_lines, 1);
    assert_eq!(summary.rejected_non_finite, 1);

    let clean = labels(&samples, &DetectorConfig::default(), model);
    assert_eq!(summary.predictions, clean.len() as u64);
}
