use windgust::corpus::{load_corpus, write_corpus, LoadOptions};
use windgust::datamodel::{validate_packet, SensorKind, Task, WindCondition, WindSpeed};
use windgust::synth::{gen_fleet, gen_packet, FleetConfig, SynthConfig};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Std of each of the first 100 disjoint 100-sample windows of gyro x.
fn window_stds(speed: WindSpeed) -> Vec<f64> {
    let cfg = SynthConfig { condition: WindCondition::Speed(speed), duration_s: 104.0, seed: 77, ..Default::default() };
    let x = gen_packet(&cfg).unwrap().axis(SensorKind::Gyro, 0);
    x.chunks_exact(100).take(100).map(|w| var(w).sqrt()).collect()
}

#[test]
fn stronger_wind_shakes_the_gyro_more() {
    let (low, high) = (window_stds(WindSpeed::One), window_stds(WindSpeed::Three));
    assert_eq!((low.len(), high.len()), (100, 100));
    // Welch's t; 2.35 is the one-sided 1% point for roughly 200 degrees of freedom.
    let t = (mean(&high) - mean(&low)) / (var(&high) / 100.0 + var(&low) / 100.0).sqrt();
    assert!(t > 2.35, "t = {t}");
}

#[test]
fn default_speed_fleet_has_576000_valid_samples() {
    let packets = gen_fleet(&FleetConfig::speed_default()).unwrap();
    assert_eq!(packets.len(), 96);
    assert_eq!(packets.iter().map(|p| p.len()).sum::<usize>(), 576_000);
    for p in &packets {
        let report = validate_packet(p);
        assert!(report.is_valid(), "{:?}", report.violations.first());
    }
}

#[test]
fn corpus_files_reload_exactly() {
    let mut fleet = FleetConfig::for_task(Task::DirectionMotion, 2, 1, 1.0, 8);
    fleet.base.duration_s = 10.0;
    let mut packets = gen_fleet(&fleet).unwrap();
    let dir = tempfile::tempdir().unwrap();
    packets[3].deviation_flag = true;
    write_corpus(dir.path(), &packets).unwrap();

    let back = load_corpus(dir.path(), &LoadOptions::default()).unwrap();
    assert_eq!(back.len(), packets.len() - 1);
    for p in back {
        assert!(packets.contains(&p), "d{} {} changed on reload", p.drone_id, p.condition);
    }
}

#[test]
fn generation_is_seed_deterministic_per_fleet() {
    let mut fleet = FleetConfig::for_task(Task::DirectionHover, 3, 2, 1.0, 5);
    fleet.base.duration_s = 8.0;
    assert_eq!(gen_fleet(&fleet).unwrap(), gen_fleet(&fleet).unwrap());
    let mut other = fleet.clone();
    other.seed = 6;
    assert_ne!(gen_fleet(&fleet).unwrap(), gen_fleet(&other).unwrap());
}
