//! Seeded synthetic IMU traces.
//!
//! The generator is a stand-in for real flight logs. Each channel is Gaussian
//! noise around a condition-dependent mean:
//!
//! * every noise std grows linearly with wind speed (`1 + turbulence_gain * v`),
//! * front/back winds tilt mean pitch by `+/- direction_tilt` degrees,
//!   left/right winds tilt mean roll the same way and add a roll oscillation
//!   whose rate also shows up on the roll gyro,
//! * the accelerometer sees gravity (1 g) projected through the tilt,
//! * each drone carries a constant per-channel bias.
//!
//! Units: gyro deg/s, accel g, stabilizer deg. Outputs are rounded to 1e-6 so
//! logs written to disk reload bit-exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    trim_packet, FlightPacket, HoverDirection, ImuSample, MotionDirection, Task, WindCondition, WindSpeed,
    DEFAULT_SAMPLE_RATE_HZ,
};
use crate::error::{Error, Result};

/// Channel noise std per sensor at zero wind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    pub gyro: f64,
    pub accel: f64,
    pub stab: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        SensorNoise {
            gyro: 1.0,
            accel: 0.01,
            stab: 0.3,
        }
    }
}

impl SensorNoise {
    fn per_channel(&self) -> [f64; 9] {
        [
            self.gyro, self.gyro, self.gyro, self.accel, self.accel, self.accel, self.stab, self.stab, self.stab,
        ]
    }
}

/// Roll oscillation of side winds. The frequency is drawn per packet from
/// `[freq_low_hz, freq_high_hz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralOscillation {
    pub amplitude_deg: f64,
    pub freq_low_hz: f64,
    pub freq_high_hz: f64,
}

impl Default for LateralOscillation {
    fn default() -> Self {
        LateralOscillation {
            amplitude_deg: 1.5,
            freq_low_hz: 1.5,
            freq_high_hz: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub condition: WindCondition,
    /// Flight length before trimming.
    pub duration_s: f64,
    /// Cut from both ends after generation; 0 leaves the packet untrimmed.
    pub trim_seconds: f64,
    pub sample_rate_hz: f64,
    pub base_noise_std: SensorNoise,
    /// Relative noise increase per m/s of wind.
    pub turbulence_gain: f64,
    pub direction_tilt_deg: f64,
    pub lateral_osc: LateralOscillation,
    /// Wind speed used for direction conditions.
    pub direction_wind_mps: f64,
    /// Additive offsets in canonical channel order.
    pub drone_bias: [f64; 9],
    pub drone_id: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            condition: WindCondition::Speed(WindSpeed::Calm),
            duration_s: 64.0,
            trim_seconds: 2.0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            base_noise_std: SensorNoise::default(),
            turbulence_gain: 0.3,
            direction_tilt_deg: 5.0,
            lateral_osc: LateralOscillation::default(),
            direction_wind_mps: 2.0,
            drone_bias: [0.0; 9],
            drone_id: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("synth: {what}")));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be > 0");
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad("sample_rate_hz must be > 0");
        }
        let gains = [
            self.base_noise_std.gyro,
            self.base_noise_std.accel,
            self.base_noise_std.stab,
            self.turbulence_gain,
            self.direction_tilt_deg,
            self.lateral_osc.amplitude_deg,
            self.lateral_osc.freq_low_hz,
            self.direction_wind_mps,
            self.trim_seconds,
        ];
        if gains.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return bad("noise levels, gains and tilts must be finite and >= 0");
        }
        if !(self.lateral_osc.freq_high_hz >= self.lateral_osc.freq_low_hz) {
            return bad("lateral oscillation band is empty");
        }
        if self.drone_bias.iter().any(|b| !b.is_finite()) {
            return bad("drone_bias must be finite");
        }
        Ok(())
    }

    /// Wind speed felt by the drone, in m/s.
    pub fn wind_speed(&self) -> f64 {
        match self.condition {
            WindCondition::Speed(s) => s.mps(),
            WindCondition::DirectionInMotion(MotionDirection::NoWind) => 0.0,
            _ => self.direction_wind_mps,
        }
    }

    /// Mean (roll, pitch) offset in degrees and whether the roll oscillates.
    fn attitude(&self) -> (f64, f64, bool) {
        let t = self.direction_tilt_deg;
        use HoverDirection as H;
        use MotionDirection as M;
        match self.condition {
            WindCondition::Speed(_) | WindCondition::DirectionInMotion(M::NoWind) => (0.0, 0.0, false),
            WindCondition::Direction(H::Front) | WindCondition::DirectionInMotion(M::Front) => (0.0, t, false),
            WindCondition::Direction(H::Back) | WindCondition::DirectionInMotion(M::Back) => (0.0, -t, false),
            WindCondition::Direction(H::Left) | WindCondition::DirectionInMotion(M::Left) => (t, 0.0, true),
            WindCondition::Direction(H::Right) | WindCondition::DirectionInMotion(M::Right) => (-t, 0.0, true),
        }
    }
}

fn quantize(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

pub fn gen_packet(config: &SynthConfig) -> Result<FlightPacket> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let rate = config.sample_rate_hz;
    let n = (config.duration_s * rate).round() as usize;
    let scale = 1.0 + config.turbulence_gain * config.wind_speed();
    let std = config.base_noise_std.per_channel().map(|s| s * scale);
    let (roll0, pitch0, oscillates) = config.attitude();
    let osc = &config.lateral_osc;
    let freq = rng.random_range(osc.freq_low_hz..=osc.freq_high_hz);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let amp = if oscillates { osc.amplitude_deg } else { 0.0 };
    let omega = std::f64::consts::TAU * freq;

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / rate;
        let wave = amp * (omega * t + phase).sin();
        let wave_rate = amp * omega * (omega * t + phase).cos();
        let roll = roll0 + wave;
        let pitch = pitch0;
        let (sr, cr) = roll.to_radians().sin_cos();
        let (sp, cp) = pitch.to_radians().sin_cos();
        let mean = [wave_rate, 0.0, 0.0, -sp, sr * cp, cr * cp, roll, pitch, 0.0];
        let mut ch = [0.0; 9];
        for c in 0..9 {
            let z: f64 = StandardNormal.sample(&mut rng);
            ch[c] = quantize(mean[c] + std[c] * z + config.drone_bias[c]);
        }
        let ts = (i as f64 * 1000.0 / rate).round() as i64;
        samples.push(ImuSample::from_channels(ts, ch));
    }
    let mut packet = FlightPacket::new(config.drone_id, config.condition, samples);
    packet.sample_rate_hz = rate;
    if config.trim_seconds > 0.0 {
        packet = trim_packet(packet, config.trim_seconds)?;
    }
    Ok(packet)
}

/// Bias scale per channel group for [`DroneSpec::with_bias`]: one unit is
/// 0.2 deg/s of gyro, 0.005 g of accel and 0.5 deg of attitude.
pub const BIAS_UNIT: [f64; 9] = [0.2, 0.2, 0.2, 0.005, 0.005, 0.005, 0.5, 0.5, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneSpec {
    pub drone_id: u32,
    pub bias: [f64; 9],
}

impl DroneSpec {
    /// Bias drawn from `N(0, scale * BIAS_UNIT)` with a generator keyed by
    /// `seed` and the drone id.
    pub fn with_bias(drone_id: u32, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, drone_id as u64, 0x6269_6173));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let bias = BIAS_UNIT.map(|u| quantize(scale * u * normal.sample(&mut rng)));
        DroneSpec { drone_id, bias }
    }
}

/// A whole synthetic data collection campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetConfig {
    /// Template for every packet; its condition, drone and seed are replaced.
    #[serde(default)]
    pub base: SynthConfig,
    pub drones: Vec<DroneSpec>,
    pub conditions: Vec<WindCondition>,
    pub packets_per_condition: usize,
    #[serde(default)]
    pub seed: u64,
}

impl FleetConfig {
    /// Drones `1..=drones`, every condition of `task`, biases at `bias_scale`.
    pub fn for_task(task: Task, drones: u32, packets_per_condition: usize, bias_scale: f64, seed: u64) -> Self {
        FleetConfig {
            base: SynthConfig::default(),
            drones: (1..=drones).map(|id| DroneSpec::with_bias(id, bias_scale, seed)).collect(),
            conditions: task.conditions(),
            packets_per_condition,
            seed,
        }
    }

    /// 4 drones x 4 speeds x 6 packets of 6000 samples.
    pub fn speed_default() -> Self {
        Self::for_task(Task::Speed, 4, 6, 1.0, 0)
    }

    /// 3 drones x 4 hover directions x 6 packets.
    pub fn direction_default() -> Self {
        Self::for_task(Task::DirectionHover, 3, 6, 1.0, 0)
    }

    pub fn packet_count(&self) -> usize {
        self.drones.len() * self.conditions.len() * self.packets_per_condition
    }
}

/// SplitMix64-style mixing of the seed with packet coordinates.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates every packet of the campaign, ordered by drone, condition and
/// packet number. Each packet has its own derived seed, so the result does
/// not depend on thread scheduling.
pub fn gen_fleet(fleet: &FleetConfig) -> Result<Vec<FlightPacket>> {
    if fleet.drones.is_empty() {
        return Err(Error::Config("fleet needs at least one drone".into()));
    }
    let mut ids: Vec<u32> = fleet.drones.iter().map(|d| d.drone_id).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("duplicate drone id {}", w[0])));
    }
    fleet.base.validate()?;
    let mut jobs = Vec::with_capacity(fleet.packet_count());
    for drone in &fleet.drones {
        for &condition in &fleet.conditions {
            for j in 0..fleet.packets_per_condition {
                let coord = ((condition.class_index() as u64) << 32) | j as u64;
                let tag = condition.task() as u64;
                jobs.push(SynthConfig {
                    condition,
                    drone_id: drone.drone_id,
                    drone_bias: drone.bias,
                    seed: mix(mix(fleet.seed, drone.drone_id as u64, tag), coord, 1),
                    ..fleet.base.clone()
                });
            }
        }
    }
    jobs.par_iter().map(gen_packet).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{validate_packet, SensorKind};

    fn std_of(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
    }

    fn mean_of(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    #[test]
    fn default_packet_has_6000_valid_samples() {
        let p = gen_packet(&SynthConfig::default()).unwrap();
        assert_eq!(p.len(), 6000);
        assert!(p.trimmed);
        assert!(validate_packet(&p).is_valid());
    }

    #[test]
    fn calm_noise_matches_base_std() {
        let cfg = SynthConfig {
            turbulence_gain: 0.0,
            condition: WindCondition::DirectionInMotion(MotionDirection::NoWind),
            ..Default::default()
        };
        let p = gen_packet(&cfg).unwrap();
        for (sensor, base) in [(SensorKind::Gyro, 1.0), (SensorKind::Accel, 0.01), (SensorKind::Stab, 0.3)] {
            for axis in 0..3 {
                let s = std_of(&p.axis(sensor, axis));
                assert!((s / base - 1.0).abs() < 0.1, "{sensor:?}[{axis}] std {s}");
            }
        }
    }

    #[test]
    fn front_and_back_tilt_symmetrically() {
        let at = |d| {
            let cfg = SynthConfig {
                condition: WindCondition::Direction(d),
                ..Default::default()
            };
            mean_of(&gen_packet(&cfg).unwrap().axis(SensorKind::Stab, 1))
        };
        let (f, b) = (at(HoverDirection::Front), at(HoverDirection::Back));
        assert!(f > 4.9 && b < -4.9, "{f} {b}");
        assert!((f + b).abs() < 0.05);
    }

    #[test]
    fn same_seed_same_packet() {
        let cfg = SynthConfig {
            seed: 7,
            condition: WindCondition::Direction(HoverDirection::Left),
            ..Default::default()
        };
        assert_eq!(gen_packet(&cfg).unwrap(), gen_packet(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(gen_packet(&cfg).unwrap(), gen_packet(&other).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SynthConfig { duration_s: 0.0, ..Default::default() },
            SynthConfig { turbulence_gain: -1.0, ..Default::default() },
            SynthConfig { duration_s: 3.0, ..Default::default() },
        ];
        for cfg in &bad {
            assert!(gen_packet(cfg).is_err());
        }
    }

    #[test]
    fn fleet_shape_and_bias() {
        let mut fleet = FleetConfig::for_task(Task::Speed, 2, 1, 0.0, 3);
        fleet.drones[1].bias[0] = 2.0;
        let packets = gen_fleet(&fleet).unwrap();
        assert_eq!(packets.len(), 8);
        assert_eq!(packets.iter().map(|p| p.len()).sum::<usize>(), 48_000);
        let calm: Vec<f64> = packets
            .iter()
            .filter(|p| p.condition == WindCondition::Speed(WindSpeed::Calm))
            .map(|p| mean_of(&p.axis(SensorKind::Gyro, 0)))
            .collect();
        assert!((calm[1] - calm[0] - 2.0).abs() < 0.05);

        fleet.packets_per_condition = 0;
        assert!(gen_fleet(&fleet).unwrap().is_empty());
        fleet.drones[1].drone_id = 1;
        assert!(gen_fleet(&fleet).is_err());
    }
}
