//! Deterministic synthetic gait recordings.
//!
//! Walking activities are a class-specific fundamental plus two harmonics on
//! every axis, scaled by per-user and per-day jitter, with gravity on the
//! accelerometer and Gaussian sensor noise. Sitting is gravity plus low noise.
//! Normal and WithBag share a fundamental and differ mainly in harmonic
//! strength, by less than the per-user harmonic spread, so they are the
//! hardest pair to separate.

use std::f64::consts::PI;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::ingest::{
    write_canonical_csv, write_session_manifest, ActivityLabel, RawRecord, SensorSeries, SessionEntry, SessionMeta,
    SESSION_MANIFEST,
};
use crate::rng::rng_for;

pub const GRAVITY: f64 = 9.81;

/// Session length in seconds per activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Durations {
    pub normal: f64,
    pub fast: f64,
    pub with_bag: f64,
    pub downstairs: f64,
    pub upstairs: f64,
    pub sitting: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Durations {
            normal: 280.0,
            fast: 290.0,
            with_bag: 270.0,
            downstairs: 70.0,
            upstairs: 60.0,
            sitting: 160.0,
        }
    }
}

impl Durations {
    pub fn get(&self, label: ActivityLabel) -> f64 {
        match label {
            ActivityLabel::Normal => self.normal,
            ActivityLabel::Fast => self.fast,
            ActivityLabel::WithBag => self.with_bag,
            ActivityLabel::Downstairs => self.downstairs,
            ActivityLabel::Upstairs => self.upstairs,
            ActivityLabel::Sitting => self.sitting,
        }
    }
}

/// Periodic signal of one walking activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitSignal {
    pub fundamental_hz: f64,
    pub acc_amplitude: [f64; 3],
    pub gyro_amplitude: [f64; 3],
    /// Second and third harmonic amplitude relative to the fundamental.
    pub harmonic2: f64,
    pub harmonic3: f64,
    /// Extra phase of the second harmonic, which skews the waveform.
    pub harmonic2_phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitTable {
    pub normal: GaitSignal,
    pub fast: GaitSignal,
    pub with_bag: GaitSignal,
    pub downstairs: GaitSignal,
    pub upstairs: GaitSignal,
}

impl Default for GaitTable {
    fn default() -> Self {
        GaitTable {
            normal: GaitSignal {
                fundamental_hz: 1.8,
                acc_amplitude: [1.2, 2.8, 0.9],
                gyro_amplitude: [0.45, 0.9, 0.35],
                harmonic2: 0.35,
                harmonic3: 0.15,
                harmonic2_phase: 0.0,
            },
            fast: GaitSignal {
                fundamental_hz: 2.4,
                acc_amplitude: [1.7, 3.9, 1.3],
                gyro_amplitude: [0.65, 1.25, 0.5],
                harmonic2: 0.4,
                harmonic3: 0.18,
                harmonic2_phase: 0.0,
            },
            with_bag: GaitSignal {
                fundamental_hz: 1.8,
                acc_amplitude: [1.1, 2.7, 0.85],
                gyro_amplitude: [0.4, 0.85, 0.3],
                harmonic2: 0.28,
                harmonic3: 0.12,
                harmonic2_phase: 0.0,
            },
            downstairs: GaitSignal {
                fundamental_hz: 2.0,
                acc_amplitude: [1.5, 3.6, 1.1],
                gyro_amplitude: [0.5, 1.0, 0.45],
                harmonic2: 0.6,
                harmonic3: 0.3,
                harmonic2_phase: PI / 2.0,
            },
            upstairs: GaitSignal {
                fundamental_hz: 1.6,
                acc_amplitude: [1.3, 2.5, 1.2],
                gyro_amplitude: [0.7, 1.2, 0.6],
                harmonic2: 0.45,
                harmonic3: 0.2,
                harmonic2_phase: 0.0,
            },
        }
    }
}

impl GaitTable {
    pub fn get(&self, label: ActivityLabel) -> Option<&GaitSignal> {
        match label {
            ActivityLabel::Normal => Some(&self.normal),
            ActivityLabel::Fast => Some(&self.fast),
            ActivityLabel::WithBag => Some(&self.with_bag),
            ActivityLabel::Downstairs => Some(&self.downstairs),
            ActivityLabel::Upstairs => Some(&self.upstairs),
            ActivityLabel::Sitting => None,
        }
    }
}

/// Relative half-widths of the uniform per-user and per-day variations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    pub amplitude: f64,
    pub axis_gain: f64,
    pub harmonics: f64,
    pub cadence: f64,
    /// Phone tilt in radians.
    pub tilt: f64,
    pub day: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Jitter {
            amplitude: 0.15,
            axis_gain: 0.1,
            harmonics: 0.2,
            cadence: 0.02,
            tilt: 0.15,
            day: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_users: usize,
    pub days: u8,
    pub rate_hz: f64,
    pub durations: Durations,
    pub gait: GaitTable,
    pub jitter: Jitter,
    /// Noise σ for accelerometer and gyroscope while walking.
    pub walk_noise: [f64; 2],
    /// Noise σ for accelerometer and gyroscope while sitting.
    pub sit_noise: [f64; 2],
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_users: 60,
            days: 2,
            rate_hz: 25.6,
            durations: Durations::default(),
            gait: GaitTable::default(),
            jitter: Jitter::default(),
            walk_noise: [0.25, 0.04],
            sit_noise: [0.02, 0.005],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarError::InvalidParameter(m.to_string()));
        if self.n_users == 0 || self.days == 0 {
            return bad("n_users and days must be positive");
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return bad("rate_hz must be positive");
        }
        for label in ActivityLabel::ALL {
            let d = self.durations.get(label);
            if !(d > 0.0 && d.is_finite()) {
                return bad(&format!("duration for {} must be positive", label.slug()));
            }
            if let Some(g) = self.gait.get(label) {
                if !(g.fundamental_hz > 0.0) {
                    return bad(&format!("fundamental for {} must be positive", label.slug()));
                }
            }
        }
        let walking: Vec<&GaitSignal> = ActivityLabel::ALL.iter().filter_map(|&l| self.gait.get(l)).collect();
        for (i, a) in walking.iter().enumerate() {
            if walking[i + 1..].iter().any(|b| b == a) {
                return bad("walking activities need distinct signal parameters");
            }
        }
        let noise_ok = |s: &[f64; 2]| s.iter().all(|v| *v >= 0.0 && v.is_finite());
        if !noise_ok(&self.walk_noise) || !noise_ok(&self.sit_noise) {
            return bad("noise levels must be non-negative");
        }
        let j = &self.jitter;
        let rel = [j.amplitude, j.axis_gain, j.harmonics, j.cadence, j.day];
        if rel.iter().any(|v| !(0.0..1.0).contains(v)) || !(j.tilt >= 0.0) {
            return bad("jitter widths must lie in [0, 1)");
        }
        Ok(())
    }

    pub fn n_samples(&self, label: ActivityLabel) -> usize {
        (self.durations.get(label) * self.rate_hz).round() as usize
    }

    /// Zero-padded user id for index `u`.
    pub fn user_id(&self, u: usize) -> String {
        let width = self.n_users.to_string().len().max(2);
        format!("{:0width$}", u + 1)
    }
}

struct UserTraits {
    amplitude: f64,
    gain: [[f64; 3]; 2],
    harmonics: f64,
    cadence: f64,
    gravity: [f64; 3],
}

fn user_traits(spec: &SynthSpec, u: usize) -> UserTraits {
    let mut rng = rng_for(spec.seed, &[0x5553_4552, u as u64]);
    let j = &spec.jitter;
    let mut around = |w: f64| if w > 0.0 { rng.gen_range(1.0 - w..1.0 + w) } else { 1.0 };
    let amplitude = around(j.amplitude);
    let gain = [
        [around(j.axis_gain), around(j.axis_gain), around(j.axis_gain)],
        [around(j.axis_gain), around(j.axis_gain), around(j.axis_gain)],
    ];
    let harmonics = around(j.harmonics);
    let cadence = around(j.cadence);
    let (theta, psi) = if j.tilt > 0.0 {
        (rng.gen_range(-j.tilt..j.tilt), rng.gen_range(-j.tilt..j.tilt))
    } else {
        (0.0, 0.0)
    };
    let gravity = [
        GRAVITY * psi.sin(),
        GRAVITY * psi.cos() * theta.cos(),
        GRAVITY * psi.cos() * theta.sin(),
    ];
    UserTraits {
        amplitude,
        gain,
        harmonics,
        cadence,
        gravity,
    }
}

/// One recording session for user index `u`, day `day` (1-based).
pub fn generate_series(spec: &SynthSpec, u: usize, day: u8, label: ActivityLabel) -> SensorSeries {
    let traits = user_traits(spec, u);
    let mut rng = rng_for(spec.seed, &[u as u64, day as u64, label.code() as u64]);
    let j = &spec.jitter;
    let day_gain = if j.day > 0.0 {
        rng_for(spec.seed, &[0x4441_59, u as u64, day as u64]).gen_range(1.0 - j.day..1.0 + j.day)
    } else {
        1.0
    };
    let n = spec.n_samples(label);
    let gait = spec.gait.get(label);
    let noise_sd = if gait.is_some() { spec.walk_noise } else { spec.sit_noise };
    let phases: [[f64; 3]; 2] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI)));
    let noise = [
        Normal::new(0.0, noise_sd[0]).expect("finite sigma"),
        Normal::new(0.0, noise_sd[1]).expect("finite sigma"),
    ];

    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / spec.rate_hz;
            let mut out = [[0.0; 3]; 2];
            for s in 0..2 {
                for a in 0..3 {
                    let mut v = if s == 0 { traits.gravity[a] } else { 0.0 };
                    if let Some(g) = gait {
                        let amp = if s == 0 { g.acc_amplitude[a] } else { g.gyro_amplitude[a] };
                        let w = 2.0 * PI * g.fundamental_hz * traits.cadence * t;
                        let ph = phases[s][a];
                        let h = traits.harmonics;
                        let wave = (w + ph).sin()
                            + g.harmonic2 * h * (2.0 * (w + ph) + g.harmonic2_phase).sin()
                            + g.harmonic3 * h * (3.0 * (w + ph)).sin();
                        v += traits.amplitude * day_gain * traits.gain[s][a] * amp * wave;
                    }
                    out[s][a] = v + noise[s].sample(&mut rng);
                }
            }
            RawRecord {
                t_ms: (i as f64 * 1000.0 / spec.rate_hz).round() as u64,
                acc: out[0],
                gyro: out[1],
            }
        })
        .collect();
    SensorSeries {
        meta: SessionMeta::new(spec.user_id(u), day, label),
        samples,
        nominal_rate_hz: spec.rate_hz,
    }
}

fn sessions(spec: &SynthSpec) -> Vec<(usize, u8, ActivityLabel)> {
    let mut out = Vec::new();
    for u in 0..spec.n_users {
        for day in 1..=spec.days {
            for label in ActivityLabel::ALL {
                out.push((u, day, label));
            }
        }
    }
    out
}

/// Every session of the dataset, ordered by user, day and activity code.
pub fn generate_dataset(spec: &SynthSpec) -> Result<Vec<SensorSeries>> {
    spec.validate()?;
    Ok(sessions(spec)
        .par_iter()
        .map(|&(u, day, label)| generate_series(spec, u, day, label))
        .collect())
}

/// Relative path of a session file inside a dataset directory.
pub fn session_path(user_id: &str, day: u8, label: ActivityLabel) -> PathBuf {
    PathBuf::from(format!("user_{user_id}"))
        .join(format!("day_{day}"))
        .join(format!("{}.csv", label.slug()))
}

/// Write the dataset as canonical CSV files under `dir`, plus a session
/// manifest; returns the recording paths written, in session order.
pub fn write_dataset(spec: &SynthSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    let entries = sessions(spec)
        .par_iter()
        .map(|&(u, day, label)| {
            let series = generate_series(spec, u, day, label);
            let rel = session_path(&series.meta.user_id, day, label);
            let path = dir.join(&rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| HarError::io(parent, e))?;
            }
            let file = fs::File::create(&path).map_err(|e| HarError::io(&path, e))?;
            write_canonical_csv(&series.samples, BufWriter::new(file)).map_err(|e| HarError::io(&path, e))?;
            Ok(SessionEntry {
                path: rel,
                meta: series.meta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = dir.join(SESSION_MANIFEST);
    let file = fs::File::create(&manifest).map_err(|e| HarError::io(&manifest, e))?;
    write_session_manifest(&entries, BufWriter::new(file))?;
    Ok(entries.into_iter().map(|e| dir.join(e.path)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::fft_spectrum;
    use crate::segment::{segment, DEFAULT_WINDOW_LEN};

    fn small() -> SynthSpec {
        SynthSpec {
            n_users: 2,
            days: 1,
            seed: 42,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_dataset(&small()).unwrap();
        let b = generate_dataset(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate_dataset(&SynthSpec { seed: 43, ..small() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn table_two_counts() {
        let spec = SynthSpec::default();
        let expected = [
            (ActivityLabel::Normal, 7168, 28),
            (ActivityLabel::Fast, 7424, 29),
            (ActivityLabel::WithBag, 6912, 27),
            (ActivityLabel::Downstairs, 1792, 7),
            (ActivityLabel::Upstairs, 1536, 6),
            (ActivityLabel::Sitting, 4096, 16),
        ];
        for (label, samples, windows) in expected {
            assert_eq!(spec.n_samples(label), samples);
            let s = generate_series(&spec, 0, 1, label);
            assert_eq!(s.len(), samples);
            assert_eq!(segment(&s, DEFAULT_WINDOW_LEN).len(), windows);
        }
    }

    #[test]
    fn timestamps_follow_rate() {
        let s = generate_series(&small(), 0, 1, ActivityLabel::Upstairs);
        assert_eq!(s.samples[0].t_ms, 0);
        assert_eq!(s.samples[1].t_ms, 39);
        assert_eq!(s.samples[256].t_ms, 10_000);
        assert!(s.samples.windows(2).all(|w| w[1].t_ms > w[0].t_ms));
    }

    fn dominant_bin(x: &[f64]) -> usize {
        let s = fft_spectrum(x).unwrap();
        (1..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap()
    }

    #[test]
    fn walking_fundamentals_dominate() {
        let spec = SynthSpec::default();
        let bin_hz = spec.rate_hz / DEFAULT_WINDOW_LEN as f64;
        for u in 0..5 {
            for label in [
                ActivityLabel::Normal,
                ActivityLabel::Fast,
                ActivityLabel::WithBag,
                ActivityLabel::Downstairs,
                ActivityLabel::Upstairs,
            ] {
                let f0 = spec.gait.get(label).unwrap().fundamental_hz;
                let s = generate_series(&spec, u, 1, label);
                for w in segment(&s, DEFAULT_WINDOW_LEN).iter().take(3) {
                    assert_eq!(dominant_bin(&w.data[1]), (f0 / bin_hz).round() as usize, "{label}");
                }
            }
        }
    }

    #[test]
    fn sitting_is_quiet() {
        let spec = SynthSpec::default();
        let energy = |label| {
            let s = generate_series(&spec, 3, 2, label);
            let w = &segment(&s, DEFAULT_WINDOW_LEN)[0];
            (0..6)
                .map(|c| {
                    let m = fft_spectrum(&w.data[c]).unwrap();
                    m[1..].iter().map(|v| v * v).sum::<f64>()
                })
                .sum::<f64>()
        };
        let sit = energy(ActivityLabel::Sitting);
        for label in ActivityLabel::ALL.into_iter().filter(|l| l.is_walking()) {
            assert!(sit < 0.1 * energy(label), "{label}");
        }
    }

    #[test]
    fn gravity_sits_on_y() {
        let s = generate_series(&SynthSpec::default(), 0, 1, ActivityLabel::Sitting);
        let mean_y = s.samples.iter().map(|r| r.acc[1]).sum::<f64>() / s.len() as f64;
        assert!((mean_y - GRAVITY).abs() < 0.15);
    }

    #[test]
    fn validation() {
        let mut spec = SynthSpec::default();
        spec.durations.fast = -1.0;
        assert!(spec.validate().is_err());
        let mut spec = SynthSpec::default();
        spec.gait.with_bag = spec.gait.normal.clone();
        assert!(spec.validate().is_err());
        assert!(SynthSpec { n_users: 0, ..SynthSpec::default() }.validate().is_err());
        assert!(SynthSpec::default().validate().is_ok());
        assert_eq!(SynthSpec::default().user_id(4), "05");
        assert_eq!(SynthSpec { n_users: 150, ..SynthSpec::default() }.user_id(4), "005");
    }

    #[test]
    fn written_files_parse_back_identically() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            n_users: 1,
            days: 1,
            ..SynthSpec::default()
        };
        let paths = write_dataset(&spec, dir.path()).unwrap();
        assert_eq!(paths.len(), 6);
        assert!(paths[0].ends_with("user_01/day_1/normal.csv"));
        let meta = SessionMeta::new("01", 1, ActivityLabel::Normal);
        let parsed =
            crate::ingest::parse_canonical_csv(&paths[0], meta, &crate::ingest::IngestConfig::default()).unwrap();
        assert_eq!(parsed.dropped, 0);
        assert_eq!(parsed.series.samples, generate_series(&spec, 0, 1, ActivityLabel::Normal).samples);
    }
}
