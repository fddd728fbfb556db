//! Definitional reimplementations of every manifest statistic, including an
//! O(L²) DFT in place of the FFT.

#![allow(dead_code)]

use har_core::features::{Axis, Statistic};
use har_core::ingest::ActivityLabel;
use har_core::segment::Window;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const L: usize = 256;
pub const RATE: f64 = 25.6;

/// Neumaier-compensated sum.
pub fn csum(it: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in it {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn naive_dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let re = csum((0..n).map(|j| x[j] * (2.0 * PI * ((k * j) % n) as f64 / n as f64).cos()));
            let im = csum((0..n).map(|j| -x[j] * (2.0 * PI * ((k * j) % n) as f64 / n as f64).sin()));
            re.hypot(im)
        })
        .collect()
}

pub fn o_mean(x: &[f64]) -> f64 {
    csum(x.iter().copied()) / x.len() as f64
}

pub fn o_moment(x: &[f64], k: i32) -> f64 {
    let m = o_mean(x);
    csum(x.iter().map(|v| (v - m).powi(k))) / x.len() as f64
}

pub fn o_constant(x: &[f64]) -> bool {
    x.iter().all(|v| *v == x[0])
}

pub fn o_var(x: &[f64]) -> f64 {
    if o_constant(x) {
        0.0
    } else {
        o_moment(x, 2)
    }
}

pub fn o_percentile(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = q / 100.0 * (s.len() - 1) as f64;
    let i = rank as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] + (rank - i as f64) * (s[i + 1] - s[i])
}

pub fn o_max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::MIN, f64::max)
}

pub fn o_min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::MAX, f64::min)
}

pub fn o_cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (o_mean(x), o_mean(y));
    csum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my))) / x.len() as f64
}

pub fn o_peaks(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..x.len() - 1 {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] {
            out.push(i);
        }
    }
    out
}

pub fn o_troughs(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..x.len() - 1 {
        if x[i] < x[i - 1] && x[i] <= x[i + 1] {
            out.push(i);
        }
    }
    out
}

pub fn o_single(stat: Statistic, x: &[f64]) -> f64 {
    match stat {
        Statistic::Mean => o_mean(x),
        Statistic::StdDev => o_var(x).sqrt(),
        Statistic::Median => {
            let mut s = x.to_vec();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = s.len();
            if n % 2 == 0 {
                0.5 * (s[n / 2 - 1] + s[n / 2])
            } else {
                s[n / 2]
            }
        }
        Statistic::Variance => o_var(x),
        Statistic::ZeroCrossingRate => {
            let m = o_mean(x);
            let mut c = 0;
            for i in 1..x.len() {
                let (a, b) = (x[i - 1] - m, x[i] - m);
                if a * b < 0.0 {
                    c += 1;
                }
            }
            c as f64 / (x.len() - 1) as f64
        }
        Statistic::Iqr => o_percentile(x, 75.0) - o_percentile(x, 25.0),
        Statistic::AvgAbsDiff => {
            let m = o_mean(x);
            csum(x.iter().map(|v| (v - m).abs())) / x.len() as f64
        }
        Statistic::Difference => o_max(x) - o_min(x),
        Statistic::Rms => (csum(x.iter().map(|v| v * v)) / x.len() as f64).sqrt(),
        Statistic::Skewness => {
            if o_constant(x) {
                0.0
            } else {
                o_moment(x, 3) / o_moment(x, 2).powf(1.5)
            }
        }
        Statistic::Kurtosis => {
            if o_constant(x) {
                0.0
            } else {
                o_moment(x, 4) / o_moment(x, 2).powi(2) - 3.0
            }
        }
        Statistic::P25 => o_percentile(x, 25.0),
        Statistic::P50 => o_percentile(x, 50.0),
        Statistic::P75 => o_percentile(x, 75.0),
        Statistic::Max => o_max(x),
        Statistic::Min => o_min(x),
        Statistic::MaxPeak => {
            let p = o_peaks(x);
            if p.is_empty() {
                o_max(x)
            } else {
                p.iter().map(|&i| x[i]).fold(f64::MIN, f64::max)
            }
        }
        Statistic::MinPeak => {
            let p = o_troughs(x);
            if p.is_empty() {
                o_min(x)
            } else {
                p.iter().map(|&i| x[i]).fold(f64::MAX, f64::min)
            }
        }
        Statistic::PeakCount => o_peaks(x).len() as f64,
        Statistic::PeakInterval => {
            let p = o_peaks(x);
            if p.len() < 2 {
                0.0
            } else {
                let gaps: Vec<f64> = p.windows(2).map(|w| (w[1] - w[0]) as f64 / RATE).collect();
                csum(gaps.iter().copied()) / gaps.len() as f64
            }
        }
        Statistic::Entropy => {
            let power: Vec<f64> = x[1..].iter().map(|m| m * m).collect();
            let total = csum(power.iter().copied());
            if total == 0.0 {
                0.0
            } else {
                -csum(power.iter().filter(|p| **p > 0.0).map(|p| (p / total) * (p / total).ln()))
            }
        }
        Statistic::Energy => csum(x[1..].iter().map(|m| m * m)) / (x.len() - 1) as f64,
        other => panic!("{other:?} is not single-signal"),
    }
}

pub fn o_binned(x: &[f64], k: usize) -> f64 {
    let (lo, hi) = (o_min(x), o_max(x));
    if lo == hi {
        return 0.1;
    }
    let w = (hi - lo) / 10.0;
    let count = x
        .iter()
        .filter(|&&v| {
            let mut b = ((v - lo) / w).floor() as usize;
            if b > 9 {
                b = 9;
            }
            b == k
        })
        .count();
    count as f64 / x.len() as f64
}

pub fn oracle(stat: Statistic, axis: Axis, signals: &[Vec<f64>; 3]) -> f64 {
    let norms: Vec<f64> = (0..signals[0].len())
        .map(|i| (signals[0][i].powi(2) + signals[1][i].powi(2) + signals[2][i].powi(2)).sqrt())
        .collect();
    match (stat, axis) {
        (Statistic::Binned, Axis::Bin { axis, k }) => o_binned(&signals[axis as usize], k as usize),
        (Statistic::Max, Axis::Resultant) => o_max(&norms),
        (Statistic::Min, Axis::Resultant) => o_min(&norms),
        (Statistic::AvgResultant, Axis::Resultant) => o_mean(&norms),
        (Statistic::Covariance | Statistic::Correlation, pair) => {
            let (a, b) = match pair {
                Axis::XY => (0, 1),
                Axis::YZ => (1, 2),
                Axis::XZ => (0, 2),
                _ => unreachable!(),
            };
            let (x, y) = (&signals[a], &signals[b]);
            if stat == Statistic::Covariance {
                o_cov(x, y)
            } else if o_constant(x) || o_constant(y) {
                0.0
            } else {
                o_cov(x, y) / (o_var(x) * o_var(y)).sqrt()
            }
        }
        (s, Axis::X) => o_single(s, &signals[0]),
        (s, Axis::Y) => o_single(s, &signals[1]),
        (s, Axis::Z) => o_single(s, &signals[2]),
        other => panic!("unexpected {other:?}"),
    }
}

pub fn random_window(rng: &mut ChaCha8Rng) -> Window {
    let data: [Vec<f64>; 6] = std::array::from_fn(|c| {
        let f = rng.gen_range(0.5..4.0);
        let amp = rng.gen_range(0.2..4.0);
        let offset = if c == 1 { 9.81 } else { rng.gen_range(-1.0..1.0) };
        let noise = rng.gen_range(0.01..1.0);
        let phase = rng.gen_range(0.0..2.0 * PI);
        (0..L)
            .map(|i| {
                let t = i as f64 / RATE;
                offset
                    + amp * (2.0 * PI * f * t + phase).sin()
                    + 0.3 * amp * (4.0 * PI * f * t).sin()
                    + noise * rng.gen_range(-1.0..1.0)
            })
            .collect()
    });
    Window {
        user_id: "oracle".into(),
        day: 1,
        label: ActivityLabel::Normal,
        start_index: 0,
        data,
        rate_hz: RATE,
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
