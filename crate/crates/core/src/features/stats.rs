//! Per-signal statistics used by the feature catalogue.
//!
//! Conventions: population moments (divisor N), excess kurtosis, linear
//! interpolation between order statistics for percentiles. Statistics that
//! are undefined on a degenerate input return a fixed sentinel instead of
//! NaN (see the individual functions).

use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};

/// Number of equal-width bins used by the binned distribution.
pub const HIST_BINS: usize = 10;

/// Every statistic kind the catalogue knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Statistic {
    Mean,
    StdDev,
    Median,
    Variance,
    ZeroCrossingRate,
    Iqr,
    AvgAbsDiff,
    Difference,
    Rms,
    Skewness,
    Kurtosis,
    P25,
    P50,
    P75,
    Max,
    Min,
    Covariance,
    Correlation,
    AvgResultant,
    Binned,
    MaxPeak,
    MinPeak,
    PeakCount,
    PeakInterval,
    Entropy,
    Energy,
}

impl Statistic {
    pub const ALL: [Statistic; 26] = [
        Statistic::Mean,
        Statistic::StdDev,
        Statistic::Median,
        Statistic::Variance,
        Statistic::ZeroCrossingRate,
        Statistic::Iqr,
        Statistic::AvgAbsDiff,
        Statistic::Difference,
        Statistic::Rms,
        Statistic::Skewness,
        Statistic::Kurtosis,
        Statistic::P25,
        Statistic::P50,
        Statistic::P75,
        Statistic::Max,
        Statistic::Min,
        Statistic::Covariance,
        Statistic::Correlation,
        Statistic::AvgResultant,
        Statistic::Binned,
        Statistic::MaxPeak,
        Statistic::MinPeak,
        Statistic::PeakCount,
        Statistic::PeakInterval,
        Statistic::Entropy,
        Statistic::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::Mean => "mean",
            Statistic::StdDev => "std",
            Statistic::Median => "median",
            Statistic::Variance => "variance",
            Statistic::ZeroCrossingRate => "zcr",
            Statistic::Iqr => "iqr",
            Statistic::AvgAbsDiff => "aad",
            Statistic::Difference => "difference",
            Statistic::Rms => "rms",
            Statistic::Skewness => "skewness",
            Statistic::Kurtosis => "kurtosis",
            Statistic::P25 => "p25",
            Statistic::P50 => "p50",
            Statistic::P75 => "p75",
            Statistic::Max => "max",
            Statistic::Min => "min",
            Statistic::Covariance => "covariance",
            Statistic::Correlation => "correlation",
            Statistic::AvgResultant => "avg_resultant",
            Statistic::Binned => "binned",
            Statistic::MaxPeak => "max_peak",
            Statistic::MinPeak => "min_peak",
            Statistic::PeakCount => "peak_count",
            Statistic::PeakInterval => "peak_interval",
            Statistic::Entropy => "entropy",
            Statistic::Energy => "energy",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// How many signals the statistic consumes: one axis, an axis pair, or
    /// all three axes.
    pub fn arity(self) -> usize {
        match self {
            Statistic::Covariance | Statistic::Correlation => 2,
            Statistic::AvgResultant => 3,
            _ => 1,
        }
    }
}

/// Evaluate `kind` on its input signal(s). Returns one value, or
/// [`HIST_BINS`] values for [`Statistic::Binned`]. `rate_hz` converts sample
/// gaps to seconds for [`Statistic::PeakInterval`].
///
/// [`Statistic::Entropy`] and [`Statistic::Energy`] expect a one-sided
/// magnitude spectrum with the DC bin first.
pub fn compute_statistic(kind: Statistic, signals: &[&[f64]], rate_hz: f64) -> Result<Vec<f64>> {
    if signals.len() != kind.arity() {
        return Err(HarError::InvalidParameter(format!(
            "{} takes {} signal(s), got {}",
            kind.name(),
            kind.arity(),
            signals.len()
        )));
    }
    let n = signals[0].len();
    for s in signals {
        if s.len() != n {
            return Err(HarError::ShapeMismatch {
                expected: n,
                got: s.len(),
            });
        }
        if s.len() < 2 {
            return Err(HarError::TooFewSamples {
                needed: 2,
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(HarError::NonFinite(kind.name().into()));
        }
    }
    if kind == Statistic::Binned {
        return Ok(binned_distribution(signals[0]).to_vec());
    }
    let x = signals[0];
    let value = match kind {
        Statistic::Covariance => covariance(x, signals[1]),
        Statistic::Correlation => correlation(x, signals[1]),
        Statistic::AvgResultant => avg_resultant(x, signals[1], signals[2]),
        Statistic::PeakInterval => peak_interval(x, rate_hz),
        other => single(other, x, &sorted(x)),
    };
    Ok(vec![value])
}

/// Single-signal statistics, given a pre-sorted copy of the input.
pub(crate) fn single(kind: Statistic, x: &[f64], sorted: &[f64]) -> f64 {
    match kind {
        Statistic::Mean => mean(x),
        Statistic::StdDev => variance(x).sqrt(),
        Statistic::Median => median_sorted(sorted),
        Statistic::Variance => variance(x),
        Statistic::ZeroCrossingRate => zero_crossing_rate(x),
        Statistic::Iqr => percentile_sorted(sorted, 75.0) - percentile_sorted(sorted, 25.0),
        Statistic::AvgAbsDiff => avg_abs_diff(x),
        Statistic::Difference => sorted[sorted.len() - 1] - sorted[0],
        Statistic::Rms => rms(x),
        Statistic::Skewness => skewness(x),
        Statistic::Kurtosis => kurtosis(x),
        Statistic::P25 => percentile_sorted(sorted, 25.0),
        Statistic::P50 => percentile_sorted(sorted, 50.0),
        Statistic::P75 => percentile_sorted(sorted, 75.0),
        Statistic::Max => sorted[sorted.len() - 1],
        Statistic::Min => sorted[0],
        Statistic::MaxPeak => max_peak(x),
        Statistic::MinPeak => min_peak(x),
        Statistic::PeakCount => local_maxima(x).count() as f64,
        Statistic::Entropy => spectral_entropy(x),
        Statistic::Energy => spectral_energy(x),
        Statistic::Covariance
        | Statistic::Correlation
        | Statistic::AvgResultant
        | Statistic::Binned
        | Statistic::PeakInterval => unreachable!("not a plain single-signal statistic"),
    }
}

pub(crate) fn sorted(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Neumaier-compensated sum.
pub(crate) fn fsum(it: impl IntoIterator<Item = f64>) -> f64 {
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

pub fn mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = fsum(x.iter().copied()) / n;
    m + fsum(x.iter().map(|v| v - m)) / n
}

/// k-th central moment (population).
fn central_moment(x: &[f64], m: f64, k: i32) -> f64 {
    fsum(x.iter().map(|v| (v - m).powi(k))) / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    if is_constant(x) {
        return 0.0;
    }
    central_moment(x, mean(x), 2)
}

pub fn rms(x: &[f64]) -> f64 {
    (fsum(x.iter().map(|v| v * v)) / x.len() as f64).sqrt()
}

pub fn avg_abs_diff(x: &[f64]) -> f64 {
    let m = mean(x);
    fsum(x.iter().map(|v| (v - m).abs())) / x.len() as f64
}

/// `m3 / m2^1.5`; 0 for a constant signal.
pub fn skewness(x: &[f64]) -> f64 {
    if is_constant(x) {
        return 0.0;
    }
    let m = mean(x);
    central_moment(x, m, 3) / central_moment(x, m, 2).powf(1.5)
}

/// Excess kurtosis `m4 / m2² - 3`; 0 for a constant signal.
pub fn kurtosis(x: &[f64]) -> f64 {
    if is_constant(x) {
        return 0.0;
    }
    let m = mean(x);
    let m2 = central_moment(x, m, 2);
    central_moment(x, m, 4) / (m2 * m2) - 3.0
}

pub fn median_sorted(s: &[f64]) -> f64 {
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Percentile `q` in [0, 100] by linear interpolation at rank `q/100·(N-1)`.
pub fn percentile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    s[lo] + (s[hi] - s[lo]) * frac
}

/// Fraction of adjacent pairs whose mean-centred values change sign.
pub fn zero_crossing_rate(x: &[f64]) -> f64 {
    let m = mean(x);
    let crossings = x
        .windows(2)
        .filter(|w| {
            let (a, b) = (w[0] - m, w[1] - m);
            (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0)
        })
        .count();
    crossings as f64 / (x.len() - 1) as f64
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    fsum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my))) / x.len() as f64
}

/// Pearson correlation; 0 when either signal is constant.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    if is_constant(x) || is_constant(y) {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    let vx = central_moment(x, mx, 2);
    let vy = central_moment(y, my, 2);
    covariance(x, y) / (vx * vy).sqrt()
}

pub fn avg_resultant(x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    mean(&resultant(x, y, z).collect::<Vec<_>>())
}

pub(crate) fn resultant<'a>(
    x: &'a [f64],
    y: &'a [f64],
    z: &'a [f64],
) -> impl Iterator<Item = f64> + 'a {
    x.iter()
        .zip(y)
        .zip(z)
        .map(|((a, b), c)| (a * a + b * b + c * c).sqrt())
}

/// Relative histogram over [`HIST_BINS`] equal-width bins spanning the
/// signal's range. A constant signal yields the uniform distribution.
pub fn binned_distribution(x: &[f64]) -> [f64; HIST_BINS] {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if lo == hi {
        return [1.0 / HIST_BINS as f64; HIST_BINS];
    }
    let width = (hi - lo) / HIST_BINS as f64;
    let mut counts = [0usize; HIST_BINS];
    for &v in x {
        let b = (((v - lo) / width).floor() as usize).min(HIST_BINS - 1);
        counts[b] += 1;
    }
    counts.map(|c| c as f64 / x.len() as f64)
}

/// Indices `i` (endpoints excluded) with `x[i-1] < x[i] >= x[i+1]`.
pub fn local_maxima(x: &[f64]) -> impl Iterator<Item = usize> + '_ {
    (1..x.len().saturating_sub(1)).filter(move |&i| x[i - 1] < x[i] && x[i] >= x[i + 1])
}

/// Indices `i` (endpoints excluded) with `x[i-1] > x[i] <= x[i+1]`.
pub fn local_minima(x: &[f64]) -> impl Iterator<Item = usize> + '_ {
    (1..x.len().saturating_sub(1)).filter(move |&i| x[i - 1] > x[i] && x[i] <= x[i + 1])
}

/// Largest local maximum; the signal maximum when there is none.
pub fn max_peak(x: &[f64]) -> f64 {
    local_maxima(x)
        .map(|i| x[i])
        .reduce(f64::max)
        .unwrap_or_else(|| x.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Smallest local minimum; the signal minimum when there is none.
pub fn min_peak(x: &[f64]) -> f64 {
    local_minima(x)
        .map(|i| x[i])
        .reduce(f64::min)
        .unwrap_or_else(|| x.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Mean gap between consecutive local maxima, in seconds; 0 with fewer
/// than two maxima.
pub fn peak_interval(x: &[f64], rate_hz: f64) -> f64 {
    let peaks: Vec<usize> = local_maxima(x).collect();
    if peaks.len() < 2 || rate_hz <= 0.0 {
        return 0.0;
    }
    let gaps = (peaks[peaks.len() - 1] - peaks[0]) as f64 / (peaks.len() - 1) as f64;
    gaps / rate_hz
}

/// Shannon entropy (nats) of the normalised PSD `|X[k]|²`, DC excluded.
/// 0 when the spectrum carries no non-DC power.
pub fn spectral_entropy(magnitudes: &[f64]) -> f64 {
    let psd = &magnitudes[1..];
    let total = fsum(psd.iter().map(|m| m * m));
    if total <= 0.0 {
        return 0.0;
    }
    -fsum(
        psd.iter()
            .map(|m| m * m / total)
            .filter(|&p| p > 0.0)
            .map(|p| p * p.ln()),
    )
}

/// Mean of `|X[k]|²` over the non-DC bins of a one-sided spectrum.
pub fn spectral_energy(magnitudes: &[f64]) -> f64 {
    let psd = &magnitudes[1..];
    fsum(psd.iter().map(|m| m * m)) / psd.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stat(kind: Statistic, x: &[f64]) -> f64 {
        compute_statistic(kind, &[x], 1.0).unwrap()[0]
    }

    #[test]
    fn arithmetic_examples() {
        assert_eq!(stat(Statistic::Mean, &[1.0, 2.0, 3.0, 4.0]), 2.5);
        assert!((stat(Statistic::Rms, &[3.0, 4.0]) - 12.5f64.sqrt()).abs() < 1e-15);
        assert!((stat(Statistic::Rms, &[3.0, 4.0]) - 3.53553).abs() < 1e-5);
        assert_eq!(stat(Statistic::Median, &[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(stat(Statistic::P25, &[1.0, 2.0, 3.0, 4.0, 5.0]), 2.0);
        assert_eq!(stat(Statistic::P75, &[1.0, 2.0, 3.0, 4.0]), 3.25);
        assert_eq!(stat(Statistic::Iqr, &[1.0, 2.0, 3.0, 4.0]), 1.5);
        assert_eq!(stat(Statistic::Difference, &[3.0, -1.0, 2.0]), 4.0);
        assert_eq!(stat(Statistic::AvgAbsDiff, &[1.0, 3.0]), 1.0);
    }

    #[test]
    fn symmetry_and_identity() {
        assert_eq!(stat(Statistic::Skewness, &[-2.0, -1.0, 0.0, 1.0, 2.0]), 0.0);
        let x = [0.3, -1.2, 4.5, 2.2, 0.0, 1.1];
        let r = compute_statistic(Statistic::Correlation, &[&x, &x], 1.0).unwrap()[0];
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kurtosis_and_zcr_by_hand() {
        // deviations -2..2: m2 = 10/5 = 2, m4 = 34/5 = 6.8, 6.8/4 - 3 = -1.3
        assert!((stat(Statistic::Kurtosis, &[1.0, 2.0, 3.0, 4.0, 5.0]) + 1.3).abs() < 1e-15);
        assert_eq!(stat(Statistic::ZeroCrossingRate, &[1.0, -1.0, 1.0, -1.0]), 1.0);
    }

    #[test]
    fn degenerate_sentinels() {
        let c = [2.5; 16];
        assert_eq!(stat(Statistic::Skewness, &c), 0.0);
        assert_eq!(stat(Statistic::Kurtosis, &c), 0.0);
        assert_eq!(stat(Statistic::Variance, &c), 0.0);
        assert_eq!(stat(Statistic::PeakInterval, &c), 0.0);
        assert_eq!(stat(Statistic::PeakCount, &c), 0.0);
        assert_eq!(stat(Statistic::MaxPeak, &c), 2.5);
        let r = compute_statistic(Statistic::Correlation, &[&c, &[1.0, 2.0].repeat(8)], 1.0).unwrap();
        assert_eq!(r, vec![0.0]);
        let b = compute_statistic(Statistic::Binned, &[&c], 1.0).unwrap();
        assert_eq!(b, vec![0.1; HIST_BINS]);
        assert_eq!(spectral_entropy(&[5.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn peaks_respect_plateau_rule() {
        let x = [0.0, 1.0, 1.0, 0.0, 2.0, 0.5];
        let maxima: Vec<usize> = local_maxima(&x).collect();
        assert_eq!(maxima, vec![1, 4]);
        assert_eq!(max_peak(&x), 2.0);
        assert_eq!(peak_interval(&x, 2.0), 1.5);
        assert_eq!(min_peak(&x), 0.0);
    }

    #[test]
    fn entropy_extremes() {
        let flat = [3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!((spectral_entropy(&flat) - 8f64.ln()).abs() < 1e-12);
        let one_hot = [3.0, 0.0, 0.0, 7.0, 0.0];
        assert_eq!(spectral_entropy(&one_hot), 0.0);
    }

    #[test]
    fn energy_excludes_dc() {
        assert_eq!(spectral_energy(&[100.0, 1.0, 2.0]), 2.5);
    }

    #[test]
    fn sinusoid_peaks() {
        let rate = 25.6;
        let l = 256;
        for k in [2usize, 5, 9, 17] {
            let x: Vec<f64> = (0..l)
                .map(|n| (2.0 * std::f64::consts::PI * k as f64 * n as f64 / l as f64 + 0.3).sin())
                .collect();
            let count = stat(Statistic::PeakCount, &x) as i64;
            assert!((count - k as i64).abs() <= 1, "k={k} count={count}");
            let gap = peak_interval(&x, rate);
            let expected = l as f64 / (k as f64 * rate);
            assert!((gap - expected).abs() / expected < 0.1, "k={k} gap={gap}");
        }
    }

    #[test]
    fn input_validation() {
        assert!(compute_statistic(Statistic::Mean, &[&[1.0]], 1.0).is_err());
        assert!(compute_statistic(Statistic::Mean, &[&[1.0, f64::NAN]], 1.0).is_err());
        assert!(compute_statistic(Statistic::Covariance, &[&[1.0, 2.0]], 1.0).is_err());
        assert!(compute_statistic(Statistic::Covariance, &[&[1.0, 2.0], &[1.0]], 1.0).is_err());
    }

    fn signal() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-50.0f64..50.0, 8..64)
            .prop_filter("non-constant", |v| v.iter().any(|x| *x != v[0]))
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn location_statistics_scale_linearly(x in signal(), a in 0.1f64..20.0) {
            let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
            for kind in [Statistic::Mean, Statistic::Median, Statistic::P25, Statistic::P50,
                         Statistic::P75, Statistic::Min, Statistic::Max, Statistic::Rms] {
                prop_assert!(close(stat(kind, &ax), a * stat(kind, &x), 1e-12), "{:?}", kind);
            }
            prop_assert!(close(stat(Statistic::Variance, &ax), a * a * stat(Statistic::Variance, &x), 1e-12));
        }

        #[test]
        fn shape_statistics_are_scale_invariant(x in signal(), a in 0.1f64..20.0, b in -5.0f64..5.0) {
            let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
            for kind in [Statistic::Skewness, Statistic::Kurtosis, Statistic::ZeroCrossingRate] {
                prop_assert!(close(stat(kind, &ax), stat(kind, &x), 1e-9), "{:?}", kind);
            }
            let shifted: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * 0.5 + (i as f64).sin()).collect();
            let r1 = compute_statistic(Statistic::Correlation, &[&x, &y], 1.0).unwrap()[0];
            let r2 = compute_statistic(Statistic::Correlation, &[&shifted, &y], 1.0).unwrap()[0];
            prop_assert!(close(r1, r2, 1e-9));
        }

        #[test]
        fn binned_is_a_distribution(x in signal(), a in 0.5f64..4.0) {
            let b = binned_distribution(&x);
            prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // a = 2^k keeps the bin arithmetic exact
            let pow2 = 2f64.powi(a.round() as i32);
            let scaled: Vec<f64> = x.iter().map(|v| pow2 * v).collect();
            prop_assert_eq!(binned_distribution(&scaled), b);
        }
    }
}
