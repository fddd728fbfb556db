//! Fixed-length, non-overlapping windowing of aligned sensor series.

use serde::{Deserialize, Serialize};

use crate::ingest::{ActivityLabel, SensorSeries};

pub const DEFAULT_WINDOW_LEN: usize = 256;

/// Number of channels per window: acc x/y/z followed by gyro x/y/z.
pub const CHANNELS: usize = 6;

/// One six-channel segment of a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub user_id: String,
    pub day: u8,
    pub label: ActivityLabel,
    /// Offset of the first sample within the source series.
    pub start_index: usize,
    /// `data[c][i]`: channel `c` (acc x, y, z, gyro x, y, z), sample `i`.
    pub data: [Vec<f64>; CHANNELS],
    pub rate_hz: f64,
}

impl Window {
    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.data[0].is_empty()
    }

    pub fn acc(&self) -> [&[f64]; 3] {
        [&self.data[0], &self.data[1], &self.data[2]]
    }

    pub fn gyro(&self) -> [&[f64]; 3] {
        [&self.data[3], &self.data[4], &self.data[5]]
    }
}

/// Cut `series` into `floor(N / window_len)` consecutive windows. The
/// trailing partial window is discarded.
///
/// # Panics
/// If `window_len < 2`.
pub fn segment(series: &SensorSeries, window_len: usize) -> Vec<Window> {
    assert!(window_len >= 2, "window length must be at least 2 samples");
    series
        .samples
        .chunks_exact(window_len)
        .enumerate()
        .map(|(i, chunk)| {
            let mut data: [Vec<f64>; CHANNELS] = Default::default();
            for (c, channel) in data.iter_mut().enumerate() {
                *channel = chunk
                    .iter()
                    .map(|r| if c < 3 { r.acc[c] } else { r.gyro[c - 3] })
                    .collect();
            }
            Window {
                user_id: series.meta.user_id.clone(),
                day: series.meta.day,
                label: series.meta.label,
                start_index: i * window_len,
                data,
                rate_hz: series.nominal_rate_hz,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{RawRecord, SessionMeta};
    use proptest::prelude::*;

    fn series(n: usize) -> SensorSeries {
        SensorSeries {
            meta: SessionMeta::new("u07", 2, ActivityLabel::Upstairs),
            samples: (0..n)
                .map(|i| {
                    let v = i as f64;
                    RawRecord {
                        t_ms: i as u64 * 39,
                        acc: [v, v + 0.1, v + 0.2],
                        gyro: [-v, -v - 0.1, -v - 0.2],
                    }
                })
                .collect(),
            nominal_rate_hz: 25.6,
        }
    }

    #[test]
    fn table_two_window_counts() {
        for (n, expected) in [(7168, 28), (7424, 29), (6912, 27), (1792, 7), (1536, 6)] {
            assert_eq!(segment(&series(n), 256).len(), expected, "N={n}");
        }
    }

    #[test]
    fn partial_window_dropped() {
        assert!(segment(&series(255), 256).is_empty());
    }

    #[test]
    fn exact_division() {
        let w = segment(&series(512), 256);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].start_index, 0);
        assert_eq!(w[1].start_index, 256);
        assert_eq!(w[1].data[0][0], 256.0);
        assert_eq!(w[1].data[4][0], -256.1);
        assert_eq!(w[1].label, ActivityLabel::Upstairs);
        assert_eq!(w[1].rate_hz, 25.6);
    }

    #[test]
    #[should_panic]
    fn window_len_below_two_panics() {
        segment(&series(10), 1);
    }

    proptest! {
        #[test]
        fn windows_reconstruct_prefix(n in 0usize..600, len in 2usize..70) {
            let s = series(n);
            let windows = segment(&s, len);
            prop_assert_eq!(windows.len(), n / len);
            for c in 0..CHANNELS {
                let joined: Vec<f64> = windows.iter().flat_map(|w| w.data[c].iter().copied()).collect();
                let expected: Vec<f64> = s.samples[..windows.len() * len]
                    .iter()
                    .map(|r| if c < 3 { r.acc[c] } else { r.gyro[c - 3] })
                    .collect();
                prop_assert_eq!(joined, expected);
            }
            for (i, w) in windows.iter().enumerate() {
                prop_assert_eq!(w.start_index, i * len);
                prop_assert_eq!(w.len(), len);
            }
        }
    }
}
