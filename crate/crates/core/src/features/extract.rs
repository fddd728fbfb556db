use std::cell::OnceCell;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, Axis as NdAxis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fft::fft_spectrum;
use super::manifest::{Axis, Domain, FeatureManifest, Sensor};
use super::stats::{self, Statistic, HIST_BINS};
use crate::error::{HarError, Result};
use crate::ingest::ActivityLabel;
use crate::segment::Window;

/// Where a feature row came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowMeta {
    pub user_id: String,
    pub day: u8,
    pub label: ActivityLabel,
    pub start_index: usize,
}

impl RowMeta {
    /// Canonical dataset order: user, day, session (activity), window start.
    pub fn sort_key(&self) -> (&str, u8, usize, usize) {
        (&self.user_id, self.day, self.label.code(), self.start_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub meta: RowMeta,
    pub values: Vec<f64>,
}

/// The three signals of one sensor in one domain, with lazily computed
/// sorted copies and histograms.
struct SignalSet {
    signals: [Vec<f64>; 3],
    sorted: [OnceCell<Vec<f64>>; 3],
    binned: [OnceCell<[f64; HIST_BINS]>; 3],
    resultant: OnceCell<Vec<f64>>,
}

impl SignalSet {
    fn new(signals: [Vec<f64>; 3]) -> Self {
        Self {
            signals,
            sorted: Default::default(),
            binned: Default::default(),
            resultant: OnceCell::new(),
        }
    }

    fn sorted(&self, a: usize) -> &[f64] {
        self.sorted[a].get_or_init(|| stats::sorted(&self.signals[a]))
    }

    fn resultant(&self) -> &[f64] {
        self.resultant.get_or_init(|| {
            let [x, y, z] = &self.signals;
            stats::resultant(x, y, z).collect()
        })
    }
}

/// Evaluate every manifest entry on one window, in manifest order. Time
/// domain statistics use the raw samples; frequency domain statistics use
/// the channel's one-sided magnitude spectrum.
pub fn extract_window(window: &Window, manifest: &FeatureManifest) -> Result<FeatureVector> {
    let l = window.len();
    if l < 2 {
        return Err(HarError::TooFewSamples { needed: 2, got: l });
    }
    if window.data.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HarError::NonFinite(format!(
            "window {}/{}/{}@{}",
            window.user_id, window.day, window.label, window.start_index
        )));
    }

    let time_set = |sensor: Sensor| {
        let o = sensor.channel_offset();
        SignalSet::new([
            window.data[o].clone(),
            window.data[o + 1].clone(),
            window.data[o + 2].clone(),
        ])
    };
    let freq_set = |sensor: Sensor| -> Result<SignalSet> {
        let o = sensor.channel_offset();
        Ok(SignalSet::new([
            fft_spectrum(&window.data[o])?,
            fft_spectrum(&window.data[o + 1])?,
            fft_spectrum(&window.data[o + 2])?,
        ]))
    };
    // [acc time, acc freq, gyro time, gyro freq]
    let sets: [OnceCell<SignalSet>; 4] = Default::default();

    let mut values = Vec::with_capacity(manifest.len());
    for d in manifest.descriptors() {
        d.validate()?;
        let slot = d.sensor.channel_offset() / 3 * 2 + (d.domain == Domain::Freq) as usize;
        let set = match sets[slot].get() {
            Some(s) => s,
            None => {
                let s = match d.domain {
                    Domain::Time => time_set(d.sensor),
                    Domain::Freq => freq_set(d.sensor)?,
                };
                let _ = sets[slot].set(s);
                sets[slot].get().expect("just set")
            }
        };
        values.push(evaluate(d.statistic, d.axis, set, window.rate_hz));
    }
    Ok(FeatureVector {
        meta: RowMeta {
            user_id: window.user_id.clone(),
            day: window.day,
            label: window.label,
            start_index: window.start_index,
        },
        values,
    })
}

fn evaluate(stat: Statistic, axis: Axis, set: &SignalSet, rate_hz: f64) -> f64 {
    let sig = |a: usize| set.signals[a].as_slice();
    match (stat, axis) {
        (Statistic::Binned, Axis::Bin { axis, k }) => {
            let a = axis as usize;
            set.binned[a].get_or_init(|| stats::binned_distribution(sig(a)))[k as usize]
        }
        (Statistic::Max, Axis::Resultant) => {
            set.resultant().iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        (Statistic::Min, Axis::Resultant) => {
            set.resultant().iter().copied().fold(f64::INFINITY, f64::min)
        }
        (Statistic::AvgResultant, _) => stats::mean(set.resultant()),
        (Statistic::Covariance | Statistic::Correlation, pair) => {
            let c = pair.components();
            if stat == Statistic::Covariance {
                stats::covariance(sig(c[0]), sig(c[1]))
            } else {
                stats::correlation(sig(c[0]), sig(c[1]))
            }
        }
        (Statistic::PeakInterval, a) => stats::peak_interval(sig(a.components()[0]), rate_hz),
        (kind, a) => {
            let i = a.components()[0];
            stats::single(kind, sig(i), set.sorted(i))
        }
    }
}

/// Row-major feature table with provenance for each row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_ids: Vec<String>,
    pub rows: Vec<RowMeta>,
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn from_vectors(feature_ids: Vec<String>, vectors: Vec<FeatureVector>) -> Result<Self> {
        let p = feature_ids.len();
        let mut values = Array2::zeros((vectors.len(), p));
        let mut rows = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.into_iter().enumerate() {
            if v.values.len() != p {
                return Err(HarError::ShapeMismatch {
                    expected: p,
                    got: v.values.len(),
                });
            }
            values.row_mut(i).assign(&ndarray::ArrayView1::from(&v.values));
            rows.push(v.meta);
        }
        Ok(Self {
            feature_ids,
            rows,
            values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn labels(&self) -> Vec<ActivityLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Reorder rows by (user, day, activity, window start).
    pub fn sort_canonical(&mut self) {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| self.rows[a].sort_key().cmp(&self.rows[b].sort_key()));
        self.values = self.values.select(NdAxis(0), &order);
        self.rows = order.iter().map(|&i| self.rows[i].clone()).collect();
    }

    /// Keep only the named columns, in the given order.
    pub fn select_columns(&self, ids: &[String]) -> Result<Self> {
        let idx = ids
            .iter()
            .map(|id| {
                self.feature_ids
                    .iter()
                    .position(|f| f == id)
                    .ok_or_else(|| HarError::InvalidParameter(format!("unknown feature '{id}'")))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(Self {
            feature_ids: ids.to_vec(),
            rows: self.rows.clone(),
            values: self.values.select(NdAxis(1), &idx),
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "user,day,activity,start_index")?;
        for id in &self.feature_ids {
            write!(w, ",{id}")?;
        }
        writeln!(w)?;
        for (meta, row) in self.rows.iter().zip(self.values.rows()) {
            write!(
                w,
                "{},{},{},{}",
                meta.user_id,
                meta.day,
                meta.label.code(),
                meta.start_index
            )?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| HarError::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w).map_err(|e| HarError::io(path, e))?;
        w.flush().map_err(|e| HarError::io(path, e))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| HarError::MalformedHeader(e.to_string()))?
            .clone();
        let fixed = ["user", "day", "activity", "start_index"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(h, f)| h != f) {
            return Err(HarError::MalformedHeader(
                "expected user,day,activity,start_index,<features...>".into(),
            ));
        }
        let feature_ids: Vec<String> = header.iter().skip(4).map(String::from).collect();
        let p = feature_ids.len();
        let mut rows = Vec::new();
        let mut data = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| HarError::Parse(e.to_string()))?;
            let bad = |what: &str| HarError::Parse(format!("row {}: bad {what}", line + 1));
            let label_code: usize = rec[2].parse().map_err(|_| bad("activity"))?;
            rows.push(RowMeta {
                user_id: rec[0].to_string(),
                day: rec[1].parse().map_err(|_| bad("day"))?,
                label: ActivityLabel::from_code(label_code).ok_or_else(|| bad("activity"))?,
                start_index: rec[3].parse().map_err(|_| bad("start_index"))?,
            });
            for field in rec.iter().skip(4) {
                let v: f64 = field.parse().map_err(|_| bad("value"))?;
                if !v.is_finite() {
                    return Err(bad("value (non-finite)"));
                }
                data.push(v);
            }
            if data.len() != rows.len() * p {
                return Err(bad("column count"));
            }
        }
        let values = Array2::from_shape_vec((rows.len(), p), data)
            .map_err(|e| HarError::Parse(e.to_string()))?;
        Ok(Self {
            feature_ids,
            rows,
            values,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| HarError::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Extract all windows in parallel. Output rows follow input order, so the
/// result does not depend on the number of workers.
pub fn extract_all(windows: &[Window], manifest: &FeatureManifest) -> Result<FeatureMatrix> {
    let vectors = windows
        .par_iter()
        .map(|w| extract_window(w, manifest))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_vectors(manifest.ids().to_vec(), vectors)
}
