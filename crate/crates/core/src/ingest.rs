//! Sensor recording ingestion.
//!
//! Recordings arrive as CSV files with one row per sample: a millisecond
//! timestamp, three accelerometer channels (m/s²) and three gyroscope
//! channels (rad/s). Exports from other tools are adapted through a
//! [`ColumnMap`]; the canonical layout is
//! `t_ms,acc_x,acc_y,acc_z,gyr_x,gyr_y,gyr_z`.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};

pub const CANONICAL_HEADER: [&str; 7] = [
    "t_ms", "acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z",
];

/// The six recorded activities. Integer codes are stable and used in every
/// serialized artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityLabel {
    Normal = 0,
    Fast = 1,
    WithBag = 2,
    Downstairs = 3,
    Upstairs = 4,
    Sitting = 5,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 6] = [
        ActivityLabel::Normal,
        ActivityLabel::Fast,
        ActivityLabel::WithBag,
        ActivityLabel::Downstairs,
        ActivityLabel::Upstairs,
        ActivityLabel::Sitting,
    ];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    /// File-name friendly identifier.
    pub fn slug(self) -> &'static str {
        match self {
            ActivityLabel::Normal => "normal",
            ActivityLabel::Fast => "fast",
            ActivityLabel::WithBag => "with_bag",
            ActivityLabel::Downstairs => "downstairs",
            ActivityLabel::Upstairs => "upstairs",
            ActivityLabel::Sitting => "sitting",
        }
    }

    pub fn is_walking(self) -> bool {
        self != ActivityLabel::Sitting
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ActivityLabel::Normal => "Normal",
            ActivityLabel::Fast => "Fast",
            ActivityLabel::WithBag => "WithBag",
            ActivityLabel::Downstairs => "Downstairs",
            ActivityLabel::Upstairs => "Upstairs",
            ActivityLabel::Sitting => "Sitting",
        };
        f.write_str(s)
    }
}

impl FromStr for ActivityLabel {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        if let Ok(code) = norm.parse::<usize>() {
            return Self::from_code(code)
                .ok_or_else(|| HarError::Parse(format!("unknown activity code {code}")));
        }
        match norm.as_str() {
            "normal" | "normalwalk" | "walk" => Ok(ActivityLabel::Normal),
            "fast" | "fastwalk" => Ok(ActivityLabel::Fast),
            "withbag" | "wbag" | "bag" => Ok(ActivityLabel::WithBag),
            "downstairs" => Ok(ActivityLabel::Downstairs),
            "upstairs" => Ok(ActivityLabel::Upstairs),
            "sitting" | "sit" => Ok(ActivityLabel::Sitting),
            _ => Err(HarError::Parse(format!("unknown activity '{s}'"))),
        }
    }
}

/// One sample: timestamp in ms since session start plus six channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub t_ms: u64,
    pub acc: [f64; 3],
    pub gyro: [f64; 3],
}

impl RawRecord {
    fn is_finite(&self) -> bool {
        self.acc.iter().chain(self.gyro.iter()).all(|v| v.is_finite())
    }
}

/// Who recorded a session, on which collection day, doing what.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SessionMeta {
    pub user_id: String,
    pub day: u8,
    pub label: ActivityLabel,
}

impl SessionMeta {
    pub fn new(user_id: impl Into<String>, day: u8, label: ActivityLabel) -> Self {
        Self {
            user_id: user_id.into(),
            day,
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSeries {
    pub meta: SessionMeta,
    pub samples: Vec<RawRecord>,
    pub nominal_rate_hz: f64,
}

impl SensorSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Split into separate accelerometer and gyroscope tracks.
    pub fn split_tracks(&self) -> (TriaxialTrack, TriaxialTrack) {
        let t: Vec<u64> = self.samples.iter().map(|s| s.t_ms).collect();
        let acc = TriaxialTrack {
            t_ms: t.clone(),
            values: self.samples.iter().map(|s| s.acc).collect(),
        };
        let gyro = TriaxialTrack {
            t_ms: t,
            values: self.samples.iter().map(|s| s.gyro).collect(),
        };
        (acc, gyro)
    }
}

/// Positions of the seven used columns within a source CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub t_ms: usize,
    pub acc: [usize; 3],
    pub gyro: [usize; 3],
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self::canonical()
    }
}

impl ColumnMap {
    pub fn canonical() -> Self {
        Self {
            t_ms: 0,
            acc: [1, 2, 3],
            gyro: [4, 5, 6],
        }
    }

    /// Resolve a map by looking up column names (timestamp, acc x/y/z,
    /// gyro x/y/z) in a header row.
    pub fn from_names(header: &[&str], names: [&str; 7]) -> Result<Self> {
        let find = |name: &str| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| HarError::MalformedHeader(format!("column '{name}' not found")))
        };
        let map = Self {
            t_ms: find(names[0])?,
            acc: [find(names[1])?, find(names[2])?, find(names[3])?],
            gyro: [find(names[4])?, find(names[5])?, find(names[6])?],
        };
        map.validate(header.len())?;
        Ok(map)
    }

    fn indices(&self) -> [usize; 7] {
        [
            self.t_ms,
            self.acc[0],
            self.acc[1],
            self.acc[2],
            self.gyro[0],
            self.gyro[1],
            self.gyro[2],
        ]
    }

    pub fn validate(&self, header_width: usize) -> Result<()> {
        let idx = self.indices();
        for (i, a) in idx.iter().enumerate() {
            if *a >= header_width {
                return Err(HarError::InvalidColumnMap(format!(
                    "index {a} outside header width {header_width}"
                )));
            }
            if idx[..i].contains(a) {
                return Err(HarError::InvalidColumnMap(format!("index {a} used twice")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Fraction of data rows that may be dropped before the file is rejected.
    pub max_drop_fraction: f64,
    /// Accepted band for the estimated sampling rate, in Hz.
    pub rate_band: (f64, f64),
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            max_drop_fraction: 0.10,
            rate_band: (24.0, 40.0),
        }
    }
}

/// A parsed recording and the number of rows that were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecording {
    pub series: SensorSeries,
    pub dropped: usize,
}

pub fn parse_sensor_csv(
    path: &Path,
    map: &ColumnMap,
    meta: SessionMeta,
    cfg: &IngestConfig,
) -> Result<ParsedRecording> {
    let file = File::open(path).map_err(|e| HarError::io(path, e))?;
    parse_sensor_reader(file, map, meta, cfg)
}

/// Parse a file in the canonical layout, locating columns by header name.
pub fn parse_canonical_csv(
    path: &Path,
    meta: SessionMeta,
    cfg: &IngestConfig,
) -> Result<ParsedRecording> {
    let file = File::open(path).map_err(|e| HarError::io(path, e))?;
    parse_reader_by_names(file, CANONICAL_HEADER, meta, cfg)
}

pub fn parse_reader_by_names<R: Read>(
    reader: R,
    names: [&str; 7],
    meta: SessionMeta,
    cfg: &IngestConfig,
) -> Result<ParsedRecording> {
    let mut rdr = csv_reader(reader);
    let header = read_header(&mut rdr)?;
    let fields: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let map = ColumnMap::from_names(&fields, names)?;
    parse_rows(rdr, &map, meta, cfg)
}

pub fn parse_sensor_reader<R: Read>(
    reader: R,
    map: &ColumnMap,
    meta: SessionMeta,
    cfg: &IngestConfig,
) -> Result<ParsedRecording> {
    let mut rdr = csv_reader(reader);
    let header = read_header(&mut rdr)?;
    map.validate(header.len())?;
    parse_rows(rdr, map, meta, cfg)
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader)
}

fn read_header<R: Read>(rdr: &mut csv::Reader<R>) -> Result<Vec<String>> {
    let header = rdr
        .byte_headers()
        .map_err(|e| HarError::MalformedHeader(e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(|f| f.is_empty()) {
        return Err(HarError::MalformedHeader("missing header row".into()));
    }
    header
        .iter()
        .map(|f| {
            std::str::from_utf8(f)
                .map(|s| s.trim().to_string())
                .map_err(|_| HarError::MalformedHeader("header is not UTF-8".into()))
        })
        .collect()
}

fn parse_field<T: FromStr>(record: &csv::ByteRecord, idx: usize) -> Option<T> {
    let raw = record.get(idx)?;
    std::str::from_utf8(raw).ok()?.trim().parse().ok()
}

fn parse_timestamp(record: &csv::ByteRecord, idx: usize) -> Option<u64> {
    if let Some(t) = parse_field::<u64>(record, idx) {
        return Some(t);
    }
    let t: f64 = parse_field(record, idx)?;
    (t.is_finite() && t >= 0.0 && t.fract() == 0.0 && t < 9.0e15).then_some(t as u64)
}

fn parse_record(record: &csv::ByteRecord, map: &ColumnMap) -> Option<RawRecord> {
    let t_ms = parse_timestamp(record, map.t_ms)?;
    let mut acc = [0.0; 3];
    let mut gyro = [0.0; 3];
    for k in 0..3 {
        acc[k] = parse_field(record, map.acc[k])?;
        gyro[k] = parse_field(record, map.gyro[k])?;
    }
    Some(RawRecord { t_ms, acc, gyro })
}

fn parse_rows<R: Read>(
    mut rdr: csv::Reader<R>,
    map: &ColumnMap,
    meta: SessionMeta,
    cfg: &IngestConfig,
) -> Result<ParsedRecording> {
    let mut samples: Vec<RawRecord> = Vec::new();
    let mut dropped = 0usize;
    let mut record = csv::ByteRecord::new();
    loop {
        match rdr.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => match e.kind() {
                csv::ErrorKind::Io(_) => return Err(HarError::Parse(e.to_string())),
                _ => {
                    dropped += 1;
                    continue;
                }
            },
        }
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed = parse_record(&record, map).filter(|r| r.is_finite());
        match parsed {
            Some(r) if samples.last().map_or(true, |last| r.t_ms > last.t_ms) => samples.push(r),
            _ => dropped += 1,
        }
    }
    let total = samples.len() + dropped;
    let corrupt = |reason: &str| HarError::CorruptRecording {
        kept: samples.len(),
        dropped,
        reason: reason.to_string(),
    };
    if samples.is_empty() {
        return Err(corrupt("no valid samples"));
    }
    if dropped as f64 > cfg.max_drop_fraction * total as f64 {
        return Err(corrupt("too many invalid rows"));
    }
    if samples.len() < 2 {
        return Err(corrupt("fewer than 2 samples"));
    }
    let mut series = SensorSeries {
        meta,
        samples,
        nominal_rate_hz: 0.0,
    };
    let rate = estimate_rate(&mut series)?;
    let (low, high) = cfg.rate_band;
    if !(low..=high).contains(&rate) {
        return Err(HarError::RateOutOfBand { rate, low, high });
    }
    Ok(ParsedRecording { series, dropped })
}

/// Mean sampling rate `(n - 1) / duration`; stored into `nominal_rate_hz`.
pub fn estimate_rate(series: &mut SensorSeries) -> Result<f64> {
    let n = series.samples.len();
    if n < 2 {
        return Err(HarError::TooFewSamples { needed: 2, got: n });
    }
    let span_ms = series.samples[n - 1].t_ms - series.samples[0].t_ms;
    if span_ms == 0 {
        return Err(HarError::InvalidParameter("zero-length recording".into()));
    }
    let rate = (n - 1) as f64 / (span_ms as f64 / 1000.0);
    series.nominal_rate_hz = rate;
    Ok(rate)
}

/// Timestamped tri-axial samples from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TriaxialTrack {
    pub t_ms: Vec<u64>,
    pub values: Vec<[f64; 3]>,
}

/// Interpolate the gyroscope track onto the accelerometer timestamps that
/// fall inside the overlap of both tracks. Both tracks must have strictly
/// increasing timestamps.
pub fn align_tracks(acc: &TriaxialTrack, gyro: &TriaxialTrack) -> Result<Vec<RawRecord>> {
    if acc.t_ms.is_empty() || gyro.t_ms.is_empty() {
        return Err(HarError::EmptyInput("sensor track".into()));
    }
    if acc.t_ms.len() != acc.values.len() || gyro.t_ms.len() != gyro.values.len() {
        return Err(HarError::ShapeMismatch {
            expected: acc.t_ms.len(),
            got: acc.values.len(),
        });
    }
    let start = acc.t_ms[0].max(gyro.t_ms[0]);
    let end = (*acc.t_ms.last().unwrap()).min(*gyro.t_ms.last().unwrap());
    if start > end {
        return Err(HarError::NoOverlap);
    }

    let mut out = Vec::new();
    let mut j = 0usize;
    for (&t, a) in acc.t_ms.iter().zip(&acc.values) {
        if t < start || t > end {
            continue;
        }
        while j + 1 < gyro.t_ms.len() && gyro.t_ms[j + 1] <= t {
            j += 1;
        }
        let g = if gyro.t_ms[j] == t || j + 1 == gyro.t_ms.len() {
            gyro.values[j]
        } else {
            let (t0, t1) = (gyro.t_ms[j] as f64, gyro.t_ms[j + 1] as f64);
            let w = (t as f64 - t0) / (t1 - t0);
            let (g0, g1) = (gyro.values[j], gyro.values[j + 1]);
            [
                g0[0] + (g1[0] - g0[0]) * w,
                g0[1] + (g1[1] - g0[1]) * w,
                g0[2] + (g1[2] - g0[2]) * w,
            ]
        };
        out.push(RawRecord {
            t_ms: t,
            acc: *a,
            gyro: g,
        });
    }
    if out.is_empty() {
        return Err(HarError::NoOverlap);
    }
    Ok(out)
}

/// Write samples in the canonical layout. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_canonical_csv<W: Write>(samples: &[RawRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", CANONICAL_HEADER.join(","))?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.t_ms, s.acc[0], s.acc[1], s.acc[2], s.gyro[0], s.gyro[1], s.gyro[2]
        )?;
    }
    Ok(())
}

/// File name of the sidecar session manifest kept next to a dataset.
pub const SESSION_MANIFEST: &str = "sessions.csv";

const SESSION_HEADER: [&str; 4] = ["path", "user_id", "day", "activity"];

/// A recording file and the session it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SessionEntry {
    pub path: PathBuf,
    pub meta: SessionMeta,
}

/// Write a session manifest. Paths are written as given, with `/` separators.
pub fn write_session_manifest<W: Write>(entries: &[SessionEntry], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let to_parse = |e: csv::Error| HarError::Parse(e.to_string());
    out.write_record(SESSION_HEADER).map_err(to_parse)?;
    for e in entries {
        let path: Vec<String> = e.path.components().map(|c| c.as_os_str().to_string_lossy().into_owned()).collect();
        out.write_record([
            path.join("/"),
            e.meta.user_id.clone(),
            e.meta.day.to_string(),
            e.meta.label.to_string(),
        ])
        .map_err(to_parse)?;
    }
    out.flush().map_err(|e| HarError::Parse(e.to_string()))
}

/// Read a session manifest; relative paths are resolved against `base`.
pub fn read_session_manifest<R: Read>(reader: R, base: &Path) -> Result<Vec<SessionEntry>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = read_header(&mut rdr)?;
    if header != SESSION_HEADER {
        return Err(HarError::MalformedHeader(format!(
            "session manifest header must be {}, got {}",
            SESSION_HEADER.join(","),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| HarError::Parse(format!("session manifest row {}: {e}", i + 1)))?;
        let field = |k: usize| record.get(k).unwrap_or("").trim();
        let day = field(2)
            .parse::<u8>()
            .map_err(|_| HarError::Parse(format!("session manifest row {}: bad day '{}'", i + 1, field(2))))?;
        out.push(SessionEntry {
            path: base.join(field(0)),
            meta: SessionMeta::new(field(1), day, field(3).parse()?),
        });
    }
    Ok(out)
}

/// Load a session manifest file, resolving paths against its directory.
pub fn load_session_manifest(path: &Path) -> Result<Vec<SessionEntry>> {
    let file = File::open(path).map_err(|e| HarError::io(path, e))?;
    read_session_manifest(file, path.parent().unwrap_or(Path::new("")))
}
