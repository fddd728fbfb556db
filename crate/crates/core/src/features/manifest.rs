//! Feature descriptors and the versioned manifest that orders them.
//!
//! A descriptor id has the form `sensor.domain.statistic.axis`, e.g.
//! `gyro.time.kurtosis.y`, `acc.freq.correlation.xz` or
//! `acc.time.binned.z_bin7`. The manifest file lists one id per line;
//! everything after `#` is a comment.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::stats::{Statistic, HIST_BINS};
use crate::error::{HarError, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// The manifest shipped with the crate.
pub const DEFAULT_MANIFEST: &str = include_str!("../../manifests/default_v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sensor {
    Acc,
    Gyro,
}

impl Sensor {
    pub fn name(self) -> &'static str {
        match self {
            Sensor::Acc => "acc",
            Sensor::Gyro => "gyro",
        }
    }

    /// Index of the sensor's x channel within a window.
    pub fn channel_offset(self) -> usize {
        match self {
            Sensor::Acc => 0,
            Sensor::Gyro => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Time,
    Freq,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Time => "time",
            Domain::Freq => "freq",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
    XY,
    YZ,
    XZ,
    Resultant,
    /// Bin `k` of the binned distribution of a single axis (0 = x, 1 = y, 2 = z).
    Bin { axis: u8, k: u8 },
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

impl Axis {
    pub const SINGLE: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
    pub const PAIRS: [Axis; 3] = [Axis::XY, Axis::YZ, Axis::XZ];

    /// Axis indices (0 = x, 1 = y, 2 = z) consumed by this axis selector.
    pub fn components(self) -> Vec<usize> {
        match self {
            Axis::X => vec![0],
            Axis::Y => vec![1],
            Axis::Z => vec![2],
            Axis::XY => vec![0, 1],
            Axis::YZ => vec![1, 2],
            Axis::XZ => vec![0, 2],
            Axis::Resultant => vec![0, 1, 2],
            Axis::Bin { axis, .. } => vec![axis as usize],
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
            Axis::Z => f.write_str("z"),
            Axis::XY => f.write_str("xy"),
            Axis::YZ => f.write_str("yz"),
            Axis::XZ => f.write_str("xz"),
            Axis::Resultant => f.write_str("resultant"),
            Axis::Bin { axis, k } => write!(f, "{}_bin{}", AXIS_NAMES[*axis as usize], k),
        }
    }
}

impl FromStr for Axis {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        let axis = match s {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            "xy" => Axis::XY,
            "yz" => Axis::YZ,
            "xz" => Axis::XZ,
            "resultant" => Axis::Resultant,
            other => {
                let bad = || HarError::InvalidManifest(format!("unknown axis '{other}'"));
                let (a, k) = other.split_once("_bin").ok_or_else(bad)?;
                let axis = AXIS_NAMES.iter().position(|n| *n == a).ok_or_else(bad)? as u8;
                let k: u8 = k.parse().map_err(|_| bad())?;
                Axis::Bin { axis, k }
            }
        };
        Ok(axis)
    }
}

/// One entry of the feature catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub sensor: Sensor,
    pub domain: Domain,
    pub statistic: Statistic,
    pub axis: Axis,
}

impl FeatureDescriptor {
    pub fn new(sensor: Sensor, domain: Domain, statistic: Statistic, axis: Axis) -> Self {
        Self {
            sensor,
            domain,
            statistic,
            axis,
        }
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    /// Check that the statistic may be computed in this domain on this axis.
    pub fn validate(&self) -> Result<()> {
        if is_legal(self.statistic, self.domain, self.axis) {
            Ok(())
        } else {
            Err(HarError::InvalidManifest(format!(
                "illegal feature '{self}': {} on axis {} in the {} domain",
                self.statistic.name(),
                self.axis,
                self.domain.name()
            )))
        }
    }
}

fn is_legal(stat: Statistic, domain: Domain, axis: Axis) -> bool {
    use Statistic::*;
    let single = matches!(axis, Axis::X | Axis::Y | Axis::Z);
    let pair = matches!(axis, Axis::XY | Axis::YZ | Axis::XZ);
    match stat {
        Mean | StdDev | Median | Variance | ZeroCrossingRate | Iqr | AvgAbsDiff | Difference
        | Rms | Skewness | Kurtosis | P25 | P50 | P75 => single,
        Max | Min => single || (domain == Domain::Time && axis == Axis::Resultant),
        Covariance | Correlation => pair,
        AvgResultant => axis == Axis::Resultant,
        Binned => {
            domain == Domain::Time
                && matches!(axis, Axis::Bin { axis, k } if axis < 3 && (k as usize) < HIST_BINS)
        }
        MaxPeak | MinPeak | PeakCount | PeakInterval => domain == Domain::Time && single,
        Entropy | Energy => domain == Domain::Freq && single,
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}.{}.{}",
            self.sensor.name(),
            self.domain.name(),
            self.statistic.name(),
            self.axis
        )
    }
}

impl FromStr for FeatureDescriptor {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('.').collect();
        if parts.len() != 4 {
            return Err(HarError::InvalidManifest(format!("malformed feature id '{s}'")));
        }
        let sensor = match parts[0] {
            "acc" => Sensor::Acc,
            "gyro" => Sensor::Gyro,
            other => return Err(HarError::InvalidManifest(format!("unknown sensor '{other}'"))),
        };
        let domain = match parts[1] {
            "time" => Domain::Time,
            "freq" => Domain::Freq,
            other => return Err(HarError::InvalidManifest(format!("unknown domain '{other}'"))),
        };
        let statistic = Statistic::from_name(parts[2])
            .ok_or_else(|| HarError::InvalidManifest(format!("unknown statistic '{}'", parts[2])))?;
        let axis: Axis = parts[3].parse()?;
        let d = FeatureDescriptor::new(sensor, domain, statistic, axis);
        d.validate()?;
        Ok(d)
    }
}

/// Ordered feature catalogue. The order is the column order of every
/// feature matrix built from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureManifest {
    descriptors: Vec<FeatureDescriptor>,
    ids: Vec<String>,
    hash: String,
}

impl FeatureManifest {
    pub fn new(descriptors: Vec<FeatureDescriptor>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for d in &descriptors {
            d.validate()?;
            if !seen.insert(*d) {
                return Err(HarError::InvalidManifest(format!("duplicate feature id '{d}'")));
            }
        }
        let ids: Vec<String> = descriptors.iter().map(|d| d.id()).collect();
        let mut hasher = Sha256::new();
        for id in &ids {
            hasher.update(id.as_bytes());
            hasher.update(b"\n");
        }
        let hash = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Self {
            descriptors,
            ids,
            hash,
        })
    }

    /// Every category of the published catalogue, read literally. Names
    /// listed in more than one category (difference, maximum, minimum,
    /// interquartile range) are emitted once per sensor/domain/axis.
    pub fn catalogue() -> Self {
        use Statistic::*;
        let per_axis = [
            Mean, StdDev, Median, Variance, ZeroCrossingRate, Iqr, AvgAbsDiff, Difference, Rms,
            Skewness, Kurtosis, P25, P50, P75, Max, Min,
        ];
        let mut out = Vec::new();
        for sensor in [Sensor::Acc, Sensor::Gyro] {
            for domain in [Domain::Time, Domain::Freq] {
                let mut push = |stat, axis| out.push(FeatureDescriptor::new(sensor, domain, stat, axis));
                for stat in per_axis {
                    for axis in Axis::SINGLE {
                        push(stat, axis);
                    }
                    if domain == Domain::Time && matches!(stat, Max | Min) {
                        push(stat, Axis::Resultant);
                    }
                }
                for stat in [Covariance, Correlation] {
                    for axis in Axis::PAIRS {
                        push(stat, axis);
                    }
                }
                push(AvgResultant, Axis::Resultant);
                match domain {
                    Domain::Time => {
                        for axis in 0..3u8 {
                            for k in 0..HIST_BINS as u8 {
                                push(Binned, Axis::Bin { axis, k });
                            }
                        }
                        for stat in [MaxPeak, MinPeak, PeakCount, PeakInterval] {
                            for axis in Axis::SINGLE {
                                push(stat, axis);
                            }
                        }
                    }
                    Domain::Freq => {
                        for stat in [Entropy, Energy] {
                            for axis in Axis::SINGLE {
                                push(stat, axis);
                            }
                        }
                    }
                }
            }
        }
        Self::new(out).expect("catalogue is valid")
    }

    /// The manifest shipped with the crate.
    pub fn default_manifest() -> Self {
        Self::parse(DEFAULT_MANIFEST).expect("shipped manifest parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let descriptors = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<FeatureDescriptor>>>()?;
        if descriptors.is_empty() {
            return Err(HarError::InvalidManifest("manifest lists no features".into()));
        }
        Self::new(descriptors)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# feature manifest v{MANIFEST_VERSION}\n# {} features, sha256 {}\n",
            self.len(),
            self.hash
        );
        for id in &self.ids {
            s.push_str(id);
            s.push('\n');
        }
        s
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn content_hash(&self) -> &str {
        &self.hash
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_manifest_matches_catalogue() {
        let shipped = FeatureManifest::default_manifest();
        let cat = FeatureManifest::catalogue();
        assert_eq!(shipped, cat);
        assert_eq!(DEFAULT_MANIFEST, cat.to_text());
    }

    /// Rewrites the shipped manifest from the catalogue.
    #[test]
    #[ignore]
    fn regenerate_default_manifest() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/manifests/default_v1.txt");
        std::fs::write(path, FeatureManifest::catalogue().to_text()).unwrap();
    }

    #[test]
    fn catalogue_size_per_sensor() {
        let cat = FeatureManifest::catalogue();
        // time: 16 per-axis stats x3 + max/min resultant + 6 pair + 1 resultant
        //       + 30 bins + 4 peak stats x3 = 99
        // freq: 16 x3 + 6 pair + 1 resultant + entropy/energy x3 = 61
        assert_eq!(cat.len(), 2 * (99 + 61));
        let n_time = cat.descriptors().iter().filter(|d| d.domain == Domain::Time).count();
        assert_eq!(n_time, 2 * 99);
    }

    #[test]
    fn ids_round_trip() {
        for d in FeatureManifest::catalogue().descriptors() {
            assert_eq!(d.id().parse::<FeatureDescriptor>().unwrap(), *d);
        }
    }

    #[test]
    fn illegal_combinations_rejected() {
        for bad in [
            "acc.time.entropy.x",
            "gyro.freq.binned.x_bin0",
            "acc.freq.peak_count.y",
            "acc.time.covariance.x",
            "acc.time.mean.xy",
            "acc.freq.max.resultant",
            "acc.time.binned.x_bin10",
            "acc.time.mean",
            "mag.time.mean.x",
        ] {
            assert!(bad.parse::<FeatureDescriptor>().is_err(), "{bad}");
        }
    }

    #[test]
    fn parse_handles_comments_and_duplicates() {
        let m = FeatureManifest::parse("# header\nacc.time.mean.x # trailing\n\n gyro.freq.energy.z\n")
            .unwrap();
        assert_eq!(m.ids(), &["acc.time.mean.x", "gyro.freq.energy.z"]);
        assert!(FeatureManifest::parse("acc.time.mean.x\nacc.time.mean.x\n").is_err());
        assert!(FeatureManifest::parse("# nothing\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = FeatureManifest::parse("acc.time.mean.x\nacc.time.mean.y\n").unwrap();
        let b = FeatureManifest::parse("acc.time.mean.y\nacc.time.mean.x\n").unwrap();
        let c = FeatureManifest::parse("# different comment\nacc.time.mean.x\nacc.time.mean.y\n").unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), c.content_hash());
    }
}
