//! Activity merge scenarios.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};
use crate::ingest::ActivityLabel;

/// A relabelling of activities; labels absent from `merge` map to themselves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub merge: BTreeMap<ActivityLabel, ActivityLabel>,
}

impl ScenarioSpec {
    pub fn new(name: &str, pairs: &[(ActivityLabel, ActivityLabel)]) -> Result<Self> {
        let spec = ScenarioSpec {
            name: name.to_string(),
            merge: pairs.iter().copied().collect(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Every activity kept separate.
    pub fn identity() -> Self {
        ScenarioSpec {
            name: "none".into(),
            merge: BTreeMap::new(),
        }
    }

    /// WithBag merged into Normal.
    pub fn bag_into_normal() -> Self {
        Self::new("bag_normal", &[(ActivityLabel::WithBag, ActivityLabel::Normal)]).expect("valid preset")
    }

    /// Fast and WithBag merged into Normal.
    pub fn fast_bag_into_normal() -> Self {
        Self::new(
            "fast_bag_normal",
            &[
                (ActivityLabel::Fast, ActivityLabel::Normal),
                (ActivityLabel::WithBag, ActivityLabel::Normal),
            ],
        )
        .expect("valid preset")
    }

    /// The three standard scenarios, most merged first.
    pub fn presets() -> Vec<Self> {
        vec![Self::bag_into_normal(), Self::fast_bag_into_normal(), Self::identity()]
    }

    /// Merge targets must not themselves be merged away.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(HarError::InvalidParameter("scenario name is empty".into()));
        }
        for (from, to) in &self.merge {
            if from != to && self.merge.get(to).is_some_and(|t| t != to) {
                return Err(HarError::InvalidParameter(format!(
                    "scenario '{}': merge target {to} is itself merged into {}",
                    self.name, self.merge[to]
                )));
            }
        }
        Ok(())
    }

    pub fn map(&self, label: ActivityLabel) -> ActivityLabel {
        self.merge.get(&label).copied().unwrap_or(label)
    }

    /// Activities remaining after merging, by code.
    pub fn classes(&self) -> Vec<ActivityLabel> {
        let mut out: Vec<ActivityLabel> = ActivityLabel::ALL.iter().map(|&l| self.map(l)).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Display name of a merged class, e.g. `Normal+Fast+WithBag`.
    pub fn class_name(&self, target: ActivityLabel) -> String {
        let mut parts = vec![target.to_string()];
        parts.extend(
            ActivityLabel::ALL
                .iter()
                .filter(|&&l| l != target && self.map(l) == target)
                .map(|l| l.to_string()),
        );
        parts.join("+")
    }
}

impl fmt::Display for ScenarioSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for ScenarioSpec {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" | "all" | "identity" => Ok(Self::identity()),
            "bag_normal" | "bag" => Ok(Self::bag_into_normal()),
            "fast_bag_normal" | "fast_bag" => Ok(Self::fast_bag_into_normal()),
            other => Err(HarError::InvalidParameter(format!(
                "unknown scenario '{other}' (expected none, bag_normal or fast_bag_normal)"
            ))),
        }
    }
}

/// Replace every label by its merge image.
pub fn apply_scenario(labels: &[ActivityLabel], scenario: &ScenarioSpec) -> Vec<ActivityLabel> {
    labels.iter().map(|&l| scenario.map(l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActivityLabel::*;

    #[test]
    fn presets() {
        assert_eq!(ScenarioSpec::identity().classes().len(), 6);
        assert_eq!(ScenarioSpec::bag_into_normal().classes().len(), 5);
        let s = ScenarioSpec::fast_bag_into_normal();
        assert_eq!(s.classes(), vec![Normal, Downstairs, Upstairs, Sitting]);
        assert_eq!(s.class_name(Normal), "Normal+Fast+WithBag");
        assert_eq!(s.class_name(Sitting), "Sitting");
        assert_eq!(apply_scenario(&[Fast, WithBag, Upstairs], &s), vec![Normal, Normal, Upstairs]);
        assert_eq!(apply_scenario(&ActivityLabel::ALL, &ScenarioSpec::identity()), ActivityLabel::ALL.to_vec());
    }

    #[test]
    fn map_is_idempotent() {
        for s in ScenarioSpec::presets() {
            for l in ActivityLabel::ALL {
                assert_eq!(s.map(s.map(l)), s.map(l));
            }
        }
    }

    #[test]
    fn rejects_chains() {
        assert!(ScenarioSpec::new("x", &[(Fast, Normal), (Normal, Sitting)]).is_err());
        assert!(ScenarioSpec::new("x", &[(Fast, Fast)]).is_ok());
        assert!(ScenarioSpec::new(" ", &[]).is_err());
    }

    #[test]
    fn parse_and_serde() {
        assert_eq!("fast-bag-normal".parse::<ScenarioSpec>().unwrap(), ScenarioSpec::fast_bag_into_normal());
        assert!("other".parse::<ScenarioSpec>().is_err());
        let json = serde_json::to_string(&ScenarioSpec::bag_into_normal()).unwrap();
        assert_eq!(json, r#"{"name":"bag_normal","merge":{"WithBag":"Normal"}}"#);
        let back: ScenarioSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ScenarioSpec::bag_into_normal());
    }
}
