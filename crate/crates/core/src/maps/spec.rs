//! JSON ingestion of interval maps.
//!
//! ```json
//! {"preset": "doubling"}
//! {"preset": "times", "k": 3}
//! {"branches": [{"lo": 0, "hi": "1/2", "a": 2, "b": 0},
//!               {"lo": "1/2", "hi": 1, "a": 2, "b": -1}],
//!  "markov": true}
//! ```

use serde::{Deserialize, Serialize};

use super::{Branch, IntervalMap};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapPreset {
    Doubling,
    Tent,
    Times,
    SkewMarkov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub lo: Real,
    pub hi: Real,
    pub a: Real,
    pub b: Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<MapPreset>,
    /// Multiplier for the `times` preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub branches: Vec<BranchSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marked: Vec<Real>,
    /// Declares the map Markov; exact Markov assembly is then mandatory.
    #[serde(default)]
    pub markov: bool,
}

impl MapSpec {
    pub fn preset(preset: MapPreset) -> Self {
        Self {
            preset: Some(preset),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("map spec: {e}")))
    }

    pub fn build(&self) -> Result<IntervalMap> {
        let marked = self.marked.iter().map(|r| r.0.clone()).collect();
        match (self.preset, self.branches.is_empty()) {
            (Some(_), false) => Err(Error::invalid("give either a preset or branches, not both")),
            (None, true) => Err(Error::invalid("map spec needs a preset or branches")),
            (Some(p), true) => {
                let base = match p {
                    MapPreset::Doubling => IntervalMap::doubling(),
                    MapPreset::Tent => IntervalMap::tent(),
                    MapPreset::SkewMarkov => IntervalMap::skew_markov(),
                    MapPreset::Times => match self.k {
                        Some(k) if (2..=1024).contains(&k) => IntervalMap::times(k as i64),
                        _ => return Err(Error::invalid("preset `times` needs 2 <= k <= 1024")),
                    },
                };
                if self.k.is_some() && p != MapPreset::Times {
                    return Err(Error::invalid("`k` only applies to the `times` preset"));
                }
                IntervalMap::new(base.branches, marked)
            }
            (None, false) => {
                let branches = self
                    .branches
                    .iter()
                    .map(|b| Branch::affine(b.lo.0.clone(), b.hi.0.clone(), b.a.0.clone(), b.b.0.clone()))
                    .collect::<Result<Vec<_>>>()?;
                IntervalMap::new(branches, marked)
            }
        }
    }
}

/// Parses and validates a map spec in one step. Never panics.
pub fn parse_map(text: &str) -> Result<IntervalMap> {
    MapSpec::from_json(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::rat;

    #[test]
    fn presets_and_branches() {
        let m = parse_map(r#"{"preset": "doubling"}"#).unwrap();
        assert_eq!(m, IntervalMap::doubling());
        let m = parse_map(r#"{"preset": "times", "k": 3}"#).unwrap();
        assert_eq!(m.branches().len(), 3);
        let m = parse_map(
            r#"{"branches": [{"lo": 0, "hi": "2/3", "a": "3/2", "b": 0},
                             {"lo": "2/3", "hi": 1, "a": 2, "b": "-4/3"}], "markov": true}"#,
        )
        .unwrap();
        assert_eq!(m, IntervalMap::skew_markov());
        assert_eq!(m.singular_set(), &[rat(0, 1), rat(2, 3), rat(1, 1)]);
    }

    #[test]
    fn errors_carry_line_info() {
        let err = parse_map("{\n  \"preset\": \"doubling\",\n  oops\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(parse_map(r#"{"preset": "times"}"#).is_err());
        assert!(parse_map(r#"{"preset": "tent", "k": 2}"#).is_err());
        assert!(parse_map(r#"{}"#).is_err());
        assert!(parse_map(r#"{"preset": "doubling", "extra": 1}"#).is_err());
    }
}
