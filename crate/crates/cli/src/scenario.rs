use anyhow::{bail, Context, Result};
use mixkit::distributions::DistributionSpec;
use mixkit::mixability::{MixProblem, PhiSpec};
use serde::{Deserialize, Serialize};

pub const SCENARIO_VERSION: u32 = 1;
pub const SCHEMA: &str = include_str!("../schema/scenario.schema.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub marginals: Vec<DistributionSpec>,
    pub phi: PhiSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub options: Options,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Rearrangement grid size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trim: Option<f64>,
    /// Number of draws for sampling and verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Grid sizes for the rearrangement probe in `report`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ra_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("schema violation at field `{path}`: {}", e.into_inner())
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {path}"))?;
        Self::parse(&text).with_context(|| format!("in scenario {path}"))
    }

    fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            bail!(
                "schema violation at field `version`: unsupported version {}, expected {SCENARIO_VERSION}",
                self.version
            );
        }
        if self.marginals.len() != self.phi.alphas.len() {
            bail!(
                "schema violation at field `phi.alphas`: {} weights for {} marginals",
                self.phi.alphas.len(),
                self.marginals.len()
            );
        }
        if let Some(t) = self.options.trim {
            if !(0.0..0.5).contains(&t) {
                bail!("schema violation at field `options.trim`: {t} is outside [0, 0.5)");
            }
        }
        if let Some(s) = &self.options.schedule {
            if s.windows(2).any(|w| w[0] >= w[1]) || s.first().is_some_and(|&m| m < 2) {
                bail!("schema violation at field `options.schedule`: sizes must be >= 2 and increasing");
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> MixProblem {
        MixProblem {
            marginals: self.marginals.clone(),
            phi: self.phi.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "version": 1,
        "marginals": [
            {"kind": "elliptical", "mu": 0, "sigma": 1, "generator": {"family": "normal"}},
            {"kind": "elliptical", "mu": 0, "sigma": 1, "generator": {"family": "normal"}}
        ],
        "phi": {"shape": "weighted_sum", "outer": "identity", "alphas": [1, 1]},
        "options": {"m": 64}
    }"#;

    #[test]
    fn parses_example() {
        let s = Scenario::parse(EXAMPLE).unwrap();
        assert_eq!(s.marginals.len(), 2);
        assert_eq!(s.options.m, Some(64));
    }

    #[test]
    fn errors_name_the_field() {
        let bad = EXAMPLE.replacen("\"sigma\": 1", "\"sigma\": -1", 1);
        let e = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("marginals[0]"), "{e}");

        let bad = EXAMPLE.replace("\"alphas\": [1, 1]", "\"alphas\": [1]");
        let e = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("phi.alphas"), "{e}");

        let bad = EXAMPLE.replace("\"m\": 64", "\"grid\": 64");
        let e = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("options"), "{e}");

        let bad = EXAMPLE.replace("\"version\": 1", "\"version\": 7");
        let e = Scenario::parse(&bad).unwrap_err().to_string();
        assert!(e.contains("version"), "{e}");
    }

    #[test]
    fn schema_is_valid_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        assert_eq!(v["properties"]["version"]["const"], 1);
    }
}
