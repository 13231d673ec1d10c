//! TOML scenario configuration. Every key is optional; an empty file runs
//! all scenarios on the default profile at `N = 6`.
//!
//! ```toml
//! seed = 7
//! truncations = [2, 4, 6]
//! sweep_truncations = [2, 4, 6, 8]
//! scenarios = ["neutral", "krein"]
//!
//! [profile]
//! c_sq_rule = "paper"   # paper | mild | geometric | explicit
//! c_sq_ratio = 0.25     # geometric only
//! c_sq = [0.5, 0.01]    # explicit only
//! delta = 2.0
//! beta = 1.5
//! N = 6
//! alpha = 1.0
//! rho_param = 0.25
//!
//! [quadrature]
//! rel_tol = 1e-10
//! abs_tol = 1e-14
//! max_panels = 20000
//!
//! [output]
//! dir = "out"
//! format = "json"
//!
//! [abstract]
//! input = "space.toml"
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{CoefficientRule, SingularityProfile};
use crate::quadrature::QuadratureSpec;
use crate::report::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Neutral,
    Majorant,
    Krein,
    Abstract,
    Heisenberg,
    Sweep,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::Neutral,
        Scenario::Majorant,
        Scenario::Krein,
        Scenario::Abstract,
        Scenario::Heisenberg,
        Scenario::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Neutral => "neutral",
            Scenario::Majorant => "majorant",
            Scenario::Krein => "krein",
            Scenario::Abstract => "abstract",
            Scenario::Heisenberg => "heisenberg",
            Scenario::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scenario> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProfile {
    pub c_sq_rule: Option<String>,
    pub c_sq_ratio: Option<f64>,
    pub c_sq: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub rho_param: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawQuadrature {
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_panels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAbstract {
    pub input: Option<PathBuf>,
}

/// The file as written; see [`ScenarioConfig::resolve`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub seed: Option<u64>,
    pub truncations: Option<Vec<usize>>,
    pub sweep_truncations: Option<Vec<usize>>,
    pub scenarios: Option<Vec<Scenario>>,
    #[serde(default)]
    pub profile: RawProfile,
    #[serde(default)]
    pub quadrature: RawQuadrature,
    #[serde(default)]
    pub output: RawOutput,
    #[serde(default, rename = "abstract")]
    pub abstract_: RawAbstract,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub profile: SingularityProfile,
    pub truncations: Vec<usize>,
    pub sweep_truncations: Vec<usize>,
    pub quadrature: QuadratureSpec,
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: Format,
    pub abstract_input: Option<PathBuf>,
}

pub const DEFAULT_TRUNCATION: usize = 6;
pub const DEFAULT_SWEEP: [usize; 4] = [2, 4, 6, 8];

fn rule_of(p: &RawProfile) -> Result<CoefficientRule> {
    let name = p.c_sq_rule.as_deref().unwrap_or(if p.c_sq.is_some() { "explicit" } else { "paper" });
    let rule = match name {
        "paper" => CoefficientRule::Paper,
        "mild" => CoefficientRule::Mild,
        "geometric" => CoefficientRule::Geometric(
            p.c_sq_ratio.ok_or_else(|| Error::Config("geometric rule needs c_sq_ratio".into()))?,
        ),
        "explicit" => CoefficientRule::Explicit(
            p.c_sq.clone().ok_or_else(|| Error::Config("explicit rule needs c_sq".into()))?,
        ),
        other => return Err(Error::Config(format!("unknown c_sq_rule {other:?}"))),
    };
    if !matches!(rule, CoefficientRule::Geometric(_)) && p.c_sq_ratio.is_some() {
        return Err(Error::Config("c_sq_ratio applies to the geometric rule only".into()));
    }
    if !matches!(rule, CoefficientRule::Explicit(_)) && p.c_sq.is_some() {
        return Err(Error::Config("c_sq applies to the explicit rule only".into()));
    }
    Ok(rule)
}

fn positive(name: &str, v: Option<f64>, default: f64) -> Result<f64> {
    match v {
        None => Ok(default),
        Some(x) if x.is_finite() && x >= 0.0 => Ok(x),
        Some(x) => Err(Error::Config(format!("{name} must be finite and nonnegative, got {x}"))),
    }
}

impl ScenarioConfig {
    /// Applies defaults and validates.
    pub fn resolve(raw: &RawConfig) -> Result<ScenarioConfig> {
        let n = raw.profile.n.unwrap_or(DEFAULT_TRUNCATION);
        let profile = SingularityProfile::build(
            rule_of(&raw.profile)?,
            raw.profile.delta.unwrap_or(2.0),
            raw.profile.beta.unwrap_or(1.5),
            n,
            raw.profile.alpha,
            raw.profile.rho_param,
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let d = QuadratureSpec::default();
        let quadrature = QuadratureSpec {
            rel_tol: positive("rel_tol", raw.quadrature.rel_tol, d.rel_tol)?,
            abs_tol: positive("abs_tol", raw.quadrature.abs_tol, d.abs_tol)?,
            max_panels: raw.quadrature.max_panels.unwrap_or(d.max_panels),
        };
        if quadrature.max_panels == 0 {
            return Err(Error::Config("max_panels must be positive".into()));
        }
        let truncations = raw.truncations.clone().unwrap_or_else(|| vec![n]);
        let sweep_truncations = raw.sweep_truncations.clone().unwrap_or_else(|| DEFAULT_SWEEP.to_vec());
        for (what, list) in [("truncations", &truncations), ("sweep_truncations", &sweep_truncations)] {
            if list.is_empty() {
                return Err(Error::Config(format!("{what} is empty")));
            }
            if let Some(t) = list.iter().find(|t| **t > crate::funcrep::MAX_JET_ORDER) {
                return Err(Error::Config(format!("truncation {t} in {what} is too large")));
            }
        }
        let mut scenarios = raw.scenarios.clone().unwrap_or_else(|| Scenario::ALL.to_vec());
        if scenarios.is_empty() {
            return Err(Error::Config("scenario list is empty".into()));
        }
        scenarios.sort();
        scenarios.dedup();
        Ok(ScenarioConfig {
            profile,
            truncations,
            sweep_truncations,
            quadrature,
            scenarios,
            seed: raw.seed.unwrap_or(0),
            out_dir: raw.output.dir.clone().unwrap_or_else(|| PathBuf::from("kreinreg-out")),
            format: raw.output.format.unwrap_or(Format::Json),
            abstract_input: raw.abstract_.input.clone(),
        })
    }

    pub fn parse(text: &str) -> Result<ScenarioConfig> {
        ScenarioConfig::resolve(&RawConfig::parse(text)?)
    }

    /// The joined scenario id used in reports.
    pub fn id(&self) -> String {
        self.scenarios.iter().map(|s| s.name()).collect::<Vec<_>>().join("+")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let c = ScenarioConfig::parse("").unwrap();
        assert_eq!(c.profile.c_sq, SingularityProfile::paper(6).c_sq);
        assert_eq!(c.truncations, vec![6]);
        assert_eq!(c.scenarios, Scenario::ALL.to_vec());
        assert_eq!(c.quadrature, QuadratureSpec::default());
        assert_eq!(c.id(), "neutral+majorant+krein+abstract+heisenberg+sweep");
    }

    #[test]
    fn full_config() {
        let text = r#"
            seed = 9
            truncations = [2, 4]
            scenarios = ["krein", "neutral"]
            [profile]
            c_sq_rule = "geometric"
            c_sq_ratio = 0.25
            N = 4
            [quadrature]
            rel_tol = 1e-9
            [output]
            format = "csv"
            dir = "x"
            [abstract]
            input = "a.toml"
        "#;
        let c = ScenarioConfig::parse(text).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.scenarios, vec![Scenario::Neutral, Scenario::Krein]);
        assert_eq!(c.profile.c_sq[2], 0.0625);
        assert_eq!(c.format, Format::Csv);
        assert_eq!(c.quadrature.rel_tol, 1e-9);
        assert_eq!(c.abstract_input, Some(PathBuf::from("a.toml")));
    }

    #[test]
    fn rejected_configs() {
        for text in [
            "scenarios = []",
            "scenarios = [\"nope\"]",
            "truncations = []",
            "bogus = 1",
            "[profile]\nc_sq_rule = \"geometric\"",
            "[profile]\nc_sq_rule = \"paper\"\nc_sq = [1.0]",
            "[profile]\ndelta = 1.0",
            "[profile]\nN = 3\nc_sq = [0.5]",
            "[quadrature]\nrel_tol = -1.0",
            "seed = \"x\"",
        ] {
            assert!(matches!(ScenarioConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
