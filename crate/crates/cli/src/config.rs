// SPDX-License-Identifier: Apache-2.0

//! Run configuration file.
//!
//! ```toml
//! [[geometry.pair]]
//! photons = 3
//! scaling = 1.0
//!
//! [[geometry.pair]]
//! photons = 3
//! scaling = "1/4"        # or angle_deg = 14.4775...
//!
//! [[plan.entry]]
//! target = 6             # or phases_turns = [0.25, 0.5]
//! weight = 1.0
//!
//! [grid]
//! samples = 2048
//!
//! [absorption]
//! order = 6
//! loss = 1.0
//!
//! [film]
//! grains = 10000
//! absorb_prob = 0.001
//! target_mean = 100.0
//! seed = 1
//! trials = 200
//!
//! [output]
//! dir = "out"
//! normalize = "peak"
//! engine = "both"
//! ```

use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use qlitho_core::deposition::{Normalization, SamplingGrid};
use qlitho_core::exposure::FilmModel;
use qlitho_core::fock::{Geometry, ModePair};
use qlitho_core::imperfections::LossModel;
use qlitho_core::planner::{plan_pattern, ExposurePlan, PixelAddress, PlanEntry, Target};

/// Configuration problem, anchored to a 1-based line of the source text
/// when one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Closed,
    Brute,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scaling {
    Value(f64),
    /// `"1/k"` shorthand for `sin θ = 1/k`.
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub photons: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    #[serde(default)]
    pub pair: Vec<PairSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EntrySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
    /// Second-axis pixel for two-axis runs; defaults to `target`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_y: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub intermediate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_turns: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PlanSpec {
    #[serde(default)]
    pub entry: Vec<EntrySpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub samples: usize,
    /// Defaults to 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_min: Option<f64>,
    /// Defaults to one fundamental period past `x_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionSpec {
    /// Defaults to the total photon number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    /// Uniform transmission; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmSpec {
    pub grains: u32,
    pub absorb_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    /// Tunes the shot count so the brightest target pixel reaches this mean.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mean: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub plan: PlanSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub absorption: AbsorptionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub film: Option<FilmSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// Line of the `k`-th (0-based) occurrence of a table header, or of the
/// first key `key` inside table `header`.
fn locate(text: &str, header: &str, k: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.trim() == header)
        .nth(k)
        .map(|(i, _)| i + 1)
}

fn locate_key(text: &str, header: &str, key: &str) -> Option<usize> {
    let start = locate(text, header, 0)?;
    text.lines()
        .enumerate()
        .skip(start)
        .take_while(|(_, l)| !l.trim_start().starts_with('['))
        .find(|(_, l)| l.trim_start().starts_with(key))
        .map(|(i, _)| i + 1)
        .or(Some(start))
}

impl RunConfig {
    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        config.validate(text)?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self, text: &str) -> Result<(), ConfigError> {
        let err = |line, message: String| Err(ConfigError { line, message });
        for (k, p) in self.geometry.pair.iter().enumerate() {
            let line = locate(text, "[[geometry.pair]]", k);
            match (&p.scaling, &p.angle_deg) {
                (Some(_), Some(_)) => {
                    return err(line, "pair sets both scaling and angle_deg".into())
                }
                (None, None) => return err(line, "pair needs scaling or angle_deg".into()),
                _ => {}
            }
            if let Err(e) = pair_scaling(p) {
                return err(line, e);
            }
        }
        for (k, e) in self.plan.entry.iter().enumerate() {
            let line = locate(text, "[[plan.entry]]", k);
            if e.target.is_some() == e.phases_turns.is_some() {
                return err(
                    line,
                    "plan entry needs exactly one of target or phases_turns".into(),
                );
            }
            if e.phases_turns.is_some() && (e.intermediate || e.target_y.is_some()) {
                return err(
                    line,
                    "intermediate and target_y apply to pixel targets only".into(),
                );
            }
            if let Some(w) = e.weight {
                if !(w >= 0.0 && w.is_finite()) {
                    return err(line, format!("weight {w} must be non-negative"));
                }
            }
        }
        if let Some(g) = &self.grid {
            if g.samples < 2 {
                return err(
                    locate_key(text, "[grid]", "samples"),
                    "grid needs at least 2 samples".into(),
                );
            }
            if let (Some(a), Some(b)) = (g.x_min, g.x_max) {
                if a >= b {
                    return err(
                        locate(text, "[grid]", 0),
                        format!("grid range [{a}, {b}] is empty"),
                    );
                }
            }
        }
        if let Some(eta) = self.absorption.loss {
            if !(0.0..=1.0).contains(&eta) {
                return err(
                    locate_key(text, "[absorption]", "loss"),
                    format!("transmission {eta} outside [0, 1]"),
                );
            }
        }
        if self.absorption.order == Some(0) {
            return err(
                locate_key(text, "[absorption]", "order"),
                "absorption order must be at least 1".into(),
            );
        }
        if let Some(f) = &self.film {
            if let Err(e) = FilmModel::new(f.grains, f.absorb_prob) {
                return err(locate(text, "[film]", 0), e.to_string());
            }
            if f.trials == 0 {
                return err(
                    locate_key(text, "[film]", "trials"),
                    "trials must be at least 1".into(),
                );
            }
        }
        if let Some(n) = &self.output.normalize {
            if n.parse::<Normalization>().is_err() {
                return err(
                    locate_key(text, "[output]", "normalize"),
                    format!("unknown normalization {n:?}"),
                );
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<Geometry, ConfigError> {
        if self.geometry.pair.is_empty() {
            return Err(ConfigError {
                line: None,
                message: "config has no [[geometry.pair]] tables".into(),
            });
        }
        let pairs = self
            .geometry
            .pair
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s = pair_scaling(p).map_err(|message| ConfigError {
                    line: None,
                    message,
                })?;
                ModePair::new(i as u32 + 1, p.photons, s).map_err(core_error)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Geometry::new(pairs).map_err(core_error)
    }

    /// Mixture plan; every entry is either a pixel target or explicit phases.
    pub fn plan(&self) -> Result<ExposurePlan, ConfigError> {
        let geometry = self.geometry()?;
        if self.plan.entry.is_empty() {
            return Err(ConfigError {
                line: None,
                message: "config has no [[plan.entry]] tables".into(),
            });
        }
        if self.plan.entry.iter().all(|e| e.target.is_some()) {
            let targets: Vec<Target> = self.plan.entry.iter().map(|e| self.target(e)).collect();
            return plan_pattern(&geometry, &targets).map_err(core_error);
        }
        let sum: f64 = self
            .plan
            .entry
            .iter()
            .map(|e| e.weight.unwrap_or(1.0))
            .sum();
        let layout = qlitho_core::planner::PixelLayout::of(&geometry).map_err(core_error)?;
        let entries = self
            .plan
            .entry
            .iter()
            .filter(|e| e.weight.unwrap_or(1.0) > 0.0)
            .map(|e| {
                let weight = e.weight.unwrap_or(1.0) / sum;
                match (&e.phases_turns, e.target) {
                    (Some(turns), _) => Ok(PlanEntry {
                        weight,
                        phases: turns.iter().map(|t| t * TAU).collect(),
                        target: None,
                    }),
                    (None, _) => {
                        let address = self.target(e).address;
                        Ok(PlanEntry {
                            weight,
                            phases: qlitho_core::planner::phases_for_pixel(
                                &geometry, &layout, address,
                            )
                            .map_err(core_error)?,
                            target: Some(address),
                        })
                    }
                }
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        ExposurePlan::new(geometry, entries).map_err(core_error)
    }

    fn target(&self, e: &EntrySpec) -> Target {
        let index = e.target.unwrap_or(0);
        let address = if e.intermediate {
            PixelAddress::intermediate(index)
        } else {
            PixelAddress::new(index)
        };
        Target {
            address,
            weight: e.weight,
        }
    }

    /// Two-axis targets `(target, target_y)`; requires pixel targets.
    pub fn targets_2d(&self) -> Result<Vec<qlitho_core::planner::Pixel2d>, ConfigError> {
        self.plan
            .entry
            .iter()
            .map(|e| match e.target {
                Some(x) if !e.intermediate => Ok(qlitho_core::planner::Pixel2d::new(
                    x,
                    e.target_y.unwrap_or(x),
                )),
                _ => Err(ConfigError {
                    line: None,
                    message: "two-axis profiles need primary pixel targets".into(),
                }),
            })
            .collect()
    }

    /// Sampling grid; defaults to one fundamental period.
    pub fn grid(&self, period: f64) -> Result<SamplingGrid, ConfigError> {
        let g = self.grid.as_ref().ok_or(ConfigError {
            line: None,
            message: "config has no [grid] section".into(),
        })?;
        let x_min = g.x_min.unwrap_or(0.0);
        let x_max = g.x_max.unwrap_or(x_min + period);
        SamplingGrid::new(x_min, x_max, g.samples).map_err(core_error)
    }

    pub fn loss(&self) -> Result<Option<LossModel>, ConfigError> {
        match self.absorption.loss {
            None => Ok(None),
            Some(1.0) => Ok(None),
            Some(eta) => LossModel::uniform(eta).map(Some).map_err(core_error),
        }
    }

    pub fn normalization(&self) -> Normalization {
        self.output
            .normalize
            .as_deref()
            .and_then(|n| n.parse().ok())
            .unwrap_or(Normalization::PeakUnity)
    }
}

fn pair_scaling(p: &PairSpec) -> Result<f64, String> {
    match (&p.scaling, p.angle_deg) {
        (Some(Scaling::Value(s)), _) => Ok(*s),
        (Some(Scaling::Text(t)), _) => {
            let k = t
                .trim()
                .strip_prefix("1/")
                .and_then(|k| k.trim().parse::<f64>().ok())
                .filter(|k| *k >= 1.0)
                .ok_or_else(|| format!("scaling {t:?} is not a number or 1/k"))?;
            Ok(1.0 / k)
        }
        (None, Some(a)) => Ok(a.to_radians().sin()),
        (None, None) => Err("pair needs scaling or angle_deg".into()),
    }
}

fn core_error(e: qlitho_core::Error) -> ConfigError {
    ConfigError {
        line: None,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[[geometry.pair]]
photons = 3
scaling = 1.0

[[geometry.pair]]
photons = 3
scaling = "1/4"

[[plan.entry]]
target = 6

[grid]
samples = 65
"#;

    #[test]
    fn parses_sample() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        let g = c.geometry().unwrap();
        assert_eq!(g.pairs()[1].scaling, 0.25);
        let plan = c.plan().unwrap();
        assert_eq!(plan.targets(), vec![PixelAddress::new(6)]);
        assert_eq!(c.grid(4.0).unwrap().x_max, 4.0);
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::parse(SAMPLE).unwrap();
        assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = SAMPLE.replace("target = 6", "target = 6\nphases_turns = [0.0, 0.0]");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.line, Some(10));
        let bad = SAMPLE.replace("scaling = 1.0", "scaling = 1.0\nangle_deg = 90.0");
        assert_eq!(RunConfig::parse(&bad).unwrap_err().line, Some(2));
        let bad = SAMPLE.replace("samples = 65", "samples = 0");
        assert_eq!(RunConfig::parse(&bad).unwrap_err().line, Some(14));
        let bad = SAMPLE.replace("samples = 65", "samples = \"x\"");
        assert_eq!(RunConfig::parse(&bad).unwrap_err().line, Some(14));
    }

    #[test]
    fn angle_matches_scaling() {
        let text = SAMPLE.replace(
            "scaling = \"1/4\"",
            &format!("angle_deg = {}", 0.25f64.asin().to_degrees()),
        );
        let g = RunConfig::parse(&text).unwrap().geometry().unwrap();
        assert!((g.pairs()[1].scaling - 0.25).abs() < 1e-15);
    }
}
