use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::extraction::Schedule;
use crate::measure::SelfSimilarMeasure;

use super::generators::LengthRule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GeneratorSpec {
    Farey {
        q_max: u64,
    },
    Random {
        n: usize,
        /// `l_n = a / n`; ignored when `lengths` is given.
        #[serde(default)]
        a: Option<f64>,
        #[serde(default)]
        lengths: Option<Vec<f64>>,
        #[serde(default = "one")]
        dim: usize,
    },
    Ifs {
        depth: u32,
        #[serde(default = "three")]
        factor: f64,
        /// Base point on the attractor; the first map's fixed point by default.
        #[serde(default)]
        x: Option<Vec<f64>>,
    },
}

fn one() -> usize {
    1
}

fn three() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Lebesgue {
        #[serde(default = "one")]
        dim: usize,
    },
    /// Middle-third Cantor measure with weights `(p, 1 - p)`.
    Cantor {
        #[serde(default = "half")]
        p: f64,
    },
    /// Measure file (see the README for the format), relative to the config.
    File { path: String },
    /// Measure file contents given inline.
    Inline { text: String },
}

fn half() -> f64 {
    0.5
}

impl MeasureSpec {
    pub fn build(&self, base: Option<&std::path::Path>) -> Result<SelfSimilarMeasure> {
        match self {
            MeasureSpec::Lebesgue { dim } => SelfSimilarMeasure::lebesgue(*dim),
            MeasureSpec::Cantor { p } => SelfSimilarMeasure::cantor(*p),
            MeasureSpec::File { path } => {
                let full = match base {
                    Some(b) => b.join(path),
                    None => path.into(),
                };
                SelfSimilarMeasure::parse(&std::fs::read_to_string(full)?)
            }
            MeasureSpec::Inline { text } => SelfSimilarMeasure::parse(text),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleSpec {
    Harmonic,
    Power,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    #[serde(default)]
    pub weakly_redundant: bool,
    #[serde(default = "default_k_max")]
    pub k_max: u32,
    #[serde(default = "default_target")]
    pub cover_target: f64,
    #[serde(default)]
    pub conditioned: bool,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleSpec,
    /// `a` and `p` of `ε_n = a / n^p`.
    #[serde(default)]
    pub schedule_a: Option<f64>,
    #[serde(default)]
    pub schedule_p: Option<f64>,
    #[serde(default)]
    pub schedule_values: Option<Vec<f64>>,
    #[serde(default = "default_report_eps")]
    pub report_eps: f64,
    /// Contraction exponent: sets `B(x, r^δ)`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Rectangle exponents: sets with sides `r^{τ_i}`.
    #[serde(default)]
    pub tau: Option<Vec<f64>>,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Boxes `[lo..., hi...]` receiving their own estimate.
    #[serde(default)]
    pub regions: Vec<Vec<f64>>,
}

fn default_k_max() -> u32 {
    12
}
fn default_target() -> f64 {
    0.75
}
fn default_schedule() -> ScheduleSpec {
    ScheduleSpec::Harmonic
}
fn default_report_eps() -> f64 {
    0.1
}
fn default_tail() -> f64 {
    0.5
}
fn default_tolerance() -> f64 {
    0.05
}

impl Default for PipelineSpec {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl PipelineSpec {
    pub fn schedule(&self) -> Result<Schedule> {
        Ok(match self.schedule {
            ScheduleSpec::Harmonic => Schedule::Harmonic,
            ScheduleSpec::Power => Schedule::Power {
                a: self.schedule_a.unwrap_or(1.0),
                p: self.schedule_p.unwrap_or(1.0),
            },
            ScheduleSpec::Explicit => Schedule::Explicit(
                self.schedule_values.clone().ok_or_else(|| Error::invalid("explicit schedule needs schedule_values"))?,
            ),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Node budget for measure evaluation.
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Largest sequence that is materialized ball by ball.
    #[serde(default = "default_max_balls")]
    pub max_balls: usize,
    #[serde(default)]
    pub out: Option<String>,
    pub generator: GeneratorSpec,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub pipeline: PipelineSpec,
}

fn default_budget() -> usize {
    crate::measure::DEFAULT_NODE_BUDGET
}

fn default_max_balls() -> usize {
    2_000_000
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |sp| text[..sp.start].lines().count().max(1));
            Error::parse(line, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization, without the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.max_balls == 0 {
            return Err(Error::invalid("budgets must be positive"));
        }
        match &self.generator {
            GeneratorSpec::Random { a, lengths, dim, .. } => {
                if self.seed.is_none() {
                    return Err(Error::invalid("the random generator needs a seed"));
                }
                if a.is_none() && lengths.is_none() {
                    return Err(Error::invalid("the random generator needs `a` or `lengths`"));
                }
                if *dim == 0 {
                    return Err(Error::invalid("dim must be at least 1"));
                }
            }
            GeneratorSpec::Farey { q_max } if *q_max == 0 => return Err(Error::invalid("q_max must be at least 1")),
            _ => {}
        }
        let p = &self.pipeline;
        if p.delta.is_some() && p.tau.is_some() {
            return Err(Error::invalid("give either delta or tau, not both"));
        }
        if p.delta.is_some_and(|d| !(d >= 1.0)) {
            return Err(Error::invalid("delta must be at least 1"));
        }
        if let Some(t) = &p.tau {
            crate::geometry::validate_tau(t)?;
        }
        p.schedule()?;
        Ok(())
    }

    pub fn length_rule(&self) -> Option<LengthRule> {
        match &self.generator {
            GeneratorSpec::Random { a, lengths, .. } => Some(match lengths {
                Some(v) => LengthRule::Explicit(v.clone()),
                None => LengthRule::Harmonic { a: a.unwrap_or(1.0) },
            }),
            _ => None,
        }
    }
}
