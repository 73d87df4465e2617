//! Experiment configuration: JSON documents, validation, and the config hash
//! embedded in every output artifact.

use serde::{Deserialize, Serialize};

use crate::bloch::{AffineChannel, BlochVector, StatePair};
use crate::dephasing::DephasingGenerator;
use crate::ensemble::{ProcessModel, DEFAULT_MAX_JUMPS};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::wtd::{WtdSequence, WtdSpec};

/// Jump channel specification.
///
/// `kind` is one of `"ad"`, `"x"`, `"x-ad"`, `"ad-x"`, `"custom"`; `gamma`
/// is required for the damping variants, `matrix`/`translation` for custom
/// maps.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<[f64; 3]>,
}

impl ChannelSpec {
    pub fn build(&self, warnings: &mut Vec<String>) -> Result<AffineChannel> {
        let gamma = || {
            self.gamma.ok_or_else(|| {
                Error::Config(format!("channel kind '{}' requires \"gamma\"", self.kind))
            })
        };
        match self.kind.as_str() {
            "x" => Ok(AffineChannel::pauli_x()),
            "ad" => AffineChannel::amplitude_damping(gamma()?),
            "x-ad" => {
                Ok(AffineChannel::pauli_x().compose(&AffineChannel::amplitude_damping(gamma()?)?))
            }
            "ad-x" => {
                Ok(AffineChannel::amplitude_damping(gamma()?)?.compose(&AffineChannel::pauli_x()))
            }
            "custom" => {
                let matrix = self.matrix.ok_or_else(|| {
                    Error::Config("custom channel requires \"matrix\"".into())
                })?;
                let translation = self.translation.unwrap_or([0.0; 3]);
                let chan = AffineChannel { matrix, translation, label: "custom".into() };
                if !chan.maps_ball_into_ball() {
                    warnings.push(
                        "custom channel map sends sampled sphere points outside the Bloch ball; \
                         results may be unphysical"
                            .into(),
                    );
                }
                Ok(chan)
            }
            other => Err(Error::Config(format!(
                "unknown channel kind '{other}' (expected ad, x, x-ad, ad-x, custom)"
            ))),
        }
    }
}

/// Continuous-evolution specification: either the three Pauli rates
/// (`gammas`) or the per-axis decay rates (`lambdas`). When both are given
/// the lambdas win.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct GeneratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<[f64; 3]>,
}

impl GeneratorSpec {
    pub fn build(&self, warnings: &mut Vec<String>) -> Result<DephasingGenerator> {
        match (self.gammas, self.lambdas) {
            (Some(_), Some(lambdas)) => {
                warnings.push(
                    "generator config lists both gammas and lambdas; lambdas take precedence"
                        .into(),
                );
                DephasingGenerator::from_decay_rates(lambdas)
            }
            (None, Some(lambdas)) => DephasingGenerator::from_decay_rates(lambdas),
            (Some(gammas), None) => DephasingGenerator::from_pauli_rates(gammas),
            (None, None) => Ok(DephasingGenerator::zero()),
        }
    }
}

/// One waiting-time distribution: `{"kind": "exp"|"erlang", "mu": rate, "r": shape}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WtdEntry {
    pub kind: String,
    pub mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
}

impl WtdEntry {
    pub fn build(&self) -> Result<WtdSpec> {
        match self.kind.as_str() {
            "exp" => WtdSpec::exponential(self.mu),
            "erlang" => WtdSpec::erlang(
                self.mu,
                self.r
                    .ok_or_else(|| Error::Config("erlang WTD requires \"r\"".into()))?,
            ),
            other => Err(Error::Config(format!(
                "unknown WTD kind '{other}' (expected exp or erlang)"
            ))),
        }
    }
}

/// The waiting-time sequence: optional modified head plus stationary tail.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WtdsSpec {
    #[serde(default)]
    pub modified: Vec<WtdEntry>,
    pub stationary: WtdEntry,
}

impl WtdsSpec {
    pub fn build(&self) -> Result<WtdSequence> {
        let modified = self
            .modified
            .iter()
            .map(|e| e.build())
            .collect::<Result<Vec<_>>>()?;
        Ok(WtdSequence::new(modified, self.stationary.build()?))
    }
}

/// Initial pair: an explicit antipodal direction or `"optimize"`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PairSpec {
    Named(String),
    Direction { direction: [f64; 3] },
}

impl PairSpec {
    pub fn is_optimize(&self) -> Result<bool> {
        match self {
            PairSpec::Named(name) if name == "optimize" => Ok(true),
            PairSpec::Named(other) => Err(Error::Config(format!(
                "unknown pair spec '{other}' (expected \"optimize\" or {{\"direction\": [x,y,z]}})"
            ))),
            PairSpec::Direction { .. } => Ok(false),
        }
    }

    pub fn direction(&self) -> Option<BlochVector> {
        match self {
            PairSpec::Direction { direction } => {
                Some(BlochVector::new(direction[0], direction[1], direction[2]))
            }
            PairSpec::Named(_) => None,
        }
    }
}

/// One sweep axis: a parameter name plus explicit values or a linear range.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AxisSpec {
    pub param: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
}

impl AxisSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        if let Some(values) = &self.values {
            if values.is_empty() {
                return Err(Error::Config(format!("axis '{}' has no values", self.param)));
            }
            return Ok(values.clone());
        }
        match (self.min, self.max, self.count) {
            (Some(min), Some(max), Some(count)) if count >= 1 => Ok((0..count)
                .map(|i| {
                    if count == 1 {
                        min
                    } else {
                        min + (max - min) * i as f64 / (count - 1) as f64
                    }
                })
                .collect()),
            _ => Err(Error::Config(format!(
                "axis '{}' needs either \"values\" or min/max/count",
                self.param
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis2: Option<AxisSpec>,
}

fn default_trajectories() -> usize {
    100_000
}

/// Full experiment document.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    pub channel: ChannelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    pub wtds: WtdsSpec,
    pub pair: PairSpec,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Output grid step; defaults to `T / 1000`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_out: Option<f64>,
    #[serde(rename = "N", default = "default_trajectories")]
    pub trajectories: usize,
    pub seed: u64,
    /// Revival detection threshold; defaults to `max(3 max-stderr, 1e-3)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_jumps: Option<usize>,
    /// Curve evaluation route for sweeps/analytic: "auto", "mc", "analytic".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    /// Parity-series error budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Number of individual trajectories to dump as CSV from a simulate run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_trajectories: Option<usize>,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: ProcessModel,
    pub pair: Option<StatePair>,
    pub optimize: bool,
    pub grid: TimeGrid,
    pub max_jumps: usize,
    pub config_hash: String,
    pub warnings: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Validates every sub-spec and assembles the runnable experiment.
    pub fn validate(&self) -> Result<Experiment> {
        let mut warnings = Vec::new();
        let channel = self.channel.build(&mut warnings)?;
        let generator = self
            .generator
            .clone()
            .unwrap_or_default()
            .build(&mut warnings)?;
        let wtds = self.wtds.build()?;
        let optimize = self.pair.is_optimize()?;
        let pair = match self.pair.direction() {
            Some(direction) => Some(StatePair::antipodal(direction).map_err(|_| {
                Error::Config("pair direction must be a nonzero vector".into())
            })?),
            None => None,
        };
        if !self.t_end.is_finite() || self.t_end <= 0.0 {
            return Err(Error::Config(format!(
                "horizon T must be positive and finite, got {}",
                self.t_end
            )));
        }
        let dt_out = self.dt_out.unwrap_or(self.t_end / 1000.0);
        let grid = TimeGrid::from_step(self.t_end, dt_out)
            .map_err(|e| Error::Config(format!("bad output grid: {e}")))?;
        if self.trajectories == 0 {
            return Err(Error::Config("N must be at least 1".into()));
        }
        if let Some(delta) = self.delta {
            if delta.is_nan() || delta <= 0.0 {
                return Err(Error::Config(format!("delta must be positive, got {delta}")));
            }
        }
        if let Some(method) = &self.method {
            if !matches!(method.as_str(), "auto" | "mc" | "analytic") {
                return Err(Error::Config(format!(
                    "unknown method '{method}' (expected auto, mc, analytic)"
                )));
            }
        }
        Ok(Experiment {
            config: self.clone(),
            model: ProcessModel { generator, channel, wtds },
            pair,
            optimize,
            grid,
            max_jumps: self.max_jumps.unwrap_or(DEFAULT_MAX_JUMPS),
            config_hash: config_hash(self),
            warnings,
        })
    }

    /// Binds a sweep parameter by name, returning the modified config.
    pub fn with_param(&self, name: &str, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = self.clone();
        match name {
            "mu" => cfg.wtds.stationary.mu = value,
            "mu1" | "mu2" | "mu3" => {
                let idx = (name.as_bytes()[2] - b'1') as usize;
                let entry = cfg.wtds.modified.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!(
                        "sweep parameter '{name}' needs {} modified WTD entries",
                        idx + 1
                    ))
                })?;
                entry.mu = value;
            }
            "gamma" => cfg.channel.gamma = Some(value),
            "lambda" => {
                let spec = cfg.generator.get_or_insert_with(Default::default);
                spec.lambdas = Some([value; 3]);
                spec.gammas = None;
            }
            "lambda1" | "lambda2" | "lambda3" => {
                let idx = (name.as_bytes()[6] - b'1') as usize;
                let spec = cfg.generator.get_or_insert_with(Default::default);
                let mut lambdas = spec.lambdas.unwrap_or([0.0; 3]);
                lambdas[idx] = value;
                spec.lambdas = Some(lambdas);
                spec.gammas = None;
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep parameter '{other}' \
                     (expected mu, mu1..mu3, gamma, lambda, lambda1..lambda3, t)"
                )))
            }
        }
        Ok(cfg)
    }
}

/// FNV-1a hash of the canonical JSON serialization, hex encoded. Stable
/// across runs and platforms, embedded in every output artifact.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serialization cannot fail");
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in canonical.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}
