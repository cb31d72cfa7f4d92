use std::path::{Path, PathBuf};
use std::sync::Arc;

use bipsmc::attacks::{
    build_consensus_model, build_dns_model, build_mempool_model, AttackModelBundle, DnsParams, DoubleSpendParams,
};
use bipsmc::corpus::{coin_model, constant_model, COIN_PROPERTY, CONSTANT_PROPERTY};
use bipsmc::kernel::CompoundModel;
use bipsmc::monitor::parse_formula;
use bipsmc::stochastics::{load_dataset, validate_dataset, Distribution, ReliabilityPolicy, TimeUnit};
use serde::Deserialize;
use serde_json::{Map, Value as Json};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub role: String,
    pub path: PathBuf,
    #[serde(default = "default_unit")]
    pub unit: TimeUnit,
}

fn default_unit() -> TimeUnit {
    TimeUnit::Seconds
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub segments: Vec<Segment>,
}

impl SweepSpec {
    /// The lattice points in increasing order; an endpoint shared by two
    /// adjacent segments appears once.
    pub fn points(&self) -> Result<Vec<f64>, CliError> {
        if self.segments.is_empty() {
            return Err(CliError::Config("sweep has no segments".into()));
        }
        let mut out: Vec<f64> = Vec::new();
        let mut prev_to = f64::NEG_INFINITY;
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.from.is_finite() && s.to.is_finite() && s.from <= s.to && s.step > 0.0) {
                return Err(CliError::Config(format!(
                    "sweep segment {i} must satisfy from <= to and step > 0"
                )));
            }
            if s.from < prev_to {
                return Err(CliError::Config(format!("sweep segment {i} overlaps the previous one")));
            }
            prev_to = s.to;
            let tol = s.step * 1e-9;
            let mut k = 0u64;
            loop {
                let x = s.from + k as f64 * s.step;
                if x > s.to + tol {
                    break;
                }
                if out.last().is_none_or(|&last| (x - last).abs() > tol) {
                    out.push(x);
                }
                k += 1;
            }
        }
        Ok(out)
    }
}

/// Experiment description, usually read from a JSON file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `{"name": "...", <model parameters>...}`.
    pub model: Map<String, Json>,
    #[serde(default)]
    pub property: Option<String>,
    #[serde(default = "default_precision")]
    pub delta: f64,
    #[serde(default = "default_precision")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub datasets: Vec<DatasetRef>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_precision() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn for_model(name: &str) -> Self {
        let mut model = Map::new();
        model.insert("name".into(), Json::String(name.into()));
        Self {
            model,
            property: None,
            delta: default_precision(),
            alpha: default_precision(),
            seed: 0,
            horizon: None,
            datasets: Vec::new(),
            sweep: None,
        }
    }

    /// Reads a config file; dataset paths are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn model_name(&self) -> Result<&str, CliError> {
        self.model
            .get("name")
            .and_then(Json::as_str)
            .ok_or_else(|| CliError::Config("model.name is missing".into()))
    }

    pub fn set_model_name(&mut self, name: &str) {
        self.model.insert("name".into(), Json::String(name.into()));
    }

    fn params(&self) -> Map<String, Json> {
        let mut m = self.model.clone();
        m.remove("name");
        m
    }
}

/// A ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Instantiated {
    pub model: CompoundModel,
    pub property_text: String,
    pub horizon: f64,
}

fn typed<T: serde::de::DeserializeOwned>(name: &str, params: Map<String, Json>) -> Result<T, CliError> {
    serde_json::from_value(Json::Object(params))
        .map_err(|e| CliError::Config(format!("parameters of model `{name}`: {e}")))
}

pub struct Loader {
    pub allow_unreliable: bool,
    pub policy: ReliabilityPolicy,
}

impl Loader {
    fn dataset(&self, cfg: &ExperimentConfig, role: &str) -> Result<Distribution, CliError> {
        let d = cfg
            .datasets
            .iter()
            .find(|d| d.role == role)
            .ok_or_else(|| CliError::Dataset(format!("no dataset given for role `{role}`")))?;
        let ds = load_dataset(&d.path, d.unit)
            .map_err(|e| CliError::Dataset(format!("{role}: {e}")))?;
        let report = validate_dataset(&ds, &self.policy);
        if !report.reliable && !self.allow_unreliable {
            return Err(CliError::Dataset(format!(
                "{role} ({}) is not reliable: {}; pass --allow-unreliable to use it anyway",
                d.path.display(),
                report.messages.join("; ")
            )));
        }
        Distribution::empirical(Arc::new(ds)).map_err(|e| CliError::Dataset(format!("{role}: {e}")))
    }

    /// Builds the configured model. `sweep` overrides the swept parameter.
    pub fn instantiate(&self, cfg: &ExperimentConfig, sweep: Option<(&str, f64)>) -> Result<Instantiated, CliError> {
        let name = cfg.model_name()?;
        let mut params = cfg.params();
        let mut substitution = None;
        if let Some((param, x)) = sweep {
            let key = match (name, param) {
                ("dns", "time_bound_x") => "request_window",
                ("mempool" | "consensus", "t_prime") => "t_prime",
                _ => {
                    return Err(CliError::Config(format!(
                        "model `{name}` cannot sweep parameter `{param}`"
                    )))
                }
            };
            params.insert(key.into(), Json::from(x));
        }

        let (bundle_parts, fixed_horizon) = match name {
            "dns" => {
                let p: DnsParams = typed(name, params)?;
                substitution = Some(p.request_window);
                (from_bundle(build_dns_model(&p))?, true)
            }
            "mempool" | "consensus" => {
                let p: DoubleSpendParams = typed(name, params)?;
                let (role, build): (_, fn(&DoubleSpendParams, &Distribution) -> _) = if name == "mempool" {
                    ("mining_time", build_mempool_model)
                } else {
                    ("propagation_delay", build_consensus_model)
                };
                let dist = self.dataset(cfg, role)?;
                (from_bundle(build(&p, &dist))?, false)
            }
            "constant" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    value: bool,
                }
                let p: P = typed(name, params)?;
                ((constant_model(p.value), CONSTANT_PROPERTY.to_string(), 1.0), false)
            }
            "coin" => {
                #[derive(Deserialize)]
                #[serde(deny_unknown_fields)]
                struct P {
                    #[serde(default = "half")]
                    p: f64,
                }
                fn half() -> f64 {
                    0.5
                }
                let p: P = typed(name, params)?;
                let m = coin_model(p.p).map_err(|e| CliError::Config(format!("coin: {e}")))?;
                ((m, COIN_PROPERTY.to_string(), 2.0), false)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown model `{other}` (expected dns, mempool, consensus, constant or coin)"
                )))
            }
        };
        let (model, default_property, default_horizon) = bundle_parts;
        let property_text = match (&cfg.property, substitution) {
            (Some(p), Some(x)) => p.replace("$x", &x.to_string()),
            (Some(p), None) => p.clone(),
            (None, _) => default_property,
        };
        let formula = parse_formula(&property_text).map_err(|e| CliError::Property(e.to_string()))?;
        let required = bipsmc::monitor::required_horizon(&formula);
        // A swept DNS time bound moves the observation window with it.
        let horizon = match cfg.horizon {
            Some(h) if !(fixed_horizon && sweep.is_some()) => h,
            _ => default_horizon.max(required),
        };
        Ok(Instantiated {
            model,
            property_text,
            horizon,
        })
    }
}

fn from_bundle(
    b: Result<AttackModelBundle, bipsmc::attacks::AttackError>,
) -> Result<(CompoundModel, String, f64), CliError> {
    let b = b.map_err(|e| CliError::Config(e.to_string()))?;
    Ok((b.model, b.property_text, b.horizon))
}
