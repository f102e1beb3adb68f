use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use mlnhardy::schemes::{Profile, Schedule, SingularSource};
use mlnhardy::{Domain, Error, Result};

pub const COMMANDS: [&str; 7] = ["solve", "iterate", "constant", "scaling", "probe-solvability", "sweep", "verify"];

/// Right-hand side description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `|x|^{-β}` times an optional profile.
    Power {
        beta: f64,
        #[serde(default)]
        profile: Profile,
    },
    /// One value per interior node, last CSV column, header row skipped.
    Table { path: String },
}

fn one() -> f64 {
    1.0
}

impl SourceSpec {
    pub fn singular(&self) -> Option<SingularSource> {
        match *self {
            SourceSpec::Constant { value } => Some(SingularSource::constant(value)),
            SourceSpec::Power { beta, profile } => Some(SingularSource { beta, profile }),
            SourceSpec::Table { .. } => None,
        }
    }
}

/// Fully resolved experiment configuration; every default is filled in so
/// the report echoes exactly what ran.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub command: String,
    pub n: usize,
    pub s: f64,
    pub gamma: f64,
    pub domain: Domain,
    #[serde(rename = "N")]
    pub nodes_per_axis: usize,
    #[serde(rename = "L")]
    pub box_half_width: f64,
    pub ladder: Vec<usize>,
    pub f: SourceSpec,
    #[serde(rename = "K")]
    pub steps: usize,
    pub k_levels: Vec<f64>,
    pub schedule: Schedule,
    pub lambdas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub m: f64,
    pub p: f64,
    pub domains: Vec<Domain>,
    pub num_probes: usize,
    pub profile_sigma: f64,
    pub tol: f64,
    pub eigen_tol: f64,
    pub self_cell_correction: bool,
    pub boundary_fit: bool,
    pub seed: u64,
    pub output: Option<String>,
}

const KNOWN: [&str; 25] = [
    "command",
    "n",
    "s",
    "gamma",
    "domain",
    "N",
    "L",
    "ladder",
    "f",
    "K",
    "k_levels",
    "schedule",
    "lambdas",
    "gammas",
    "m",
    "p",
    "domains",
    "num_probes",
    "profile_sigma",
    "tol",
    "eigen_tol",
    "self_cell_correction",
    "boundary_fit",
    "seed",
    "output",
];

fn invalid(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

fn missing(field: &str, command: &str) -> Error {
    invalid(format!("missing field `{field}` (required by `{command}`)"))
}

fn take<T: for<'de> Deserialize<'de>>(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Option<T>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| invalid(format!("field `{key}`: {e}"))),
    }
}

impl Config {
    pub fn load(path: &Path, command: &str) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| invalid(format!("config is not valid JSON: {e}")))?;
        Self::resolve(&value, command)
    }

    pub fn resolve(value: &Value, command: &str) -> Result<Self> {
        let obj = value.as_object().ok_or_else(|| invalid("config must be a JSON object"))?;
        if let Some(key) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(invalid(format!("unknown field `{key}`")));
        }
        if let Some(c) = take::<String>(obj, "command")? {
            if c != command {
                return Err(invalid(format!("config is for `{c}` but `{command}` was requested")));
            }
        }
        let s: f64 = take(obj, "s")?.ok_or_else(|| missing("s", command))?;
        let n: usize = take(obj, "n")?.unwrap_or(3);
        let needs_gamma = matches!(command, "solve" | "iterate" | "probe-solvability");
        let gamma = match take::<f64>(obj, "gamma")? {
            Some(g) => g,
            None if needs_gamma => return Err(missing("gamma", command)),
            None => 0.0,
        };
        let domain: Domain = take(obj, "domain")?.unwrap_or_else(|| Domain::ball(n, 1.0));
        if domain.dim() != n {
            return Err(invalid(format!("domain has dimension {} but n = {n}", domain.dim())));
        }
        domain.validate()?;
        let box_half_width = take(obj, "L")?.unwrap_or(1.25 * domain.bounding_half_width());
        let gammas: Vec<f64> = match take(obj, "gammas")? {
            Some(g) => g,
            None if command == "sweep" => return Err(missing("gammas", command)),
            None => Vec::new(),
        };
        let config = Config {
            command: command.to_string(),
            n,
            s,
            gamma,
            domain,
            nodes_per_axis: take(obj, "N")?.unwrap_or(16),
            box_half_width,
            ladder: take(obj, "ladder")?.unwrap_or_else(|| vec![12, 16, 24]),
            f: take(obj, "f")?.unwrap_or(SourceSpec::Constant { value: 1.0 }),
            steps: take(obj, "K")?.unwrap_or(30),
            k_levels: take(obj, "k_levels")?.unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0]),
            schedule: take(obj, "schedule")?.unwrap_or_default(),
            lambdas: take(obj, "lambdas")?.unwrap_or_else(|| vec![1.0, 2.0, 4.0, 8.0, 16.0]),
            gammas,
            m: take(obj, "m")?.unwrap_or(1.3),
            p: take(obj, "p")?.unwrap_or(2.0),
            domains: take(obj, "domains")?.unwrap_or_else(|| vec![Domain::ball(n, 1.0), Domain::cube(n, 1.0)]),
            num_probes: take(obj, "num_probes")?.unwrap_or(20),
            profile_sigma: take(obj, "profile_sigma")?.unwrap_or(0.3),
            tol: take(obj, "tol")?.unwrap_or(1e-10),
            eigen_tol: take(obj, "eigen_tol")?.unwrap_or(1e-8),
            self_cell_correction: take(obj, "self_cell_correction")?.unwrap_or(true),
            boundary_fit: take(obj, "boundary_fit")?.unwrap_or(true),
            seed: take(obj, "seed")?.unwrap_or(0),
            output: take(obj, "output")?,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid(format!("s = {} must lie in (0, 1)", self.s)));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid(format!("gamma = {} must be non-negative", self.gamma)));
        }
        if !(self.tol > 0.0 && self.eigen_tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if self.command == "sweep" {
            let gm = mlnhardy::special::gamma_threshold(self.n, self.m)
                .ok_or_else(|| invalid(format!("γ(m) undefined for m = {}", self.m)))?;
            if let Some(g) = self.gammas.iter().find(|g| **g >= gm) {
                return Err(invalid(format!("gamma {g} is not below the threshold γ(m) = {gm} for m = {}", self.m)));
            }
        }
        if self.command == "constant" && self.domains.iter().any(|d| d.dim() != self.n) {
            return Err(invalid("every entry of `domains` must have dimension n"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_are_filled() {
        let c = Config::resolve(&json!({"s": 0.5, "gamma": 0.1}), "solve").unwrap();
        assert_eq!(c.nodes_per_axis, 16);
        assert_eq!(c.box_half_width, 1.25);
        assert_eq!(c.f, SourceSpec::Constant { value: 1.0 });
        let echoed = serde_json::to_value(&c).unwrap();
        assert_eq!(Config::resolve(&echoed, "solve").unwrap(), c);
    }

    #[test]
    fn missing_and_unknown_fields_are_named() {
        let e = Config::resolve(&json!({"gamma": 0.1}), "solve").unwrap_err();
        assert!(e.to_string().contains("`s`"));
        let e = Config::resolve(&json!({"s": 0.5}), "solve").unwrap_err();
        assert!(e.to_string().contains("`gamma`"));
        let e = Config::resolve(&json!({"s": 0.5, "gama": 0.1}), "constant").unwrap_err();
        assert!(e.to_string().contains("`gama`"));
    }

    #[test]
    fn sweep_threshold_is_checked() {
        let e = Config::resolve(&json!({"s": 0.5, "m": 1.3, "gammas": [0.1, 0.3]}), "sweep").unwrap_err();
        assert!(e.to_string().contains("γ(m)"));
    }

    #[test]
    fn source_specs_parse() {
        let f: SourceSpec = serde_json::from_value(json!({"kind": "power", "beta": 1.2})).unwrap();
        assert_eq!(f.singular().unwrap().beta, 1.2);
        let f: SourceSpec = serde_json::from_value(json!({"kind": "constant"})).unwrap();
        assert_eq!(f, SourceSpec::Constant { value: 1.0 });
    }
}
