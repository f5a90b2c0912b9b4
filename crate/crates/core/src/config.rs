//! Run configuration.
//!
//! One TOML file with a top-level `seed` and the sections `[cpit]`,
//! `[train]`, `[model]`, `[data]` and `[eval]`. Values resolve in order:
//! built-in defaults, the file, `CLEAR_<SECTION>_<KEY>` environment
//! variables (`CLEAR_SEED` for the top-level seed), then `section.key=value`
//! overrides from the command line. Unknown keys are rejected at every
//! stage and the result is range-checked.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::datagen::{Dataset, GenSpec};
use crate::error::{Error, Result};
use crate::eval::ExperimentPlan;
use crate::model::{CpitConfig, Method, MixSpace, TrainOptions};

pub const ENV_PREFIX: &str = "CLEAR_";
pub const SECTIONS: [&str; 5] = ["cpit", "train", "model", "data", "eval"];

/// Mixture hyperparameters; the seed comes from the run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CpitSection {
    pub eta: f64,
    pub gamma: f64,
    pub beta: f64,
    pub n_styles: usize,
    pub mix_space: MixSpace,
}

impl Default for CpitSection {
    fn default() -> Self {
        let c = CpitConfig::default();
        Self {
            eta: c.eta,
            gamma: c.gamma,
            beta: c.beta,
            n_styles: c.n_styles,
            mix_space: c.mix_space,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Side of the square input the classifier downsamples to.
    pub input_side: usize,
    /// 0 = multinomial logistic regression, otherwise one tanh hidden layer.
    pub hidden_dim: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            input_side: 16,
            hidden_dim: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Held-out domains by name or index; empty means every domain.
    pub hold_outs: Vec<String>,
    /// Predict with the marginalized mixture for mixture-trained methods.
    pub marginalize: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        let p = ExperimentPlan::default();
        Self {
            methods: p.methods,
            seeds: p.seeds,
            hold_outs: Vec::new(),
            marginalize: p.marginalize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    /// Seed for single runs (train, transform, predict, grad-check).
    pub seed: u64,
    pub cpit: CpitSection,
    pub train: TrainOptions,
    pub model: ModelSection,
    /// Synthetic generator settings, including its own seed.
    pub data: GenSpec,
    pub eval: EvalSection,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn cpit_config(&self, seed: u64) -> CpitConfig {
        CpitConfig {
            eta: self.cpit.eta,
            gamma: self.cpit.gamma,
            beta: self.cpit.beta,
            n_styles: self.cpit.n_styles,
            seed,
            mix_space: self.cpit.mix_space,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.cpit_config(self.seed).validate()?;
        self.train.validate()?;
        if self.model.input_side == 0 {
            return Err(Error::InvalidParameter(
                "model.input_side must be >= 1".into(),
            ));
        }
        self.data.validate()?;
        if self.eval.seeds.is_empty() {
            return Err(Error::InvalidParameter(
                "eval.seeds must not be empty".into(),
            ));
        }
        if self.eval.methods.is_empty() {
            return Err(Error::InvalidParameter(
                "eval.methods must not be empty".into(),
            ));
        }
        Ok(())
    }

    /// Set one value by dotted key (`train.epochs`, `seed`). The raw text is
    /// read with the type of the current value; lists accept either TOML
    /// array syntax or comma-separated items.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        // an empty list has no element type, so type against a one-item one
        let typed = Value::try_from(Config {
            eval: EvalSection {
                hold_outs: vec![String::new()],
                ..self.eval.clone()
            },
            ..self.clone()
        })
        .expect("config serializes");
        let parsed =
            coerce(raw, lookup(&typed, key)?).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        let mut root = Value::try_from(self.clone()).expect("config serializes");
        *lookup_mut(&mut root, key)? = parsed;
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    /// Apply every `CLEAR_*` variable. Names are `CLEAR_SEED` or
    /// `CLEAR_<SECTION>_<KEY>` with the key in upper case.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        vars.sort();
        for (name, value) in vars {
            self.set(&env_key(&name)?, &value)?;
        }
        Ok(())
    }

    /// Defaults, then the file, then the environment, then overrides.
    pub fn resolve<I>(file: Option<&Path>, env: I, overrides: &[(String, String)]) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut cfg = match file {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_env(env)?;
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Held-out domain indices for `ds`; every domain when none are named.
    pub fn hold_outs(&self, ds: &Dataset) -> Result<Vec<usize>> {
        if self.eval.hold_outs.is_empty() {
            return Ok((0..ds.num_domains()).collect());
        }
        self.eval
            .hold_outs
            .iter()
            .map(|h| ds.domain_index(h))
            .collect()
    }

    pub fn plan(&self, ds: &Dataset) -> Result<ExperimentPlan> {
        let plan = ExperimentPlan {
            hold_outs: self.hold_outs(ds)?,
            methods: self.eval.methods.clone(),
            seeds: self.eval.seeds.clone(),
            cpit: self.cpit_config(self.seed),
            train: self.train,
            input_side: self.model.input_side,
            hidden_dim: self.model.hidden_dim,
            marginalize: self.eval.marginalize,
        };
        plan.validate(ds)?;
        Ok(plan)
    }
}

/// `CLEAR_TRAIN_BATCH_SIZE` -> `train.batch_size`.
fn env_key(name: &str) -> Result<String> {
    let rest = name
        .strip_prefix(ENV_PREFIX)
        .unwrap_or(name)
        .to_ascii_lowercase();
    if rest == "seed" {
        return Ok(rest);
    }
    match rest.split_once('_') {
        Some((section, key)) if SECTIONS.contains(&section) && !key.is_empty() => Ok(format!("{section}.{key}")),
        _ => Err(Error::Config(format!(
            "unrecognized environment variable {name} (expected {ENV_PREFIX}SEED or {ENV_PREFIX}<SECTION>_<KEY>)"
        ))),
    }
}

fn lookup<'a>(root: &'a Value, key: &str) -> Result<&'a Value> {
    let mut v = root;
    for part in key.split('.') {
        v = v
            .get(part)
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
    }
    Ok(v)
}

fn lookup_mut<'a>(root: &'a mut Value, key: &str) -> Result<&'a mut Value> {
    let mut v = root;
    for part in key.split('.') {
        v = v
            .get_mut(part)
            .ok_or_else(|| Error::Config(format!("unknown config key {key:?}")))?;
    }
    Ok(v)
}

fn parse_toml_value(raw: &str) -> Option<Value> {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()?
        .remove("v")
}

/// Read `raw` as a value of the same kind as `like`.
fn coerce(raw: &str, like: &Value) -> std::result::Result<Value, String> {
    let raw = raw.trim();
    match like {
        Value::String(_) => Ok(match parse_toml_value(raw) {
            Some(Value::String(s)) => Value::String(s),
            _ => Value::String(raw.to_string()),
        }),
        Value::Array(items) => {
            if let Some(Value::Array(a)) = parse_toml_value(raw) {
                return Ok(Value::Array(a));
            }
            let elem = items
                .first()
                .cloned()
                .unwrap_or(Value::String(String::new()));
            raw.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| coerce(s, &elem))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Value::Array)
        }
        Value::Table(_) => Err("expected a single value, not a section".into()),
        _ => match parse_toml_value(raw) {
            // integers are accepted where floats are expected
            Some(Value::Integer(i)) if like.is_float() => Ok(Value::Float(i as f64)),
            Some(v) if v.type_str() == like.type_str() => Ok(v),
            _ => Err(format!("cannot read {raw:?} as {}", like.type_str())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = Config::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(Config::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(Config::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_toml_str("[train]\nepoch = 3\n").is_err());
        assert!(Config::from_toml_str("[trainer]\nepochs = 3\n").is_err());
        let mut cfg = Config::default();
        assert!(cfg.set("train.epoch", "3").is_err());
        assert!(cfg.set("nope", "3").is_err());
        assert!(cfg
            .apply_env([("CLEAR_BOGUS_X".to_string(), "1".to_string())])
            .is_err());
    }

    #[test]
    fn ranges_are_checked() {
        let bad = Config::from_toml_str("[cpit]\ngamma = 1.5\n").unwrap();
        assert!(bad.validate().is_err());
        let bad = Config::from_toml_str("[data]\nconfound_rho = -0.1\n").unwrap();
        assert!(bad.validate().is_err());
        let bad = Config::from_toml_str("[model]\ninput_side = 0\n").unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn typed_overrides() {
        let mut cfg = Config::default();
        cfg.set("train.epochs", "7").unwrap();
        cfg.set("cpit.beta", "0").unwrap();
        cfg.set("cpit.mix_space", "probs").unwrap();
        cfg.set("eval.methods", "baseline,clear_fourier_only")
            .unwrap();
        cfg.set("eval.seeds", "[4, 5]").unwrap();
        cfg.set("eval.hold_outs", "domain2,0").unwrap();
        cfg.set("seed", "9").unwrap();
        assert_eq!(cfg.train.epochs, 7);
        assert_eq!(cfg.cpit.beta, 0.0);
        assert_eq!(cfg.cpit.mix_space, MixSpace::Probs);
        assert_eq!(
            cfg.eval.methods,
            vec![Method::Baseline, Method::ClearFourierOnly]
        );
        assert_eq!(cfg.eval.seeds, vec![4, 5]);
        assert_eq!(cfg.eval.hold_outs, vec!["domain2", "0"]);
        assert_eq!(cfg.seed, 9);
        assert!(cfg.set("train.epochs", "many").is_err());
        assert!(cfg.set("cpit.mix_space", "features").is_err());
        assert!(cfg.set("eval.methods", "magic").is_err());
    }

    #[test]
    fn precedence_is_file_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 1\n[train]\nepochs = 2\nlr = 0.5\n[cpit]\nn_styles = 3\n",
        )
        .unwrap();
        let env = vec![
            ("CLEAR_TRAIN_EPOCHS".to_string(), "5".to_string()),
            ("CLEAR_CPIT_N_STYLES".to_string(), "6".to_string()),
            ("HOME".to_string(), "/x".to_string()),
        ];
        let flags = vec![("train.epochs".to_string(), "9".to_string())];
        let cfg = Config::resolve(Some(&path), env, &flags).unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.train.lr, 0.5);
        assert_eq!(cfg.cpit.n_styles, 6);
        assert_eq!(cfg.train.epochs, 9);
    }

    #[test]
    fn resolve_validates_the_result() {
        let flags = vec![("cpit.beta".to_string(), "1.0".to_string())];
        assert!(Config::resolve(None, Vec::new(), &flags).is_err());
    }

    #[test]
    fn env_names_map_to_keys() {
        assert_eq!(env_key("CLEAR_SEED").unwrap(), "seed");
        assert_eq!(
            env_key("CLEAR_TRAIN_BATCH_SIZE").unwrap(),
            "train.batch_size"
        );
        assert_eq!(
            env_key("CLEAR_DATA_CONFOUND_RHO").unwrap(),
            "data.confound_rho"
        );
        assert!(env_key("CLEAR_TRAIN").is_err());
    }
}
