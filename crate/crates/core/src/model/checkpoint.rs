use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stain::LabStats;

use super::classifier::Classifier;
use super::CpitConfig;

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT: &str = "clear-classifier";

/// Training method; fixes how a model is trained and how it predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Stainnorm,
    Clear,
    ClearStainOnly,
    ClearFourierOnly,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Baseline,
        Method::Stainnorm,
        Method::Clear,
        Method::ClearStainOnly,
        Method::ClearFourierOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Stainnorm => "stainnorm",
            Method::Clear => "clear",
            Method::ClearStainOnly => "clear_stain_only",
            Method::ClearFourierOnly => "clear_fourier_only",
        }
    }

    /// The mixture configuration this method trains with, or `None` for
    /// plain cross-entropy.
    pub fn cpit_config(self, base: &CpitConfig) -> Option<CpitConfig> {
        match self {
            Method::Baseline | Method::Stainnorm => None,
            Method::Clear => Some(*base),
            Method::ClearStainOnly => Some(CpitConfig {
                gamma: 0.0,
                ..*base
            }),
            Method::ClearFourierOnly => Some(CpitConfig {
                gamma: 1.0,
                ..*base
            }),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidParameter(format!(
                    "unknown method {s:?} (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// A trained classifier with everything needed to reproduce its predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub method: Method,
    pub cpit: CpitConfig,
    /// Reference statistics for `stainnorm`.
    pub reference: Option<LabStats>,
    pub classifier: Classifier,
}

impl Checkpoint {
    pub fn new(
        method: Method,
        cpit: CpitConfig,
        reference: Option<LabStats>,
        classifier: Classifier,
    ) -> Self {
        Self {
            format: FORMAT.into(),
            version: CHECKPOINT_VERSION,
            method,
            cpit,
            reference,
            classifier,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        if header.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "not a checkpoint (format {:?})",
                header.format
            )));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "version {} not supported (expected {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    std::fs::write(path, ckpt.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_json(&std::fs::read_to_string(path)?)
}
