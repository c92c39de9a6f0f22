//! Run configuration: TOML file first, then `EPOD_*` variables and flags on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coeff::{CoeffFamily, ForceFamily};
use crate::error::{Error, Result};
use crate::fem::DEFAULT_TOL;
use crate::mesh::Rect;
use crate::pod::{Truncation, DEFAULT_ENERGY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MaskChoice {
    Local,
    Global,
}

impl MaskChoice {
    pub fn rect(self) -> Rect {
        match self {
            MaskChoice::Local => Rect::d1(),
            MaskChoice::Global => Rect::unit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    /// Defaults to the force paired with `model`.
    pub force: Option<String>,
    pub n: usize,
    /// Snapshots behind the POD basis.
    pub samples: usize,
    /// Input/coefficient pairs for map and network training; defaults to `samples`.
    pub pairs: Option<usize>,
    /// Held-out realizations for evaluation subcommands.
    pub tests: usize,
    pub seed: u64,
    /// Fixed truncation; overrides `energy` when set.
    pub k: Option<usize>,
    pub energy: f64,
    pub mask: MaskChoice,
    pub subtract_mean: bool,
    pub tol: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "ex1".into(),
            force: None,
            n: 64,
            samples: 200,
            pairs: None,
            tests: 50,
            seed: 1,
            k: None,
            energy: DEFAULT_ENERGY,
            mask: MaskChoice::Local,
            subtract_mean: false,
            tol: DEFAULT_TOL,
            out: PathBuf::from("out"),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn family(&self) -> Result<CoeffFamily> {
        CoeffFamily::parse(&self.model, self.n)
    }

    pub fn force(&self) -> Result<ForceFamily> {
        match &self.force {
            Some(id) => id.parse(),
            None => Ok(self.family()?.default_force()),
        }
    }

    pub fn truncation(&self) -> Truncation {
        match self.k {
            Some(k) => Truncation::Fixed(k),
            None => Truncation::Energy(self.energy),
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.unwrap_or(self.samples).max(self.samples)
    }

    /// Seed of the held-out realizations, disjoint from the training streams.
    pub fn test_seed(&self) -> u64 {
        self.seed.wrapping_add(0x7e57)
    }
}
