//! Pipeline configuration: a TOML file with one section per module. Relative
//! paths are resolved against the directory of the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coordprop::measures::{default_grid, validate_grid, MeasureSpec};
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "COORDPROP_CONFIG";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub simnet: SimnetSection,
    pub communities: CommunitiesSection,
    pub propaganda: PropagandaSection,
    pub measures: MeasuresSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub tweets: Option<PathBuf>,
    pub articles: Option<PathBuf>,
    pub signals: Option<PathBuf>,
    pub lexicons: Vec<PathBuf>,
    /// Model to load; when absent or missing, one is trained from `training`.
    pub model: Option<PathBuf>,
    pub training: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            tweets: None,
            articles: None,
            signals: None,
            lexicons: Vec::new(),
            model: None,
            training: None,
            output: PathBuf::from("coordprop-out"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimnetSection {
    pub superspreader_fraction: f64,
    pub alpha: f64,
}

impl Default for SimnetSection {
    fn default() -> Self {
        SimnetSection {
            superspreader_fraction: 0.01,
            alpha: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunitiesSection {
    pub resolution: f64,
    pub seed: u64,
    /// Communities smaller than this are left out of trends and reports.
    pub min_size: usize,
    /// Display names keyed by numeric label, e.g. `"0" = "LAB"`.
    pub names: BTreeMap<String, String>,
}

impl Default for CommunitiesSection {
    fn default() -> Self {
        CommunitiesSection {
            resolution: 1.0,
            seed: 0,
            min_size: 10,
            names: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagandaSection {
    pub chunk_tokens: usize,
    pub lambda: f64,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for PropagandaSection {
    fn default() -> Self {
        PropagandaSection {
            chunk_tokens: coordprop::propaganda::DEFAULT_CHUNK_TOKENS,
            lambda: 1e-3,
            seed: 0,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasuresSection {
    /// Measure ids such as `tw-median-mean`; empty means all 24.
    pub measures: Vec<String>,
    /// Measure used for the correlation report and plots.
    pub primary: String,
    pub grid: Vec<f64>,
}

impl Default for MeasuresSection {
    fn default() -> Self {
        MeasuresSection {
            measures: Vec::new(),
            primary: MeasureSpec::tweet_median_mean().id,
            grid: default_grid(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: PipelineConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for opt in [
            &mut p.tweets,
            &mut p.articles,
            &mut p.signals,
            &mut p.model,
            &mut p.training,
        ] {
            if let Some(path) = opt.as_mut() {
                fix(path);
            }
        }
        p.lexicons.iter_mut().for_each(fix);
        fix(&mut p.output);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn measures(&self) -> Result<Vec<MeasureSpec>> {
        if self.measures.measures.is_empty() {
            return Ok(MeasureSpec::catalog());
        }
        self.measures
            .measures
            .iter()
            .map(|m| m.parse().map_err(anyhow::Error::from))
            .collect()
    }

    pub fn primary_measure(&self) -> Result<MeasureSpec> {
        Ok(self.measures.primary.parse()?)
    }

    /// Label-to-name map with numeric keys.
    pub fn community_names(&self) -> Result<BTreeMap<usize, String>> {
        self.communities
            .names
            .iter()
            .map(|(k, v)| {
                let label = k
                    .parse()
                    .with_context(|| format!("community name key {k:?} is not a numeric label"))?;
                Ok((label, v.clone()))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.simnet;
        if !(s.superspreader_fraction > 0.0 && s.superspreader_fraction <= 1.0) {
            bail!("simnet.superspreader_fraction must lie in (0, 1]");
        }
        if !(s.alpha > 0.0 && s.alpha < 1.0) {
            bail!("simnet.alpha must lie in (0, 1)");
        }
        if !(self.communities.resolution > 0.0) {
            bail!("communities.resolution must be positive");
        }
        if self.propaganda.chunk_tokens < coordprop::propaganda::MIN_CHUNK_TOKENS {
            bail!(
                "propaganda.chunk_tokens must be at least {}",
                coordprop::propaganda::MIN_CHUNK_TOKENS
            );
        }
        if !(self.propaganda.lambda >= 0.0) {
            bail!("propaganda.lambda must be non-negative");
        }
        validate_grid(&self.measures.grid)?;
        self.measures()?;
        self.primary_measure()?;
        self.community_names()?;
        Ok(())
    }
}
