//! TOML run configuration for linking two CSV files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MissingMarkers, PivSpec, DEFAULT_MISTAKE_BOUND};
use crate::posterior::PosteriorConfig;
use crate::stem::StemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivBlock {
    pub name: String,
    #[serde(default = "yes")]
    pub stable: bool,
    #[serde(default)]
    pub soundex: bool,
    /// Defaults to 0.10 for stable PIVs and 0 for unstable ones.
    #[serde(default)]
    pub mistake_bound: Option<f64>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StemBlock {
    pub v0: usize,
    pub v1: usize,
    pub z0: usize,
    pub z1: usize,
}

impl Default for StemBlock {
    fn default() -> Self {
        let d = StemConfig::default();
        StemBlock {
            v0: d.v0,
            v1: d.v1,
            z0: d.z0,
            z1: d.z1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorBlock {
    pub n_sim: usize,
    pub z0: usize,
    pub chains: usize,
}

impl Default for PosteriorBlock {
    fn default() -> Self {
        let d = PosteriorConfig::default();
        PosteriorBlock {
            n_sim: d.n_sim,
            z0: d.z0,
            chains: d.chains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub file_a: PathBuf,
    pub file_b: PathBuf,
    #[serde(default)]
    pub time_column: Option<String>,
    #[serde(default = "default_markers")]
    pub missing_markers: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "piv")]
    pub pivs: Vec<PivBlock>,
    #[serde(default)]
    pub stem: StemBlock,
    #[serde(default)]
    pub posterior: PosteriorBlock,
}

fn default_markers() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

impl LinkConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: LinkConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative data paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.file_a, &mut cfg.file_b] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pivs.is_empty() {
            return Err(Error::Config("no [[piv]] block declared".into()));
        }
        for p in &self.pivs {
            if let Some(b) = p.mistake_bound {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::Config(format!("mistake_bound of '{}' outside [0,1]", p.name)));
                }
            }
        }
        if self.time_column.is_none() {
            if let Some(p) = self.pivs.iter().find(|p| !p.stable) {
                return Err(Error::Config(format!(
                    "PIV '{}' is unstable but no time_column is configured",
                    p.name
                )));
            }
        }
        if self.stem.v1 == 0 || self.stem.z1 == 0 || self.posterior.n_sim == 0 || self.posterior.chains == 0 {
            return Err(Error::Config("v1, z1, n_sim and chains must be at least 1".into()));
        }
        Ok(())
    }

    /// PIV declarations with placeholder support sizes, resolved during encoding.
    pub fn piv_specs(&self) -> Vec<PivSpec> {
        self.pivs
            .iter()
            .map(|p| {
                let default = if p.stable { DEFAULT_MISTAKE_BOUND } else { 0.0 };
                PivSpec {
                    name: p.name.clone(),
                    support_size: 1,
                    stable: p.stable,
                    mistake_bound: p.mistake_bound.unwrap_or(default),
                    soundex_encoded: p.soundex,
                }
            })
            .collect()
    }

    pub fn missing(&self) -> MissingMarkers {
        MissingMarkers::new(&self.missing_markers)
    }

    pub fn stem_config(&self) -> StemConfig {
        StemConfig {
            v0: self.stem.v0,
            v1: self.stem.v1,
            z0: self.stem.z0,
            z1: self.stem.z1,
            seed: self.seed,
            ..StemConfig::default()
        }
    }

    pub fn posterior_config(&self) -> PosteriorConfig {
        PosteriorConfig {
            n_sim: self.posterior.n_sim,
            z0: self.posterior.z0,
            seed: crate::rng::derive(self.seed, &[crate::rng::purpose::POSTERIOR]),
            chains: self.posterior.chains,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
file_a = "a.csv"
file_b = "b.csv"
time_column = "t"
seed = 3

[[piv]]
name = "sex"

[[piv]]
name = "surname"
soundex = true
mistake_bound = 0.2

[[piv]]
name = "town"
stable = false

[stem]
v0 = 2
"#;

    #[test]
    fn parses_blocks_and_defaults() {
        let c = LinkConfig::parse(BASIC).unwrap();
        let specs = c.piv_specs();
        assert_eq!(specs.len(), 3);
        assert_eq!(specs[0].mistake_bound, 0.10);
        assert!(specs[1].soundex_encoded);
        assert_eq!(specs[1].mistake_bound, 0.2);
        assert!(!specs[2].stable);
        assert_eq!(specs[2].mistake_bound, 0.0);
        assert_eq!(c.stem.v0, 2);
        assert_eq!(c.stem.v1, 25);
        assert_eq!(c.posterior.n_sim, 1000);
        assert_eq!(c.missing_markers, vec!["", "NA"]);
    }

    #[test]
    fn unstable_without_times_names_the_piv() {
        let text = BASIC.replace("time_column = \"t\"\n", "");
        let e = LinkConfig::parse(&text).unwrap_err();
        assert!(matches!(&e, Error::Config(m) if m.contains("town")), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{BASIC}\n[posterior]\nbogus = 1\n");
        assert!(matches!(LinkConfig::parse(&text), Err(Error::Config(_))));
    }
}
