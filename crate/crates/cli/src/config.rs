//! Optional `key = value` settings file.
//!
//! Every command-line flag has a key of the same name with dashes replaced
//! by underscores. Flags given on the command line win. Relative paths are
//! resolved against the directory holding the settings file.
//!
//! ```toml
//! returns = "returns.csv"
//! audits = "audits.csv"
//! pool = "Cavlan,Powers,WriteIns"
//! sampling = "wr:78"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub returns: Option<PathBuf>,
    pub audits: Option<PathBuf>,
    pub counties: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub votes_per_voter: Option<usize>,
    pub pool: Option<String>,
    pub pooled_id: Option<String>,
    pub weight: Option<String>,
    pub sampling: Option<String>,
    pub effective_n: Option<usize>,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub taint: Option<usize>,
    pub population: Option<usize>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut settings = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut settings.returns,
            &mut settings.audits,
            &mut settings.counties,
            &mut settings.output,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(settings)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
