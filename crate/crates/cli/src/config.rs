//! TOML configuration for `sessrec serve`.
//!
//! ```toml
//! bind = "127.0.0.1"
//! port = 8080
//! catalog = "objects.csv"
//!
//! [[edges]]
//! class = "K1"
//! path = "purchases.csv"
//!
//! [defaults]
//! k = 10
//! variant = "base"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::net::IpAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;
use sessrec_core::ingest::EdgeFileSpec;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub bind: Option<IpAddr>,
    pub port: Option<u16>,
    pub catalog: Option<PathBuf>,
    pub strict: Option<bool>,
    #[serde(default)]
    pub edges: Vec<EdgeEntry>,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub class: String,
    pub path: PathBuf,
    pub kernel_column: Option<String>,
    pub object_column: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Defaults {
    pub k: Option<usize>,
    pub variant: Option<String>,
    pub scope: Option<String>,
    pub weights: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for e in &mut cfg.edges {
            e.path = base.join(&e.path);
        }
        if let Some(c) = &mut cfg.catalog {
            *c = base.join(&*c);
        }
        Ok(cfg)
    }

    pub fn edge_specs(&self) -> Vec<EdgeFileSpec> {
        self.edges
            .iter()
            .map(|e| {
                let spec = EdgeFileSpec::new(&e.class, &e.path);
                let kcol = e.kernel_column.clone().unwrap_or(spec.kernel_column.clone());
                let ocol = e.object_column.clone().unwrap_or(spec.object_column.clone());
                spec.with_columns(kcol, ocol)
            })
            .collect()
    }
}
