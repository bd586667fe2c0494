use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkConfig, TrainConfig};
use crate::pooling::IPConfig;
use crate::selection::SelectionConfig;
use crate::skeleton::{parse_edge_table, KeypointLayout};
use crate::transform::PartitionMap;

/// Data table locations. `SKELET_EDGES` and `SKELET_PARTITIONS`
/// (comma-separated) override the file values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Edge table replacing the layout's bundled edges.
    pub edges: Option<PathBuf>,
    /// One partition table per downsample block; bundled tables when empty.
    pub partitions: Vec<PathBuf>,
}

/// Complete run configuration, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub layout: String,
    pub skelet: bool,
    pub seed: Option<u64>,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub ip: IPConfig,
    pub selection: SelectionConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            layout: "expressive".into(),
            skelet: true,
            seed: None,
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            ip: IPConfig::default(),
            selection: SelectionConfig::default(),
            paths: Paths::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::config(e.to_string().trim_end().to_string()))?;
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn apply_env(&mut self) {
        if let Ok(v) = std::env::var("SKELET_EDGES") {
            self.paths.edges = Some(v.into());
        }
        if let Ok(v) = std::env::var("SKELET_PARTITIONS") {
            self.paths.partitions = v.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect();
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.train.validate()?;
        self.ip.validate()?;
        self.selection.validate()?;
        if KeypointLayout::by_id(&self.layout).is_none() {
            return Err(Error::config(format!("unknown layout '{}'", self.layout)));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serialisable")
    }

    /// The configured layout with any edge-table override applied.
    pub fn load_layout(&self) -> Result<KeypointLayout> {
        let layout = KeypointLayout::by_id(&self.layout)
            .ok_or_else(|| Error::config(format!("unknown layout '{}'", self.layout)))?;
        match &self.paths.edges {
            Some(p) => layout.with_edges(parse_edge_table(&read_text(p)?)?),
            None => Ok(layout),
        }
    }

    /// Partition tables for the downsample chain.
    pub fn load_partitions(&self) -> Result<Vec<PartitionMap>> {
        if self.paths.partitions.is_empty() {
            return Ok(vec![
                PartitionMap::expressive_65_to_27(),
                PartitionMap::coarse_27_to_11(),
            ]);
        }
        self.paths
            .partitions
            .iter()
            .zip(&self.network.joints)
            .map(|(p, &source)| PartitionMap::parse(&read_text(p)?, source))
            .collect()
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
