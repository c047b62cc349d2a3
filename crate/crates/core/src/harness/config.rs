//! Declarative experiment configuration, read from TOML.
//!
//! Every table and key is optional; omitted keys take the defaults below.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! standardize_clip = 8.0
//!
//! [data]                      # synthetic unless an input directory is given
//! encoded_dir = "runs/encoded"
//! membership = "membership.csv"
//! supply_chain = "supply_chain.csv"
//! delimiter = ","
//!
//! [data.synthetic]            # SyntheticSpec
//! n_stocks = 30
//!
//! [buckets]
//! window = 600
//! anchors = [1800, 5400, 9000, 12600, 16200, 19800]
//!
//! [split]                     # fractions of trading days, or explicit dates
//! train_fraction = 0.61
//! val_fraction = 0.21
//! # val_start = "2021-02-24"
//! # test_start = "2021-03-15"
//!
//! [graph]
//! k_temporal = 2
//! k_cross = 2
//! similarity_features = ["quote_wap_mean_first_100", "quote_wap_mean_last_100"]
//! leak_free = true
//! sector_granularity = "sector"
//! max_sector_edges = 50000000
//!
//! [gtn]                       # GtnConfig, with [gtn.train]
//! [mlp]                       # MlpConfig, with [mlp.train]
//!
//! [har]
//! per_stock = false
//!
//! [[models]]
//! name = "GTN-VF"
//! kind = "gtn"                # naive | har | mlp | gtn
//! relations = ["temporal_fc", "cross_fc", "sector", "supply_chain"]
//!
//! [report]
//! liquidity_buckets = 50
//! degree_buckets = 10
//! models = ["Naive Guess", "GTN-VF"]
//! ```

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::synth::SyntheticSpec;
use crate::baselines::MlpConfig;
use crate::error::{Error, Result};
use crate::features::{feature_index, WAP_FIRST_100, WAP_LAST_100, FEATURE_NAMES};
use crate::graph::{Granularity, Relation};
use crate::lob::{io::TableFormat, BucketWindow, HOURLY_ANCHORS};
use crate::model::GtnConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub synthetic: SyntheticSpec,
    /// Raw event files, as written by `generate`.
    pub raw_dir: Option<PathBuf>,
    /// One-second sampled files.
    pub sampled_dir: Option<PathBuf>,
    /// Output of `encode`.
    pub encoded_dir: Option<PathBuf>,
    pub membership: Option<PathBuf>,
    pub supply_chain: Option<PathBuf>,
    pub delimiter: char,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            synthetic: SyntheticSpec::default(),
            raw_dir: None,
            sampled_dir: None,
            encoded_dir: None,
            membership: None,
            supply_chain: None,
            delimiter: ',',
        }
    }
}

impl DataConfig {
    pub fn format(&self) -> Result<TableFormat> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .map(|delimiter| TableFormat { delimiter })
            .ok_or_else(|| Error::Config(format!("delimiter {:?} is not a single ASCII byte", self.delimiter)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BucketConfig {
    /// Backward and forward window length in seconds.
    pub window: u32,
    pub anchors: Vec<u32>,
}

impl Default for BucketConfig {
    fn default() -> Self {
        Self {
            window: 600,
            anchors: HOURLY_ANCHORS.to_vec(),
        }
    }
}

impl BucketConfig {
    pub fn bucket_window(&self) -> BucketWindow {
        BucketWindow::symmetric(self.window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub val_start: Option<NaiveDate>,
    pub test_start: Option<NaiveDate>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.61,
            val_fraction: 0.21,
            val_start: None,
            test_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub k_temporal: usize,
    pub k_cross: usize,
    pub similarity_features: Vec<String>,
    /// Restrict similarity vectors and temporal candidates to training time.
    pub leak_free: bool,
    pub sector_granularity: Granularity,
    /// Sector granularities projected above this edge count are skipped.
    pub max_sector_edges: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            k_temporal: 2,
            k_cross: 2,
            similarity_features: vec![
                FEATURE_NAMES[WAP_FIRST_100].to_string(),
                FEATURE_NAMES[WAP_LAST_100].to_string(),
            ],
            leak_free: true,
            sector_granularity: Granularity::Sector,
            max_sector_edges: 50_000_000,
        }
    }
}

impl GraphConfig {
    pub fn feature_columns(&self) -> Result<Vec<usize>> {
        self.similarity_features
            .iter()
            .map(|n| feature_index(n).ok_or_else(|| Error::Config(format!("unknown feature {n:?}"))))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    Har,
    Mlp,
    Gtn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

impl ModelSpec {
    pub fn naive() -> Self {
        Self::new("Naive Guess", ModelKind::Naive, &[])
    }

    pub fn gtn(name: &str, relations: &[Relation]) -> Self {
        Self::new(name, ModelKind::Gtn, relations)
    }

    fn new(name: &str, kind: ModelKind, relations: &[Relation]) -> Self {
        Self {
            name: name.to_string(),
            kind,
            relations: relations.to_vec(),
        }
    }

    /// The rows of the comparison table: baselines, then GTN variants from
    /// no relations to all four.
    pub fn table_rows() -> Vec<ModelSpec> {
        use Relation::*;
        vec![
            Self::naive(),
            Self::new("HAR-RV", ModelKind::Har, &[]),
            Self::new("MLP", ModelKind::Mlp, &[]),
            Self::gtn("Vanilla GTN-VF", &[]),
            Self::gtn("GTN-VF Temp FC", &[TemporalFc]),
            Self::gtn("GTN-VF Cross FC", &[CrossFc]),
            Self::gtn("GTN-VF Cross FC + Temp FC", &[CrossFc, TemporalFc]),
            Self::gtn("GTN-VF Sector", &[Sector]),
            Self::gtn("GTN-VF Supply Chain", &[SupplyChain]),
            Self::gtn("GTN-VF", &Relation::ALL),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub liquidity_buckets: usize,
    pub degree_buckets: usize,
    /// Models compared in the liquidity and degree reports.
    pub models: Vec<String>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            liquidity_buckets: 50,
            degree_buckets: 10,
            models: vec!["Naive Guess".into(), "GTN-VF".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarConfig {
    /// One parameter set per stock instead of one global set.
    pub per_stock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub standardize_clip: f64,
    pub data: DataConfig,
    pub buckets: BucketConfig,
    pub split: SplitConfig,
    pub graph: GraphConfig,
    pub gtn: GtnConfig,
    pub mlp: MlpConfig,
    pub har: HarConfig,
    pub models: Vec<ModelSpec>,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0],
            standardize_clip: 8.0,
            data: DataConfig::default(),
            buckets: BucketConfig::default(),
            split: SplitConfig::default(),
            graph: GraphConfig::default(),
            gtn: GtnConfig::default(),
            mlp: MlpConfig::default(),
            har: HarConfig::default(),
            models: ModelSpec::table_rows(),
            report: ReportConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative data paths relative to the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let d = &mut self.data;
        for p in [
            &mut d.raw_dir,
            &mut d.sampled_dir,
            &mut d.encoded_dir,
            &mut d.membership,
            &mut d.supply_chain,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        crate::hashing::config_hash(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.buckets.bucket_window().validate(&self.buckets.anchors)?;
        self.gtn.validate()?;
        self.mlp.train.validate()?;
        self.data.format()?;
        self.graph.feature_columns()?;
        let s = &self.split;
        if !(s.train_fraction > 0.0 && s.val_fraction >= 0.0 && s.train_fraction + s.val_fraction < 1.0) {
            return Err(Error::Config("split fractions must leave room for a test period".into()));
        }
        if let (Some(v), Some(t)) = (s.val_start, s.test_start) {
            if v > t {
                return Err(Error::Config("val_start after test_start".into()));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.standardize_clip > 0.0) {
            return Err(Error::Config("standardize_clip must be positive".into()));
        }
        if self.report.liquidity_buckets == 0 || self.report.degree_buckets == 0 {
            return Err(Error::Config("report bucket counts must be positive".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return Err(Error::Config(format!("model name {:?} repeated", m.name)));
            }
            if m.kind != ModelKind::Gtn && !m.relations.is_empty() {
                return Err(Error::Config(format!("{} takes no relations", m.name)));
            }
        }
        Ok(())
    }
}
