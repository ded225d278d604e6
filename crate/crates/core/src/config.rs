//! Run configuration, read from TOML.
//!
//! Every section is optional and falls back to its defaults. Unknown keys are
//! errors. Nested `seed` keys are overwritten by seeds derived from the
//! top-level `seed`, so one number determines every stage.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::moea::{EAConfig, Engine};
use crate::nn::TrainConfig;
use crate::phase2::{AnchorRule, ImportanceInitConfig};
use crate::rng::derive_seed;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub classes: usize,
    pub dim: usize,
    /// Total points, split evenly across classes.
    pub points: usize,
    pub spread: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    /// Rows per class in the subset used for fitness during search.
    pub opt_per_class: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            classes: 4,
            dim: 8,
            points: 1000,
            spread: 1.0,
            train_fraction: 0.7,
            val_fraction: 0.1,
            opt_per_class: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    /// Layer widths from input to output.
    pub widths: Vec<usize>,
    /// Whether the first layer takes part in pruning.
    pub first_layer_prunable: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            widths: vec![8, 32, 48, 128, 96, 4],
            first_layer_prunable: false,
        }
    }
}

/// Subset that drives fitness during search. Final fronts are always
/// re-scored on the validation subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchSubset {
    #[default]
    Opt,
    Val,
}

impl SearchSubset {
    /// File stem of the subset inside the data directory.
    pub fn name(self) -> &'static str {
        match self {
            SearchSubset::Opt => "opt",
            SearchSubset::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1Config {
    pub engine: Engine,
    pub search_subset: SearchSubset,
    pub ea: EAConfig,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Phase1Config {
            engine: Engine::Nsga2,
            search_subset: SearchSubset::Opt,
            ea: EAConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase2Config {
    pub engine: Engine,
    pub search_subset: SearchSubset,
    /// Number of equal-width nonzero-count bins between the anchors.
    pub bins: usize,
    /// Missing keys fall back to the binary defaults, not the real-coded ones.
    #[serde(deserialize_with = "binary_ea")]
    pub ea: EAConfig,
}

fn binary_ea<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<EAConfig, D::Error> {
    use serde::de::Error as _;
    let given = toml::Table::deserialize(d)?;
    let mut table = toml::Table::try_from(EAConfig::binary()).map_err(D::Error::custom)?;
    table.extend(given);
    table.try_into().map_err(D::Error::custom)
}

impl Default for Phase2Config {
    fn default() -> Self {
        Phase2Config {
            engine: Engine::Nsga2,
            search_subset: SearchSubset::Opt,
            bins: 5,
            ea: EAConfig::binary(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub seed: u64,
    pub data: DataConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub phase1: Phase1Config,
    pub phase2: Phase2Config,
    pub importance: ImportanceInitConfig,
    pub anchors: AnchorRule,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_VERSION,
            seed: 0,
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            phase1: Phase1Config::default(),
            phase2: Phase2Config::default(),
            importance: ImportanceInitConfig::default(),
            anchors: AnchorRule::default(),
        }
    }
}

/// Per-stage seeds derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub data: u64,
    pub split: u64,
    pub init: u64,
    pub train: u64,
    pub phase1: u64,
    pub phase2: u64,
    pub importance: u64,
}

impl StageSeeds {
    pub fn from_master(seed: u64) -> StageSeeds {
        let s = |k: u64| derive_seed(seed, &[k]);
        StageSeeds {
            data: s(1),
            split: s(2),
            init: s(3),
            train: s(4),
            phase1: s(5),
            phase2: s(6),
            importance: s(7),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds::from_master(self.seed)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.data.train_fraction,
            val_fraction: self.data.val_fraction,
            opt_per_class: self.data.opt_per_class,
            seed: self.seeds().split,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seeds().train,
            ..self.train.clone()
        }
    }

    pub fn phase1_ea(&self) -> EAConfig {
        EAConfig {
            seed: self.seeds().phase1,
            ..self.phase1.ea.clone()
        }
    }

    pub fn phase2_ea(&self) -> EAConfig {
        EAConfig {
            seed: self.seeds().phase2,
            ..self.phase2.ea.clone()
        }
    }

    pub fn importance_config(&self) -> ImportanceInitConfig {
        ImportanceInitConfig {
            seed: self.seeds().importance,
            ..self.importance.clone()
        }
    }

    pub fn per_class(&self) -> usize {
        self.data.points / self.data.classes.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::Config(msg));
        if self.version != CONFIG_VERSION {
            return cfg_err(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            ));
        }
        let d = &self.data;
        if d.classes < 2 || d.dim < 2 || !d.points.is_multiple_of(d.classes) {
            return cfg_err(format!(
                "data needs >= 2 classes, dim >= 2 and points divisible by classes (got {} / {} / {})",
                d.classes, d.dim, d.points
            ));
        }
        if !(d.spread >= 0.0) {
            return cfg_err("data.spread must be >= 0".into());
        }
        let fractions_ok = d.train_fraction > 0.0 && d.val_fraction > 0.0 && d.train_fraction + d.val_fraction <= 1.0;
        if !fractions_ok {
            return cfg_err("data fractions must be positive and sum to at most 1".into());
        }
        let w = &self.network.widths;
        if w.len() < 3 || w.first() != Some(&d.dim) || w.last() != Some(&d.classes) {
            return cfg_err(format!(
                "network.widths must have >= 3 entries starting at data.dim = {} and ending at data.classes = {}",
                d.dim, d.classes
            ));
        }
        let stage = |name: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::Config(m) | Error::InvalidSpec(m) => Error::Config(format!("{name}: {m}")),
                other => other,
            })
        };
        stage("train", self.train.validate())?;
        stage("phase1.ea", self.phase1.ea.validate())?;
        stage("phase2.ea", self.phase2.ea.validate())?;
        stage("importance", self.importance.validate())?;
        if self.phase2.bins == 0 || !self.phase2.ea.population.is_multiple_of(self.phase2.bins) {
            return cfg_err(format!(
                "phase2.ea.population ({}) must be a multiple of phase2.bins ({})",
                self.phase2.ea.population, self.phase2.bins
            ));
        }
        for (name, ea, engine) in [
            ("phase1", &self.phase1.ea, self.phase1.engine),
            ("phase2", &self.phase2.ea, self.phase2.engine),
        ] {
            if engine == Engine::Moead && !(2..=ea.population).contains(&ea.moead_neighbors) {
                return cfg_err(format!("{name}.ea.moead_neighbors must be in [2, population]"));
            }
        }
        if let AnchorRule::Tolerance { delta_acc, delta_loss } = self.anchors {
            if !(delta_acc >= 0.0 && delta_loss >= 0.0) {
                return cfg_err("anchor tolerances must be >= 0".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!((c.phase1.ea.population, c.phase1.ea.generations), (50, 50));
        assert_eq!((c.phase1.ea.crossover_prob, c.phase1.ea.sbx_eta), (0.9, 15.0));
        assert_eq!((c.phase1.ea.mutation_prob, c.phase1.ea.poly_eta), (0.2, 20.0));
        assert_eq!((c.phase2.ea.crossover_prob, c.phase2.ea.mutation_prob), (0.9, 0.05));
        assert_eq!((c.phase2.ea.moead_neighbors, c.phase2.ea.moead_mating_prob), (15, 0.9));
        assert_eq!(c.train.learning_rate, 1e-4);
        let prunable: usize = c.network.widths.windows(2).skip(1).map(|w| w[0] * w[1]).sum();
        assert!((19_000..=22_000).contains(&prunable), "{prunable}");
    }

    #[test]
    fn empty_file_gives_defaults_and_round_trips() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
        let c = RunConfig {
            seed: 5,
            anchors: AnchorRule::Manual { heavy: 0, light: 3 },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_bad_version_and_engine() {
        for text in [
            "sed = 1",
            "[phase1.ea]\npopulaton = 10",
            "version = 2",
            "[phase2]\nengine = \"spea2\"",
            "[phase2]\nbins = 7",
            "[network]\nwidths = [8, 4]",
        ] {
            assert!(matches!(RunConfig::from_toml(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn parses_sections() {
        let c = RunConfig::from_toml(
            "seed = 3\n[phase2]\nengine = \"moead\"\n[phase2.ea]\ngenerations = 7\n[anchors.manual]\nheavy = 2\nlight = 0\n",
        )
        .unwrap();
        assert_eq!(c.phase2.engine, Engine::Moead);
        assert_eq!(c.phase2.ea.generations, 7);
        assert_eq!(c.phase2.ea.mutation_prob, 0.05);
        assert_eq!(c.anchors, AnchorRule::Manual { heavy: 2, light: 0 });
    }

    #[test]
    fn search_subset_and_mutation_scope_parse() {
        let c = RunConfig::from_toml(
            "[phase1]\nsearch_subset = \"val\"\n[phase2.ea]\nmutation_scope = \"per-individual\"\n",
        )
        .unwrap();
        assert_eq!(c.phase1.search_subset, SearchSubset::Val);
        assert_eq!(c.phase2.search_subset, SearchSubset::Opt);
        assert_eq!(c.phase2.ea.mutation_scope, crate::moea::MutationScope::PerIndividual);
        assert!(RunConfig::from_toml("[phase1]\nsearch_subset = \"test\"\n").is_err());
    }

    #[test]
    fn stage_seeds_are_distinct_and_stable() {
        let s = StageSeeds::from_master(42);
        let all = [s.data, s.split, s.init, s.train, s.phase1, s.phase2, s.importance];
        let mut sorted = all.to_vec();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), all.len());
        assert_eq!(s, StageSeeds::from_master(42));
    }

    #[test]
    fn missing_file_is_config_error() {
        assert!(matches!(
            RunConfig::load(Path::new("/nonexistent/run.toml")),
            Err(Error::Config(_))
        ));
    }
}
