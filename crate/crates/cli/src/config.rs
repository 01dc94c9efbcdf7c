//! Pipeline configuration: profile defaults overlaid with a TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::ValueEnum;
use forge_core::diffusion::{EdmConfig, NetworkConfig, TrainConfig};
use forge_core::wavelet::WaveletFilter;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Profile {
    /// 64³ grids, 16 shapes, d = 16, 2000 steps, 3×256 network.
    #[default]
    Desk,
    /// 256³ grids, 1000 shapes, d = 512, 100k steps, 4×1024 network.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub encode: EncodeConfig,
    pub cluster: ClusterConfig,
    pub edm: EdmSection,
    pub network: NetworkSection,
    pub train: TrainSection,
    pub generate: GenerateSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory of OBJ meshes; mesh ids are file stems.
    pub corpus: PathBuf,
    pub workspace: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeConfig {
    pub resolution: usize,
    pub padding: usize,
    pub filter: String,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    pub n_clusters: usize,
    pub points_per_shape: usize,
    pub eigenpairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdmSection {
    pub p_mean: f64,
    pub p_std: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub sampling_steps: usize,
    /// Estimated from the training features when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_data: Option<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub hidden_layers: usize,
    pub width: usize,
    pub embedding: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ema_decay: f64,
    pub checkpoint_every: u64,
    pub with_replacement: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub points_per_shape: usize,
    pub jsd_resolution: usize,
}

impl PipelineConfig {
    pub fn profile(profile: Profile) -> Self {
        let edm = EdmConfig::default();
        let (resolution, n_clusters, d, steps, network) = match profile {
            Profile::Desk => (64, 16, 16, 2000, NetworkConfig::desk()),
            Profile::Paper => (256, 1000, 512, 100_000, NetworkConfig::default()),
        };
        PipelineConfig {
            seed: 0,
            paths: PathsConfig {
                corpus: PathBuf::from("corpus"),
                workspace: PathBuf::from("workspace"),
            },
            encode: EncodeConfig {
                resolution,
                padding: forge_core::geometry::DEFAULT_PADDING_CELLS,
                filter: "coif1".into(),
                d,
            },
            cluster: ClusterConfig {
                n_clusters,
                points_per_shape: forge_core::metrics::DEFAULT_POINTS_PER_SHAPE,
                eigenpairs: forge_core::clustering::DEFAULT_EIGENPAIRS,
            },
            edm: EdmSection {
                p_mean: edm.p_mean,
                p_std: edm.p_std,
                sigma_min: edm.sigma_min,
                sigma_max: edm.sigma_max,
                rho: edm.rho,
                sampling_steps: edm.steps,
                sigma_data: None,
                lambda: edm.lambda,
            },
            network: NetworkSection {
                hidden_layers: network.hidden_layers,
                width: network.width,
                embedding: network.embedding,
            },
            train: TrainSection {
                steps,
                batch_size: 32,
                learning_rate: 5e-4,
                ema_decay: 0.999,
                checkpoint_every: (steps / 4).max(1),
                with_replacement: false,
            },
            generate: GenerateSection { count: 16 },
            evaluate: EvaluateSection {
                points_per_shape: forge_core::metrics::DEFAULT_POINTS_PER_SHAPE,
                jsd_resolution: forge_core::metrics::DEFAULT_JSD_RESOLUTION,
            },
        }
    }

    /// Parses `text` over the profile defaults. Relative paths resolve against `base_dir`.
    pub fn parse(text: &str, profile: Profile, base_dir: &Path) -> Result<Self> {
        let user: toml::Table = toml::from_str(&quote_bare_values(text)).map_err(|e| UsageError(format!("invalid config: {e}")))?;
        let mut merged = toml::Table::try_from(Self::profile(profile)).context("serializing profile defaults")?;
        merge(&mut merged, user);
        let mut cfg: PipelineConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| UsageError(format!("invalid config: {e}")))?;
        for p in [&mut cfg.paths.corpus, &mut cfg.paths.workspace] {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        }
        cfg.validate().map_err(|e| UsageError(format!("invalid config: {e:#}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, profile: Profile) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, profile, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.encode;
        let filter = WaveletFilter::by_name(&e.filter)?;
        ensure!(
            e.resolution > 2 * e.padding + 1 && e.resolution >= filter.len(),
            "resolution {} too small for padding {} and filter {}",
            e.resolution,
            e.padding,
            e.filter
        );
        ensure!(e.d >= 1, "encode.d must be at least 1");
        ensure!(self.cluster.n_clusters >= 1, "cluster.n_clusters must be at least 1");
        ensure!(self.cluster.points_per_shape >= 1 && self.evaluate.points_per_shape >= 1, "points_per_shape must be positive");
        ensure!(self.cluster.eigenpairs >= 1, "cluster.eigenpairs must be positive");
        ensure!(self.evaluate.jsd_resolution >= 1, "evaluate.jsd_resolution must be positive");
        self.edm_config(self.edm.sigma_data.unwrap_or(1.0))?.validate()?;
        self.network_config().validate()?;
        let t = &self.train;
        ensure!(t.batch_size >= 1, "train.batch_size must be positive");
        ensure!(t.learning_rate > 0.0 && t.learning_rate.is_finite(), "train.learning_rate must be positive");
        ensure!((0.0..1.0).contains(&t.ema_decay), "train.ema_decay must lie in [0, 1)");
        Ok(())
    }

    pub fn filter(&self) -> Result<WaveletFilter> {
        Ok(WaveletFilter::by_name(&self.encode.filter)?)
    }

    pub fn edm_config(&self, sigma_data: f64) -> Result<EdmConfig> {
        let e = &self.edm;
        Ok(EdmConfig {
            p_mean: e.p_mean,
            p_std: e.p_std,
            sigma_min: e.sigma_min,
            sigma_max: e.sigma_max,
            rho: e.rho,
            steps: e.sampling_steps,
            sigma_data,
            lambda: e.lambda,
        })
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            hidden_layers: self.network.hidden_layers,
            width: self.network.width,
            embedding: self.network.embedding,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            steps: t.steps,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            seed: self.seed,
            ema_decay: t.ema_decay,
            with_replacement: t.with_replacement,
            checkpoint_every: t.checkpoint_every,
        }
    }
}

/// Quotes `key = value` right-hand sides that are not valid TOML values, so
/// bare strings such as `filter = coif1` are accepted.
fn quote_bare_values(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        let trimmed = line.trim_start();
        match line.split_once('=') {
            Some((key, value)) if !trimmed.starts_with('#') && !trimmed.starts_with('[') => {
                let (value, comment) = match value.find(" #") {
                    Some(i) => value.split_at(i),
                    None => (value, ""),
                };
                let value = value.trim();
                if toml::from_str::<toml::Table>(&format!("v = {value}")).is_ok() {
                    out.push_str(line);
                } else {
                    let escaped = value.replace('\\', "\\\\").replace('"', "\\\"");
                    out.push_str(&format!("{} = \"{escaped}\"{comment}", key.trim_end()));
                }
            }
            _ => out.push_str(line),
        }
        out.push('\n');
    }
    out
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_override_profile() {
        let cfg = PipelineConfig::parse("seed = 9\n[encode]\nd = 4\n", Profile::Desk, Path::new("/data")).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.encode.d, 4);
        assert_eq!(cfg.encode.resolution, 64);
        assert_eq!(cfg.paths.corpus, PathBuf::from("/data/corpus"));
    }

    #[test]
    fn bare_strings_and_comments_are_accepted() {
        let text = "# desk run\n[encode]\nfilter = haar  # cheaper\n[paths]\ncorpus = shapes/obj\n";
        let cfg = PipelineConfig::parse(text, Profile::Desk, Path::new("/d")).unwrap();
        assert_eq!(cfg.encode.filter, "haar");
        assert_eq!(cfg.paths.corpus, PathBuf::from("/d/shapes/obj"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::parse("[encode]\nresolutoin = 3\n", Profile::Desk, Path::new(".")).is_err());
        assert!(PipelineConfig::parse("bogus = 1\n", Profile::Desk, Path::new(".")).is_err());
    }

    #[test]
    fn emit_then_parse_is_identity() {
        for profile in [Profile::Desk, Profile::Paper] {
            let mut cfg = PipelineConfig::profile(profile);
            cfg.paths.corpus = PathBuf::from("/abs/corpus");
            cfg.paths.workspace = PathBuf::from("/abs/ws");
            cfg.edm.sigma_data = Some(1.25);
            let text = cfg.to_toml().unwrap();
            assert_eq!(PipelineConfig::parse(&text, Profile::Desk, Path::new("/x")).unwrap(), cfg);
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(PipelineConfig::parse("[encode]\nfilter = \"db9\"\n", Profile::Desk, Path::new(".")).is_err());
        assert!(PipelineConfig::parse("[edm]\nlambda = 2.0\n", Profile::Desk, Path::new(".")).is_err());
        assert!(PipelineConfig::parse("[train]\nbatch_size = 0\n", Profile::Desk, Path::new(".")).is_err());
    }
}
