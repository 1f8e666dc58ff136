//! Pipeline configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ista_core::aggregation::{DEFAULT_MIN_PAIR_COUNT, DEFAULT_RADIUS};
use ista_core::codebook::DEFAULT_CODEBOOK_SIZE;
use ista_core::normalize::{DEFAULT_ALPHA, DEFAULT_EPSILON};
use ista_core::reduce::DEFAULT_KEEP_RATIO;
use ista_core::NormalizationConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Vgg16,
    Mobilenet,
}

impl Backbone {
    pub fn default_variance_target(self) -> f64 {
        match self {
            Backbone::Vgg16 => 0.80,
            Backbone::Mobilenet => 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub codebook_size: usize,
    pub radius: usize,
    pub backbone: Backbone,
    /// Overrides the backbone's default when set.
    pub variance_target: Option<f64>,
    pub min_pair_count: u64,
    pub alpha: f64,
    pub keep_ratio: f64,
    pub final_dim: usize,
    pub whiten: bool,
    pub renorm: bool,
    pub seed: u64,
    pub kmeans_max_iters: usize,
    pub kmeans_sample_cap: usize,
    /// Fit the reductions on the training corpus when no held-out corpus is given.
    pub single_corpus: bool,
    pub paths: Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub work_dir: PathBuf,
    pub train_dir: Option<PathBuf>,
    pub fit_dir: Option<PathBuf>,
    pub database_dir: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            work_dir: PathBuf::from("work"),
            train_dir: None,
            fit_dir: None,
            database_dir: None,
            ground_truth: None,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            codebook_size: DEFAULT_CODEBOOK_SIZE,
            radius: DEFAULT_RADIUS,
            backbone: Backbone::Vgg16,
            variance_target: None,
            min_pair_count: DEFAULT_MIN_PAIR_COUNT,
            alpha: DEFAULT_ALPHA,
            keep_ratio: DEFAULT_KEEP_RATIO,
            final_dim: 512,
            whiten: true,
            renorm: true,
            seed: 0,
            kmeans_max_iters: 100,
            kmeans_sample_cap: 500_000,
            single_corpus: false,
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn variance_target(&self) -> f64 {
        self.variance_target
            .unwrap_or_else(|| self.backbone.default_variance_target())
    }

    pub fn normalization(&self) -> NormalizationConfig {
        NormalizationConfig {
            alpha: self.alpha,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Checks every parameter range; runs before any stage does work.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.codebook_size == 0 {
            return fail("codebook_size must be at least 1".into());
        }
        if self.radius == 0 {
            return fail("radius must be at least 1".into());
        }
        let v = self.variance_target();
        if !(v > 0.0 && v <= 1.0) {
            return fail(format!("variance_target must lie in (0, 1], got {v}"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.keep_ratio > 0.0 && self.keep_ratio <= 1.0) {
            return fail(format!("keep_ratio must lie in (0, 1], got {}", self.keep_ratio));
        }
        if self.final_dim == 0 {
            return fail("final_dim must be at least 1".into());
        }
        if self.kmeans_max_iters == 0 {
            return fail("kmeans_max_iters must be at least 1".into());
        }
        if self.kmeans_sample_cap < self.codebook_size {
            return fail(format!(
                "kmeans_sample_cap {} is below codebook_size {}",
                self.kmeans_sample_cap, self.codebook_size
            ));
        }
        Ok(())
    }

    /// Corpus used to fit the two reductions.
    pub fn reduction_fit_dir(&self) -> Result<PathBuf> {
        match (&self.paths.fit_dir, &self.paths.train_dir) {
            (Some(d), _) => Ok(d.clone()),
            (None, Some(t)) if self.single_corpus => Ok(t.clone()),
            _ => Err(Error::Config(
                "no paths.fit_dir given; set it or enable single_corpus".into(),
            )),
        }
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts {
            root: self.paths.work_dir.clone(),
        }
    }
}

/// Default locations of stage outputs under the work directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn codebook(&self) -> PathBuf {
        self.root.join("visual.codebook")
    }
    pub fn pair_stats(&self) -> PathBuf {
        self.root.join("train.pairstats")
    }
    pub fn pair_model(&self) -> PathBuf {
        self.root.join("basis.pairmodel")
    }
    pub fn reduction_model(&self) -> PathBuf {
        self.root.join("reduction.redmodel")
    }
    pub fn raw_dir(&self) -> PathBuf {
        self.root.join("raw")
    }
    pub fn reduced_dir(&self) -> PathBuf {
        self.root.join("reduced")
    }
    pub fn combined_dir(&self) -> PathBuf {
        self.root.join("combined")
    }
    pub fn index(&self) -> PathBuf {
        self.root.join("database.index")
    }
}
