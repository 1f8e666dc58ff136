//! Synthetic descriptor corpora with planted spatial structure.
//!
//! Descriptors are drawn from `depth / 2` groups, each with two sign
//! variants `e_g ± β·e_{g+G}`. Every class has a template grid in which each
//! group fills the same number of cells, half of them with each variant, so
//! all classes share one descriptor histogram. Only the arrangement of cells,
//! hence which variants sit next to each other, identifies the class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use ista_core::{DescriptorGrid, GroundTruth, Resolution};

use crate::config::PipelineConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub classes: usize,
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
    /// Twice the number of groups.
    pub depth: usize,
    pub beta: f64,
    /// Standard deviation of the per-component Gaussian noise.
    pub noise: f64,
    /// Random cell transpositions applied to each instance.
    pub swaps: usize,
    /// Pixel sizes to emit; sizes above the first upsample the grid.
    pub resolutions: Vec<u32>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            classes: 20,
            per_class: 10,
            height: 8,
            width: 8,
            depth: 12,
            beta: 0.5,
            noise: 0.03,
            swaps: 0,
            resolutions: vec![512],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub grids: Vec<DescriptorGrid>,
    pub ground_truth: Vec<GroundTruth>,
}

impl Corpus {
    /// Grids of a single resolution.
    pub fn at(&self, resolution: Resolution) -> Vec<DescriptorGrid> {
        self.grids
            .iter()
            .filter(|g| g.resolution() == resolution)
            .cloned()
            .collect()
    }
}

pub fn image_id(class: usize, instance: usize) -> String {
    format!("c{class:03}_{instance:03}")
}

/// Cell labels `group * 2 + variant`. Groups are scattered at random; within
/// each group the variant is set by which side of a random line the cell lies
/// on, so neighbouring cells tend to share a variant.
fn template(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let cells = cfg.height * cfg.width;
    let groups = cfg.depth / 2;
    let mut group_of: Vec<usize> = (0..cells).map(|c| c * groups / cells).collect();
    group_of.shuffle(rng);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dy, dx) = angle.sin_cos();
    let score = |c: usize| {
        let (y, x) = ((c / cfg.width) as f64, (c % cfg.width) as f64);
        y * dy + x * dx
    };
    let mut labels = vec![0; cells];
    for g in 0..groups {
        let mut members: Vec<usize> = (0..cells).filter(|&c| group_of[c] == g).collect();
        members.sort_by(|&a, &b| score(a).total_cmp(&score(b)).then(a.cmp(&b)));
        let half = members.len() / 2;
        for (i, &c) in members.iter().enumerate() {
            labels[c] = g * 2 + usize::from(i >= half);
        }
    }
    labels
}

fn atom(label: usize, depth: usize, beta: f64) -> Vec<f64> {
    let (g, variant) = (label / 2, label % 2);
    let mut v = vec![0.0; depth];
    v[g] = 1.0;
    v[g + depth / 2] = if variant == 0 { beta } else { -beta };
    v
}

fn instance(
    cfg: &SynthConfig,
    labels: &[usize],
    id: &str,
    scale: usize,
    resolution: Resolution,
    rng: &mut ChaCha8Rng,
) -> Result<DescriptorGrid> {
    let noise = Normal::new(0.0, cfg.noise).expect("finite noise");
    let (h, w) = (cfg.height * scale, cfg.width * scale);
    let mut values = Vec::with_capacity(h * w * cfg.depth);
    for y in 0..h {
        for x in 0..w {
            let label = labels[(y / scale) * cfg.width + x / scale];
            values.extend(
                atom(label, cfg.depth, cfg.beta)
                    .into_iter()
                    .map(|v| v + noise.sample(rng)),
            );
        }
    }
    Ok(DescriptorGrid::new(id, resolution, h, w, cfg.depth, values)?.normalized())
}

pub fn generate(cfg: &SynthConfig) -> Result<Corpus> {
    if cfg.depth < 2 || cfg.depth % 2 != 0 || cfg.classes == 0 || cfg.per_class < 2 {
        return Err(crate::Error::Config(
            "synthetic corpus needs an even depth >= 2, a class and two instances per class".into(),
        ));
    }
    let cells = cfg.height * cfg.width;
    if cells < cfg.depth {
        return Err(crate::Error::Config("grid has fewer cells than descriptor variants".into()));
    }
    let base = cfg.resolutions.first().copied().unwrap_or(512).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut grids = Vec::new();
    let mut ground_truth = Vec::new();
    for class in 0..cfg.classes {
        let labels = template(cfg, &mut rng);
        for i in 0..cfg.per_class {
            let mut own = labels.clone();
            for _ in 0..cfg.swaps {
                let (a, b) = (rng.gen_range(0..cells), rng.gen_range(0..cells));
                own.swap(a, b);
            }
            let id = image_id(class, i);
            for &px in &cfg.resolutions {
                let scale = (px / base).max(1) as usize;
                grids.push(instance(cfg, &own, &id, scale, Resolution::from_pixels(px), &mut rng)?);
            }
            let positives = (0..cfg.per_class).filter(|&j| j != i).map(|j| image_id(class, j));
            ground_truth.push(GroundTruth::new(id, positives, Vec::new())?);
        }
    }
    Ok(Corpus { grids, ground_truth })
}

/// Pipeline settings under which a generated corpus separates perfectly.
pub fn matching_pipeline(cfg: &SynthConfig) -> PipelineConfig {
    PipelineConfig {
        codebook_size: cfg.depth / 2,
        variance_target: Some(0.999),
        final_dim: 16,
        whiten: true,
        single_corpus: true,
        seed: cfg.seed,
        ..PipelineConfig::default()
    }
}

/// Same descriptors, cells randomly permuted: keeps every histogram, destroys adjacency.
pub fn shuffle_positions(grid: &DescriptorGrid, seed: u64) -> DescriptorGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.shuffle(&mut rng);
    let values = order.iter().flat_map(|&i| grid.descriptor(i).iter().copied()).collect();
    DescriptorGrid::new(
        grid.image_id(),
        grid.resolution(),
        grid.height(),
        grid.width(),
        grid.depth(),
        values,
    )
    .expect("permuted valid grid")
}

pub fn shuffle_corpus(corpus: &Corpus, seed: u64) -> Corpus {
    Corpus {
        grids: corpus
            .grids
            .iter()
            .enumerate()
            .map(|(i, g)| shuffle_positions(g, seed.wrapping_add(i as u64)))
            .collect(),
        ground_truth: corpus.ground_truth.clone(),
    }
}
