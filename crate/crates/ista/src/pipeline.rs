//! In-memory pipeline: the file stages are thin wrappers around these.

use std::collections::BTreeMap;

use rayon::prelude::*;

use ista_core::codebook::subsample_indices;
use ista_core::normalize::normalize_signature;
use ista_core::retrieval::{combine_resolutions, mean_ap, rank};
use ista_core::{
    BlockProjection, Codebook, DescriptorGrid, FullProjection, GroundTruth, PairBasis, PairStatistics,
    RawSignature, Signature,
};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::formats::ReductionModel;

/// Grids accumulated sequentially per chunk; chunk results merge in order,
/// so statistics do not depend on the thread count.
pub const STATS_CHUNK: usize = 16;

/// Everything needed to turn a descriptor grid into a signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub codebook: Codebook,
    pub basis: PairBasis,
    pub reduction: ReductionModel,
}

pub fn kmeans_seed(cfg: &PipelineConfig) -> u64 {
    cfg.seed
}

pub fn sample_seed(cfg: &PipelineConfig) -> u64 {
    cfg.seed.wrapping_add(1)
}

/// Row indices (into the concatenation of all grids) used to train the codebook.
pub fn codebook_sample(rows_per_grid: &[usize], cfg: &PipelineConfig) -> Vec<usize> {
    let total = rows_per_grid.iter().sum();
    subsample_indices(total, cfg.kmeans_sample_cap, sample_seed(cfg))
}

/// Appends to `out` the rows of `grid` whose global index is in `picked`,
/// where the grid's first row has global index `start`.
pub fn gather_rows(grid: &DescriptorGrid, start: usize, picked: &[usize], out: &mut Vec<f64>) {
    let lo = picked.partition_point(|&i| i < start);
    let hi = picked.partition_point(|&i| i < start + grid.len());
    for &i in &picked[lo..hi] {
        out.extend_from_slice(grid.descriptor(i - start));
    }
}

pub fn fit_codebook_rows(rows: &[f64], dim: usize, cfg: &PipelineConfig) -> Result<Codebook> {
    Ok(Codebook::fit(rows, dim, cfg.codebook_size, kmeans_seed(cfg), cfg.kmeans_max_iters)?)
}

pub fn fit_codebook(grids: &[DescriptorGrid], cfg: &PipelineConfig) -> Result<Codebook> {
    let dim = common_depth(grids)?;
    let counts: Vec<usize> = grids.iter().map(DescriptorGrid::len).collect();
    let picked = codebook_sample(&counts, cfg);
    let mut rows = Vec::with_capacity(picked.len() * dim);
    let mut start = 0;
    for g in grids {
        gather_rows(g, start, &picked, &mut rows);
        start += g.len();
    }
    fit_codebook_rows(&rows, dim, cfg)
}

fn common_depth(grids: &[DescriptorGrid]) -> Result<usize> {
    let first = grids
        .first()
        .ok_or_else(|| Error::Config("no training grids".into()))?;
    for g in grids {
        if g.depth() != first.depth() {
            return Err(ista_core::Error::DimensionMismatch {
                context: "training grid depth",
                expected: first.depth(),
                actual: g.depth(),
            }
            .into());
        }
    }
    Ok(first.depth())
}

/// Pair statistics over `count` grids produced on demand by `load`.
pub fn accumulate_stats_with<F>(count: usize, load: F, codebook: &Codebook, radius: usize) -> Result<PairStatistics>
where
    F: Fn(usize) -> Result<DescriptorGrid> + Sync,
{
    let chunks: Vec<std::ops::Range<usize>> = (0..count)
        .step_by(STATS_CHUNK)
        .map(|s| s..(s + STATS_CHUNK).min(count))
        .collect();
    let wave = rayon::current_num_threads().max(1);
    let mut total = PairStatistics::new(codebook.len(), codebook.dim());
    for group in chunks.chunks(wave) {
        let parts = group
            .par_iter()
            .map(|range| {
                let mut s = PairStatistics::new(codebook.len(), codebook.dim());
                for i in range.clone() {
                    s.accumulate(&load(i)?, codebook, radius)?;
                }
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        for p in &parts {
            total.merge(p)?;
        }
    }
    Ok(total)
}

pub fn accumulate_stats(grids: &[DescriptorGrid], codebook: &Codebook, radius: usize) -> Result<PairStatistics> {
    accumulate_stats_with(grids.len(), |i| Ok(grids[i].clone()), codebook, radius)
}

pub fn fit_basis(stats: &PairStatistics, cfg: &PipelineConfig) -> Result<PairBasis> {
    Ok(PairBasis::fit(stats, cfg.variance_target(), cfg.min_pair_count)?)
}

/// Encoded and normalized pair signature of one grid.
pub fn encode(grid: &DescriptorGrid, codebook: &Codebook, basis: &PairBasis, cfg: &PipelineConfig) -> Result<RawSignature> {
    let mut sig = basis.encode(grid, codebook, cfg.radius)?;
    normalize_signature(&mut sig, &cfg.normalization())?;
    Ok(sig)
}

pub fn encode_all(
    grids: &[DescriptorGrid],
    codebook: &Codebook,
    basis: &PairBasis,
    cfg: &PipelineConfig,
) -> Result<Vec<RawSignature>> {
    grids.par_iter().map(|g| encode(g, codebook, basis, cfg)).collect()
}

pub fn fit_block_reduction(raw: &[RawSignature], cfg: &PipelineConfig) -> Result<BlockProjection> {
    let (model, notes) = BlockProjection::fit(raw, cfg.keep_ratio)?;
    for n in notes {
        log::warn!("{n}");
    }
    Ok(model)
}

pub fn fit_full_reduction(blocks: &BlockProjection, raw: &[RawSignature], cfg: &PipelineConfig) -> Result<FullProjection> {
    let reduced = raw
        .par_iter()
        .map(|r| Ok(blocks.apply(r)?.into_values()))
        .collect::<Result<Vec<_>>>()?;
    let (full, notes) = FullProjection::fit(&reduced, cfg.final_dim, cfg.whiten)?;
    for n in notes {
        log::warn!("{n}");
    }
    Ok(full)
}

/// Block then full reduction of one normalized pair signature.
pub fn reduce(raw: &RawSignature, model: &ReductionModel, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let blocks = model.blocks.apply(raw)?.into_values();
    match &model.full {
        Some(full) => Ok(full.apply(&blocks, cfg.renorm)?),
        None => Err(Error::Config("reduction model has no full stage; run fit-full-reduction".into())),
    }
}

/// Fits every model: codebook, statistics and basis on `train`, reductions on `fit`.
pub fn fit_model(train: &[DescriptorGrid], fit: &[DescriptorGrid], cfg: &PipelineConfig) -> Result<Model> {
    cfg.validate()?;
    let codebook = fit_codebook(train, cfg)?;
    let stats = accumulate_stats(train, &codebook, cfg.radius)?;
    let basis = fit_basis(&stats, cfg)?;
    let raw = encode_all(fit, &codebook, &basis, cfg)?;
    let blocks = fit_block_reduction(&raw, cfg)?;
    let full = fit_full_reduction(&blocks, &raw, cfg)?;
    Ok(Model {
        codebook,
        basis,
        reduction: ReductionModel { blocks, full: Some(full) },
    })
}

/// Final per-image signatures: every resolution of an image is reduced, then
/// the results are summed. Output is ordered by image id.
pub fn describe(model: &Model, grids: &[DescriptorGrid], cfg: &PipelineConfig) -> Result<Vec<Signature>> {
    let per_resolution = grids
        .par_iter()
        .map(|g| {
            let raw = encode(g, &model.codebook, &model.basis, cfg)?;
            let v = reduce(&raw, &model.reduction, cfg)?;
            Ok(Signature::new(g.image_id(), v, vec![g.resolution().pixels()])?)
        })
        .collect::<Result<Vec<_>>>()?;
    combine_all(per_resolution)
}

/// Groups signatures by image id and combines each group.
pub fn combine_all(sigs: Vec<Signature>) -> Result<Vec<Signature>> {
    let mut by_id: BTreeMap<String, Vec<Signature>> = BTreeMap::new();
    for s in sigs {
        by_id.entry(s.image_id.clone()).or_default().push(s);
    }
    by_id
        .into_values()
        .map(|mut group| {
            group.sort_by(|a, b| a.resolutions.cmp(&b.resolutions));
            Ok(combine_resolutions(&group)?)
        })
        .collect()
}

/// Ranks the index for one query held in the index.
pub fn query(index: &[Signature], query_id: &str) -> Result<Vec<(String, f64)>> {
    let q = index
        .iter()
        .find(|s| s.image_id == query_id)
        .ok_or_else(|| ista_core::Error::Evaluation(format!("query {query_id} is not in the index")))?;
    Ok(rank(index, q)?)
}

/// Mean average precision with every ground-truth query taken from the index.
pub fn evaluate(index: &[Signature], ground_truth: &[GroundTruth]) -> Result<f64> {
    let runs = ground_truth
        .par_iter()
        .map(|gt| {
            let ranking: Vec<String> = query(index, &gt.query_id)?.into_iter().map(|(id, _)| id).collect();
            Ok((ranking, gt.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(mean_ap(&runs)?)
}
