//! Pipeline stages reading and writing artifact files.

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;

use ista_core::retrieval::contribution_by_pair;
use ista_core::{Codebook, DescriptorGrid, PairBasis, PairContributions, PairStatistics, RawSignature, Signature};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::formats::{self, ReductionModel};
use crate::pipeline;

pub const COMBINED_MANIFEST: &str = "combined.tsv";

/// Sorted `.desc` files of a directory; an empty directory is a missing input.
pub fn grid_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let files = formats::list_files(dir, ".desc")?;
    if files.is_empty() {
        return Err(Error::MissingInput(dir.join("*.desc")));
    }
    Ok(files)
}

/// Loads a grid and l2-normalizes its descriptors.
pub fn ingest(path: &Path) -> Result<DescriptorGrid> {
    Ok(formats::load_grid(path)?.normalized())
}

pub fn ingest_all(files: &[PathBuf]) -> Result<Vec<DescriptorGrid>> {
    files.par_iter().map(|p| ingest(p)).collect()
}

pub fn fit_codebook(cfg: &PipelineConfig, train_dir: &Path, out: &Path) -> Result<Codebook> {
    let files = grid_files(train_dir)?;
    let shapes = files
        .iter()
        .map(|p| formats::read_grid_shape(p))
        .collect::<Result<Vec<_>>>()?;
    let depth = shapes[0].2;
    if let Some(i) = shapes.iter().position(|s| s.2 != depth) {
        return Err(Error::format(
            &files[i],
            format!("descriptor depth {} differs from {depth} in {}", shapes[i].2, files[0].display()),
        ));
    }
    let counts: Vec<usize> = shapes.iter().map(|(h, w, _)| h * w).collect();
    let picked = pipeline::codebook_sample(&counts, cfg);
    let starts: Vec<usize> = counts
        .iter()
        .scan(0, |acc, &c| {
            let s = *acc;
            *acc += c;
            Some(s)
        })
        .collect();
    let parts = files
        .par_iter()
        .zip(&starts)
        .map(|(p, &start)| {
            let mut rows = Vec::new();
            pipeline::gather_rows(&ingest(p)?, start, &picked, &mut rows);
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = parts.concat();
    info!("fitting {} words on {} of {} descriptors", cfg.codebook_size, picked.len(), starts.last().unwrap() + counts.last().unwrap());
    let cb = pipeline::fit_codebook_rows(&rows, depth, cfg)?;
    formats::save_codebook(&cb, out)?;
    Ok(cb)
}

pub fn fit_stats(cfg: &PipelineConfig, train_dir: &Path, codebook: &Path, out: &Path) -> Result<PairStatistics> {
    let cb = formats::load_codebook(codebook)?;
    let files = grid_files(train_dir)?;
    let stats = pipeline::accumulate_stats_with(files.len(), |i| ingest(&files[i]), &cb, cfg.radius)?;
    info!("accumulated {} neighbour pairs from {} grids", stats.counts().iter().sum::<u64>(), files.len());
    formats::save_pair_stats(&stats, out)?;
    Ok(stats)
}

pub fn fit_basis(cfg: &PipelineConfig, stats: &Path, out: &Path) -> Result<PairBasis> {
    let stats = formats::load_pair_stats(stats)?;
    let basis = pipeline::fit_basis(&stats, cfg)?;
    let layout = basis.layout();
    info!(
        "{} live pairs, signature dimension {}",
        layout.live_pairs().count(),
        layout.total_dim()
    );
    formats::save_pair_model(&basis, out)?;
    Ok(basis)
}

fn signature_file(dir: &Path, grid: &DescriptorGrid) -> PathBuf {
    dir.join(format!("{}.{}.sig", grid.image_id(), grid.resolution().pixels()))
}

/// Encodes and normalizes every grid of `desc_dir` into `<id>.<pixels>.sig` files.
pub fn encode(cfg: &PipelineConfig, desc_dir: &Path, codebook: &Path, basis: &Path, out_dir: &Path) -> Result<usize> {
    let cb = formats::load_codebook(codebook)?;
    let basis = formats::load_pair_model(basis)?;
    let files = grid_files(desc_dir)?;
    files
        .par_iter()
        .map(|p| {
            let grid = ingest(p)?;
            let sig = pipeline::encode(&grid, &cb, &basis, cfg)?;
            formats::save_vector(sig.values(), &signature_file(out_dir, &grid))
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(files.len())
}

fn encode_fit_corpus(cfg: &PipelineConfig, fit_dir: &Path, codebook: &Path, basis: &Path) -> Result<Vec<RawSignature>> {
    let cb = formats::load_codebook(codebook)?;
    let basis = formats::load_pair_model(basis)?;
    let files = grid_files(fit_dir)?;
    files
        .par_iter()
        .map(|p| pipeline::encode(&ingest(p)?, &cb, &basis, cfg))
        .collect()
}

pub fn fit_block_reduction(cfg: &PipelineConfig, fit_dir: &Path, codebook: &Path, basis: &Path, out: &Path) -> Result<()> {
    let raw = encode_fit_corpus(cfg, fit_dir, codebook, basis)?;
    let blocks = pipeline::fit_block_reduction(&raw, cfg)?;
    info!("block stage: {} -> {}", blocks.input_dim(), blocks.output_dim());
    formats::save_reduction_model(&ReductionModel { blocks, full: None }, out)
}

pub fn fit_full_reduction(
    cfg: &PipelineConfig,
    fit_dir: &Path,
    codebook: &Path,
    basis: &Path,
    model: &Path,
    out: &Path,
) -> Result<()> {
    let ReductionModel { blocks, .. } = formats::load_reduction_model(model)?;
    let raw = encode_fit_corpus(cfg, fit_dir, codebook, basis)?;
    let full = pipeline::fit_full_reduction(&blocks, &raw, cfg)?;
    info!("full stage: {} -> {}", full.input_dim(), full.output_dim());
    formats::save_reduction_model(&ReductionModel { blocks, full: Some(full) }, out)
}

/// Reduces every raw signature of `raw_dir`; the basis supplies the block layout.
pub fn reduce(cfg: &PipelineConfig, raw_dir: &Path, basis: &Path, model: &Path, out_dir: &Path) -> Result<usize> {
    let layout = formats::load_pair_model(basis)?.layout().clone();
    let model = formats::load_reduction_model(model)?;
    let files = formats::list_files(raw_dir, ".sig")?;
    if files.is_empty() {
        return Err(Error::MissingInput(raw_dir.join("*.sig")));
    }
    files
        .par_iter()
        .map(|p| {
            let (id, px) = formats::parse_signature_name(p)?;
            let raw = RawSignature::new(id.as_str(), layout.clone(), formats::load_vector(p)?)?;
            let v = pipeline::reduce(&raw, &model, cfg)?;
            formats::save_vector(&v, &out_dir.join(format!("{id}.{px}.sig")))
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(files.len())
}

/// Sums the per-resolution signatures of each image into `<id>.sig`, listing
/// the combined resolutions in a manifest.
pub fn combine(reduced_dir: &Path, out_dir: &Path) -> Result<usize> {
    let files = formats::list_files(reduced_dir, ".sig")?;
    if files.is_empty() {
        return Err(Error::MissingInput(reduced_dir.join("*.sig")));
    }
    let sigs = files
        .iter()
        .map(|p| {
            let (id, px) = formats::parse_signature_name(p)?;
            Ok(Signature::new(id, formats::load_vector(p)?, vec![px])?)
        })
        .collect::<Result<Vec<_>>>()?;
    let combined = pipeline::combine_all(sigs)?;
    let mut manifest = String::new();
    for s in &combined {
        formats::save_vector(&s.vector, &out_dir.join(format!("{}.sig", s.image_id)))?;
        let res: Vec<String> = s.resolutions.iter().map(u32::to_string).collect();
        manifest.push_str(&format!("{}\t{}\n", s.image_id, res.join(",")));
    }
    let path = out_dir.join(COMBINED_MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(combined.len())
}

/// Collects the combined signatures of a directory into one index file.
pub fn index(combined_dir: &Path, out: &Path) -> Result<Vec<Signature>> {
    let manifest_path = combined_dir.join(COMBINED_MANIFEST);
    let manifest = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let mut entries = Vec::new();
    for (i, line) in manifest.lines().enumerate() {
        let (id, res) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(&manifest_path, format!("line {}: expected id<TAB>resolutions", i + 1)))?;
        let resolutions = res
            .split(',')
            .filter(|r| !r.is_empty())
            .map(|r| r.parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::format(&manifest_path, format!("line {}: {e}", i + 1)))?;
        let vector = formats::load_vector(&combined_dir.join(format!("{id}.sig")))?;
        entries.push(Signature::new(id, vector, resolutions)?);
    }
    formats::save_index(&entries, out)?;
    Ok(entries)
}

pub fn query(index: &Path, query_id: &str) -> Result<Vec<(String, f64)>> {
    pipeline::query(&formats::load_index(index)?, query_id)
}

pub fn evaluate(index: &Path, ground_truth: &Path) -> Result<f64> {
    let entries = formats::load_index(index)?;
    let gts = formats::load_ground_truth(ground_truth)?;
    pipeline::evaluate(&entries, &gts)
}

/// Per-pair split of the similarity of two grids, on normalized pair
/// signatures and, when a reduction model is given, after the block stage.
pub fn explain(
    cfg: &PipelineConfig,
    a: &Path,
    b: &Path,
    codebook: &Path,
    basis: &Path,
    model: Option<&Path>,
) -> Result<(PairContributions, Option<PairContributions>)> {
    let cb = formats::load_codebook(codebook)?;
    let basis = formats::load_pair_model(basis)?;
    let ra = pipeline::encode(&ingest(a)?, &cb, &basis, cfg)?;
    let rb = pipeline::encode(&ingest(b)?, &cb, &basis, cfg)?;
    let raw = contribution_by_pair(&ra, &rb)?;
    let reduced = match model {
        Some(m) => {
            let blocks = formats::load_reduction_model(m)?.blocks;
            Some(contribution_by_pair(&blocks.apply(&ra)?, &blocks.apply(&rb)?)?)
        }
        None => None,
    };
    Ok((raw, reduced))
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("paths.{key} is not set")))
}

/// Runs every stage with the default artifact layout; returns the mAP when
/// ground truth is configured.
pub fn run_all(cfg: &PipelineConfig) -> Result<Option<f64>> {
    cfg.validate()?;
    let train = required(&cfg.paths.train_dir, "train_dir")?;
    let database = required(&cfg.paths.database_dir, "database_dir")?;
    let fit = cfg.reduction_fit_dir()?;
    let a = cfg.artifacts();
    fit_codebook(cfg, train, &a.codebook())?;
    fit_stats(cfg, train, &a.codebook(), &a.pair_stats())?;
    fit_basis(cfg, &a.pair_stats(), &a.pair_model())?;
    fit_block_reduction(cfg, &fit, &a.codebook(), &a.pair_model(), &a.reduction_model())?;
    fit_full_reduction(cfg, &fit, &a.codebook(), &a.pair_model(), &a.reduction_model(), &a.reduction_model())?;
    encode(cfg, database, &a.codebook(), &a.pair_model(), &a.raw_dir())?;
    reduce(cfg, &a.raw_dir(), &a.pair_model(), &a.reduction_model(), &a.reduced_dir())?;
    combine(&a.reduced_dir(), &a.combined_dir())?;
    index(&a.combined_dir(), &a.index())?;
    match &cfg.paths.ground_truth {
        Some(gt) => Ok(Some(evaluate(&a.index(), gt)?)),
        None => Ok(None),
    }
}
