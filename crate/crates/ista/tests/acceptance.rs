//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Reference values come from brute-force code in this file, not from the
//! library paths under test.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ista::synth::{self, SynthConfig};
use ista::{formats, stages, PipelineConfig};
use ista_core::normalize::{cross_cluster_normalize, power_normalize};
use ista_core::retrieval::{average_precision, contribution_by_pair};
use ista_core::{
    BlockProjection, Codebook, DescriptorGrid, FullProjection, GroundTruth, PairBasis, PairLayout, PairStatistics,
    RawSignature, Resolution,
};

const LINEARIZATION_TRIALS: usize = 50;
const LINEARIZATION_TOL: f64 = 1e-9;
const LINEARIZATION_BUDGET: Duration = Duration::from_secs(10);
const PROJECTION_INSTANCES: usize = 20;
const PROJECTION_TOL: f64 = 1e-9;
const GRAM_SAMPLES: usize = 64;
const GRAM_TOL: f64 = 1e-8;
const WHITEN_TOL: f64 = 1e-6;
const CROSS_CLUSTER_TOL: f64 = 1e-9;
const CONTRIBUTION_TOL: f64 = 1e-9;
const SYNTH_MAP: f64 = 1.0;
const ABLATION_MIN_DROP: f64 = 0.05;
const SYNTH_BUDGET: Duration = Duration::from_secs(300);
const AP_TRIALS: usize = 100;
const AP_TOL: f64 = 1e-12;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------- shared oracles ----------

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn grid(rng: &mut ChaCha8Rng, id: &str, h: usize, w: usize, d: usize) -> DescriptorGrid {
    let values = (0..h * w).flat_map(|_| unit(rng, d)).collect();
    DescriptorGrid::new(id, Resolution::R512, h, w, d, values).unwrap()
}

fn codebook(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Codebook, Vec<Vec<f64>>) {
    let centers: Vec<Vec<f64>> = (0..n).map(|_| gaussian(rng, d)).collect();
    let cb = Codebook::new(centers.concat(), d, 0, None).unwrap();
    (cb, centers)
}

/// Nearest center by squared distance, lowest index on ties.
fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, c) in centers.iter().enumerate() {
        let d: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// All ordered pairs `(r, u)` of distinct cells at Chebyshev distance 1.
fn neighbour_pairs(g: &DescriptorGrid) -> Vec<(Vec<f64>, Vec<f64>)> {
    let (h, w, d) = (g.height(), g.width(), g.depth());
    let cell = |y: usize, x: usize| g.values()[(y * w + x) * d..(y * w + x + 1) * d].to_vec();
    let mut out = Vec::new();
    for ry in 0..h {
        for rx in 0..w {
            for uy in 0..h {
                for ux in 0..w {
                    let dist = ry.abs_diff(uy).max(rx.abs_diff(ux));
                    if dist == 1 {
                        out.push((cell(ry, rx), cell(uy, ux)));
                    }
                }
            }
        }
    }
    out
}

fn relative(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

// ---------- criteria ----------

fn linearization_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut failures, mut nonzero) = (0.0f64, 0, 0);
    for t in 0..LINEARIZATION_TRIALS {
        let n = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=6);
        let (cb, centers) = codebook(&mut rng, n, d);
        let dims = |rng: &mut ChaCha8Rng| (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let (ha, wa) = dims(&mut rng);
        let (hb, wb) = dims(&mut rng);
        let a = grid(&mut rng, &format!("a{t}"), ha, wa, d);
        let b = grid(&mut rng, &format!("b{t}"), hb, wb, d);
        let sa = PairStatistics::of_grid(&a, &cb, 1).unwrap();
        let sb = PairStatistics::of_grid(&b, &cb, 1).unwrap();
        let lhs = dot(sa.sums(), sb.sums());
        let k = |x: &[f64], y: &[f64]| {
            if nearest(&centers, x) == nearest(&centers, y) {
                dot(x, y)
            } else {
                0.0
            }
        };
        let mut rhs = 0.0;
        for (xr, xu) in neighbour_pairs(&a) {
            for (ys, yv) in neighbour_pairs(&b) {
                rhs += k(&xr, &ys) * k(&xu, &yv);
            }
        }
        if rhs != 0.0 {
            nonzero += 1;
        }
        let e = relative(lhs, rhs);
        worst = worst.max(e);
        if e > LINEARIZATION_TOL {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < LINEARIZATION_BUDGET,
        format!(
            "{}/{LINEARIZATION_TRIALS} trials within {LINEARIZATION_TOL:e} ({nonzero} with nonzero kernel), worst {worst:.2e}, {:.2?} (budget {:?})",
            LINEARIZATION_TRIALS - failures,
            elapsed,
            LINEARIZATION_BUDGET
        ),
    )
}

fn projection_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut blocks = 0;
    for t in 0..PROJECTION_INSTANCES {
        let n = rng.gen_range(2..=3);
        let d = rng.gen_range(3..=5);
        let (cb, centers) = codebook(&mut rng, n, d);
        let train: Vec<DescriptorGrid> = (0..10).map(|i| grid(&mut rng, &format!("t{t}_{i}"), 5, 5, d)).collect();
        let stats = PairStatistics::from_grids(&train, &cb, 1).unwrap();
        let basis = PairBasis::fit(&stats, 1.0, 1).unwrap();
        let q = grid(&mut rng, "q", 4, 4, d);
        let sig = basis.encode(&q, &cb, 1).unwrap();

        // mean pair tensor and query residual by enumeration
        let mut sum = vec![vec![0.0; d * d]; n * n];
        let mut count = vec![0usize; n * n];
        for g in &train {
            for (xr, xu) in neighbour_pairs(g) {
                let p = nearest(&centers, &xr) * n + nearest(&centers, &xu);
                count[p] += 1;
                for i in 0..d {
                    for j in 0..d {
                        sum[p][i * d + j] += xr[i] * xu[j];
                    }
                }
            }
        }
        let mut resid = vec![vec![0.0; d * d]; n * n];
        let mut qcount = vec![0usize; n * n];
        for (xr, xu) in neighbour_pairs(&q) {
            let p = nearest(&centers, &xr) * n + nearest(&centers, &xu);
            qcount[p] += 1;
            for i in 0..d {
                for j in 0..d {
                    resid[p][i * d + j] += xr[i] * xu[j];
                }
            }
        }
        for (k, l) in basis.layout().live_pairs() {
            let p = k * n + l;
            for e in 0..d * d {
                resid[p][e] -= qcount[p] as f64 * sum[p][e] / count[p] as f64;
            }
            let c = basis.pair(k, l);
            let r = c.rank();
            let got = sig.block(k, l);
            for a in 0..r {
                for b in 0..r {
                    let (u, v) = (c.u_column(a, d), c.v_column(b, d));
                    let mut want = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            want += u[i] * resid[p][i * d + j] * v[j];
                        }
                    }
                    worst = worst.max((got[a * r + b] - want).abs() / want.abs().max(1.0));
                }
            }
            blocks += 1;
        }
    }
    outcome(
        worst <= PROJECTION_TOL,
        format!("{PROJECTION_INSTANCES} instances, {blocks} blocks, worst error {worst:.2e} (tol {PROJECTION_TOL:e})"),
    )
}

fn gram_error(before: &[Vec<f64>], after: &[Vec<f64>]) -> f64 {
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for i in 0..before.len() {
        for j in 0..before.len() {
            let g = dot(&before[i], &before[j]);
            err = err.max((dot(&after[i], &after[j]) - g).abs());
            scale = scale.max(g.abs());
        }
    }
    err / scale
}

fn gram_preservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5150);
    let layout = PairLayout::new(2, vec![3, 5, 8, 10]).unwrap();
    let samples: Vec<RawSignature> = (0..GRAM_SAMPLES)
        .map(|i| RawSignature::new(format!("s{i}"), layout.clone(), gaussian(&mut rng, layout.total_dim())).unwrap())
        .collect();
    let (blocks, _) = BlockProjection::fit(&samples, 1.0).unwrap();
    let raw: Vec<Vec<f64>> = samples.iter().map(|s| s.values().to_vec()).collect();
    let red: Vec<Vec<f64>> = samples.iter().map(|s| blocks.apply(s).unwrap().into_values()).collect();
    let block_err = gram_error(&raw, &red);

    let dense: Vec<Vec<f64>> = (0..GRAM_SAMPLES).map(|_| gaussian(&mut rng, 400)).collect();
    let (full, _) = FullProjection::fit(&dense, GRAM_SAMPLES, false).unwrap();
    let out: Vec<Vec<f64>> = dense.iter().map(|s| full.apply(s, false).unwrap()).collect();
    let full_err = gram_error(&dense, &out);
    outcome(
        block_err <= GRAM_TOL && full_err <= GRAM_TOL,
        format!(
            "{GRAM_SAMPLES} samples; block stage dim {} error {block_err:.2e}, full stage dim 400 error {full_err:.2e} (tol {GRAM_TOL:e} of max |G|)",
            layout.total_dim()
        ),
    )
}

fn whitening() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (n, dim, keep) = (64, 120, 32);
    let mut samples: Vec<Vec<f64>> = (0..n)
        .map(|_| gaussian(&mut rng, dim).into_iter().enumerate().map(|(i, x)| x * (3.0 / (1.0 + i as f64)) + 0.5).collect())
        .collect();
    let spread = |samples: &[Vec<f64>]| {
        let (full, _) = FullProjection::fit(samples, keep, true).unwrap();
        let out: Vec<Vec<f64>> = samples.iter().map(|s| full.apply(s, false).unwrap()).collect();
        let stat: Vec<f64> = (0..keep)
            .map(|c| out.iter().map(|v| v[c] * v[c]).sum::<f64>() / n as f64)
            .collect();
        let (lo, hi) = stat.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        ((hi - lo) / hi, out)
    };
    let (moment_spread, _) = spread(&samples);
    // centered fit set: second moments are variances
    let mean: Vec<f64> = (0..dim).map(|j| samples.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
    for s in &mut samples {
        s.iter_mut().zip(&mean).for_each(|(x, m)| *x -= m);
    }
    let (_, out) = spread(&samples);
    let var: Vec<f64> = (0..keep)
        .map(|c| {
            let m = out.iter().map(|v| v[c]).sum::<f64>() / n as f64;
            out.iter().map(|v| (v[c] - m).powi(2)).sum::<f64>() / n as f64
        })
        .collect();
    let (lo, hi) = var.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let var_spread = (hi - lo) / hi;
    outcome(
        var_spread <= WHITEN_TOL && moment_spread <= WHITEN_TOL,
        format!(
            "{keep} components over {n} samples: variance spread {var_spread:.2e} (centered fit set), second-moment spread {moment_spread:.2e} (uncentered), tol {WHITEN_TOL:e}"
        ),
    )
}

fn cross_cluster_post_condition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut indices) = (0.0f64, 0);
    for t in 0..20 {
        let n = rng.gen_range(2..=4);
        let ranks: Vec<usize> = (0..n * n).map(|_| rng.gen_range(0..=4)).collect();
        let layout = PairLayout::new(n, ranks).unwrap();
        let mut sig = RawSignature::new(format!("x{t}"), layout.clone(), gaussian(&mut rng, layout.total_dim())).unwrap();
        power_normalize(sig.values_mut(), 0.5);
        cross_cluster_normalize(&mut sig, 1e-12);
        let max_rank = (0..n * n).map(|p| layout.rank(p / n, p % n)).max().unwrap_or(0);
        for diagonal in [true, false] {
            for i in 0..max_rank {
                for j in 0..max_rank {
                    let mut ss = 0.0;
                    let mut members = 0;
                    for k in 0..n {
                        for l in 0..n {
                            let r = layout.rank(k, l);
                            if (k == l) == diagonal && r > i && r > j {
                                ss += sig.block(k, l)[i * r + j].powi(2);
                                members += 1;
                            }
                        }
                    }
                    if members > 0 {
                        indices += 1;
                        worst = worst.max((ss.sqrt() - 1.0).abs());
                    }
                }
            }
        }
    }
    outcome(
        worst <= CROSS_CLUSTER_TOL,
        format!("{indices} live group indices over 20 signatures, worst |rss - 1| {worst:.2e} (tol {CROSS_CLUSTER_TOL:e})"),
    )
}

fn small_synthetic_model() -> (Vec<RawSignature>, BlockProjection) {
    let sc = SynthConfig {
        classes: 4,
        per_class: 5,
        ..SynthConfig::default()
    };
    let corpus = synth::generate(&sc).unwrap();
    let cfg = PipelineConfig {
        min_pair_count: 10,
        ..synth::matching_pipeline(&sc)
    };
    let cb = ista::pipeline::fit_codebook(&corpus.grids, &cfg).unwrap();
    let stats = ista::pipeline::accumulate_stats(&corpus.grids, &cb, cfg.radius).unwrap();
    let basis = ista::pipeline::fit_basis(&stats, &cfg).unwrap();
    let raw = ista::pipeline::encode_all(&corpus.grids, &cb, &basis, &cfg).unwrap();
    let blocks = ista::pipeline::fit_block_reduction(&raw, &cfg).unwrap();
    (raw, blocks)
}

fn contribution_decomposition() -> Outcome {
    let (raw, blocks) = small_synthetic_model();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for a in &raw {
        for b in &raw {
            let c = contribution_by_pair(a, b).unwrap();
            worst = worst.max(relative(c.total(), dot(a.values(), b.values())));
            let (ra, rb) = (blocks.apply(a).unwrap(), blocks.apply(b).unwrap());
            let c = contribution_by_pair(&ra, &rb).unwrap();
            worst = worst.max(relative(c.total(), dot(ra.values(), rb.values())));
            pairs += 1;
        }
    }
    outcome(
        worst <= CONTRIBUTION_TOL,
        format!("{pairs} signature pairs, raw and block-reduced, worst relative error {worst:.2e} (tol {CONTRIBUTION_TOL:e})"),
    )
}

/// Precision at every positive rank, recounted from the prefix each time.
fn literal_ap(ranking: &[String], gt: &GroundTruth) -> f64 {
    let kept: Vec<&String> = ranking.iter().filter(|id| !gt.junk.contains(*id)).collect();
    let mut total = 0.0;
    for k in 1..=kept.len() {
        if gt.positives.contains(kept[k - 1]) {
            let hits = kept[..k].iter().filter(|id| gt.positives.contains(**id)).count();
            total += hits as f64 / k as f64;
        }
    }
    total / gt.positives.len() as f64
}

fn write_corpus(dir: &Path, corpus: &synth::Corpus, sc: &SynthConfig) -> PipelineConfig {
    let grids = dir.join("grids");
    for g in &corpus.grids {
        formats::save_grid(g, &grids.join(formats::grid_file_name(g.image_id(), g.resolution()))).unwrap();
    }
    let gt = dir.join("ground_truth.txt");
    formats::save_ground_truth(&corpus.ground_truth, &gt).unwrap();
    let mut cfg = synth::matching_pipeline(sc);
    cfg.paths.work_dir = dir.join("work");
    cfg.paths.train_dir = Some(grids.clone());
    cfg.paths.database_dir = Some(grids);
    cfg.paths.ground_truth = Some(gt);
    cfg
}

/// mAP recomputed from the index file with the literal AP definition.
fn literal_map(cfg: &PipelineConfig) -> f64 {
    let index = formats::load_index(&cfg.artifacts().index()).unwrap();
    let gts = formats::load_ground_truth(cfg.paths.ground_truth.as_ref().unwrap()).unwrap();
    let mut sum = 0.0;
    for gt in &gts {
        let q = index.iter().find(|s| s.image_id == gt.query_id).unwrap();
        let mut scored: Vec<(String, f64)> = index
            .iter()
            .filter(|s| s.image_id != q.image_id)
            .map(|s| (s.image_id.clone(), dot(&s.vector, &q.vector)))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let ids: Vec<String> = scored.into_iter().map(|(id, _)| id).collect();
        sum += literal_ap(&ids, gt);
    }
    sum / gts.len() as f64
}

fn synthetic_retrieval() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let sc = SynthConfig::default();
        let corpus = synth::generate(&sc).unwrap();
        let cfg = write_corpus(&dir.path().join("planted"), &corpus, &sc);
        let map = stages::run_all(&cfg).unwrap().unwrap();
        let check = literal_map(&cfg);
        let shuffled = synth::shuffle_corpus(&corpus, 4242);
        let scfg = write_corpus(&dir.path().join("shuffled"), &shuffled, &sc);
        let smap = stages::run_all(&scfg).unwrap().unwrap();
        let elapsed = start.elapsed();
        let drop = map - smap;
        outcome(
            map == SYNTH_MAP && relative(check, map) <= AP_TOL && drop >= ABLATION_MIN_DROP && elapsed < SYNTH_BUDGET,
            format!(
                "{} images / {} classes: mAP {map:.6} (recomputed {check:.6}); shuffled positions mAP {smap:.6}, drop {drop:.3} (min {ABLATION_MIN_DROP}); single thread {elapsed:.2?} (budget {SYNTH_BUDGET:?})",
                corpus.grids.len(),
                sc.classes
            ),
        )
    })
}

fn ap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for t in 0..AP_TRIALS {
        let universe: Vec<String> = (0..rng.gen_range(5..40)).map(|i| format!("id{i}")).collect();
        let mut labels = universe.clone();
        labels.shuffle(&mut rng);
        let npos = rng.gen_range(1..=labels.len().min(8));
        let njunk = rng.gen_range(0..=(labels.len() - npos).min(5));
        let positives: BTreeSet<String> = labels[..npos].iter().cloned().collect();
        let junk: BTreeSet<String> = labels[npos..npos + njunk].iter().cloned().collect();
        let gt = GroundTruth::new(format!("q{t}"), positives, junk).unwrap();
        let mut ranking = universe.clone();
        ranking.shuffle(&mut rng);
        ranking.truncate(rng.gen_range(1..=ranking.len()));
        let got = average_precision(&ranking, &gt).unwrap();
        worst = worst.max((got - literal_ap(&ranking, &gt)).abs());
    }
    outcome(
        worst <= AP_TOL,
        format!("{AP_TRIALS} random rankings with junk and missing positives, worst |diff| {worst:.2e} (tol {AP_TOL:e})"),
    )
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let sc = SynthConfig {
        classes: 6,
        per_class: 5,
        resolutions: vec![512, 1024],
        ..SynthConfig::default()
    };
    let corpus = synth::generate(&sc).unwrap();
    let cfg = write_corpus(&dir.path().join("data"), &corpus, &sc);
    let mut runs = Vec::new();
    for (run, threads) in [(0, 4), (1, 1)] {
        let mut c = cfg.clone();
        c.paths.work_dir = dir.path().join(format!("work{run}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| stages::run_all(&c)).unwrap();
        runs.push(c.paths.work_dir);
    }
    let (a, b) = (files_under(&runs[0]), files_under(&runs[1]));
    let mut differing = Vec::new();
    for f in &a {
        if fs::read(runs[0].join(f)).ok() != fs::read(runs[1].join(f)).ok() {
            differing.push(f.display().to_string());
        }
    }
    let models = a
        .iter()
        .filter(|f| f.extension().is_some_and(|e| e != "sig" && e != "tsv"))
        .count();
    outcome(
        a == b && differing.is_empty() && !a.is_empty(),
        format!(
            "{} files ({models} model/index files, {} signatures) byte-identical across two runs (4 and 1 threads){}",
            a.len(),
            a.len() - models - 1,
            if differing.is_empty() { String::new() } else { format!("; differing: {differing:?}") }
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("linearization identity", linearization_identity),
        ("projection consistency", projection_consistency),
        ("gram preservation", gram_preservation),
        ("whitening", whitening),
        ("cross-cluster normalization", cross_cluster_post_condition),
        ("contribution decomposition", contribution_decomposition),
        ("synthetic retrieval", synthetic_retrieval),
        ("average precision oracle", ap_oracle),
        ("reproducibility", reproducibility),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let o = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
