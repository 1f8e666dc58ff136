use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ista::checks::{linearization_suite, DEFAULT_TRIALS};
use ista::config::PipelineConfig;
use ista::error::{Error, Result};
use ista::synth::{self, SynthConfig};
use ista::{formats, stages};

#[derive(Parser, Debug)]
#[command(name = "ista", version, about = "Spatial tensor aggregation of local descriptor grids")]
struct Cli {
    /// TOML pipeline configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Io {
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelPaths {
    #[arg(long)]
    codebook: Option<PathBuf>,
    #[arg(long)]
    basis: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the visual codebook on the training grids.
    FitCodebook(#[command(flatten)] Io),
    /// Accumulate neighbour pair statistics of the training grids.
    FitStats {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        codebook: Option<PathBuf>,
    },
    /// Fit the per-pair eigenspaces from pair statistics.
    FitBasis(#[command(flatten)] Io),
    /// Encode and normalize grids into raw signatures.
    Encode {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        models: ModelPaths,
    },
    /// Fit the per-block projections.
    FitBlockReduction {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        models: ModelPaths,
    },
    /// Fit the final projection on top of an existing block model.
    FitFullReduction {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        models: ModelPaths,
        /// Reduction model holding the block stage.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Reduce raw signatures.
    Reduce {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        basis: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Sum the resolutions of each image.
    Combine(#[command(flatten)] Io),
    /// Pack combined signatures into an index.
    Index(#[command(flatten)] Io),
    /// Rank the index against one indexed image; TSV on stdout or --out.
    Query {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        id: String,
        /// Keep only the first results.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Mean average precision of the index under a ground-truth file.
    Evaluate {
        #[command(flatten)]
        io: Io,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Check the pair tensor inner product against the brute-force kernel.
    OracleCheck {
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
    },
    /// Run every stage with the configured paths.
    Run,
    /// Write a synthetic corpus, its ground truth and a matching config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, value_delimiter = ',', default_value = "512")]
        resolutions: Vec<u32>,
        /// Permute grid cells (spatial ablation).
        #[arg(long)]
        shuffle: bool,
    },
    /// Per cluster pair split of the similarity of two grids.
    Explain {
        a: PathBuf,
        b: PathBuf,
        #[command(flatten)]
        models: ModelPaths,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Print the effective configuration.
    ShowConfig,
}

fn or_config(p: &Option<PathBuf>, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    p.clone()
        .or_else(|| fallback.cloned())
        .ok_or_else(|| Error::Config(format!("no {what}: pass --in or set it in the config")))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let a = cfg.artifacts();
    let paths = cfg.paths.clone();
    let codebook = |m: &ModelPaths| m.codebook.clone().unwrap_or_else(|| a.codebook());
    let basis = |m: &ModelPaths| m.basis.clone().unwrap_or_else(|| a.pair_model());

    match cli.command {
        Command::FitCodebook(io) => {
            let input = or_config(&io.input, paths.train_dir.as_ref(), "training directory")?;
            stages::fit_codebook(&cfg, &input, &io.out.unwrap_or_else(|| a.codebook()))?;
        }
        Command::FitStats { io, codebook } => {
            let input = or_config(&io.input, paths.train_dir.as_ref(), "training directory")?;
            let cb = codebook.unwrap_or_else(|| a.codebook());
            stages::fit_stats(&cfg, &input, &cb, &io.out.unwrap_or_else(|| a.pair_stats()))?;
        }
        Command::FitBasis(io) => {
            let input = io.input.unwrap_or_else(|| a.pair_stats());
            stages::fit_basis(&cfg, &input, &io.out.unwrap_or_else(|| a.pair_model()))?;
        }
        Command::Encode { io, models } => {
            let input = or_config(&io.input, paths.database_dir.as_ref(), "database directory")?;
            let out = io.out.unwrap_or_else(|| a.raw_dir());
            let n = stages::encode(&cfg, &input, &codebook(&models), &basis(&models), &out)?;
            log::info!("encoded {n} grids into {}", out.display());
        }
        Command::FitBlockReduction { io, models } => {
            let input = match io.input {
                Some(p) => p,
                None => cfg.reduction_fit_dir()?,
            };
            let out = io.out.unwrap_or_else(|| a.reduction_model());
            stages::fit_block_reduction(&cfg, &input, &codebook(&models), &basis(&models), &out)?;
        }
        Command::FitFullReduction { io, models, model } => {
            let input = match io.input {
                Some(p) => p,
                None => cfg.reduction_fit_dir()?,
            };
            let model = model.unwrap_or_else(|| a.reduction_model());
            let out = io.out.unwrap_or_else(|| model.clone());
            stages::fit_full_reduction(&cfg, &input, &codebook(&models), &basis(&models), &model, &out)?;
        }
        Command::Reduce { io, basis, model } => {
            let input = io.input.unwrap_or_else(|| a.raw_dir());
            let basis = basis.unwrap_or_else(|| a.pair_model());
            let model = model.unwrap_or_else(|| a.reduction_model());
            stages::reduce(&cfg, &input, &basis, &model, &io.out.unwrap_or_else(|| a.reduced_dir()))?;
        }
        Command::Combine(io) => {
            let input = io.input.unwrap_or_else(|| a.reduced_dir());
            stages::combine(&input, &io.out.unwrap_or_else(|| a.combined_dir()))?;
        }
        Command::Index(io) => {
            let input = io.input.unwrap_or_else(|| a.combined_dir());
            stages::index(&input, &io.out.unwrap_or_else(|| a.index()))?;
        }
        Command::Query { io, id, top } => {
            let index = io.input.unwrap_or_else(|| a.index());
            let mut ranking = stages::query(&index, &id)?;
            if let Some(k) = top {
                ranking.truncate(k);
            }
            write_output(io.out.as_deref(), &formats::format_ranking(&ranking))?;
        }
        Command::Evaluate { io, ground_truth } => {
            let index = io.input.unwrap_or_else(|| a.index());
            let gt = or_config(&ground_truth, paths.ground_truth.as_ref(), "ground truth file")?;
            let map = stages::evaluate(&index, &gt)?;
            write_output(io.out.as_deref(), &format!("mAP\t{map:.6}\n"))?;
        }
        Command::OracleCheck { trials } => {
            let r = linearization_suite(trials, cfg.seed)?;
            println!(
                "linearization identity: {} passed, {} failed (worst relative error {:.3e})",
                r.passed, r.failed, r.worst_relative_error
            );
            if !r.ok() {
                return Err(ista_core::Error::Numerical(format!("{} identity trials failed", r.failed)).into());
            }
        }
        Command::Run => {
            if let Some(map) = stages::run_all(&cfg)? {
                println!("mAP\t{map:.6}");
            }
        }
        Command::Synth {
            out,
            classes,
            per_class,
            resolutions,
            shuffle,
        } => {
            let sc = SynthConfig {
                classes,
                per_class,
                resolutions,
                seed: cfg.seed,
                ..SynthConfig::default()
            };
            let mut corpus = synth::generate(&sc)?;
            if shuffle {
                corpus = synth::shuffle_corpus(&corpus, cfg.seed);
            }
            let grids = out.join("grids");
            for g in &corpus.grids {
                formats::save_grid(g, &grids.join(formats::grid_file_name(g.image_id(), g.resolution())))?;
            }
            let gt = out.join("ground_truth.txt");
            formats::save_ground_truth(&corpus.ground_truth, &gt)?;
            let mut pc = synth::matching_pipeline(&sc);
            pc.paths.work_dir = out.join("work");
            pc.paths.train_dir = Some(grids.clone());
            pc.paths.database_dir = Some(grids);
            pc.paths.ground_truth = Some(gt);
            let cfg_path = out.join("ista.toml");
            std::fs::write(&cfg_path, pc.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
            println!("{} grids written; config at {}", corpus.grids.len(), cfg_path.display());
        }
        Command::Explain { a: fa, b: fb, models, model, top } => {
            let (raw, reduced) = stages::explain(&cfg, &fa, &fb, &codebook(&models), &basis(&models), model.as_deref())?;
            let mut text = String::new();
            for (name, c) in std::iter::once(("raw", &raw)).chain(reduced.as_ref().map(|r| ("block", r))) {
                let n = c.clusters();
                let mut entries: Vec<(usize, usize, f64)> =
                    (0..n).flat_map(|k| (0..n).map(move |l| (k, l))).map(|(k, l)| (k, l, c.get(k, l))).collect();
                entries.sort_by(|x, y| y.2.total_cmp(&x.2).then((x.0, x.1).cmp(&(y.0, y.1))));
                text.push_str(&format!("# {name}: total {:.6}\n", c.total()));
                for (k, l, v) in entries.into_iter().take(top) {
                    text.push_str(&format!("{name}\t{k}\t{l}\t{v:.6}\n"));
                }
            }
            write_output(None, &text)?;
        }
        Command::ShowConfig => write_output(None, &cfg.to_toml())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            log::LevelFilter::Info
        } else {
            log::LevelFilter::Warn
        })
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
