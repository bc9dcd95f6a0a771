use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use alreview_core::active_loop::{curves_to_csv, generate_synthetic_corpus, run_experiment, ExperimentData, SyntheticSpec};
use alreview_core::corpus::read_jsonl;
use alreview_core::embeddings::PretrainedVectors;
use alreview_core::linalg::Matrix;
use alreview_core::seqmodel::{gradient_check, LabelVector, ModelParams};
use alreview_service::{EmbeddingSource, ServiceConfig, ServiceState, Store};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod config;

use config::{echo, read_json, SimulateConfig};

#[derive(Parser)]
#[command(name = "alreview", version, about = "Active learning for multi-label review classification")]
struct Cli {
    /// Overrides the seed of the command (training seed, generator seed or
    /// the single experiment seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adds a corpus JSONL file to a store, creating the store if needed.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        store: PathBuf,
        /// Service config JSON used when the store is created.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pretrained vectors copied into a new store.
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Writes a synthetic corpus, embedding file and taxonomy.
    Synth {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the simulated-oracle benchmark and writes learning curves.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; `-` for standard output.
        #[arg(long, default_value = "curves.csv")]
        out: PathBuf,
    },
    /// Serves the annotation API for a store.
    Serve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// Retrains both task models on the store's labeled pool and waits.
    Retrain {
        #[arg(long)]
        store: PathBuf,
    },
    /// Scores the store's current models on its validation set.
    Eval {
        #[arg(long)]
        store: PathBuf,
    },
    /// Compares analytic gradients with finite differences on tiny models.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        models: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Prints the learning curve of a store.
    ExportCurve {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, value_enum, default_value_t = CurveFormat::Csv)]
        format: CurveFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CurveFormat {
    Csv,
    Json,
}

fn write_output(out: Option<&Path>, data: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => std::fs::write(p, data).with_context(|| format!("writing {}", p.display())),
        _ => {
            print!("{data}");
            Ok(())
        }
    }
}

fn ingest(corpus: &Path, store: &Path, config: Option<&Path>, embeddings: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let fresh = !store.join("config.json").exists();
    if !fresh && (config.is_some() || embeddings.is_some()) {
        log::warn!("{} already exists; --config and --embeddings are ignored", store.display());
    }
    let mut cfg: ServiceConfig = match config {
        Some(p) => read_json(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(e) = embeddings.filter(|_| fresh) {
        std::fs::create_dir_all(store)?;
        std::fs::copy(e, store.join("embeddings.txt")).with_context(|| format!("copying {}", e.display()))?;
        cfg.embedding = EmbeddingSource::Pretrained { file: "embeddings.txt".into() };
    }
    if let Some(s) = seed {
        cfg.hyper.seed = s;
    }
    let store = Store::open_or_init(store, Some(&cfg))?;
    echo("service", &store.load_config()?)?;
    let state = ServiceState::open(store)?;
    let delta = state.ingest_path(corpus)?;
    println!("{}", serde_json::to_string(&delta)?);
    Ok(())
}

fn synth(spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut spec: SyntheticSpec = match spec {
        Some(p) => read_json(p)?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    echo("synth", &spec)?;
    let corpus = generate_synthetic_corpus(&spec)?;
    corpus.write_to(out)?;
    log::info!("wrote {} rows to {}", corpus.rows.len(), out.display());
    Ok(())
}

fn simulate(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg: SimulateConfig = read_json(config_path)?;
    cfg.resolve_paths(config_path.parent().unwrap_or(Path::new(".")));
    if let Some(s) = seed {
        cfg.experiment.seeds = vec![s];
    }
    echo("simulate", &cfg)?;
    let file = std::fs::File::open(&cfg.corpus).with_context(|| format!("opening {}", cfg.corpus.display()))?;
    let rows = read_jsonl(std::io::BufReader::new(file))?;
    let pretrained = match &cfg.embeddings {
        Some(p) => {
            let f = std::fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(PretrainedVectors::read(std::io::BufReader::new(f))?)
        }
        None => None,
    };
    let data = ExperimentData { taxonomy: cfg.taxonomy.clone(), rows, pretrained };
    let started = std::time::Instant::now();
    let result = run_experiment(&cfg.experiment, &data)?;
    log::info!("simulation finished in {:.1?}", started.elapsed());
    write_output(Some(out), &curves_to_csv(&result.curves)?)
}

fn open_store(path: &Path) -> Result<std::sync::Arc<ServiceState>> {
    let store = Store::open(path)?;
    echo("service", &store.load_config()?)?;
    Ok(ServiceState::open(store)?)
}

fn gradcheck(models: usize, tolerance: f64, seed: u64) -> Result<bool> {
    if models == 0 {
        bail!("--models must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut all_passed = true;
    for m in 0..models {
        let (t, d, h, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
        let params = ModelParams::random(d, h, c, 0.8, rng.gen());
        let x = Matrix::uniform(t, d, 1.0, &mut rng);
        let y = LabelVector::new((0..c).map(|_| rng.gen_range(0..=1)).collect())?;
        let report = gradient_check(&params, (&x, &y), tolerance);
        log::info!(
            "model {m} (T={t} D={d} H={h} C={c}): {} entries, max relative error {:.3e} at {}",
            report.entries_checked,
            report.max_relative_error,
            report.worst_entry
        );
        worst = worst.max(report.max_relative_error);
        all_passed &= report.passed;
    }
    println!("max relative error {worst:.3e} (tolerance {tolerance:e}): {}", if all_passed { "ok" } else { "FAILED" });
    Ok(all_passed)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Ingest { corpus, store, config, embeddings } => {
            ingest(&corpus, &store, config.as_deref(), embeddings.as_deref(), cli.seed)?
        }
        Command::Synth { spec, out } => synth(spec.as_deref(), &out, cli.seed)?,
        Command::Simulate { config, out } => simulate(&config, &out, cli.seed)?,
        Command::Serve { store, port, host } => {
            if cli.seed.is_some() {
                log::warn!("--seed is ignored by serve; the store config fixes the training seed");
            }
            let state = open_store(&store)?;
            let addr: SocketAddr = format!("{host}:{port}").parse().context("invalid --host/--port")?;
            tokio::runtime::Runtime::new()?.block_on(alreview_service::http::serve(state, addr))?;
        }
        Command::Retrain { store } => {
            let state = open_store(&store)?;
            state.trigger_retrain()?;
            let status = state.wait_for_training();
            if let Some(e) = status.error {
                bail!("retrain failed: {e}");
            }
            println!("{}", serde_json::to_string_pretty(&state.get_metrics()?)?);
        }
        Command::Eval { store } => {
            let state = open_store(&store)?;
            let report = serde_json::json!({ "pool": state.counts(), "tasks": state.evaluate_current()? });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Gradcheck { models, tolerance } => {
            if !gradcheck(models, tolerance, cli.seed.unwrap_or(0))? {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::ExportCurve { store, format, out } => {
            let state = open_store(&store)?;
            let data = match format {
                CurveFormat::Csv => state.get_curve_csv()?,
                CurveFormat::Json => serde_json::to_string_pretty(&state.get_curve()?)? + "\n",
            };
            write_output(out.as_deref(), &data)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
