//! `orag`: run, replay and evaluate online embedding adaptation from the shell.
//!
//! Exit codes: 0 on success, 1 for invalid input (arguments, configuration,
//! file contents), 2 for failures during a run.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use orag_core::io::{
    ingest_embedding_dump, load_config, write_atomic, write_catalog, write_event_log, write_table, RunConfig,
    VectorTable,
};
use orag_core::metrics::{evaluate_retrieval, regret_curve, rolling_accuracy, train_oracle};
use orag_core::simulator::{initial_catalog, make_environment, replay, run_episode, EpisodeLog};
use orag_core::{Catalog, Error, LabeledQuery, Precision};

#[derive(Parser)]
#[command(name = "orag", version, about = "Online adaptation of retrieval embeddings from bandit feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an episode; write the event log and the final catalog snapshot.
    Simulate(Common),
    /// Run the learner over an ingested embedding dump.
    Replay(Common),
    /// Fit the hindsight oracle and write the regret curve as CSV.
    Regret {
        #[command(flatten)]
        common: Common,
        /// Oracle pass budget (overrides `oracle_passes`).
        #[arg(long)]
        passes: Option<usize>,
    },
    /// Write Recall@k, NDCG@k and accuracy as CSV.
    Metrics {
        #[command(flatten)]
        common: Common,
        /// Ranking cutoff.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Write the initial catalog, the query stream and its labels in the
    /// format `replay` reads.
    Export(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = load_config(&self.config).map_err(|e| match e {
            Error::Io(io) => anyhow::Error::new(io).context(format!("reading {}", self.config.display())),
            other => other.into(),
        })?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn simulate(cfg: &RunConfig) -> Result<EpisodeLog> {
    let episode = cfg.episode();
    let env = make_environment(&episode, cfg.seed)?;
    Ok(run_episode(&env, &episode)?)
}

fn with_precision(catalog: &Catalog, cfg: &RunConfig) -> Catalog {
    catalog.clone().with_precision(cfg.precision)
}

fn write_run(out: &Path, cfg: &RunConfig, log: &EpisodeLog) -> Result<()> {
    let snapshot = with_precision(&log.final_catalog, cfg);
    write_event_log(&out.join(&cfg.event_log), &log.records)?;
    write_catalog(&out.join(&cfg.snapshot), &snapshot)?;
    Ok(())
}

fn required<'a>(value: &'a Option<PathBuf>, field: &str) -> Result<&'a PathBuf> {
    value.as_ref().ok_or_else(|| {
        Error::Validation {
            field: field.to_string(),
            message: "required by the replay command".to_string(),
        }
        .into()
    })
}

/// Relative dump paths resolve against the config file's directory.
fn resolve(config_path: &Path, p: &Path) -> PathBuf {
    match config_path.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

fn run_replay(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let paths = [
        required(&cfg.queries_path, "queries_path")?,
        required(&cfg.items_path, "items_path")?,
        required(&cfg.labels_path, "labels_path")?,
    ]
    .map(|p| resolve(&common.config, p));
    let dump = ingest_embedding_dump(&paths[0], &paths[1], &paths[2])?;
    let log = replay(&dump.stream, dump.catalog, &cfg.episode(), cfg.seed)?;
    write_run(common.out_dir()?, &cfg, &log)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{}", e.error()))
}

fn run_regret(common: &Common, passes: Option<usize>) -> Result<()> {
    let mut cfg = common.load()?;
    if let Some(p) = passes {
        if p == 0 {
            return Err(Error::Validation {
                field: "passes".into(),
                message: "must be at least 1".into(),
            }
            .into());
        }
        cfg.oracle_passes = p;
    }
    let log = simulate(&cfg)?;
    let fit = train_oracle(&log.labeled_queries(), &log.initial_catalog, cfg.oracle_options())?;
    let ledger = regret_curve(&log, &fit.catalog)?;
    let rows = log.records.iter().enumerate().map(|(i, r)| {
        vec![
            r.t.to_string(),
            ledger.online()[i].to_string(),
            ledger.oracle()[i].to_string(),
            ledger.cumulative()[i].to_string(),
        ]
    });
    let bytes = csv_bytes(&["t", "online_loss", "oracle_loss", "cum_regret"], rows)?;
    write_atomic(&common.out_dir()?.join("regret.csv"), &bytes)?;
    Ok(())
}

fn present(catalog: &Catalog, probes: &[LabeledQuery]) -> Vec<LabeledQuery> {
    probes
        .iter()
        .filter(|p| catalog.contains(p.target.as_str()))
        .cloned()
        .collect()
}

fn run_metrics(common: &Common, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Validation {
            field: "k".into(),
            message: "must be at least 1".into(),
        }
        .into());
    }
    let cfg = common.load()?;
    let episode = cfg.episode();
    let env = make_environment(&episode, cfg.seed)?;
    let log = run_episode(&env, &episode)?;
    let probes = env.sample_queries(cfg.eval_queries, env.num_rounds(), cfg.seed);
    let online = log.accuracy();

    let mut rows = Vec::new();
    for (stage, catalog) in [("initial", &log.initial_catalog), ("final", &log.final_catalog)] {
        let set = present(catalog, &probes);
        if set.is_empty() {
            continue;
        }
        let s = evaluate_retrieval(catalog, &set, k)?;
        rows.push(vec![
            stage.to_string(),
            k.to_string(),
            s.queries.to_string(),
            s.recall.to_string(),
            s.ndcg.to_string(),
            s.top1.to_string(),
            online.to_string(),
        ]);
    }
    let out = common.out_dir()?;
    let metrics = csv_bytes(
        &["catalog", "k", "queries", "recall_at_k", "ndcg_at_k", "top1_accuracy", "online_accuracy"],
        rows,
    )?;

    let successes = log.successes();
    let window = (successes.len() / 20).max(1);
    let curve = rolling_accuracy(successes, window)?;
    let accuracy = csv_bytes(
        &["t", "rolling_accuracy"],
        curve
            .iter()
            .enumerate()
            .map(|(i, a)| vec![(i + window).to_string(), a.to_string()]),
    )?;
    write_atomic(&out.join("metrics.csv"), &metrics)?;
    write_atomic(&out.join("accuracy.csv"), &accuracy)?;
    Ok(())
}

fn run_export(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let episode = cfg.episode();
    let env = make_environment(&episode, cfg.seed)?;
    let catalog = with_precision(&initial_catalog(&env, cfg.sigma_init)?, &cfg);
    let stream = env.base_queries();
    let queries = VectorTable {
        dim: env.dim(),
        precision: Precision::F64,
        ids: stream.iter().map(|q| q.query.id.clone()).collect(),
        data: stream.iter().flat_map(|q| q.query.vector.iter().copied()).collect(),
    };
    let labels: String = stream
        .iter()
        .map(|q| format!("{} {}\n", q.query.id, q.target))
        .collect();
    let out = common.out_dir()?;
    write_table(&out.join("queries.orag"), &queries)?;
    write_catalog(&out.join("items.orag"), &catalog)?;
    write_atomic(&out.join("labels.txt"), labels.as_bytes())?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.load()?;
            let log = simulate(&cfg)?;
            write_run(common.out_dir()?, &cfg, &log)
        }
        Command::Replay(common) => run_replay(&common),
        Command::Regret { common, passes } => run_regret(&common, passes),
        Command::Metrics { common, k } => run_metrics(&common, k),
        Command::Export(common) => run_export(&common),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
