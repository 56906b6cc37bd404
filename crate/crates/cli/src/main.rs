mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use easytime_core::automl::{pretrain_offline, PretrainOptions};
use easytime_core::config::{load_datasets, validate_config, validate_pretrain_config, ConfigInvalid};
use easytime_core::evaluation::{EvalConfig, EvalRecord};
use easytime_core::forecasters::MethodSpec;
use easytime_core::pipeline::{
    run_pipeline, DatasetMeta, FailedRun, MemorySink, PipelineOptions, RecordSink, SinkError,
};
use easytime_qa::{QaEngine, SessionHistory};
use easytime_service::{Server, ServiceConfig};
use easytime_store::{method_key, Store};

use report::RunResults;

const ENV_WORKERS: &str = "EASYTIME_WORKERS";

/// Time-series forecasting workbench.
#[derive(Debug, Parser)]
#[command(name = "easytime", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every method on every dataset of a run config.
    Run {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Print the canonical form of a run config, or every problem with it.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Train the recommendation classifier offline.
    Pretrain {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        /// Service config file; defaults plus EASYTIME_* overrides when omitted.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Answer one question against a results database.
    Ask {
        #[arg(short = 'd', long)]
        db: PathBuf,
        question: String,
    },
    /// Write every table of a results database as CSV.
    Export {
        #[arg(short = 'd', long)]
        db: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build the demo benchmark database.
    Demo {
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config } => run(&config),
        Command::Validate { config } => validate(&config),
        Command::Pretrain { config, output } => pretrain(&config, &output),
        Command::Serve { config } => serve(config.as_deref()),
        Command::Ask { db, question } => ask(&db, &question),
        Command::Export { db, output } => {
            let store = Store::open_read_only(&db).with_context(|| format!("opening {}", db.display()))?;
            for path in store.export_csv(&output)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo { output } => {
            let store = easytime_qa::build_demo_store(&output)?;
            println!("{}: {} runs", output.display(), store.runs()?.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn read_config(path: &Path) -> Result<(String, PathBuf)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((text, base))
}

fn invalid(e: ConfigInvalid) -> anyhow::Error {
    let mut message = format!("invalid configuration, {} problem(s):", e.issues.len());
    for issue in &e.issues {
        message.push_str(&format!("\n  {issue}"));
    }
    anyhow::anyhow!(message)
}

fn workers(configured: usize) -> Result<usize> {
    match std::env::var(ENV_WORKERS) {
        Ok(v) => v.trim().parse().with_context(|| format!("{ENV_WORKERS}={v:?} is not a worker count")),
        Err(_) => Ok(configured),
    }
}

fn validate(path: &Path) -> Result<ExitCode> {
    let (text, _) = read_config(path)?;
    let config = validate_config(&text).map_err(invalid)?;
    println!("{}", serde_json::to_string_pretty(&config)?);
    Ok(ExitCode::SUCCESS)
}

/// Prints `done/total` to stderr at every tenth of the way.
fn progress_printer(label: &'static str) -> impl Fn(usize, usize) + Sync {
    let last = AtomicUsize::new(usize::MAX);
    move |done, total| {
        let tenth = done * 10 / total.max(1);
        if last.swap(tenth, Ordering::Relaxed) != tenth {
            eprintln!("{label}: {done}/{total}");
        }
    }
}

/// Writes to the store and keeps a copy of what was written.
struct Tee<'a> {
    store: &'a mut Store,
    memory: MemorySink,
}

impl RecordSink for Tee<'_> {
    fn put_dataset(&mut self, meta: &DatasetMeta) -> Result<(), SinkError> {
        self.store.put_dataset(meta)?;
        self.memory.put_dataset(meta)
    }

    fn put_method(&mut self, spec: &MethodSpec) -> Result<(), SinkError> {
        self.store.put_method(spec)?;
        self.memory.put_method(spec)
    }

    fn put_record(&mut self, record: &EvalRecord, spec: &MethodSpec, config: &EvalConfig) -> Result<(), SinkError> {
        self.store.put_record(record, spec, config)?;
        self.memory.put_record(record, spec, config)
    }

    fn put_failure(&mut self, failure: &FailedRun, config: &EvalConfig) -> Result<(), SinkError> {
        self.store.put_failure(failure, config)?;
        self.memory.put_failure(failure, config)
    }
}

fn run(path: &Path) -> Result<ExitCode> {
    let (text, base) = read_config(path)?;
    let config = validate_config(&text).map_err(invalid)?;
    let workers = workers(config.workers)?;
    let datasets = load_datasets(&config.datasets, &base, config.seed)?;
    let db_path = base.join(&config.output.results_db);
    let report_path = base.join(&config.output.report);
    eprintln!("evaluating {} datasets x {} methods", datasets.len(), config.methods.len());

    if let Some(dir) = db_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut store = Store::open(&db_path).with_context(|| format!("opening {}", db_path.display()))?;
    let mut sink = Tee { store: &mut store, memory: MemorySink::default() };
    let progress = progress_printer("runs");
    let options = PipelineOptions { workers, progress: Some(&progress) };
    let summary = run_pipeline(&datasets, &config.methods, &config.eval, &mut sink, &options)?;
    let memory = sink.memory;

    // Records arrive in cell order; pair each with its method's store key.
    let mut method_keys = Vec::with_capacity(memory.records.len());
    let mut failed_cells = summary.failed.iter().peekable();
    for series in &datasets {
        for spec in &config.methods {
            if failed_cells.next_if(|f| f.dataset_id == series.id() && f.method == *spec).is_none() {
                method_keys.push(method_key(spec));
            }
        }
    }
    let results = RunResults {
        config: &config,
        n_datasets: datasets.len(),
        records: &memory.records,
        method_keys: &method_keys,
        failures: &summary.failed,
    };
    write_file(&report_path, &report::markdown(&results))?;
    let csv_path = report_path.with_extension("csv");
    write_file(&csv_path, &report::per_dataset_csv(&results))?;

    eprintln!(
        "{} ok, {} failed; results in {}, report in {}",
        summary.ok,
        summary.failed.len(),
        db_path.display(),
        report_path.display()
    );
    for f in &summary.failed {
        eprintln!("failed: {} / {}: {}", f.dataset_id, method_key(&f.method), f.error);
    }
    Ok(if summary.failed.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pretrain(path: &Path, output: &Path) -> Result<ExitCode> {
    let (text, base) = read_config(path)?;
    let config = validate_pretrain_config(&text).map_err(invalid)?;
    let workers = workers(config.workers)?;
    let corpus = load_datasets(&config.datasets, &base, config.seed)?;
    eprintln!("pretraining on {} series x {} methods", corpus.len(), config.methods.len());
    let progress = progress_printer("cells");
    let options =
        PretrainOptions { hyper: config.hyper, pipeline: PipelineOptions { workers, progress: Some(&progress) } };
    let outcome = pretrain_offline(&corpus, &config.methods, &config.eval, &options)?;
    write_file(output, &(outcome.model.to_json() + "\n"))?;
    eprintln!(
        "trained on {} series ({} imputed cells, {} dropped); final loss {:.6}; model in {}",
        outcome.meta.len(),
        outcome.imputed_cells,
        outcome.dropped_series.len(),
        outcome.model.train_meta.final_loss,
        output.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn serve(path: Option<&Path>) -> Result<ExitCode> {
    let config = match path {
        Some(p) => ServiceConfig::from_file(p)?,
        None => ServiceConfig::default(),
    }
    .with_env()?;
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let server = Server::bind(config).await?;
        eprintln!("listening on http://{}", server.local_addr()?);
        server
            .run_until(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(ExitCode::SUCCESS)
    })
}

fn ask(db: &Path, question: &str) -> Result<ExitCode> {
    if !db.exists() {
        bail!("no results database at {}", db.display());
    }
    let store = Store::open_read_only(db).with_context(|| format!("opening {}", db.display()))?;
    let answer = QaEngine::from_env().answer(question, &mut SessionHistory::new("cli"), &store);
    println!("{}", answer.text);
    for notice in &answer.notices {
        eprintln!("note: {notice}");
    }
    let Some(sql) = &answer.sql else { return Ok(ExitCode::from(1)) };
    println!("\nSQL: {sql}\n");
    println!("{}", answer.columns.join("\t"));
    for row in &answer.rows {
        println!("{}", row.iter().map(|v| v.render()).collect::<Vec<_>>().join("\t"));
    }
    Ok(if answer.error.is_some() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
