use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use apilab_cli::error::{exit, CliError, InStage, StageError};
use apilab_cli::fixtures;
use apilab_cli::io::write_text;
use apilab_cli::manifest::{resolve_seed, RunManifest};
use apilab_cli::pipeline::{record_failure, report_from_dir, run_attack};
use apilab_core::dataset::Dataset;
use apilab_core::oracle::{train_mock_target, ClassifyService, Clock, QueryBudget, SystemClock, TargetClassifier, TargetSpec};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "apilab", version, about = "Attack lab for rate-limited classifier APIs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, vocabulary and featurized splits.
    MakeFixtures {
        #[arg(long)]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 2000)]
        target_documents: usize,
        #[arg(long, default_value_t = 7000)]
        holdout_documents: usize,
        /// Vocabulary size.
        #[arg(long, default_value_t = 50)]
        k: usize,
        /// Featurize these two corpus files (one document per line) instead of generating.
        #[arg(long, requires = "corpus_two")]
        corpus_one: Option<PathBuf>,
        #[arg(long, requires = "corpus_one")]
        corpus_two: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the mock target on a labelled JSONL dataset.
    TrainTarget {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Accepted for uniformity; naive Bayes training is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve a trained target over HTTP until interrupted.
    Serve {
        #[arg(long)]
        target: PathBuf,
        #[arg(long, default_value_t = 1000)]
        limit: u64,
        /// Quota window in seconds.
        #[arg(long, default_value_t = 86_400)]
        window: u64,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Accepted for uniformity; serving is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the full attack pipeline described by a manifest.
    Attack {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output_dir: PathBuf,
        /// Overrides the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Query this endpoint instead of the manifest's oracle.
        #[arg(long)]
        endpoint: Option<String>,
    },
    /// Re-render report.md from a finished run's summary.json.
    Report {
        #[arg(long)]
        output_dir: PathBuf,
        /// Accepted for uniformity; rendering is deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn make_fixtures(
    out: &Path,
    target_documents: usize,
    holdout_documents: usize,
    k: usize,
    corpus: Option<(PathBuf, PathBuf)>,
    seed: u64,
) -> Result<(), CliError> {
    let fixture = match corpus {
        Some((one, two)) => fixtures::from_corpus_files(&one, &two, target_documents, k, seed)?,
        None => fixtures::generate(target_documents, holdout_documents, k, seed)?,
    };
    fixtures::write(out, &fixture)?;
    println!(
        "wrote {} target and {} holdout samples (k = {k}, seed = {seed}) to {}",
        fixture.target_train.len(),
        fixture.holdout.len(),
        out.display()
    );
    Ok(())
}

fn train_target(data: &Path, output: &Path, threshold: f64) -> Result<(), CliError> {
    let data = Dataset::load(data)?;
    let trained = train_mock_target(&data, &TargetSpec::NaiveBayes)?;
    let target = TargetClassifier::new(trained.model().clone(), threshold)?;
    target.save(output)?;
    println!("trained target on {} samples -> {}", data.len(), output.display());
    Ok(())
}

fn serve(target: &Path, limit: u64, window: u64, bind: &str, port: u16) -> Result<(), CliError> {
    let target = TargetClassifier::load(target)?;
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let budget = QueryBudget::new(limit, Duration::from_secs(window), clock.now())?;
    let service = Arc::new(ClassifyService::new(target, budget, clock));
    let addr: SocketAddr = format!("{bind}:{port}")
        .parse()
        .map_err(|e| CliError::Manifest(format!("bad bind address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Service(apilab_service::ServiceError::Runtime(e)))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|source| apilab_service::ServiceError::Bind { addr: addr.to_string(), source })?;
        println!("serving on http://{}", listener.local_addr().map_err(apilab_service::ServiceError::Runtime)?);
        apilab_service::serve(listener, service, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
        Ok(())
    })
}

fn attack(manifest: Option<&Path>, out: &Path, seed: Option<u64>, endpoint: Option<String>) -> Result<(), StageError> {
    let mut m = match manifest {
        Some(p) => RunManifest::load(p).stage("manifest")?,
        None => RunManifest::default(),
    };
    m.seed = Some(resolve_seed(seed, m.seed));
    if let Some(url) = endpoint {
        m.oracle.mode = apilab_cli::manifest::OracleMode::Remote;
        m.oracle.endpoint = Some(url);
    }
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e)).stage("manifest")?;
    let summary = run_attack(&m, out)?;
    println!("seed {}; {} samples exfiltrated", summary.seed, summary.exfiltrated);
    println!("wrote {}", out.join("report.md").display());
    Ok(())
}

fn report(out: &Path) -> Result<(), CliError> {
    let text = report_from_dir(out)?;
    write_text(&out.join("report.md"), &text)?;
    print!("{text}");
    Ok(())
}

fn fail(stage: &str, err: &CliError) -> ExitCode {
    eprintln!("error[{stage}]: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::VALIDATION } else { exit::SUCCESS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let outcome = match cli.command {
        Command::MakeFixtures {
            output_dir,
            target_documents,
            holdout_documents,
            k,
            corpus_one,
            corpus_two,
            seed,
        } => make_fixtures(
            &output_dir,
            target_documents,
            holdout_documents,
            k,
            corpus_one.zip(corpus_two),
            seed.unwrap_or(2017),
        )
        .map_err(|e| ("make-fixtures", e)),
        Command::TrainTarget {
            data, output, threshold, ..
        } => train_target(&data, &output, threshold).map_err(|e| ("train-target", e)),
        Command::Serve {
            target,
            limit,
            window,
            bind,
            port,
            ..
        } => serve(&target, limit, window, &bind, port).map_err(|e| ("serve", e)),
        Command::Attack {
            manifest,
            output_dir,
            seed,
            endpoint,
        } => match attack(manifest.as_deref(), &output_dir, seed, endpoint) {
            Ok(()) => Ok(()),
            Err(e) => {
                record_failure(&output_dir, &e);
                Err((e.stage, e.source))
            }
        },
        Command::Report { output_dir, .. } => report(&output_dir).map_err(|e| ("report", e)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, e)) => fail(stage, &e),
    }
}
