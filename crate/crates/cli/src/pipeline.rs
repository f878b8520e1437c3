//! The `attack` run: fixture → target → oracle → exfiltrate → augment sweep →
//! substitute search → causative → evasion → report.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.toml            completed manifest (seed resolved, artifacts listed)
//! fixtures/                generated fixture (make-fixtures layout), unless supplied
//! target.bin               trained target, unless supplied
//! test_labels.jsonl        test split with oracle labels
//! exfiltrated.jsonl        budgeted query results (labels only); partial on failure
//! gan/                     generator.model, discriminator.model, scaler.txt, losses.csv
//! synthetic.jsonl          synthetic samples of the largest sweep size
//! sweep.txt, sweep.csv     augmentation sweep table
//! search.csv               validation d_max per grid point
//! substitute.model         selected substitute
//! substitute_report.txt    divergence of the substitute from the target on the test split
//! causative/flipped.jsonl  poisoned candidate labels
//! causative/report.txt     d(T, T̃) for extreme-score and random flips
//! evasion/selected.csv     chosen evasion samples
//! evasion/report.txt       target error on the selection vs random
//! summary.json             machine-readable results
//! report.md                human-readable report
//! status.json              last stage reached and the outcome
//! ```

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use apilab_core::attacks::{
    augmentation_sweep, causative_select, evaluate_causative, evaluate_evasion, evasion_select, exploratory_attack,
    hyperparameter_search, mean_d, random_flip_impact, split_train_validation, EvasionReport, ExfiltrationStatus, SweepRow,
};
use apilab_core::dataset::{features_to_matrix, Dataset, LabeledSample};
use apilab_core::featurizer::FeatureVector;
use apilab_core::metrics::{divergence_from_labels, render_sweep_csv, render_sweep_table, Classifier, DivergenceReport};
use apilab_core::oracle::{
    train_mock_target, ClassifyService, Clock, LabelOracle, QueryBudget, SystemClock, TargetClassifier,
};
use apilab_service::{spawn_background, HttpOracle, RunningServer};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, InStage, StageError};
use crate::fixtures::{self, LoadedFixture};
use crate::io::write_text;
use crate::manifest::{OracleMode, RunManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub exfiltrated: usize,
    pub sweep: Vec<SweepRow>,
    pub search_best_index: usize,
    pub substitute: DivergenceReport,
    pub causative_flips: usize,
    pub causative: DivergenceReport,
    /// One report per random-flip draw.
    pub causative_random: Vec<DivergenceReport>,
    pub evasion: EvasionReport,
}

#[derive(Debug, Serialize)]
struct Status<'a> {
    stage: &'a str,
    ok: bool,
    exit_code: i32,
    message: String,
}

/// Writes `status.json` for a failed run.
pub fn record_failure(out: &Path, err: &StageError) {
    let status = Status {
        stage: err.stage,
        ok: false,
        exit_code: err.source.exit_code(),
        message: err.source.to_string(),
    };
    let _ = write_text(
        &out.join("status.json"),
        &(serde_json::to_string_pretty(&status).expect("status serializes") + "\n"),
    );
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &(serde_json::to_string_pretty(value).expect("serializable") + "\n"))
}

struct Oracles {
    attack: Box<dyn LabelOracle>,
    eval: Box<dyn LabelOracle>,
    _servers: Vec<RunningServer>,
}

fn build_oracles(manifest: &RunManifest, target: &TargetClassifier) -> Result<Oracles, CliError> {
    let clock: Arc<dyn Clock> = Arc::new(SystemClock);
    let window = Duration::from_secs(manifest.oracle.window_seconds);
    let service = |limit: u64| -> Result<Arc<ClassifyService>, CliError> {
        let budget = QueryBudget::new(limit, window, clock.now())?;
        Ok(Arc::new(ClassifyService::new(target.clone(), budget, clock.clone())))
    };
    match manifest.oracle.mode {
        OracleMode::InProcess => Ok(Oracles {
            attack: Box::new(service(manifest.oracle.limit)?),
            eval: Box::new(service(manifest.oracle.eval_limit)?),
            _servers: Vec::new(),
        }),
        OracleMode::Spawn => {
            let attack = spawn_background(service(manifest.oracle.limit)?, "127.0.0.1:0")?;
            let eval = spawn_background(service(manifest.oracle.eval_limit)?, "127.0.0.1:0")?;
            Ok(Oracles {
                attack: Box::new(HttpOracle::new(&attack.url())),
                eval: Box::new(HttpOracle::new(&eval.url())),
                _servers: vec![attack, eval],
            })
        }
        OracleMode::Remote => {
            let url = manifest.oracle.endpoint.as_deref().expect("validated");
            Ok(Oracles {
                attack: Box::new(HttpOracle::new(url)),
                eval: Box::new(HttpOracle::new(url)),
                _servers: Vec::new(),
            })
        }
    }
}

fn label_all(oracle: &mut dyn LabelOracle, features: &[FeatureVector]) -> Result<Dataset, CliError> {
    let mut samples = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let answer = oracle.query(f).map_err(|e| match e {
            apilab_core::oracle::OracleError::RateLimited { retry_after_seconds } => CliError::RateLimitExhausted {
                obtained: i,
                requested: features.len(),
                retry_after_seconds,
            },
            apilab_core::oracle::OracleError::Network(message) => CliError::Network { obtained: i, message },
            other => CliError::Core(other.into()),
        })?;
        samples.push(LabeledSample::new(f.clone(), answer.label));
    }
    Ok(Dataset::new(samples)?)
}

fn slice(data: &Dataset, start: usize, len: usize) -> Dataset {
    data.subset(&(start..start + len).collect::<Vec<_>>())
}

/// Runs every stage; `manifest.seed` must be resolved.
pub fn run_attack(manifest: &RunManifest, out: &Path) -> Result<RunSummary, StageError> {
    manifest.validate().stage("manifest")?;
    let seed = manifest.seed.expect("seed resolved by caller");
    let mut completed = manifest.clone();
    completed.artifacts.clear();
    let mut artifact = |key: &str, rel: &str| {
        completed.artifacts.insert(key.to_string(), rel.to_string());
    };

    let fixture: LoadedFixture = match &manifest.fixture.dir {
        Some(dir) => fixtures::load(dir).stage("fixture")?,
        None => {
            let f = &manifest.fixture;
            let generated = fixtures::generate(f.target_documents, f.holdout_documents, f.vocab_size, f.seed)
                .stage("fixture")?;
            fixtures::write(&out.join("fixtures"), &generated).stage("fixture")?;
            artifact("fixtures", "fixtures");
            generated.into()
        }
    };
    let split = &manifest.split;
    if fixture.holdout.len() < split.total() {
        return Err(CliError::Manifest(format!(
            "holdout has {} samples but the split needs {}",
            fixture.holdout.len(),
            split.total()
        )))
        .stage("fixture");
    }

    let target = match &manifest.target.path {
        Some(path) => TargetClassifier::load(path).stage("target")?,
        None => {
            let t = train_mock_target(&fixture.target_train, &manifest.target.spec)
                .and_then(|t| TargetClassifier::new(t.model().clone(), manifest.target.threshold))
                .stage("target")?;
            t.save(&out.join("target.bin")).stage("target")?;
            artifact("target", "target.bin");
            t
        }
    };
    let mut oracles = build_oracles(manifest, &target).stage("oracle")?;

    let mut offset = 0;
    let mut take = |len: usize| {
        let d = slice(&fixture.holdout, offset, len);
        offset += len;
        d
    };
    let test_split = take(split.test);
    let pool = take(split.pool);
    let causative_candidates = take(split.causative_candidates);
    let evasion_candidates = take(split.evasion_candidates);
    let causative_eval = take(split.causative_eval);

    let test = label_all(oracles.eval.as_mut(), &test_split.features()).stage("label-test")?;
    write_text(&out.join("test_labels.jsonl"), &test.to_jsonl()).stage("label-test")?;
    artifact("test_labels", "test_labels.jsonl");

    let pool_features = pool.features();
    let run = exploratory_attack(
        &mut oracles.attack.as_mut(),
        &pool_features,
        manifest.attack.query_budget,
        manifest.stage_seed(1),
    )
    .stage("exfiltrate")?;
    let exfiltrated = run.dataset().stage("exfiltrate")?;
    write_text(&out.join("exfiltrated.jsonl"), &exfiltrated.to_jsonl()).stage("exfiltrate")?;
    artifact("exfiltrated", "exfiltrated.jsonl");
    match run.status {
        ExfiltrationStatus::Complete => {}
        ExfiltrationStatus::RateLimited { retry_after_seconds } => {
            return Err(CliError::RateLimitExhausted {
                obtained: run.samples.len(),
                requested: manifest.attack.query_budget,
                retry_after_seconds,
            })
            .stage("exfiltrate")
        }
        ExfiltrationStatus::NetworkFailure { message } => {
            return Err(CliError::Network {
                obtained: run.samples.len(),
                message,
            })
            .stage("exfiltrate")
        }
    }

    let base = apilab_core::nn::TrainConfig {
        seed: manifest.stage_seed(3),
        ..manifest.train.clone()
    };
    let gan_config = apilab_core::gan::GanConfig {
        seed: manifest.stage_seed(2),
        ..manifest.gan.clone()
    };
    let real = slice(&exfiltrated, 0, manifest.attack.sweep_real);
    let (rows, gan) = augmentation_sweep(
        &real,
        &manifest.attack.augmentation_sizes,
        &gan_config,
        &manifest.attack.sweep_hyperparams,
        &base,
        &test,
    )
    .stage("augment")?;
    let tuples: Vec<_> = rows.iter().map(SweepRow::as_tuple).collect();
    write_text(&out.join("sweep.txt"), &render_sweep_table(&tuples)).stage("augment")?;
    write_text(&out.join("sweep.csv"), &render_sweep_csv(&tuples)).stage("augment")?;
    artifact("sweep", "sweep.txt");
    artifact("sweep_csv", "sweep.csv");
    if let Some(gan) = &gan {
        gan.save(&out.join("gan")).stage("augment")?;
        artifact("gan", "gan");
        let largest = manifest.attack.augmentation_sizes.iter().copied().max().unwrap_or(0);
        let synthetic = gan
            .synthesize_balanced(largest, &real, manifest.stage_seed(7))
            .stage("augment")?;
        write_text(&out.join("synthetic.jsonl"), &synthetic.to_jsonl()).stage("augment")?;
        artifact("synthetic", "synthetic.jsonl");
    }

    let (train_part, validation) = split_train_validation(&exfiltrated, manifest.stage_seed(4));
    let search = hyperparameter_search(&train_part, &validation, &manifest.attack.grid, &base).stage("search")?;
    let mut csv = String::from("index,hidden_layers,neurons_per_layer,weight_scale,minibatch_size,momentum,d_max\n");
    for (i, (hp, score)) in manifest.attack.grid.iter().zip(&search.scores).enumerate() {
        let score = match score {
            Ok(v) => v.to_string(),
            Err(_) => "failed".to_string(),
        };
        writeln!(
            csv,
            "{i},{},{},{},{},{},{score}",
            hp.hidden_layers, hp.neurons_per_layer, hp.weight_scale, hp.minibatch_size, hp.momentum
        )
        .expect("String write");
    }
    write_text(&out.join("search.csv"), &csv).stage("search")?;
    let substitute = search.model.with_threshold(manifest.attack.threshold).stage("search")?;
    substitute.save(&out.join("substitute.model")).stage("search")?;
    let predicted = substitute.classify_batch(&test.features()).stage("search")?;
    let substitute_report = divergence_from_labels(&test.labels(), &predicted).stage("search")?;
    write_text(&out.join("substitute_report.txt"), &substitute_report.to_key_values()).stage("search")?;
    artifact("search", "search.csv");
    artifact("substitute", "substitute.model");
    artifact("substitute_report", "substitute_report.txt");

    let candidates = causative_candidates.features();
    let selection = causative_select(&substitute, &candidates, manifest.attack.causative_p).stage("causative")?;
    let scores = features_to_matrix(&candidates, substitute.input_dim())
        .and_then(|m| substitute.scores(m.view()))
        .stage("causative")?;
    let eval_features = causative_eval.features();
    let spec = &manifest.target.spec;
    let (_, causative) =
        evaluate_causative(spec, &fixture.target_train, &selection.flipped_dataset, &eval_features).stage("causative")?;
    let causative_random = random_flip_impact(
        spec,
        &fixture.target_train,
        &scores,
        &candidates,
        selection.flip_indices.len(),
        manifest.attack.threshold,
        manifest.stage_seed(5),
        manifest.attack.causative_random_draws,
        &eval_features,
    )
    .stage("causative")?;
    write_text(&out.join("causative/flipped.jsonl"), &selection.flipped_dataset.to_jsonl()).stage("causative")?;
    write_text(
        &out.join("causative/report.txt"),
        &causative_report_text(selection.flip_indices.len(), &causative, &causative_random),
    )
    .stage("causative")?;
    artifact("causative", "causative/report.txt");

    let evasion_features = evasion_candidates.features();
    let chosen = evasion_select(&substitute, &evasion_features, manifest.evasion.mode, manifest.evasion.size)
        .stage("evasion")?;
    let truth = evasion_candidates.labels();
    let evasion = evaluate_evasion(&target, &evasion_features, Some(&truth), &chosen, manifest.stage_seed(6))
        .stage("evasion")?;
    let mut selected_csv = String::from("candidate,score\n");
    for (i, s) in &chosen.selected {
        writeln!(selected_csv, "{i},{s}").expect("String write");
    }
    write_text(&out.join("evasion/selected.csv"), &selected_csv).stage("evasion")?;
    let rate = |r: Option<f64>| r.map_or("undefined".to_string(), |v| v.to_string());
    write_text(
        &out.join("evasion/report.txt"),
        &format!(
            "size = {}\nselected_error = {}\nbaseline_error = {}\n",
            evasion.size,
            rate(evasion.selected_error),
            rate(evasion.baseline_error)
        ),
    )
    .stage("evasion")?;
    artifact("evasion", "evasion/report.txt");

    let summary = RunSummary {
        seed,
        exfiltrated: exfiltrated.len(),
        sweep: rows,
        search_best_index: search.best_index,
        substitute: substitute_report,
        causative_flips: selection.flip_indices.len(),
        causative,
        causative_random,
        evasion,
    };
    write_json(&out.join("summary.json"), &summary).stage("report")?;
    write_text(&out.join("report.md"), &render_report(&summary)).stage("report")?;
    artifact("summary", "summary.json");
    artifact("report", "report.md");
    write_text(&out.join("manifest.toml"), &completed.to_toml()).stage("report")?;
    write_json(
        &out.join("status.json"),
        &Status {
            stage: "report",
            ok: true,
            exit_code: 0,
            message: String::new(),
        },
    )
    .stage("report")?;
    Ok(summary)
}

fn causative_report_text(flips: usize, extreme: &DivergenceReport, random: &[DivergenceReport]) -> String {
    let mut out = format!("flips = {flips}\n[extreme]\n{}", extreme.to_key_values());
    for (i, r) in random.iter().enumerate() {
        write!(out, "[random.{i}]\n{}", r.to_key_values()).expect("String write");
    }
    writeln!(out, "[random.mean]\nd = {}", mean_d(random)).expect("String write");
    out
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

pub fn render_report(s: &RunSummary) -> String {
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "# Attack run report\n").unwrap();
    writeln!(w, "seed: {}\n", s.seed).unwrap();
    writeln!(w, "## Exploratory attack\n").unwrap();
    writeln!(w, "Labelled samples obtained: {}", s.exfiltrated).unwrap();
    writeln!(w, "Selected grid point: {}", s.search_best_index).unwrap();
    writeln!(
        w,
        "Substitute vs target on the test split: d1 {}, d2 {}, d {}, d_max {}\n",
        pct(s.substitute.d1()),
        pct(s.substitute.d2()),
        pct(s.substitute.d()),
        pct(s.substitute.d_max())
    )
    .unwrap();
    writeln!(w, "## Augmentation sweep\n").unwrap();
    writeln!(w, "```").unwrap();
    let tuples: Vec<_> = s.sweep.iter().map(SweepRow::as_tuple).collect();
    write!(w, "{}", render_sweep_table(&tuples)).unwrap();
    writeln!(w, "```\n").unwrap();
    writeln!(w, "## Causative attack\n").unwrap();
    writeln!(w, "Flipped labels: {}", s.causative_flips).unwrap();
    writeln!(
        w,
        "d(T, T~) extreme-score flips: d1 {}, d2 {}, d {}",
        pct(s.causative.d1()),
        pct(s.causative.d2()),
        pct(s.causative.d())
    )
    .unwrap();
    writeln!(
        w,
        "d(T, T~) random flips, mean of {} draws: d {}\n",
        s.causative_random.len(),
        pct(mean_d(&s.causative_random))
    )
    .unwrap();
    writeln!(w, "## Evasion attack\n").unwrap();
    let rate = |r: Option<f64>| r.map_or("undefined".to_string(), pct);
    writeln!(w, "Selected samples: {}", s.evasion.size).unwrap();
    writeln!(w, "Target error on selection: {}", rate(s.evasion.selected_error)).unwrap();
    writeln!(w, "Target error on random draw: {}", rate(s.evasion.baseline_error)).unwrap();
    out
}

/// Re-renders `report.md` from `summary.json`.
pub fn report_from_dir(out: &Path) -> Result<String, CliError> {
    let path = out.join("summary.json");
    let text = crate::io::read_text(&path)?;
    let summary: RunSummary =
        serde_json::from_str(&text).map_err(|e| CliError::Core(apilab_core::Error::Format(format!("{}: {e}", path.display()))))?;
    Ok(render_report(&summary))
}
