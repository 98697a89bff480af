//! Subcommand definitions and their implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fgvl_core::config::RunConfig;
use fgvl_core::corpus::{generate_synthetic_corpus, load_manifest, write_manifest, Corpus, NORMAL_CATEGORY};
use fgvl_core::evaluator::{
    linear_probe, score_texts, unseen_category_eval, zero_shot_report, CategoryLibrary, EvalReport, LibraryStyle,
    ProbeConfig, ProbeData, RetrievalStyle, UnseenMode,
};
use fgvl_core::extractor::{
    extract_corpus, fallback_corpus, ExtractionCache, ExtractionRecord, FixtureClient, Lexicon, LlmClient,
    PromptConfig, RetryPolicy,
};
use fgvl_core::knowledge::{render_structured_label, KnowledgeDictionary, LookupPolicy, RenderMode};
use fgvl_core::model::{load_checkpoint, render_mode, save_checkpoint, Checkpoint, Switches};
use fgvl_core::pipeline::{self, TripletRecord};
use fgvl_core::triplet::normalize_category;

use crate::http::HttpClient;
use crate::plot;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl From<fgvl_core::Error> for CliError {
    fn from(e: fgvl_core::Error) -> Self {
        match e {
            fgvl_core::Error::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.into()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "fgvl", version, about = "Fine-grained vision-language pretraining pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClientKind {
    /// Replay recorded responses keyed by prompt hash.
    Fixture,
    /// OpenAI-compatible chat-completions endpoint.
    Http,
    /// Rule-based extraction; no model.
    Fallback,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LabelMode {
    Entity,
    FgEntity,
    FgEntityPlusExplanation,
}

impl From<LabelMode> for RenderMode {
    fn from(m: LabelMode) -> Self {
        match m {
            LabelMode::Entity => RenderMode::Entity,
            LabelMode::FgEntity => RenderMode::FgEntity,
            LabelMode::FgEntityPlusExplanation => RenderMode::FgEntityPlusExplanation,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LibraryKind {
    /// Render class texts the way the checkpoint was trained.
    Auto,
    Entity,
    FgEntity,
    Explanation,
    PromptTemplate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic corpus of a configuration as train/eval manifests.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract disease triplets from the reports of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        client: ClientKind,
        /// Recorded responses for the fixture client.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        /// Append-only response cache; in memory when absent.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Output JSON lines, one record per study.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "https://api.openai.com/v1")]
        endpoint: String,
        #[arg(long, default_value = "gpt-3.5-turbo")]
        model: String,
        /// Environment variable holding the API key of the http client.
        #[arg(long, default_value = "FGVL_API_KEY")]
        api_key_env: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Lexicon TOML for the fallback extractor.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Prompt template file; must contain `{report}`.
        #[arg(long)]
        prompt_template: Option<PathBuf>,
        /// Extract even for studies that carry gold triplets.
        #[arg(long)]
        ignore_gold: bool,
    },
    /// Render extracted triplets into label texts.
    BuildLabels {
        #[arg(long)]
        triplets: PathBuf,
        #[arg(long)]
        dict: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "fg-entity-plus-explanation")]
        mode: LabelMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a dual encoder.
    Pretrain {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        mask_prob: Option<f64>,
        /// Comma list of fg, iki, ssm, or `entity-only`.
        #[arg(long)]
        switches: Option<String>,
        /// Extracted triplets overriding gold triplets.
        #[arg(long)]
        triplets: Option<PathBuf>,
    },
    /// Zero-shot classification report.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        /// Evaluation manifest; the configuration's synthetic eval split when absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        library: LibraryKind,
        /// Classes to score; every non-held-out category of the manifest by default.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Image-to-report retrieval Precision@k.
    Retrieve {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        k: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linear probe on frozen image features.
    Probe {
        #[arg(long)]
        ckpt: PathBuf,
        /// Probe training manifest; the synthetic train split when absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Validation/test manifest; the synthetic eval split when absent.
        #[arg(long)]
        held_out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        portion: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render figures from a run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth { config, out } => synth(config.as_deref(), &out),
        Command::Extract {
            manifest,
            client,
            fixtures,
            cache,
            out,
            endpoint,
            model,
            api_key_env,
            workers,
            lexicon,
            prompt_template,
            ignore_gold,
        } => {
            let source = match client {
                ClientKind::Fixture => {
                    let path = fixtures.ok_or_else(|| CliError::Usage("--client fixture needs --fixtures".into()))?;
                    Source::Client(Box::new(FixtureClient::load("fixture", &path)?))
                }
                ClientKind::Http => Source::Client(Box::new(
                    HttpClient::from_env(&endpoint, &model, &api_key_env, workers).map_err(|e| CliError::Config(e.to_string()))?,
                )),
                ClientKind::Fallback => Source::Fallback(match lexicon {
                    Some(p) => Lexicon::from_toml(&read_text(&p)?)?,
                    None => Lexicon::default(),
                }),
            };
            let mut prompt = PromptConfig::default();
            if let Some(p) = prompt_template {
                prompt.instruction_template = read_text(&p)?;
            }
            extract(&manifest, source, cache.as_deref(), &prompt, ignore_gold, &out)
        }
        Command::BuildLabels {
            triplets,
            dict,
            mode,
            out,
        } => build_labels(&triplets, dict.as_deref(), mode.into(), &out),
        Command::Pretrain {
            config,
            out,
            seed,
            epochs,
            lr,
            batch_size,
            mask_prob,
            switches,
            triplets,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(v) = seed {
                cfg.train.seed = v;
            }
            if let Some(v) = epochs {
                cfg.train.epochs = v;
            }
            if let Some(v) = lr {
                cfg.train.lr = v;
            }
            if let Some(v) = batch_size {
                cfg.train.batch_size = v;
            }
            if let Some(v) = mask_prob {
                cfg.train.mask_prob = v;
            }
            if let Some(s) = switches {
                cfg.train.switches = parse_switches(&s)?;
            }
            if triplets.is_some() {
                cfg.triplets = triplets;
            }
            pretrain(cfg, &out)
        }
        Command::Eval {
            ckpt,
            manifest,
            config,
            library,
            classes,
            out,
        } => eval(&ckpt, manifest.as_deref(), config.as_deref(), library, classes, &out),
        Command::Retrieve {
            ckpt,
            manifest,
            config,
            k,
            out,
        } => retrieve(&ckpt, manifest.as_deref(), config.as_deref(), &k, &out),
        Command::Probe {
            ckpt,
            manifest,
            held_out,
            config,
            portion,
            out,
        } => probe(&ckpt, manifest.as_deref(), held_out.as_deref(), config.as_deref(), portion, &out),
        Command::Report { run_dir, out } => report(&run_dir, &out),
    }
}

// ---------------------------------------------------------------- helpers

fn read_text(path: &Path) -> CliResult<String> {
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn create_dir(path: &Path) -> CliResult<()> {
    Ok(fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    Ok(fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(&row).context("serializing output")?;
        writeln!(w, "{line}").with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

/// The given file, or the shipped configuration. Relative paths inside the
/// file resolve against the file's directory.
fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::shipped());
    };
    let text = read_text(path)?;
    let mut cfg = RunConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(base, &mut cfg.dictionary);
    resolve(base, &mut cfg.train_manifest);
    resolve(base, &mut cfg.eval_manifest);
    resolve(base, &mut cfg.triplets);
    Ok(cfg)
}

/// Configuration for commands that start from a checkpoint: `--config`, else
/// the `config.toml` written next to the checkpoint, else the shipped one.
fn config_for_checkpoint(explicit: Option<&Path>, ckpt: &Path) -> CliResult<RunConfig> {
    if explicit.is_some() {
        return load_config(explicit);
    }
    let beside = ckpt.parent().unwrap_or(Path::new(".")).join("config.toml");
    if beside.exists() {
        load_config(Some(&beside))
    } else {
        Ok(RunConfig::shipped())
    }
}

fn check_config(cfg: &RunConfig) -> CliResult<()> {
    let problems = fgvl_core::validate_config(cfg);
    if problems.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(problems.join("; ")))
    }
}

fn parse_switches(text: &str) -> CliResult<Switches> {
    if text == "entity-only" {
        return Ok(Switches::entity_only());
    }
    let mut s = Switches::entity_only();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "fg" => s.use_fg = true,
            "iki" => s.use_iki = true,
            "ssm" => s.use_ssm = true,
            other => return Err(CliError::Usage(format!("unknown switch `{other}`; expected fg, iki, ssm"))),
        }
    }
    Ok(s)
}

fn open_checkpoint(path: &Path) -> CliResult<Checkpoint> {
    Ok(load_checkpoint(path)?)
}

fn eval_corpus(manifest: Option<&Path>, cfg: &RunConfig) -> CliResult<Corpus> {
    match manifest {
        Some(p) => Ok(load_manifest(p)?),
        None => Ok(pipeline::load_datasets(cfg)?.eval),
    }
}

fn config_value(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null)
}

/// Echo the effective configuration next to command outputs.
fn dump_config(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    write_bytes(&out_dir.join("config.toml"), cfg.to_toml().as_bytes())
}

// ---------------------------------------------------------------- synth

fn synth(config: Option<&Path>, out: &Path) -> CliResult<()> {
    let cfg = load_config(config)?;
    check_config(&cfg)?;
    let (train, eval) = generate_synthetic_corpus(&cfg.synthetic)?;
    create_dir(out)?;
    write_manifest(&train, &out.join("train.jsonl"))?;
    write_manifest(&eval, &out.join("eval.jsonl"))?;
    log::info!("wrote {} train and {} eval studies to {}", train.len(), eval.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------- extract

enum Source {
    Client(Box<dyn LlmClient>),
    Fallback(Lexicon),
}

fn extract(
    manifest: &Path,
    source: Source,
    cache: Option<&Path>,
    prompt: &PromptConfig,
    ignore_gold: bool,
    out: &Path,
) -> CliResult<()> {
    prompt.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut corpus = load_manifest(manifest)?;
    if ignore_gold {
        for s in &mut corpus.studies {
            s.gold_triplets = None;
        }
    }
    let records: Vec<ExtractionRecord> = match source {
        Source::Fallback(lexicon) => fallback_corpus(&corpus, &lexicon),
        Source::Client(client) => {
            let cache = match cache {
                Some(p) => ExtractionCache::open(p)?,
                None => ExtractionCache::in_memory(),
            };
            let retry = RetryPolicy {
                max_attempts: 3,
                base_delay: Duration::from_millis(500),
            };
            extract_corpus(&corpus, client.as_ref(), &cache, prompt, &retry)?
        }
    };
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    write_jsonl(out, &records)?;
    log::info!("{} studies extracted, {failed} failed", records.len());
    Ok(())
}

// ---------------------------------------------------------------- build-labels

#[derive(Serialize)]
struct LabelRow {
    id: String,
    labels: Vec<String>,
}

fn read_triplet_file(path: &Path) -> CliResult<Vec<TripletRecord>> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TripletRecord = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

fn build_labels(triplets: &Path, dict: Option<&Path>, mode: RenderMode, out: &Path) -> CliResult<()> {
    let dict = match dict {
        Some(p) => KnowledgeDictionary::load(p)?,
        None => KnowledgeDictionary::shipped(),
    };
    let rows = read_triplet_file(triplets)?
        .into_iter()
        .map(|rec| {
            let labels = rec
                .triplets
                .iter()
                .map(|t| render_structured_label(t, &dict, mode, LookupPolicy::Fallback).map(|l| l.text))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(LabelRow { id: rec.id, labels })
        })
        .collect::<Result<Vec<_>, fgvl_core::Error>>()?;
    write_jsonl(out, &rows)
}

// ---------------------------------------------------------------- pretrain

#[derive(Serialize)]
struct PretrainSummary {
    n_train: usize,
    epochs: usize,
    initial_loss: Option<f64>,
    final_loss: Option<f64>,
    epoch_losses: Vec<f64>,
}

fn pretrain(mut cfg: RunConfig, out: &Path) -> CliResult<()> {
    cfg.output_dir = out.to_path_buf();
    check_config(&cfg)?;
    create_dir(out)?;
    dump_config(&cfg, out)?;
    let data = pipeline::load_datasets(&cfg)?;
    let dict = pipeline::load_dictionary(&cfg)?;
    let output = pipeline::pretrain(&cfg, &data.train, &dict)?;
    save_checkpoint(&output.checkpoint, &out.join("model.ckpt"))?;
    write_jsonl(&out.join("train_log.jsonl"), &output.log)?;
    write_json(
        &out.join("pretrain.json"),
        &PretrainSummary {
            n_train: data.train.len(),
            epochs: cfg.train.epochs,
            initial_loss: output.epoch_losses.first().copied(),
            final_loss: output.epoch_losses.last().copied(),
            epoch_losses: output.epoch_losses.clone(),
        },
    )?;
    log::info!(
        "trained {} epochs; loss {:?} -> {:?}",
        cfg.train.epochs,
        output.epoch_losses.first(),
        output.epoch_losses.last()
    );
    Ok(())
}

// ---------------------------------------------------------------- eval

fn library_style(kind: LibraryKind, switches: &Switches) -> LibraryStyle {
    match kind {
        LibraryKind::Auto => render_mode(switches).into(),
        LibraryKind::Entity => LibraryStyle::Entity,
        LibraryKind::FgEntity => LibraryStyle::FgEntity,
        LibraryKind::Explanation => LibraryStyle::FgEntityPlusExplanation,
        LibraryKind::PromptTemplate => LibraryStyle::PromptTemplate,
    }
}

/// Per-image class scores for a handful of images, for the similarity-bar figure.
#[derive(Debug, Serialize, serde::Deserialize)]
pub struct SimilarityExamples {
    pub classes: Vec<String>,
    pub rows: Vec<SimilarityRow>,
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct SimilarityRow {
    pub id: String,
    pub gold: Vec<String>,
    pub scores: Vec<f64>,
}

const SIMILARITY_EXAMPLES: usize = 8;

fn eval(
    ckpt_path: &Path,
    manifest: Option<&Path>,
    config: Option<&Path>,
    library: LibraryKind,
    classes: Option<Vec<String>>,
    out: &Path,
) -> CliResult<()> {
    let cfg = config_for_checkpoint(config, ckpt_path)?;
    let ckpt = open_checkpoint(ckpt_path)?;
    let dict = pipeline::load_dictionary(&cfg)?;
    let corpus = eval_corpus(manifest, &cfg)?;
    let categories = pipeline::sample_categories(&corpus)?;
    let images = pipeline::load_images(&corpus)?;
    let held_out: Vec<String> = cfg
        .synthetic
        .held_out_categories
        .iter()
        .map(|h| normalize_category(h))
        .collect();
    let present = pipeline::corpus_categories(&corpus);
    let classes: Vec<String> = match classes {
        Some(c) => c.iter().map(|x| normalize_category(x)).collect(),
        None => present
            .iter()
            .filter(|c| !held_out.contains(c) && c.as_str() != NORMAL_CATEGORY)
            .cloned()
            .collect(),
    };
    if classes.is_empty() {
        return Err(CliError::Usage("no classes to evaluate".into()));
    }
    let style = library_style(library, &ckpt.train.switches);
    let lib = CategoryLibrary::from_categories(&classes, style)?;
    let model = &ckpt.model;
    let mut report = zero_shot_report(model, &images, &categories, &lib, &dict, LookupPolicy::Fallback)?;
    report.config = config_value(&cfg);
    create_dir(out)?;
    dump_config(&cfg, out)?;
    write_json(&out.join("eval_report.json"), &report)?;
    log::info!("macro F1 {:.4}, macro accuracy {:.4}", report.macro_f1, report.macro_accuracy);

    let k = images.len().min(SIMILARITY_EXAMPLES);
    let texts = lib.texts(&dict, LookupPolicy::Fallback)?;
    let scores = score_texts(model, &images[..k], &texts)?;
    let examples = SimilarityExamples {
        classes: classes.clone(),
        rows: (0..k)
            .map(|i| SimilarityRow {
                id: corpus.studies[i].id.clone(),
                gold: categories[i].clone(),
                scores: scores.row(i).to_vec(),
            })
            .collect(),
    };
    write_json(&out.join("similarity_examples.json"), &examples)?;

    let unseen: Vec<String> = held_out.iter().filter(|h| present.contains(*h)).cloned().collect();
    if !unseen.is_empty() {
        let training: BTreeSet<String> = classes.iter().cloned().collect();
        let proxies: BTreeMap<String, String> = unseen
            .iter()
            .filter_map(|h| cfg.synthetic.proxy_category(h).map(|p| (h.clone(), p.to_string())))
            .collect();
        for (mode, name) in [(UnseenMode::Explanation, "explanation"), (UnseenMode::Category, "category")] {
            let mut r = unseen_category_eval(
                model, &images, &categories, &unseen, &training, &proxies, &dict, mode, cfg.seed(),
            )?;
            r.config = config_value(&cfg);
            log::info!("unseen ({name}) macro accuracy {:.4}", r.macro_accuracy);
            write_json(&out.join(format!("unseen_{name}.json")), &r)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- retrieve

#[derive(Serialize)]
struct RetrievalOutput {
    n_queries: usize,
    explanation: BTreeMap<usize, f64>,
    prompt_template: BTreeMap<usize, f64>,
    config: serde_json::Value,
}

fn retrieve(ckpt_path: &Path, manifest: Option<&Path>, config: Option<&Path>, ks: &[usize], out: &Path) -> CliResult<()> {
    if ks.is_empty() {
        return Err(CliError::Usage("--k needs at least one value".into()));
    }
    let cfg = config_for_checkpoint(config, ckpt_path)?;
    let ckpt = open_checkpoint(ckpt_path)?;
    let dict = pipeline::load_dictionary(&cfg)?;
    let corpus = eval_corpus(manifest, &cfg)?;
    let explanation = pipeline::retrieval(&ckpt.model, &corpus, &dict, RetrievalStyle::Explanation, ks)?;
    let prompt_template = pipeline::retrieval(&ckpt.model, &corpus, &dict, RetrievalStyle::PromptTemplate, ks)?;
    for (k, p) in &explanation {
        log::info!("P@{k}: explanation {p:.4}, prompt template {:.4}", prompt_template[k]);
    }
    create_dir(out)?;
    dump_config(&cfg, out)?;
    write_json(
        &out.join("retrieval.json"),
        &RetrievalOutput {
            n_queries: corpus.len(),
            explanation,
            prompt_template,
            config: config_value(&cfg),
        },
    )
}

// ---------------------------------------------------------------- probe

fn probe(
    ckpt_path: &Path,
    manifest: Option<&Path>,
    held_out: Option<&Path>,
    config: Option<&Path>,
    portion: f64,
    out: &Path,
) -> CliResult<()> {
    if !(portion > 0.0 && portion <= 1.0) {
        return Err(CliError::Usage(format!("--portion must be in (0, 1], got {portion}")));
    }
    let cfg = config_for_checkpoint(config, ckpt_path)?;
    let ckpt = open_checkpoint(ckpt_path)?;
    let (train, test) = match (manifest, held_out) {
        (Some(a), Some(b)) => (load_manifest(a)?, load_manifest(b)?),
        (a, b) => {
            let data = pipeline::load_datasets(&cfg)?;
            (
                a.map(load_manifest).transpose()?.unwrap_or(data.train),
                b.map(load_manifest).transpose()?.unwrap_or(data.eval),
            )
        }
    };
    let classes: Vec<String> = pipeline::corpus_categories(&train).into_iter().collect();
    let (train_images, train_cats) = (pipeline::load_images(&train)?, pipeline::sample_categories(&train)?);
    let (test_images, test_cats) = (pipeline::load_images(&test)?, pipeline::sample_categories(&test)?);
    let probe_config = ProbeConfig {
        seed: cfg.seed(),
        ..ProbeConfig::default()
    };
    let mut report: EvalReport = linear_probe(
        &ckpt.model,
        ProbeData {
            images: &train_images,
            categories: &train_cats,
        },
        ProbeData {
            images: &test_images,
            categories: &test_cats,
        },
        &classes,
        portion,
        &probe_config,
    )?;
    report.extras.insert("portion".into(), portion);
    report.config = config_value(&cfg);
    log::info!("probe at portion {portion}: macro F1 {:.4}", report.macro_f1);
    create_dir(out)?;
    dump_config(&cfg, out)?;
    write_json(&out.join("probe_report.json"), &report)
}

// ---------------------------------------------------------------- report

fn report(run_dir: &Path, out: &Path) -> CliResult<()> {
    if !run_dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", run_dir.display())));
    }
    create_dir(out)?;
    let written = plot::render_run(run_dir, out)?;
    if written.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "{} holds no train_log.jsonl, eval_report.json or similarity_examples.json",
            run_dir.display()
        )));
    }
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn switch_lists_parse() {
        assert_eq!(parse_switches("entity-only").unwrap(), Switches::entity_only());
        assert_eq!(parse_switches("fg,iki,ssm").unwrap(), Switches::default());
        let s = parse_switches("iki").unwrap();
        assert!(s.use_iki && !s.use_fg && !s.use_ssm);
        assert!(matches!(parse_switches("fg,xyz"), Err(CliError::Usage(_))));
    }

    #[test]
    fn relative_config_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "train_manifest = \"data/train.jsonl\"\neval_manifest = \"/abs/eval.jsonl\"\n").unwrap();
        let cfg = load_config(Some(&path)).unwrap();
        assert_eq!(cfg.train_manifest.unwrap(), dir.path().join("data/train.jsonl"));
        assert_eq!(cfg.eval_manifest.unwrap(), PathBuf::from("/abs/eval.jsonl"));
    }

    #[test]
    fn unknown_config_key_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[train]\nlearning_rate = 0.1\n").unwrap();
        assert!(matches!(load_config(Some(&path)), Err(CliError::Config(_))));
    }
}
