use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use qprobe::annotator::{annotate_corpus, load_rulepack, PackSource, RulePack};
use qprobe::corpus::{load_labeled_corpus, read_conllu_file, save_corpus, write_corpus, DepSentence};
use qprobe::metrics::{normalize_corpus, profile_corpus, MetricConfig, NormalizationGroup};
use qprobe::report::{
    corpus_stats, emit_tables, render_classification_table, render_corpus_stats, render_regression_table,
    TableFormat,
};
use qprobe::runner::{
    load_results, output_dir_override, run_experiment_with, task_targets, Approach, ExperimentConfig,
    ExperimentResult, Hyperparameters, InputPaths, LayerRange, RunOptions, Task, DEFAULT_RUN_SEED, OUTPUT_DIR_ENV,
    RESULTS_JSONL,
};
use qprobe::selectivity::{label_variants, DEFAULT_CONTROL_SEEDS};
use qprobe::{Error, Result, TaskKind};

const DEFAULT_OUTPUT_DIR: &str = "qprobe-out";

#[derive(Parser)]
#[command(name = "qprobe", version, about = "Question complexity metrics, baselines and layer probes")]
struct Cli {
    /// Output directory; the configured one for `run`, otherwise ./qprobe-out.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse CoNLL-U files into the JSONL sentence format.
    Ingest {
        #[arg(long)]
        lang: String,
        /// Fail on the first invalid tree instead of skipping it.
        #[arg(long)]
        strict: bool,
        /// Append to an existing corpus.jsonl.
        #[arg(long)]
        append: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Label question types with rule packs.
    Annotate {
        #[arg(long)]
        corpus: PathBuf,
        /// Restrict to one language.
        #[arg(long)]
        lang: Option<String>,
        /// TOML rule pack replacing the builtin one for --lang.
        #[arg(long, requires = "lang")]
        rules: Option<PathBuf>,
    },
    /// Compute complexity metrics and corpus statistics.
    Profile {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t = Normalize::PerLanguage)]
        normalize: Normalize,
    },
    /// Write permuted control labels for one task.
    Controls {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "question_type")]
        task: Task,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CONTROL_SEEDS)]
        seeds: Vec<u64>,
        #[arg(long, value_enum, default_value_t = Normalize::PerLanguage)]
        normalize: Normalize,
    },
    /// Train a TF-IDF baseline (or the dummy) on real and control labels.
    Baseline {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        subwords: Option<PathBuf>,
    },
    /// Train per-layer MLP probes on real and control labels.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "1..12")]
        layers: LayerRange,
        /// One LANG=PATH per language.
        #[arg(long, required = true, value_parser = parse_lang_path)]
        embeddings: Vec<(String, PathBuf)>,
    },
    /// Run the experiment matrix from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render summary tables from results.jsonl.
    Report {
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
        /// Defaults to <out-dir>/results.jsonl.
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    corpus: PathBuf,
    /// Languages to include; all languages in the corpus when omitted.
    #[arg(long = "lang")]
    languages: Vec<String>,
    #[arg(long, default_value = "question_type")]
    task: Vec<Task>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CONTROL_SEEDS)]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = DEFAULT_RUN_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Normalize::PerLanguage)]
    normalize: Normalize,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalize {
    PerLanguage,
    Global,
}

impl From<Normalize> for NormalizationGroup {
    fn from(n: Normalize) -> Self {
        match n {
            Normalize::PerLanguage => NormalizationGroup::PerLanguage,
            Normalize::Global => NormalizationGroup::Global,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Dummy,
    Linear,
    Gbt,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Md,
}

impl From<Format> for TableFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Tsv => TableFormat::Tsv,
            Format::Md => TableFormat::Md,
        }
    }
}

fn parse_lang_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((lang, path)) if !lang.is_empty() && !path.is_empty() => Ok((lang.to_string(), path.into())),
        _ => Err(format!("expected LANG=PATH, got {s:?}")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
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
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    match cli.command {
        Command::Ingest {
            lang,
            strict,
            append,
            files,
        } => ingest(&out_dir, &lang, strict, append, &files),
        Command::Annotate { corpus, lang, rules } => annotate(&out_dir, &corpus, lang.as_deref(), rules.as_deref()),
        Command::Profile { corpus, normalize } => profile(&out_dir, &corpus, normalize.into()),
        Command::Controls {
            corpus,
            task,
            seeds,
            normalize,
        } => controls(&out_dir, &corpus, task, &seeds, normalize.into()),
        Command::Baseline {
            common,
            model,
            subwords,
        } => {
            let approach = match model {
                Model::Dummy => Approach::Dummy,
                Model::Linear => Approach::Linear,
                Model::Gbt => Approach::Gbt,
            };
            let mut cfg = matrix_config(&out_dir, &common, approach)?;
            cfg.paths.subwords = subwords;
            run_and_print(&cfg)
        }
        Command::Probe {
            common,
            layers,
            embeddings,
        } => {
            let mut cfg = matrix_config(&out_dir, &common, Approach::Probe)?;
            cfg.layers = Some(layers);
            cfg.paths.embeddings = embeddings.into_iter().collect();
            run_and_print(&cfg)
        }
        Command::Run { config, workers } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = cli.out_dir.or_else(output_dir_override) {
                cfg.output_dir = dir;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            run_and_print(&cfg)
        }
        Command::Report { format, results } => {
            let path = results.unwrap_or_else(|| out_dir.join(RESULTS_JSONL));
            let rows = load_results(&path)?;
            report(&out_dir, &rows, format.into())
        }
    }
}

fn ingest(out_dir: &Path, lang: &str, strict: bool, append: bool, files: &[PathBuf]) -> Result<()> {
    let mut sentences = Vec::new();
    let mut rejected = 0;
    for path in files {
        let parsed = read_conllu_file(path, lang)?;
        if strict {
            if let Some(e) = parsed.rejected.into_iter().next() {
                return Err(e);
            }
        } else {
            rejected += parsed.rejected.len();
        }
        sentences.extend(parsed.sentences);
    }
    create_dir(out_dir)?;
    let target = out_dir.join("corpus.jsonl");
    let file = fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(&target)
        .map_err(|e| io_err(&target, e))?;
    write_corpus(std::io::BufWriter::new(file), &sentences)?;
    println!(
        "{lang}: {} sentences written to {} ({rejected} rejected)",
        sentences.len(),
        target.display()
    );
    Ok(())
}

fn annotate(out_dir: &Path, corpus: &Path, lang: Option<&str>, rules: Option<&Path>) -> Result<()> {
    let sentences: Vec<DepSentence> = load_labeled_corpus(corpus)?
        .into_iter()
        .filter(|s| lang.is_none_or(|l| s.language == l))
        .collect();
    let mut packs: BTreeMap<String, RulePack> = BTreeMap::new();
    for l in languages_of(&sentences) {
        let source = match (lang, rules) {
            (Some(want), Some(path)) if want == l => PackSource::File(path),
            _ => PackSource::Builtin,
        };
        packs.insert(l.clone(), load_rulepack(&l, source)?);
    }
    let (annotated, coverage) = annotate_corpus(&sentences, &packs)?;
    let labeled: Vec<DepSentence> = annotated
        .into_iter()
        .map(|a| {
            let mut s = a.sentence;
            s.question_label = s.question_label.or(a.classification.label());
            s
        })
        .collect();
    create_dir(out_dir)?;
    save_corpus(&out_dir.join("annotated.jsonl"), &labeled)?;
    let cov_path = out_dir.join("coverage.json");
    fs::write(&cov_path, serde_json::to_string_pretty(&coverage)?).map_err(|e| io_err(&cov_path, e))?;
    println!(
        "{} sentences: {} polar, {} content, {} abstained",
        coverage.total, coverage.polar, coverage.content, coverage.abstained
    );
    if let Some(a) = coverage.gold_agreement() {
        println!("agreement with gold labels: {:.1}% of {}", 100.0 * a, coverage.gold_compared);
    }
    Ok(())
}

fn profile(out_dir: &Path, corpus: &Path, normalization: NormalizationGroup) -> Result<()> {
    let mut sentences = load_labeled_corpus(corpus)?;
    let profiles = normalize_corpus(&profile_corpus(&sentences, &MetricConfig::default()), normalization)?;
    let by_id: BTreeMap<&str, _> = profiles.iter().map(|p| (p.sentence_id.as_str(), p)).collect();
    for s in &mut sentences {
        s.metrics = by_id.get(s.id.as_str()).map(|p| p.to_record());
    }
    create_dir(out_dir)?;
    save_corpus(&out_dir.join("profiles.jsonl"), &sentences)?;
    let stats = corpus_stats(&sentences, &profiles);
    let table = out_dir.join("corpus_stats.tsv");
    fs::write(&table, render_corpus_stats(&stats, TableFormat::Tsv)).map_err(|e| io_err(&table, e))?;
    print!("{}", render_corpus_stats(&stats, TableFormat::Md));
    Ok(())
}

fn controls(out_dir: &Path, corpus: &Path, task: Task, seeds: &[u64], norm: NormalizationGroup) -> Result<()> {
    let sentences = load_labeled_corpus(corpus)?;
    let mut packs = BTreeMap::new();
    if task == Task::QuestionType {
        let unlabeled: BTreeSet<&str> = sentences
            .iter()
            .filter(|s| s.question_label.is_none())
            .map(|s| s.language.as_str())
            .collect();
        for l in unlabeled {
            packs.insert(l.to_string(), RulePack::builtin(l)?);
        }
    }
    create_dir(out_dir)?;
    let path = out_dir.join("controls.tsv");
    let mut out = String::new();
    for lang in languages_of(&sentences) {
        let subset: Vec<DepSentence> = sentences.iter().filter(|s| s.language == lang).cloned().collect();
        let (ids, labels) = task_targets(&subset, task, &packs, norm)?;
        let variants = label_variants(&labels, seeds)?;
        if out.is_empty() {
            out.push_str("language\tid");
            for v in &variants {
                out.push('\t');
                out.push_str(&v.name());
            }
            out.push('\n');
        }
        for (i, id) in ids.iter().enumerate() {
            out.push_str(&format!("{lang}\t{id}"));
            for v in &variants {
                out.push_str(&format!("\t{}", v.labels[i]));
            }
            out.push('\n');
        }
        println!("{lang}: {} targets, {} control sets", ids.len(), seeds.len());
    }
    fs::write(&path, out).map_err(|e| io_err(&path, e))
}

fn matrix_config(out_dir: &Path, common: &Common, approach: Approach) -> Result<ExperimentConfig> {
    let languages = if common.languages.is_empty() {
        languages_of(&load_labeled_corpus(&common.corpus)?).into_iter().collect()
    } else {
        common.languages.clone()
    };
    let tasks: Vec<Task> = common.task.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    Ok(ExperimentConfig {
        languages,
        tasks,
        approaches: vec![approach],
        layers: None,
        control_seeds: common.seeds.clone(),
        seed: common.seed,
        stratify: true,
        normalization: common.normalize.into(),
        paths: InputPaths {
            corpus: common.corpus.clone(),
            ..InputPaths::default()
        },
        output_dir: out_dir.to_path_buf(),
        workers: common.workers,
        hyperparameters: Hyperparameters::default(),
    })
}

fn run_and_print(cfg: &ExperimentConfig) -> Result<()> {
    let outcome = run_experiment_with(cfg, &RunOptions::default())?;
    info!(
        "{} cells ({} resumed) in {}",
        outcome.expected_cells,
        outcome.resumed_cells,
        cfg.output_dir.display()
    );
    let failed = outcome.results.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("{failed} cells failed; see {}", cfg.output_dir.join(RESULTS_JSONL).display());
    }
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(summary_tables(&outcome.results, TableFormat::Md).as_bytes());
    if failed == outcome.results.len() {
        return Err(Error::Numerical("every cell failed".into()));
    }
    Ok(())
}

fn summary_tables(rows: &[ExperimentResult], format: TableFormat) -> String {
    let mut out = String::new();
    if rows.iter().any(|r| r.task_kind == TaskKind::Classification) {
        out.push_str(&render_classification_table(rows, format));
        out.push('\n');
    }
    if rows.iter().any(|r| r.task_kind == TaskKind::Regression) {
        out.push_str(&render_regression_table(rows, format));
    }
    out
}

fn report(out_dir: &Path, rows: &[ExperimentResult], format: TableFormat) -> Result<()> {
    create_dir(out_dir)?;
    for path in emit_tables(rows, format, out_dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn languages_of(sentences: &[DepSentence]) -> BTreeSet<String> {
    sentences.iter().map(|s| s.language.clone()).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::InvalidInput(format!("{}: {e}", path.display()))
}
