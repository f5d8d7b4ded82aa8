//! Command-line interface.
//!
//! On failure the process prints one JSON line to stderr,
//! `{"error":{"kind":...,"exit_code":...,"message":...}}`, and exits with
//! 2 (usage), 3 (data), 4 (model) or 5 (internal).

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use predelete_core::analysis::{attribute_distribution, standard_slices, target_frequencies, user_status_breakdown};
use predelete_core::cascade::{fixture, save_cascade};
use predelete_core::corpus::{
    apply_weak_labels, distribution_report, load_corpus, stratified_split, write_corpus, CategoryLabel, Corpus,
    CorpusFormat, DistributionAxis, Fractions, SplitSpec, StratifyOn, WeakLabelRule,
};
use predelete_core::eval::{error_slice, evaluate, parse_annotations, EvalReport, ReferenceRow};
use predelete_core::models::{
    external_scores, load_bundle, save_bundle, train_bundle, train_with_reruns, ClassWeighting, MaxFeatures, ModelKind,
    TrainConfig,
};
use predelete_core::setting::Setting;
use serde::Serialize;

use crate::server::{self, ServiceConfig, DEFAULT_BODY_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Model,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Usage => 2,
            ErrorKind::Data => 3,
            ErrorKind::Model => 4,
            ErrorKind::Internal => 5,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Usage => "usage",
            ErrorKind::Data => "data",
            ErrorKind::Model => "model",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Usage,
            message: message.into(),
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Internal,
            message: message.into(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::json!({
            "error": {
                "kind": self.kind.as_str(),
                "exit_code": self.kind.exit_code(),
                "message": self.message,
            }
        })
        .to_string()
    }
}

impl From<predelete_core::Error> for CliError {
    fn from(e: predelete_core::Error) -> Self {
        let kind = if e.is_model_error() {
            ErrorKind::Model
        } else if matches!(e, predelete_core::Error::Config(_)) {
            ErrorKind::Usage
        } else {
            ErrorKind::Data
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError {
            kind: ErrorKind::Data,
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "predelete", version, about = "Predict whether a post will be deleted, and why")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a corpus into train/dev/test files.
    Split(SplitArgs),
    /// Train a model bundle for one setting.
    Train(TrainArgs),
    /// Evaluate a bundle (or an external score file) on a labeled corpus.
    Evaluate(EvaluateArgs),
    /// Write one JSON prediction per corpus record.
    Predict(PredictArgs),
    /// Fleiss' kappa and average observed agreement from an annotation TSV.
    Agree(AgreeArgs),
    /// Label distributions, attribute percentages and account-status tables.
    Analyze(AnalyzeArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write the hand-built demo cascade (bundles + manifest).
    Fixture(FixtureArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Tsv,
}

impl From<FormatArg> for CorpusFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => CorpusFormat::Jsonl,
            FormatArg::Tsv => CorpusFormat::Tsv,
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusInput {
    /// Corpus file (.jsonl or .tsv).
    #[arg(long)]
    pub corpus: PathBuf,
    /// File format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Label non-deleted, unlabeled records as not_disinfo (weak labels).
    #[arg(long)]
    pub weak_labels: bool,
}

fn read_corpus(path: &Path, format: Option<FormatArg>, weak: bool) -> CliResult<Corpus> {
    let format = format.map(Into::into).unwrap_or_else(|| CorpusFormat::from_path(path));
    let corpus = load_corpus(path, format)?;
    Ok(if weak {
        apply_weak_labels(&corpus, WeakLabelRule::NonDeletedAsNotDisinfo)
    } else {
        corpus
    })
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub input: CorpusInput,
    /// Directory for train/dev/test files.
    #[arg(long)]
    pub output_dir: PathBuf,
    /// Exact decimal fractions for train,dev,test.
    #[arg(long, default_value = "0.7,0.1,0.2")]
    pub fractions: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Label to stratify on: deletion or category.
    #[arg(long, default_value = "deletion")]
    pub stratify: String,
    /// Drop records whose text repeats an earlier record.
    #[arg(long)]
    pub dedup: bool,
    /// Only split the records that take part in this setting.
    #[arg(long)]
    pub setting: Option<Setting>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassWeightArg {
    Uniform,
    Inverse,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus.
    #[arg(long)]
    pub train: PathBuf,
    /// Dev corpus, required with --reruns > 1.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub weak_labels: bool,
    #[arg(long)]
    pub setting: Setting,
    #[arg(long)]
    pub model: ModelKind,
    /// Output bundle path.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train with seeds seed..seed+N and keep the best dev weighted F1.
    #[arg(long, default_value_t = 1)]
    pub reruns: usize,
    /// Where to write the rerun log (JSON); defaults to <output>.reruns.json.
    #[arg(long)]
    pub rerun_log: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Candidate features per split; defaults to ceil(sqrt(V)).
    #[arg(long)]
    pub max_features_per_split: Option<usize>,
    #[arg(long, value_enum, default_value = "uniform")]
    pub class_weight: ClassWeightArg,
    #[arg(long, default_value_t = predelete_core::features::DEFAULT_MIN_DF)]
    pub min_df: u64,
    /// Vocabulary cap; 0 means unlimited.
    #[arg(long, default_value_t = predelete_core::features::DEFAULT_MAX_FEATURES)]
    pub max_vocabulary: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: CorpusInput,
    /// Bundle to evaluate.
    #[arg(long, conflicts_with = "scores", required_unless_present = "scores")]
    pub model: Option<PathBuf>,
    /// External score file (TSV: id, score_<class>...) instead of a bundle.
    #[arg(long, requires = "setting")]
    pub scores: Option<PathBuf>,
    /// Setting; read from the bundle when omitted.
    #[arg(long)]
    pub setting: Option<Setting>,
    /// Write the report as JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Error slice `FROM1,FROM2>TO`, e.g. `rumor,offensive>hate_speech`.
    #[arg(long)]
    pub error_slice: Vec<String>,
    /// Reference row `NAME=ACC,P,R,F1` to compare against.
    #[arg(long)]
    pub reference: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub input: CorpusInput,
    #[arg(long)]
    pub model: PathBuf,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AgreeArgs {
    /// Annotation TSV: one row per item, one column per annotator.
    #[arg(long)]
    pub input: PathBuf,
    /// The first line is data, not annotator names.
    #[arg(long)]
    pub no_header: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalysisKind {
    Distribution,
    Attributes,
    Status,
    Targets,
    All,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: CorpusInput,
    #[arg(long, value_enum, default_value = "all")]
    pub report: AnalysisKind,
    /// Write all computed reports as one JSON object here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PREDELETE_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    #[arg(long, env = "PREDELETE_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BODY_LIMIT)]
    pub max_body_bytes: usize,
    /// JSONL log of salted text hashes and verdicts.
    #[arg(long)]
    pub request_log: Option<PathBuf>,
    /// Allowed CORS origin; repeat for several, `*` for any.
    #[arg(long)]
    pub cors_origin: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    #[arg(long)]
    pub output_dir: PathBuf,
}

pub fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Split(a) => split(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Agree(a) => agree(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
        Command::Fixture(a) => {
            let path = save_cascade(&fixture::cascade(), &a.output_dir)?;
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::internal(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn split(a: SplitArgs) -> CliResult {
    let fractions: Fractions = a.fractions.parse().map_err(|e: predelete_core::Error| CliError::usage(e.to_string()))?;
    let stratify_on: StratifyOn = a.stratify.parse().map_err(CliError::usage)?;
    let mut corpus = read_corpus(&a.input.corpus, a.input.format, a.input.weak_labels)?;
    if a.dedup {
        corpus = corpus.dedup_texts();
    }
    if let Some(setting) = a.setting {
        corpus = setting.select(&corpus);
    }
    let result = stratified_split(
        &corpus,
        &SplitSpec {
            fractions,
            seed: a.seed,
            stratify_on,
        },
    )?;
    fs::create_dir_all(&a.output_dir)?;
    let format = a
        .input
        .format
        .map(Into::into)
        .unwrap_or_else(|| CorpusFormat::from_path(&a.input.corpus));
    let ext = match format {
        CorpusFormat::Jsonl => "jsonl",
        CorpusFormat::Tsv => "tsv",
    };
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    println!("seed {} fractions {} stratify {}", a.seed, a.fractions, a.stratify);
    for (name, part) in result.parts() {
        let path = a.output_dir.join(format!("{name}.{ext}"));
        write_corpus(part, &path, format)?;
        println!("{name:<5} {:>8}  {}", part.len(), path.display());
    }
    Ok(())
}

fn created_at() -> Option<u64> {
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => v.trim().parse().ok(),
        Err(_) => SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs()),
    }
}

fn train(a: TrainArgs) -> CliResult {
    let train = read_corpus(&a.train, a.format, a.weak_labels)?;
    let mut config = TrainConfig::new(a.setting, a.model);
    config.seed = a.seed;
    config.created_at = created_at();
    config.class_weight = match a.class_weight {
        ClassWeightArg::Uniform => ClassWeighting::Uniform,
        ClassWeightArg::Inverse => ClassWeighting::InverseFrequency,
    };
    config.vocabulary.min_df = a.min_df;
    config.vocabulary.max_features = (a.max_vocabulary > 0).then_some(a.max_vocabulary);
    config.svm.lambda = a.lambda;
    config.svm.epochs = a.epochs;
    config.forest.n_trees = a.trees;
    config.forest.max_depth = a.max_depth;
    if let Some(n) = a.max_features_per_split {
        config.forest.max_features = MaxFeatures::Count(n);
    }

    let bundle = if a.reruns > 1 {
        let dev_path = a.dev.as_ref().ok_or_else(|| CliError::usage("--reruns > 1 needs --dev"))?;
        let dev = read_corpus(dev_path, a.format, a.weak_labels)?;
        let (bundle, log) = train_with_reruns(&train, &dev, &config, a.reruns)?;
        print!("{log}");
        let log_path = a
            .rerun_log
            .clone()
            .unwrap_or_else(|| PathBuf::from(format!("{}.reruns.json", a.output.display())));
        write_json(&log_path, &log)?;
        bundle
    } else {
        train_bundle(&train, &config)?
    };
    save_bundle(&bundle, &a.output)?;
    println!(
        "wrote {} ({} {} model, seed {}, {} training records, {} terms, fingerprint {})",
        a.output.display(),
        a.setting,
        a.model,
        bundle.metadata.seed,
        bundle.metadata.n_training_examples,
        bundle.vocabulary().len(),
        bundle.fingerprint()
    );
    Ok(())
}

fn parse_reference(spec: &str) -> CliResult<ReferenceRow> {
    let bad = || CliError::usage(format!("--reference expects NAME=ACC,P,R,F1, got {spec:?}"));
    let (name, values) = spec.split_once('=').ok_or_else(bad)?;
    let v: Vec<f64> = values
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [accuracy, weighted_precision, weighted_recall, weighted_f1] = v[..] else {
        return Err(bad());
    };
    Ok(ReferenceRow {
        name: name.to_string(),
        accuracy,
        weighted_precision,
        weighted_recall,
        weighted_f1,
    })
}

#[derive(Serialize)]
struct EvaluationOutput {
    setting: Setting,
    seed: Option<u64>,
    model_fingerprint: Option<String>,
    #[serde(flatten)]
    report: EvalReport,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    error_slices: Vec<predelete_core::eval::ErrorSlice>,
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult {
    let corpus = read_corpus(&a.input.corpus, a.input.format, a.input.weak_labels)?;
    let bundle = a.model.as_deref().map(load_bundle).transpose()?;
    let setting = match (a.setting, &bundle) {
        (Some(s), _) => s,
        (None, Some(b)) => b
            .metadata
            .setting
            .as_deref()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::usage("bundle does not record its setting; pass --setting"))?,
        (None, None) => return Err(CliError::usage("--setting is required with --scores")),
    };
    let corpus = setting.select(&corpus);
    let gold = setting.gold(&corpus)?;
    let labels = setting.label_map();
    let predicted: Vec<usize> = match (&bundle, &a.scores) {
        (Some(b), _) => {
            if b.labels() != &labels {
                return Err(CliError {
                    kind: ErrorKind::Model,
                    message: format!("bundle classes {:?} do not match setting {setting}", b.labels().names()),
                });
            }
            corpus
                .iter()
                .map(|r| b.predict_text(&r.text).map(|p| p.label_index))
                .collect::<Result<_, _>>()?
        }
        (None, Some(path)) => external_scores(path, &labels, &corpus)?
            .into_iter()
            .map(|p| p.label_index)
            .collect(),
        (None, None) => return Err(CliError::usage("pass --model or --scores")),
    };
    let mut report = evaluate(&gold, &predicted, &labels)?;
    for spec in &a.reference {
        report.compare_with(&parse_reference(spec)?, 0.0005);
    }
    let ids: Vec<String> = corpus.iter().map(|r| r.id.clone()).collect();
    let mut slices = Vec::new();
    for spec in &a.error_slice {
        let (from, to) = spec
            .split_once('>')
            .ok_or_else(|| CliError::usage(format!("--error-slice expects FROM,...>TO, got {spec:?}")))?;
        let from: Vec<&str> = from.split(',').map(str::trim).collect();
        slices.push(error_slice(&ids, &gold, &predicted, &labels, &from, to.trim())?);
    }

    println!("setting {setting}, {} records", corpus.len());
    if let Some(b) = &bundle {
        println!("model {} seed {} fingerprint {}", b.model().kind(), b.metadata.seed, b.fingerprint());
    }
    print!("{report}");
    for s in &slices {
        println!("error slice {} -> {}: n={}", s.from.join(","), s.to, s.count);
    }
    if let Some(path) = &a.output {
        write_json(
            path,
            &EvaluationOutput {
                setting,
                seed: bundle.as_ref().map(|b| b.metadata.seed),
                model_fingerprint: bundle.as_ref().map(|b| b.fingerprint()),
                report,
                error_slices: slices,
            },
        )?;
    }
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let corpus = read_corpus(&a.input.corpus, a.input.format, a.input.weak_labels)?;
    let bundle = load_bundle(&a.model)?;
    let out: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = BufWriter::new(out);
    for r in &corpus {
        let p = bundle.predict_text(&r.text)?;
        let line = serde_json::json!({ "id": r.id, "label": p.label, "scores": p.scores });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

fn agree(a: AgreeArgs) -> CliResult {
    let reader = BufReader::new(File::open(&a.input)?);
    let table = parse_annotations(reader, !a.no_header)?;
    let report = table.report()?;
    println!("categories  {}", table.categories.join(", "));
    print!("{report}");
    if let Some(path) = &a.output {
        write_json(path, &report)?;
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> CliResult {
    let corpus = read_corpus(&a.input.corpus, a.input.format, a.input.weak_labels)?;
    let want = |k: AnalysisKind| a.report == AnalysisKind::All || a.report == k;
    let mut json = serde_json::Map::new();
    fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
        serde_json::to_value(v).expect("reports serialize")
    }

    if want(AnalysisKind::Distribution) {
        for (name, axis) in [
            ("deletion_label", DistributionAxis::DeletionLabel),
            ("category_label", DistributionAxis::CategoryLabel),
            ("label_source", DistributionAxis::LabelSource),
        ] {
            let report = distribution_report(&corpus, axis);
            println!("== {name}\n{report}\n");
            json.insert(format!("distribution_{name}"), to_value(&report));
        }
    }
    if want(AnalysisKind::Attributes) {
        let slices = standard_slices(&corpus);
        let nonempty: Vec<(&str, &Corpus)> = slices
            .iter()
            .filter(|(_, c)| !c.is_empty())
            .map(|(n, c)| (n.as_str(), c))
            .collect();
        for (name, c) in &slices {
            if c.is_empty() {
                eprintln!("warning: slice {name} is empty and is left out of the attribute table");
            }
        }
        if !nonempty.is_empty() {
            let report = attribute_distribution(&nonempty)?;
            println!("== attributes\n{report}");
            json.insert("attributes".into(), to_value(&report));
        }
    }
    if want(AnalysisKind::Status) {
        let report = user_status_breakdown(&corpus);
        println!("== user status\n{report}");
        json.insert("user_status".into(), to_value(&report));
    }
    if want(AnalysisKind::Targets) {
        let targets = target_frequencies(&corpus, Some(CategoryLabel::HateSpeech));
        println!("== hate speech targets");
        for (t, n) in &targets {
            println!("{n:>6}  {t}");
        }
        json.insert("hate_speech_targets".into(), to_value(&targets));
    }
    if let Some(path) = &a.output {
        write_json(path, &json)?;
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult {
    let config = ServiceConfig {
        bind: a.bind,
        manifest: a.manifest,
        max_body_bytes: a.max_body_bytes,
        request_log: a.request_log,
        cors_origins: a.cors_origin,
    };
    config.validate().map_err(CliError::usage)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    runtime.block_on(server::serve(config)).map_err(|e| {
        match e.downcast::<predelete_core::Error>() {
            Ok(core) => CliError::from(*core),
            Err(other) => CliError::internal(other.to_string()),
        }
    })
}

/// Entry point used by the binary: parses arguments, runs, and turns any
/// failure into the JSON error line and exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            let err = CliError::usage(first);
            eprintln!("{}", err.to_json_line());
            return err.kind.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.kind.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rows() {
        let r = parse_reference("published=0.537,0.288,0.537,0.375").unwrap();
        assert_eq!(r.name, "published");
        assert_eq!(r.weighted_f1, 0.375);
        for bad in ["0.5,0.5,0.5,0.5", "x=0.5,0.5,0.5", "x=a,b,c,d"] {
            assert_eq!(parse_reference(bad).unwrap_err().kind, ErrorKind::Usage, "{bad}");
        }
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        let model: CliError = predelete_core::Error::Checksum.into();
        assert_eq!(model.kind.exit_code(), 4);
        let usage: CliError = predelete_core::Error::Config("x".into()).into();
        assert_eq!(usage.kind.exit_code(), 2);
        let data: CliError = io::Error::new(io::ErrorKind::NotFound, "gone").into();
        assert_eq!(data.kind.exit_code(), 3);
        let line: serde_json::Value = serde_json::from_str(&data.to_json_line()).unwrap();
        assert_eq!(line["error"]["kind"], "data");
        assert_eq!(line["error"]["message"], "gone");
    }

    #[test]
    fn unknown_subcommand_is_usage() {
        assert_eq!(main_with_args(["predelete", "frobnicate"]), 2);
        assert_eq!(main_with_args(["predelete", "train", "--model", "tree"]), 2);
    }
}
