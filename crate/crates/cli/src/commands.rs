use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgGroup, Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use xlingual_core::corpus::{
    build_parallel_corpus, parse_pawsx_tsv, parse_squad_json, parse_xnli_tsv, read_instances,
    write_instances, write_rejects, ColumnMap, Reject,
};
use xlingual_core::diagnostics::{extremes_distance_summary, DistanceConfig};
use xlingual_core::report::{
    emit_report, heatmap_json, matrices_from_records, ReportFormat, ReportOptions, ReportRecord,
    BASELINE_SUFFIX,
};
use xlingual_core::scoring::{classification_scores, score_qa_set, QaConfig};
use xlingual_core::setgen::{
    build_across_set, build_across_training_set, shuffle_control, ShuffleConfig, ShuffleScope,
};
use xlingual_core::{EvalSet, Instance, Lang, PredictionSet, ScoreRecord, Task};

use crate::config::RunConfig;
use crate::provenance::{
    base_name, json_bytes, read_input, sha256_hex, write_output, InputDigest, Provenance,
};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Xnli,
    Pawsx,
    Squad,
    Jsonl,
}

#[derive(Args)]
pub struct IngestArgs {
    /// Input layout; falls back to the config's `format`.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Language of inputs given without a `LANG=` prefix.
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Fail (exit 1) when more than this share of rows is rejected.
    #[arg(long)]
    reject_threshold: Option<f64>,
    /// Input files as `PATH` or `LANG=PATH`; falls back to the config's
    /// `inputs`.
    inputs: Vec<String>,
}

/// Splits `de=path/x.tsv` into its language and path. A prefix counts as a
/// language only if it looks like a tag (letters, then `-`/`_` subtags).
fn split_input(spec: &str) -> (Option<Lang>, PathBuf) {
    if let Some((tag, path)) = spec.split_once('=') {
        let mut parts = tag.split(['-', '_']);
        let primary_ok = parts.next().is_some_and(|p| {
            (2..=3).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphabetic())
        });
        if primary_ok
            && parts.all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric()))
        {
            return (Some(Lang::new(tag)), PathBuf::from(path));
        }
    }
    (None, PathBuf::from(spec))
}

#[derive(Serialize)]
struct IngestedInput {
    file: String,
    lang: Option<Lang>,
    instances: usize,
    rejects: usize,
}

pub fn ingest(args: IngestArgs, mut cfg: RunConfig) -> CmdResult {
    let format = match (args.format, &cfg.format) {
        (Some(f), _) => f,
        (None, Some(s)) => {
            InputFormat::from_str(s, true).map_err(|e| Failure::input(format!("format: {e}")))?
        }
        (None, None) => {
            return Err(Failure::input(
                "no input format: pass --format or set format",
            ))
        }
    };
    cfg.format = Some(
        format
            .to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string(),
    );
    if let Some(t) = args.reject_threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(Failure::input("--reject-threshold must be in [0, 1]"));
        }
        cfg.reject_threshold = t;
    }
    let specs: Vec<(Option<Lang>, PathBuf)> = if args.inputs.is_empty() {
        cfg.inputs
            .iter()
            .map(|p| split_input(&p.to_string_lossy()))
            .collect()
    } else {
        args.inputs.iter().map(|s| split_input(s)).collect()
    };
    if specs.is_empty() {
        return Err(Failure::input("no input files"));
    }
    let out_dir = cfg.out_dir(args.out_dir)?;
    let default_lang = args.lang.as_deref().map(Lang::new);

    let mut instances: Vec<Instance> = Vec::new();
    let mut rejects: Vec<Reject> = Vec::new();
    let mut digests = Vec::new();
    let mut summary = Vec::new();
    for (lang, path) in &specs {
        let (bytes, digest) = read_input(path)?;
        let name = digest.file.clone();
        let lang = lang.clone().or_else(|| default_lang.clone());
        let need_lang = || {
            lang.clone().ok_or_else(|| {
                Failure::input(format!(
                    "{name}: language unknown; pass --lang or LANG={name}"
                ))
            })
        };
        let (new, bad): (Vec<Instance>, Vec<Reject>) = match format {
            InputFormat::Xnli => {
                let p = parse_xnli_tsv(&bytes[..], &name, &ColumnMap::xnli(), lang.as_ref())?;
                (
                    p.instances.into_iter().map(Instance::from).collect(),
                    p.rejects,
                )
            }
            InputFormat::Pawsx => {
                let p =
                    parse_pawsx_tsv(&bytes[..], &name, &ColumnMap::pawsx(), Some(&need_lang()?))?;
                (
                    p.instances.into_iter().map(Instance::from).collect(),
                    p.rejects,
                )
            }
            InputFormat::Squad => {
                let p = parse_squad_json(&bytes[..], &name, &need_lang()?)?;
                (
                    p.instances.into_iter().map(Instance::from).collect(),
                    p.rejects,
                )
            }
            InputFormat::Jsonl => (read_instances(&bytes[..], &name)?, Vec::new()),
        };
        summary.push(IngestedInput {
            file: name,
            lang,
            instances: new.len(),
            rejects: bad.len(),
        });
        instances.extend(new);
        rejects.extend(bad);
        digests.push(digest);
    }

    let task = check_single_task(&instances, cfg.task)?;
    let languages: BTreeSet<&Lang> = instances.iter().map(Instance::lang).collect();
    let total = instances.len() + rejects.len();
    let reject_fraction = if total == 0 {
        0.0
    } else {
        rejects.len() as f64 / total as f64
    };

    let mut corpus_bytes = Vec::new();
    write_instances(&mut corpus_bytes, &instances).map_err(|e| Failure::input(e.to_string()))?;
    let mut reject_bytes = Vec::new();
    write_rejects(&mut reject_bytes, &rejects).map_err(|e| Failure::input(e.to_string()))?;
    let provenance = Provenance::new("ingest", digests, &cfg);
    let manifest = json!({
        "task": task,
        "languages": languages,
        "instances": instances.len(),
        "rejects": rejects.len(),
        "reject_fraction": reject_fraction,
        "inputs": summary,
        "outputs": {
            "corpus.jsonl": sha256_hex(&corpus_bytes),
            "rejects.jsonl": sha256_hex(&reject_bytes),
        },
        "provenance": provenance,
    });
    write_output(&out_dir.join("corpus.jsonl"), &corpus_bytes)?;
    write_output(&out_dir.join("rejects.jsonl"), &reject_bytes)?;
    write_output(&out_dir.join("manifest.json"), &json_bytes(&manifest))?;

    println!("instances: {}", instances.len());
    println!("rejects: {}", rejects.len());
    if !rejects.is_empty() {
        eprintln!(
            "warning: {} of {total} rows rejected ({:.1}%); see rejects.jsonl",
            rejects.len(),
            100.0 * reject_fraction
        );
    }
    if instances.is_empty() {
        return Err(Failure::invalid("no valid instances"));
    }
    if reject_fraction > cfg.reject_threshold {
        return Err(Failure::invalid(format!(
            "reject fraction {reject_fraction:.3} exceeds threshold {}",
            cfg.reject_threshold
        )));
    }
    println!("{}", provenance.footer());
    Ok(())
}

fn check_single_task(instances: &[Instance], expected: Option<Task>) -> CmdResult<Option<Task>> {
    let mut task = None;
    for inst in instances {
        match task {
            None => task = Some(inst.task()),
            Some(t) if t != inst.task() => {
                return Err(xlingual_core::Error::MixedTasks(
                    t.to_string(),
                    inst.task().to_string(),
                )
                .into())
            }
            _ => {}
        }
    }
    if let (Some(e), Some(t)) = (expected, task) {
        if e != t {
            return Err(xlingual_core::Error::TaskMismatch {
                expected: e.to_string(),
                found: t.to_string(),
            }
            .into());
        }
    }
    Ok(task)
}

#[derive(Args)]
#[command(group(ArgGroup::new("which").required(true).args(["pairs", "all_pairs", "within"])))]
pub struct BuildArgs {
    /// Canonical corpus JSONL; falls back to the config's first input.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Languages every id must cover; defaults to all corpus languages.
    #[arg(long, value_delimiter = ',')]
    languages: Vec<String>,
    /// Pairs as `field1:field2`, e.g. `en:de,de:en,en:en`.
    #[arg(long)]
    pairs: Option<String>,
    /// Every ordered pair, diagonal included.
    #[arg(long)]
    all_pairs: bool,
    /// Only the within-language sets.
    #[arg(long)]
    within: bool,
    /// Emit word-shuffled controls, seeded by `--seed`.
    #[arg(long)]
    shuffle: bool,
    /// Shuffle scope; defaults to the one required by the task.
    #[arg(long)]
    scope: Option<String>,
    /// Mark sets as training data.
    #[arg(long)]
    train: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn parse_pairs(spec: &str) -> CmdResult<Vec<(Lang, Lang)>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            p.split_once(':')
                .map(|(a, b)| (Lang::new(a), Lang::new(b)))
                .filter(|(a, b)| !a.as_str().is_empty() && !b.as_str().is_empty())
                .ok_or_else(|| Failure::input(format!("bad pair `{p}`, expected field1:field2")))
        })
        .collect()
}

#[derive(Serialize)]
struct BuiltSet {
    file: String,
    field1_lang: Lang,
    field2_lang: Lang,
    instances: usize,
    sha256: String,
    provenance_digest: String,
}

pub fn build(args: BuildArgs, mut cfg: RunConfig) -> CmdResult {
    let corpus_path = args
        .corpus
        .clone()
        .or_else(|| cfg.inputs.first().cloned())
        .ok_or_else(|| Failure::input("no corpus: pass --corpus or set inputs"))?;
    let out_dir = cfg.out_dir(args.out_dir.clone())?;
    let (bytes, digest) = read_input(&corpus_path)?;
    let instances = read_instances(&bytes[..], &digest.file)?;
    check_single_task(&instances, cfg.task)?;

    cfg.set_languages(&args.languages);
    if cfg.languages.is_empty() {
        for inst in &instances {
            if !cfg.languages.contains(inst.lang()) {
                cfg.languages.push(inst.lang().clone());
            }
        }
    }
    let (corpus, intersect) = build_parallel_corpus(instances, &cfg.languages)?;
    cfg.task = Some(corpus.task());
    let langs = corpus.languages().to_vec();
    let pairs: Vec<(Lang, Lang)> = if let Some(spec) = &args.pairs {
        parse_pairs(spec)?
    } else if args.all_pairs {
        langs
            .iter()
            .flat_map(|a| langs.iter().map(move |b| (a.clone(), b.clone())))
            .collect()
    } else {
        langs.iter().map(|l| (l.clone(), l.clone())).collect()
    };
    let shuffle = if args.shuffle {
        let mut sc = ShuffleConfig::for_task(corpus.task(), cfg.seed);
        sc.tokenizer = cfg.tokenizer_config.clone();
        if let Some(s) = &args.scope {
            sc.scope = ShuffleScope::from_str(s).map_err(|e| Failure::input(e.to_string()))?;
        }
        Some(sc)
    } else if args.scope.is_some() {
        return Err(Failure::input("--scope requires --shuffle"));
    } else {
        None
    };

    let provenance = Provenance::new("build", vec![digest], &cfg);
    let mut built = Vec::new();
    let mut files = Vec::new();
    for (l1, l2) in &pairs {
        let mut set = if args.train {
            build_across_training_set(&corpus, l1, l2)?
        } else {
            build_across_set(&corpus, l1, l2)?
        };
        if let Some(sc) = &shuffle {
            set = shuffle_control(&set, sc)?;
        }
        let mut name = format!("{}.{l1}-{l2}", corpus.task());
        if shuffle.is_some() {
            name.push_str(".shuffled");
        }
        if args.train {
            name.push_str(".train");
        }
        name.push_str(".jsonl");
        let mut out = Vec::new();
        set.write_jsonl(&mut out)
            .map_err(|e| Failure::input(e.to_string()))?;
        built.push(BuiltSet {
            file: name.clone(),
            field1_lang: l1.clone(),
            field2_lang: l2.clone(),
            instances: set.len(),
            sha256: sha256_hex(&out),
            provenance_digest: set.provenance_digest(),
        });
        files.push((name, out));
    }
    let manifest = json!({
        "task": corpus.task(),
        "languages": langs,
        "corpus_digest": corpus.digest(),
        "total_ids": intersect.total_ids,
        "retained_ids": intersect.retained_ids,
        "dropped_ids": intersect.dropped_ids,
        "dropped_fraction": intersect.dropped_fraction,
        "ignored_instances": intersect.ignored_instances,
        "shuffle": shuffle,
        "sets": built,
        "provenance": provenance,
    });
    for (name, out) in &files {
        write_output(&out_dir.join(name), out)?;
    }
    write_output(&out_dir.join("manifest.json"), &json_bytes(&manifest))?;

    if intersect.dropped_fraction > 0.0 {
        eprintln!(
            "warning: dropped {} of {} ids not covered by every language ({:.2}%)",
            intersect.dropped_ids.len(),
            intersect.total_ids,
            100.0 * intersect.dropped_fraction
        );
    }
    for b in &built {
        println!("wrote {} ({} instances)", b.file, b.instances);
    }
    println!("{}", provenance.footer());
    Ok(())
}

/// Reads an eval set and its predictions, enforcing that the predictions
/// were produced for this set unless `force` is set.
fn load_pair(
    eval: &Path,
    predictions: &Path,
    force: bool,
) -> CmdResult<(EvalSet, PredictionSet, Vec<InputDigest>)> {
    let (eval_bytes, eval_digest) = read_input(eval)?;
    let set = EvalSet::read_jsonl(&eval_bytes[..], &eval_digest.file)?;
    let (pred_bytes, pred_digest) = read_input(predictions)?;
    let preds = PredictionSet::read_jsonl(&pred_bytes[..], &pred_digest.file)?;
    let expected = set.provenance_digest();
    if preds.eval_set_provenance.as_deref() != Some(expected.as_str()) {
        let msg = format!(
            "{} was not produced for {} (eval_set_provenance {:?}, expected {expected})",
            pred_digest.file,
            eval_digest.file,
            preds.eval_set_provenance.as_deref().unwrap_or("missing")
        );
        if !force {
            return Err(Failure::invalid(format!(
                "{msg}; pass --force to score anyway"
            )));
        }
        eprintln!("warning: {msg}");
    }
    Ok((set, preds, vec![eval_digest, pred_digest]))
}

fn qa_config(cfg: &RunConfig) -> QaConfig {
    QaConfig {
        tokenizer: cfg.tokenizer_config.clone(),
        ..QaConfig::default()
    }
}

#[derive(Args)]
pub struct ScoreArgs {
    #[arg(long)]
    eval: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    /// Add per-gold-label accuracies (classification tasks).
    #[arg(long)]
    per_label: bool,
    /// Score even if the predictions name a different eval set.
    #[arg(long)]
    force: bool,
    /// Write the score JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Contents of a score file, as read back by `report`.
#[derive(Debug, Serialize, Deserialize)]
struct ScoreFile {
    task: Task,
    field1_lang: Lang,
    field2_lang: Lang,
    model_tag: String,
    records: Vec<ScoreRecord>,
}

pub fn score(args: ScoreArgs, mut cfg: RunConfig) -> CmdResult {
    let (set, preds, inputs) = load_pair(&args.eval, &args.predictions, args.force)?;
    cfg.task = Some(set.task);
    let records: Vec<ScoreRecord> = match set.task {
        Task::Qa => {
            let s = score_qa_set::<f64>(&set, &preds, &qa_config(&cfg))?;
            vec![s.em, s.f1]
        }
        Task::Nli | Task::Pi => vec![classification_scores::<f64>(
            &set,
            &preds,
            cfg.collapse,
            args.per_label,
        )?],
    };
    let provenance = Provenance::new("score", inputs, &cfg);
    let file = ScoreFile {
        task: set.task,
        field1_lang: set.field1_lang.clone(),
        field2_lang: set.field2_lang.clone(),
        model_tag: preds.model_tag.clone(),
        records,
    };
    if let Some(out) = &args.out {
        let mut value = serde_json::to_value(&file).expect("serializable");
        value["provenance"] = serde_json::to_value(&provenance).expect("serializable");
        write_output(out, &json_bytes(&value))?;
    }
    for r in &file.records {
        println!("{}: {:?} (n={})", r.metric, r.value, r.support);
        for sub in r.per_label.values() {
            println!("{}: {:?} (n={})", sub.metric, sub.value, sub.support);
        }
    }
    println!("{}", provenance.footer());
    Ok(())
}

#[derive(Args)]
pub struct DiagnoseArgs {
    /// QA eval set; repeat together with --predictions.
    #[arg(long = "eval", required = true)]
    evals: Vec<PathBuf>,
    #[arg(long = "predictions", required = true)]
    predictions: Vec<PathBuf>,
    /// Match question and context tokens case-sensitively.
    #[arg(long)]
    keep_case: bool,
    #[arg(long)]
    force: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn diagnose(args: DiagnoseArgs, mut cfg: RunConfig) -> CmdResult {
    if args.evals.len() != args.predictions.len() {
        return Err(Failure::input("give one --predictions per --eval"));
    }
    cfg.task = Some(Task::Qa);
    let dcfg = DistanceConfig {
        max_len: cfg.max_len,
        tokenizer: cfg.tokenizer_config.clone(),
        lowercase_before_match: !args.keep_case,
    };
    let qcfg = qa_config(&cfg);
    let mut rows = Vec::new();
    let mut inputs = Vec::new();
    for (eval, preds) in args.evals.iter().zip(&args.predictions) {
        let (set, p, digests) = load_pair(eval, preds, args.force)?;
        rows.push(extremes_distance_summary::<f64>(
            &set,
            &p,
            &dcfg,
            &qcfg,
            cfg.fraction,
        )?);
        inputs.extend(digests);
    }
    let provenance = Provenance::new("diagnose", inputs, &cfg);
    if let Some(out) = &args.out {
        write_output(
            out,
            &json_bytes(&json!({ "rows": rows, "provenance": provenance })),
        )?;
    }
    for r in &rows {
        println!(
            "{}: top_mean={:?} bottom_mean={:?} (n={})",
            r.language, r.top_mean, r.bottom_mean, r.n
        );
    }
    println!("{}", provenance.footer());
    Ok(())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::from_str(s).map_err(|e| e.to_string())
}

#[derive(Args)]
pub struct ReportArgs {
    /// Score files written by `score --out`.
    #[arg(required = true)]
    scores: Vec<PathBuf>,
    /// Score files shown in parentheses next to the main values.
    #[arg(long)]
    baseline: Vec<PathBuf>,
    #[arg(long, default_value = "md", value_parser = parse_format)]
    format: ReportFormat,
    /// Add `l:*`, `*:l` and `*:*` averages to the Markdown output.
    #[arg(long)]
    star_averages: bool,
    /// Leave the diagonal out of starred averages.
    #[arg(long)]
    exclude_diagonal: bool,
    /// Column order.
    #[arg(long, value_delimiter = ',')]
    languages: Vec<String>,
    /// Write one heatmap JSON per metric into this directory.
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
    /// Write the report here (plus `<out>.provenance.json`) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn format_name(f: ReportFormat) -> &'static str {
    match f {
        ReportFormat::Csv => "csv",
        ReportFormat::Json => "json",
        ReportFormat::Markdown => "md",
    }
}

/// Flattens score files into report records. Repeated cells (e.g. runs with
/// different seeds) are averaged; they must agree on support.
fn collect_records(
    paths: &[PathBuf],
    suffix: &str,
    inputs: &mut Vec<InputDigest>,
) -> CmdResult<Vec<ReportRecord>> {
    let mut cells: BTreeMap<(String, Lang, Lang), (Vec<f64>, usize)> = BTreeMap::new();
    for path in paths {
        let (bytes, digest) = read_input(path)?;
        let file: ScoreFile = serde_json::from_slice(&bytes)
            .map_err(|e| Failure::input(format!("{}: not a score file: {e}", digest.file)))?;
        inputs.push(digest);
        let flat = file
            .records
            .iter()
            .flat_map(|r| std::iter::once(r).chain(r.per_label.values()));
        for r in flat {
            let key = (
                format!("{}{suffix}", r.metric),
                file.field1_lang.clone(),
                file.field2_lang.clone(),
            );
            let (values, support) = cells.entry(key.clone()).or_insert((Vec::new(), r.support));
            if *support != r.support {
                return Err(Failure::invalid(format!(
                    "cell {} ({}, {}) has runs with different support ({} vs {})",
                    key.0, key.1, key.2, support, r.support
                )));
            }
            values.push(r.value);
        }
    }
    Ok(cells
        .into_iter()
        .map(|((metric, l1, l2), (values, support))| ReportRecord {
            metric,
            field1_lang: l1,
            field2_lang: l2,
            value: values.iter().sum::<f64>() / values.len() as f64,
            support,
        })
        .collect())
}

pub fn report(args: ReportArgs, mut cfg: RunConfig) -> CmdResult {
    cfg.set_languages(&args.languages);
    cfg.format = Some(format_name(args.format).to_string());
    let mut inputs = Vec::new();
    let mut records = collect_records(&args.scores, "", &mut inputs)?;
    records.extend(collect_records(
        &args.baseline,
        BASELINE_SUFFIX,
        &mut inputs,
    )?);
    let options = ReportOptions {
        languages: cfg.languages.clone(),
        star_averages: args.star_averages,
        include_diagonal: !args.exclude_diagonal,
    };
    let body = emit_report(&records, args.format, &options)?;
    let provenance = Provenance::new("report", inputs, &cfg);

    if let Some(dir) = &args.heatmap_dir {
        for (metric, m) in matrices_from_records(&records, &cfg.languages)? {
            if metric.ends_with(BASELINE_SUFFIX) {
                continue;
            }
            let safe: String = metric
                .chars()
                .map(|c| {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                        c
                    } else {
                        '_'
                    }
                })
                .collect();
            let mut value = heatmap_json(&m);
            value["metric"] = json!(metric);
            write_output(
                &dir.join(format!("heatmap.{safe}.json")),
                &json_bytes(&value),
            )?;
        }
    }
    match &args.out {
        Some(out) => {
            write_output(out, &body)?;
            let mut side = out.clone().into_os_string();
            side.push(".provenance.json");
            write_output(Path::new(&side), &json_bytes(&provenance))?;
            println!("wrote {} ({} records)", base_name(out), records.len());
        }
        None => print!("{}", String::from_utf8_lossy(&body)),
    }
    println!("{}", provenance.footer());
    Ok(())
}
