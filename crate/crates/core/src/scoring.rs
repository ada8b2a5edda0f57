//! Joining model predictions to eval sets and scoring them.
//!
//! Classification sets are scored by accuracy, optionally after collapsing
//! NLI labels to entailment / not-entailment. QA sets are scored with
//! SQuAD-style exact match and bag-of-tokens F1, tokenized per language.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use crate::corpus::{read_lines, write_line, Answer, Label, Task};
use crate::error::{Error, Result};
use crate::lang::Lang;
use crate::scalar::{mean, Scalar};
use crate::setgen::{EvalInstance, EvalSet, Gold};
use crate::tokenize::{tokenize, TokenizerConfig};

/// A metric value over `support` instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord<S = f64> {
    pub metric: String,
    pub value: S,
    pub support: usize,
    #[serde(default = "BTreeMap::new", skip_serializing_if = "BTreeMap::is_empty")]
    pub per_label: BTreeMap<String, ScoreRecord<S>>,
}

impl<S: Scalar> ScoreRecord<S> {
    pub fn new(metric: impl Into<String>, value: S, support: usize) -> Result<Self> {
        if support == 0 {
            return Err(Error::InvalidValue("score over zero instances".into()));
        }
        if value < S::zero() || value > S::one() {
            return Err(Error::InvalidValue(format!(
                "score {value:?} outside [0, 1]"
            )));
        }
        Ok(ScoreRecord {
            metric: metric.into(),
            value,
            support,
            per_label: BTreeMap::new(),
        })
    }

    pub fn to_f64(&self) -> ScoreRecord<f64> {
        ScoreRecord {
            metric: self.metric.clone(),
            value: self.value.to_f64_lossy(),
            support: self.support,
            per_label: self
                .per_label
                .iter()
                .map(|(k, v)| (k.clone(), v.to_f64()))
                .collect(),
        }
    }
}

/// Model outputs keyed by instance id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionSet {
    pub task: Task,
    pub model_tag: String,
    /// [`EvalSet::provenance_digest`] of the set the predictions were made for.
    pub eval_set_provenance: Option<String>,
    pub seeds: Vec<u64>,
    pub outputs: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct PredictionHeader {
    task: Task,
    model_tag: String,
    #[serde(default)]
    eval_set_provenance: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    seeds: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    id: String,
    prediction: String,
}

impl PredictionSet {
    pub fn new(task: Task, model_tag: impl Into<String>) -> Self {
        PredictionSet {
            task,
            model_tag: model_tag.into(),
            eval_set_provenance: None,
            seeds: Vec::new(),
            outputs: BTreeMap::new(),
        }
    }

    /// Predictions equal to the gold annotation (first gold answer for QA).
    pub fn from_gold(set: &EvalSet, model_tag: impl Into<String>) -> Self {
        let mut p = PredictionSet::new(set.task, model_tag);
        p.eval_set_provenance = Some(set.provenance_digest());
        for inst in &set.instances {
            let out = match &inst.gold {
                Gold::Label(l) => l.as_str().to_string(),
                Gold::Answers(a) => a[0].text.clone(),
            };
            p.outputs.insert(inst.id.clone(), out);
        }
        p
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_line(
            &mut w,
            &PredictionHeader {
                task: self.task,
                model_tag: self.model_tag.clone(),
                eval_set_provenance: self.eval_set_provenance.clone(),
                seeds: self.seeds.clone(),
            },
        )?;
        for (id, prediction) in &self.outputs {
            write_line(
                &mut w,
                &PredictionLine {
                    id: id.clone(),
                    prediction: prediction.clone(),
                },
            )?;
        }
        w.flush()
    }

    pub fn read_jsonl<R: BufRead>(mut r: R, source_name: &str) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)
            .map_err(|e| Error::io(source_name, e))?;
        let header: PredictionHeader =
            serde_json::from_str(&first).map_err(|source| Error::Json {
                source_name: source_name.to_string(),
                line: 1,
                source,
            })?;
        let mut outputs = BTreeMap::new();
        for (_, line) in read_lines::<_, PredictionLine>(r, source_name)? {
            if outputs.insert(line.id.clone(), line.prediction).is_some() {
                return Err(Error::DuplicatePrediction(line.id));
            }
        }
        Ok(PredictionSet {
            task: header.task,
            model_tag: header.model_tag,
            eval_set_provenance: header.eval_set_provenance,
            seeds: header.seeds,
            outputs,
        })
    }
}

/// Eval instances paired with their predictions, plus the number of
/// predictions whose id is not in the set.
pub struct Joined<'a> {
    pub pairs: Vec<(&'a EvalInstance, &'a str)>,
    pub extras: usize,
}

pub fn join<'a>(set: &'a EvalSet, predictions: &'a PredictionSet) -> Result<Joined<'a>> {
    if set.task != predictions.task {
        return Err(Error::TaskMismatch {
            expected: set.task.to_string(),
            found: predictions.task.to_string(),
        });
    }
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(set.instances.len());
    for inst in &set.instances {
        match predictions.outputs.get(&inst.id) {
            Some(p) => pairs.push((inst, p.as_str())),
            None => missing.push(inst.id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::MissingPredictions(missing));
    }
    let extras = predictions.outputs.len() - pairs.len();
    Ok(Joined { pairs, extras })
}

/// Merges neutral and contradiction into `not_entailment`.
pub fn collapse_labels(label: Label) -> Result<Label> {
    match label {
        Label::Entailment => Ok(Label::Entailment),
        Label::Neutral | Label::Contradiction | Label::NotEntailment => Ok(Label::NotEntailment),
        Label::Paraphrase | Label::NonParaphrase => Err(Error::NotNli(label.to_string())),
    }
}

/// (gold, predicted) label pairs after optional collapse.
fn label_pairs(
    set: &EvalSet,
    predictions: &PredictionSet,
    collapse: bool,
) -> Result<Vec<(Label, Label)>> {
    if set.task == Task::Qa {
        return Err(Error::TaskMismatch {
            expected: "nli or pi".into(),
            found: set.task.to_string(),
        });
    }
    let joined = join(set, predictions)?;
    joined
        .pairs
        .into_iter()
        .map(|(inst, raw)| {
            let Gold::Label(gold) = inst.gold else {
                unreachable!("classification set")
            };
            let pred = Label::parse_prediction(set.task, raw)
                .filter(|p| collapse || *p != Label::NotEntailment)
                .ok_or_else(|| Error::UnknownLabel {
                    id: inst.id.clone(),
                    label: raw.to_string(),
                })?;
            if collapse {
                Ok((collapse_labels(gold)?, collapse_labels(pred)?))
            } else {
                Ok((gold, pred))
            }
        })
        .collect()
}

pub fn accuracy<S: Scalar>(
    set: &EvalSet,
    predictions: &PredictionSet,
    collapse: bool,
) -> Result<ScoreRecord<S>> {
    let pairs = label_pairs(set, predictions, collapse)?;
    let correct = pairs.iter().filter(|(g, p)| g == p).count();
    if pairs.is_empty() {
        return Err(Error::InvalidValue("empty eval set".into()));
    }
    ScoreRecord::new("accuracy", S::ratio(correct, pairs.len()), pairs.len())
}

/// Accuracy restricted to each gold label. Labels absent from the gold
/// annotation are omitted.
pub fn per_label_accuracy<S: Scalar>(
    set: &EvalSet,
    predictions: &PredictionSet,
    collapse: bool,
) -> Result<BTreeMap<Label, ScoreRecord<S>>> {
    let pairs = label_pairs(set, predictions, collapse)?;
    let mut counts: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
    for (g, p) in &pairs {
        let c = counts.entry(*g).or_default();
        c.1 += 1;
        if g == p {
            c.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(label, (correct, n))| {
            Ok((
                label,
                ScoreRecord::new(format!("accuracy:{label}"), S::ratio(correct, n), n)?,
            ))
        })
        .collect()
}

/// Accuracy with the per-label breakdown attached.
pub fn classification_scores<S: Scalar>(
    set: &EvalSet,
    predictions: &PredictionSet,
    collapse: bool,
    with_per_label: bool,
) -> Result<ScoreRecord<S>> {
    let mut overall = accuracy(set, predictions, collapse)?;
    if with_per_label {
        overall.per_label = per_label_accuracy(set, predictions, collapse)?
            .into_iter()
            .map(|(l, r)| (l.as_str().to_string(), r))
            .collect();
    }
    Ok(overall)
}

/// Answer normalization and tokenization settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaConfig {
    /// Articles removed per primary language subtag.
    pub articles: BTreeMap<String, Vec<String>>,
    pub tokenizer: TokenizerConfig,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            articles: BTreeMap::from([(
                "en".to_string(),
                vec!["a".to_string(), "an".to_string(), "the".to_string()],
            )]),
            tokenizer: TokenizerConfig::default(),
        }
    }
}

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

/// SQuAD-style answer normalization: lowercase, drop Unicode punctuation,
/// drop the language's articles where they stand as whole words, collapse
/// whitespace.
pub fn normalize_answer(text: &str, lang: &Lang, config: &QaConfig) -> String {
    let lowered = text.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !is_punctuation(*c)).collect();
    let no_articles = match config.articles.get(&lang.primary()) {
        Some(articles) if !articles.is_empty() => remove_words(&no_punct, articles),
        _ => no_punct,
    };
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Replaces every maximal run of word characters that equals one of `words`
/// with a space.
fn remove_words(text: &str, words: &[String]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut run_start: Option<usize> = None;
    let flush = |out: &mut String, run: &str| {
        if words.iter().any(|w| w == run) {
            out.push(' ');
        } else {
            out.push_str(run);
        }
    };
    for (i, c) in text.char_indices() {
        let word = c.is_alphanumeric() || c == '_';
        match (word, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                flush(&mut out, &text[s..i]);
                run_start = None;
                out.push(c);
            }
            (false, None) => out.push(c),
            (true, Some(_)) => {}
        }
    }
    if let Some(s) = run_start {
        flush(&mut out, &text[s..]);
    }
    out
}

/// 1 when the normalized prediction equals any normalized gold answer.
pub fn qa_em(prediction: &str, golds: &[&str], lang: &Lang, config: &QaConfig) -> u8 {
    let pred = normalize_answer(prediction, lang, config);
    u8::from(
        golds
            .iter()
            .any(|g| normalize_answer(g, lang, config) == pred),
    )
}

/// Maximum over golds of the bag-of-tokens F1 between normalized strings.
pub fn qa_f1<S: Scalar>(prediction: &str, golds: &[&str], lang: &Lang, config: &QaConfig) -> S {
    let pred = tokenize(
        &normalize_answer(prediction, lang, config),
        lang,
        &config.tokenizer,
    );
    golds
        .iter()
        .map(|g| {
            let gold = tokenize(&normalize_answer(g, lang, config), lang, &config.tokenizer);
            token_f1::<S>(&pred, &gold)
        })
        .fold(S::zero(), |best, f| if f > best { f } else { best })
}

fn token_f1<S: Scalar>(pred: &[String], gold: &[String]) -> S {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() {
            S::one()
        } else {
            S::zero()
        };
    }
    let mut bag: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *bag.entry(t.as_str()).or_default() += 1;
    }
    let mut common = 0usize;
    for t in pred {
        if let Some(n) = bag.get_mut(t.as_str()) {
            if *n > 0 {
                *n -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return S::zero();
    }
    let precision = S::ratio(common, pred.len());
    let recall = S::ratio(common, gold.len());
    S::from_count(2) * precision.clone() * recall.clone() / (precision + recall)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaScores<S = f64> {
    pub em: ScoreRecord<S>,
    pub f1: ScoreRecord<S>,
    pub per_instance_f1: BTreeMap<String, S>,
}

/// Dataset EM and F1 as unweighted means over instances. Normalization and
/// tokenization follow the context language, since answers are context
/// spans.
pub fn score_qa_set<S: Scalar>(
    set: &EvalSet,
    predictions: &PredictionSet,
    config: &QaConfig,
) -> Result<QaScores<S>> {
    if set.task != Task::Qa {
        return Err(Error::TaskMismatch {
            expected: "qa".into(),
            found: set.task.to_string(),
        });
    }
    let joined = join(set, predictions)?;
    let lang = &set.field1_lang;
    let mut ems = Vec::with_capacity(joined.pairs.len());
    let mut per_instance_f1 = BTreeMap::new();
    for (inst, pred) in &joined.pairs {
        let Gold::Answers(answers) = &inst.gold else {
            unreachable!("QA set")
        };
        let golds: Vec<&str> = answers.iter().map(|a: &Answer| a.text.as_str()).collect();
        ems.push(S::from_count(qa_em(pred, &golds, lang, config) as usize));
        per_instance_f1.insert(inst.id.clone(), qa_f1::<S>(pred, &golds, lang, config));
    }
    let n = joined.pairs.len();
    let em = mean(ems).ok_or_else(|| Error::InvalidValue("empty eval set".into()))?;
    let f1 = mean(per_instance_f1.values().cloned()).expect("non-empty");
    Ok(QaScores {
        em: ScoreRecord::new("em", em, n)?,
        f1: ScoreRecord::new("f1", f1, n)?,
        per_instance_f1,
    })
}
