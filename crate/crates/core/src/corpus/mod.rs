//! Benchmark instances, file parsers and parallel corpora.
//!
//! Every parser normalizes into [`Instance`], whose canonical serialization is
//! one JSON object per `(id, lang)` line. Text fields are NFC-normalized and
//! trimmed at the ends only; interior whitespace is kept because QA answer
//! offsets index into it.

mod jsonl;
mod parallel;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::Error;
use crate::lang::Lang;

pub use jsonl::{read_instances, read_rejects, write_instances, write_rejects};
pub(crate) use jsonl::{read_lines, write_line};
pub use parallel::{build_parallel_corpus, IntersectReport, ParallelCorpus};
pub use parse::{parse_pawsx_tsv, parse_squad_json, parse_xnli_tsv, ColumnMap, Parsed, Reject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Nli,
    Pi,
    Qa,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Nli => "nli",
            Task::Pi => "pi",
            Task::Qa => "qa",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nli" | "xnli" => Ok(Task::Nli),
            "pi" | "pawsx" | "paws-x" => Ok(Task::Pi),
            "qa" | "xquad" | "squad" => Ok(Task::Qa),
            other => Err(Error::InvalidValue(format!("unknown task `{other}`"))),
        }
    }
}

/// Classification labels of the NLI and PI tasks, plus the collapsed
/// `not_entailment` class used for per-label NLI breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
    NotEntailment,
    Paraphrase,
    NonParaphrase,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
            Label::NotEntailment => "not_entailment",
            Label::Paraphrase => "paraphrase",
            Label::NonParaphrase => "non_paraphrase",
        }
    }

    pub fn task(&self) -> Task {
        match self {
            Label::Paraphrase | Label::NonParaphrase => Task::Pi,
            _ => Task::Nli,
        }
    }

    /// Case-insensitive parse of a three-way NLI gold label.
    pub fn parse_nli(s: &str) -> Option<Label> {
        match s.trim().to_lowercase().as_str() {
            "entailment" => Some(Label::Entailment),
            "neutral" => Some(Label::Neutral),
            "contradiction" => Some(Label::Contradiction),
            _ => None,
        }
    }

    /// PAWS-X gold labels are `1` (paraphrase) and `0`; the spelled-out
    /// names are accepted too.
    pub fn parse_pi(s: &str) -> Option<Label> {
        match s.trim().to_lowercase().as_str() {
            "1" | "paraphrase" => Some(Label::Paraphrase),
            "0" | "non_paraphrase" | "non-paraphrase" => Some(Label::NonParaphrase),
            _ => None,
        }
    }

    /// Parses a model output label for `task`. NLI predictions may already be
    /// binary (`not_entailment`).
    pub fn parse_prediction(task: Task, s: &str) -> Option<Label> {
        match task {
            Task::Nli => Label::parse_nli(s).or_else(|| {
                matches!(
                    s.trim().to_lowercase().as_str(),
                    "not_entailment" | "not-entailment" | "non_entailment"
                )
                .then_some(Label::NotEntailment)
            }),
            Task::Pi => Label::parse_pi(s),
            Task::Qa => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A gold answer: `answer_start` counts Unicode scalar values into the
/// context, matching SQuAD's convention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub answer_start: usize,
}

impl Answer {
    /// Whether `text` occurs in `context` at `answer_start`.
    pub fn is_valid_in(&self, context: &str) -> bool {
        self.byte_range(context)
            .is_some_and(|(s, e)| context[s..e] == self.text)
    }

    /// Byte range of the span in `context`, if the offsets are in bounds.
    pub fn byte_range(&self, context: &str) -> Option<(usize, usize)> {
        let start = char_to_byte(context, self.answer_start)?;
        let end = char_to_byte(context, self.answer_start + self.text.chars().count())?;
        Some((start, end))
    }
}

pub(crate) fn char_to_byte(text: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .nth(char_idx)
}

/// NFC normalization followed by trimming of leading/trailing whitespace.
pub fn normalize_field(s: &str) -> String {
    s.nfc().collect::<String>().trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliInstance {
    pub id: String,
    pub lang: Lang,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiInstance {
    pub id: String,
    pub lang: Lang,
    pub sentence1: String,
    pub sentence2: String,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaInstance {
    pub id: String,
    pub lang: Lang,
    pub context: String,
    pub question: String,
    pub answers: Vec<Answer>,
}

/// One benchmark example in one language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Instance {
    Nli(NliInstance),
    Pi(PiInstance),
    Qa(QaInstance),
}

impl From<NliInstance> for Instance {
    fn from(i: NliInstance) -> Self {
        Instance::Nli(i)
    }
}

impl From<PiInstance> for Instance {
    fn from(i: PiInstance) -> Self {
        Instance::Pi(i)
    }
}

impl From<QaInstance> for Instance {
    fn from(i: QaInstance) -> Self {
        Instance::Qa(i)
    }
}

impl Instance {
    pub fn task(&self) -> Task {
        match self {
            Instance::Nli(_) => Task::Nli,
            Instance::Pi(_) => Task::Pi,
            Instance::Qa(_) => Task::Qa,
        }
    }

    pub fn id(&self) -> &str {
        match self {
            Instance::Nli(i) => &i.id,
            Instance::Pi(i) => &i.id,
            Instance::Qa(i) => &i.id,
        }
    }

    pub fn lang(&self) -> &Lang {
        match self {
            Instance::Nli(i) => &i.lang,
            Instance::Pi(i) => &i.lang,
            Instance::Qa(i) => &i.lang,
        }
    }

    /// The two text fields in task order: (premise, hypothesis),
    /// (sentence1, sentence2) or (context, question).
    pub fn fields(&self) -> (&str, &str) {
        match self {
            Instance::Nli(i) => (&i.premise, &i.hypothesis),
            Instance::Pi(i) => (&i.sentence1, &i.sentence2),
            Instance::Qa(i) => (&i.context, &i.question),
        }
    }

    pub fn label(&self) -> Option<Label> {
        match self {
            Instance::Nli(i) => Some(i.label),
            Instance::Pi(i) => Some(i.label),
            Instance::Qa(_) => None,
        }
    }

    /// Checks the per-task invariants, returning the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.id().trim().is_empty() {
            return Err("empty id".into());
        }
        if self.lang().as_str().is_empty() {
            return Err("empty language".into());
        }
        let (a, b) = self.fields();
        let names = match self.task() {
            Task::Nli => ("premise", "hypothesis"),
            Task::Pi => ("sentence1", "sentence2"),
            Task::Qa => ("context", "question"),
        };
        if a.trim().is_empty() {
            return Err(format!("empty {}", names.0));
        }
        if b.trim().is_empty() {
            return Err(format!("empty {}", names.1));
        }
        match self {
            Instance::Nli(i) if i.label.task() != Task::Nli || i.label == Label::NotEntailment => {
                Err(format!("label `{}` is not a three-way NLI label", i.label))
            }
            Instance::Pi(i) if i.label.task() != Task::Pi => {
                Err(format!("label `{}` is not a PI label", i.label))
            }
            Instance::Qa(q) => {
                if q.answers.is_empty() {
                    return Err("no answers".into());
                }
                match q.answers.iter().find(|a| !a.is_valid_in(&q.context)) {
                    Some(a) => Err(format!(
                        "answer {:?} does not occur at offset {}",
                        a.text, a.answer_start
                    )),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}
