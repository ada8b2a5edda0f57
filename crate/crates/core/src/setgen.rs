//! Within- and across-language evaluation sets, across-language training
//! sets, and word-shuffled control variants.
//!
//! An across set for `(l1, l2)` takes field 1 (premise, sentence1 or
//! context) from the `l1` translation and field 2 (hypothesis, sentence2 or
//! question) from the `l2` translation of the same id. A within set is the
//! `(l, l)` case. Gold labels and answers always come from the `l1` side.

use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use unicode_segmentation::UnicodeSegmentation;

use crate::corpus::{read_lines, write_line};
use crate::corpus::{
    Answer, Instance, Label, NliInstance, ParallelCorpus, PiInstance, QaInstance, Task,
};
use crate::error::{Error, Result};
use crate::lang::Lang;
use crate::tokenize::{TokenizerConfig, TokenizerMode};

/// Gold annotation of an eval instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Gold {
    Label(Label),
    Answers(Vec<Answer>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInstance {
    pub id: String,
    pub field1: String,
    pub field2: String,
    pub gold: Gold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Eval,
    Train,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Digest of the parallel corpus the set was drawn from.
    pub corpus: String,
    pub flavor: Flavor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle: Option<ShuffleConfig>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSet {
    pub task: Task,
    pub field1_lang: Lang,
    pub field2_lang: Lang,
    pub provenance: Provenance,
    pub instances: Vec<EvalInstance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleScope {
    BothFields,
    Field2Only,
}

impl ShuffleScope {
    /// The only scope allowed for `task`: QA keeps its context (and thus its
    /// answer offsets) intact.
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Qa => ShuffleScope::Field2Only,
            Task::Nli | Task::Pi => ShuffleScope::BothFields,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ShuffleScope::BothFields => "both_fields",
            ShuffleScope::Field2Only => "field2_only",
        }
    }
}

impl FromStr for ShuffleScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "both" | "both_fields" => Ok(ShuffleScope::BothFields),
            "field2" | "field2_only" | "question" => Ok(ShuffleScope::Field2Only),
            other => Err(Error::InvalidValue(format!(
                "unknown shuffle scope `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShuffleConfig {
    pub seed: u64,
    pub scope: ShuffleScope,
    pub tokenizer: TokenizerConfig,
}

impl ShuffleConfig {
    /// Seeded config with the scope mandated for `task` and default
    /// tokenizer modes.
    pub fn for_task(task: Task, seed: u64) -> Self {
        ShuffleConfig {
            seed,
            scope: ShuffleScope::for_task(task),
            tokenizer: TokenizerConfig::default(),
        }
    }
}

pub fn build_within_set(corpus: &ParallelCorpus, lang: &Lang) -> Result<EvalSet> {
    build_pair_set(corpus, lang, lang, Flavor::Eval)
}

pub fn build_across_set(corpus: &ParallelCorpus, lang1: &Lang, lang2: &Lang) -> Result<EvalSet> {
    build_pair_set(corpus, lang1, lang2, Flavor::Eval)
}

/// Same field selection as [`build_across_set`], flagged as training data
/// for a fine-tuning run on mixed-language pairs.
pub fn build_across_training_set(
    corpus: &ParallelCorpus,
    lang1: &Lang,
    lang2: &Lang,
) -> Result<EvalSet> {
    build_pair_set(corpus, lang1, lang2, Flavor::Train)
}

fn build_pair_set(
    corpus: &ParallelCorpus,
    lang1: &Lang,
    lang2: &Lang,
    flavor: Flavor,
) -> Result<EvalSet> {
    for l in [lang1, lang2] {
        if !corpus.has_language(l) {
            return Err(Error::UnknownLanguage(l.to_string()));
        }
    }
    let instances = corpus
        .ids()
        .iter()
        .map(|id| {
            let first = corpus
                .get(id, lang1)
                .expect("parallel corpus covers every id");
            let second = corpus
                .get(id, lang2)
                .expect("parallel corpus covers every id");
            let gold = match first {
                Instance::Nli(i) => Gold::Label(i.label),
                Instance::Pi(i) => Gold::Label(i.label),
                Instance::Qa(q) => Gold::Answers(q.answers.clone()),
            };
            EvalInstance {
                id: id.clone(),
                field1: first.fields().0.to_string(),
                field2: second.fields().1.to_string(),
                gold,
            }
        })
        .collect();
    Ok(EvalSet {
        task: corpus.task(),
        field1_lang: lang1.clone(),
        field2_lang: lang2.clone(),
        provenance: Provenance {
            corpus: corpus.digest(),
            flavor,
            shuffle: None,
        },
        instances,
    })
}

/// Returns a copy of `set` whose in-scope fields have their tokens randomly
/// permuted.
///
/// Each field is permuted by a ChaCha stream keyed on `(seed, id, field
/// index)`, so the result does not depend on instance order. Tokens are
/// whitespace-separated words rejoined with single spaces. In a language
/// whose tokenizer mode is per-character, a field with no interior
/// whitespace is permuted by grapheme cluster and rejoined without a
/// separator. Fields with at most one token are returned unchanged.
pub fn shuffle_control(set: &EvalSet, config: &ShuffleConfig) -> Result<EvalSet> {
    if config.scope != ShuffleScope::for_task(set.task) {
        return Err(Error::ScopeViolation {
            task: set.task.to_string(),
            scope: config.scope.as_str().to_string(),
        });
    }
    let mode1 = config.tokenizer.mode(&set.field1_lang);
    let mode2 = config.tokenizer.mode(&set.field2_lang);
    let instances = set
        .instances
        .iter()
        .map(|inst| {
            let field1 = match config.scope {
                ShuffleScope::BothFields => shuffle_text(
                    &inst.field1,
                    mode1,
                    &mut field_rng(config.seed, &inst.id, 1),
                ),
                ShuffleScope::Field2Only => inst.field1.clone(),
            };
            let field2 = shuffle_text(
                &inst.field2,
                mode2,
                &mut field_rng(config.seed, &inst.id, 2),
            );
            EvalInstance {
                id: inst.id.clone(),
                field1,
                field2,
                gold: inst.gold.clone(),
            }
        })
        .collect();
    let mut provenance = set.provenance.clone();
    provenance.shuffle = Some(config.clone());
    Ok(EvalSet {
        task: set.task,
        field1_lang: set.field1_lang.clone(),
        field2_lang: set.field2_lang.clone(),
        provenance,
        instances,
    })
}

fn field_rng(seed: u64, id: &str, field: u8) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"xlingual/shuffle/v1");
    h.update(seed.to_le_bytes());
    h.update([field]);
    h.update(id.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

/// Permutes the tokens of `text` with `rng`. See [`shuffle_control`].
pub fn shuffle_text(text: &str, mode: TokenizerMode, rng: &mut ChaCha8Rng) -> String {
    let mut words: Vec<&str> = text.split_whitespace().collect();
    if words.len() > 1 {
        words.shuffle(rng);
        return words.join(" ");
    }
    if mode == TokenizerMode::PerCharacter {
        let mut graphemes: Vec<&str> = text.trim().graphemes(true).collect();
        if graphemes.len() > 1 {
            graphemes.shuffle(rng);
            return graphemes.concat();
        }
    }
    text.to_string()
}

#[derive(Serialize, Deserialize)]
struct Header {
    task: Task,
    field1_lang: Lang,
    field2_lang: Lang,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct Line {
    #[serde(flatten)]
    instance: Instance,
    field1_lang: Lang,
    field2_lang: Lang,
}

impl EvalSet {
    pub fn is_within(&self) -> bool {
        self.field1_lang == self.field2_lang
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    fn header(&self) -> Header {
        Header {
            task: self.task,
            field1_lang: self.field1_lang.clone(),
            field2_lang: self.field2_lang.clone(),
            provenance: self.provenance.clone(),
        }
    }

    /// Hex SHA-256 of the serialized header line. Prediction files quote it
    /// to prove which set they were produced for.
    pub fn provenance_digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.header()).expect("serializable");
        hex::encode(Sha256::digest(bytes))
    }

    /// The instance as a canonical record; `lang` is the field-1 language.
    pub fn to_instance(&self, inst: &EvalInstance) -> Instance {
        let id = inst.id.clone();
        let lang = self.field1_lang.clone();
        match (&inst.gold, self.task) {
            (Gold::Label(label), Task::Nli) => Instance::Nli(NliInstance {
                id,
                lang,
                premise: inst.field1.clone(),
                hypothesis: inst.field2.clone(),
                label: *label,
            }),
            (Gold::Label(label), Task::Pi) => Instance::Pi(PiInstance {
                id,
                lang,
                sentence1: inst.field1.clone(),
                sentence2: inst.field2.clone(),
                label: *label,
            }),
            (Gold::Answers(answers), _) => Instance::Qa(QaInstance {
                id,
                lang,
                context: inst.field1.clone(),
                question: inst.field2.clone(),
                answers: answers.clone(),
            }),
            (Gold::Label(_), Task::Qa) => unreachable!("QA sets carry answers"),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_line(&mut w, &self.header())?;
        for inst in &self.instances {
            let line = Line {
                instance: self.to_instance(inst),
                field1_lang: self.field1_lang.clone(),
                field2_lang: self.field2_lang.clone(),
            };
            write_line(&mut w, &line)?;
        }
        w.flush()
    }

    pub fn read_jsonl<R: BufRead>(mut r: R, source_name: &str) -> Result<EvalSet> {
        let malformed = |reason: String| Error::Malformed {
            source_name: source_name.to_string(),
            reason,
        };
        let mut first = String::new();
        r.read_line(&mut first)
            .map_err(|e| Error::io(source_name, e))?;
        let header: Header = serde_json::from_str(&first).map_err(|source| Error::Json {
            source_name: source_name.to_string(),
            line: 1,
            source,
        })?;
        let lines: Vec<(usize, Line)> = read_lines(r, source_name)?;
        let mut instances = Vec::with_capacity(lines.len());
        for (n, line) in lines {
            let n = n + 1;
            if line.field1_lang != header.field1_lang || line.field2_lang != header.field2_lang {
                return Err(malformed(format!(
                    "line {n}: language pair differs from header"
                )));
            }
            if line.instance.task() != header.task {
                return Err(malformed(format!("line {n}: task differs from header")));
            }
            line.instance
                .validate()
                .map_err(|reason| malformed(format!("line {n}: {reason}")))?;
            let (f1, f2) = line.instance.fields();
            let gold = match &line.instance {
                Instance::Qa(q) => Gold::Answers(q.answers.clone()),
                other => Gold::Label(other.label().expect("classification instance")),
            };
            instances.push(EvalInstance {
                id: line.instance.id().to_string(),
                field1: f1.to_string(),
                field2: f2.to_string(),
                gold,
            });
        }
        Ok(EvalSet {
            task: header.task,
            field1_lang: header.field1_lang,
            field2_lang: header.field2_lang,
            provenance: header.provenance,
            instances,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::build_parallel_corpus;

    fn nli(id: &str, lang: &str, p: &str, h: &str) -> Instance {
        Instance::Nli(NliInstance {
            id: id.into(),
            lang: Lang::new(lang),
            premise: p.into(),
            hypothesis: h.into(),
            label: Label::Neutral,
        })
    }

    fn en_de() -> ParallelCorpus {
        let insts = vec![
            nli("a", "en", "P_en", "H_en"),
            nli("a", "de", "P_de", "H_de"),
            nli("b", "en", "P2_en", "H2_en"),
            nli("b", "de", "P2_de", "H2_de"),
        ];
        build_parallel_corpus(insts, &[Lang::new("en"), Lang::new("de")])
            .unwrap()
            .0
    }

    #[test]
    fn within_takes_both_fields_from_one_language() {
        let set = build_within_set(&en_de(), &Lang::new("en")).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.is_within());
        assert_eq!(set.instances[0].field1, "P_en");
        assert_eq!(set.instances[0].field2, "H_en");
    }

    #[test]
    fn across_is_asymmetric() {
        let c = en_de();
        let (en, de) = (Lang::new("en"), Lang::new("de"));
        let ende = build_across_set(&c, &en, &de).unwrap();
        let deen = build_across_set(&c, &de, &en).unwrap();
        assert_eq!(
            (
                ende.instances[0].field1.as_str(),
                ende.instances[0].field2.as_str()
            ),
            ("P_en", "H_de")
        );
        assert_eq!(
            (
                deen.instances[0].field1.as_str(),
                deen.instances[0].field2.as_str()
            ),
            ("P_de", "H_en")
        );
        assert_ne!(ende.instances, deen.instances);
    }

    #[test]
    fn unknown_language_is_fatal() {
        let err = build_within_set(&en_de(), &Lang::new("fr")).unwrap_err();
        assert!(matches!(err, Error::UnknownLanguage(l) if l == "fr"));
    }

    #[test]
    fn singleton_fields_are_untouched() {
        let mut rng = field_rng(1, "x", 1);
        assert_eq!(shuffle_text("a", TokenizerMode::Whitespace, &mut rng), "a");
        assert_eq!(
            shuffle_text("hello", TokenizerMode::Whitespace, &mut rng),
            "hello"
        );
        assert_eq!(
            shuffle_text("猫", TokenizerMode::PerCharacter, &mut rng),
            "猫"
        );
    }

    #[test]
    fn unsegmented_text_shuffles_graphemes() {
        let text = "我们今天去公园散步吧";
        let mut seen_change = false;
        for seed in 0..8 {
            let out = shuffle_text(
                text,
                TokenizerMode::PerCharacter,
                &mut field_rng(seed, "x", 1),
            );
            assert!(!out.contains(' '));
            let mut a: Vec<&str> = out.graphemes(true).collect();
            let mut b: Vec<&str> = text.graphemes(true).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
            seen_change |= out != text;
        }
        assert!(seen_change);
    }

    #[test]
    fn scope_must_match_task() {
        let set = build_within_set(&en_de(), &Lang::new("en")).unwrap();
        let mut cfg = ShuffleConfig::for_task(Task::Nli, 3);
        cfg.scope = ShuffleScope::Field2Only;
        assert!(matches!(
            shuffle_control(&set, &cfg),
            Err(Error::ScopeViolation { .. })
        ));
    }

    #[test]
    fn shuffle_records_config_in_provenance() {
        let set = build_within_set(&en_de(), &Lang::new("en")).unwrap();
        let cfg = ShuffleConfig::for_task(Task::Nli, 9);
        let out = shuffle_control(&set, &cfg).unwrap();
        assert_eq!(out.provenance.shuffle.as_ref(), Some(&cfg));
        assert_ne!(out.provenance_digest(), set.provenance_digest());
    }

    #[test]
    fn jsonl_round_trip() {
        let c = en_de();
        let set = build_across_training_set(&c, &Lang::new("de"), &Lang::new("en")).unwrap();
        let mut buf = Vec::new();
        set.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().contains("\"flavor\":\"train\""));
        assert!(lines
            .next()
            .unwrap()
            .ends_with("\"field1_lang\":\"de\",\"field2_lang\":\"en\"}"));
        assert_eq!(EvalSet::read_jsonl(&buf[..], "mem").unwrap(), set);
    }
}
