//! Lexical-overlap diagnostics for spotting dataset artifacts.
//!
//! The QA distance metric measures how tightly the question's words cluster
//! around the gold answer inside the context: every context position whose
//! token also occurs in the question contributes its absolute token distance
//! to the answer-span center, and the distances are averaged. A question
//! sharing no token with its context gets `max_len`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Answer, Task};
use crate::error::{Error, Result};
use crate::lang::Lang;
use crate::scalar::{mean, Scalar};
use crate::scoring::{score_qa_set, PredictionSet, QaConfig};
use crate::setgen::{EvalInstance, EvalSet, Gold};
use crate::tokenize::{tokenize, tokenize_spans, TokenizerConfig};

/// Default fallback distance: the QA models' maximum sequence length.
pub const DEFAULT_MAX_LEN: usize = 384;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceConfig {
    pub max_len: usize,
    pub tokenizer: TokenizerConfig,
    pub lowercase_before_match: bool,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            max_len: DEFAULT_MAX_LEN,
            tokenizer: TokenizerConfig::default(),
            lowercase_before_match: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord<S = f64> {
    pub id: String,
    pub distance: S,
    pub shared_occurrence_count: usize,
}

/// Inclusive token span `[start, end]` of an answer in the context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

/// Mean distance from each context occurrence of a question token to the
/// center of `span`.
///
/// Occurrences are counted once per context position, however many times the
/// token appears in the question.
pub fn shared_word_distance<S: Scalar>(
    id: &str,
    context_tokens: &[String],
    question_tokens: &[String],
    span: TokenSpan,
    config: &DistanceConfig,
) -> Result<DistanceRecord<S>> {
    if config.max_len == 0 {
        return Err(Error::InvalidValue("max_len must be positive".into()));
    }
    if span.start > span.end || span.end >= context_tokens.len() {
        return Err(Error::InvalidSpan {
            id: id.to_string(),
            reason: format!(
                "token span [{}, {}] outside context of {} tokens",
                span.start,
                span.end,
                context_tokens.len()
            ),
        });
    }
    let question: HashSet<&str> = question_tokens.iter().map(String::as_str).collect();
    let center = S::from_count(span.start + span.end) / S::from_count(2);
    let distances: Vec<S> = context_tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| question.contains(t.as_str()))
        .map(|(p, _)| S::from_count(p).abs_diff(&center))
        .collect();
    let shared_occurrence_count = distances.len();
    Ok(DistanceRecord {
        id: id.to_string(),
        distance: mean(distances).unwrap_or_else(|| S::from_count(config.max_len)),
        shared_occurrence_count,
    })
}

/// Tokens of the context that overlap the answer's character span.
pub fn answer_token_span(
    id: &str,
    context: &str,
    answer: &Answer,
    lang: &Lang,
    tokenizer: &TokenizerConfig,
) -> Result<TokenSpan> {
    let invalid = |reason: String| Error::InvalidSpan {
        id: id.to_string(),
        reason,
    };
    let (start, end) = answer
        .byte_range(context)
        .filter(|_| answer.is_valid_in(context))
        .ok_or_else(|| {
            invalid(format!(
                "answer {:?} not found at offset {}",
                answer.text, answer.answer_start
            ))
        })?;
    let hits: Vec<usize> = tokenize_spans(context, tokenizer.mode(lang))
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start < end && t.end > start)
        .map(|(i, _)| i)
        .collect();
    match (hits.first(), hits.last()) {
        (Some(&s), Some(&e)) => Ok(TokenSpan { start: s, end: e }),
        _ => Err(invalid("answer covers no context token".into())),
    }
}

fn match_tokens(text: &str, lang: &Lang, config: &DistanceConfig) -> Vec<String> {
    let toks = tokenize(text, lang, &config.tokenizer);
    if config.lowercase_before_match {
        toks.into_iter().map(|t| t.to_lowercase()).collect()
    } else {
        toks
    }
}

/// Distance record of one QA eval instance, anchored on its first gold
/// answer.
pub fn instance_distance<S: Scalar>(
    set: &EvalSet,
    inst: &EvalInstance,
    config: &DistanceConfig,
) -> Result<DistanceRecord<S>> {
    let Gold::Answers(answers) = &inst.gold else {
        return Err(Error::TaskMismatch {
            expected: "qa".into(),
            found: set.task.to_string(),
        });
    };
    let answer = answers.first().ok_or_else(|| Error::InvalidSpan {
        id: inst.id.clone(),
        reason: "no gold answer".into(),
    })?;
    let span = answer_token_span(
        &inst.id,
        &inst.field1,
        answer,
        &set.field1_lang,
        &config.tokenizer,
    )?;
    let context = match_tokens(&inst.field1, &set.field1_lang, config);
    let question = match_tokens(&inst.field2, &set.field2_lang, config);
    shared_word_distance(&inst.id, &context, &question, span, config)
}

/// Splits ids into the `k = floor(fraction * N)` highest and lowest scored.
///
/// Ids are ordered by descending score, ties by ascending id; `top` is the
/// first `k` of that order and `bottom` the last `k`.
pub fn select_extremes<S: Scalar>(
    scores: &BTreeMap<String, S>,
    fraction: f64,
) -> Result<(BTreeSet<String>, BTreeSet<String>)> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::InvalidValue(format!(
            "fraction {fraction} not in (0, 0.5]"
        )));
    }
    if scores.is_empty() {
        return Err(Error::EmptySelection("no scored instances".into()));
    }
    let n = scores.len();
    // Absorbs representation error such as 0.29 * 100 = 28.999999999999996.
    let k = ((fraction * n as f64) + 1e-9).floor() as usize;
    let mut ordered: Vec<(&String, &S)> = scores.iter().collect();
    ordered.sort_by(|(ia, sa), (ib, sb)| {
        sb.partial_cmp(sa)
            .unwrap_or(Ordering::Equal)
            .then_with(|| ia.cmp(ib))
    });
    let top = ordered[..k].iter().map(|(id, _)| (*id).clone()).collect();
    let bottom = ordered[n - k..]
        .iter()
        .map(|(id, _)| (*id).clone())
        .collect();
    Ok((top, bottom))
}

/// One bar-chart row: mean distance in the easiest and hardest instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow<S = f64> {
    pub language: String,
    pub fraction: f64,
    pub top_mean: S,
    pub bottom_mean: S,
    pub max_len: usize,
    pub n: usize,
}

/// Scores `predictions` on a QA set, picks the top and bottom `fraction` by
/// F1, and averages their distance records.
pub fn extremes_distance_summary<S: Scalar>(
    set: &EvalSet,
    predictions: &PredictionSet,
    config: &DistanceConfig,
    qa_config: &QaConfig,
    fraction: f64,
) -> Result<DiagnosticsRow<S>> {
    if set.task != Task::Qa {
        return Err(Error::TaskMismatch {
            expected: "qa".into(),
            found: set.task.to_string(),
        });
    }
    let scores = score_qa_set::<S>(set, predictions, qa_config)?;
    let (top, bottom) = select_extremes(&scores.per_instance_f1, fraction)?;
    if top.is_empty() {
        return Err(Error::EmptySelection(format!(
            "fraction {fraction} of {} instances selects nothing",
            set.len()
        )));
    }
    let by_id: BTreeMap<&str, &EvalInstance> =
        set.instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mean_of = |ids: &BTreeSet<String>| -> Result<S> {
        let ds = ids
            .iter()
            .map(|id| instance_distance::<S>(set, by_id[id.as_str()], config).map(|r| r.distance))
            .collect::<Result<Vec<S>>>()?;
        Ok(mean(ds).expect("non-empty selection"))
    };
    let language = if set.is_within() {
        set.field1_lang.to_string()
    } else {
        format!("{}-{}", set.field1_lang, set.field2_lang)
    };
    Ok(DiagnosticsRow {
        language,
        fraction,
        top_mean: mean_of(&top)?,
        bottom_mean: mean_of(&bottom)?,
        max_len: config.max_len,
        n: set.len(),
    })
}

/// Share of distinct (case-folded) field-2 tokens that also occur in field 1.
pub fn overlap_rate<S: Scalar>(
    field1: &str,
    field2: &str,
    lang1: &Lang,
    lang2: &Lang,
    tokenizer: &TokenizerConfig,
) -> S {
    let fold = |text: &str, lang: &Lang| -> BTreeSet<String> {
        tokenize(text, lang, tokenizer)
            .into_iter()
            .map(|t| t.to_lowercase())
            .collect()
    };
    let second = fold(field2, lang2);
    if second.is_empty() {
        return S::zero();
    }
    let first = fold(field1, lang1);
    S::ratio(second.intersection(&first).count(), second.len())
}

/// Mean [`overlap_rate`] over a set's instances.
pub fn mean_overlap_rate<S: Scalar>(set: &EvalSet, tokenizer: &TokenizerConfig) -> Option<S> {
    mean(set.instances.iter().map(|i| {
        overlap_rate::<S>(
            &i.field1,
            &i.field2,
            &set.field1_lang,
            &set.field2_lang,
            tokenizer,
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn worked_example() {
        let ctx = toks("the cat sat on the mat");
        let q = toks("where did the cat sit");
        let r = shared_word_distance::<Exact>(
            "x",
            &ctx,
            &q,
            TokenSpan { start: 2, end: 2 },
            &DistanceConfig::default(),
        )
        .unwrap();
        assert_eq!(r.distance, Exact::new(5, 3));
        assert_eq!(r.shared_occurrence_count, 3);
    }

    #[test]
    fn no_overlap_is_max_len() {
        let r = shared_word_distance::<f64>(
            "x",
            &toks("a b c"),
            &toks("x y"),
            TokenSpan { start: 0, end: 1 },
            &DistanceConfig::default(),
        )
        .unwrap();
        assert_eq!(r.distance, 384.0);
        assert_eq!(r.shared_occurrence_count, 0);
    }

    #[test]
    fn single_token_context() {
        let r = shared_word_distance::<f64>(
            "x",
            &toks("cat"),
            &toks("cat"),
            TokenSpan { start: 0, end: 0 },
            &DistanceConfig::default(),
        )
        .unwrap();
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn duplicate_question_tokens_do_not_double_count() {
        let ctx = toks("a b a c");
        let once = shared_word_distance::<Exact>(
            "x",
            &ctx,
            &toks("a"),
            TokenSpan { start: 3, end: 3 },
            &DistanceConfig::default(),
        )
        .unwrap();
        let twice = shared_word_distance::<Exact>(
            "x",
            &ctx,
            &toks("a a a"),
            TokenSpan { start: 3, end: 3 },
            &DistanceConfig::default(),
        )
        .unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn bad_span_is_fatal() {
        let cfg = DistanceConfig::default();
        for span in [
            TokenSpan { start: 2, end: 1 },
            TokenSpan { start: 0, end: 3 },
        ] {
            let err = shared_word_distance::<f64>("q7", &toks("a b c"), &toks("a"), span, &cfg)
                .unwrap_err();
            assert!(matches!(err, Error::InvalidSpan { ref id, .. } if id == "q7"));
        }
    }

    #[test]
    fn char_span_maps_to_overlapping_tokens() {
        let cfg = TokenizerConfig::default();
        let en = Lang::new("en");
        let ctx = "the big cat sat";
        let a = Answer {
            text: "ig ca".into(),
            answer_start: 5,
        };
        assert_eq!(
            answer_token_span("x", ctx, &a, &en, &cfg).unwrap(),
            TokenSpan { start: 1, end: 2 }
        );
        let zh = Lang::new("zh");
        let a = Answer {
            text: "猫".into(),
            answer_start: 2,
        };
        assert_eq!(
            answer_token_span("x", "一只猫坐", &a, &zh, &cfg).unwrap(),
            TokenSpan { start: 2, end: 2 }
        );
        let bad = Answer {
            text: "dog".into(),
            answer_start: 0,
        };
        assert!(answer_token_span("x", ctx, &bad, &en, &cfg).is_err());
    }

    #[test]
    fn extremes_by_hand() {
        let scores: BTreeMap<String, Exact> = [("a", 1), ("b", 1), ("c", 0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), Exact::new(v, if k == "b" { 2 } else { 1 })))
            .collect();
        let (top, bottom) = select_extremes(&scores, 1.0 / 3.0).unwrap();
        assert_eq!(top.into_iter().collect::<Vec<_>>(), ["a"]);
        assert_eq!(bottom.into_iter().collect::<Vec<_>>(), ["c"]);
    }

    #[test]
    fn extremes_sizes_and_ties() {
        let scores: BTreeMap<String, f64> = (0..10).map(|i| (format!("id{i}"), 0.5)).collect();
        let (top, bottom) = select_extremes(&scores, 0.2).unwrap();
        assert_eq!(top.len(), 2);
        assert_eq!(bottom.len(), 2);
        assert!(top.is_disjoint(&bottom));
        assert_eq!(top.into_iter().collect::<Vec<_>>(), ["id0", "id1"]);
        assert_eq!(bottom.into_iter().collect::<Vec<_>>(), ["id8", "id9"]);
        let (top, bottom) = select_extremes(&scores, 0.5).unwrap();
        assert_eq!(top.len() + bottom.len(), 10);
    }

    #[test]
    fn extremes_preconditions() {
        let empty: BTreeMap<String, f64> = BTreeMap::new();
        assert!(matches!(
            select_extremes(&empty, 0.2),
            Err(Error::EmptySelection(_))
        ));
        let one: BTreeMap<String, f64> = [("a".to_string(), 1.0)].into();
        assert!(select_extremes(&one, 0.0).is_err());
        assert!(select_extremes(&one, 0.6).is_err());
    }

    #[test]
    fn overlap_examples() {
        let en = Lang::new("en");
        let cfg = TokenizerConfig::default();
        assert_eq!(overlap_rate::<f64>("A cat", "a cat", &en, &en, &cfg), 1.0);
        assert_eq!(overlap_rate::<f64>("x y", "a b", &en, &en, &cfg), 0.0);
        assert_eq!(
            overlap_rate::<Exact>("the dog ran", "the cat", &en, &en, &cfg),
            Exact::new(1, 2)
        );
        assert_eq!(overlap_rate::<f64>("the dog", "", &en, &en, &cfg), 0.0);
    }
}
