//! Parsers for the published XNLI / PAWS-X TSV layouts and SQuAD-shaped JSON.

use std::io::Read;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{char_to_byte, normalize_field, Answer, Label, NliInstance, PiInstance, QaInstance};
use crate::error::{Error, Result};
use crate::lang::Lang;

/// A row or entry that was excluded from a parse, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub source: String,
    pub line_or_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub instances: Vec<T>,
    pub rejects: Vec<Reject>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            instances: Vec::new(),
            rejects: Vec::new(),
        }
    }
}

/// Column names of a pair-classification TSV. `lang: None` means the file
/// has no language column and every row takes the caller's language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub lang: Option<String>,
    pub label: String,
    pub text1: String,
    pub text2: String,
    pub id: String,
}

impl ColumnMap {
    /// The XNLI dev/test layout.
    pub fn xnli() -> Self {
        ColumnMap {
            lang: Some("language".into()),
            label: "gold_label".into(),
            text1: "sentence1".into(),
            text2: "sentence2".into(),
            id: "pairID".into(),
        }
    }

    /// The PAWS-X layout: one file per language, no language column.
    pub fn pawsx() -> Self {
        ColumnMap {
            lang: None,
            label: "label".into(),
            text1: "sentence1".into(),
            text2: "sentence2".into(),
            id: "id".into(),
        }
    }
}

pub fn parse_xnli_tsv<R: Read>(
    reader: R,
    source_name: &str,
    columns: &ColumnMap,
    default_lang: Option<&Lang>,
) -> Result<Parsed<NliInstance>> {
    parse_pair_tsv(
        reader,
        source_name,
        columns,
        default_lang,
        Label::parse_nli,
        |row| NliInstance {
            id: row.id,
            lang: row.lang,
            premise: row.text1,
            hypothesis: row.text2,
            label: row.label,
        },
    )
}

pub fn parse_pawsx_tsv<R: Read>(
    reader: R,
    source_name: &str,
    columns: &ColumnMap,
    default_lang: Option<&Lang>,
) -> Result<Parsed<PiInstance>> {
    parse_pair_tsv(
        reader,
        source_name,
        columns,
        default_lang,
        Label::parse_pi,
        |row| PiInstance {
            id: row.id,
            lang: row.lang,
            sentence1: row.text1,
            sentence2: row.text2,
            label: row.label,
        },
    )
}

struct PairRow {
    id: String,
    lang: Lang,
    text1: String,
    text2: String,
    label: Label,
}

fn parse_pair_tsv<R: Read, T>(
    reader: R,
    source_name: &str,
    columns: &ColumnMap,
    default_lang: Option<&Lang>,
    parse_label: fn(&str) -> Option<Label>,
    make: impl Fn(PairRow) -> T,
) -> Result<Parsed<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| Error::Malformed {
        source_name: source_name.to_string(),
        reason: format!("unreadable header: {e}"),
    })?;
    let headers: Vec<String> = headers
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
        .collect();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                source_name: source_name.to_string(),
                column: name.to_string(),
            })
    };
    let id_col = find(&columns.id)?;
    let label_col = find(&columns.label)?;
    let t1_col = find(&columns.text1)?;
    let t2_col = find(&columns.text2)?;
    let lang_col = match (&columns.lang, default_lang) {
        (Some(name), _) => match find(name) {
            Ok(i) => Some(i),
            Err(e) if default_lang.is_none() => return Err(e),
            Err(_) => None,
        },
        (None, Some(_)) => None,
        (None, None) => {
            return Err(Error::MissingColumn {
                source_name: source_name.to_string(),
                column: "language (no column configured and no default language given)".into(),
            })
        }
    };

    let mut out = Parsed::default();
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.rejects.push(Reject {
                    source: source_name.to_string(),
                    line_or_id: format!("line {line}"),
                    reason: format!("unreadable row: {e}"),
                });
                continue;
            }
        }
        let line = record.position().map_or(0, |p| p.line());
        let reject = |reason: String| Reject {
            source: source_name.to_string(),
            line_or_id: format!("line {line}"),
            reason,
        };
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let get = |i: usize| record.get(i).map(normalize_field);
        let (Some(id), Some(label_raw), Some(text1), Some(text2)) =
            (get(id_col), get(label_col), get(t1_col), get(t2_col))
        else {
            out.rejects.push(reject(format!(
                "row has {} fields, header has {}",
                record.len(),
                headers.len()
            )));
            continue;
        };
        let lang = match lang_col {
            Some(i) => match get(i) {
                Some(l) if !l.is_empty() => Lang::new(l),
                _ => {
                    out.rejects.push(reject("missing language".into()));
                    continue;
                }
            },
            None => default_lang.cloned().expect("checked above"),
        };
        let row_reject = |reason: String| Reject {
            source: source_name.to_string(),
            line_or_id: if id.is_empty() {
                format!("line {line}")
            } else {
                format!("line {line} (id {id}, {lang})")
            },
            reason,
        };
        if id.is_empty() {
            out.rejects.push(row_reject("empty id".into()));
            continue;
        }
        if text1.is_empty() || text2.is_empty() {
            let which = if text1.is_empty() {
                &columns.text1
            } else {
                &columns.text2
            };
            out.rejects.push(row_reject(format!("empty {which}")));
            continue;
        }
        let Some(label) = parse_label(&label_raw) else {
            out.rejects
                .push(row_reject(format!("unknown label `{label_raw}`")));
            continue;
        };
        out.instances.push(make(PairRow {
            id,
            lang,
            text1,
            text2,
            label,
        }));
    }
    Ok(out)
}

#[derive(Deserialize)]
struct SquadFile {
    data: Vec<SquadArticle>,
}

#[derive(Deserialize)]
struct SquadArticle {
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQa>,
}

#[derive(Deserialize)]
struct SquadQa {
    id: String,
    question: String,
    #[serde(default)]
    answers: Vec<SquadAnswer>,
}

#[derive(Deserialize)]
struct SquadAnswer {
    text: String,
    answer_start: i64,
}

/// Parses SQuAD v1.1-shaped JSON (`data/paragraphs/qas/answers`). Each
/// answer's offset is checked against the raw context and re-derived after
/// NFC normalization and trimming; entries failing either check are
/// rejected with their id.
pub fn parse_squad_json<R: Read>(
    reader: R,
    source_name: &str,
    lang: &Lang,
) -> Result<Parsed<QaInstance>> {
    let file: SquadFile = serde_json::from_reader(reader).map_err(|source| Error::Json {
        source_name: source_name.to_string(),
        line: 0,
        source,
    })?;

    let mut out = Parsed::default();
    for paragraph in file.data.iter().flat_map(|a| &a.paragraphs) {
        let raw_ctx = &paragraph.context;
        let nfc_ctx: String = raw_ctx.nfc().collect();
        let lead = nfc_ctx.chars().take_while(|c| c.is_whitespace()).count();
        let context = nfc_ctx.trim().to_string();

        for qa in &paragraph.qas {
            let id = qa.id.trim().to_string();
            let reject = |reason: String| Reject {
                source: source_name.to_string(),
                line_or_id: id.clone(),
                reason,
            };
            if id.is_empty() {
                out.rejects.push(Reject {
                    source: source_name.to_string(),
                    line_or_id: "<missing id>".into(),
                    reason: "empty id".into(),
                });
                continue;
            }
            let question = normalize_field(&qa.question);
            if question.is_empty() || context.is_empty() {
                let which = if context.is_empty() {
                    "context"
                } else {
                    "question"
                };
                out.rejects.push(reject(format!("empty {which}")));
                continue;
            }
            if qa.answers.is_empty() {
                out.rejects.push(reject("no answers".into()));
                continue;
            }
            match qa
                .answers
                .iter()
                .map(|a| renormalize_answer(raw_ctx, &context, lead, a))
                .collect::<Result<Vec<_>, String>>()
            {
                Ok(answers) => out.instances.push(QaInstance {
                    id,
                    lang: lang.clone(),
                    context: context.clone(),
                    question,
                    answers,
                }),
                Err(reason) => out.rejects.push(reject(reason)),
            }
        }
    }
    Ok(out)
}

fn renormalize_answer(
    raw_ctx: &str,
    context: &str,
    lead: usize,
    a: &SquadAnswer,
) -> Result<Answer, String> {
    let raw = Answer {
        text: a.text.clone(),
        answer_start: usize::try_from(a.answer_start)
            .map_err(|_| format!("negative answer_start {}", a.answer_start))?,
    };
    if !raw.is_valid_in(raw_ctx) {
        return Err(format!(
            "answer {:?} does not match context at offset {}",
            raw.text, raw.answer_start
        ));
    }
    let prefix_end = char_to_byte(raw_ctx, raw.answer_start).expect("validated above");
    let prefix_chars = raw_ctx[..prefix_end].nfc().count();
    let answer_start = prefix_chars
        .checked_sub(lead)
        .ok_or_else(|| "answer starts inside leading whitespace".to_string())?;
    let answer = Answer {
        text: raw.text.nfc().collect(),
        answer_start,
    };
    if answer.is_valid_in(context) {
        Ok(answer)
    } else {
        Err(format!(
            "answer {:?} no longer aligns with the context after NFC normalization",
            raw.text
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const XNLI_HEADER: &str = "language\tgold_label\tsentence1\tsentence2\tpromptID\tpairID\n";

    #[test]
    fn xnli_single_row() {
        let tsv = format!("{XNLI_HEADER}en\tentailment\tA.\tB.\t7\tp1\n");
        let parsed = parse_xnli_tsv(tsv.as_bytes(), "x.tsv", &ColumnMap::xnli(), None).unwrap();
        assert!(parsed.rejects.is_empty());
        assert_eq!(
            parsed.instances,
            vec![NliInstance {
                id: "p1".into(),
                lang: Lang::new("en"),
                premise: "A.".into(),
                hypothesis: "B.".into(),
                label: Label::Entailment,
            }]
        );
    }

    #[test]
    fn xnli_header_only() {
        let parsed =
            parse_xnli_tsv(XNLI_HEADER.as_bytes(), "x.tsv", &ColumnMap::xnli(), None).unwrap();
        assert_eq!(parsed, Parsed::default());
    }

    #[test]
    fn xnli_uppercase_label_and_quotes() {
        let tsv = format!("{XNLI_HEADER}de\tENTAILMENT\t\"Er sagte\tB\t1\tp2\n");
        let parsed = parse_xnli_tsv(tsv.as_bytes(), "x.tsv", &ColumnMap::xnli(), None).unwrap();
        assert_eq!(parsed.instances[0].label, Label::Entailment);
        assert_eq!(parsed.instances[0].premise, "\"Er sagte");
    }

    #[test]
    fn missing_column_is_fatal_and_named() {
        let tsv = "language\tgold_label\tsentence1\tsentence2\n";
        let err = parse_xnli_tsv(tsv.as_bytes(), "x.tsv", &ColumnMap::xnli(), None).unwrap_err();
        match err {
            Error::MissingColumn { column, .. } => assert_eq!(column, "pairID"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_label_goes_to_rejects() {
        let tsv = format!("{XNLI_HEADER}en\tmaybe\tA\tB\t1\tp1\nen\tneutral\tA\tB\t1\tp2\n");
        let parsed = parse_xnli_tsv(tsv.as_bytes(), "x.tsv", &ColumnMap::xnli(), None).unwrap();
        assert_eq!(parsed.instances.len(), 1);
        assert_eq!(parsed.rejects.len(), 1);
        assert!(parsed.rejects[0].reason.contains("maybe"));
        assert!(parsed.rejects[0].line_or_id.contains("line 2"));
    }

    #[test]
    fn short_row_is_rejected() {
        let tsv = format!("{XNLI_HEADER}en\tneutral\tA\n");
        let parsed = parse_xnli_tsv(tsv.as_bytes(), "x.tsv", &ColumnMap::xnli(), None).unwrap();
        assert!(parsed.instances.is_empty());
        assert_eq!(parsed.rejects.len(), 1);
    }

    const PAWS_HEADER: &str = "id\tsentence1\tsentence2\tlabel\n";

    #[test]
    fn pawsx_labels() {
        let tsv = format!("{PAWS_HEADER}1\tA\tB\t1\n2\tA\tB\t0\n3\tA\tB\t2\n");
        let fr = Lang::new("fr");
        let parsed =
            parse_pawsx_tsv(tsv.as_bytes(), "p.tsv", &ColumnMap::pawsx(), Some(&fr)).unwrap();
        assert_eq!(parsed.instances.len(), 2);
        assert_eq!(parsed.instances[0].label, Label::Paraphrase);
        assert_eq!(parsed.instances[1].label, Label::NonParaphrase);
        assert_eq!(parsed.instances[1].lang, fr);
        assert_eq!(parsed.rejects.len(), 1);
        assert!(parsed.rejects[0].reason.contains("`2`"));
    }

    #[test]
    fn pawsx_blank_sentence() {
        let tsv = format!("{PAWS_HEADER}1\tA\tB\t1\n2\t  \tB\t0\n3\tC\tD\t0\n");
        let en = Lang::new("en");
        let parsed =
            parse_pawsx_tsv(tsv.as_bytes(), "p.tsv", &ColumnMap::pawsx(), Some(&en)).unwrap();
        assert_eq!(parsed.instances.len(), 2);
        assert_eq!(parsed.rejects.len(), 1);
        assert_eq!(parsed.rejects[0].reason, "empty sentence1");
    }

    #[test]
    fn pawsx_without_language_is_fatal() {
        let err = parse_pawsx_tsv(PAWS_HEADER.as_bytes(), "p.tsv", &ColumnMap::pawsx(), None)
            .unwrap_err();
        assert!(matches!(err, Error::MissingColumn { .. }));
    }

    fn squad(context: &str, answer: &str, start: i64) -> String {
        serde_json::json!({
            "version": "1.1",
            "data": [{"title": "t", "paragraphs": [{"context": context, "qas": [
                {"id": "q1", "question": "What?", "answers": [{"text": answer, "answer_start": start}]}
            ]}]}]
        })
        .to_string()
    }

    #[test]
    fn squad_single_answer_at_zero() {
        let en = Lang::new("en");
        let parsed =
            parse_squad_json(squad("cat sat", "cat", 0).as_bytes(), "s.json", &en).unwrap();
        assert_eq!(parsed.instances.len(), 1);
        assert!(parsed.rejects.is_empty());
        assert_eq!(parsed.instances[0].answers[0].answer_start, 0);
    }

    #[test]
    fn squad_offset_mismatch_rejected_with_id() {
        let en = Lang::new("en");
        let parsed =
            parse_squad_json(squad("the dog sat", "cat", 4).as_bytes(), "s.json", &en).unwrap();
        assert!(parsed.instances.is_empty());
        assert_eq!(parsed.rejects[0].line_or_id, "q1");
    }

    #[test]
    fn squad_offsets_follow_trim_and_nfc() {
        // Leading whitespace and a decomposed é before the answer.
        let ctx = "  cafe\u{301} noir";
        let en = Lang::new("fr");
        let parsed = parse_squad_json(squad(ctx, "noir", 8).as_bytes(), "s.json", &en).unwrap();
        assert!(parsed.rejects.is_empty(), "{:?}", parsed.rejects);
        let q = &parsed.instances[0];
        assert_eq!(q.context, "caf\u{e9} noir");
        assert_eq!(q.answers[0].answer_start, 5);
        assert!(q.answers[0].is_valid_in(&q.context));
    }

    #[test]
    fn squad_malformed_json_is_fatal() {
        let en = Lang::new("en");
        assert!(parse_squad_json(&b"{\"data\": ["[..], "s.json", &en).is_err());
    }
}
