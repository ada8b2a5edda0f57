//! Language-pair matrices and the tables built from them.
//!
//! A [`PairMatrix`] holds one metric for every `(field1_lang, field2_lang)`
//! combination that was evaluated. Its diagonal is the within-language
//! score. The across-language score of a language averages every
//! off-diagonal cell in its row and column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::Lang;
use crate::scalar::{mean, Scalar};
use crate::scoring::ScoreRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix<S = f64> {
    pub metric: String,
    languages: Vec<Lang>,
    grid: BTreeMap<(Lang, Lang), ScoreRecord<S>>,
}

impl<S: Scalar> PairMatrix<S> {
    pub fn new(metric: impl Into<String>, languages: Vec<Lang>) -> Self {
        PairMatrix {
            metric: metric.into(),
            languages,
            grid: BTreeMap::new(),
        }
    }

    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    /// Sets a cell; languages not yet listed are appended.
    pub fn insert(&mut self, field1: Lang, field2: Lang, record: ScoreRecord<S>) -> Result<()> {
        if record.value < S::zero() || record.value > S::one() {
            return Err(Error::InvalidValue(format!(
                "cell ({field1}, {field2}) value {:?} outside [0, 1]",
                record.value
            )));
        }
        for l in [&field1, &field2] {
            if !self.languages.contains(l) {
                self.languages.push(l.clone());
            }
        }
        self.grid.insert((field1, field2), record);
        Ok(())
    }

    /// Convenience for tests and tools: a cell with unit support.
    pub fn set(&mut self, field1: &str, field2: &str, value: S) -> Result<()> {
        let record = ScoreRecord::new(self.metric.clone(), value, 1)?;
        self.insert(Lang::new(field1), Lang::new(field2), record)
    }

    pub fn get(&self, field1: &Lang, field2: &Lang) -> Option<&ScoreRecord<S>> {
        self.grid.get(&(field1.clone(), field2.clone()))
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(Lang, Lang), &ScoreRecord<S>)> {
        self.grid.iter()
    }

    fn value(&self, field1: &Lang, field2: &Lang) -> Result<S> {
        self.get(field1, field2)
            .map(|r| r.value.clone())
            .ok_or_else(|| Error::MissingCell(field1.to_string(), field2.to_string()))
    }
}

/// Per-language values in matrix language order, with their unweighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSummary<S = f64> {
    pub values: Vec<(Lang, S)>,
    pub mean: S,
}

pub fn within_row<S: Scalar>(matrix: &PairMatrix<S>) -> Result<RowSummary<S>> {
    let values = matrix
        .languages
        .iter()
        .map(|l| Ok((l.clone(), matrix.value(l, l)?)))
        .collect::<Result<Vec<_>>>()?;
    summarize(values)
}

/// The `2(k - 1)` cells `(lang, x)` and `(x, lang)` with `x != lang`.
pub fn across_cells<S: Scalar>(matrix: &PairMatrix<S>, lang: &Lang) -> Vec<(Lang, Lang)> {
    matrix
        .languages
        .iter()
        .filter(|x| *x != lang)
        .flat_map(|x| [(lang.clone(), x.clone()), (x.clone(), lang.clone())])
        .collect()
}

pub fn across_row<S: Scalar>(matrix: &PairMatrix<S>) -> Result<RowSummary<S>> {
    if matrix.languages.len() < 2 {
        return Err(Error::EmptySelection(
            "across row needs at least two languages".into(),
        ));
    }
    let values = matrix
        .languages
        .iter()
        .map(|l| {
            let cells = across_cells(matrix, l)
                .iter()
                .map(|(a, b)| matrix.value(a, b))
                .collect::<Result<Vec<S>>>()?;
            Ok((l.clone(), mean(cells).expect("k >= 2")))
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(values)
}

fn summarize<S: Scalar>(values: Vec<(Lang, S)>) -> Result<RowSummary<S>> {
    let mean = mean(values.iter().map(|(_, v)| v.clone()))
        .ok_or_else(|| Error::EmptySelection("matrix has no languages".into()))?;
    Ok(RowSummary { values, mean })
}

/// A cell selector where `None` stands for `*` (all languages).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupPattern {
    pub field1: Option<Lang>,
    pub field2: Option<Lang>,
}

impl FromStr for GroupPattern {
    type Err = Error;

    /// Parses `en:*`, `*:de`, `*:*` or `en:de`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidValue(format!("expected l1:l2 pattern, got `{s}`")))?;
        let side = |x: &str| (x.trim() != "*").then(|| Lang::new(x));
        Ok(GroupPattern {
            field1: side(a),
            field2: side(b),
        })
    }
}

impl std::fmt::Display for GroupPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let side = |l: &Option<Lang>| l.as_ref().map_or("*".to_string(), Lang::to_string);
        write!(f, "{}-{}", side(&self.field1), side(&self.field2))
    }
}

/// Mean over the cells matched by `pattern`. Starred selections skip the
/// diagonal unless `include_diagonal` is set; a fully specified pattern
/// always selects its one cell.
pub fn group_average<S: Scalar>(
    matrix: &PairMatrix<S>,
    pattern: &GroupPattern,
    include_diagonal: bool,
) -> Result<S> {
    let starred = pattern.field1.is_none() || pattern.field2.is_none();
    let pick = |side: &Option<Lang>| -> Vec<Lang> {
        match side {
            Some(l) => vec![l.clone()],
            None => matrix.languages.clone(),
        }
    };
    let mut values = Vec::new();
    for a in pick(&pattern.field1) {
        for b in pick(&pattern.field2) {
            if starred && !include_diagonal && a == b {
                continue;
            }
            values.push(matrix.value(&a, &b)?);
        }
    }
    mean(values).ok_or_else(|| Error::EmptySelection(format!("pattern {pattern} selects no cells")))
}

/// One flat report line; the CSV output has exactly these columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub metric: String,
    pub field1_lang: Lang,
    pub field2_lang: Lang,
    pub value: f64,
    pub support: usize,
}

/// Metric-name suffix marking baseline scores shown next to the main ones.
pub const BASELINE_SUFFIX: &str = "@baseline";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Column order; languages first seen in the records follow.
    pub languages: Vec<Lang>,
    pub star_averages: bool,
    pub include_diagonal: bool,
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    records: Vec<ReportRecord>,
}

fn language_order(records: &[ReportRecord], preferred: &[Lang]) -> Vec<Lang> {
    let mut order: Vec<Lang> = Vec::new();
    let seen = records
        .iter()
        .flat_map(|r| [&r.field1_lang, &r.field2_lang]);
    for l in preferred.iter().chain(seen) {
        if !order.contains(l) {
            order.push(l.clone());
        }
    }
    order
}

fn sorted_records(records: &[ReportRecord], order: &[Lang]) -> Vec<ReportRecord> {
    let pos = |l: &Lang| order.iter().position(|x| x == l).unwrap_or(usize::MAX);
    let mut out = records.to_vec();
    out.sort_by(|a, b| {
        a.metric
            .cmp(&b.metric)
            .then(pos(&a.field1_lang).cmp(&pos(&b.field1_lang)))
            .then(pos(&a.field2_lang).cmp(&pos(&b.field2_lang)))
    });
    out
}

/// Groups records into one matrix per metric, in the given language order.
pub fn matrices_from_records(
    records: &[ReportRecord],
    languages: &[Lang],
) -> Result<BTreeMap<String, PairMatrix<f64>>> {
    let order = language_order(records, languages);
    let mut out: BTreeMap<String, PairMatrix<f64>> = BTreeMap::new();
    for r in records {
        let m = out
            .entry(r.metric.clone())
            .or_insert_with(|| PairMatrix::new(r.metric.clone(), Vec::new()));
        m.insert(
            r.field1_lang.clone(),
            r.field2_lang.clone(),
            ScoreRecord::new(r.metric.clone(), r.value, r.support)?,
        )?;
    }
    for m in out.values_mut() {
        let present: BTreeSet<Lang> = m.languages.iter().cloned().collect();
        m.languages = order
            .iter()
            .filter(|l| present.contains(*l))
            .cloned()
            .collect();
    }
    Ok(out)
}

/// Serializes `records` deterministically.
///
/// JSON and CSV carry raw `[0, 1]` values at full precision; Markdown shows
/// percentages with one decimal.
pub fn emit_report(
    records: &[ReportRecord],
    format: ReportFormat,
    options: &ReportOptions,
) -> Result<Vec<u8>> {
    let order = language_order(records, &options.languages);
    let records = sorted_records(records, &order);
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&JsonReport { records }).expect("serializable");
            out.push(b'\n');
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["metric", "field1_lang", "field2_lang", "value", "support"])
                .and_then(|_| {
                    records.iter().try_for_each(|r| {
                        w.write_record([
                            r.metric.as_str(),
                            r.field1_lang.as_str(),
                            r.field2_lang.as_str(),
                            &r.value.to_string(),
                            &r.support.to_string(),
                        ])
                    })
                })
                .map_err(|e| Error::InvalidValue(format!("csv: {e}")))?;
            w.into_inner()
                .map_err(|e| Error::InvalidValue(format!("csv: {e}")))
        }
        ReportFormat::Markdown => Ok(markdown(&records, &order, options)?.into_bytes()),
    }
}

/// Parses the JSON produced by [`emit_report`].
pub fn parse_json_report(bytes: &[u8]) -> Result<Vec<ReportRecord>> {
    serde_json::from_slice::<JsonReport>(bytes)
        .map(|r| r.records)
        .map_err(|source| Error::Json {
            source_name: "report".into(),
            line: 0,
            source,
        })
}

fn pct(v: f64) -> String {
    format!("{:.1}", v * 100.0)
}

fn markdown(records: &[ReportRecord], order: &[Lang], options: &ReportOptions) -> Result<String> {
    let matrices = matrices_from_records(records, order)?;
    let mut out = String::new();
    for (metric, m) in matrices
        .iter()
        .filter(|(k, _)| !k.ends_with(BASELINE_SUFFIX))
    {
        let baseline = matrices.get(&format!("{metric}{BASELINE_SUFFIX}"));
        let cell = |a: &Lang, b: &Lang| -> String {
            match (m.get(a, b), baseline.and_then(|bm| bm.get(a, b))) {
                (Some(r), Some(base)) => format!("{} ({})", pct(r.value), pct(base.value)),
                (Some(r), None) => pct(r.value),
                (None, _) => "-".into(),
            }
        };
        let langs = m.languages();
        let _ = writeln!(out, "### {metric}\n");

        let within = within_row(m).ok();
        let across = across_row(m).ok();
        if within.is_some() || across.is_some() {
            let _ = writeln!(out, "| | {} | avg |", join(langs.iter().map(Lang::as_str)));
            let _ = writeln!(out, "|---|{}---|", "---|".repeat(langs.len()));
            for (name, row) in [("within", within), ("across", across)] {
                if let Some(row) = row {
                    let vals = row.values.iter().map(|(_, v)| pct(*v));
                    let _ = writeln!(out, "| {name} | {} | {} |", join(vals), pct(row.mean));
                }
            }
            out.push('\n');
        }

        if options.star_averages {
            let mut patterns: Vec<GroupPattern> = Vec::new();
            for l in langs {
                patterns.push(GroupPattern {
                    field1: Some(l.clone()),
                    field2: None,
                });
                patterns.push(GroupPattern {
                    field1: None,
                    field2: Some(l.clone()),
                });
            }
            patterns.push(GroupPattern {
                field1: None,
                field2: None,
            });
            let _ = writeln!(out, "| pattern | value |\n|---|---|");
            for p in &patterns {
                let v = group_average(m, p, options.include_diagonal).map_or("-".into(), pct);
                let b = baseline
                    .and_then(|bm| group_average(bm, p, options.include_diagonal).ok())
                    .map_or(String::new(), |b| format!(" ({})", pct(b)));
                let _ = writeln!(out, "| {p} | {v}{b} |");
            }
            out.push('\n');
        }

        let _ = writeln!(
            out,
            "| field1 \\ field2 | {} |",
            join(langs.iter().map(Lang::as_str))
        );
        let _ = writeln!(out, "|---|{}", "---|".repeat(langs.len()));
        for a in langs {
            let _ = writeln!(out, "| {a} | {} |", join(langs.iter().map(|b| cell(a, b))));
        }
        out.push('\n');
    }
    Ok(out)
}

fn join<T: AsRef<str>>(items: impl Iterator<Item = T>) -> String {
    items
        .map(|s| s.as_ref().to_string())
        .collect::<Vec<_>>()
        .join(" | ")
}

/// Heatmap plot data: `{"languages": [...], "grid": [[...]]}`, row-major by
/// field-1 language, `null` for missing cells.
pub fn heatmap_json<S: Scalar>(matrix: &PairMatrix<S>) -> serde_json::Value {
    let grid: Vec<Vec<Option<f64>>> = matrix
        .languages
        .iter()
        .map(|a| {
            matrix
                .languages
                .iter()
                .map(|b| matrix.get(a, b).map(|r| r.value.to_f64_lossy()))
                .collect()
        })
        .collect();
    serde_json::json!({
        "languages": matrix.languages.iter().map(Lang::as_str).collect::<Vec<_>>(),
        "grid": grid,
    })
}
