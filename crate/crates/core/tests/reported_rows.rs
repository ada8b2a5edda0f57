//! Published mBERT XNLI within-language accuracies fed through the report
//! layer: the row mean and the Markdown rendering must match the published
//! one-decimal averages.

use xlingual_core::report::{
    emit_report, within_row, PairMatrix, ReportFormat, ReportOptions, ReportRecord,
};
use xlingual_core::{Exact, Lang};

const LANGS: [&str; 15] = [
    "en", "de", "fr", "ru", "es", "zh", "vi", "ar", "tr", "bg", "el", "ur", "hi", "th", "sw",
];
const WITHIN_TENTHS: [i64; 15] = [
    815, 706, 735, 686, 682, 686, 699, 642, 620, 687, 675, 587, 605, 523, 503,
];

#[test]
fn mbert_xnli_within_row_averages_to_65_7() {
    let mut m: PairMatrix<Exact> = PairMatrix::new("accuracy", Vec::new());
    for (l, v) in LANGS.iter().zip(WITHIN_TENTHS) {
        m.set(l, l, Exact::new(v, 1000)).unwrap();
    }
    let row = within_row(&m).unwrap();
    assert_eq!(row.mean, Exact::new(9851, 15 * 1000));
    let pct_tenths = (row.mean * Exact::from_integer(1000)).round();
    assert_eq!(pct_tenths, Exact::from_integer(657));
}

#[test]
fn mbert_xnli_within_row_renders_as_published() {
    let records: Vec<ReportRecord> = LANGS
        .iter()
        .zip(WITHIN_TENTHS)
        .map(|(l, v)| ReportRecord {
            metric: "accuracy".into(),
            field1_lang: Lang::new(l),
            field2_lang: Lang::new(l),
            value: v as f64 / 1000.0,
            support: 5010,
        })
        .collect();
    let opts = ReportOptions {
        languages: LANGS.iter().map(Lang::new).collect(),
        ..Default::default()
    };
    let md =
        String::from_utf8(emit_report(&records, ReportFormat::Markdown, &opts).unwrap()).unwrap();
    let expected = "| within | 81.5 | 70.6 | 73.5 | 68.6 | 68.2 | 68.6 | 69.9 | 64.2 | 62.0 | 68.7 | 67.5 | 58.7 | 60.5 | 52.3 | 50.3 | 65.7 |";
    assert!(md.contains(expected), "{md}");
}
