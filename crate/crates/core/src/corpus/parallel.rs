use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{jsonl::write_line, Instance, Label, Task};
use crate::error::{Error, Result};
use crate::lang::Lang;

/// Id-aligned instances covering every declared language.
#[derive(Debug, Clone, PartialEq)]
pub struct ParallelCorpus {
    task: Task,
    languages: Vec<Lang>,
    ids: Vec<String>,
    table: BTreeMap<(String, Lang), Instance>,
}

/// What the intersection step removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectReport {
    pub total_ids: usize,
    pub retained_ids: usize,
    pub dropped_ids: Vec<String>,
    pub dropped_fraction: f64,
    /// Instances whose language was not declared.
    pub ignored_instances: usize,
}

/// Builds a parallel corpus over `declared` languages, keeping only ids
/// present in all of them.
///
/// Duplicate `(id, lang)` pairs and NLI/PI ids whose labels differ between
/// languages are fatal.
pub fn build_parallel_corpus(
    instances: impl IntoIterator<Item = Instance>,
    declared: &[Lang],
) -> Result<(ParallelCorpus, IntersectReport)> {
    let mut languages: Vec<Lang> = Vec::new();
    for l in declared {
        if !languages.contains(l) {
            languages.push(l.clone());
        }
    }
    if languages.is_empty() {
        return Err(Error::InvalidValue("no languages declared".into()));
    }
    let declared_set: BTreeSet<&Lang> = languages.iter().collect();

    let mut task: Option<Task> = None;
    let mut table: BTreeMap<(String, Lang), Instance> = BTreeMap::new();
    let mut ignored = 0usize;
    for inst in instances {
        match task {
            None => task = Some(inst.task()),
            Some(t) if t != inst.task() => {
                return Err(Error::MixedTasks(t.to_string(), inst.task().to_string()))
            }
            _ => {}
        }
        if !declared_set.contains(inst.lang()) {
            ignored += 1;
            continue;
        }
        let key = (inst.id().to_string(), inst.lang().clone());
        if table.contains_key(&key) {
            return Err(Error::DuplicateInstance {
                id: key.0,
                lang: key.1.to_string(),
            });
        }
        table.insert(key, inst);
    }
    let task =
        task.ok_or_else(|| Error::InvalidValue("no instances to build a corpus from".into()))?;

    let mut labels: BTreeMap<&str, BTreeSet<Label>> = BTreeMap::new();
    let mut coverage: BTreeMap<&str, usize> = BTreeMap::new();
    for ((id, _), inst) in &table {
        *coverage.entry(id).or_default() += 1;
        if let Some(l) = inst.label() {
            labels.entry(id).or_default().insert(l);
        }
    }
    let conflicts: Vec<String> = labels
        .iter()
        .filter(|(_, set)| set.len() > 1)
        .map(|(id, _)| id.to_string())
        .collect();
    if !conflicts.is_empty() {
        return Err(Error::LabelConflict(conflicts));
    }

    let total_ids = coverage.len();
    let (ids, dropped_ids): (Vec<String>, Vec<String>) = {
        let (keep, drop): (Vec<_>, Vec<_>) =
            coverage.iter().partition(|(_, &n)| n == languages.len());
        (
            keep.into_iter().map(|(id, _)| id.to_string()).collect(),
            drop.into_iter().map(|(id, _)| id.to_string()).collect(),
        )
    };
    let dropped: BTreeSet<&str> = dropped_ids.iter().map(String::as_str).collect();
    table.retain(|(id, _), _| !dropped.contains(id.as_str()));

    let report = IntersectReport {
        total_ids,
        retained_ids: ids.len(),
        dropped_fraction: if total_ids == 0 {
            0.0
        } else {
            dropped_ids.len() as f64 / total_ids as f64
        },
        dropped_ids,
        ignored_instances: ignored,
    };
    Ok((
        ParallelCorpus {
            task,
            languages,
            ids,
            table,
        },
        report,
    ))
}

impl ParallelCorpus {
    pub fn task(&self) -> Task {
        self.task
    }

    /// Declared languages in declaration order.
    pub fn languages(&self) -> &[Lang] {
        &self.languages
    }

    pub fn has_language(&self, lang: &Lang) -> bool {
        self.languages.contains(lang)
    }

    /// Retained ids in sorted order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str, lang: &Lang) -> Option<&Instance> {
        self.table.get(&(id.to_string(), lang.clone()))
    }

    /// Number of `(id, lang)` cells.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.table.values()
    }

    /// SHA-256 over the language list and the canonical serialization of
    /// every cell in `(id, lang)` order.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        let langs: Vec<&str> = self.languages.iter().map(Lang::as_str).collect();
        hasher.update(serde_json::to_vec(&langs).expect("serializable"));
        hasher.update(b"\n");
        let mut buf = Vec::new();
        for inst in self.table.values() {
            buf.clear();
            write_line(&mut buf, inst).expect("in-memory write");
            hasher.update(&buf);
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::NliInstance;

    fn nli(id: &str, lang: &str, label: Label) -> Instance {
        Instance::Nli(NliInstance {
            id: id.into(),
            lang: Lang::new(lang),
            premise: format!("P {id} {lang}"),
            hypothesis: format!("H {id} {lang}"),
            label,
        })
    }

    fn langs(ls: &[&str]) -> Vec<Lang> {
        ls.iter().map(Lang::new).collect()
    }

    #[test]
    fn intersect_drops_partial_ids() {
        let insts = vec![
            nli("a", "en", Label::Neutral),
            nli("b", "en", Label::Neutral),
            nli("a", "de", Label::Neutral),
        ];
        let (c, r) = build_parallel_corpus(insts, &langs(&["en", "de"])).unwrap();
        assert_eq!(c.ids(), ["a"]);
        assert_eq!(r.dropped_ids, ["b"]);
        assert_eq!(r.dropped_fraction, 0.5);
        assert_eq!(c.len(), c.ids().len() * c.languages().len());
    }

    #[test]
    fn fully_parallel_no_drops() {
        let insts = vec![
            nli("a", "en", Label::Neutral),
            nli("b", "en", Label::Entailment),
            nli("a", "de", Label::Neutral),
            nli("b", "de", Label::Entailment),
        ];
        let (c, r) = build_parallel_corpus(insts, &langs(&["en", "de"])).unwrap();
        assert_eq!(r.dropped_fraction, 0.0);
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn duplicate_is_fatal() {
        let insts = vec![
            nli("a", "en", Label::Neutral),
            nli("a", "en", Label::Neutral),
        ];
        let err = build_parallel_corpus(insts, &langs(&["en"])).unwrap_err();
        assert!(matches!(err, Error::DuplicateInstance { .. }));
    }

    #[test]
    fn label_conflict_lists_ids() {
        let insts = vec![
            nli("a", "en", Label::Neutral),
            nli("a", "de", Label::Entailment),
            nli("b", "en", Label::Neutral),
            nli("b", "de", Label::Neutral),
        ];
        match build_parallel_corpus(insts, &langs(&["en", "de"])).unwrap_err() {
            Error::LabelConflict(ids) => assert_eq!(ids, ["a"]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn undeclared_languages_ignored() {
        let insts = vec![
            nli("a", "en", Label::Neutral),
            nli("a", "fr", Label::Neutral),
        ];
        let (c, r) = build_parallel_corpus(insts, &langs(&["en"])).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(r.ignored_instances, 1);
    }

    #[test]
    fn digest_is_order_independent() {
        let a = vec![
            nli("a", "en", Label::Neutral),
            nli("a", "de", Label::Neutral),
        ];
        let mut b = a.clone();
        b.reverse();
        let l = langs(&["en", "de"]);
        let (ca, _) = build_parallel_corpus(a, &l).unwrap();
        let (cb, _) = build_parallel_corpus(b, &l).unwrap();
        assert_eq!(ca.digest(), cb.digest());
    }
}
