use std::collections::BTreeMap;

use proptest::prelude::*;
use xlingual_core::corpus::{build_parallel_corpus, Answer, NliInstance, QaInstance};
use xlingual_core::setgen::{
    build_across_set, build_across_training_set, build_within_set, shuffle_control, EvalSet, Gold,
    ShuffleConfig, ShuffleScope,
};
use xlingual_core::{Error, Instance, Label, Lang, ParallelCorpus, Task};

const LANGS: [&str; 3] = ["en", "de", "zh"];

fn corpus(n: usize, labels: impl Fn(usize) -> Label) -> ParallelCorpus {
    let mut insts = Vec::new();
    for i in 0..n {
        for l in LANGS {
            insts.push(Instance::from(NliInstance {
                id: format!("{i:04}"),
                lang: Lang::new(l),
                premise: format!("premise {l} {i} alpha beta"),
                hypothesis: format!("hypothesis {l} {i} gamma delta"),
                label: labels(i),
            }));
        }
    }
    let langs: Vec<Lang> = LANGS.iter().map(Lang::new).collect();
    build_parallel_corpus(insts, &langs).unwrap().0
}

fn nth_label(i: usize) -> Label {
    [Label::Entailment, Label::Neutral, Label::Contradiction][i % 3]
}

#[test]
fn across_diagonal_equals_within() {
    let c = corpus(20, nth_label);
    for l in c.languages() {
        let w = build_within_set(&c, l).unwrap();
        let a = build_across_set(&c, l, l).unwrap();
        assert_eq!(w, a);
    }
}

#[test]
fn across_fields_come_from_within_sets() {
    let c = corpus(20, nth_label);
    let within: BTreeMap<&Lang, EvalSet> = c
        .languages()
        .iter()
        .map(|l| (l, build_within_set(&c, l).unwrap()))
        .collect();
    for l1 in c.languages() {
        for l2 in c.languages() {
            let a = build_across_set(&c, l1, l2).unwrap();
            assert_eq!(a.len(), c.ids().len());
            for (k, inst) in a.instances.iter().enumerate() {
                assert_eq!(inst.field1, within[l1].instances[k].field1);
                assert_eq!(inst.field2, within[l2].instances[k].field2);
                assert_eq!(inst.gold, within[l1].instances[k].gold);
            }
        }
    }
}

#[test]
fn generation_ignores_labels() {
    let a = corpus(30, nth_label);
    let b = corpus(30, |i| nth_label(i + 1));
    let (en, de) = (Lang::new("en"), Lang::new("de"));
    let sa = build_across_set(&a, &en, &de).unwrap();
    let sb = build_across_set(&b, &en, &de).unwrap();
    for (x, y) in sa.instances.iter().zip(&sb.instances) {
        assert_eq!((&x.id, &x.field1, &x.field2), (&y.id, &y.field1, &y.field2));
        assert_ne!(x.gold, y.gold);
    }
}

#[test]
fn training_set_swap_swaps_fields() {
    let c = corpus(4, nth_label);
    let (en, de) = (Lang::new("en"), Lang::new("de"));
    let ende = build_across_training_set(&c, &en, &de).unwrap();
    let deen = build_across_training_set(&c, &de, &en).unwrap();
    assert_eq!(ende.len(), 4);
    for (x, y) in ende.instances.iter().zip(&deen.instances) {
        assert!(x.field1.contains(" en ") && x.field2.contains(" de "));
        assert!(y.field1.contains(" de ") && y.field2.contains(" en "));
    }
    let mut buf = Vec::new();
    ende.write_jsonl(&mut buf).unwrap();
    assert_eq!(EvalSet::read_jsonl(&buf[..], "mem").unwrap(), ende);
}

fn sorted_tokens(s: &str) -> Vec<&str> {
    let mut t: Vec<&str> = s.split_whitespace().collect();
    t.sort();
    t
}

fn word() -> impl Strategy<Value = String> {
    "[a-zäöü]{1,6}"
}

proptest! {
    #[test]
    fn shuffle_preserves_multiset_and_is_deterministic(
        fields in proptest::collection::vec(
            (proptest::collection::vec(word(), 1..10), proptest::collection::vec(word(), 1..10)), 1..12),
        seed in any::<u64>(),
    ) {
        let mut insts = Vec::new();
        for (i, (p, h)) in fields.iter().enumerate() {
            insts.push(Instance::from(NliInstance {
                id: format!("{i}"),
                lang: Lang::new("en"),
                premise: p.join(" "),
                hypothesis: h.join(" "),
                label: Label::Neutral,
            }));
        }
        let (c, _) = build_parallel_corpus(insts, &[Lang::new("en")]).unwrap();
        let set = build_within_set(&c, &Lang::new("en")).unwrap();
        let cfg = ShuffleConfig::for_task(Task::Nli, seed);
        let once = shuffle_control(&set, &cfg).unwrap();
        let twice = shuffle_control(&set, &cfg).unwrap();
        prop_assert_eq!(&once, &twice);
        for (orig, shuf) in set.instances.iter().zip(&once.instances) {
            prop_assert_eq!(sorted_tokens(&orig.field1), sorted_tokens(&shuf.field1));
            prop_assert_eq!(sorted_tokens(&orig.field2), sorted_tokens(&shuf.field2));
            prop_assert_eq!(&orig.gold, &shuf.gold);
            if orig.field1.split_whitespace().count() <= 1 {
                prop_assert_eq!(&orig.field1, &shuf.field1);
            }
        }
    }
}

#[test]
fn shuffle_is_independent_of_instance_order() {
    let c = corpus(25, nth_label);
    let set = build_within_set(&c, &Lang::new("en")).unwrap();
    let cfg = ShuffleConfig::for_task(Task::Nli, 17);
    let mut reversed = set.clone();
    reversed.instances.reverse();
    let a = shuffle_control(&set, &cfg).unwrap();
    let mut b = shuffle_control(&reversed, &cfg).unwrap();
    b.instances.reverse();
    assert_eq!(a.instances, b.instances);
}

#[test]
fn changing_seed_changes_fields() {
    let mut insts = Vec::new();
    for i in 0..120 {
        insts.push(Instance::from(NliInstance {
            id: format!("{i}"),
            lang: Lang::new("en"),
            premise: format!("w{i} one two three four five"),
            hypothesis: "six seven eight nine ten".into(),
            label: Label::Neutral,
        }));
    }
    let (c, _) = build_parallel_corpus(insts, &[Lang::new("en")]).unwrap();
    let set = build_within_set(&c, &Lang::new("en")).unwrap();
    let a = shuffle_control(&set, &ShuffleConfig::for_task(Task::Nli, 1)).unwrap();
    let b = shuffle_control(&set, &ShuffleConfig::for_task(Task::Nli, 2)).unwrap();
    let differing = a
        .instances
        .iter()
        .zip(&b.instances)
        .filter(|(x, y)| x.field1 != y.field1)
        .count();
    // Each 6-token field collides with probability 1/720.
    assert!(differing >= 110, "only {differing} of 120 fields changed");
}

fn qa_corpus() -> ParallelCorpus {
    let mut insts = Vec::new();
    for (lang, ctx, ans, q) in [
        (
            "en",
            "The cat sat on the mat.",
            "cat",
            "Who sat on the mat today?",
        ),
        (
            "de",
            "Die Katze saß auf der Matte.",
            "Katze",
            "Wer saß heute auf der Matte?",
        ),
    ] {
        insts.push(Instance::from(QaInstance {
            id: "q1".into(),
            lang: Lang::new(lang),
            context: ctx.into(),
            question: q.into(),
            answers: vec![Answer {
                text: ans.into(),
                answer_start: ctx.find(ans).unwrap(),
            }],
        }));
    }
    build_parallel_corpus(insts, &[Lang::new("en"), Lang::new("de")])
        .unwrap()
        .0
}

#[test]
fn qa_across_takes_context_and_answers_from_field1() {
    let c = qa_corpus();
    let set = build_across_set(&c, &Lang::new("de"), &Lang::new("en")).unwrap();
    let inst = &set.instances[0];
    assert!(inst.field1.starts_with("Die Katze"));
    assert!(inst.field2.starts_with("Who"));
    let Gold::Answers(a) = &inst.gold else {
        panic!()
    };
    assert_eq!(a[0].text, "Katze");
    assert!(a[0].is_valid_in(&inst.field1));
}

#[test]
fn qa_shuffle_keeps_context_and_offsets() {
    let c = qa_corpus();
    let set = build_across_set(&c, &Lang::new("en"), &Lang::new("de")).unwrap();
    let out = shuffle_control(&set, &ShuffleConfig::for_task(Task::Qa, 5)).unwrap();
    let (orig, shuf) = (&set.instances[0], &out.instances[0]);
    assert_eq!(orig.field1.as_bytes(), shuf.field1.as_bytes());
    assert_eq!(sorted_tokens(&orig.field2), sorted_tokens(&shuf.field2));
    let Gold::Answers(a) = &shuf.gold else {
        panic!()
    };
    assert!(a.iter().all(|a| a.is_valid_in(&shuf.field1)));

    let mut both = ShuffleConfig::for_task(Task::Qa, 5);
    both.scope = ShuffleScope::BothFields;
    assert!(matches!(
        shuffle_control(&set, &both),
        Err(Error::ScopeViolation { .. })
    ));
}
