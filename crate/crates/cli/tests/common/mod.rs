#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

pub fn xlingual(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xlingual"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// XNLI-layout TSV with `n` ids in each of `langs`. Texts carry sentinels
/// such as `P[de:7]` so tests can tell which translation a field came from.
pub fn xnli_tsv(langs: &[&str], n: usize) -> String {
    let labels = ["entailment", "neutral", "contradiction"];
    let mut s = String::from("language\tgold_label\tsentence1\tsentence2\tpairID\n");
    for i in 0..n {
        for l in langs {
            let _ = writeln!(
                s,
                "{l}\t{}\tP[{l}:{i}] the premise has several words {i}\tH[{l}:{i}] a hypothesis with words\tid{i:04}",
                labels[i % 3]
            );
        }
    }
    s
}

pub fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// The `provenance: {...}` footer parsed as JSON.
pub fn footer(o: &Output) -> serde_json::Value {
    let out = stdout(o);
    let line = out.lines().last().expect("some output");
    let json = line
        .strip_prefix("provenance: ")
        .expect("footer is the last line");
    serde_json::from_str(json).expect("footer is JSON")
}
