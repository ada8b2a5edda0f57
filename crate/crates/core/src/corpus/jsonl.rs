use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{Instance, Reject};
use crate::error::{Error, Result};

pub fn write_instances<'a, W: Write>(
    mut w: W,
    instances: impl IntoIterator<Item = &'a Instance>,
) -> io::Result<()> {
    for inst in instances {
        write_line(&mut w, inst)?;
    }
    w.flush()
}

/// Reads canonical instance JSONL. Lines that parse but break an instance
/// invariant are fatal: canonical files are only produced after validation.
pub fn read_instances<R: BufRead>(r: R, source_name: &str) -> Result<Vec<Instance>> {
    let items: Vec<(usize, Instance)> = read_lines(r, source_name)?;
    items
        .into_iter()
        .map(|(line, inst)| {
            inst.validate().map_err(|reason| Error::Malformed {
                source_name: source_name.to_string(),
                reason: format!("line {line}: {reason}"),
            })?;
            Ok(inst)
        })
        .collect()
}

pub fn write_rejects<'a, W: Write>(
    mut w: W,
    rejects: impl IntoIterator<Item = &'a Reject>,
) -> io::Result<()> {
    for r in rejects {
        write_line(&mut w, r)?;
    }
    w.flush()
}

pub fn read_rejects<R: BufRead>(r: R, source_name: &str) -> Result<Vec<Reject>> {
    Ok(read_lines(r, source_name)?
        .into_iter()
        .map(|(_, r)| r)
        .collect())
}

pub(crate) fn write_line<W: Write, T: Serialize + ?Sized>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub(crate) fn read_lines<R: BufRead, T: DeserializeOwned>(
    r: R,
    source_name: &str,
) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|source| Error::Json {
            source_name: source_name.to_string(),
            line: i + 1,
            source,
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}
