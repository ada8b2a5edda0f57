use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xlingual_core::diagnostics::DEFAULT_MAX_LEN;
use xlingual_core::tokenize::TokenizerConfig;
use xlingual_core::{Lang, Task};

use crate::{CmdResult, Failure, GlobalArgs};

pub const DEFAULT_FRACTION: f64 = 0.2;
pub const DEFAULT_REJECT_THRESHOLD: f64 = 0.5;

/// Keys accepted in the `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    task: Option<Task>,
    inputs: Option<Vec<PathBuf>>,
    format: Option<String>,
    languages: Option<Vec<String>>,
    seed: Option<u64>,
    tokenizer: Option<String>,
    max_len: Option<usize>,
    collapse: Option<bool>,
    fraction: Option<f64>,
    reject_threshold: Option<f64>,
    out_dir: Option<PathBuf>,
}

/// Fully resolved settings of one invocation. The serialized form is what
/// output provenance records; paths are left out so reruns from another
/// directory produce the same bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    pub languages: Vec<Lang>,
    pub seed: u64,
    pub tokenizer: String,
    pub max_len: usize,
    pub collapse: bool,
    pub fraction: f64,
    pub reject_threshold: f64,
    #[serde(skip)]
    pub inputs: Vec<PathBuf>,
    #[serde(skip)]
    pub out_dir: Option<PathBuf>,
    #[serde(skip)]
    pub tokenizer_config: TokenizerConfig,
}

impl RunConfig {
    pub fn resolve(global: &GlobalArgs) -> CmdResult<Self> {
        let file = match &global.config {
            Some(path) => load(path)?,
            None => FileConfig::default(),
        };
        let overrides = global.tokenizer.clone().or(file.tokenizer);
        let tokenizer_config = TokenizerConfig::default()
            .with_overrides(overrides.as_deref().unwrap_or(""))
            .map_err(|e| Failure::input(format!("--tokenizer: {e}")))?;
        let cfg = RunConfig {
            task: file.task,
            format: file.format,
            languages: file
                .languages
                .unwrap_or_default()
                .iter()
                .map(Lang::new)
                .collect(),
            seed: global.seed.or(file.seed).unwrap_or(0),
            tokenizer: tokenizer_config.describe(),
            max_len: global.max_len.or(file.max_len).unwrap_or(DEFAULT_MAX_LEN),
            collapse: global.collapse.or(file.collapse).unwrap_or(false),
            fraction: global
                .fraction
                .or(file.fraction)
                .unwrap_or(DEFAULT_FRACTION),
            reject_threshold: file.reject_threshold.unwrap_or(DEFAULT_REJECT_THRESHOLD),
            inputs: file.inputs.unwrap_or_default(),
            out_dir: file.out_dir,
            tokenizer_config,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CmdResult {
        if self.max_len == 0 {
            return Err(Failure::input("max_len must be positive"));
        }
        if !(self.fraction > 0.0 && self.fraction <= 0.5) {
            return Err(Failure::input(format!(
                "fraction {} not in (0, 0.5]",
                self.fraction
            )));
        }
        if !(0.0..=1.0).contains(&self.reject_threshold) {
            return Err(Failure::input("reject_threshold must be in [0, 1]"));
        }
        for p in &self.inputs {
            if !p.exists() {
                return Err(Failure::input(format!(
                    "config input {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    /// `--out-dir` if given, else the config's `out_dir`.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> CmdResult<PathBuf> {
        flag.or_else(|| self.out_dir.clone())
            .ok_or_else(|| Failure::input("no output directory: pass --out-dir or set out_dir"))
    }

    /// Command-line languages if any, else the config's.
    pub fn set_languages(&mut self, flag: &[String]) {
        if !flag.is_empty() {
            self.languages = flag.iter().map(Lang::new).collect();
        }
    }
}

fn load(path: &Path) -> CmdResult<FileConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::input(format!("config {}: {e}", path.display())))
}
