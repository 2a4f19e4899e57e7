use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kvqe::optimize::BfgsSettings;
use kvqe::qse::DEFAULT_METRIC_THRESHOLD;
use kvqe::AnsatzVariant;
use serde::Deserialize;

use crate::Common;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Vqe,
    Fci,
    Bands,
    Momentum,
    Fidelity,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub gtol: Option<f64>,
    pub max_iter: Option<usize>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub max_line_search: Option<usize>,
}

/// On-disk run configuration; every field can be overridden on the command line.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub files: Vec<PathBuf>,
    pub variant: Option<AnsatzVariant>,
    pub momentum_filter: Option<bool>,
    pub optimizer: OptimizerConfig,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub init_scale: Option<f64>,
    pub metric_threshold: Option<f64>,
    pub tasks: Option<Vec<Task>>,
    pub svg: Option<bool>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for f in &mut cfg.files {
            if f.is_relative() {
                *f = base.join(&*f);
            }
        }
        if let Some(out) = &cfg.out {
            if out.is_relative() {
                cfg.out = Some(base.join(out));
            }
        }
        Ok(cfg)
    }
}

/// Fully resolved settings for one command invocation.
#[derive(Clone, Debug)]
pub struct Settings {
    pub files: Vec<PathBuf>,
    pub variant: AnsatzVariant,
    pub momentum_filter: bool,
    pub bfgs: BfgsSettings,
    pub out: PathBuf,
    pub jobs: usize,
    pub seed: Option<u64>,
    pub init_scale: f64,
    pub metric_threshold: f64,
    pub tasks: Vec<Task>,
    pub svg: bool,
}

impl Settings {
    pub fn resolve(common: &Common, files: &[PathBuf]) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let variant = common.variant.or(cfg.variant).unwrap_or(AnsatzVariant::BUccsdReal);
        let defaults = BfgsSettings::default();
        let bfgs = BfgsSettings {
            gtol: common.gtol.or(cfg.optimizer.gtol).unwrap_or(defaults.gtol),
            max_iter: common.max_iter.or(cfg.optimizer.max_iter).unwrap_or(defaults.max_iter),
            c1: cfg.optimizer.c1.unwrap_or(defaults.c1),
            c2: cfg.optimizer.c2.unwrap_or(defaults.c2),
            max_line_search: cfg.optimizer.max_line_search.unwrap_or(defaults.max_line_search),
        };
        if !(bfgs.gtol > 0.0) || !(0.0 < bfgs.c1 && bfgs.c1 < bfgs.c2 && bfgs.c2 < 1.0) {
            bail!("invalid optimizer settings: {bfgs:?}");
        }
        let jobs = common.jobs.or(cfg.jobs).unwrap_or(1);
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        let files = if files.is_empty() { cfg.files } else { files.to_vec() };
        Ok(Settings {
            files,
            variant,
            momentum_filter: common.momentum_filter.or(cfg.momentum_filter).unwrap_or(variant.default_momentum_filter()),
            bfgs,
            out: common.out.clone().or(cfg.out).unwrap_or_else(|| PathBuf::from(".")),
            jobs,
            seed: common.seed.or(cfg.seed),
            init_scale: cfg.init_scale.unwrap_or(0.05),
            metric_threshold: cfg.metric_threshold.unwrap_or(DEFAULT_METRIC_THRESHOLD),
            tasks: cfg.tasks.unwrap_or_else(|| vec![Task::Vqe]),
            svg: common.no_svg.then_some(false).or(cfg.svg).unwrap_or(true),
        })
    }

    pub fn single_file(&self) -> Result<&Path> {
        match self.files.as_slice() {
            [f] => Ok(f),
            [] => bail!("no integral file given"),
            _ => bail!("expected one integral file, got {}", self.files.len()),
        }
    }

    pub fn has(&self, task: Task) -> bool {
        self.tasks.contains(&task)
    }
}
