//! Command-line and config-file parsing.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Keys are the long flag names without the leading dashes
//! (`train-count`, or `train_count`). Flags given on the command line
//! override values from the file.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use super::{DataSource, PipelineConfig};
use crate::classifiers::DiscriminantKind;
use crate::dataset::{CovarianceMode, LabelColumn, SyntheticSpec};
use crate::selection::StopMode;
use crate::stats::TTestMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    /// Command-line syntax error, already rendered by the argument parser.
    #[error("{0}")]
    Usage(String),
    /// `--help` or `--version` output; not a failure.
    #[error("{0}")]
    Help(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("{}:{line}: {message}", path.display())]
    File { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// A parsed command line.
#[derive(Debug, Clone, PartialEq)]
pub enum Invocation {
    Filter(PipelineConfig),
    Wrapper(PipelineConfig),
    Synth(SynthConfig),
}

/// Parameters of the `synth` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub spec: SyntheticSpec,
    pub out: PathBuf,
    pub label_name: String,
}

#[derive(Debug, Parser)]
#[command(name = "featsel", version, about = "t-test filter and LDA/QDA wrapper feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank features by t-test p-value and score top-k subsets on the holdout test set
    Filter(RunArgs),
    /// Prefilter by p-value, then run cross-validated forward selection
    Wrapper(RunArgs),
    /// Write a synthetic two-class Gaussian dataset as CSV
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file of `key = value` lines
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Input CSV file
    #[arg(long, value_name = "PATH")]
    data: Option<String>,
    /// Label column name (or zero-based index)
    #[arg(long, value_name = "NAME")]
    label_col: Option<String>,
    #[arg(long, value_name = "N")]
    seed: Option<String>,
    /// Holdout training rows [default: 160 per 216 observations]
    #[arg(long, value_name = "N")]
    train_count: Option<String>,
    /// Holdout sampling: stratified or random [default: stratified]
    #[arg(long, value_name = "MODE")]
    holdout: Option<String>,
    /// lda or qda [default: qda]
    #[arg(long, value_name = "KIND")]
    classifier: Option<String>,
    /// Added to covariance diagonals [default: 0]
    #[arg(long, value_name = "X")]
    ridge: Option<String>,
    /// welch or pooled [default: welch]
    #[arg(long, value_name = "MODE")]
    ttest: Option<String>,
    /// Cross-validation folds [default: 10]
    #[arg(long, value_name = "N")]
    folds: Option<String>,
    /// Candidates kept for the wrapper search [default: 150]
    #[arg(long, value_name = "N")]
    prefilter_k: Option<String>,
    /// Filter grid as START:END:STEP or a comma list [default: 5:70:5]
    #[arg(long, value_name = "SPEC")]
    grid: Option<String>,
    /// local-min or range-min [default: local-min]
    #[arg(long, value_name = "RULE")]
    stop: Option<String>,
    /// Largest subset the wrapper search builds [default: 30]
    #[arg(long, value_name = "N")]
    max_size: Option<String>,
    /// Keep the smallest subset among equal CV scores [default: true]
    #[arg(long, value_name = "BOOL")]
    prefer_smaller: Option<String>,
    /// Worker threads [default: all cores]
    #[arg(long, value_name = "N")]
    threads: Option<String>,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
}

impl RunArgs {
    fn settings(&self) -> Vec<(&'static str, String)> {
        let fields: [(&'static str, &Option<String>); 17] = [
            ("data", &self.data),
            ("label-col", &self.label_col),
            ("seed", &self.seed),
            ("train-count", &self.train_count),
            ("holdout", &self.holdout),
            ("classifier", &self.classifier),
            ("ridge", &self.ridge),
            ("ttest", &self.ttest),
            ("folds", &self.folds),
            ("prefilter-k", &self.prefilter_k),
            ("grid", &self.grid),
            ("stop", &self.stop),
            ("max-size", &self.max_size),
            ("prefer-smaller", &self.prefer_smaller),
            ("threads", &self.threads),
            ("out", &self.out),
            ("config", &None),
        ];
        fields
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CovarianceArg {
    Identity,
    Scaled,
    Distinct,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output CSV file
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    #[arg(long, default_value_t = 108)]
    n0: usize,
    #[arg(long, default_value_t = 108)]
    n1: usize,
    #[arg(long, default_value_t = 1000)]
    features: usize,
    /// Comma-separated informative feature indices (overrides --n-informative)
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    informative: Option<Vec<usize>>,
    /// Make features 0..N informative
    #[arg(long, default_value_t = 10, value_name = "N")]
    n_informative: usize,
    /// Class-1 mean of informative features
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = CovarianceArg::Identity)]
    cov: CovarianceArg,
    /// Variance (scaled) or class-1 variance ratio (distinct)
    #[arg(long, value_name = "X")]
    cov_param: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    label_name: String,
}

/// Parses a full argument list (program name first).
pub fn parse_config<I, T>(args: I) -> Result<Invocation, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        use clap::error::ErrorKind;
        match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ConfigError::Help(e.to_string()),
            _ => ConfigError::Usage(e.to_string()),
        }
    })?;
    match cli.command {
        Command::Filter(run) => build_run(&run).map(Invocation::Filter),
        Command::Wrapper(run) => build_run(&run).map(Invocation::Wrapper),
        Command::Synth(s) => build_synth(s).map(Invocation::Synth),
    }
}

fn build_run(run: &RunArgs) -> Result<PipelineConfig, ConfigError> {
    let mut draft = Draft::default();
    if let Some(path) = &run.config {
        for (line, key, value) in read_config_file(path)? {
            draft.apply(&key, &value).map_err(|e| ConfigError::File {
                path: path.clone(),
                line,
                message: e.to_string(),
            })?;
        }
    }
    for (key, value) in run.settings() {
        draft.apply(key, &value)?;
    }
    draft.finish()
}

fn read_config_file(path: &Path) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::File {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected `key = value`, got {line:?}"),
        })?;
        out.push((i + 1, key.trim().replace('_', "-"), value.trim().to_string()));
    }
    Ok(out)
}

#[derive(Debug, Default)]
struct Draft {
    data: Option<PathBuf>,
    label: Option<String>,
    settings: Vec<(String, String)>,
}

impl Draft {
    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "label-col" => self.label = Some(value.to_string()),
            "seed" | "train-count" | "holdout" | "classifier" | "ridge" | "ttest" | "folds"
            | "prefilter-k" | "grid" | "stop" | "max-size" | "prefer-smaller" | "threads" | "out" => {
                // checked now so errors point at the source that set them
                apply_setting(&mut PipelineConfig::new(placeholder()), key, value)?;
                self.settings.push((key.to_string(), value.to_string()));
            }
            other => return Err(ConfigError::Invalid(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<PipelineConfig, ConfigError> {
        let path = self
            .data
            .ok_or_else(|| ConfigError::Invalid("no input data: pass --data PATH".into()))?;
        let label = self
            .label
            .ok_or_else(|| ConfigError::Invalid("no label column: pass --label-col NAME".into()))?;
        let mut cfg = PipelineConfig::new(DataSource::Csv {
            path,
            label: LabelColumn::Name(label),
        });
        for (key, value) in &self.settings {
            apply_setting(&mut cfg, key, value)?;
        }
        cfg.validate().map_err(|e| match e {
            crate::Error::Config(c) => c,
            other => ConfigError::Invalid(other.to_string()),
        })?;
        Ok(cfg)
    }
}

fn placeholder() -> DataSource {
    DataSource::Csv {
        path: PathBuf::new(),
        label: LabelColumn::Index(0),
    }
}

fn apply_setting(cfg: &mut PipelineConfig, key: &str, value: &str) -> Result<(), ConfigError> {
    let err = |reason: &str| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    };
    let count = || value.parse::<usize>().map_err(|_| err("expected a non-negative integer"));
    match key {
        "seed" => cfg.seed = value.parse().map_err(|_| err("expected an unsigned 64-bit integer"))?,
        "train-count" => cfg.train_count = Some(count()?),
        "holdout" => {
            cfg.stratified = match value {
                "stratified" => true,
                "random" => false,
                _ => return Err(err("expected stratified or random")),
            }
        }
        "classifier" => {
            cfg.classifier = match value {
                "lda" | "linear" => DiscriminantKind::Linear,
                "qda" | "quadratic" => DiscriminantKind::Quadratic,
                _ => return Err(err("expected lda or qda")),
            }
        }
        "ridge" => {
            let r: f64 = value.parse().map_err(|_| err("expected a number"))?;
            if !(r >= 0.0 && r.is_finite()) {
                return Err(err("must be >= 0"));
            }
            cfg.ridge = r;
        }
        "ttest" => {
            cfg.ttest = match value {
                "welch" => TTestMode::Welch,
                "pooled" => TTestMode::Pooled,
                _ => return Err(err("expected welch or pooled")),
            }
        }
        "folds" => {
            let k = count()?;
            if k < 2 {
                return Err(err("at least 2 folds are required"));
            }
            cfg.folds = k;
        }
        "prefilter-k" => {
            let k = count()?;
            if k == 0 {
                return Err(err("must be >= 1"));
            }
            cfg.prefilter_k = k;
        }
        "grid" => cfg.filter_grid = parse_grid(value).map_err(|r| err(&r))?,
        "stop" => {
            cfg.stop.mode = match value {
                "local-min" | "first-local-min" => StopMode::FirstLocalMin,
                "range-min" => StopMode::RangeMin,
                _ => return Err(err("expected local-min or range-min")),
            }
        }
        "max-size" => {
            let m = count()?;
            if m == 0 {
                return Err(err("must be >= 1"));
            }
            cfg.stop.max_size = m;
        }
        "prefer-smaller" => {
            cfg.stop.prefer_smaller = value.parse().map_err(|_| err("expected true or false"))?
        }
        "threads" => {
            let t = count()?;
            if t == 0 {
                return Err(err("must be >= 1"));
            }
            cfg.threads = Some(t);
        }
        "out" => cfg.out_dir = PathBuf::from(value),
        _ => return Err(ConfigError::Invalid(format!("unknown setting {key:?}"))),
    }
    Ok(())
}

/// `START:END:STEP` (inclusive end) or a comma-separated list; the result
/// must be strictly increasing and positive.
pub(crate) fn parse_grid(spec: &str) -> Result<Vec<usize>, String> {
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| format!("{s:?} is not a non-negative integer"));
    let grid: Vec<usize> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err("expected START:END:STEP".into());
        };
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if step == 0 {
            return Err("step must be >= 1".into());
        }
        if start > end {
            return Err("start exceeds end".into());
        }
        (start..=end).step_by(step).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_, _>>()?
    };
    if grid.first() == Some(&0) {
        return Err("grid values must be >= 1".into());
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err("grid must be strictly increasing".into());
    }
    Ok(grid)
}

fn build_synth(s: SynthArgs) -> Result<SynthConfig, ConfigError> {
    let informative = match s.informative {
        Some(list) => list,
        None => (0..s.n_informative.min(s.features)).collect(),
    };
    let covariance = match s.cov {
        CovarianceArg::Identity => CovarianceMode::Identity,
        CovarianceArg::Scaled => CovarianceMode::Scaled {
            variance: s.cov_param.unwrap_or(1.0),
        },
        CovarianceArg::Distinct => CovarianceMode::DistinctPerClass {
            variance_ratio: s.cov_param.unwrap_or(9.0),
        },
    };
    Ok(SynthConfig {
        spec: SyntheticSpec {
            n_per_class: (s.n0, s.n1),
            n_features: s.features,
            informative,
            delta: s.delta,
            covariance,
            seed: s.seed,
        },
        out: s.out,
        label_name: s.label_name,
    })
}
