//! Observation matrices with class labels, plus the ways of carving them up:
//! CSV ingestion, holdout splits, stratified folds and a synthetic Gaussian
//! generator.
//!
//! The CSV dialect is fixed: comma separated, the first row is a header,
//! `.` is the decimal point and numeric cells are unquoted. Surrounding
//! whitespace in a cell is ignored. One column holds class labels (any
//! text); labels are mapped to dense ids `0..n_classes` in order of first
//! appearance.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed CSV: {source}")]
    Csv {
        line: u64,
        #[source]
        source: csv::Error,
    },
    #[error("CSV input has no data rows")]
    Empty,
    #[error("line {line}: expected {expected} cells, found {found}")]
    Ragged { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column} ({name}): cannot parse {value:?} as a number")]
    NonNumeric {
        line: u64,
        column: usize,
        name: String,
        value: String,
    },
    #[error("line {line}, column {column} ({name}): value is not finite")]
    NonFinite { line: u64, column: usize, name: String },
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("data has a single class ({0:?}); at least two are required")]
    SingleClass(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Dense `n_obs × n_features` matrix of finite reals with one class id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
    feature_names: Option<Vec<String>>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset, checking shape, finiteness and that every class id
    /// in `0..=max(labels)` occurs at least once.
    pub fn new(
        values: DMatrix<f64>,
        labels: Vec<usize>,
        feature_names: Option<Vec<String>>,
    ) -> Result<Self> {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        Self::with_class_names(values, labels, feature_names, class_names)
    }

    pub fn with_class_names(
        values: DMatrix<f64>,
        labels: Vec<usize>,
        feature_names: Option<Vec<String>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let (n_obs, n_features) = values.shape();
        if n_obs < 2 {
            return Err(DatasetError::Invalid(format!(
                "need at least 2 observations, got {n_obs}"
            )));
        }
        if n_features == 0 {
            return Err(DatasetError::Invalid("need at least 1 feature".into()));
        }
        if labels.len() != n_obs {
            return Err(DatasetError::Invalid(format!(
                "{} labels for {n_obs} observations",
                labels.len()
            )));
        }
        if let Some(names) = &feature_names {
            if names.len() != n_features {
                return Err(DatasetError::Invalid(format!(
                    "{} feature names for {n_features} features",
                    names.len()
                )));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % n_obs, pos / n_obs);
            return Err(DatasetError::Invalid(format!(
                "non-finite value at row {row}, feature {col}"
            )));
        }
        let n_classes = class_names.len();
        let mut counts = vec![0usize; n_classes];
        for &l in &labels {
            if l >= n_classes {
                return Err(DatasetError::Invalid(format!(
                    "label {l} outside 0..{n_classes}"
                )));
            }
            counts[l] += 1;
        }
        if let Some(c) = counts.iter().position(|&c| c == 0) {
            return Err(DatasetError::Invalid(format!("class {c} has no observations")));
        }
        if n_classes < 2 {
            return Err(DatasetError::SingleClass(
                class_names.first().cloned().unwrap_or_default(),
            ));
        }
        Ok(Self {
            values,
            labels,
            n_classes,
            feature_names,
            class_names,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, obs: usize) -> usize {
        self.labels[obs]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn value(&self, obs: usize, feature: usize) -> f64 {
        self.values[(obs, feature)]
    }

    /// Contiguous view of one feature column.
    pub fn column(&self, feature: usize) -> &[f64] {
        let n = self.n_obs();
        &self.values.as_slice()[feature * n..(feature + 1) * n]
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Original label text for each dense class id.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_name(&self, feature: usize) -> String {
        match &self.feature_names {
            Some(names) => names[feature].clone(),
            None => format!("f{feature}"),
        }
    }

    /// Per-class counts among `obs`.
    pub fn class_counts(&self, obs: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in obs {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    /// Copies row `obs` restricted to `subset` into `out`.
    pub fn gather_row(&self, obs: usize, subset: &[usize], out: &mut [f64]) {
        for (slot, &f) in out.iter_mut().zip(subset) {
            *slot = self.values[(obs, f)];
        }
    }

    /// Replaces the values of one observation, keeping its label.
    pub fn set_row(&mut self, obs: usize, row: &[f64]) -> Result<()> {
        if row.len() != self.n_features() {
            return Err(DatasetError::Invalid(format!(
                "row of length {} for {} features",
                row.len(),
                self.n_features()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::Invalid("non-finite value in row".into()));
        }
        for (f, &v) in row.iter().enumerate() {
            self.values[(obs, f)] = v;
        }
        Ok(())
    }

    /// Writes the dataset in the crate's CSV dialect. Feature columns come
    /// first, the label column (named `label_name`) last.
    pub fn write_csv<W: Write>(&self, out: W, label_name: &str) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(out);
        let csv_err = |e: csv::Error| DatasetError::Csv { line: 0, source: e };
        let mut header: Vec<String> = (0..self.n_features()).map(|f| self.feature_name(f)).collect();
        header.push(label_name.to_string());
        w.write_record(&header).map_err(csv_err)?;
        let mut record = Vec::with_capacity(self.n_features() + 1);
        for i in 0..self.n_obs() {
            record.clear();
            record.extend((0..self.n_features()).map(|f| self.value(i, f).to_string()));
            record.push(self.class_names[self.labels[i]].clone());
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush().map_err(|e| DatasetError::Io {
            path: PathBuf::new(),
            source: e,
        })
    }

    pub fn save_csv(&self, path: &Path, label_name: &str) -> Result<()> {
        let file = File::create(path).map_err(|e| DatasetError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_csv(std::io::BufWriter::new(file), label_name)
            .map_err(|e| match e {
                DatasetError::Io { source, .. } => DatasetError::Io {
                    path: path.to_path_buf(),
                    source,
                },
                other => other,
            })
    }
}

/// Which CSV column holds the class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl LabelColumn {
    /// Header name lookup first; a bare integer that is not a header name is
    /// taken as a zero-based column index.
    fn resolve(&self, header: &csv::StringRecord) -> Result<usize> {
        match self {
            LabelColumn::Index(i) if *i < header.len() => Ok(*i),
            LabelColumn::Index(i) => Err(DatasetError::MissingLabelColumn(i.to_string())),
            LabelColumn::Name(name) => header
                .iter()
                .position(|h| h.trim() == name)
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < header.len()))
                .ok_or_else(|| DatasetError::MissingLabelColumn(name.clone())),
        }
    }
}

impl From<&str> for LabelColumn {
    fn from(s: &str) -> Self {
        LabelColumn::Name(s.to_string())
    }
}

pub fn load_csv(path: &Path, label_column: &LabelColumn) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_csv(std::io::BufReader::new(file), label_column)
}

/// Parses CSV text in the crate dialect. Error messages cite 1-based file
/// lines (the header is line 1) and 1-based columns.
pub fn read_csv<R: Read>(input: R, label_column: &LabelColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| DatasetError::Csv { line: 1, source: e })?
        .clone();
    if header.is_empty() {
        return Err(DatasetError::Empty);
    }
    let label_idx = label_column.resolve(&header)?;
    let width = header.len();
    if width < 2 {
        return Err(DatasetError::Invalid(
            "need at least one feature column besides the label".into(),
        ));
    }
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut rows: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(DatasetError::Csv { line, source: e }),
        }
        let line = record.position().map_or(line, |p| p.line());
        if record.len() != width {
            return Err(DatasetError::Ragged {
                line,
                expected: width,
                found: record.len(),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if col == label_idx {
                let next = class_names.len();
                let id = *class_ids.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                labels.push(id);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| DatasetError::NonNumeric {
                line,
                column: col + 1,
                name: header[col].trim().to_string(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonFinite {
                    line,
                    column: col + 1,
                    name: header[col].trim().to_string(),
                });
            }
            rows.push(v);
        }
    }
    if labels.is_empty() {
        return Err(DatasetError::Empty);
    }
    if class_names.len() < 2 {
        return Err(DatasetError::SingleClass(class_names[0].clone()));
    }
    let values = DMatrix::from_row_slice(labels.len(), width - 1, &rows);
    Dataset::with_class_names(values, labels, Some(feature_names), class_names)
}

/// Disjoint train/test partition of `0..n_obs`, both sides sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldoutSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub stratified: bool,
}

/// Splits observations into `train_count` training rows and the rest for
/// testing.
///
/// In stratified mode each class's training quota is its proportional share
/// rounded by largest remainder (ties to the lower class id), so every quota
/// is within 1 of exact proportionality. Rows are drawn by shuffling each
/// class's indices and taking a prefix.
pub fn holdout_split(
    ds: &Dataset,
    train_count: usize,
    stratified: bool,
    seed: u64,
) -> Result<HoldoutSplit> {
    let n = ds.n_obs();
    if train_count == 0 || train_count >= n {
        return Err(DatasetError::Invalid(format!(
            "train count must lie in 1..={}, got {train_count}",
            n - 1
        )));
    }
    let mut rng = SeededRng::new(seed);
    let mut train = Vec::with_capacity(train_count);
    let mut test = Vec::with_capacity(n - train_count);
    if stratified {
        let by_class = indices_by_class(ds.labels(), (0..n).collect::<Vec<_>>().as_slice(), ds.n_classes());
        let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let quotas = proportional_quotas(&counts, train_count);
        for (c, (mut members, quota)) in by_class.into_iter().zip(quotas).enumerate() {
            if quota == 0 || quota == members.len() {
                return Err(DatasetError::Invalid(format!(
                    "stratified split of {train_count}/{} leaves class {c} ({} observations) \
                     without a training or test observation",
                    n - train_count,
                    members.len()
                )));
            }
            rng.shuffle(&mut members);
            train.extend_from_slice(&members[..quota]);
            test.extend_from_slice(&members[quota..]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut all);
        train.extend_from_slice(&all[..train_count]);
        test.extend_from_slice(&all[train_count..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(HoldoutSplit {
        train,
        test,
        seed,
        stratified,
    })
}

fn indices_by_class(labels: &[usize], obs: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); n_classes];
    for &i in obs {
        by_class[labels[i]].push(i);
    }
    by_class
}

/// Largest-remainder apportionment of `total` over classes of size `counts`.
fn proportional_quotas(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let mut quotas: Vec<usize> = counts.iter().map(|&c| c * total / n).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps lower class ids first among equal remainders.
    order.sort_by_key(|&c| std::cmp::Reverse(counts[c] * total % n));
    for &c in order.iter().take(total - assigned) {
        quotas[c] += 1;
    }
    quotas
}

/// A k-fold partition of a list of observation indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    k: usize,
    indices: Vec<usize>,
    fold_of: Vec<usize>,
    seed: u64,
}

impl FoldAssignment {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Observation indices the folds partition, in the caller's order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Fold id of `indices()[i]`.
    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }

    /// Observations held out in `fold`.
    pub fn held_out(&self, fold: usize) -> Vec<usize> {
        self.select(|f| f == fold)
    }

    /// Observations used for fitting when `fold` is held out.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        self.select(|f| f != fold)
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    fn select(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.indices
            .iter()
            .zip(&self.fold_of)
            .filter(|&(_, &f)| keep(f))
            .map(|(&i, _)| i)
            .collect()
    }
}

/// Stratified k-fold assignment.
///
/// Each class's indices are shuffled, then dealt round-robin to folds with a
/// single counter that carries over from one class to the next. Per-class
/// fold counts therefore differ by at most one, and so do total fold sizes.
/// `labels` is indexed by observation id (typically `Dataset::labels`).
pub fn stratified_folds(
    indices: &[usize],
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(DatasetError::Invalid(format!("fold count must be >= 2, got {k}")));
    }
    if k > indices.len() {
        return Err(DatasetError::Invalid(format!(
            "{k} folds requested for {} observations",
            indices.len()
        )));
    }
    let n_classes = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut by_class = vec![Vec::new(); n_classes];
    for (pos, &i) in indices.iter().enumerate() {
        by_class[labels[i]].push(pos);
    }
    for (c, members) in by_class.iter().enumerate() {
        if !members.is_empty() && members.len() < k {
            log::warn!(
                "class {c} has {} observations for {k} folds; some folds will lack it",
                members.len()
            );
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut fold_of = vec![0; indices.len()];
    let mut counter = 0usize;
    for mut members in by_class {
        rng.shuffle(&mut members);
        for pos in members {
            fold_of[pos] = counter % k;
            counter += 1;
        }
    }
    Ok(FoldAssignment {
        k,
        indices: indices.to_vec(),
        fold_of,
        seed,
    })
}

/// How class covariances are set up in [`synthetic_gaussian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovarianceMode {
    /// Unit variance everywhere.
    Identity,
    /// Every feature in both classes has this variance.
    Scaled { variance: f64 },
    /// Informative features of class 1 have their variance multiplied by
    /// `variance_ratio`; everything else has unit variance.
    DistinctPerClass { variance_ratio: f64 },
}

/// Parameters of a synthetic two-class Gaussian dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_per_class: (usize, usize),
    pub n_features: usize,
    pub informative: Vec<usize>,
    pub delta: f64,
    pub covariance: CovarianceMode,
    pub seed: u64,
}

/// Draws independent Gaussian features for two classes. Class 0 rows come
/// first. Informative features have mean 0 in class 0 and `delta` in class 1;
/// all other features are identically distributed in both classes. Values
/// are generated row by row, feature by feature, from one [`SeededRng`].
pub fn synthetic_gaussian(spec: &SyntheticSpec) -> Result<Dataset> {
    let (n0, n1) = spec.n_per_class;
    if n0 < 2 || n1 < 2 {
        return Err(DatasetError::Invalid(format!(
            "each class needs >= 2 observations, got ({n0}, {n1})"
        )));
    }
    if spec.n_features == 0 {
        return Err(DatasetError::Invalid("need at least 1 feature".into()));
    }
    if let Some(&f) = spec.informative.iter().find(|&&f| f >= spec.n_features) {
        return Err(DatasetError::Invalid(format!(
            "informative feature {f} outside 0..{}",
            spec.n_features
        )));
    }
    if !spec.delta.is_finite() {
        return Err(DatasetError::Invalid("delta must be finite".into()));
    }
    let (base_sd, class1_sd) = match spec.covariance {
        CovarianceMode::Identity => (1.0, 1.0),
        CovarianceMode::Scaled { variance } if variance > 0.0 => (variance.sqrt(), variance.sqrt()),
        CovarianceMode::DistinctPerClass { variance_ratio } if variance_ratio > 0.0 => {
            (1.0, variance_ratio.sqrt())
        }
        other => {
            return Err(DatasetError::Invalid(format!(
                "covariance parameters must be positive: {other:?}"
            )))
        }
    };
    let d = spec.n_features;
    let mut informative = vec![false; d];
    for &f in &spec.informative {
        informative[f] = true;
    }
    let n = n0 + n1;
    let mut rng = SeededRng::new(spec.seed);
    let mut rows = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = usize::from(i >= n0);
        labels.push(class);
        for &planted in &informative {
            let z = rng.normal();
            let v = match (class, planted) {
                (1, true) => spec.delta + class1_sd * z,
                _ => base_sd * z,
            };
            rows.push(v);
        }
    }
    let values = DMatrix::from_row_slice(n, d, &rows);
    let names = (0..d).map(|f| format!("f{f}")).collect();
    Dataset::new(values, labels, Some(names))
}
