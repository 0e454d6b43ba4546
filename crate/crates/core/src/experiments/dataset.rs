use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) || self.train <= 0.0 {
            return Err(Error::arg(format!("bad split fractions {parts:?}")));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("split fractions {parts:?} must sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    fn shuffled(n: usize, fractions: SplitFractions, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut RngStream::new(seed).derive(0x5eed).generator());
        let n_train = ((fractions.train * n as f64).round() as usize).clamp(1, n);
        let n_val = ((fractions.validation * n as f64).round() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let validation = idx.split_off(n_train);
        Self {
            train: idx,
            validation,
            test,
        }
    }
}

/// Labelled points with a fixed train/validation/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub features: Matrix,
    /// One-hot, `n x classes`.
    pub labels: Matrix,
    pub class_names: Vec<String>,
    pub splits: Splits,
    classes: Vec<usize>,
}

impl Dataset {
    /// Build from class indices in `0..class_names.len()`, splitting with `split_seed`.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        classes: Vec<usize>,
        class_names: Vec<String>,
        fractions: SplitFractions,
        split_seed: u64,
    ) -> Result<Self> {
        fractions.validate()?;
        let n = features.rows();
        if classes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: classes.len(),
            });
        }
        let c = class_names.len();
        if c < 2 {
            return Err(Error::arg(format!("dataset needs at least 2 classes, got {c}")));
        }
        if let Some(bad) = classes.iter().find(|&&k| k >= c) {
            return Err(Error::arg(format!("class index {bad} out of range for {c} classes")));
        }
        let labels = Matrix::from_fn(n, c, |i, j| if classes[i] == j { 1.0 } else { 0.0 });
        Ok(Self {
            name: name.into(),
            features,
            labels,
            class_names,
            splits: Splits::shuffled(n, fractions, split_seed),
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_of(&self, i: usize) -> usize {
        self.classes[i]
    }

    pub fn train(&self) -> Subset<'_> {
        Subset::new(self, &self.splits.train)
    }

    pub fn validation(&self) -> Subset<'_> {
        Subset::new(self, &self.splits.validation)
    }

    pub fn test(&self) -> Subset<'_> {
        Subset::new(self, &self.splits.test)
    }

    /// Columns shifted and scaled to zero mean and unit variance using
    /// training-split statistics. Constant columns are only centred.
    pub fn standardized(&self) -> Self {
        let d = self.dim();
        let tr = &self.splits.train;
        let mut out = self.clone();
        for j in 0..d {
            let mean = tr.iter().map(|&i| self.features.get(i, j)).sum::<f64>() / tr.len() as f64;
            let var = tr
                .iter()
                .map(|&i| (self.features.get(i, j) - mean).powi(2))
                .sum::<f64>()
                / tr.len() as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..self.len() {
                out.features.set(i, j, (self.features.get(i, j) - mean) / sd);
            }
        }
        out
    }

    /// Same points embedded in `dim >= d` coordinates by appending zeros.
    pub fn zero_padded(&self, dim: usize) -> Result<Self> {
        let d = self.dim();
        if dim < d {
            return Err(Error::arg(format!("cannot pad {d} columns down to {dim}")));
        }
        let mut out = self.clone();
        out.features = Matrix::from_fn(self.len(), dim, |i, j| {
            if j < d {
                self.features.get(i, j)
            } else {
                0.0
            }
        });
        Ok(out)
    }

    /// Keep at most `train` training and `test` test points (validation is
    /// capped like the test split).
    pub fn restricted(&self, train: usize, test: usize) -> Self {
        let mut out = self.clone();
        out.splits.train.truncate(train);
        out.splits.validation.truncate(test);
        out.splits.test.truncate(test);
        out
    }
}

/// A view of some rows of a [`Dataset`].
#[derive(Debug, Clone, Copy)]
pub struct Subset<'a> {
    data: &'a Dataset,
    indices: &'a [usize],
}

impl<'a> Subset<'a> {
    pub fn new(data: &'a Dataset, indices: &'a [usize]) -> Self {
        Self { data, indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.data.num_classes()
    }

    pub fn point(&self, i: usize) -> &'a [f64] {
        self.data.features.row(self.indices[i])
    }

    pub fn class(&self, i: usize) -> usize {
        self.data.class_of(self.indices[i])
    }

    pub fn one_hot(&self, i: usize) -> &'a [f64] {
        self.data.labels.row(self.indices[i])
    }
}

/// How to read a delimited text file into a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    /// Zero-based label column; `None` means the last one.
    pub label_column: Option<usize>,
    pub delimiter: u8,
    pub has_header: bool,
    pub fractions: SplitFractions,
    pub split_seed: u64,
    pub standardize: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: None,
            delimiter: b',',
            has_header: false,
            fractions: SplitFractions::default(),
            split_seed: 0,
            standardize: false,
        }
    }
}

fn line_of(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

/// Sorts labels numerically when they all parse as numbers.
fn ordered_classes(labels: &[String]) -> Vec<String> {
    let mut names: Vec<String> = labels.to_vec();
    names.sort();
    names.dedup();
    if names.iter().all(|s| s.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    names
}

pub fn load_dataset(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut width = None;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| match e.position() {
            Some(p) => Error::Parse {
                line: p.line() as usize,
                message: e.to_string(),
            },
            None => Error::Csv(e),
        })?;
        let line = line_of(&rec);
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(Error::Parse {
                line,
                message: format!("expected {w} fields, found {}", rec.len()),
            });
        }
        let label = options.label_column.unwrap_or(w.saturating_sub(1));
        if label >= w {
            return Err(Error::Column {
                column: label,
                message: format!("label column out of range for {w} columns"),
            });
        }
        if w < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one feature column and a label".into(),
            });
        }
        let mut row = Vec::with_capacity(w - 1);
        for (j, field) in rec.iter().enumerate() {
            if j == label {
                labels.push(field.to_string());
                continue;
            }
            let x: f64 = field.parse().ok().filter(|x: &f64| x.is_finite()).ok_or_else(|| {
                Error::Column {
                    column: j,
                    message: format!("non-numeric value {field:?} at line {line}"),
                }
            })?;
            row.push(x);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::arg(format!("{} has no data rows", path.display())));
    }
    let names = ordered_classes(&labels);
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let classes = labels.iter().map(|l| index[l.as_str()]).collect();
    let name = path.file_stem().map_or("dataset".into(), |s| s.to_string_lossy().into_owned());
    let ds = Dataset::new(
        name,
        Matrix::from_rows(&rows)?,
        classes,
        names,
        options.fractions,
        options.split_seed,
    )?;
    Ok(if options.standardize { ds.standardized() } else { ds })
}

/// Gaussian class clusters with class-specific linear distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    /// Spread of the class centres.
    pub separation: f64,
    /// Scale of each class's mixing matrix.
    pub spread: f64,
    pub seed: u64,
}

/// Sample a [`BlobSpec`]; the columns are then standardized over all points.
pub fn synthetic_blobs(blob: &BlobSpec) -> Result<Dataset> {
    let BlobSpec { n, d, classes: c, .. } = *blob;
    if n < 2 || d < 1 || c < 2 {
        return Err(Error::arg("synthetic data needs n >= 2, d >= 1 and at least 2 classes"));
    }
    let stream = RngStream::new(blob.seed);
    let mut rng = stream.derive(1).generator();
    let mut normal = move |s: f64| -> f64 {
        let g: f64 = StandardNormal.sample(&mut rng);
        s * g
    };
    let centres: Vec<Vec<f64>> = (0..c).map(|_| (0..d).map(|_| normal(blob.separation)).collect()).collect();
    let mixing: Vec<Matrix> = (0..c)
        .map(|_| Matrix::from_fn(d, d, |_, _| normal(blob.spread)))
        .collect();
    let mut lab = stream.derive(2).generator();
    let classes: Vec<usize> = (0..n).map(|_| lab.random_range(0..c)).collect();
    let mut rows = Vec::with_capacity(n);
    for &k in &classes {
        let g: Vec<f64> = (0..d).map(|_| normal(1.0)).collect();
        let mixed = mixing[k].matvec(&g)?;
        rows.push(centres[k].iter().zip(&mixed).map(|(a, b)| a + b).collect::<Vec<_>>());
    }
    for j in 0..d {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n as f64;
        let sd = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for r in &mut rows {
            r[j] = (r[j] - mean) / sd;
        }
    }
    Dataset::new(
        blob.name.clone(),
        Matrix::from_rows(&rows)?,
        classes,
        (0..c).map(|k| k.to_string()).collect(),
        SplitFractions::default(),
        blob.seed,
    )
}

/// Two classes in four dimensions, 1372 points.
pub fn synthetic_banknote_like(seed: u64) -> Result<Dataset> {
    synthetic_blobs(&BlobSpec {
        name: "banknote-like".into(),
        n: 1372,
        d: 4,
        classes: 2,
        separation: 1.0,
        spread: 0.6,
        seed,
    })
}

/// Four classes in seven dimensions, 2000 points.
pub fn synthetic_wifi_like(seed: u64) -> Result<Dataset> {
    synthetic_blobs(&BlobSpec {
        name: "wifi-like".into(),
        n: 2000,
        d: 7,
        classes: 4,
        separation: 1.0,
        spread: 0.6,
        seed,
    })
}
