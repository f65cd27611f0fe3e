//! Dense sample matrices, CSV ingestion/emission, centering and seeded splits.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DrrError, Result};

/// N samples (rows) by d features (columns). Every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Mat<f64>,
}

impl DataMatrix {
    /// Wraps a matrix after checking shape and finiteness.
    pub fn new(values: Mat<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(DrrError::Empty(format!(
                "matrix must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(DrrError::NonFinite { row: i, column: j });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(DrrError::Empty("no rows".into()));
        }
        let d = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(DrrError::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Self::new(Mat::from_fn(n, d, |i, j| rows[i][j]))
    }

    /// Builds from a row-major buffer of `n * d` values.
    pub fn from_row_major(n: usize, d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * d {
            return Err(DrrError::InvalidParameter(format!(
                "buffer of length {} cannot hold {n}x{d}",
                data.len()
            )));
        }
        Self::new(Mat::from_fn(n, d, |i, j| data[i * d + j]))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn mat(&self) -> &Mat<f64> {
        &self.values
    }

    pub fn into_mat(self) -> Mat<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols()).map(|j| self.values[(i, j)]).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.values[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nrows()).map(|i| self.row(i)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> DataMatrix {
        let m = Mat::from_fn(idx.len(), self.ncols(), |i, j| self.values[(idx[i], j)]);
        DataMatrix { values: m }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        let m = Mat::from_fn(self.nrows(), cols.len(), |i, j| self.values[(i, cols[j])]);
        DataMatrix { values: m }
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.nrows() as f64;
        (0..self.ncols())
            .map(|j| (0..self.nrows()).map(|i| self.values[(i, j)]).sum::<f64>() / n)
            .collect()
    }

    /// Sample variance of each column (divides by N-1, or by 1 when N = 1).
    pub fn column_variances(&self) -> Vec<f64> {
        let means = self.column_means();
        let denom = (self.nrows().max(2) - 1) as f64;
        (0..self.ncols())
            .map(|j| {
                (0..self.nrows())
                    .map(|i| (self.values[(i, j)] - means[j]).powi(2))
                    .sum::<f64>()
                    / denom
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DataMatrix) -> f64 {
        assert_eq!(self.nrows(), other.nrows());
        assert_eq!(self.ncols(), other.ncols());
        let mut worst = 0.0f64;
        for j in 0..self.ncols() {
            for i in 0..self.nrows() {
                worst = worst.max((self.values[(i, j)] - other.values[(i, j)]).abs());
            }
        }
        worst
    }

    pub(crate) fn check_cols(&self, expected: usize) -> Result<()> {
        if self.ncols() != expected {
            return Err(DrrError::DimensionMismatch {
                expected,
                got: self.ncols(),
            });
        }
        Ok(())
    }

    pub(crate) fn from_mat_unchecked(values: Mat<f64>) -> Self {
        debug_assert!(values.nrows() > 0 && values.ncols() > 0);
        Self { values }
    }
}

/// Per-row supervision attached to a [`DataMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class index per row, contiguous in `0..classes.len()`. `classes`
    /// keeps the original label value of each index.
    Classes { labels: Vec<usize>, classes: Vec<f64> },
    /// Real-valued targets, one row per sample.
    Regression(DataMatrix),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Regression(m) => m.nrows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Classes { labels, classes } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: classes.clone(),
            },
            Targets::Regression(m) => Targets::Regression(m.select_rows(idx)),
        }
    }

    /// Maps arbitrary numeric labels onto `0..C` in ascending label order.
    pub fn classes_from_values(values: &[f64]) -> Targets {
        let mut classes: Vec<f64> = values.to_vec();
        classes.sort_by(|a, b| a.partial_cmp(b).expect("labels are finite"));
        classes.dedup();
        let labels = values
            .iter()
            .map(|v| classes.iter().position(|c| c == v).expect("present"))
            .collect();
        Targets::Classes { labels, classes }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    pub targets: Targets,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, targets: Targets) -> Result<Self> {
        if targets.len() != data.nrows() {
            return Err(DrrError::InvalidParameter(format!(
                "{} targets for {} samples",
                targets.len(),
                data.nrows()
            )));
        }
        Ok(Self { data, targets })
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Regression(_) => None,
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            data: self.data.select_rows(idx),
            targets: self.targets.select(idx),
        }
    }
}

/// Which column of a CSV holds class labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    /// Zero-based column index.
    Index(usize),
}

impl LabelColumn {
    fn resolve(self, width: usize) -> Result<usize> {
        match self {
            LabelColumn::Last => Ok(width - 1),
            LabelColumn::Index(i) if i < width => Ok(i),
            LabelColumn::Index(i) => Err(DrrError::InvalidParameter(format!(
                "label column {i} out of range for {width} columns"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_header: bool,
    /// Single-byte field separator; `b' '` also tolerates runs of spaces.
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: false,
            delimiter: b',',
        }
    }
}

/// Parses numeric CSV text into rows. Row numbers in errors are 1-based
/// data lines (the header is not counted); columns are 1-based.
pub fn parse_rows<R: Read>(reader: R, opts: &CsvOptions) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = if opts.has_header {
        let h = rdr.headers().map_err(|e| DrrError::Csv(e.to_string()))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| DrrError::Csv(e.to_string()))?;
        // Runs of the delimiter (space-separated files) yield empty fields.
        let fields: Vec<&str> = if opts.delimiter == b' ' {
            record.iter().filter(|f| !f.is_empty()).collect()
        } else {
            record.iter().collect()
        };
        if fields.is_empty() || (fields.len() == 1 && fields[0].is_empty()) {
            continue;
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(DrrError::Csv(format!(
                    "row {} has {} fields, expected {w}",
                    r + 1,
                    fields.len()
                )))
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(fields.len());
        for (c, f) in fields.iter().enumerate() {
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                _ => {
                    return Err(DrrError::Parse {
                        row: r + 1,
                        column: c + 1,
                        value: f.to_string(),
                    })
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DrrError::Empty("no data rows".into()));
    }
    Ok((header, rows))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| DrrError::io(path, e))
}

/// Loads an unlabeled numeric CSV.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<DataMatrix> {
    let path = path.as_ref();
    let (_, rows) = parse_rows(open(path)?, opts)?;
    DataMatrix::from_rows(&rows)
}

/// Loads a CSV whose `label_column` holds integer class labels.
pub fn load_labeled_csv(
    path: impl AsRef<Path>,
    opts: &CsvOptions,
    label_column: LabelColumn,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let (_, rows) = parse_rows(open(path)?, opts)?;
    split_label_column(&rows, label_column)
}

pub fn split_label_column(rows: &[Vec<f64>], label_column: LabelColumn) -> Result<LabeledDataset> {
    let width = rows[0].len();
    if width < 2 {
        return Err(DrrError::InvalidParameter(
            "a labeled CSV needs at least one feature column besides the label".into(),
        ));
    }
    let lc = label_column.resolve(width)?;
    let mut feats = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (r, row) in rows.iter().enumerate() {
        let v = row[lc];
        if v.fract() != 0.0 {
            return Err(DrrError::Parse {
                row: r + 1,
                column: lc + 1,
                value: format!("{v} (class labels must be integers)"),
            });
        }
        labels.push(v);
        feats.push(
            row.iter()
                .enumerate()
                .filter(|(c, _)| *c != lc)
                .map(|(_, v)| *v)
                .collect::<Vec<_>>(),
        );
    }
    LabeledDataset::new(DataMatrix::from_rows(&feats)?, Targets::classes_from_values(&labels))
}

/// Writes comma-separated rows using the shortest representation that
/// parses back to the same `f64`.
pub fn write_csv<W: Write>(mut w: W, m: &DataMatrix, header: Option<&[String]>) -> std::io::Result<()> {
    if let Some(h) = header {
        writeln!(w, "{}", h.join(","))?;
    }
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", m.get(i, j)));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn save_csv(path: impl AsRef<Path>, m: &DataMatrix, header: Option<&[String]>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| DrrError::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_csv(&mut w, m, header).map_err(|e| DrrError::io(path, e))?;
    w.flush().map_err(|e| DrrError::io(path, e))
}

/// Subtracts column means. Returns the centered matrix and the means.
pub fn center(x: &DataMatrix) -> (DataMatrix, Vec<f64>) {
    let mean = x.column_means();
    let c = Mat::from_fn(x.nrows(), x.ncols(), |i, j| x.get(i, j) - mean[j]);
    (DataMatrix::from_mat_unchecked(c), mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    /// Training-set size: `floor(train_fraction * n)`; the remainder goes to test.
    pub fn train_size(&self, n: usize) -> Result<usize> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DrrError::InvalidParameter(format!(
                "train fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        let k = (self.train_fraction * n as f64).floor() as usize;
        if k < 1 || k + 1 > n {
            return Err(DrrError::InvalidParameter(format!(
                "train fraction {} leaves an empty side for N={n}",
                self.train_fraction
            )));
        }
        Ok(k)
    }

    /// Shuffled (train, test) row indices.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        let k = self.train_size(n)?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let test = perm.split_off(k);
        Ok((perm, test))
    }
}

pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let (tr, te) = spec.indices(ds.len())?;
    Ok((ds.select_rows(&tr), ds.select_rows(&te)))
}
