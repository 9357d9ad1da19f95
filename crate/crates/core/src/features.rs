//! Feature and label containers plus the CSV, binary and head-file formats.
//!
//! CSV features carry a header `h0,h1,...` with an optional trailing `label`
//! column. The binary layout is `FEAT`, then little-endian `u32` version,
//! `u32` N, `u32` H, `u8` has_labels, `N*H` `f32` values row-major and, when
//! present, `N` `u32` labels. Head files are plain CSV with H rows of K
//! weights followed by one bias row.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::SoftmaxHead;

const MAGIC: &[u8; 4] = b"FEAT";
const BINARY_VERSION: u32 = 1;

/// `N × H` row-major matrix of final-layer activations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n: usize,
    h: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, h: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("feature matrix has no rows"));
        }
        if h == 0 {
            return Err(Error::InvalidParameter(
                "feature dimension must be >= 1".into(),
            ));
        }
        if data.len() != n * h {
            return Err(Error::DimensionMismatch {
                context: "feature matrix data",
                expected: n * h,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(Self { n, h, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let h = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * h);
        for row in rows {
            if row.len() != h {
                return Err(Error::DimensionMismatch {
                    context: "feature row",
                    expected: h,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), h, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.h..(i + 1) * self.h]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.h)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.h, &self.data)
    }

    /// Rows at the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.h);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.h, data)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.h != self.h {
            return Err(Error::DimensionMismatch {
                context: "concatenated features",
                expected: self.h,
                got: other.h,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Self::new(self.n + other.n, self.h, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.n, self.h, self.data.iter().map(|v| f(*v)).collect())
    }
}

/// Class labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter(
                "label set needs at least one class".into(),
            ));
        }
        if let Some(&label) = labels.iter().find(|l| **l >= k) {
            return Err(Error::LabelOutOfRange { label, k });
        }
        Ok(Self { labels, k })
    }

    /// Labels with K taken as one past the largest label.
    pub fn infer(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            k: self.k,
        }
    }

    pub(crate) fn check_pairs(&self, features: &FeatureMatrix) -> Result<()> {
        if self.len() != features.n() {
            return Err(Error::DimensionMismatch {
                context: "labels vs feature rows",
                expected: features.n(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Binary,
}

impl FeatureFormat {
    /// `.csv` maps to CSV, anything else to the binary layout.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => FeatureFormat::Csv,
            _ => FeatureFormat::Binary,
        }
    }
}

/// Reads features and optional labels. When `k` is given, labels are
/// validated against it; otherwise K is inferred from the largest label.
pub fn load_features(
    path: &Path,
    format: FeatureFormat,
    k: Option<usize>,
) -> Result<(FeatureMatrix, Option<LabelVector>)> {
    let (features, labels) = match format {
        FeatureFormat::Csv => read_csv(path)?,
        FeatureFormat::Binary => read_binary(path)?,
    };
    let labels = match (labels, k) {
        (Some(l), Some(k)) => Some(LabelVector::new(l, k)?),
        (Some(l), None) => Some(LabelVector::infer(l)?),
        (None, _) => None,
    };
    Ok((features, labels))
}

pub fn save_features(
    path: &Path,
    format: FeatureFormat,
    features: &FeatureMatrix,
    labels: Option<&LabelVector>,
) -> Result<()> {
    if let Some(l) = labels {
        l.check_pairs(features)?;
    }
    match format {
        FeatureFormat::Csv => write_csv(path, features, labels),
        FeatureFormat::Binary => write_binary(path, features, labels),
    }
}

fn csv_error(e: csv::Error, path: &Path) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format("csv", format!("{other:?}")),
    }
}

fn read_csv(path: &Path) -> Result<(FeatureMatrix, Option<Vec<usize>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|e| csv_error(e, path))?.clone();
    let mut names: Vec<&str> = header.iter().collect();
    let has_labels = names.last() == Some(&"label");
    if has_labels {
        names.pop();
    }
    if names.is_empty() {
        return Err(Error::format("csv", "header has no feature columns"));
    }
    for (i, name) in names.iter().enumerate() {
        if *name != format!("h{i}") {
            return Err(Error::format(
                "csv",
                format!("header column {i} is {name:?}, expected \"h{i}\""),
            ));
        }
    }
    let h = names.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(e, path))?;
        let row = line + 2;
        if record.len() != h + usize::from(has_labels) {
            return Err(Error::format(
                "csv",
                format!(
                    "row {row} has {} fields, expected {}",
                    record.len(),
                    h + usize::from(has_labels)
                ),
            ));
        }
        for field in record.iter().take(h) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::format("csv", format!("row {row}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::NonFinite("csv feature value"));
            }
            data.push(v);
        }
        if has_labels {
            let field = &record[h];
            let label: usize = field
                .parse()
                .map_err(|_| Error::format("csv", format!("row {row}: bad label {field:?}")))?;
            labels.push(label);
        }
    }
    let n = data.len() / h;
    Ok((
        FeatureMatrix::new(n, h, data)?,
        has_labels.then_some(labels),
    ))
}

fn write_csv(path: &Path, features: &FeatureMatrix, labels: Option<&LabelVector>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<String> = (0..features.h()).map(|i| format!("h{i}")).collect();
    if labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header).map_err(|e| csv_error(e, path))?;
    for (i, row) in features.rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            record.push(l.as_slice()[i].to_string());
        }
        w.write_record(&record).map_err(|e| csv_error(e, path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_binary(path: &Path) -> Result<(FeatureMatrix, Option<Vec<usize>>)> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut cursor = ByteCursor {
        bytes: &bytes,
        pos: 0,
    };
    if cursor.take(4)? != MAGIC {
        return Err(Error::format("binary", "missing FEAT magic"));
    }
    let version = cursor.u32()?;
    if version != BINARY_VERSION {
        return Err(Error::format(
            "binary",
            format!("unsupported version {version}"),
        ));
    }
    let n = cursor.u32()? as usize;
    let h = cursor.u32()? as usize;
    let has_labels = match cursor.take(1)?[0] {
        0 => false,
        1 => true,
        b => return Err(Error::format("binary", format!("has_labels byte is {b}"))),
    };
    let mut data = Vec::with_capacity(n * h);
    for _ in 0..n * h {
        let v = f32::from_le_bytes(cursor.array()?);
        if !v.is_finite() {
            return Err(Error::NonFinite("binary feature value"));
        }
        data.push(f64::from(v));
    }
    let labels = if has_labels {
        Some(
            (0..n)
                .map(|_| cursor.u32().map(|v| v as usize))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    if cursor.pos != bytes.len() {
        return Err(Error::format("binary", "trailing bytes after payload"));
    }
    Ok((FeatureMatrix::new(n, h, data)?, labels))
}

fn write_binary(path: &Path, features: &FeatureMatrix, labels: Option<&LabelVector>) -> Result<()> {
    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{what} {v} exceeds u32")))
    };
    let mut out = Vec::with_capacity(17 + features.as_slice().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&to_u32(features.n(), "row count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(features.h(), "feature dimension")?.to_le_bytes());
    out.push(u8::from(labels.is_some()));
    for v in features.as_slice() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    if let Some(l) = labels {
        for &label in l.as_slice() {
            out.extend_from_slice(&to_u32(label, "label")?.to_le_bytes());
        }
    }
    let mut file = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    file.write_all(&out)
        .and_then(|_| file.flush())
        .map_err(|e| Error::io(path, e))
}

struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(Error::format("binary", "file truncated"));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn array(&mut self) -> Result<[u8; 4]> {
        let mut a = [0u8; 4];
        a.copy_from_slice(self.take(4)?);
        Ok(a)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
}

pub fn load_head(path: &Path) -> Result<SoftmaxHead> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, path))?;
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::format("head csv", format!("cannot parse {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::format(
            "head csv",
            "need at least one weight row and a bias row",
        ));
    }
    let bias = rows.pop().unwrap_or_default();
    let (h, k) = (rows.len(), bias.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != k) {
        return Err(Error::format(
            "head csv",
            format!("weight row has {} columns, bias row has {k}", bad.len()),
        ));
    }
    let w = DMatrix::from_fn(h, k, |r, c| rows[r][c]);
    SoftmaxHead::new(w, DVector::from_vec(bias))
}

pub fn save_head(path: &Path, head: &SoftmaxHead) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    for r in 0..head.h() {
        let row: Vec<String> = (0..head.k())
            .map(|c| head.weights()[(r, c)].to_string())
            .collect();
        w.write_record(&row).map_err(|e| csv_error(e, path))?;
    }
    let bias: Vec<String> = head.bias().iter().map(|v| v.to_string()).collect();
    w.write_record(&bias).map_err(|e| csv_error(e, path))?;
    w.flush().map_err(|e| Error::io(path, e))
}
