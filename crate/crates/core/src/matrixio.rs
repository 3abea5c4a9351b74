//! Feature matrices, labelled multi-view datasets and their on-disk formats.
//!
//! Matrices are stored features × samples: row `i` is feature dimension `i`,
//! column `j` is sample `j`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::codec;
use crate::error::{Error, Result};

/// A finite, non-empty `p × n` matrix of features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "feature matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (col, row) = (pos / data.nrows(), pos % data.nrows());
            return Err(Error::Data(format!(
                "non-finite entry {} at ({row}, {col})",
                data[(row, col)]
            )));
        }
        Ok(FeatureMatrix { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(p, n, |i, j| rows[i][j]))
    }

    /// Feature dimension.
    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    /// Sample count.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }
}

impl AsRef<DMatrix<f64>> for FeatureMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Fmat,
}

impl MatrixFormat {
    /// Picks the format from a file extension; anything but `.csv` is `fmat`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Fmat,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            MatrixFormat::Csv => "csv",
            MatrixFormat::Fmat => "fmat",
        }
    }
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MatrixFormat::Fmat => FeatureMatrix::new(codec::decode_matrix(&bytes)?),
        MatrixFormat::Csv => parse_csv(&bytes),
    }
}

fn parse_csv(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("csv line {}: {e}", line + 1)))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("csv line {}: bad number {field:?}", line + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("csv contains no rows".into()));
    }
    FeatureMatrix::from_rows(&rows)
}

pub fn save_matrix(m: &FeatureMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Fmat => codec::encode_matrix(m.data()),
        MatrixFormat::Csv => matrix_to_csv(m.data()).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Shortest round-trip decimal rendering, one matrix row per line.
pub(crate) fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("{}: line {}: bad label {l:?}", path.display(), i + 1)))
        })
        .collect()
}

pub fn save_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Path of the `.labels` sidecar for a CSV matrix file.
pub fn labels_sidecar(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".labels");
    PathBuf::from(os)
}

/// One view's features plus the per-feature training mean once centred.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub name: String,
    pub matrix: FeatureMatrix,
    pub mean: DVector<f64>,
    pub centered: bool,
}

impl FeatureSet {
    pub fn new(name: impl Into<String>, matrix: FeatureMatrix) -> Self {
        let p = matrix.p();
        FeatureSet {
            name: name.into(),
            matrix,
            mean: DVector::zeros(p),
            centered: false,
        }
    }

    pub fn p(&self) -> usize {
        self.matrix.p()
    }

    /// Samples with any stored centring undone.
    pub fn raw(&self) -> DMatrix<f64> {
        let mut m = self.matrix.data().clone();
        if self.centered {
            for mut col in m.column_iter_mut() {
                col += &self.mean;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

pub(crate) fn row_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.ncols() as f64;
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum() / n))
}

pub(crate) fn subtract_column(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        col -= mean;
    }
    out
}

/// Subtracts per-feature means from every sample.
///
/// Re-centring an already centred set folds the (tiny) residual mean into
/// `mean`, so `mean` always refers to the original uncentred data.
pub fn center_samples(fs: &FeatureSet) -> FeatureSet {
    let data = fs.matrix.data();
    let residual = row_means(data);
    let centered = subtract_column(data, &residual);
    let mean = if fs.centered {
        &fs.mean + &residual
    } else {
        residual
    };
    FeatureSet {
        name: fs.name.clone(),
        matrix: FeatureMatrix { data: centered },
        mean,
        centered: true,
    }
}

/// Auto tolerance for [`numerical_rank`]: `max(p, n) · ε · σ_max`.
pub fn default_rank_tolerance(p: usize, n: usize, sigma_max: f64) -> f64 {
    p.max(n) as f64 * f64::EPSILON * sigma_max
}

/// Number of singular values strictly above `tol` (auto when `None`).
pub fn numerical_rank(m: &DMatrix<f64>, tol: Option<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let tol = tol.unwrap_or_else(|| default_rank_tolerance(m.nrows(), m.ncols(), sv.max()));
    sv.iter().filter(|&&s| s > tol).count()
}

/// Several views over the same `n` samples, with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub views: Vec<FeatureSet>,
    pub labels: Vec<usize>,
    pub class_count: usize,
}

impl LabeledDataset {
    pub fn new(views: Vec<FeatureSet>, labels: Vec<usize>, class_count: usize) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Empty("dataset has no views".into()));
        }
        let n = labels.len();
        for v in &views {
            if v.n() != n {
                return Err(Error::Dimension(format!(
                    "view {:?} has {} samples, labels have {n}",
                    v.name,
                    v.n()
                )));
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Label(format!("label {bad} >= class_count {class_count}")));
        }
        Ok(LabeledDataset {
            views,
            labels,
            class_count,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// Writes every view, the labels and a `key=value` manifest into `dir`.
///
/// Files are named `{stem}_view{i}.{ext}` and `{stem}.labels`; the manifest
/// is `{stem}.manifest` and refers to them by relative path.
pub fn save_dataset(
    ds: &LabeledDataset,
    dir: impl AsRef<Path>,
    stem: &str,
    format: MatrixFormat,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = format!("class_count={}\n", ds.class_count);
    let label_file = format!("{stem}.labels");
    save_labels(&ds.labels, dir.join(&label_file))?;
    manifest.push_str(&format!("labels={label_file}\n"));
    for (i, view) in ds.views.iter().enumerate() {
        let file = format!("{stem}_view{i}.{}", format.extension());
        save_matrix(&view.matrix, dir.join(&file), format)?;
        manifest.push_str(&format!("view.{i}={file}\n"));
        manifest.push_str(&format!("name.{i}={}\n", view.name));
    }
    let path = dir.join(format!("{stem}.manifest"));
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_dataset(manifest: impl AsRef<Path>) -> Result<LabeledDataset> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let ini = ini::Ini::load_from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", manifest.display())))?;
    let props = ini.general_section();
    let base = manifest.parent().unwrap_or(Path::new("."));
    let get = |key: &str| {
        props
            .get(key)
            .ok_or_else(|| Error::Parse(format!("{}: missing key {key:?}", manifest.display())))
    };
    let class_count: usize = get("class_count")?
        .parse()
        .map_err(|_| Error::Parse("class_count is not an integer".into()))?;
    let labels = load_labels(base.join(get("labels")?))?;
    let mut views = Vec::new();
    while let Some(file) = props.get(format!("view.{}", views.len())) {
        let i = views.len();
        let path = base.join(file);
        let matrix = load_matrix(&path, MatrixFormat::from_path(&path))?;
        let name = props
            .get(format!("name.{i}"))
            .map_or_else(|| format!("view{i}"), str::to_owned);
        views.push(FeatureSet::new(name, matrix));
    }
    LabeledDataset::new(views, labels, class_count)
}
