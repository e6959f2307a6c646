//! Multi-view datasets and their on-disk format.
//!
//! A dataset is stored as two files sharing a stem:
//!
//! * `<stem>.json`: metadata sidecar ([`Sidecar`]) with `format`, `version`,
//!   `n`, `num_views`, per-view layout, target layout, `seed`, `generator`,
//!   `field`, the data file name, its byte length and SHA-256 digest;
//! * `<stem>.bin`: raw payload. Each view in order, then the targets, each
//!   block row-major (`n` rows of `dim` values). Real values are IEEE-754
//!   `f64` little-endian; symbols and labels are `i64` little-endian.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{DibError, Result};
use crate::info::{FieldFactor, LinearGaussianModel};

pub const DATASET_FORMAT: &str = "dib-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum ViewData {
    Real { dim: usize, values: Vec<f64> },
    Symbols { alphabet: usize, symbols: Vec<i64> },
}

impl ViewData {
    /// Width of one sample: `dim` for real views, 1 for symbols.
    pub fn width(&self) -> usize {
        match self {
            ViewData::Real { dim, .. } => *dim,
            ViewData::Symbols { .. } => 1,
        }
    }

    /// Sample `i` as reals (symbols are cast).
    pub fn row(&self, i: usize) -> Vec<f64> {
        match self {
            ViewData::Real { dim, values } => values[i * dim..(i + 1) * dim].to_vec(),
            ViewData::Symbols { symbols, .. } => vec![symbols[i] as f64],
        }
    }

    fn select(&self, idx: &[usize]) -> ViewData {
        match self {
            ViewData::Real { dim, values } => ViewData::Real {
                dim: *dim,
                values: idx.iter().flat_map(|&i| values[i * dim..(i + 1) * dim].iter().copied()).collect(),
            },
            ViewData::Symbols { alphabet, symbols } => ViewData::Symbols {
                alphabet: *alphabet,
                symbols: idx.iter().map(|&i| symbols[i]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Real { dim: usize, values: Vec<f64> },
    Labels { classes: usize, labels: Vec<i64> },
}

impl Targets {
    fn rows(&self) -> usize {
        match self {
            Targets::Real { dim, values } => values.len() / (*dim).max(1),
            Targets::Labels { labels, .. } => labels.len(),
        }
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Real { dim, values } => Targets::Real {
                dim: *dim,
                values: idx.iter().flat_map(|&i| values[i * dim..(i + 1) * dim].iter().copied()).collect(),
            },
            Targets::Labels { classes, labels } => Targets::Labels {
                classes: *classes,
                labels: idx.iter().map(|&i| labels[i]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub seed: u64,
    #[serde(default)]
    pub field: FieldFactor,
    /// Differential or discrete entropy of the target when the generator
    /// knows it, in nats.
    #[serde(default)]
    pub target_entropy: Option<f64>,
    #[serde(default)]
    pub model: Option<LinearGaussianModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiviewDataset {
    n: usize,
    views: Vec<ViewData>,
    targets: Targets,
    meta: DatasetMeta,
}

impl MultiviewDataset {
    pub fn new(views: Vec<ViewData>, targets: Targets, meta: DatasetMeta) -> Result<Self> {
        if views.is_empty() {
            return Err(DibError::Dimension("dataset needs at least one view".into()));
        }
        let n = targets.rows();
        for (k, v) in views.iter().enumerate() {
            let ok = match v {
                ViewData::Real { dim, values } => *dim > 0 && values.len() == n * dim,
                ViewData::Symbols { alphabet, symbols } => {
                    symbols.len() == n && symbols.iter().all(|&s| s >= 0 && (s as usize) < *alphabet)
                }
            };
            if !ok {
                return Err(DibError::Dimension(format!("view {k} does not hold {n} valid samples")));
            }
        }
        match &targets {
            Targets::Real { dim, values } if *dim == 0 || values.len() % dim != 0 => {
                return Err(DibError::Dimension("target block is ragged".into()));
            }
            Targets::Labels { classes, labels } if labels.iter().any(|&l| l < 0 || l as usize >= *classes) => {
                return Err(DibError::Dimension("label outside 0..classes".into()));
            }
            _ => {}
        }
        Ok(MultiviewDataset {
            n,
            views,
            targets,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[ViewData] {
        &self.views
    }

    pub fn view(&self, k: usize) -> &ViewData {
        &self.views[k]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    pub fn view_widths(&self) -> Vec<usize> {
        self.views.iter().map(ViewData::width).collect()
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n) {
            return Err(DibError::Dimension(format!("row {bad} out of range (n = {})", self.n)));
        }
        MultiviewDataset::new(
            self.views.iter().map(|v| v.select(idx)).collect(),
            self.targets.select(idx),
            self.meta.clone(),
        )
    }

    /// First `n_first` rows and the remainder.
    pub fn split(&self, n_first: usize) -> Result<(Self, Self)> {
        if n_first > self.n {
            return Err(DibError::Usage(format!("cannot take {n_first} of {} rows", self.n)));
        }
        let a: Vec<usize> = (0..n_first).collect();
        let b: Vec<usize> = (n_first..self.n).collect();
        Ok((self.subset(&a)?, self.subset(&b)?))
    }

    /// Sample covariance (divisor `n`) of `(Y, X_1, ..., X_K)`; real data only.
    pub fn empirical_joint_cov(&self) -> Result<DMatrix<f64>> {
        let Targets::Real { dim: ny, values: y } = &self.targets else {
            return Err(DibError::Usage("empirical covariance needs real targets".into()));
        };
        let mut blocks: Vec<(usize, &[f64])> = vec![(*ny, y.as_slice())];
        for v in &self.views {
            match v {
                ViewData::Real { dim, values } => blocks.push((*dim, values.as_slice())),
                ViewData::Symbols { .. } => {
                    return Err(DibError::Usage("empirical covariance needs real views".into()))
                }
            }
        }
        let total: usize = blocks.iter().map(|b| b.0).sum();
        let n = self.n as f64;
        let mut data = DMatrix::zeros(self.n, total);
        let mut off = 0;
        for (d, vals) in blocks {
            for i in 0..self.n {
                for j in 0..d {
                    data[(i, off + j)] = vals[i * d + j];
                }
            }
            off += d;
        }
        let mean = data.row_mean();
        for mut row in data.row_iter_mut() {
            row -= &mean;
        }
        Ok(data.transpose() * &data / n)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Layout {
    Real { dim: usize },
    Symbols { alphabet: usize },
    Labels { classes: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    n: usize,
    num_views: usize,
    views: Vec<Layout>,
    target: Layout,
    seed: u64,
    generator: String,
    field: FieldFactor,
    #[serde(default)]
    target_entropy: Option<f64>,
    #[serde(default)]
    model: Option<LinearGaussianModel>,
    data_file: String,
    byte_length: u64,
    sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn stem_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

fn payload(ds: &MultiviewDataset) -> Vec<u8> {
    let mut out = Vec::new();
    for v in &ds.views {
        match v {
            ViewData::Real { values, .. } => values.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            ViewData::Symbols { symbols, .. } => symbols.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
    }
    match &ds.targets {
        Targets::Real { values, .. } => values.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Targets::Labels { labels, .. } => labels.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

/// Writes `<stem>.json` and `<stem>.bin`; `path`'s extension is replaced.
/// Returns the sidecar path.
pub fn write_dataset(ds: &MultiviewDataset, path: impl AsRef<Path>) -> Result<PathBuf> {
    let (json_path, bin_path) = stem_paths(path.as_ref());
    let bytes = payload(ds);
    let sidecar = Sidecar {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        n: ds.n,
        num_views: ds.views.len(),
        views: ds
            .views
            .iter()
            .map(|v| match v {
                ViewData::Real { dim, .. } => Layout::Real { dim: *dim },
                ViewData::Symbols { alphabet, .. } => Layout::Symbols { alphabet: *alphabet },
            })
            .collect(),
        target: match &ds.targets {
            Targets::Real { dim, .. } => Layout::Real { dim: *dim },
            Targets::Labels { classes, .. } => Layout::Labels { classes: *classes },
        },
        seed: ds.meta.seed,
        generator: ds.meta.generator.clone(),
        field: ds.meta.field,
        target_entropy: ds.meta.target_entropy,
        model: ds.meta.model.clone(),
        data_file: bin_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        byte_length: bytes.len() as u64,
        sha256: hex(&Sha256::digest(&bytes)),
    };
    fs::write(&bin_path, &bytes).map_err(|e| DibError::io(&bin_path, e))?;
    let mut f = fs::File::create(&json_path).map_err(|e| DibError::io(&json_path, e))?;
    serde_json::to_writer_pretty(&mut f, &sidecar)?;
    f.write_all(b"\n").map_err(|e| DibError::io(&json_path, e))?;
    Ok(json_path)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take8(&mut self) -> [u8; 8] {
        let chunk: [u8; 8] = self.bytes[self.pos..self.pos + 8].try_into().expect("length checked");
        self.pos += 8;
        chunk
    }

    fn f64s(&mut self, count: usize) -> Vec<f64> {
        (0..count).map(|_| f64::from_le_bytes(self.take8())).collect()
    }

    fn i64s(&mut self, count: usize) -> Vec<i64> {
        (0..count).map(|_| i64::from_le_bytes(self.take8())).collect()
    }
}

/// Reads a dataset from its sidecar (or any path sharing its stem).
pub fn read_dataset(path: impl AsRef<Path>) -> Result<MultiviewDataset> {
    let (json_path, _) = stem_paths(path.as_ref());
    let text = fs::read_to_string(&json_path).map_err(|e| DibError::io(&json_path, e))?;
    let sc: Sidecar =
        serde_json::from_str(&text).map_err(|e| DibError::format(&json_path, format!("bad header: {e}")))?;
    if sc.format != DATASET_FORMAT || sc.version != DATASET_VERSION {
        return Err(DibError::format(
            &json_path,
            format!("unsupported format {} v{}", sc.format, sc.version),
        ));
    }
    if sc.views.len() != sc.num_views {
        return Err(DibError::format(&json_path, "num_views disagrees with view list"));
    }
    let bin_path = json_path.with_file_name(&sc.data_file);
    let bytes = fs::read(&bin_path).map_err(|e| DibError::io(&bin_path, e))?;
    let width = |l: &Layout| match l {
        Layout::Real { dim } => *dim,
        _ => 1,
    };
    let expected = sc
        .views
        .iter()
        .chain(std::iter::once(&sc.target))
        .map(|l| width(l) as u64 * sc.n as u64 * 8)
        .sum::<u64>();
    if bytes.len() as u64 != expected || sc.byte_length != expected {
        return Err(DibError::format(
            &bin_path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let digest = hex(&Sha256::digest(&bytes));
    if digest != sc.sha256 {
        return Err(DibError::Checksum {
            path: bin_path.display().to_string(),
            expected: sc.sha256,
            found: digest,
        });
    }
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let mut views = Vec::with_capacity(sc.num_views);
    for l in &sc.views {
        views.push(match l {
            Layout::Real { dim } => ViewData::Real {
                dim: *dim,
                values: cur.f64s(sc.n * dim),
            },
            Layout::Symbols { alphabet } => ViewData::Symbols {
                alphabet: *alphabet,
                symbols: cur.i64s(sc.n),
            },
            Layout::Labels { .. } => return Err(DibError::format(&json_path, "labels layout used for a view")),
        });
    }
    let targets = match sc.target {
        Layout::Real { dim } => Targets::Real {
            dim,
            values: cur.f64s(sc.n * dim),
        },
        Layout::Labels { classes } => Targets::Labels {
            classes,
            labels: cur.i64s(sc.n),
        },
        Layout::Symbols { .. } => return Err(DibError::format(&json_path, "symbols layout used for targets")),
    };
    MultiviewDataset::new(
        views,
        targets,
        DatasetMeta {
            generator: sc.generator,
            seed: sc.seed,
            field: sc.field,
            target_entropy: sc.target_entropy,
            model: sc.model,
        },
    )
    .map_err(|e| DibError::format(&json_path, e.to_string()))
}

/// One row per sample. Columns `x{k}_{d}` (both 1-based; symbol views get a
/// single `x{k}` column), then `y_{d}` or `y` for labels.
pub fn write_csv(ds: &MultiviewDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut header = Vec::new();
    for (k, v) in ds.views.iter().enumerate() {
        match v {
            ViewData::Real { dim, .. } => (1..=*dim).for_each(|d| header.push(format!("x{}_{d}", k + 1))),
            ViewData::Symbols { .. } => header.push(format!("x{}", k + 1)),
        }
    }
    match &ds.targets {
        Targets::Real { dim, .. } => (1..=*dim).for_each(|d| header.push(format!("y_{d}"))),
        Targets::Labels { .. } => header.push("y".into()),
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..ds.n {
        let mut cells: Vec<String> = Vec::with_capacity(header.len());
        for v in &ds.views {
            match v {
                ViewData::Real { dim, values } => cells.extend(values[i * dim..(i + 1) * dim].iter().map(|x| format!("{x:?}"))),
                ViewData::Symbols { symbols, .. } => cells.push(symbols[i].to_string()),
            }
        }
        match &ds.targets {
            Targets::Real { dim, values } => cells.extend(values[i * dim..(i + 1) * dim].iter().map(|x| format!("{x:?}"))),
            Targets::Labels { labels, .. } => cells.push(labels[i].to_string()),
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| DibError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{random_model, sample_classification, sample_gaussian};

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let m = random_model(2, &[3, 3], 1).unwrap();
        let ds = sample_gaussian(&m, 257, 2).unwrap();
        let p = write_dataset(&ds, dir.path().join("g")).unwrap();
        let back = read_dataset(&p).unwrap();
        assert_eq!(back, ds);

        let cls = sample_classification(4, &[2, 5], 2.0, 100, 3).unwrap();
        write_dataset(&cls, dir.path().join("c.json")).unwrap();
        assert_eq!(read_dataset(dir.path().join("c.bin")).unwrap(), cls);
    }

    #[test]
    fn truncated_and_corrupt_files_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let m = random_model(1, &[2], 1).unwrap();
        let ds = sample_gaussian(&m, 10, 2).unwrap();
        let p = write_dataset(&ds, dir.path().join("d")).unwrap();
        let bin = dir.path().join("d.bin");
        let mut bytes = fs::read(&bin).unwrap();
        bytes[3] ^= 0x40;
        fs::write(&bin, &bytes).unwrap();
        assert!(matches!(read_dataset(&p), Err(DibError::Checksum { .. })));
        bytes.truncate(bytes.len() - 5);
        fs::write(&bin, &bytes).unwrap();
        assert!(matches!(read_dataset(&p), Err(DibError::Format { .. })));
        fs::write(&p, "{\"format\": ").unwrap();
        assert!(matches!(read_dataset(&p), Err(DibError::Format { .. })));
    }

    #[test]
    fn csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let m = random_model(2, &[3, 1], 1).unwrap();
        let ds = sample_gaussian(&m, 4, 2).unwrap();
        let p = dir.path().join("d.csv");
        write_csv(&ds, &p).unwrap();
        let text = fs::read_to_string(p).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "x1_1,x1_2,x1_3,x2_1,y_1,y_2");
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn split_sizes() {
        let m = random_model(1, &[3, 3], 1).unwrap();
        let ds = sample_gaussian(&m, 40_000, 2).unwrap();
        let (a, b) = ds.split(30_000).unwrap();
        assert_eq!((a.n(), b.n()), (30_000, 10_000));
        assert_eq!(a.view(1).row(5), ds.view(1).row(5));
        assert_eq!(b.view(0).row(0), ds.view(0).row(30_000));
    }

    #[test]
    fn ragged_views_rejected() {
        let r = MultiviewDataset::new(
            vec![ViewData::Real {
                dim: 2,
                values: vec![0.0; 5],
            }],
            Targets::Real {
                dim: 1,
                values: vec![0.0; 3],
            },
            DatasetMeta {
                generator: "t".into(),
                seed: 0,
                field: FieldFactor::Real,
                target_entropy: None,
                model: None,
            },
        );
        assert!(matches!(r, Err(DibError::Dimension(_))));
    }
}
