//! CSV node tables, JSON summaries and the TOML run configuration.
//!
//! Node tables have one row per node in row-major order. Poles are written as
//! `-inf`; obstacles may also contain `inf`.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{make_closed_form, BackgroundForm, ReferenceMetric, VolumeForm};
use crate::grid::GridTorus;
use crate::linalg::SymMat;
use crate::ma::DiscreteMeasure;
use crate::scalar::Scalar;

/// Shortest round-trip text for a value, with `inf`/`-inf` tokens.
pub fn format_value<T: Scalar>(v: T) -> String {
    let x = v.as_f64();
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn parse_value<T: Scalar>(s: &str) -> Result<T> {
    let s = s.trim();
    let x = match s {
        "inf" | "+inf" => f64::INFINITY,
        "-inf" => f64::NEG_INFINITY,
        _ => s
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("bad number {s:?}: {e}")))?,
    };
    if x.is_nan() {
        return Err(Error::Parse("NaN is not a valid value".into()));
    }
    Ok(T::of(x))
}

/// Writes `node,<column>` rows.
pub fn write_node_table<T: Scalar, W: Write>(out: W, column: &str, values: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", column])?;
    for (i, &v) in values.iter().enumerate() {
        w.write_record([i.to_string(), format_value(v)])?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<R: Read>(input: R, n: usize, width: usize) -> Result<Vec<Vec<String>>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers()?.clone();
    if header.len() != width + 1 || &header[0] != "node" {
        return Err(Error::Parse(format!(
            "expected header `node` plus {width} columns, got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows: Vec<Option<Vec<String>>> = vec![None; n];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != width + 1 {
            return Err(Error::Parse(format!("row has {} fields", rec.len())));
        }
        let idx: usize = rec[0]
            .parse()
            .map_err(|e| Error::Parse(format!("bad node index {:?}: {e}", &rec[0])))?;
        if idx >= n {
            return Err(Error::DimensionMismatch(format!("node {idx} outside a grid of {n}")));
        }
        if rows[idx].is_some() {
            return Err(Error::Parse(format!("node {idx} listed twice")));
        }
        rows[idx] = Some(rec.iter().skip(1).map(str::to_owned).collect());
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| Error::DimensionMismatch(format!("node {i} missing"))))
        .collect()
}

/// Reads a `node,value` table for a grid of `n` nodes.
pub fn read_node_table<T: Scalar, R: Read>(input: R, n: usize) -> Result<Vec<T>> {
    read_rows(input, n, 1)?
        .iter()
        .map(|r| parse_value(&r[0]))
        .collect()
}

/// Writes `node,g00,g01,...` with the full matrix in row-major order.
pub fn write_matrix_table<T: Scalar, W: Write>(out: W, d: usize, field: &[SymMat<T>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("g{i}{j}"));
        }
    }
    w.write_record(&header)?;
    for (n, m) in field.iter().enumerate() {
        let mut row = vec![n.to_string()];
        for i in 0..d {
            for j in 0..d {
                row.push(format_value(m.get(i, j)));
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_table<T: Scalar, R: Read>(input: R, grid: &GridTorus) -> Result<Vec<SymMat<T>>> {
    let d = grid.dim();
    read_rows(input, grid.len(), d * d)?
        .iter()
        .map(|r| {
            let vals = r.iter().map(|s| parse_value::<T>(s)).collect::<Result<Vec<T>>>()?;
            let rows: Vec<Vec<T>> = vals.chunks(d).map(<[T]>::to_vec).collect();
            SymMat::from_rows(&rows)
        })
        .collect()
}

pub fn write_measure<T: Scalar, W: Write>(out: W, m: &DiscreteMeasure<T>) -> Result<()> {
    write_node_table(out, "weight", m.weights())
}

pub fn read_node_file<T: Scalar>(path: &Path, n: usize) -> Result<Vec<T>> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))?;
    read_node_table(f, n)
}

pub fn write_node_file<T: Scalar>(path: &Path, column: &str, values: &[T]) -> Result<()> {
    write_node_table(std::fs::File::create(path)?, column, values)
}

/// Pretty JSON followed by a newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub sizes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormKindConfig {
    Closed,
    General,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FormSection {
    pub kind: FormKindConfig,
    /// Constant part of a closed form (rows).
    #[serde(rename = "A", default)]
    pub a: Option<Vec<Vec<f64>>>,
    pub tau_file: Option<PathBuf>,
    /// Matrix table of a general form.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileSection {
    pub file: Option<PathBuf>,
}

/// Operation parameters; every field has a default and can be overridden from the command line.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub lambda: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub eps_list: Option<Vec<f64>>,
    pub p: Option<f64>,
    pub c_bound: Option<f64>,
    pub potential_file: Option<PathBuf>,
    pub potentials: Option<Vec<PathBuf>>,
    pub density_file: Option<PathBuf>,
    pub obstacle_file: Option<PathBuf>,
    pub rho_file: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSection,
    pub form: FormSection,
    #[serde(default)]
    pub metric: FileSection,
    #[serde(default)]
    pub volume: FileSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Geometry assembled from a configuration.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: GridTorus,
    pub form: BackgroundForm<f64>,
    pub metric: ReferenceMetric<f64>,
    pub volume: VolumeForm<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut c: RunConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        c.base_dir = base_dir.to_path_buf();
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn grid(&self) -> Result<GridTorus> {
        if self.grid.sizes.len() != self.grid.dim {
            return Err(Error::InvalidArgument(format!(
                "grid.dim = {} but {} sizes given",
                self.grid.dim,
                self.grid.sizes.len()
            )));
        }
        GridTorus::new(&self.grid.sizes)
    }

    pub fn node_file(&self, p: &Path, grid: &GridTorus) -> Result<Vec<f64>> {
        read_node_file(&self.resolve(p), grid.len())
    }

    fn matrix_file(&self, p: &Path, grid: &GridTorus) -> Result<Vec<SymMat<f64>>> {
        let path = self.resolve(p);
        let f = std::fs::File::open(&path)
            .map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))?;
        read_matrix_table(f, grid)
    }

    pub fn problem(&self) -> Result<Problem> {
        let grid = self.grid()?;
        let form = match self.form.kind {
            FormKindConfig::Closed => {
                let rows = self
                    .form
                    .a
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("closed form needs form.A".into()))?;
                let a = SymMat::from_rows(rows)?;
                let tau = match &self.form.tau_file {
                    Some(p) => self.node_file(p, &grid)?,
                    None => vec![0.0; grid.len()],
                };
                make_closed_form(&grid, a, &tau)?
            }
            FormKindConfig::General => {
                let p = self
                    .form
                    .file
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("general form needs form.file".into()))?;
                BackgroundForm::general(&grid, self.matrix_file(p, &grid)?)?
            }
        };
        let metric = match &self.metric.file {
            Some(p) => ReferenceMetric::new(&grid, self.matrix_file(p, &grid)?, &self.tolerances)?,
            None => ReferenceMetric::identity(&grid),
        };
        let volume = match &self.volume.file {
            Some(p) => VolumeForm::new(&grid, self.node_file(p, &grid)?)?,
            None => VolumeForm::uniform(&grid),
        };
        Ok(Problem {
            grid,
            form,
            metric,
            volume,
        })
    }
}
