//! Files in and out: numeric CSV datasets, TOML run configs, atomic writes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::inference::PipelineConfig;

/// Named, equally long real-valued columns sampled on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub sample_interval: f64,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>, sample_interval: f64) -> Result<Self> {
        let d = Self { names, columns, sample_interval };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.names.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} columns",
                self.names.len(),
                self.columns.len()
            )));
        }
        if let Some(c) = self.columns.first() {
            if self.columns.iter().any(|o| o.len() != c.len()) {
                return Err(Error::InvalidInput("columns differ in length".into()));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for n in &self.names {
            if !seen.insert(n.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate column name {n:?}")));
            }
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return Err(Error::InvalidInput("sample_interval must be positive".into()));
        }
        Ok(())
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::InvalidInput(format!("no column named {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(names.iter().map(|s| s.to_string()).collect(), columns, self.sample_interval)
    }
}

impl From<Trajectory> for Dataset {
    fn from(t: Trajectory) -> Self {
        Self { names: t.names, columns: t.series, sample_interval: t.sample_interval }
    }
}

/// Parses a header-first, comma-separated numeric table.
pub fn read_csv<R: Read>(reader: R, sample_interval: f64) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        return Err(Error::Parse("header row has empty column names".into()));
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!("row {}, column {}: {field:?} is not a number", row + 2, names[col]))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {}, column {}: non-finite value", row + 2, names[col])));
            }
            columns[col].push(v);
        }
    }
    Dataset::new(names, columns, sample_interval).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_csv_path(path: &Path, sample_interval: f64) -> Result<Dataset> {
    let f = fs::File::open(path).map_err(|e| Error::Io(e).context(path.display().to_string()))?;
    read_csv(std::io::BufReader::new(f), sample_interval)
}

/// Writes a dataset in the dialect accepted by [`read_csv`]. Values use
/// shortest round-trip formatting.
pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    data.validate()?;
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(&data.names).map_err(csv_io)?;
    let mut row = Vec::with_capacity(data.columns.len());
    for t in 0..data.len() {
        row.clear();
        row.extend(data.columns.iter().map(|c| c[t].to_string()));
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Parses a TOML run configuration; absent keys take their defaults.
pub fn parse_config(text: &str) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(e).context(path.display().to_string()))?;
    parse_config(&text)
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", file_name.to_string_lossy(), std::process::id()));
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(|e| Error::Io(e).context(path.display().to_string()))
}
