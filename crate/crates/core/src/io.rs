//! File formats: datasets (JSON or CSV), landmark ingestion, experiment
//! configuration and tabular outputs.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{GridMode, GridResult, GridSpec, Generator, RatioRow};
use crate::geometry::{Manifold, ManifoldId, Point};
use crate::manifolds::Kendall;
use crate::mechanism::TauPolicy;
use crate::regression::{Dataset, FitConfig};
use crate::sampler::{ChainConfig, PrivateRelease};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    /// `.csv` files are CSV, everything else JSON.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

/// Serialized coordinates: SPD as `(a, b, c)` for `[[a, b], [b, c]]`, the
/// other manifolds as stored.
pub fn point_to_row(p: &Point) -> Vec<f64> {
    let c = p.coords();
    match p.manifold() {
        ManifoldId::Spd => vec![c[0], c[1], c[3]],
        _ => c.to_vec(),
    }
}

pub fn point_from_row(id: ManifoldId, row: &[f64]) -> Result<Point> {
    match id {
        ManifoldId::Spd => {
            if row.len() != 3 {
                return Err(Error::ShapeMismatch { expected: 3, got: row.len() });
            }
            Point::new(id, &[row[0], row[1], row[1], row[2]])
        }
        _ => Point::new(id, row),
    }
}

pub fn row_width(id: ManifoldId) -> usize {
    match id {
        ManifoldId::Spd => 3,
        other => other.space().coord_len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRow {
    pub x: f64,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub manifold: ManifoldId,
    pub dims: usize,
    pub n: usize,
    pub rows: Vec<DatasetRow>,
}

impl DatasetFile {
    pub fn from_dataset(data: &Dataset) -> Self {
        let rows: Vec<DatasetRow> = data
            .records()
            .map(|(x, y)| DatasetRow { x, y: point_to_row(y) })
            .collect();
        Self { manifold: data.manifold(), dims: row_width(data.manifold()), n: rows.len(), rows }
    }

    pub fn into_dataset(self) -> Result<Dataset> {
        let id = self.manifold.validate()?;
        if self.dims != row_width(id) {
            return Err(Error::ShapeMismatch { expected: row_width(id), got: self.dims });
        }
        if self.n != self.rows.len() {
            return Err(Error::MalformedRow {
                line: 0,
                reason: format!("header declares n = {} but {} rows follow", self.n, self.rows.len()),
            });
        }
        let mut x = Vec::with_capacity(self.n);
        let mut y = Vec::with_capacity(self.n);
        for row in self.rows {
            x.push(row.x);
            y.push(point_from_row(id, &row.y)?);
        }
        Dataset::new(id, x, y)
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_header_line(id: ManifoldId, n: usize) -> String {
    match id {
        ManifoldId::Kendall { landmarks } => {
            format!("# manifold=kendall landmarks={landmarks} dims={} n={n}", row_width(id))
        }
        other => format!("# manifold={} dims={} n={n}", other.name(), row_width(id)),
    }
}

pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let id = data.manifold();
    let mut out = csv_header_line(id, data.len());
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_string()];
    header.extend((0..row_width(id)).map(|i| format!("c{i}")));
    w.write_record(&header)?;
    for (x, y) in data.records() {
        let mut rec = vec![fmt17(x)];
        rec.extend(point_to_row(y).into_iter().map(fmt17));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is ascii"));
    Ok(out)
}

fn parse_header_line(line: &str) -> Result<(ManifoldId, usize, usize)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::MalformedRow { line: 1, reason: "missing '# manifold=...' header".into() })?;
    let (mut manifold, mut landmarks, mut dims, mut n) = (None, None, None, None);
    for field in body.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::MalformedRow { line: 1, reason: format!("bad header field '{field}'") })?;
        let count = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::MalformedRow { line: 1, reason: format!("bad {key} '{value}'") })
        };
        match key {
            "manifold" => manifold = Some(value.to_string()),
            "landmarks" => landmarks = Some(count()?),
            "dims" => dims = Some(count()?),
            "n" => n = Some(count()?),
            _ => return Err(Error::MalformedRow { line: 1, reason: format!("unknown header key '{key}'") }),
        }
    }
    let missing = |what: &str| Error::MalformedRow { line: 1, reason: format!("header lacks {what}") };
    let id = match manifold.as_deref() {
        Some("sphere") => ManifoldId::Sphere,
        Some("spd") => ManifoldId::Spd,
        Some("kendall") => ManifoldId::Kendall { landmarks: landmarks.ok_or_else(|| missing("landmarks"))? },
        Some(other) => return Err(Error::MalformedRow { line: 1, reason: format!("unknown manifold '{other}'") }),
        None => return Err(missing("manifold")),
    };
    Ok((id.validate()?, dims.ok_or_else(|| missing("dims"))?, n.ok_or_else(|| missing("n"))?))
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    let (id, dims, n) = parse_header_line(first.trim_end_matches('\r'))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 3;
        let rec = rec.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        let values = parse_numbers(rec.iter(), line)?;
        if values.len() != dims + 1 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} columns, found {}", dims + 1, values.len()),
            });
        }
        rows.push(DatasetRow { x: values[0], y: values[1..].to_vec() });
    }
    DatasetFile { manifold: id, dims, n, rows }.into_dataset()
}

fn parse_numbers<'a>(fields: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<f64>> {
    fields
        .map(|f| {
            let f = f.trim();
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::MalformedRow { line, reason: format!("'{f}' is not a finite number") }),
            }
        })
        .collect()
}

pub fn dataset_to_json(data: &Dataset) -> Result<String> {
    Ok(serde_json::to_string_pretty(&DatasetFile::from_dataset(data))?)
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    serde_json::from_str::<DatasetFile>(text)?.into_dataset()
}

pub fn write_dataset(data: &Dataset, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::Json => dataset_to_json(data)?,
        Format::Csv => dataset_to_csv(data)?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    match Format::from_path(path) {
        Format::Json => dataset_from_json(&text),
        Format::Csv => dataset_from_csv(&text),
    }
}

/// Reads landmark configurations, one per row: a covariate in column
/// `covariate_column` and `2k` coordinates `x1, y1, x2, y2, …` in the others.
/// Each configuration is centered and scaled to unit Frobenius norm and the
/// covariates are scaled onto `[0, 1]`. Lines starting with `#` and a
/// non-numeric first row are skipped.
pub fn ingest_landmarks<R: Read>(input: R, covariate_column: usize) -> Result<Dataset> {
    let mut covariates = Vec::new();
    let mut shapes = Vec::new();
    let mut width = None;
    let mut first_row = true;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        let header_allowed = std::mem::replace(&mut first_row, false);
        let values = match parse_numbers(fields.iter().copied(), line_no) {
            Ok(v) => v,
            Err(_) if header_allowed => continue,
            Err(e) => return Err(e),
        };
        let w = *width.get_or_insert(values.len());
        if values.len() != w {
            return Err(Error::MalformedRow { line: line_no, reason: format!("expected {w} columns, found {}", values.len()) });
        }
        if covariate_column >= w {
            return Err(Error::MalformedRow { line: line_no, reason: format!("no covariate column {covariate_column}") });
        }
        if (w - 1) % 2 != 0 || (w - 1) / 2 < 4 {
            return Err(Error::MalformedRow {
                line: line_no,
                reason: format!("{} coordinate columns do not form at least 4 (x, y) landmarks", w - 1),
            });
        }
        let k = (w - 1) / 2;
        let coords: Vec<f64> = values
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != covariate_column)
            .map(|(_, v)| *v)
            .collect();
        let shape = Kendall::new(k).preshape(&coords).map_err(|_| Error::DegenerateShape { line: line_no })?;
        covariates.push(values[covariate_column]);
        shapes.push(shape);
    }
    let k = match width {
        Some(w) => (w - 1) / 2,
        None => return Err(Error::MalformedRow { line: 0, reason: "no landmark rows".into() }),
    };
    let id = ManifoldId::Kendall { landmarks: k };
    let y = shapes.iter().map(|s| Point::new(id, s)).collect::<Result<Vec<_>>>()?;
    Dataset::scaled(id, &covariates, y)
}

/// Total-budget range `lo:hi:steps` as accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsRange {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl std::str::FromStr for EpsRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidParameter(format!("expected lo:hi:steps, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse().map_err(|_| bad())?;
        let hi = parts[1].trim().parse().map_err(|_| bad())?;
        let steps = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(EpsRange { lo, hi, steps })
    }
}

fn default_generator() -> Generator {
    Generator::Sphere { delta: 0.001 }
}
fn default_n() -> usize {
    50
}
fn default_m() -> usize {
    10
}
fn default_factor() -> u8 {
    1
}
fn default_mode() -> GridMode {
    GridMode::Equal
}
fn default_tau() -> TauPolicy {
    TauPolicy::Empirical
}

/// One budget-sweep experiment. Unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_generator")]
    pub generator: Generator,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Dataset file to use instead of generated data.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default = "default_mode")]
    pub mode: GridMode,
    #[serde(default)]
    pub eps: Option<EpsRange>,
    /// Explicit `(ε_p, ε_v)` pairs; overrides `eps`.
    #[serde(default)]
    pub budgets: Option<Vec<(f64, f64)>>,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "default_tau")]
    pub tau: TauPolicy,
    #[serde(default = "default_factor")]
    pub conservative_factor: u8,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub long_output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn grid_spec(&self) -> GridSpec {
        if let Some(budgets) = &self.budgets {
            return GridSpec { mode: self.mode, budgets: budgets.clone(), m: self.m };
        }
        match (self.mode, self.eps) {
            (GridMode::Equal, Some(r)) => GridSpec::equal(r.lo, r.hi, r.steps, self.m),
            (GridMode::Unequal, Some(r)) => GridSpec::unequal(r.lo, r.hi, r.steps, self.m),
            (GridMode::Equal, None) => GridSpec::equal(0.2, 2.0, 10, self.m),
            (GridMode::Unequal, None) => GridSpec::unequal(0.02, 2.0, 10, self.m),
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding,
    /// ignoring the output destinations.
    pub fn hash(&self) -> String {
        config_hash(&ExperimentConfig { output: None, long_output: None, ..self.clone() })
    }
}

pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    Sha256::digest(&bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn tau_policy_label(policy: &TauPolicy) -> &'static str {
    match policy {
        TauPolicy::Public { .. } => "public",
        TauPolicy::Empirical => "empirical",
    }
}

fn mode_label(mode: GridMode) -> &'static str {
    match mode {
        GridMode::Equal => "equal",
        GridMode::Unequal => "unequal",
    }
}

/// Full per-cell grid table.
pub fn write_grid_csv<W: Write>(out: W, results: &[GridResult], config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "manifold", "mode", "n", "seed", "eps_p", "eps_v", "ln_mse", "mean_mse", "baseline",
        "sigma_p", "sigma_v", "pairs_used", "excluded", "footpoint_acceptance",
        "shooting_acceptance", "tau", "tau_m", "tau_policy", "config_hash",
    ])?;
    for r in results {
        for c in &r.cells {
            w.write_record(&[
                r.manifold.to_string(),
                mode_label(r.mode).into(),
                r.n.to_string(),
                r.seed.to_string(),
                c.eps_p.to_string(),
                c.eps_v.to_string(),
                c.ln_mse.to_string(),
                c.mean_mse.to_string(),
                c.baseline.to_string(),
                c.sigma_p.to_string(),
                c.sigma_v.to_string(),
                c.pairs_used.to_string(),
                c.excluded.to_string(),
                c.footpoint_acceptance.to_string(),
                c.shooting_acceptance.to_string(),
                r.tau.to_string(),
                r.tau_m.to_string(),
                tau_policy_label(&r.tau_policy).into(),
                config_hash.into(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plot-ready long table: `eps_p, eps_v, ln_mse, baseline, n, seed`.
pub fn write_long_csv<W: Write>(out: W, results: &[GridResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["eps_p", "eps_v", "ln_mse", "baseline", "n", "seed"])?;
    for r in results {
        for c in &r.cells {
            w.write_record(&[
                c.eps_p.to_string(),
                c.eps_v.to_string(),
                c.ln_mse.to_string(),
                c.baseline.to_string(),
                r.n.to_string(),
                r.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ratio_csv<W: Write>(out: W, rows: &[RatioRow], seed: u64, config_hash: &str) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "manifold", "n", "trial", "tau", "tau_m", "delta_thy_p", "delta_exp_p", "r_p",
        "delta_thy_v", "delta_exp_v", "r_v", "seed", "config_hash",
    ])?;
    for r in rows {
        w.write_record(&[
            r.manifold.to_string(),
            r.n.to_string(),
            r.trial.to_string(),
            r.tau.to_string(),
            r.tau_m.to_string(),
            r.delta_thy_p.to_string(),
            r.delta_exp_p.to_string(),
            r.r_p.to_string(),
            r.delta_thy_v.to_string(),
            r.delta_exp_v.to_string(),
            r.r_v.to_string(),
            seed.to_string(),
            config_hash.into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A private release with the provenance needed to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReleaseFile {
    #[serde(flatten)]
    pub release: PrivateRelease,
    pub tau_policy: TauPolicy,
    pub chain: ChainConfig,
    pub config_hash: String,
}
