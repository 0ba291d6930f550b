//! Artifact formats: CSV tables with a one-line JSON provenance header,
//! spectrum JSON, and a raw binary sidecar for eigenmatrices.
//!
//! A CSV artifact looks like
//!
//! ```text
//! # {"kind":"trajectory","code_version":"qvdp-core 0.1.0","params":{...},"extra":{...}}
//! t,re,im,frame
//! 0,1.5,0,rotating
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a fixed input
//! produces byte-identical files.

use std::io::Write;
use std::path::Path;

use faer::c64;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::ObservableTrajectory;
use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::spectral::SpectralDecomposition;

pub const CODE_VERSION: &str = concat!("qvdp-core ", env!("CARGO_PKG_VERSION"));

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// Who produced an artifact and from what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    pub code_version: String,
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub extra: Map<String, Value>,
}

impl Provenance {
    pub fn new(kind: &str, params: Option<ModelParams>) -> Self {
        Self { kind: kind.into(), code_version: CODE_VERSION.into(), params, extra: Map::new() }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.extra.insert(key.into(), v);
        self
    }
}

/// A CSV cell. Floats use the shortest representation that round-trips.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::I(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.into())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::F(x) => write!(f, "{x}"),
            Cell::I(x) => write!(f, "{x}"),
            Cell::S(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub provenance: Provenance,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(provenance: Provenance, columns: &[&str]) -> Self {
        Self { provenance, columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidParams(format!("row has {} cells, table has {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(b"# ");
        out.extend(serde_json::to_vec(&self.provenance).map_err(io_err)?);
        out.push(b'\n');
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(io_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).map_err(io_err)?;
        }
        w.into_inner().map_err(io_err)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    /// JSON form `{provenance, columns, rows}`. Non-finite floats become null.
    pub fn to_json(&self) -> Value {
        let cell = |c: &Cell| match c {
            Cell::F(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::I(x) => Value::from(*x),
            Cell::S(s) => Value::from(s.as_str()),
        };
        serde_json::json!({
            "provenance": self.provenance,
            "columns": self.columns,
            "rows": self.rows.iter().map(|r| r.iter().map(cell).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    /// Parses a table written by [`CsvTable::write`]. Cells come back as
    /// strings; use [`CsvTable::column_f64`] for numeric columns.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (first, body) = text.split_once('\n').unwrap_or((text, ""));
        let json = first
            .strip_prefix("# ")
            .ok_or_else(|| Error::Io("missing provenance header line".into()))?;
        let provenance: Provenance = serde_json::from_str(json).map_err(io_err)?;
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let columns = r.headers().map_err(io_err)?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(|c| Cell::S(c.into())).collect()).map_err(io_err))
            .collect::<Result<_>>()?;
        Ok(Self { provenance, columns, rows })
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidParams(format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| match &r[j] {
                Cell::F(x) => Ok(*x),
                Cell::I(x) => Ok(*x as f64),
                Cell::S(s) => s.parse().map_err(|_| Error::Io(format!("not a number: {s}"))),
            })
            .collect()
    }
}

/// Writes to a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(io_err)?;
    Ok(())
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(io_err)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Liouvillian spectrum as stored on disk. Each eigenvalue is
/// `[re, im, parity]` with parity `+1` (even) or `-1` (odd).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub code_version: String,
    pub params: Option<ModelParams>,
    pub cutoff: usize,
    pub eigenvalues: Vec<(f64, f64, i8)>,
    /// Name of the eigenmatrix sidecar and the mode indices it holds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidecar: Option<Sidecar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub file: String,
    pub modes: Vec<usize>,
}

impl SpectrumRecord {
    pub fn from_decomposition(dec: &SpectralDecomposition) -> Self {
        Self {
            code_version: CODE_VERSION.into(),
            params: dec.params().copied(),
            cutoff: dec.cutoff(),
            eigenvalues: dec.modes().iter().map(|m| (m.eigenvalue.re, m.eigenvalue.im, m.parity.sign())).collect(),
            sidecar: None,
        }
    }

    pub fn eigenvalues_c64(&self) -> Vec<c64> {
        self.eigenvalues.iter().map(|&(re, im, _)| c64::new(re, im)).collect()
    }
}

/// Right eigenmatrices of `modes`, each `d x d` row-major, every entry as
/// two little-endian `f64` (re, im). The file is the plain concatenation.
pub fn eigenmatrix_bytes(dec: &SpectralDecomposition, modes: &[usize]) -> Result<Vec<u8>> {
    let d = dec.cutoff();
    let mut out = Vec::with_capacity(modes.len() * d * d * 16);
    for &j in modes {
        if j >= dec.len() {
            return Err(Error::InvalidParams(format!("mode {j} out of range")));
        }
        let r = dec.right(j)?;
        for row in 0..d {
            for col in 0..d {
                let z = r[(row, col)];
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Inverse of [`eigenmatrix_bytes`].
pub fn read_eigenmatrices(bytes: &[u8], d: usize) -> Result<Vec<crate::linalg::CMat>> {
    let per = d * d * 16;
    if d == 0 || bytes.len() % per != 0 {
        return Err(Error::Io(format!("sidecar length {} is not a multiple of {per}", bytes.len())));
    }
    let f = |k: usize| f64::from_le_bytes(bytes[k..k + 8].try_into().expect("8 bytes"));
    Ok(bytes
        .chunks(per)
        .enumerate()
        .map(|(m, _)| {
            let base = m * per;
            crate::linalg::CMat::from_fn(d, d, |i, j| {
                let k = base + (i * d + j) * 16;
                c64::new(f(k), f(k + 8))
            })
        })
        .collect())
}

/// Trajectory CSV: `t, re, im, frame`.
pub fn trajectory_table(traj: &ObservableTrajectory, observable: &str) -> CsvTable {
    let prov = Provenance::new("trajectory", traj.params)
        .with("initial_state", &traj.initial)
        .with("observable", observable)
        .with("frame", traj.frame.label());
    let mut t = CsvTable::new(prov, &["t", "re", "im", "frame"]);
    for (time, v) in traj.times.iter().zip(&traj.values) {
        t.rows.push(vec![(*time).into(), v.re.into(), v.im.into(), traj.frame.label().into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Frame;
    use crate::fock::FockSpace;
    use crate::liouvillian::build_rotating_liouvillian;
    use crate::spectral::diagonalize;

    #[test]
    fn csv_round_trip_and_determinism() {
        let p = ModelParams::from_ratios(1.0, 5.0, 0.1, 2.0).unwrap();
        let mut t = CsvTable::new(Provenance::new("test", Some(p)).with("seed", 7u64), &["x", "label", "n"]);
        t.push(vec![0.1.into(), "a,b".into(), 3usize.into()]).unwrap();
        t.push(vec![(1.0 / 3.0).into(), "c".into(), 4usize.into()]).unwrap();
        assert!(t.push(vec![1.0.into()]).is_err());
        let bytes = t.to_bytes().unwrap();
        assert_eq!(bytes, t.to_bytes().unwrap());
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("# {\"kind\":\"test\""));
        let back = CsvTable::parse(&text).unwrap();
        assert_eq!(back.provenance, t.provenance);
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.column_f64("x").unwrap(), vec![0.1, 1.0 / 3.0]);
        assert_eq!(back.rows[0][1], Cell::S("a,b".into()));
        assert!(CsvTable::parse("x,y\n1,2\n").is_err());
        let j = t.to_json();
        assert_eq!(j["columns"][1], "label");
        assert_eq!(j["rows"][0][2], 3);
        assert_eq!(j["provenance"]["extra"]["seed"], 7);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_json(&path, &serde_json::json!({"a": 1})).unwrap();
        write_json(&path, &serde_json::json!({"a": 2})).unwrap();
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(v["a"], 2);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/x"), b"").is_err());
    }

    #[test]
    fn spectrum_record_and_sidecar() {
        let p = ModelParams::from_ratios(1.0, 2.0, 0.1, 0.5).unwrap();
        let space = FockSpace::new(5).unwrap();
        let dec = diagonalize(&build_rotating_liouvillian(&p, &space), true).unwrap();
        let rec = SpectrumRecord::from_decomposition(&dec);
        assert_eq!(rec.eigenvalues.len(), 25);
        assert_eq!(rec.eigenvalues_c64(), dec.eigenvalues());
        let json = serde_json::to_string(&rec).unwrap();
        let back: SpectrumRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, rec);
        let bytes = eigenmatrix_bytes(&dec, &[0, 3]).unwrap();
        assert_eq!(bytes.len(), 2 * 25 * 16);
        let mats = read_eigenmatrices(&bytes, 5).unwrap();
        assert_eq!(mats[1], dec.right(3).unwrap());
        assert!(read_eigenmatrices(&bytes[1..], 5).is_err());
    }

    #[test]
    fn trajectory_columns() {
        let traj = ObservableTrajectory {
            times: vec![0.0, 0.5],
            values: vec![c64::new(1.0, -1.0), c64::new(0.5, 0.25)],
            frame: Frame::Lab,
            params: None,
            initial: "coherent(1)".into(),
        };
        let t = trajectory_table(&traj, "a");
        let text = String::from_utf8(t.to_bytes().unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "t,re,im,frame");
        assert_eq!(lines[2], "0,1,-1,lab");
        assert_eq!(lines[3], "0.5,0.5,0.25,lab");
        assert_eq!(t.provenance.extra["initial_state"], "coherent(1)");
    }
}
