//! Deterministic CSV/JSON emission with atomic file replacement.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::simulate::{PathPair, SinglePath};

/// A header row and rows of already formatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// CSV with `,` separators, LF line endings and a header row.
    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }
}

/// Shortest round-trip decimal form, `inf`/`-inf`/`NaN` for non-finite values.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value).map_err(io::Error::other)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Hex SHA-256 digest.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn coordinate_header(dim: usize, pair: bool) -> Vec<String> {
    let mut h = vec!["path".to_string(), "t".to_string()];
    h.extend((1..=dim).map(|i| format!("x_{i}")));
    if pair {
        h.extend((1..=dim).map(|i| format!("y_{i}")));
    }
    h.push("event_type".into());
    h
}

/// One row per recorded state: `path, t, x_1..x_d, y_1..y_d, event_type`.
pub fn pair_paths_table(paths: &[PathPair], dim: usize) -> Table {
    let mut t = Table::new(coordinate_header(dim, true));
    for (i, p) in paths.iter().enumerate() {
        for tp in &p.trace {
            let mut row = vec![i.to_string(), fmt_f64(tp.t)];
            row.extend(tp.x.iter().chain(&tp.y).map(|v| fmt_f64(*v)));
            row.push(tp.event.to_string());
            t.rows.push(row);
        }
    }
    t
}

/// One row per recorded state: `path, t, x_1..x_d, event_type`.
pub fn single_paths_table(paths: &[SinglePath], dim: usize) -> Table {
    let mut t = Table::new(coordinate_header(dim, false));
    for (i, p) in paths.iter().enumerate() {
        for tp in &p.trace {
            let mut row = vec![i.to_string(), fmt_f64(tp.t)];
            row.extend(tp.x.iter().map(|v| fmt_f64(*v)));
            row.push(tp.event.to_string());
            t.rows.push(row);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push([fmt_f64(0.1), fmt_f64(f64::INFINITY)]);
        t.push(["x,y", "2"]);
        let s = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(s, "a,b\n0.1,inf\n\"x,y\",2\n");
        assert_eq!(fmt_f64(1.0), "1.0");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
