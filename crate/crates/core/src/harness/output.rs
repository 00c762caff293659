//! CSV tables, matrix dumps and the staged output directory.
//!
//! Files are first written as `<name>.partial` and renamed only when the whole
//! scenario succeeds; a dropped, uncommitted [`OutputDir`] removes its partial
//! files.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::array::{CMatrix, C64};
use crate::error::{Error, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"SMSTAPM1";

/// Full double precision, 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn write_to<W: Write>(&self, out: &mut W, comment: &str) -> std::io::Result<()> {
        writeln!(out, "# {comment}")?;
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    /// Data rows for CSV files.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    comment: String,
    staged: Vec<(String, Option<usize>)>,
    committed: bool,
}

impl OutputDir {
    /// `comment` is echoed as the first line of every CSV.
    pub fn create(root: &Path, comment: String) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            comment,
            staged: Vec::new(),
            committed: false,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn partial_path(&self, name: &str) -> PathBuf {
        self.root.join(format!("{name}.partial"))
    }

    fn stage<F>(&mut self, name: &str, rows: Option<usize>, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
    {
        let path = self.partial_path(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.staged.push((name.to_string(), rows));
        let mut out = BufWriter::new(file);
        body(&mut out)
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let comment = self.comment.clone();
        self.stage(name, Some(table.len()), |out| table.write_to(out, &comment))
    }

    pub fn write_matrix_csv(&mut self, name: &str, m: &CMatrix) -> Result<()> {
        let comment = self.comment.clone();
        self.stage(name, Some(m.nrows()), |out| write_matrix_csv(out, m, &comment))
    }

    pub fn write_matrix_binary(&mut self, name: &str, m: &CMatrix) -> Result<()> {
        self.stage(name, None, |out| write_matrix_binary(out, m))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.stage(name, None, |out| {
            serde_json::to_writer_pretty(&mut *out, value).map_err(std::io::Error::other)?;
            writeln!(out)
        })
    }

    /// Renames every staged file into place and returns the manifest.
    pub fn commit(mut self) -> Result<Vec<ManifestEntry>> {
        let mut manifest = Vec::with_capacity(self.staged.len());
        for (name, rows) in &self.staged {
            let from = self.partial_path(name);
            let to = self.root.join(name);
            fs::rename(&from, &to).map_err(|e| Error::io(&to, e))?;
            let bytes = fs::metadata(&to).map_err(|e| Error::io(&to, e))?.len();
            manifest.push(ManifestEntry {
                file: name.clone(),
                bytes,
                rows: *rows,
            });
        }
        self.committed = true;
        Ok(manifest)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            for (name, _) in &self.staged {
                let _ = fs::remove_file(self.partial_path(name));
            }
        }
    }
}

/// One matrix row per line as `re,im` pairs, preceded by a shape comment.
pub fn write_matrix_csv<W: Write>(out: &mut W, m: &CMatrix, comment: &str) -> std::io::Result<()> {
    writeln!(out, "# {comment} rows={} cols={}", m.nrows(), m.ncols())?;
    let header: Vec<String> = (0..m.ncols()).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..m.nrows() {
        let line: Vec<String> = m
            .row(i)
            .iter()
            .flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)])
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Magic, `u64` rows and cols (little endian), then row-major `re, im` as `f64` LE.
pub fn write_matrix_binary<W: Write>(out: &mut W, m: &CMatrix) -> std::io::Result<()> {
    out.write_all(MATRIX_MAGIC)?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for z in m.row(i).iter() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_matrix_binary<R: Read>(input: &mut R) -> std::io::Result<CMatrix> {
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(bad("not a matrix dump"));
    }
    let mut word = [0u8; 8];
    input.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    input.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| bad("shape overflows"))?;
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        input.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let im = f64::from_le_bytes(word);
        data.push(C64::new(re, im));
    }
    Ok(CMatrix::from_row_slice(rows, cols, &data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        let x = 0.1f64 + 0.2;
        let s = fmt_f64(x);
        assert_eq!(s.parse::<f64>().unwrap(), x);
        assert_eq!(s, "3.0000000000000004e-1");
    }

    #[test]
    fn binary_roundtrip() {
        let m = CMatrix::from_fn(3, 2, |i, j| C64::new(i as f64 + 0.5, -(j as f64) / 3.0));
        let mut buf = Vec::new();
        write_matrix_binary(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 8 + 16 + 3 * 2 * 16);
        let back = read_matrix_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, m);
        buf[0] = b'X';
        assert!(read_matrix_binary(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn csv_matrix_layout() {
        let m = CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 2.0), C64::new(3.0, 4.0)]);
        let mut buf = Vec::new();
        write_matrix_csv(&mut buf, &m, "x").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "re0,im0,re1,im1");
        let vals: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut out = OutputDir::create(dir.path(), "seed=1".into()).unwrap();
            let mut t = CsvTable::new(&["a"]);
            t.push(vec!["1".into()]);
            out.write_csv("a.csv", &t).unwrap();
            assert!(dir.path().join("a.csv.partial").exists());
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_renames_and_lists() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path(), "seed=1".into()).unwrap();
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        out.write_csv("t.csv", &t).unwrap();
        let manifest = out.commit().unwrap();
        assert_eq!(manifest.len(), 1);
        assert_eq!(manifest[0].rows, Some(1));
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "# seed=1\na,b\n1,2\n");
        assert_eq!(manifest[0].bytes, text.len() as u64);
    }
}
