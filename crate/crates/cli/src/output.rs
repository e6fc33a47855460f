//! Output directory handling: atomic writes, fixed-precision CSV and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Twelve significant digits in scientific notation; negative zero prints as zero.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub struct OutDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    /// Writes to a sibling temporary file, syncs it, then renames into place.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        {
            let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
            f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
            f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
        }
        fs::rename(&tmp, &target).map_err(|e| CliError::io(&target, e))?;
        let sha256 = hex(&Sha256::digest(bytes));
        self.files.retain(|f| f.path != name);
        self.files.push(OutputFile { path: name.to_string(), sha256, bytes: bytes.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serialisable output");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, &table.to_bytes())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A header plus rows of preformatted cells.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self { header: header.iter().map(|s| s.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub config: &'a ep3_core::SystemConfig,
    pub lambda_im_policy: ep3_core::LambdaImPolicy,
    pub outputs: &'a [OutputFile],
    pub duration_secs: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(0.224551290902), "2.24551290902e-1");
        assert_eq!(num(-0.0), "0.00000000000e0");
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-1234.5), "-1.23450000000e3");
        let x = 0.123456789012345;
        let back: f64 = num(x).parse().unwrap();
        assert!((back - x).abs() <= 5e-12 * x);
    }

    #[test]
    fn csv_has_header_and_crlf() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["1".into(), "x,y".into()]);
        assert_eq!(String::from_utf8(t.to_bytes()).unwrap(), "a,b\r\n1,\"x,y\"\r\n");
    }

    #[test]
    fn atomic_write_records_digest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write("x.txt", b"abc").unwrap();
        out.write("x.txt", b"abc").unwrap();
        assert_eq!(out.files().len(), 1);
        assert_eq!(out.files()[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(fs::read(dir.path().join("x.txt")).unwrap(), b"abc");
        assert!(!dir.path().join(".x.txt.tmp").exists());
    }
}
