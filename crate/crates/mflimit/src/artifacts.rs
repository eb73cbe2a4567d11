//! Run directories: CSV tables, one `.meta` sidecar per table, and a
//! `manifest.txt` listing every file with its SHA-256.
//!
//! A sidecar is `key=value` lines and always carries `config_hash`, `seed`
//! and `sha256` (of the CSV bytes). Readers check both: a hash from another
//! config is refused, a checksum mismatch means the file was damaged.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.txt";
pub const DIVERGED: &str = "DIVERGED";

/// Writes one run directory. Only the thread that owns it writes.
pub struct RunWriter {
    dir: PathBuf,
    hash: String,
    seed: u64,
    files: Vec<(String, String)>,
}

impl RunWriter {
    /// Creates `dir`, replacing a previous run of the same command there.
    pub fn create(dir: &Path, hash: &str, seed: u64) -> Result<Self> {
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.into(), hash: hash.into(), seed, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `rel` (a CSV) and `rel.meta`.
    pub fn table<R, I>(&mut self, rel: &str, header: &[String], rows: I, meta: &[(&str, String)]) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| CliError::io(&path, std::io::Error::other(e));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
        fs::write(&path, &bytes).map_err(|e| CliError::io(&path, e))?;
        let digest = sha256(&bytes);
        let mut side = format!("config_hash={}\nseed={}\nsha256={digest}\n", self.hash, self.seed);
        for (k, v) in meta {
            side.push_str(&format!("{k}={v}\n"));
        }
        let meta_path = self.dir.join(format!("{rel}.meta"));
        fs::write(&meta_path, side).map_err(|e| CliError::io(&meta_path, e))?;
        self.files.push((rel.into(), digest));
        Ok(())
    }

    /// Writes a plain text file that is listed in the manifest.
    pub fn text(&mut self, rel: &str, body: &str) -> Result<()> {
        let path = self.dir.join(rel);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.files.push((rel.into(), sha256(body.as_bytes())));
        Ok(())
    }

    /// Marks the run as diverged; partial artifacts stay in place.
    pub fn diverged(&mut self, detail: &str) -> Result<()> {
        self.text(DIVERGED, &format!("config_hash={}\n{detail}\n", self.hash))
    }

    /// Writes the manifest; call last.
    pub fn finish(self, command: &str, extra: &[(&str, String)]) -> Result<PathBuf> {
        let mut m = format!(
            "command={command}\nconfig_hash={}\nseed={}\nmflimit_version={}\n",
            self.hash,
            self.seed,
            env!("CARGO_PKG_VERSION")
        );
        for (k, v) in extra {
            m.push_str(&format!("{k}={v}\n"));
        }
        for (rel, digest) in &self.files {
            m.push_str(&format!("file.{rel}={digest}\n"));
        }
        let path = self.dir.join(MANIFEST);
        fs::write(&path, m).map_err(|e| CliError::io(&path, e))?;
        Ok(self.dir)
    }
}

/// Reads a finished run directory written under `hash`.
pub struct RunReader {
    dir: PathBuf,
    hash: String,
    manifest: BTreeMap<String, String>,
}

impl RunReader {
    /// `command` names what produces the directory, for the error message.
    pub fn open(dir: &Path, hash: &str, command: &'static str) -> Result<Self> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Err(CliError::MissingArtifact { path, command });
        }
        let manifest = read_kv(&path)?;
        check_hash(&path, &manifest, hash)?;
        Ok(Self { dir: dir.into(), hash: hash.into(), manifest })
    }

    pub fn manifest(&self, key: &str) -> Option<&str> {
        self.manifest.get(key).map(String::as_str)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.dir.join(rel).exists()
    }

    /// The table's sidecar entries, after the hash and checksum checks.
    pub fn meta(&self, rel: &str) -> Result<BTreeMap<String, String>> {
        let path = self.dir.join(format!("{rel}.meta"));
        if !path.exists() {
            return Err(CliError::MissingArtifact { path, command: self.command() });
        }
        let meta = read_kv(&path)?;
        check_hash(&path, &meta, &self.hash)?;
        Ok(meta)
    }

    /// Header and rows of a CSV table, verified against its sidecar.
    pub fn table(&self, rel: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
        let path = self.dir.join(rel);
        let meta = self.meta(rel)?;
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::MissingArtifact { path: path.clone(), command: self.command() },
            _ => CliError::io(&path, e),
        })?;
        let found = sha256(&bytes);
        let expected = meta.get("sha256").cloned().unwrap_or_default();
        if found != expected {
            return Err(CliError::Checksum { path, expected, found });
        }
        let mut r = csv::Reader::from_reader(bytes.as_slice());
        let header = r.headers().map_err(|e| format_err(&path, e))?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<std::result::Result<_, _>>().map_err(|e| format_err(&path, e))?;
        Ok((header, rows))
    }

    /// A table whose cells are all numbers, with the expected header.
    pub fn numeric(&self, rel: &str, header: &[String]) -> Result<Vec<Vec<f64>>> {
        let path = self.dir.join(rel);
        let (h, rows) = self.table(rel)?;
        if h != header {
            return Err(CliError::Format { path, offset: 0, message: format!("header {h:?}, expected {header:?}") });
        }
        rows.into_iter()
            .map(|row| row.iter().map(|v| v.parse::<f64>().map_err(|_| CliError::Format { path: path.clone(), offset: 0, message: format!("not a number: `{v}`") })).collect())
            .collect()
    }

    fn command(&self) -> &'static str {
        match self.manifest.get("command").map(String::as_str) {
            Some("meanfield") => "meanfield",
            Some("verify") => "verify",
            Some("mnist-hist") => "mnist-hist",
            _ => "train",
        }
    }
}

fn format_err(path: &Path, e: csv::Error) -> CliError {
    let offset = e.position().map(|p| p.byte()).unwrap_or(0);
    CliError::Format { path: path.into(), offset, message: e.to_string() }
}

fn check_hash(path: &Path, kv: &BTreeMap<String, String>, hash: &str) -> Result<()> {
    match kv.get("config_hash") {
        Some(h) if h == hash => Ok(()),
        found => Err(CliError::HashMismatch { path: path.into(), expected: hash.into(), found: found.cloned().unwrap_or_else(|| "<none>".into()) }),
    }
}

fn read_kv(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().filter_map(|l| l.split_once('=')).map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `c,w_1,...,w_d`.
pub fn snapshot_header(dim: usize) -> Vec<String> {
    std::iter::once("c".to_string()).chain((1..=dim).map(|j| format!("w_{j}"))).collect()
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Shortest text that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_round_trip_and_detect_damage() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut w = RunWriter::create(&dir, "abc", 7).unwrap();
        let rows = vec![vec![num(0.1), num(-2.5e-300)], vec![num(1.0 / 3.0), num(f64::MAX)]];
        w.table("sub/t.csv", &header(&["a", "b"]), rows.clone(), &[("time", "0.5".into())]).unwrap();
        w.finish("train", &[]).unwrap();

        let r = RunReader::open(&dir, "abc", "train").unwrap();
        let got = r.numeric("sub/t.csv", &header(&["a", "b"])).unwrap();
        assert_eq!(got, vec![vec![0.1, -2.5e-300], vec![1.0 / 3.0, f64::MAX]]);
        assert_eq!(r.meta("sub/t.csv").unwrap()["time"], "0.5");
        assert!(matches!(r.numeric("sub/t.csv", &header(&["a", "x"])), Err(CliError::Format { .. })));

        assert!(matches!(RunReader::open(&dir, "other", "train"), Err(CliError::HashMismatch { .. })));
        assert!(matches!(RunReader::open(&tmp.path().join("none"), "abc", "meanfield"), Err(CliError::MissingArtifact { command: "meanfield", .. })));

        let path = dir.join("sub/t.csv");
        let mut bytes = fs::read(&path).unwrap();
        bytes[5] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(r.table("sub/t.csv"), Err(CliError::Checksum { .. })));
    }
}
