//! CSV serialization of reports, content hashing, and the run manifest.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64` (Rust's `{:e}`), so files compare byte-for-byte across runs and
//! round-trip through any language's float parser.
//!
//! Manifest layout (line oriented, UTF-8):
//!
//! ```text
//! mhdl-manifest 1
//! config <n>
//! <n lines of the canonical configuration>
//! files <m>
//! <40 hex sha1> <size in bytes> <relative path>
//! ```
//!
//! Hashes are git blob ids: `sha1("blob <len>\0" ++ content)`.

use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use sha1::{Digest, Sha1};

use crate::diagnostics::DiagnosticReport;
use crate::error::{Error, Result};
use crate::gevrey::NormReport;

pub const MANIFEST_NAME: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "mhdl-manifest 1";

/// Shortest round-trip decimal.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn norm_report_csv(r: &NormReport) -> String {
    let mut o = String::from("family,m,i,j,log_value\n");
    for e in &r.entries {
        let _ = writeln!(o, "{},{},{},{},{}", e.family, e.m, e.i, e.j, fmt_f64(e.log_value));
    }
    let _ = writeln!(o, "composite,{},,,{}", r.m_max, fmt_f64(r.log_value));
    o
}

/// `time,residual` rows, then `name,pass,tolerance,max_residual` and its row.
pub fn diagnostic_csv(r: &DiagnosticReport) -> String {
    let mut o = String::from("time,residual\n");
    for (t, v) in r.times.iter().zip(&r.residuals) {
        let _ = writeln!(o, "{},{}", fmt_f64(*t), fmt_f64(*v));
    }
    o.push_str("name,pass,tolerance,max_residual\n");
    let _ = writeln!(o, "{}", summary_row(r));
    o
}

fn summary_row(r: &DiagnosticReport) -> String {
    format!(
        "{},{},{},{}",
        r.name,
        r.pass,
        fmt_f64(r.tolerance),
        fmt_f64(r.max_residual())
    )
}

pub fn summary_csv(reports: &[DiagnosticReport]) -> String {
    let mut o = String::from("name,pass,tolerance,max_residual\n");
    for r in reports {
        let _ = writeln!(o, "{}", summary_row(r));
    }
    o
}

/// Git blob id of `content`.
pub fn git_blob_hash(content: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub hash: String,
    pub size: u64,
    /// Relative to the manifest's directory, `/`-separated.
    pub path: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Manifest {
    pub config: String,
    pub files: Vec<ManifestEntry>,
}

fn check_relative(path: &str) -> std::result::Result<(), String> {
    if path.is_empty() || path.contains('\\') {
        return Err(format!("invalid path `{path}`"));
    }
    let ok = Path::new(path)
        .components()
        .all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(format!("path `{path}` must be relative without `..`"))
    }
}

impl Manifest {
    /// Records `content` under `path`.
    pub fn add(&mut self, path: &str, content: &[u8]) {
        self.files.push(ManifestEntry {
            hash: git_blob_hash(content),
            size: content.len() as u64,
            path: path.into(),
        });
    }

    pub fn to_text(&self) -> String {
        let config_lines: Vec<&str> = if self.config.is_empty() {
            Vec::new()
        } else {
            self.config.lines().collect()
        };
        let mut o = format!("{MANIFEST_HEADER}\nconfig {}\n", config_lines.len());
        for l in config_lines {
            o.push_str(l);
            o.push('\n');
        }
        let _ = writeln!(o, "files {}", self.files.len());
        for f in &self.files {
            let _ = writeln!(o, "{} {} {}", f.hash, f.size, f.path);
        }
        o
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, msg: String| Error::Parse { line, msg };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, format!("manifest ends before {what}")))
        };
        let (ln, head) = next("the header")?;
        if head != MANIFEST_HEADER {
            return Err(err(ln, format!("expected `{MANIFEST_HEADER}`")));
        }
        let count = |ln: usize, line: &str, key: &str| -> Result<usize> {
            line.strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| err(ln, format!("expected `{key} <count>`")))
        };
        let (ln, l) = next("the config count")?;
        let n_config = count(ln, l, "config")?;
        let mut config = String::new();
        for _ in 0..n_config {
            let (_, l) = next("the end of the config block")?;
            config.push_str(l);
            config.push('\n');
        }
        let (ln, l) = next("the file count")?;
        let n_files = count(ln, l, "files")?;
        let mut files = Vec::new();
        for _ in 0..n_files {
            let (ln, l) = next("the end of the file list")?;
            let mut parts = l.splitn(3, ' ');
            let (hash, size, path) = match (parts.next(), parts.next(), parts.next()) {
                (Some(h), Some(s), Some(p)) => (h, s, p),
                _ => return Err(err(ln, "expected `<hash> <size> <path>`".into())),
            };
            if hash.len() != 40 || !hash.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
                return Err(err(ln, format!("`{hash}` is not a 40-digit lowercase hex hash")));
            }
            let size = size
                .parse()
                .map_err(|_| err(ln, format!("invalid size `{size}`")))?;
            check_relative(path).map_err(|m| err(ln, m))?;
            if files.iter().any(|f: &ManifestEntry| f.path == path) {
                return Err(err(ln, format!("path `{path}` listed twice")));
            }
            files.push(ManifestEntry {
                hash: hash.into(),
                size,
                path: path.into(),
            });
        }
        if let Some((ln, _)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(err(ln, "unexpected content after the file list".into()));
        }
        Ok(Manifest { config, files })
    }

    pub fn parse_bytes(bytes: &[u8]) -> Result<Manifest> {
        let text = std::str::from_utf8(bytes).map_err(|_| Error::Parse {
            line: 0,
            msg: "manifest is not valid UTF-8".into(),
        })?;
        Manifest::parse(text)
    }

    pub fn read(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_NAME);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Manifest::parse_bytes(&bytes)
    }

    pub fn entry(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|f| f.path == path)
    }

    /// Reads `path` (relative to `dir`) and checks it against its entry.
    pub fn read_verified(&self, dir: &Path, path: &str) -> Result<Vec<u8>> {
        let full = dir.join(path);
        let entry = self.entry(path).ok_or_else(|| {
            Error::Format(format!("{} is not listed in the manifest", full.display()))
        })?;
        let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
        let actual = git_blob_hash(&bytes);
        if actual != entry.hash {
            return Err(Error::HashMismatch {
                path: full,
                expected: entry.hash.clone(),
                actual,
            });
        }
        Ok(bytes)
    }
}

/// Writes files into one directory and records them in a manifest.
pub struct OutputDir {
    pub root: PathBuf,
    pub manifest: Manifest,
}

impl OutputDir {
    pub fn create(root: &Path, config: String) -> Result<OutputDir> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            manifest: Manifest {
                config,
                files: Vec::new(),
            },
        })
    }

    /// Writes `content` to `rel` (a `/`-separated relative path).
    pub fn write(&mut self, rel: &str, content: &[u8]) -> Result<()> {
        check_relative(rel).map_err(Error::Format)?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        self.manifest.add(rel, content);
        Ok(())
    }

    pub fn finish(self) -> Result<Manifest> {
        let path = self.root.join(MANIFEST_NAME);
        std::fs::write(&path, self.manifest.to_text()).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(git_blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
        assert_eq!(git_blob_hash(b""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1e-300, f64::MAX, f64::MIN_POSITIVE, -2.5e17, 1.0 / 3.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            assert!(digits <= 17, "{s}");
        }
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn manifest_round_trip() {
        let mut m = Manifest {
            config: "[domain]\nnx = 16\n".into(),
            files: Vec::new(),
        };
        m.add("checkpoints/ckpt_000000.bin", b"abc");
        m.add("summary.csv", b"name,pass\n");
        let back = Manifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn manifest_rejects_escaping_paths() {
        let text = format!("{MANIFEST_HEADER}\nconfig 0\nfiles 1\n{} 3 ../x\n", "0".repeat(40));
        assert!(Manifest::parse(&text).is_err());
        let text = format!("{MANIFEST_HEADER}\nconfig 0\nfiles 1\n{} 3 /etc/x\n", "0".repeat(40));
        assert!(Manifest::parse(&text).is_err());
    }

    #[test]
    fn manifest_rejects_short_blocks() {
        assert!(Manifest::parse(&format!("{MANIFEST_HEADER}\nconfig 3\na\n")).is_err());
        assert!(Manifest::parse("").is_err());
    }
}
