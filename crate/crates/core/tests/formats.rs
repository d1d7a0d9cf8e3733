//! Reads a run directory the way an outside consumer would: plain CSV
//! splitting and a hand-rolled checkpoint reader, no crate decoders.

use std::path::Path;

use mhdl::cli::cmd_run;
use mhdl::config::parse_config;

fn run_fixture(out: &Path) {
    let body = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/regression.ini")).unwrap();
    let cfg = parse_config(&format!("{body}[output]\ndir = {}\n", out.display())).unwrap();
    cmd_run(&cfg).unwrap();
}

fn num(s: &str) -> f64 {
    let v: f64 = s.parse().unwrap_or_else(|_| panic!("not a number: `{s}`"));
    // shortest round-trip form, at most 17 significant digits
    let mantissa = s.trim_start_matches('-').split(['e', 'E']).next().unwrap();
    assert!(mantissa.chars().filter(char::is_ascii_digit).count() <= 17, "{s}");
    v
}

fn rows(text: &str) -> Vec<Vec<&str>> {
    text.lines().map(|l| l.split(',').collect()).collect()
}

#[test]
fn csv_schemas() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_fixture(&out);

    let norms = std::fs::read_to_string(out.join("norms.csv")).unwrap();
    let r = rows(&norms);
    assert_eq!(r[0], ["time", "log_value", "dominant"]);
    for row in &r[1..] {
        assert_eq!(row.len(), 3);
        num(row[0]);
        num(row[1]);
        assert!(!row[2].is_empty());
    }

    let mut n_tables = 0;
    for e in std::fs::read_dir(out.join("norms")).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        let r = rows(&text);
        assert_eq!(r[0], ["family", "m", "i", "j", "log_value"]);
        let (last, body) = r[1..].split_last().unwrap();
        assert!(!body.is_empty());
        for row in body {
            assert_eq!(row.len(), 5);
            for c in &row[1..4] {
                c.parse::<u32>().unwrap();
            }
            num(row[4]);
        }
        assert_eq!(last[0], "composite");
        assert_eq!((last[2], last[3]), ("", ""));
        last[1].parse::<u32>().unwrap();
        num(last[4]);
        n_tables += 1;
    }
    assert_eq!(n_tables, r.len() - 1, "one table per norms.csv row");

    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let s = rows(&summary);
    assert_eq!(s[0], ["name", "pass", "tolerance", "max_residual"]);
    for e in std::fs::read_dir(out.join("diagnostics")).unwrap() {
        let path = e.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let r = rows(&text);
        assert_eq!(r[0], ["time", "residual"]);
        let split = r.iter().position(|row| row[0] == "name").unwrap();
        let mut prev = f64::NEG_INFINITY;
        for row in &r[1..split] {
            let t = num(row[0]);
            assert!(t > prev, "{}: times increase", path.display());
            prev = t;
            num(row[1]);
        }
        assert_eq!(r[split], ["name", "pass", "tolerance", "max_residual"]);
        assert_eq!(r.len(), split + 2);
        let tail = &r[split + 1];
        assert!(["true", "false"].contains(&tail[1]));
        num(tail[2]);
        num(tail[3]);
        // the summary carries the same row
        assert!(s.iter().any(|row| row == tail), "{}", path.display());
    }
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn bytes(&mut self, n: usize) -> &[u8] {
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        a
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.bytes(4).try_into().unwrap())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.bytes(8).try_into().unwrap())
    }
}

#[test]
fn checkpoint_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    run_fixture(&out);
    let mut paths: Vec<_> = std::fs::read_dir(out.join("checkpoints"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let mut prev_t = -1.0;
    for p in paths {
        let bytes = std::fs::read(&p).unwrap();
        let mut c = Cursor(&bytes);
        assert_eq!(c.bytes(4), b"MHDL");
        assert_eq!(c.u32(), 1);
        let dim = c.u32();
        let (_lx, _ly, _zmax) = (c.f64(), c.f64(), c.f64());
        let (nx, ny, nz) = (c.u32() as usize, c.u32() as usize, c.u32() as usize);
        for _ in 0..5 {
            c.f64();
        }
        assert_eq!((dim, nx, ny, nz), (2, 16, 1, 32));
        let t = c.f64();
        assert!(t > prev_t);
        prev_t = t;
        let count = c.u32();
        let mut names = Vec::new();
        for _ in 0..count {
            let len = c.u32() as usize;
            names.push(String::from_utf8(c.bytes(len).to_vec()).unwrap());
            for _ in 0..2 * nx * ny * nz {
                assert!(c.f64().is_finite());
            }
        }
        assert!(c.0.is_empty(), "{}: trailing bytes", p.display());
        for want in ["u0", "f0", "w", "h", "U0", "V0", "lambda0", "delta0"] {
            assert!(names.iter().any(|n| n == want), "{}: no {want} in {names:?}", p.display());
        }
    }
}
