//! Replays the fuzz targets' checks on the checked-in corpus seeds and on
//! random mutations of them, so the properties run on stable toolchains too.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with("seed_"))
        .map(|p| {
            let b = std::fs::read(&p).unwrap();
            (p, b)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn mutate(rng: &mut ChaCha8Rng, base: &[u8]) -> Vec<u8> {
    let mut b = base.to_vec();
    match rng.gen_range(0..4) {
        0 if !b.is_empty() => {
            let i = rng.gen_range(0..b.len());
            b[i] ^= 1 << rng.gen_range(0..8);
        }
        1 if !b.is_empty() => b.truncate(rng.gen_range(0..b.len())),
        2 => {
            let i = rng.gen_range(0..=b.len());
            b.insert(i, rng.gen());
        }
        _ => b = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect(),
    }
    b
}

fn replay(target: &str, check: impl Fn(&[u8]) -> bool) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut accepted = 0;
    for (_, base) in seeds(target) {
        accepted += check(&base) as usize;
        for _ in 0..300 {
            check(&mutate(&mut rng, &base));
        }
    }
    accepted
}

fn config(data: &[u8]) -> bool {
    match mhdl::config::parse_config_bytes(data) {
        Ok(cfg) => {
            let again = mhdl::config::parse_config(&cfg.to_ini()).expect("canonical form parses");
            assert_eq!(again.to_ini(), cfg.to_ini());
            true
        }
        Err(_) => false,
    }
}

fn checkpoint(data: &[u8]) -> bool {
    match mhdl::checkpoint::decode(data) {
        Ok(c) => {
            let once = mhdl::checkpoint::encode(&c.state, c.aux.as_ref()).expect("decoded state encodes");
            let again = mhdl::checkpoint::decode(&once).expect("canonical bytes decode");
            assert_eq!(mhdl::checkpoint::encode(&again.state, again.aux.as_ref()).unwrap(), once);
            true
        }
        Err(_) => false,
    }
}

fn manifest(data: &[u8]) -> bool {
    match mhdl::output::Manifest::parse_bytes(data) {
        Ok(m) => {
            assert_eq!(mhdl::output::Manifest::parse(&m.to_text()).unwrap(), m);
            true
        }
        Err(_) => false,
    }
}

#[test]
fn parse_config_seeds() {
    // two valid seeds, two deliberately invalid
    assert_eq!(replay("parse_config", config), 2);
}

#[test]
fn checkpoint_decode_seeds() {
    assert_eq!(replay("checkpoint_decode", checkpoint), 1);
}

#[test]
fn manifest_parse_seeds() {
    assert_eq!(replay("manifest_parse", manifest), 2);
}
