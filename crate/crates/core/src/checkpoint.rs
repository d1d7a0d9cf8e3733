//! Binary checkpoints. Little-endian throughout:
//!
//! ```text
//! magic  b"MHDL"
//! u32    format version
//! domain u32 dim, f64 lx, f64 ly, f64 zmax, u32 nx, u32 ny, u32 nz,
//!        f64 stretch, f64 ell, f64 nu, f64 mu, f64 eps
//! f64    time
//! u32    field count
//! field  u32 name length, UTF-8 name,
//!        nx*ny*nz (re, im) f64 pairs, mode-major then z
//! ```
//!
//! Field names: `u0 [u1] f0 [f1] w h`, and for the auxiliary state
//! `U0 [U1] V0 [V1] lambda0.. delta0..` (one lambda/delta in 2D, four in 3D).

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::auxiliary::AuxState;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::{DomainConfig, Grid};
use crate::state::State;

pub const MAGIC: &[u8; 4] = b"MHDL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub state: State,
    pub aux: Option<AuxState>,
}

fn named_fields<'a>(state: &'a State, aux: Option<&'a AuxState>) -> Vec<(String, &'a Field)> {
    let mut out = Vec::new();
    let mut push = |prefix: &str, fs: &'a [Field]| {
        for (i, f) in fs.iter().enumerate() {
            out.push((format!("{prefix}{i}"), f));
        }
    };
    push("u", &state.u_h);
    push("f", &state.f_h);
    if let Some(a) = aux {
        push("U", &a.u_aux);
        push("V", &a.v_int);
        push("lambda", &a.lambda);
        push("delta", &a.delta);
    }
    out.push(("w".into(), &state.w));
    out.push(("h".into(), &state.h));
    out
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_domain(buf: &mut Vec<u8>, d: &DomainConfig) {
    put_u32(buf, d.dim as u32);
    put_f64(buf, d.lx);
    put_f64(buf, d.ly);
    put_f64(buf, d.zmax);
    put_u32(buf, d.nx as u32);
    put_u32(buf, d.ny as u32);
    put_u32(buf, d.nz as u32);
    for v in [d.stretch, d.ell, d.nu, d.mu, d.eps] {
        put_f64(buf, v);
    }
}

/// Serializes a state and (optionally) its synchronized auxiliary state.
pub fn encode(state: &State, aux: Option<&AuxState>) -> Result<Vec<u8>> {
    if let Some(a) = aux {
        if a.t != state.t {
            return Err(Error::Desynchronized {
                aux: a.t,
                state: state.t,
            });
        }
    }
    let grid = state.grid();
    let fields = named_fields(state, aux);
    let mut buf = Vec::with_capacity(96 + fields.len() * (16 + grid.len() * 16));
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, FORMAT_VERSION);
    put_domain(&mut buf, &grid.config);
    put_f64(&mut buf, state.t);
    put_u32(&mut buf, fields.len() as u32);
    for (name, f) in fields {
        if !f.grid().same_as(grid) {
            return Err(Error::GridMismatch);
        }
        put_u32(&mut buf, name.len() as u32);
        buf.extend_from_slice(name.as_bytes());
        for c in f.data() {
            put_f64(&mut buf, c.re);
            put_f64(&mut buf, c.im);
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated {
            expected: usize::MAX,
            actual: self.bytes.len(),
        })?;
        if end > self.bytes.len() {
            return Err(Error::Truncated {
                expected: end,
                actual: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_domain(r: &mut Reader) -> Result<DomainConfig> {
    let dim = r.u32()? as usize;
    let (lx, ly, zmax) = (r.f64()?, r.f64()?, r.f64()?);
    let (nx, ny, nz) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    Ok(DomainConfig {
        dim,
        lx,
        ly,
        zmax,
        nx,
        ny,
        nz,
        stretch: r.f64()?,
        ell: r.f64()?,
        nu: r.f64()?,
        mu: r.f64()?,
        eps: r.f64()?,
    })
}

fn take_required(raw: &mut Vec<(String, &[u8])>, grid: &Arc<Grid>, name: &str) -> Result<Field> {
    let i = raw
        .iter()
        .position(|(nm, _)| nm == name)
        .ok_or_else(|| Error::Format(format!("missing field `{name}`")))?;
    let (_, payload) = raw.remove(i);
    let data = payload
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Field::from_spectrum(grid, data)
}

fn take_family(
    raw: &mut Vec<(String, &[u8])>,
    grid: &Arc<Grid>,
    prefix: &str,
    len: usize,
) -> Result<Vec<Field>> {
    (0..len)
        .map(|i| take_required(raw, grid, &format!("{prefix}{i}")))
        .collect()
}

/// Decodes a checkpoint. `grid` is reused when its configuration matches
/// the header, so a directory of checkpoints shares one grid.
pub fn decode_with_grid(bytes: &[u8], grid: Option<&Arc<Grid>>) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Version {
            found: format!("magic {:02x?}", magic),
            expected: format!("magic {:02x?} (\"MHDL\")", MAGIC),
        });
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: format!("version {version}"),
            expected: format!("version {FORMAT_VERSION}"),
        });
    }
    let domain = read_domain(&mut r)?;
    domain.validate()?;
    let t = r.f64()?;
    let count = r.u32()? as usize;
    let per_field = domain
        .n_modes()
        .checked_mul(domain.nz)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::Format("grid size overflows".into()))?;

    // bounds-check everything before allocating a grid
    let mut raw: Vec<(String, &[u8])> = Vec::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("field name is not UTF-8".into()))?
            .to_string();
        if raw.iter().any(|(n, _)| *n == name) {
            return Err(Error::Format(format!("duplicate field `{name}`")));
        }
        raw.push((name, r.take(per_field)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last field",
            bytes.len() - r.pos
        )));
    }
    if !raw.iter().any(|(n, _)| n == "u0") {
        return Err(Error::Format("missing field `u0`".into()));
    }

    let grid = match grid {
        Some(g) if g.config == domain => Arc::clone(g),
        _ => Grid::new(domain)?,
    };
    let n = grid.dim() - 1;
    let u_h = take_family(&mut raw, &grid, "u", n)?;
    let f_h = take_family(&mut raw, &grid, "f", n)?;
    let w = take_required(&mut raw, &grid, "w")?;
    let h = take_required(&mut raw, &grid, "h")?;
    let aux = if raw.iter().any(|(nm, _)| nm == "U0") {
        let n_ld = if n == 1 { 1 } else { 4 };
        Some(AuxState {
            t,
            u_aux: take_family(&mut raw, &grid, "U", n)?,
            v_int: take_family(&mut raw, &grid, "V", n)?,
            lambda: take_family(&mut raw, &grid, "lambda", n_ld)?,
            delta: take_family(&mut raw, &grid, "delta", n_ld)?,
        })
    } else {
        None
    };
    if let Some((name, _)) = raw.first() {
        return Err(Error::Format(format!("unexpected field `{name}`")));
    }
    Ok(Checkpoint {
        state: State { t, u_h, f_h, w, h },
        aux,
    })
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    decode_with_grid(bytes, None)
}

pub fn write(path: &Path, state: &State, aux: Option<&AuxState>) -> Result<Vec<u8>> {
    let bytes = encode(state, aux)?;
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes)
}

pub fn read(path: &Path, grid: Option<&Arc<Grid>>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_with_grid(&bytes, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::small_data_fixture;

    fn sample() -> (State, AuxState) {
        let (domain, _, recipe) = small_data_fixture();
        let grid = Grid::new(DomainConfig { nx: 16, nz: 32, ..domain }).unwrap();
        let mut s = recipe.build(&grid).unwrap();
        s.t = 0.125;
        let aux = AuxState::initial(&s);
        (s, aux)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (s, aux) = sample();
        let bytes = encode(&s, Some(&aux)).unwrap();
        let back = decode(&bytes).unwrap();
        assert_eq!(back.state, s);
        assert_eq!(back.aux.as_ref(), Some(&aux));
        assert_eq!(encode(&back.state, back.aux.as_ref()).unwrap(), bytes);

        let plain = decode(&encode(&s, None).unwrap()).unwrap();
        assert!(plain.aux.is_none());
    }

    #[test]
    fn flipped_magic_is_a_version_error() {
        let (s, _) = sample();
        let mut bytes = encode(&s, None).unwrap();
        bytes[0] ^= 0xff;
        assert!(matches!(decode(&bytes).unwrap_err(), Error::Version { .. }));
        let mut bytes = encode(&s, None).unwrap();
        bytes[4] = 9;
        assert!(matches!(decode(&bytes).unwrap_err(), Error::Version { .. }));
    }

    #[test]
    fn truncation_reports_sizes() {
        let (s, _) = sample();
        let bytes = encode(&s, None).unwrap();
        let cut = bytes.len() - 100;
        match decode(&bytes[..cut]).unwrap_err() {
            Error::Truncated { expected, actual } => {
                assert_eq!(actual, cut);
                assert!(expected > actual);
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn trailing_garbage_rejected() {
        let (s, _) = sample();
        let mut bytes = encode(&s, None).unwrap();
        bytes.push(0);
        assert!(matches!(decode(&bytes).unwrap_err(), Error::Format(_)));
    }
}
