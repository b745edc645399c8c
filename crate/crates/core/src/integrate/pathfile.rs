//! Binary column file for paths.
//!
//! Layout, all little endian: the 8-byte magic, then `slow_dim: u64`, `fast_dim: u64`
//! (0 when the component is absent), `points: u64`, `t0, t_end, step: f64`, `seed: u64`,
//! `slow_stream, fast_stream, levels, flags: u32` (flag bit 0: checksum present),
//! `w1_checksum: u64`, followed by one column of `points` values per slow coefficient
//! and then per fast coefficient.

use std::io::{Read, Write};

use super::{PathSample, SeedRecord};
use crate::error::{Error, Result};
use crate::spaces::{State, TimeGrid};

pub const PATH_FILE_MAGIC: [u8; 8] = *b"SFPATH01";

fn columns(states: &Option<Vec<State>>) -> usize {
    states.as_ref().and_then(|s| s.first()).map_or(0, |s| s.len())
}

pub fn write_path_file(path: &PathSample, mut w: impl Write) -> Result<()> {
    let (ns, nf) = (columns(&path.slow), columns(&path.fast));
    let mut buf = Vec::with_capacity(96 + 8 * path.grid.points * (ns + nf));
    buf.extend_from_slice(&PATH_FILE_MAGIC);
    for v in [ns as u64, nf as u64, path.grid.points as u64] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [path.grid.t0, path.grid.t_end, path.grid.step] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&path.seeds.seed.to_le_bytes());
    let flags = u32::from(path.w1_checksum.is_some());
    for v in [path.seeds.slow_stream, path.seeds.fast_stream, path.seeds.levels, flags] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&path.w1_checksum.unwrap_or(0).to_le_bytes());
    for (states, n) in [(&path.slow, ns), (&path.fast, nf)] {
        if let Some(states) = states {
            if states.len() != path.grid.points || states.iter().any(|s| s.len() != n) {
                return Err(Error::Format("path lengths do not match the grid".into()));
            }
            for k in 0..n {
                for s in states {
                    buf.extend_from_slice(&s[k].to_le_bytes());
                }
            }
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .data
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("path file truncated".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length checked"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_path_file(mut r: impl Read) -> Result<PathSample> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take::<8>()? != PATH_FILE_MAGIC {
        return Err(Error::Format("not a path file (bad magic)".into()));
    }
    let ns = c.u64()? as usize;
    let nf = c.u64()? as usize;
    let points = c.u64()? as usize;
    let (t0, t_end, step) = (c.f64()?, c.f64()?, c.f64()?);
    let seed = c.u64()?;
    let (slow_stream, fast_stream, levels, flags) = (c.u32()?, c.u32()?, c.u32()?, c.u32()?);
    let checksum = c.u64()?;
    let expected = c.pos + 8 * points * (ns + nf);
    if data.len() != expected {
        return Err(Error::Format(format!(
            "path file has {} bytes, header implies {expected}",
            data.len()
        )));
    }
    let mut block = |n: usize| -> Result<Option<Vec<State>>> {
        if n == 0 {
            return Ok(None);
        }
        let mut states = vec![State::zeros(n); points];
        for k in 0..n {
            for s in states.iter_mut() {
                s[k] = c.f64()?;
            }
        }
        Ok(Some(states))
    };
    let slow = block(ns)?;
    let fast = block(nf)?;
    Ok(PathSample {
        grid: TimeGrid { t0, t_end, step, points },
        slow,
        fast,
        seeds: SeedRecord { seed, slow_stream, fast_stream, levels },
        w1_checksum: (flags & 1 == 1).then_some(checksum),
    })
}
