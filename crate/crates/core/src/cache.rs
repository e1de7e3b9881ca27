//! Binary cache of a built level.
//!
//! Little-endian layout:
//!
//! ```text
//! "STVK"  version:u32  n:u32  L:u32  states:u64  patterns:u64
//! codes        states x u64                 (increasing)
//! successors   3 x states x u64             (u64::MAX = none; kinds 1, 2, 3)
//! patterns     patterns x (len:u32, len ASCII digits '1'..'3')
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::level::Level;
use crate::patterns::{ForbiddenSet, Pattern};
use crate::statespace::{StateSpace, TransitionTable, NO_STATE};

pub const MAGIC: &[u8; 4] = b"STVK";
pub const FORMAT_VERSION: u32 = 1;

pub fn cache_path(dir: &Path, n: usize) -> PathBuf {
    dir.join(format!("stavskaya-level{n}.bin"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub version: u32,
    pub n: u32,
    pub memory: u32,
    pub states: u64,
    pub patterns: u64,
}

pub fn write_cache(path: &Path, level: &Level) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    // Write to a sibling file first so a crash never leaves a torn cache.
    let tmp = path.with_extension("bin.partial");
    {
        let mut w = BufWriter::with_capacity(1 << 20, File::create(&tmp)?);
        let states = &level.states;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(states.level() as u32).to_le_bytes())?;
        w.write_all(&(states.memory() as u32).to_le_bytes())?;
        w.write_all(&(states.len() as u64).to_le_bytes())?;
        w.write_all(&(level.forbidden.len() as u64).to_le_bytes())?;
        for &c in states.codes() {
            w.write_all(&c.to_le_bytes())?;
        }
        for kind in crate::patterns::Step::ALL {
            for &t in level.table.successors(kind) {
                let v = if t == NO_STATE { u64::MAX } else { t as u64 };
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for p in level.forbidden.patterns() {
            let text = p.to_string();
            w.write_all(&(text.len() as u32).to_le_bytes())?;
            w.write_all(text.as_bytes())?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u64_array(r: &mut impl Read, count: usize) -> Result<Vec<u64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn read_header(r: &mut impl Read) -> Result<Header> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::CacheFormat("bad magic".into()));
    }
    Ok(Header {
        version: read_u32(r)?,
        n: read_u32(r)?,
        memory: read_u32(r)?,
        states: read_u64(r)?,
        patterns: read_u64(r)?,
    })
}

/// Load the level-`n` cache, rejecting it if the header does not describe level `n`.
pub fn read_cache(path: &Path, n: usize) -> Result<Level> {
    let mut r = BufReader::with_capacity(1 << 20, File::open(path)?);
    let h = read_header(&mut r)?;
    if h.version != FORMAT_VERSION {
        return Err(Error::CacheFormat(format!(
            "format version {} (expected {FORMAT_VERSION})",
            h.version
        )));
    }
    if h.n as usize != n || h.memory as usize != 3 * n - 1 {
        return Err(Error::CacheFormat(format!(
            "cache describes level {} with memory {}, expected level {n}",
            h.n, h.memory
        )));
    }
    let count = usize::try_from(h.states)
        .ok()
        .filter(|&c| c < NO_STATE as usize)
        .ok_or_else(|| Error::CacheFormat(format!("state count {} too large", h.states)))?;

    let codes = read_u64_array(&mut r, count)?;
    let mut succ: [Vec<u32>; 3] = Default::default();
    for s in succ.iter_mut() {
        *s = read_u64_array(&mut r, count)?
            .into_iter()
            .map(|v| match v {
                u64::MAX => Ok(NO_STATE),
                v if v < count as u64 => Ok(v as u32),
                v => Err(Error::CacheFormat(format!("successor {v} out of range"))),
            })
            .collect::<Result<_>>()?;
    }
    let mut patterns = Vec::with_capacity(h.patterns.min(1 << 24) as usize);
    for _ in 0..h.patterns {
        let len = read_u32(&mut r)? as usize;
        if len > 3 * n {
            return Err(Error::CacheFormat(format!("pattern length {len}")));
        }
        let mut text = vec![0u8; len];
        r.read_exact(&mut text)?;
        let text = String::from_utf8(text)
            .map_err(|_| Error::CacheFormat("pattern is not ASCII".into()))?;
        patterns.push(text.parse::<Pattern>()?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::CacheFormat("trailing bytes".into()));
    }

    let kinds = codes.iter().map(|c| (c % 3) as u8).collect();
    let states = StateSpace::from_words(n, codes)?;
    let table = TransitionTable::from_successors(n, kinds, succ)?;
    let forbidden = ForbiddenSet::from_patterns(n, patterns)?;
    Ok(Level {
        forbidden,
        states,
        table,
    })
}
