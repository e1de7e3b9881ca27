//! Small-scale reference computations used to cross-check the main pipeline.
//!
//! Nothing here goes through the pattern trie or the incremental state
//! construction: forbidden sets are regenerated by filtering every word of
//! each length, and paths are filtered by scanning every factor.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::statespace::TransitionTable;

pub const MAX_BRUTE_LENGTH: usize = 16;
pub const MAX_BRUTE_LEVEL: usize = 4;
pub const MAX_DENSE_STATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSum {
    pub n: usize,
    pub k: usize,
    pub total: f64,
}

/// Every word of length `len` over digits `0..3`, in lexicographic order.
fn all_words(len: usize) -> impl Iterator<Item = Vec<u8>> {
    let count = 3usize.pow(len as u32);
    (0..count).map(move |mut i| {
        let mut w = vec![0u8; len];
        for slot in w.iter_mut().rev() {
            *slot = (i % 3) as u8;
            i /= 3;
        }
        w
    })
}

/// Does any pattern occur anywhere in `word`?
pub fn contains_any_factor(word: &[u8], patterns: &[Vec<u8>]) -> bool {
    patterns.iter().any(|p| {
        p.len() <= word.len() && (0..=word.len() - p.len()).any(|i| &word[i..i + p.len()] == p)
    })
}

/// The level-`n` forbidden patterns (digits `0..3`), found by testing every
/// word of length `3k` for balance and for containing a lower pattern.
pub fn naive_forbidden_patterns(n: usize) -> Result<Vec<Vec<u8>>> {
    if n > MAX_BRUTE_LEVEL {
        return Err(Error::ResourceLimit(format!(
            "brute-force forbidden sets are limited to level {MAX_BRUTE_LEVEL}"
        )));
    }
    let mut set: Vec<Vec<u8>> = vec![vec![0, 2], vec![2, 0]];
    for k in 1..=n {
        let fresh: Vec<Vec<u8>> = all_words(3 * k)
            .filter(|w| (0..3u8).all(|d| w.iter().filter(|&&x| x == d).count() == k))
            .filter(|w| !contains_any_factor(w, &set))
            .collect();
        set.extend(fresh);
    }
    Ok(set)
}

/// All length-`k` words avoiding the level-`n` set, by full factor scan.
pub fn valid_paths_bruteforce(n: usize, k: usize) -> Result<Vec<Vec<u8>>> {
    if k > MAX_BRUTE_LENGTH {
        return Err(Error::ResourceLimit(format!(
            "path length {k} exceeds the brute-force limit {MAX_BRUTE_LENGTH}"
        )));
    }
    let forbidden = naive_forbidden_patterns(n)?;
    Ok(all_words(k)
        .filter(|w| !contains_any_factor(w, &forbidden))
        .collect())
}

/// Total weight of all valid paths of length `k`.
pub fn total_weight_bruteforce(n: usize, k: usize, params: &Parameters) -> Result<PathSum> {
    let w = params.step_weights();
    let total = valid_paths_bruteforce(n, k)?
        .iter()
        .map(|path| path.iter().map(|&d| w[d as usize]).product::<f64>())
        .sum();
    Ok(PathSum { n, k, total })
}

fn inf_norm(m: &Array2<f64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `||M^(2^t)||_inf^(1 / 2^t)` by `t` scaled squarings of the dense matrix.
pub fn dense_growth_rate(
    table: &TransitionTable,
    params: &Parameters,
    doublings: u32,
) -> Result<f64> {
    let size = table.state_count();
    if size > MAX_DENSE_STATES {
        return Err(Error::ResourceLimit(format!(
            "{size} states exceed the dense limit {MAX_DENSE_STATES}"
        )));
    }
    let w = params.step_weights();
    let mut m = Array2::<f64>::zeros((size, size));
    for t in 0..size as u32 {
        let wt = w[table.target_kind(t).digit() as usize];
        for &s in table.predecessors(t) {
            m[[t as usize, s as usize]] += wt;
        }
    }
    // M^(2^i) = exp(log_scale) * m after each step.
    let mut log_scale = 0.0f64;
    for _ in 0..doublings {
        let c = inf_norm(&m);
        if c == 0.0 {
            return Ok(0.0);
        }
        m /= c;
        log_scale = 2.0 * (log_scale + c.ln());
        m = m.dot(&m);
    }
    let c = inf_norm(&m);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(((log_scale + c.ln()) / 2f64.powi(doublings as i32)).exp())
}
