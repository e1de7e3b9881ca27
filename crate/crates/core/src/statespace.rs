//! Walk histories of length `3n - 1` and the three 0/1 base transition
//! matrices between them.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::patterns::{ForbiddenSet, Step, MAX_LEVEL};

/// Longest word whose base-3 code fits in a `u64` (3^40 < 2^64 < 3^41).
pub const MAX_WORD_LEN: usize = 40;

/// Marker for "no successor" in successor arrays.
pub const NO_STATE: u32 = u32::MAX;

const POW3: [u64; MAX_WORD_LEN + 1] = {
    let mut t = [1u64; MAX_WORD_LEN + 1];
    let mut i = 1;
    while i <= MAX_WORD_LEN {
        t[i] = t[i - 1] * 3;
        i += 1;
    }
    t
};

pub fn pow3(k: usize) -> u64 {
    POW3[k]
}

/// A step word packed in base 3, oldest step in the most significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathWord {
    len: usize,
    code: u64,
}

impl PathWord {
    pub fn new(len: usize, code: u64) -> Result<Self> {
        if len > MAX_WORD_LEN {
            return Err(Error::InvalidArgument(format!(
                "word length {len} exceeds {MAX_WORD_LEN}"
            )));
        }
        if len < MAX_WORD_LEN && code >= POW3[len] {
            return Err(Error::InvalidArgument(format!(
                "code {code} out of range for length {len}"
            )));
        }
        Ok(Self { len, code })
    }

    pub fn from_steps(steps: &[Step]) -> Result<Self> {
        if steps.len() > MAX_WORD_LEN {
            return Err(Error::InvalidArgument(format!(
                "word length {} exceeds {MAX_WORD_LEN}",
                steps.len()
            )));
        }
        let code = steps.iter().fold(0u64, |c, s| c * 3 + s.digit() as u64);
        Ok(Self {
            len: steps.len(),
            code,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    pub fn steps(&self) -> Vec<Step> {
        let mut out = vec![Step::S1; self.len];
        let mut c = self.code;
        for slot in out.iter_mut().rev() {
            *slot = Step::from_digit((c % 3) as u8).unwrap();
            c /= 3;
        }
        out
    }

    pub fn newest(&self) -> Option<Step> {
        (self.len > 0).then(|| Step::from_digit((self.code % 3) as u8).unwrap())
    }

    /// Drop the oldest step and append `step`; the length is unchanged.
    pub fn shift_append(self, step: Step) -> PathWord {
        if self.len == 0 {
            return self;
        }
        PathWord {
            len: self.len,
            code: (self.code % POW3[self.len - 1]) * 3 + step.digit() as u64,
        }
    }

    /// Append `step`, growing the word by one.
    pub fn extend(self, step: Step) -> Result<PathWord> {
        if self.len >= MAX_WORD_LEN {
            return Err(Error::InvalidArgument(format!(
                "cannot extend a word of length {MAX_WORD_LEN}"
            )));
        }
        Ok(PathWord {
            len: self.len + 1,
            code: self.code * 3 + step.digit() as u64,
        })
    }
}

impl fmt::Display for PathWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.steps() {
            write!(f, "{}", s.label())?;
        }
        Ok(())
    }
}

/// True iff some member of `fset` is a suffix of `word`.
pub fn suffix_blocked(word: PathWord, fset: &ForbiddenSet) -> bool {
    fset.blocks_code(word.code, word.len)
}

/// Size limits applied while building state spaces.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_states: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_states: 16_000_000,
        }
    }
}

/// Rough state count at level `n` (growth factor ~10.33 per level).
pub fn projected_states(n: usize) -> f64 {
    7.0 * 10.33f64.powi(n.saturating_sub(1) as i32)
}

/// Approximate resident bytes for level `n`: codes, three successor arrays,
/// the predecessor index and four iteration vectors.
pub fn projected_bytes(n: usize) -> f64 {
    projected_states(n) * (8.0 + 3.0 * 4.0 + 4.0 + 3.0 * 4.0 + 1.0 + 4.0 * 8.0)
}

/// All words of length `len` with no member of `fset` as a factor, in
/// increasing code order.
///
/// Words grow one step at a time and only the suffixes ending at the new
/// step are checked; older factors were checked when they were the suffix.
pub fn valid_words(len: usize, fset: &ForbiddenSet, limits: &Limits) -> Result<Vec<u64>> {
    if len > MAX_WORD_LEN {
        return Err(Error::InvalidArgument(format!(
            "word length {len} exceeds {MAX_WORD_LEN}"
        )));
    }
    let mut layer: Vec<u64> = vec![0];
    for l in 1..=len {
        // Appending digits 0,1,2 to a sorted layer keeps it sorted.
        let next: Vec<u64> = layer
            .par_iter()
            .flat_map_iter(|&c| {
                (0u64..3)
                    .map(move |d| c * 3 + d)
                    .filter(|&nc| !fset.blocks_code(nc, l))
            })
            .collect();
        if next.len() > limits.max_states {
            return Err(Error::ResourceLimit(format!(
                "{} words of length {l} exceed the budget of {} states",
                next.len(),
                limits.max_states
            )));
        }
        layer = next;
    }
    Ok(layer)
}

/// The level-`n` state space: sorted codes of all length-`3n-1` words
/// avoiding the level `n-1` forbidden set. Dense ids follow code order.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    n: usize,
    memory: usize,
    words: Vec<u64>,
}

impl StateSpace {
    pub(crate) fn from_words(n: usize, words: Vec<u64>) -> Result<Self> {
        if n == 0 || n > MAX_LEVEL {
            return Err(Error::LevelTooLarge {
                level: n,
                max: MAX_LEVEL,
            });
        }
        let memory = 3 * n - 1;
        if !words.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Inconsistent("state codes are not strictly increasing".into()));
        }
        if words.last().is_some_and(|&c| c >= POW3[memory]) {
            return Err(Error::Inconsistent("state code out of range".into()));
        }
        if words.len() >= NO_STATE as usize {
            return Err(Error::ResourceLimit(format!(
                "{} states exceed 32-bit ids",
                words.len()
            )));
        }
        Ok(Self { n, memory, words })
    }

    pub fn level(&self) -> usize {
        self.n
    }

    /// Memory length `L = 3n - 1`.
    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn codes(&self) -> &[u64] {
        &self.words
    }

    pub fn word(&self, id: u32) -> PathWord {
        PathWord {
            len: self.memory,
            code: self.words[id as usize],
        }
    }

    pub fn id_of(&self, code: u64) -> Option<u32> {
        self.words.binary_search(&code).ok().map(|i| i as u32)
    }

    pub fn id_of_word(&self, word: PathWord) -> Option<u32> {
        if word.len != self.memory {
            return None;
        }
        self.id_of(word.code)
    }
}

pub fn build_state_space(n: usize, lower: &ForbiddenSet, limits: &Limits) -> Result<StateSpace> {
    if n == 0 || n > MAX_LEVEL {
        return Err(Error::LevelTooLarge {
            level: n,
            max: MAX_LEVEL,
        });
    }
    if lower.level() + 1 != n {
        return Err(Error::LevelMismatch {
            expected: n - 1,
            found: lower.level(),
        });
    }
    let words = valid_words(3 * n - 1, lower, limits)?;
    StateSpace::from_words(n, words)
}

/// The base matrices `M^(1)`, `M^(2)`, `M^(3)` as successor maps, plus the
/// gather-form predecessor index grouped by target.
///
/// Every predecessor of a target `t` reaches it with the same step kind,
/// the newest step of `t`, so one kind per target suffices.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    n: usize,
    kinds: Vec<u8>,
    succ: [Vec<u32>; 3],
    pred_offsets: Vec<u32>,
    pred_sources: Vec<u32>,
}

impl TransitionTable {
    /// Assemble a table from successor arrays. `kinds[t]` is the step kind
    /// entering state `t`; every edge `s -> t` under kind `j` must have
    /// `kinds[t] == j`.
    pub fn from_successors(n: usize, kinds: Vec<u8>, succ: [Vec<u32>; 3]) -> Result<Self> {
        let count = kinds.len();
        if count >= NO_STATE as usize {
            return Err(Error::ResourceLimit(format!("{count} states exceed 32-bit ids")));
        }
        if let Some(&k) = kinds.iter().find(|&&k| k > 2) {
            return Err(Error::Inconsistent(format!("step kind {k} out of range")));
        }
        for (j, s) in succ.iter().enumerate() {
            if s.len() != count {
                return Err(Error::DimensionMismatch {
                    expected: count,
                    found: s.len(),
                });
            }
            for (src, &t) in s.iter().enumerate() {
                if t == NO_STATE {
                    continue;
                }
                if t as usize >= count || kinds[t as usize] as usize != j {
                    return Err(Error::Inconsistent(format!(
                        "edge {src} -> {t} under kind {} does not match the target",
                        j + 1
                    )));
                }
            }
        }

        let mut pred_offsets = vec![0u32; count + 1];
        for s in &succ {
            for &t in s.iter().filter(|&&t| t != NO_STATE) {
                pred_offsets[t as usize + 1] += 1;
            }
        }
        for i in 0..count {
            pred_offsets[i + 1] += pred_offsets[i];
        }
        let mut fill: Vec<u32> = pred_offsets[..count].to_vec();
        let mut pred_sources = vec![0u32; pred_offsets[count] as usize];
        for src in 0..count {
            for s in &succ {
                let t = s[src];
                if t != NO_STATE {
                    pred_sources[fill[t as usize] as usize] = src as u32;
                    fill[t as usize] += 1;
                }
            }
        }
        Ok(Self {
            n,
            kinds,
            succ,
            pred_offsets,
            pred_sources,
        })
    }

    pub fn level(&self) -> usize {
        self.n
    }

    pub fn state_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn edge_count(&self) -> usize {
        self.pred_sources.len()
    }

    /// Step kind of every edge entering `target`.
    pub fn target_kind(&self, target: u32) -> Step {
        Step::from_digit(self.kinds[target as usize]).unwrap()
    }

    pub fn kinds(&self) -> &[u8] {
        &self.kinds
    }

    pub fn successors(&self, kind: Step) -> &[u32] {
        &self.succ[kind.digit() as usize]
    }

    pub fn successor(&self, kind: Step, source: u32) -> Option<u32> {
        let t = self.succ[kind.digit() as usize][source as usize];
        (t != NO_STATE).then_some(t)
    }

    pub fn predecessors(&self, target: u32) -> &[u32] {
        let lo = self.pred_offsets[target as usize] as usize;
        let hi = self.pred_offsets[target as usize + 1] as usize;
        &self.pred_sources[lo..hi]
    }

    /// Sources of the `kind` edges into `target` (column of `M^(kind)` read as a row).
    pub fn predecessors_of_kind(&self, kind: Step, target: u32) -> &[u32] {
        if self.kinds[target as usize] == kind.digit() {
            self.predecessors(target)
        } else {
            &[]
        }
    }

    pub(crate) fn pred_offsets(&self) -> &[u32] {
        &self.pred_offsets
    }

    pub(crate) fn pred_sources(&self) -> &[u32] {
        &self.pred_sources
    }

    pub fn out_degree(&self, source: u32) -> usize {
        self.succ
            .iter()
            .filter(|s| s[source as usize] != NO_STATE)
            .count()
    }

    /// States with no valid extension at all.
    pub fn zero_out_degree_count(&self) -> usize {
        (0..self.state_count() as u32)
            .filter(|&s| self.out_degree(s) == 0)
            .count()
    }

    /// Successor arrays recomputed from the predecessor index alone.
    pub fn successors_from_predecessors(&self) -> [Vec<u32>; 3] {
        let mut succ = [
            vec![NO_STATE; self.state_count()],
            vec![NO_STATE; self.state_count()],
            vec![NO_STATE; self.state_count()],
        ];
        for t in 0..self.state_count() as u32 {
            let j = self.kinds[t as usize] as usize;
            for &s in self.predecessors(t) {
                succ[j][s as usize] = t;
            }
        }
        succ
    }
}

pub fn build_transitions(states: &StateSpace, fset: &ForbiddenSet) -> Result<TransitionTable> {
    if fset.level() != states.level() {
        return Err(Error::LevelMismatch {
            expected: states.level(),
            found: fset.level(),
        });
    }
    let memory = states.memory();
    let keep = POW3[memory - 1];
    let kinds: Vec<u8> = states.codes().iter().map(|c| (c % 3) as u8).collect();

    let successors_for = |j: u64| -> Result<Vec<u32>> {
        states
            .codes()
            .par_iter()
            .map(|&code| {
                if fset.blocks_code(code * 3 + j, memory + 1) {
                    return Ok(NO_STATE);
                }
                let target = (code % keep) * 3 + j;
                states.id_of(target).ok_or_else(|| {
                    Error::Inconsistent(format!(
                        "target {} of {} is missing from the state space",
                        PathWord { len: memory, code: target },
                        PathWord { len: memory, code },
                    ))
                })
            })
            .collect()
    };
    let succ = [successors_for(0)?, successors_for(1)?, successors_for(2)?];
    TransitionTable::from_successors(states.level(), kinds, succ)
}
