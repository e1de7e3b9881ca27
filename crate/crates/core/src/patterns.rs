//! Step alphabet, balanced loops and the forbidden-factor sets.
//!
//! A walk is a word over three step kinds. `ForbiddenSet` of level `n`
//! holds the two degenerate reversals `13`, `31` and every primitive loop
//! of order `1..=n`, where a loop of order `k` uses each kind exactly `k`
//! times and is primitive when it avoids every member of the level `k-1`
//! set as a contiguous factor.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::Parameters;

/// Largest level whose extended words (length `3n`) fit a `u64` base-3 code.
pub const MAX_LEVEL: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Step {
    S1 = 0,
    S2 = 1,
    S3 = 2,
}

impl Step {
    pub const ALL: [Step; 3] = [Step::S1, Step::S2, Step::S3];

    /// Step for a base-3 digit `0..=2`.
    pub fn from_digit(d: u8) -> Option<Step> {
        match d {
            0 => Some(Step::S1),
            1 => Some(Step::S2),
            2 => Some(Step::S3),
            _ => None,
        }
    }

    pub fn digit(self) -> u8 {
        self as u8
    }

    /// Printable label `'1'`, `'2'` or `'3'`.
    pub fn label(self) -> char {
        (b'1' + self.digit()) as char
    }

    pub fn from_label(c: char) -> Option<Step> {
        match c {
            '1' => Some(Step::S1),
            '2' => Some(Step::S2),
            '3' => Some(Step::S3),
            _ => None,
        }
    }

    pub fn displacement(self) -> (i32, i32) {
        match self {
            Step::S1 => (-1, -1),
            Step::S2 => (2, 0),
            Step::S3 => (-1, 1),
        }
    }

    pub fn weight(self, params: &Parameters) -> f64 {
        params.step_weights()[self.digit() as usize]
    }

    /// The 1 <-> 3 involution.
    pub fn swapped(self) -> Step {
        match self {
            Step::S1 => Step::S3,
            Step::S2 => Step::S2,
            Step::S3 => Step::S1,
        }
    }
}

pub fn step_weight(kind: Step, params: &Parameters) -> f64 {
    kind.weight(params)
}

/// A finite step sequence of length at least two.
///
/// Ordered by length first, then lexicographically by step digit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern(Vec<Step>);

impl Pattern {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.len() < 2 {
            let text: String = steps.iter().map(|s| s.label()).collect();
            return Err(Error::InvalidPattern(text));
        }
        Ok(Pattern(steps))
    }

    fn from_digits(digits: &[u8]) -> Self {
        Pattern(
            digits
                .iter()
                .map(|&d| Step::from_digit(d).expect("digit in 0..3"))
                .collect(),
        )
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Occurrences of kinds 1, 2 and 3.
    pub fn counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in &self.0 {
            c[s.digit() as usize] += 1;
        }
        c
    }

    pub fn displacement(&self) -> (i32, i32) {
        self.0.iter().fold((0, 0), |(x, y), s| {
            let (dx, dy) = s.displacement();
            (x + dx, y + dy)
        })
    }

    /// `Some(k)` when this is a loop of order `k` (each kind exactly `k` times).
    pub fn loop_order(&self) -> Option<usize> {
        let [a, b, c] = self.counts();
        (a == b && b == c && a > 0).then_some(a)
    }

    pub fn swapped(&self) -> Pattern {
        Pattern(self.0.iter().map(|s| s.swapped()).collect())
    }

    pub fn reversed(&self) -> Pattern {
        Pattern(self.0.iter().rev().copied().collect())
    }

    /// True if `other` occurs as a contiguous factor of `self`.
    pub fn contains_factor(&self, other: &Pattern) -> bool {
        other.len() <= self.len() && self.0.windows(other.len()).any(|w| w == other.steps())
    }
}

impl Ord for Pattern {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Pattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.label())?;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let steps = s
            .chars()
            .map(Step::from_label)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidPattern(s.to_string()))?;
        Pattern::new(steps)
    }
}

const NO_CHILD: u32 = u32::MAX;

/// Trie over reversed patterns, queried newest step first.
#[derive(Debug, Clone)]
pub struct SuffixTrie {
    children: Vec<[u32; 3]>,
    terminal: Vec<bool>,
}

impl SuffixTrie {
    fn new() -> Self {
        Self {
            children: vec![[NO_CHILD; 3]],
            terminal: vec![false],
        }
    }

    fn insert(&mut self, pattern: &Pattern) {
        let mut node = 0usize;
        for s in pattern.steps().iter().rev() {
            let d = s.digit() as usize;
            if self.children[node][d] == NO_CHILD {
                self.children[node][d] = self.children.len() as u32;
                self.children.push([NO_CHILD; 3]);
                self.terminal.push(false);
            }
            node = self.children[node][d] as usize;
        }
        self.terminal[node] = true;
    }

    /// Does some stored pattern end the word whose digits are given newest first?
    pub fn matches_suffix<I: IntoIterator<Item = u8>>(&self, newest_first: I) -> bool {
        let mut node = 0usize;
        for d in newest_first {
            let next = self.children[node][d as usize];
            if next == NO_CHILD {
                return false;
            }
            node = next as usize;
            if self.terminal[node] {
                return true;
            }
        }
        false
    }

    /// Same query for a word of `len` steps packed as a base-3 code
    /// (newest step in the least significant digit).
    #[inline]
    pub fn matches_code(&self, mut code: u64, len: usize) -> bool {
        let mut node = 0usize;
        for _ in 0..len {
            let next = self.children[node][(code % 3) as usize];
            if next == NO_CHILD {
                return false;
            }
            node = next as usize;
            if self.terminal[node] {
                return true;
            }
            code /= 3;
        }
        false
    }
}

/// The forbidden-factor set of a given level.
#[derive(Debug, Clone)]
pub struct ForbiddenSet {
    level: usize,
    patterns: Vec<Pattern>,
    by_length: BTreeMap<usize, Range<usize>>,
    trie: SuffixTrie,
}

impl PartialEq for ForbiddenSet {
    fn eq(&self, other: &Self) -> bool {
        self.level == other.level && self.patterns == other.patterns
    }
}

impl ForbiddenSet {
    /// Level 0: just `13` and `31`.
    pub fn degenerate() -> Self {
        let pair = vec![
            Pattern(vec![Step::S1, Step::S3]),
            Pattern(vec![Step::S3, Step::S1]),
        ];
        Self::assemble(0, pair)
    }

    fn assemble(level: usize, mut patterns: Vec<Pattern>) -> Self {
        patterns.sort();
        patterns.dedup();
        let mut by_length = BTreeMap::new();
        let mut start = 0;
        while start < patterns.len() {
            let len = patterns[start].len();
            let end = start + patterns[start..].partition_point(|p| p.len() == len);
            by_length.insert(len, start..end);
            start = end;
        }
        let mut trie = SuffixTrie::new();
        for p in &patterns {
            trie.insert(p);
        }
        Self {
            level,
            patterns,
            by_length,
            trie,
        }
    }

    /// Rebuild from a stored pattern list, checking that it has the shape
    /// of a level-`level` set (degenerate pair plus loops of order `1..=level`).
    pub fn from_patterns(level: usize, patterns: Vec<Pattern>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::LevelTooLarge {
                level,
                max: MAX_LEVEL,
            });
        }
        for p in &patterns {
            let ok = match p.loop_order() {
                Some(k) => k <= level,
                None => p.len() == 2,
            };
            if !ok {
                return Err(Error::InvalidPattern(p.to_string()));
            }
        }
        let set = Self::assemble(level, patterns);
        if set.with_length(2) != ForbiddenSet::degenerate().patterns() {
            return Err(Error::Inconsistent(
                "forbidden set lacks the degenerate pair 13/31".into(),
            ));
        }
        Ok(set)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// All patterns in canonical order.
    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn with_length(&self, len: usize) -> &[Pattern] {
        self.by_length
            .get(&len)
            .map_or(&[][..], |r| &self.patterns[r.clone()])
    }

    /// Number of primitive loops of order `k`.
    pub fn count_of_order(&self, k: usize) -> usize {
        if k == 0 {
            0
        } else {
            self.with_length(3 * k).len()
        }
    }

    pub fn max_pattern_len(&self) -> usize {
        self.by_length.keys().next_back().copied().unwrap_or(0)
    }

    pub fn contains(&self, p: &Pattern) -> bool {
        self.with_length(p.len()).binary_search(p).is_ok()
    }

    pub fn trie(&self) -> &SuffixTrie {
        &self.trie
    }

    /// True iff some member is a suffix of the `len`-step word `code`.
    #[inline]
    pub fn blocks_code(&self, code: u64, len: usize) -> bool {
        self.trie.matches_code(code, len)
    }

    /// The level `n + 1` set.
    pub fn extend(&self) -> Result<ForbiddenSet> {
        let k = self.level + 1;
        if k > MAX_LEVEL {
            return Err(Error::LevelTooLarge {
                level: k,
                max: MAX_LEVEL,
            });
        }
        let mut patterns = self.patterns.clone();
        patterns.extend(enumerate_primitive_loops(k, self)?);
        Ok(Self::assemble(k, patterns))
    }

    /// The subset of level `level <= self.level()`.
    pub fn restrict(&self, level: usize) -> Result<ForbiddenSet> {
        if level > self.level {
            return Err(Error::LevelMismatch {
                expected: level,
                found: self.level,
            });
        }
        let keep = self
            .patterns
            .iter()
            .filter(|p| p.loop_order().is_none_or(|k| k <= level))
            .cloned()
            .collect();
        Ok(Self::assemble(level, keep))
    }
}

/// All loops of order `k` that avoid every member of `lower` (the level
/// `k - 1` set), in canonical order.
pub fn enumerate_primitive_loops(k: usize, lower: &ForbiddenSet) -> Result<Vec<Pattern>> {
    if k == 0 {
        return Err(Error::InvalidArgument("loop order must be >= 1".into()));
    }
    if lower.level() + 1 != k {
        return Err(Error::LevelMismatch {
            expected: k - 1,
            found: lower.level(),
        });
    }
    let trie = lower.trie();
    // Splitting on the first step keeps the canonical (lexicographic) order
    // when the three branches are concatenated.
    let branches: Vec<Vec<Pattern>> = (0u8..3)
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            let mut remaining = [k; 3];
            remaining[first as usize] -= 1;
            let mut buf = Vec::with_capacity(3 * k);
            buf.push(first);
            extend_balanced(trie, 3 * k, &mut buf, &mut remaining, &mut out);
            out
        })
        .collect();
    Ok(branches.into_iter().flatten().collect())
}

fn extend_balanced(
    trie: &SuffixTrie,
    total: usize,
    buf: &mut Vec<u8>,
    remaining: &mut [usize; 3],
    out: &mut Vec<Pattern>,
) {
    if buf.len() == total {
        out.push(Pattern::from_digits(buf));
        return;
    }
    for d in 0u8..3 {
        if remaining[d as usize] == 0 {
            continue;
        }
        buf.push(d);
        if !trie.matches_suffix(buf.iter().rev().copied()) {
            remaining[d as usize] -= 1;
            extend_balanced(trie, total, buf, remaining, out);
            remaining[d as usize] += 1;
        }
        buf.pop();
    }
}

pub fn build_forbidden_set(n: usize) -> Result<ForbiddenSet> {
    if n > MAX_LEVEL {
        return Err(Error::LevelTooLarge {
            level: n,
            max: MAX_LEVEL,
        });
    }
    let mut set = ForbiddenSet::degenerate();
    for _ in 0..n {
        set = set.extend()?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pats(list: &[&str]) -> Vec<Pattern> {
        list.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn step_weights() {
        let p = Parameters::new(1.0, 1.0, 0.5).unwrap();
        assert_eq!(step_weight(Step::S2, &p), 0.5);
        let p = Parameters::new(2.0, 1.0, 0.3).unwrap();
        assert_eq!(step_weight(Step::S1, &p), 0.5);
        let p = Parameters::new(2.0, 3.0, 0.7).unwrap();
        assert_eq!(step_weight(Step::S3, &p), 1.5);
    }

    #[test]
    fn displacements() {
        assert_eq!(Step::S1.displacement(), (-1, -1));
        assert_eq!(Step::S2.displacement(), (2, 0));
        assert_eq!(Step::S3.displacement(), (-1, 1));
    }

    #[test]
    fn pattern_parsing() {
        let p: Pattern = "123".parse().unwrap();
        assert_eq!(p.steps(), &[Step::S1, Step::S2, Step::S3]);
        assert_eq!(p.to_string(), "123");
        assert!("1".parse::<Pattern>().is_err());
        assert!("".parse::<Pattern>().is_err());
        assert!("124".parse::<Pattern>().is_err());
    }

    #[test]
    fn canonical_order_is_length_then_lex() {
        let mut v = pats(&["321", "31", "123", "13", "112233"]);
        v.sort();
        let text: Vec<String> = v.iter().map(|p| p.to_string()).collect();
        assert_eq!(text, ["13", "31", "123", "321", "112233"]);
    }

    #[test]
    fn order_one_and_two_loops() {
        let f0 = ForbiddenSet::degenerate();
        assert_eq!(f0.len(), 2);
        assert_eq!(
            enumerate_primitive_loops(1, &f0).unwrap(),
            pats(&["123", "321"])
        );
        let f1 = build_forbidden_set(1).unwrap();
        assert_eq!(
            enumerate_primitive_loops(2, &f1).unwrap(),
            pats(&["112233", "332211"])
        );
        assert_eq!(enumerate_primitive_loops(3, &build_forbidden_set(2).unwrap()).unwrap().len(), 6);
    }

    #[test]
    fn degenerate_pair_blocks_order_two_candidates() {
        // Balanced and free of 123/321, but contains 13.
        let cand: Pattern = "122133".parse().unwrap();
        assert_eq!(cand.loop_order(), Some(2));
        let f1 = build_forbidden_set(1).unwrap();
        assert!(!f1.extend().unwrap().contains(&cand));
    }

    #[test]
    fn wrong_lower_level_is_rejected() {
        let f1 = build_forbidden_set(1).unwrap();
        assert!(matches!(
            enumerate_primitive_loops(3, &f1),
            Err(Error::LevelMismatch { .. })
        ));
        assert!(enumerate_primitive_loops(0, &f1).is_err());
    }

    #[test]
    fn cumulative_counts_small_levels() {
        let expected = [2, 4, 6, 12, 36, 146];
        for (n, &c) in expected.iter().enumerate() {
            assert_eq!(build_forbidden_set(n).unwrap().len(), c, "level {n}");
        }
    }

    #[test]
    fn level_cap() {
        assert!(matches!(
            build_forbidden_set(MAX_LEVEL + 1),
            Err(Error::LevelTooLarge { .. })
        ));
    }

    #[test]
    fn loops_are_balanced_and_closed() {
        let f = build_forbidden_set(4).unwrap();
        for p in f.patterns().iter().filter(|p| p.len() > 2) {
            let k = p.len() / 3;
            assert_eq!(p.counts(), [k, k, k]);
            assert_eq!(p.displacement(), (0, 0));
        }
    }

    #[test]
    fn mutual_primitivity() {
        let f = build_forbidden_set(4).unwrap();
        for a in f.patterns() {
            for b in f.patterns() {
                if a != b {
                    assert!(!a.contains_factor(b), "{b} inside {a}");
                }
            }
        }
    }

    #[test]
    fn suffix_queries() {
        let f1 = build_forbidden_set(1).unwrap();
        // "2213": newest step last
        assert!(f1.trie().matches_suffix([2u8, 0, 1, 1]));
        assert!(!f1.trie().matches_suffix([1u8, 0, 1, 1]));
    }

    #[test]
    fn restrict_and_rebuild() {
        let f3 = build_forbidden_set(3).unwrap();
        assert_eq!(f3.restrict(2).unwrap(), build_forbidden_set(2).unwrap());
        let again = ForbiddenSet::from_patterns(3, f3.patterns().to_vec()).unwrap();
        assert_eq!(again, f3);
        assert!(ForbiddenSet::from_patterns(1, f3.patterns().to_vec()).is_err());
        assert!(ForbiddenSet::from_patterns(1, pats(&["123", "321"])).is_err());
    }

    proptest! {
        #[test]
        fn pattern_text_round_trip(digits in proptest::collection::vec(0u8..3, 2..40)) {
            let p = Pattern::from_digits(&digits);
            let back: Pattern = p.to_string().parse().unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn trie_code_query_matches_digit_query(digits in proptest::collection::vec(0u8..3, 1..30)) {
            let f = build_forbidden_set(3).unwrap();
            let code = digits.iter().fold(0u64, |c, &d| c * 3 + d as u64);
            prop_assert_eq!(
                f.blocks_code(code, digits.len()),
                f.trie().matches_suffix(digits.iter().rev().copied())
            );
        }
    }
}
