//! The weighted one-step operator `M = w1 M^(1) + w2 M^(2) + w3 M^(3)` and
//! power iteration with Collatz–Wielandt certificates.
//!
//! For a nonnegative matrix `M` and any strictly positive vector `v`,
//!
//! ```text
//! min_i (Mv)_i / v_i  <=  rho(M)  <=  max_i (Mv)_i / v_i
//! ```
//!
//! so every iterate yields a two-sided bracket on the spectral radius. The
//! iteration adds `INJECTION * max(v)` to every entry after each product;
//! this keeps the iterate strictly positive on states the dominant class
//! never feeds (which happens, for instance, at `alpha = 0` where every
//! kind-2 edge has weight zero), and the bracket is always computed against
//! the exact operator.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::statespace::TransitionTable;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Relative positive term added to each iterate.
pub const INJECTION: f64 = 1e-14;

const CHUNK: usize = 1 << 13;

/// Nonnegative per-state weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight entry {i} is {}, expected a finite nonnegative value",
                entries[i]
            )));
        }
        Ok(Self(entries))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.0)
    }
}

fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 64 {
        x.iter().sum()
    } else {
        let (a, b) = x.split_at(x.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// Last infinity-norm growth ratio.
    pub estimate: f64,
    /// Collatz–Wielandt upper bound `max_i (Mv)_i / v_i` on the final vector.
    pub certified_upper: f64,
    /// Collatz–Wielandt lower bound `min_i (Mv)_i / v_i` on the final vector.
    pub certified_lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Result of deciding `rho < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub subcritical: bool,
    pub spectral: SpectralEstimate,
}

#[derive(Debug, Clone, Copy)]
struct RatioStats {
    norm: f64,
    upper: f64,
    lower: f64,
}

impl RatioStats {
    fn empty() -> Self {
        Self {
            norm: 0.0,
            upper: 0.0,
            lower: f64::INFINITY,
        }
    }

    fn merge(a: Self, b: Self) -> Self {
        Self {
            norm: a.norm.max(b.norm),
            upper: a.upper.max(b.upper),
            lower: a.lower.min(b.lower),
        }
    }
}

fn check_len(table: &TransitionTable, len: usize) -> Result<()> {
    if table.state_count() != len {
        return Err(Error::DimensionMismatch {
            expected: table.state_count(),
            found: len,
        });
    }
    Ok(())
}

/// out = M v in gather form.
fn gather(table: &TransitionTable, weights: [f64; 3], v: &[f64], out: &mut [f64]) {
    let offsets = table.pred_offsets();
    let sources = table.pred_sources();
    let kinds = table.kinds();
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let base = c * CHUNK;
        for (k, slot) in chunk.iter_mut().enumerate() {
            let t = base + k;
            let lo = offsets[t] as usize;
            let hi = offsets[t + 1] as usize;
            let s: f64 = sources[lo..hi].iter().map(|&s| v[s as usize]).sum();
            *slot = weights[kinds[t] as usize] * s;
        }
    });
}

/// out = M v, returning the infinity norm of `out` and the ratio bracket.
/// Requires `v > 0` entrywise.
fn gather_with_ratios(
    table: &TransitionTable,
    weights: [f64; 3],
    v: &[f64],
    out: &mut [f64],
) -> RatioStats {
    let offsets = table.pred_offsets();
    let sources = table.pred_sources();
    let kinds = table.kinds();
    out.par_chunks_mut(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CHUNK;
            let mut st = RatioStats::empty();
            for (k, slot) in chunk.iter_mut().enumerate() {
                let t = base + k;
                let lo = offsets[t] as usize;
                let hi = offsets[t + 1] as usize;
                let s: f64 = sources[lo..hi].iter().map(|&s| v[s as usize]).sum();
                let y = weights[kinds[t] as usize] * s;
                *slot = y;
                let r = y / v[t];
                st.norm = st.norm.max(y);
                st.upper = st.upper.max(r);
                st.lower = st.lower.min(r);
            }
            st
        })
        .reduce(RatioStats::empty, RatioStats::merge)
}

pub fn apply_operator(
    table: &TransitionTable,
    params: &Parameters,
    v: &WeightVector,
) -> Result<WeightVector> {
    check_len(table, v.len())?;
    let mut out = vec![0.0; v.len()];
    gather(table, params.step_weights(), v.as_slice(), &mut out);
    Ok(WeightVector(out))
}

/// `max_i (Mv)_i / v_i` for a strictly positive `v`; an upper bound on `rho(M)`.
pub fn certified_upper_bound(
    table: &TransitionTable,
    params: &Parameters,
    v: &WeightVector,
) -> Result<f64> {
    check_len(table, v.len())?;
    if let Some(index) = v.as_slice().iter().position(|&x| x <= 0.0) {
        return Err(Error::NonPositiveEntry { index });
    }
    let mut out = vec![0.0; v.len()];
    Ok(gather_with_ratios(table, params.step_weights(), v.as_slice(), &mut out).upper)
}

/// Iteration settings shared by the power method and the subcriticality test.
#[derive(Debug, Clone, Copy)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl IterationOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum StopRule {
    /// Run until the norm ratio settles.
    Converge,
    /// Also stop as soon as the bracket lies on one side of 1.
    DecideUnit,
}

/// Rescale `v` to unit max and lift every entry to at least `INJECTION`.
fn prepare(v: &mut [f64]) -> Result<()> {
    let m = v.iter().copied().fold(0.0, f64::max);
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::InvalidArgument(
            "iteration vector must have a positive finite entry".into(),
        ));
    }
    let inv = 1.0 / m;
    v.par_iter_mut()
        .for_each(|x| *x = (*x * inv).max(INJECTION));
    Ok(())
}

fn iterate(
    table: &TransitionTable,
    params: &Parameters,
    opts: &IterationOptions,
    v: &mut WeightVector,
    rule: StopRule,
) -> Result<(SpectralEstimate, Option<bool>)> {
    opts.validate()?;
    check_len(table, v.len())?;
    if v.is_empty() {
        return Err(Error::InvalidArgument("empty state space".into()));
    }
    prepare(&mut v.0)?;
    let weights = params.step_weights();
    let mut y = vec![0.0; v.len()];
    let mut prev = f64::NAN;
    // Largest relative entry change in the last update. Entries near the
    // injection floor matter for the certificate, so this is per entry.
    let mut shift = f64::INFINITY;
    let mut last = SpectralEstimate {
        estimate: f64::NAN,
        certified_upper: f64::INFINITY,
        certified_lower: 0.0,
        iterations: 0,
        converged: false,
    };

    for it in 1..=opts.max_iter {
        // v has unit max, so the norm of y is the growth ratio.
        let st = gather_with_ratios(table, weights, &v.0, &mut y);
        last = SpectralEstimate {
            estimate: st.norm,
            certified_upper: st.upper,
            certified_lower: st.lower,
            iterations: it,
            converged: false,
        };
        if st.norm == 0.0 {
            // M v = 0 with v > 0 forces M = 0.
            last.converged = true;
            return Ok((last, Some(true)));
        }
        if rule == StopRule::DecideUnit {
            if st.upper < 1.0 {
                return Ok((last, Some(true)));
            }
            if st.lower >= 1.0 {
                return Ok((last, Some(false)));
            }
        }
        if (st.norm - prev).abs() <= opts.tol * st.norm && shift <= opts.tol {
            last.converged = true;
            return Ok((last, None));
        }
        prev = st.norm;
        let scale = 1.0 / (st.norm + INJECTION);
        shift = v
            .0
            .par_iter_mut()
            .zip(y.par_iter())
            .map(|(x, &yi)| {
                let next = (yi + INJECTION) * scale;
                let d = (next - *x).abs() / next;
                *x = next;
                d
            })
            .reduce(|| 0.0, f64::max);
    }
    Ok((last, None))
}

/// Power iteration from the all-ones vector.
pub fn power_iteration(
    table: &TransitionTable,
    params: &Parameters,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralEstimate> {
    let mut v = WeightVector::ones(table.state_count());
    power_iteration_from(table, params, &IterationOptions { tol, max_iter }, &mut v)
}

/// Power iteration from `v`, which is left holding the vector the returned
/// certificates were computed on.
pub fn power_iteration_from(
    table: &TransitionTable,
    params: &Parameters,
    opts: &IterationOptions,
    v: &mut WeightVector,
) -> Result<SpectralEstimate> {
    iterate(table, params, opts, v, StopRule::Converge).map(|(est, _)| est)
}

/// Decide `rho(M) < 1`, warm-starting from `v`.
///
/// Returns `true` only with a Collatz–Wielandt certificate below one.
/// Stops early once the bracket excludes 1; otherwise, when the iteration
/// converges or runs out of iterations, the answer is whether the final
/// upper bound is below one (i.e. `false` unless certified).
pub fn check_subcritical(
    table: &TransitionTable,
    params: &Parameters,
    opts: &IterationOptions,
    v: &mut WeightVector,
) -> Result<Verdict> {
    let (spectral, decided) = iterate(table, params, opts, v, StopRule::DecideUnit)?;
    let subcritical = decided.unwrap_or(spectral.certified_upper < 1.0);
    Ok(Verdict {
        subcritical,
        spectral,
    })
}

pub fn is_subcritical(table: &TransitionTable, params: &Parameters, tol: f64) -> Result<bool> {
    let mut v = WeightVector::ones(table.state_count());
    let opts = IterationOptions {
        tol,
        ..Default::default()
    };
    check_subcritical(table, params, &opts, &mut v).map(|v| v.subcritical)
}
