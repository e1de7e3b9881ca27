//! Bisection for the largest certified-subcritical `alpha` at fixed `(p, q)`
//! and the outer grid search over `p`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::spectral::{
    certified_upper_bound, check_subcritical, IterationOptions, WeightVector,
};
use crate::statespace::TransitionTable;

pub const DEFAULT_ALPHA_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Final bracket width in `alpha`.
    pub alpha_tol: f64,
    pub iteration: IterationOptions,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            alpha_tol: DEFAULT_ALPHA_TOL,
            iteration: IterationOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BisectionResult {
    pub p: f64,
    pub q: f64,
    /// Largest midpoint certified subcritical (0 when degenerate).
    pub alpha_low: f64,
    /// Smallest midpoint not certified.
    pub alpha_high: f64,
    /// Bisection steps taken.
    pub iterations: usize,
    /// Power-iteration steps summed over all midpoints.
    pub power_iterations: usize,
    /// Collatz–Wielandt bound at `alpha_low`, recomputed on the stored vector.
    pub certificate: f64,
    /// Set when `alpha = 0` is already not certified subcritical.
    pub degenerate: bool,
    /// Bracket history `(low, high)` after each step.
    #[serde(skip)]
    pub brackets: Vec<(f64, f64)>,
}

/// Bisection on `[0, 1]` with the default iteration settings.
pub fn alpha_sup(table: &TransitionTable, p: f64, q: f64, tol: f64) -> Result<BisectionResult> {
    let opts = SearchOptions {
        alpha_tol: tol,
        ..Default::default()
    };
    alpha_sup_with(table, p, q, &opts)
}

pub fn alpha_sup_with(
    table: &TransitionTable,
    p: f64,
    q: f64,
    opts: &SearchOptions,
) -> Result<BisectionResult> {
    if !(opts.alpha_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha tolerance must be positive, got {}",
            opts.alpha_tol
        )));
    }
    let base = Parameters::new(p, q, 0.0)?;
    let mut v = WeightVector::ones(table.state_count());
    let start = check_subcritical(table, &base, &opts.iteration, &mut v)?;
    let mut power_iterations = start.spectral.iterations;
    if !start.subcritical {
        return Ok(BisectionResult {
            p,
            q,
            alpha_low: 0.0,
            alpha_high: 0.0,
            iterations: 0,
            power_iterations,
            certificate: start.spectral.certified_upper,
            degenerate: true,
            brackets: Vec::new(),
        });
    }

    let mut certified = v.clone();
    let (mut low, mut high) = (0.0f64, 1.0f64);
    let mut brackets = Vec::new();
    while high - low > opts.alpha_tol {
        let mid = 0.5 * (low + high);
        let verdict = check_subcritical(table, &base.with_alpha(mid)?, &opts.iteration, &mut v)?;
        power_iterations += verdict.spectral.iterations;
        if verdict.subcritical {
            low = mid;
            certified.clone_from(&v);
        } else {
            high = mid;
        }
        brackets.push((low, high));
    }

    let certificate = certified_upper_bound(table, &base.with_alpha(low)?, &certified)?;
    if certificate >= 1.0 {
        return Err(Error::Inconsistent(format!(
            "certificate {certificate} at alpha {low} is not below one"
        )));
    }
    Ok(BisectionResult {
        p,
        q,
        alpha_low: low,
        alpha_high: high,
        iterations: brackets.len(),
        power_iterations,
        certificate,
        degenerate: false,
        brackets,
    })
}

/// Coarse-then-refined grid over `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PGrid {
    pub p_min: f64,
    pub p_max: f64,
    pub coarse_step: f64,
    pub refine_step: f64,
}

impl Default for PGrid {
    fn default() -> Self {
        Self {
            p_min: 1.30,
            p_max: 1.60,
            coarse_step: 0.005,
            refine_step: 0.001,
        }
    }
}

fn round_grid(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

fn points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| round_grid(lo + i as f64 * step)).collect()
}

impl PGrid {
    fn validate(&self) -> Result<()> {
        if !(self.p_min >= 1.0 && self.p_min < self.p_max && self.p_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "p range must satisfy 1 <= p_min < p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if !(self.coarse_step > 0.0 && self.refine_step > 0.0) {
            return Err(Error::InvalidArgument("grid steps must be positive".into()));
        }
        Ok(())
    }

    pub fn coarse_points(&self) -> Vec<f64> {
        points(self.p_min, self.p_max, self.coarse_step)
    }

    /// Refined points within one coarse step of `center`, clipped to the range.
    pub fn refine_points(&self, center: f64) -> Vec<f64> {
        let lo = (center - self.coarse_step).max(self.p_min);
        let hi = (center + self.coarse_step).min(self.p_max);
        points(lo, hi, self.refine_step)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSample {
    pub p: f64,
    pub alpha_low: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    pub n: usize,
    pub p_opt: f64,
    pub q: f64,
    /// Certified `alpha_low` at `p_opt`.
    pub bound: f64,
    pub certificate: f64,
    pub power_iterations: usize,
    /// Every evaluated `p`, in increasing order.
    pub grid: Vec<GridSample>,
}

fn best(results: &[BisectionResult]) -> Option<&BisectionResult> {
    // Largest bound; ties go to the smaller p.
    results.iter().fold(None, |acc: Option<&BisectionResult>, r| match acc {
        Some(b) if b.alpha_low > r.alpha_low || (b.alpha_low == r.alpha_low && b.p <= r.p) => {
            Some(b)
        }
        _ => Some(r),
    })
}

pub fn optimize_p(
    table: &TransitionTable,
    grid: &PGrid,
    q: f64,
    opts: &SearchOptions,
) -> Result<OptimizationResult> {
    grid.validate()?;
    Parameters::new(grid.p_min, q, 0.0)?;
    let run = |ps: &[f64]| -> Result<Vec<BisectionResult>> {
        ps.par_iter()
            .map(|&p| alpha_sup_with(table, p, q, opts))
            .collect()
    };

    let mut results = run(&grid.coarse_points())?;
    let center = best(&results).map(|b| b.p).unwrap_or(grid.p_min);
    let fresh: Vec<f64> = grid
        .refine_points(center)
        .into_iter()
        .filter(|p| results.iter().all(|r| (r.p - p).abs() > 1e-12))
        .collect();
    results.extend(run(&fresh)?);
    results.sort_by(|a, b| a.p.total_cmp(&b.p));

    let top = best(&results).expect("grid is non-empty");
    Ok(OptimizationResult {
        n: table.level(),
        p_opt: top.p,
        q,
        bound: top.alpha_low,
        certificate: top.certificate,
        power_iterations: results.iter().map(|r| r.power_iterations).sum(),
        grid: results
            .iter()
            .map(|r| GridSample {
                p: r.p,
                alpha_low: r.alpha_low,
                degenerate: r.degenerate,
            })
            .collect(),
    })
}
