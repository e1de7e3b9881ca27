//! Command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 result not
//! certified, 3 resource limit.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::level::{CacheStatus, Level};
use crate::patterns::{build_forbidden_set, MAX_LEVEL};
use crate::search::{alpha_sup_with, optimize_p, PGrid, SearchOptions, DEFAULT_ALPHA_TOL};
use crate::spectral::{IterationOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::statespace::{projected_bytes, projected_states, Limits};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNCERTIFIED: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

/// Highest level run without `--deep`.
pub const SHALLOW_MAX_LEVEL: usize = 6;
pub const SHALLOW_MAX_TABLE: usize = 5;
pub const DEEP_MAX_TABLE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "stavskaya", version, about = "Transfer-matrix lower bounds for Stavskaya's process")]
pub struct Cli {
    /// Directory for per-level binary caches
    #[arg(long, global = true, default_value = "./cache")]
    pub cache_dir: PathBuf,

    /// Build everything in memory without reading or writing caches
    #[arg(long, global = true)]
    pub no_cache: bool,

    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Count (and optionally list) the forbidden patterns of a level
    Loops {
        #[arg(long)]
        n: usize,
        /// List every pattern as a digit string
        #[arg(long)]
        dump: bool,
    },
    /// Build (or load) the state space and transitions of a level
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        deep: bool,
    },
    /// Bisect for the largest certified alpha at fixed p and q
    Bound {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[command(flatten)]
        search: SearchArgs,
        /// Allow levels above 6
        #[arg(long)]
        deep: bool,
    },
    /// Optimize p for every level up to n-max
    Table {
        #[arg(long)]
        n_max: usize,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 1.30)]
        p_min: f64,
        #[arg(long, default_value_t = 1.60)]
        p_max: f64,
        #[arg(long, default_value_t = 0.005)]
        p_step: f64,
        #[arg(long, default_value_t = 0.001)]
        p_refine: f64,
        #[command(flatten)]
        search: SearchArgs,
        /// Allow levels 6 and 7
        #[arg(long)]
        deep: bool,
    },
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA_TOL)]
    pub alpha_tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
}

impl SearchArgs {
    fn options(&self) -> SearchOptions {
        SearchOptions {
            alpha_tol: self.alpha_tol,
            iteration: IterationOptions {
                tol: DEFAULT_TOL,
                max_iter: self.max_iter,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct IterationCounts {
    pub bisection: usize,
    pub power: usize,
}

/// Report of a single `bound` run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub level: usize,
    pub p: f64,
    pub q: f64,
    pub alpha_lower_bound: f64,
    pub certificate: f64,
    pub certified: bool,
    pub iterations: IterationCounts,
    pub states: usize,
    pub forbidden_patterns: usize,
    pub cache_status: CacheStatus,
    pub elapsed_seconds: f64,
    pub version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub level: usize,
    pub primitive_loops: usize,
    pub states: usize,
    pub p_opt: f64,
    pub q: f64,
    pub alpha_lower_bound: f64,
    pub certificate: f64,
    pub power_iterations: usize,
    pub cache_status: CacheStatus,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderCount {
    pub order: usize,
    pub count: usize,
    pub cumulative: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopsReport {
    pub level: usize,
    pub orders: Vec<OrderCount>,
    pub total: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub level: usize,
    pub memory: usize,
    pub forbidden_patterns: usize,
    pub states: usize,
    pub edges: usize,
    pub zero_out_degree: usize,
    pub cache_status: CacheStatus,
    pub elapsed_seconds: f64,
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = write!(out, "{}", e.render());
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // Already-initialized pools (repeated in-process runs) keep their size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_resource_limit() {
                EXIT_RESOURCE
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn cache_dir(cli: &Cli) -> Option<&Path> {
    (!cli.no_cache).then_some(cli.cache_dir.as_path())
}

fn guard_level(n: usize, deep: bool, shallow_max: usize, deep_max: usize) -> Result<()> {
    if n == 0 || n > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "level must be in 1..={MAX_LEVEL}, got {n}"
        )));
    }
    let cap = if deep { deep_max } else { shallow_max };
    if n > cap {
        let hint = if deep { "" } else { "; pass --deep to allow it" };
        return Err(Error::ResourceLimit(format!(
            "level {n} projects to ~{:.1e} states and ~{:.1} GiB{hint}",
            projected_states(n),
            projected_bytes(n) / (1u64 << 30) as f64
        )));
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Loops { n, dump } => cmd_loops(cli, *n, *dump, out),
        Command::Build { n, deep } => {
            guard_level(*n, *deep, SHALLOW_MAX_LEVEL, MAX_LEVEL)?;
            let started = Instant::now();
            let (level, cache_status) = Level::load_or_build(*n, cache_dir(cli), &Limits::default())?;
            let report = BuildReport {
                level: *n,
                memory: level.states.memory(),
                forbidden_patterns: level.forbidden.len(),
                states: level.states.len(),
                edges: level.table.edge_count(),
                zero_out_degree: level.table.zero_out_degree_count(),
                cache_status,
                elapsed_seconds: started.elapsed().as_secs_f64(),
            };
            emit(cli.format, &[report], out, |r| {
                format!(
                    "level {}: {} forbidden patterns, {} states, {} edges, {} without successors ({:?}, {:.2}s)",
                    r.level, r.forbidden_patterns, r.states, r.edges, r.zero_out_degree,
                    r.cache_status, r.elapsed_seconds
                )
            })?;
            Ok(EXIT_OK)
        }
        Command::Bound {
            n,
            p,
            q,
            search,
            deep,
        } => cmd_bound(cli, *n, *p, *q, search, *deep, out),
        Command::Table {
            n_max,
            q,
            p_min,
            p_max,
            p_step,
            p_refine,
            search,
            deep,
        } => {
            let grid = PGrid {
                p_min: *p_min,
                p_max: *p_max,
                coarse_step: *p_step,
                refine_step: *p_refine,
            };
            cmd_table(cli, *n_max, *q, &grid, search, *deep, out)
        }
    }
}

fn cmd_loops(cli: &Cli, n: usize, dump: bool, out: &mut dyn Write) -> Result<i32> {
    if n > MAX_LEVEL {
        return Err(Error::InvalidArgument(format!(
            "level must be in 0..={MAX_LEVEL}, got {n}"
        )));
    }
    let set = build_forbidden_set(n)?;
    let mut cumulative = set.with_length(2).len();
    let mut orders = vec![OrderCount {
        order: 0,
        count: cumulative,
        cumulative,
    }];
    for k in 1..=n {
        let count = set.count_of_order(k);
        cumulative += count;
        orders.push(OrderCount {
            order: k,
            count,
            cumulative,
        });
    }
    let report = LoopsReport {
        level: n,
        orders,
        total: set.len(),
        patterns: dump.then(|| set.patterns().iter().map(|p| p.to_string()).collect()),
    };
    match cli.format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => write_csv(out, &report.orders)?,
        Format::Text => {
            writeln!(out, "order  count  cumulative")?;
            for o in &report.orders {
                writeln!(out, "{:>5}  {:>5}  {:>10}", o.order, o.count, o.cumulative)?;
            }
            writeln!(out, "level {} total {}", report.level, report.total)?;
        }
    }
    if dump && cli.format != Format::Json {
        for p in set.patterns() {
            writeln!(out, "{p}")?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_bound(
    cli: &Cli,
    n: usize,
    p: f64,
    q: f64,
    search: &SearchArgs,
    deep: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    guard_level(n, deep, SHALLOW_MAX_LEVEL, MAX_LEVEL)?;
    crate::params::Parameters::new(p, q, 0.0)?;
    let started = Instant::now();
    let (level, cache_status) = Level::load_or_build(n, cache_dir(cli), &Limits::default())?;
    let r = alpha_sup_with(&level.table, p, q, &search.options())?;
    let report = RunReport {
        level: n,
        p,
        q,
        alpha_lower_bound: r.alpha_low,
        certificate: r.certificate,
        certified: !r.degenerate,
        iterations: IterationCounts {
            bisection: r.iterations,
            power: r.power_iterations,
        },
        states: level.states.len(),
        forbidden_patterns: level.forbidden.len(),
        cache_status,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        version: VERSION,
    };
    match cli.format {
        Format::Json => write_json(out, &report)?,
        Format::Csv => write_csv(out, &[FlatRunReport::from(&report)])?,
        Format::Text => {
            if report.certified {
                writeln!(
                    out,
                    "level {} p {} q {}: alpha_c > {:.10} (certificate {:.12}, {} states)",
                    n, p, q, report.alpha_lower_bound, report.certificate, report.states
                )?;
            } else {
                writeln!(
                    out,
                    "level {n} p {p} q {q}: alpha = 0 is not certified subcritical (certificate {:.12})",
                    report.certificate
                )?;
            }
        }
    }
    Ok(if report.certified {
        EXIT_OK
    } else {
        EXIT_UNCERTIFIED
    })
}

fn cmd_table(
    cli: &Cli,
    n_max: usize,
    q: f64,
    grid: &PGrid,
    search: &SearchArgs,
    deep: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    guard_level(n_max, deep, SHALLOW_MAX_TABLE, DEEP_MAX_TABLE)?;
    let mut rows = Vec::new();
    let mut all_certified = true;
    for n in 1..=n_max {
        let started = Instant::now();
        let (level, cache_status) = Level::load_or_build(n, cache_dir(cli), &Limits::default())?;
        let r = optimize_p(&level.table, grid, q, &search.options())?;
        all_certified &= r.bound > 0.0;
        rows.push(TableRow {
            level: n,
            primitive_loops: level.forbidden.len(),
            states: level.states.len(),
            p_opt: r.p_opt,
            q,
            alpha_lower_bound: r.bound,
            certificate: r.certificate,
            power_iterations: r.power_iterations,
            cache_status,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        });
    }
    match cli.format {
        Format::Json => write_json(out, &rows)?,
        Format::Csv => write_csv(out, &rows)?,
        Format::Text => {
            writeln!(out, " n  primitive loops  state space size   p_opt  lower bound")?;
            for r in &rows {
                writeln!(
                    out,
                    "{:>2}  {:>15}  {:>16}  {:>6.3}  {:.8}",
                    r.level, r.primitive_loops, r.states, r.p_opt, r.alpha_lower_bound
                )?;
            }
        }
    }
    Ok(if all_certified {
        EXIT_OK
    } else {
        EXIT_UNCERTIFIED
    })
}

#[derive(Serialize)]
struct FlatRunReport {
    level: usize,
    p: f64,
    q: f64,
    alpha_lower_bound: f64,
    certificate: f64,
    certified: bool,
    bisection_iterations: usize,
    power_iterations: usize,
    states: usize,
    forbidden_patterns: usize,
    cache_status: CacheStatus,
    elapsed_seconds: f64,
    version: &'static str,
}

impl From<&RunReport> for FlatRunReport {
    fn from(r: &RunReport) -> Self {
        Self {
            level: r.level,
            p: r.p,
            q: r.q,
            alpha_lower_bound: r.alpha_lower_bound,
            certificate: r.certificate,
            certified: r.certified,
            bisection_iterations: r.iterations.bisection,
            power_iterations: r.iterations.power,
            states: r.states,
            forbidden_patterns: r.forbidden_patterns,
            cache_status: r.cache_status,
            elapsed_seconds: r.elapsed_seconds,
            version: r.version,
        }
    }
}

fn write_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    writeln!(out)?;
    Ok(())
}

fn write_csv<T: Serialize>(out: &mut dyn Write, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(&mut *out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

fn emit<T: Serialize>(
    format: Format,
    rows: &[T],
    out: &mut dyn Write,
    text: impl Fn(&T) -> String,
) -> Result<()> {
    match format {
        Format::Json if rows.len() == 1 => write_json(out, &rows[0]),
        Format::Json => write_json(out, rows),
        Format::Csv => write_csv(out, rows),
        Format::Text => {
            for r in rows {
                writeln!(out, "{}", text(r))?;
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run(args.iter().copied(), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn loops_counts() {
        let (code, out) = run_capture(&["stavskaya", "--no-cache", "loops", "--n", "3"]);
        assert_eq!(code, EXIT_OK);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["total"], 12);
        assert_eq!(v["orders"][3]["count"], 6);

        let (_, out) = run_capture(&["stavskaya", "--format", "text", "loops", "--n", "0", "--dump"]);
        assert!(out.contains("level 0 total 2"));
        assert!(out.lines().any(|l| l == "13"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_capture(&["stavskaya", "bound"]).0, EXIT_USAGE);
        assert_eq!(run_capture(&["stavskaya", "loops", "--n", "99"]).0, EXIT_USAGE);
        assert_eq!(
            run_capture(&["stavskaya", "--no-cache", "bound", "--n", "1", "--p", "0.5"]).0,
            EXIT_USAGE
        );
        assert_eq!(run_capture(&["stavskaya", "--help"]).0, EXIT_OK);
    }

    #[test]
    fn deep_guard() {
        let (code, _) = run_capture(&["stavskaya", "--no-cache", "bound", "--n", "7", "--p", "1.415"]);
        assert_eq!(code, EXIT_RESOURCE);
        let (code, _) = run_capture(&["stavskaya", "--no-cache", "table", "--n-max", "6"]);
        assert_eq!(code, EXIT_RESOURCE);
        let (code, _) = run_capture(&["stavskaya", "--no-cache", "table", "--n-max", "8", "--deep"]);
        assert_eq!(code, EXIT_RESOURCE);
    }
}
