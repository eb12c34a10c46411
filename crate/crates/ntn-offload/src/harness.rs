//! Experiment harness: TOML configuration, deterministic seeding, the
//! scheme sweep, and CSV emission.
//!
//! Every cell of a sweep (a HUE count, a bandwidth, a run index) derives
//! its instance seed from `base_seed`, the HUE count and the run index
//! only. Bandwidth deliberately stays out of the hash so runs at
//! different bandwidths price the exact same geometry and shadowing,
//! and adding or removing sweep cells never perturbs the others.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{brute_force_optimal, random_scheme, Scheme, Solution};
use crate::benders::{benders_solve, BendersError, Mode, SolverOptions, MAX_RELAXED_HUES};
use crate::physics::{build_instance, sample_topology, Instance, PhysicsError, SystemParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub hue_counts: Vec<usize>,
    pub bandwidths_hz: Vec<f64>,
    /// Instance realizations per (HUE count, bandwidth) cell.
    pub runs: usize,
    pub base_seed: u64,
    pub mode: Mode,
    pub epsilon: f64,
    pub psi_down: f64,
    pub max_iter: usize,
    pub num_lues: usize,
    /// Fills the wall_ms column when true; leaving it off keeps repeated
    /// sweeps byte-identical.
    pub timing: bool,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            params: SystemParams::default(),
            hue_counts: (1..=10).map(|k| k * 10).collect(),
            bandwidths_hz: vec![10e6, 20e6],
            runs: 100,
            base_seed: 1,
            mode: Mode::Paper,
            epsilon: 1e-4,
            psi_down: -25.0,
            max_iter: 50,
            num_lues: 0,
            timing: false,
            output_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config parse: {0}")]
    Config(String),
    #[error("config field `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] BendersError),
    #[error("{failed} sweep rows recorded solver failures; see the error column")]
    SweepFailures { failed: usize },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads and validates a TOML config. An empty file yields the defaults;
/// unknown keys and malformed values are reported with their location.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let config: ExperimentConfig =
        toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))?;
    validate_config(&config)?;
    Ok(config)
}

pub fn validate_config(config: &ExperimentConfig) -> Result<(), HarnessError> {
    config.params.validate()?;
    let fail = |field: &'static str, reason: String| {
        Err(HarnessError::Validation { field, reason })
    };
    if config.hue_counts.is_empty() {
        return fail("hue_counts", "must list at least one HUE count".into());
    }
    if let Some(&bad) = config.hue_counts.iter().find(|&&m| m == 0) {
        return fail("hue_counts", format!("HUE count must be positive, got {bad}"));
    }
    if config.mode == Mode::Relaxed {
        if let Some(&bad) = config
            .hue_counts
            .iter()
            .find(|&&m| m > MAX_RELAXED_HUES)
        {
            return fail(
                "hue_counts",
                format!("relaxed mode enumerates 2^M decisions; {bad} exceeds the cap of {MAX_RELAXED_HUES}"),
            );
        }
    }
    if config.bandwidths_hz.is_empty() {
        return fail("bandwidths_hz", "must list at least one bandwidth".into());
    }
    if let Some(&bad) = config
        .bandwidths_hz
        .iter()
        .find(|b| !b.is_finite() || **b <= 0.0)
    {
        return fail("bandwidths_hz", format!("bandwidth must be positive, got {bad}"));
    }
    if config.runs == 0 {
        return fail("runs", "need at least one run per cell".into());
    }
    // +inf is a legitimate tolerance: the solver stops after one iteration
    if config.epsilon.is_nan() || config.epsilon <= 0.0 {
        return fail("epsilon", format!("must be positive, got {}", config.epsilon));
    }
    if !config.psi_down.is_finite() {
        return fail("psi_down", "must be finite".into());
    }
    if config.max_iter == 0 {
        return fail("max_iter", "need at least one iteration".into());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

pub(crate) fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stable per-cell seed. Depends on the base seed, the HUE count and the
/// run index; bandwidth is excluded on purpose (see the module docs).
pub fn cell_seed(base_seed: u64, num_hues: usize, run: usize) -> u64 {
    let mut s = splitmix64(base_seed);
    s = splitmix64(s ^ (num_hues as u64).wrapping_mul(0x9E3779B97F4A7C15));
    s = splitmix64(s ^ (run as u64).wrapping_mul(0xBF58476D1CE4E5B9));
    s
}

fn channel_seed(cell: u64) -> u64 {
    splitmix64(cell ^ 0xC0FFEE0DDBA11)
}

fn random_scheme_seed(cell: u64) -> u64 {
    splitmix64(cell ^ 0x5EEDBA5EBA11AD)
}

/// Builds the instance for one sweep cell.
pub fn build_cell_instance(
    config: &ExperimentConfig,
    num_hues: usize,
    bandwidth_hz: f64,
    run: usize,
) -> Result<Instance, HarnessError> {
    let mut params = config.params.clone();
    params.bandwidth_hz = bandwidth_hz;
    let cell = cell_seed(config.base_seed, num_hues, run);
    let topo = sample_topology(&params, num_hues, config.num_lues, cell)?;
    let weights = vec![1.0; num_hues];
    Ok(build_instance(&params, &topo, channel_seed(cell), &weights)?)
}

fn solver_options(config: &ExperimentConfig) -> SolverOptions {
    SolverOptions {
        epsilon: config.epsilon,
        max_iter: config.max_iter,
        mode: config.mode,
        psi_down: config.psi_down,
        initial_y: None,
    }
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// One line of results.csv.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub m_h: usize,
    pub bandwidth_hz: f64,
    pub scheme: Scheme,
    pub run: usize,
    pub run_seed: u64,
    pub objective_bps: f64,
    pub local_bps: f64,
    pub offload_bps: f64,
    pub backhaul_bps: f64,
    pub iterations: usize,
    pub wall_ms: u64,
    pub error: String,
}

impl ResultRow {
    fn from_solution(
        m_h: usize,
        bandwidth_hz: f64,
        run: usize,
        run_seed: u64,
        sol: &Solution,
        iterations: usize,
        wall_ms: u64,
    ) -> ResultRow {
        ResultRow {
            m_h,
            bandwidth_hz,
            scheme: sol.scheme,
            run,
            run_seed,
            objective_bps: sol.objective_bps,
            local_bps: sol.breakdown.local_bps,
            offload_bps: sol.breakdown.offload_bps,
            backhaul_bps: sol.breakdown.backhaul_bps,
            iterations,
            wall_ms,
            error: String::new(),
        }
    }

    fn failed(
        m_h: usize,
        bandwidth_hz: f64,
        scheme: Scheme,
        run: usize,
        run_seed: u64,
        error: String,
    ) -> ResultRow {
        ResultRow {
            m_h,
            bandwidth_hz,
            scheme,
            run,
            run_seed,
            objective_bps: 0.0,
            local_bps: 0.0,
            offload_bps: 0.0,
            backhaul_bps: 0.0,
            iterations: 0,
            wall_ms: 0,
            // commas and newlines would break the line format
            error: error.replace(',', ";").replace('\n', " "),
        }
    }
}

fn scheme_rank(s: Scheme) -> u8 {
    match s {
        Scheme::Benders => 0,
        Scheme::BruteForce => 1,
        Scheme::Random => 2,
    }
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub results_path: PathBuf,
    pub means_path: PathBuf,
    pub rows: usize,
    pub failed_cells: usize,
}

/// Runs every cell of the sweep in parallel and writes `results.csv`
/// and `means.csv` under the output directory. Row order, and therefore
/// file bytes, do not depend on the worker count.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport, HarnessError> {
    validate_config(config)?;
    let out_dir = &config.output_dir;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let mut cells = Vec::new();
    for &m_h in &config.hue_counts {
        for &b in &config.bandwidths_hz {
            for run in 0..config.runs {
                cells.push((m_h, b, run));
            }
        }
    }

    let mut rows: Vec<ResultRow> = cells
        .par_iter()
        .flat_map_iter(|&(m_h, b, run)| run_cell(config, m_h, b, run))
        .collect();
    rows.sort_by(|a, b| {
        (a.m_h, a.bandwidth_hz.to_bits(), a.run, scheme_rank(a.scheme)).cmp(&(
            b.m_h,
            b.bandwidth_hz.to_bits(),
            b.run,
            scheme_rank(b.scheme),
        ))
    });

    let results_path = out_dir.join("results.csv");
    let mut csv = String::from(
        "m_h,bandwidth_hz,scheme,run_seed,objective_bps,local_bps,offload_bps,backhaul_bps,iterations,wall_ms,error\n",
    );
    for r in &rows {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.m_h,
            r.bandwidth_hz,
            r.scheme.as_str(),
            r.run_seed,
            r.objective_bps,
            r.local_bps,
            r.offload_bps,
            r.backhaul_bps,
            r.iterations,
            r.wall_ms,
            r.error
        )
        .expect("string writes cannot fail");
    }
    fs::write(&results_path, csv).map_err(io_err(&results_path))?;

    // Means per (HUE count, bandwidth, scheme); errored rows excluded.
    type GroupKey = (usize, u64, u8);
    type GroupAcc = (usize, f64, f64, f64, f64);
    let mut groups: BTreeMap<GroupKey, GroupAcc> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_empty()) {
        let key = (r.m_h, r.bandwidth_hz.to_bits(), scheme_rank(r.scheme));
        let acc = groups.entry(key).or_insert((0, 0.0, 0.0, 0.0, 0.0));
        acc.0 += 1;
        acc.1 += r.objective_bps;
        acc.2 += r.local_bps;
        acc.3 += r.offload_bps;
        acc.4 += r.backhaul_bps;
    }
    let means_path = out_dir.join("means.csv");
    let mut csv = String::from(
        "m_h,bandwidth_hz,scheme,samples,mean_objective_bps,mean_local_bps,mean_offload_bps,mean_backhaul_bps\n",
    );
    for (&(m_h, b_bits, rank), &(n, obj, local, off, back)) in &groups {
        let scheme = match rank {
            0 => Scheme::Benders,
            1 => Scheme::BruteForce,
            _ => Scheme::Random,
        };
        let n_f = n as f64;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            m_h,
            f64::from_bits(b_bits),
            scheme.as_str(),
            n,
            obj / n_f,
            local / n_f,
            off / n_f,
            back / n_f
        )
        .expect("string writes cannot fail");
    }
    fs::write(&means_path, csv).map_err(io_err(&means_path))?;

    let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
    Ok(SweepReport {
        results_path,
        means_path,
        rows: rows.len(),
        failed_cells: failed,
    })
}

/// Prices one sweep cell under all three schemes.
fn run_cell(config: &ExperimentConfig, m_h: usize, b: f64, run: usize) -> Vec<ResultRow> {
    let seed = cell_seed(config.base_seed, m_h, run);
    let instance = match build_cell_instance(config, m_h, b, run) {
        Ok(i) => i,
        Err(e) => {
            return [Scheme::Benders, Scheme::BruteForce, Scheme::Random]
                .into_iter()
                .map(|s| ResultRow::failed(m_h, b, s, run, seed, e.to_string()))
                .collect();
        }
    };
    let mut rows = Vec::with_capacity(3);

    let clock = |started: Instant| -> u64 {
        if config.timing {
            started.elapsed().as_millis() as u64
        } else {
            0
        }
    };

    let started = Instant::now();
    match benders_solve(&instance, &solver_options(config)) {
        Ok(state) => {
            let wall = clock(started);
            let inc = state.incumbent.expect("solved state carries an incumbent");
            let sol = Solution::from_decision(&instance, inc.y, inc.alloc, Scheme::Benders);
            rows.push(ResultRow::from_solution(
                m_h,
                b,
                run,
                seed,
                &sol,
                state.iteration,
                wall,
            ));
        }
        Err(e) => rows.push(ResultRow::failed(
            m_h,
            b,
            Scheme::Benders,
            run,
            seed,
            e.to_string(),
        )),
    }

    let started = Instant::now();
    match brute_force_optimal(&instance, config.mode) {
        Ok(sol) => {
            let wall = clock(started);
            rows.push(ResultRow::from_solution(m_h, b, run, seed, &sol, 0, wall));
        }
        Err(e) => rows.push(ResultRow::failed(
            m_h,
            b,
            Scheme::BruteForce,
            run,
            seed,
            e.to_string(),
        )),
    }

    let started = Instant::now();
    let sol = random_scheme(&instance, config.mode, random_scheme_seed(seed));
    let wall = clock(started);
    rows.push(ResultRow::from_solution(m_h, b, run, seed, &sol, 0, wall));

    rows
}

// ---------------------------------------------------------------------------
// Single-instance entry points
// ---------------------------------------------------------------------------

/// Solves the first configured cell and returns the solution with the
/// iteration count.
pub fn solve_single(config: &ExperimentConfig) -> Result<(Solution, usize), HarnessError> {
    validate_config(config)?;
    let m_h = config.hue_counts[0];
    let b = config.bandwidths_hz[0];
    let instance = build_cell_instance(config, m_h, b, 0)?;
    let state = benders_solve(&instance, &solver_options(config))?;
    let inc = state.incumbent.expect("solved state carries an incumbent");
    let sol = Solution::from_decision(&instance, inc.y, inc.alloc, Scheme::Benders);
    Ok((sol, state.iteration))
}

/// Solves the first configured cell and writes its bound trace to
/// `convergence.csv`. The trace is written even when the solver gives up,
/// so the stall is inspectable; the error is still returned.
pub fn run_convergence(config: &ExperimentConfig) -> Result<PathBuf, HarnessError> {
    validate_config(config)?;
    fs::create_dir_all(&config.output_dir).map_err(io_err(&config.output_dir))?;
    let path = config.output_dir.join("convergence.csv");
    let m_h = config.hue_counts[0];
    let b = config.bandwidths_hz[0];
    let instance = build_cell_instance(config, m_h, b, 0)?;
    match benders_solve(&instance, &solver_options(config)) {
        Ok(state) => {
            crate::benders::write_trace_csv_file(&path, &state.trace).map_err(io_err(&path))?;
            Ok(path)
        }
        Err(BendersError::MaxIterationsExceeded {
            max_iter,
            gap,
            state,
        }) => {
            crate::benders::write_trace_csv_file(&path, &state.trace).map_err(io_err(&path))?;
            Err(HarnessError::Solver(BendersError::MaxIterationsExceeded {
                max_iter,
                gap,
                state,
            }))
        }
        Err(e) => Err(e.into()),
    }
}
