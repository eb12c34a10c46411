//! Decomposition solver for the joint offloading and airtime problem.
//!
//! The binary offload vector lives in a master problem; for a fixed
//! vector, the airtime split is a small LP (the subproblem). Each
//! subproblem solve yields an optimality cut, a linear over-estimator of
//! the subproblem value that is tight at the decision which generated
//! it. The master maximizes the pointwise minimum of the accumulated
//! cuts over the feasible decisions, which yields the next candidate and
//! a certified upper bound; the best subproblem value seen so far is the
//! lower bound. The loop stops when the bounds meet within `epsilon`.
//!
//! Master decisions are enumerated rather than branched: the paper-mode
//! feasible set (at most one offloader) has `M+1` members, and relaxed
//! mode is capped at [`MAX_RELAXED_HUES`] HUEs so `2^M` stays small.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::physics::Instance;

/// Relaxed-mode master enumeration cap; `2^20` candidates is the most
/// the exhaustive master is allowed to walk.
pub const MAX_RELAXED_HUES: usize = 20;

/// Which offload decisions the master may pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// At most one HUE offloads per frame.
    Paper,
    /// Any subset of HUEs may offload.
    Relaxed,
}

/// Binary offload vector; `true` means the HUE ships its task upward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDecision {
    pub y: Vec<bool>,
}

impl TaskDecision {
    pub fn all_local(num_hues: usize) -> Self {
        TaskDecision {
            y: vec![false; num_hues],
        }
    }

    /// Decision from the low `len` bits of `mask`, bit `i` = HUE `i`.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        assert!(len < 64, "mask enumeration is limited to 63 HUEs");
        TaskDecision {
            y: (0..len).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_offloaded(&self, i: usize) -> bool {
        self.y[i]
    }

    pub fn num_offloaded(&self) -> usize {
        self.y.iter().filter(|&&b| b).count()
    }

    pub fn satisfies(&self, mode: Mode) -> bool {
        match mode {
            Mode::Paper => self.num_offloaded() <= 1,
            Mode::Relaxed => true,
        }
    }

    /// Lowercase hex rendering of the bit vector (HUE 0 = least
    /// significant bit), without a radix prefix. Works at any length.
    pub fn bitmask_hex(&self) -> String {
        let nibbles = self.y.len().div_ceil(4).max(1);
        let mut out = String::new();
        for k in (0..nibbles).rev() {
            let mut v = 0u8;
            for b in 0..4 {
                let i = 4 * k + b;
                if i < self.y.len() && self.y[i] {
                    v |= 1 << b;
                }
            }
            if v == 0 && out.is_empty() && k > 0 {
                continue; // suppress leading zeros
            }
            out.push(char::from_digit(v as u32, 16).unwrap());
        }
        out
    }
}

/// Airtime split: `tau_u` for the UAV backhaul slot, `tau[i]` for HUE `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAllocation {
    pub tau_u: f64,
    pub tau: Vec<f64>,
}

/// Linear over-estimator of the subproblem value, anchored at `y_star`.
///
/// The estimate at `y` is `value + sum_i kappa[i] * (y[i] - y_star[i])`;
/// evaluation skips agreeing coordinates so the cut reproduces `value`
/// bit-exactly at its own anchor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BendersCut {
    pub kappa: Vec<f64>,
    pub y_star: TaskDecision,
    pub value: f64,
}

impl BendersCut {
    pub fn evaluate(&self, y: &TaskDecision) -> f64 {
        assert_eq!(y.len(), self.y_star.len(), "cut and decision dimensions differ");
        let mut v = self.value;
        for i in 0..y.len() {
            match (y.y[i], self.y_star.y[i]) {
                (true, false) => v += self.kappa[i],
                (false, true) => v -= self.kappa[i],
                _ => {}
            }
        }
        v
    }
}

/// Best feasible point found so far.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Incumbent {
    pub y: TaskDecision,
    pub alloc: TimeAllocation,
    pub value: f64,
}

/// One line of the convergence record, written after each iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Best subproblem value so far; nondecreasing.
    pub lb: f64,
    /// Running master bound; nonincreasing.
    pub ub: f64,
    /// Decision the subproblem evaluated this iteration.
    pub y: TaskDecision,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BendersState {
    pub cuts: Vec<BendersCut>,
    pub lb: f64,
    pub ub: f64,
    pub psi_down: f64,
    pub iteration: usize,
    pub incumbent: Option<Incumbent>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute bound-gap tolerance for termination.
    pub epsilon: f64,
    pub max_iter: usize,
    pub mode: Mode,
    /// Floor under the master value; keeps the first bounds finite.
    pub psi_down: f64,
    /// Starting decision; `None` means every task stays local.
    pub initial_y: Option<TaskDecision>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 1e-4,
            max_iter: 50,
            mode: Mode::Paper,
            psi_down: -25.0,
            initial_y: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BendersError {
    #[error("master called with an empty cut pool")]
    EmptyCutPool,
    #[error("relaxed mode enumerates 2^M decisions and allows at most {max} HUEs, got {got}")]
    TooManyHues { got: usize, max: usize },
    #[error("initial decision rejected: {reason}")]
    BadInitialDecision { reason: String },
    #[error("bound gap {gap:.3e} above epsilon after {max_iter} iterations")]
    MaxIterationsExceeded {
        max_iter: usize,
        gap: f64,
        /// Full solver state at abandonment; the incumbent inside is the
        /// best feasible point found.
        state: Box<BendersState>,
    },
}

/// Optimal airtime split for a fixed decision, with the subproblem value
/// (local rates included) and the optimality cut anchored at `y`.
///
/// The LP maximizes the offload and backhaul terms subject to the shared
/// frame budget; HUEs kept local get zero-coefficient columns and stay
/// at zero airtime. The budget-row dual prices a marginal frame second
/// and drives the cut coefficients.
pub fn solve_subproblem(
    instance: &Instance,
    y: &TaskDecision,
) -> (TimeAllocation, f64, BendersCut) {
    let m = instance.num_hues();
    assert_eq!(y.len(), m, "decision length must match the instance");
    let p = instance.params();
    let t = p.frame_duration_s;
    let eps = p.epsilon_tau_s;

    let c_u = instance.uav_rate_coeff_bps();
    let c = instance.leo_rate_coeff_bps();
    let z = instance.weights();
    let local = instance.local_rate_bps();

    let mut objective = Vec::with_capacity(m + 1);
    objective.push(c_u);
    for i in 0..m {
        objective.push(if y.y[i] { z[i] * c[i] } else { 0.0 });
    }
    let mut lower = vec![0.0; m + 1];
    lower[0] = eps;
    let lp = LinearProgram {
        objective_coeffs: objective,
        constraint_matrix: vec![vec![1.0; m + 1]],
        rhs: vec![t],
        lower_bounds: lower,
        upper_bounds: vec![None; m + 1],
    };
    let sol = solve_lp(&lp);
    assert_eq!(
        sol.status,
        LpStatus::Optimal,
        "airtime subproblem is always feasible and bounded"
    );

    let alloc = TimeAllocation {
        tau_u: sol.primal[0],
        tau: sol.primal[1..].to_vec(),
    };
    let local_part: f64 = (0..m).filter(|&i| !y.y[i]).map(|i| z[i] * local[i]).sum();
    let value = local_part + sol.objective;

    // Budget dual: the rate the binding frame second is worth. Flipping
    // y_i on gains airtime at z_i c_i only beyond that price, and
    // forfeits the local rate; flipping off is the reverse.
    let w = sol.duals[0];
    let kappa: Vec<f64> = (0..m)
        .map(|i| (t - eps) * (z[i] * c[i] - w).max(0.0) - z[i] * local[i])
        .collect();

    let cut = BendersCut {
        kappa,
        y_star: y.clone(),
        value,
    };
    (alloc, value, cut)
}

/// Maximizes the pointwise minimum of the cuts over the mode's feasible
/// decisions. Ties keep the lowest bitmask. The returned value is
/// floored at `psi_down`.
pub fn solve_master(
    cuts: &[BendersCut],
    num_hues: usize,
    mode: Mode,
    psi_down: f64,
) -> Result<(TaskDecision, f64), BendersError> {
    if cuts.is_empty() {
        return Err(BendersError::EmptyCutPool);
    }
    let mut best: Option<(TaskDecision, f64)> = None;
    let mut consider = |y: TaskDecision| {
        let v = cuts
            .iter()
            .map(|c| c.evaluate(&y))
            .fold(f64::INFINITY, f64::min);
        match &best {
            Some((_, bv)) if v <= *bv => {}
            _ => best = Some((y, v)),
        }
    };
    match mode {
        Mode::Paper => {
            consider(TaskDecision::all_local(num_hues));
            for i in 0..num_hues {
                let mut y = TaskDecision::all_local(num_hues);
                y.y[i] = true;
                consider(y);
            }
        }
        Mode::Relaxed => {
            if num_hues > MAX_RELAXED_HUES {
                return Err(BendersError::TooManyHues {
                    got: num_hues,
                    max: MAX_RELAXED_HUES,
                });
            }
            for mask in 0..1u64 << num_hues {
                consider(TaskDecision::from_mask(mask, num_hues));
            }
        }
    }
    let (y, v) = best.expect("feasible set is never empty");
    Ok((y, v.max(psi_down)))
}

/// Runs the cut loop to the requested gap. On success the returned state
/// carries the incumbent, the cut pool, and one trace row per iteration.
pub fn benders_solve(
    instance: &Instance,
    opts: &SolverOptions,
) -> Result<BendersState, BendersError> {
    let m = instance.num_hues();
    assert!(opts.epsilon > 0.0, "epsilon must be positive");
    assert!(opts.max_iter >= 1, "need at least one iteration");
    if opts.mode == Mode::Relaxed && m > MAX_RELAXED_HUES {
        return Err(BendersError::TooManyHues {
            got: m,
            max: MAX_RELAXED_HUES,
        });
    }
    let mut y = match &opts.initial_y {
        Some(y0) => {
            if y0.len() != m {
                return Err(BendersError::BadInitialDecision {
                    reason: format!("length {} does not match {m} HUEs", y0.len()),
                });
            }
            if !y0.satisfies(opts.mode) {
                return Err(BendersError::BadInitialDecision {
                    reason: format!(
                        "{} offloaders exceed the paper-mode limit of one",
                        y0.num_offloaded()
                    ),
                });
            }
            y0.clone()
        }
        None => TaskDecision::all_local(m),
    };

    let mut state = BendersState {
        cuts: Vec::new(),
        lb: f64::NEG_INFINITY,
        ub: f64::INFINITY,
        psi_down: opts.psi_down,
        iteration: 0,
        incumbent: None,
        trace: Vec::new(),
    };

    for iter in 1..=opts.max_iter {
        let (alloc, value, cut) = solve_subproblem(instance, &y);
        if value > state.lb {
            state.lb = value;
            state.incumbent = Some(Incumbent {
                y: y.clone(),
                alloc,
                value,
            });
        }
        state.cuts.push(cut);

        let (y_next, psi) = solve_master(&state.cuts, m, opts.mode, opts.psi_down)?;
        // The master relaxation only tightens as cuts accumulate; the
        // running minimum removes round-off jitter between iterations.
        state.ub = state.ub.min(psi);
        state.iteration = iter;
        state.trace.push(TraceRow {
            iteration: iter,
            lb: state.lb,
            ub: state.ub,
            y: y.clone(),
        });
        if state.ub - state.lb <= opts.epsilon {
            return Ok(state);
        }
        y = y_next;
    }

    let gap = state.ub - state.lb;
    Err(BendersError::MaxIterationsExceeded {
        max_iter: opts.max_iter,
        gap,
        state: Box::new(state),
    })
}

/// Writes the iteration trace as CSV. Decisions are rendered as hex
/// bitmasks so the column survives instances wider than 64 HUEs.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TraceRow]) -> io::Result<()> {
    writeln!(
        out,
        "iteration,lower_bound_bps,upper_bound_bps,gap_bps,chosen_y_bitmask"
    )?;
    for row in trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.iteration,
            row.lb,
            row.ub,
            row.ub - row.lb,
            row.y.bitmask_hex()
        )?;
    }
    Ok(())
}

/// Convenience wrapper writing the trace to a file path.
pub fn write_trace_csv_file(path: &Path, trace: &[TraceRow]) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_trace_csv(&mut f, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{build_instance, sample_topology, SystemParams};

    fn instance(m: usize, seed: u64, weights: &[f64]) -> Instance {
        let params = SystemParams::default();
        let topo = sample_topology(&params, m, 4, seed).unwrap();
        build_instance(&params, &topo, seed ^ 0x5eed, weights).unwrap()
    }

    fn uniform(m: usize) -> Vec<f64> {
        vec![1.0; m]
    }

    /// Exhaustive subproblem maximum over every decision of the mode.
    fn enumerate_best(inst: &Instance, mode: Mode) -> (TaskDecision, f64) {
        let m = inst.num_hues();
        let mut best: Option<(TaskDecision, f64)> = None;
        let masks: Vec<u64> = match mode {
            Mode::Paper => std::iter::once(0)
                .chain((0..m).map(|i| 1u64 << i))
                .collect(),
            Mode::Relaxed => (0..1u64 << m).collect(),
        };
        for mask in masks {
            let y = TaskDecision::from_mask(mask, m);
            let (_, v, _) = solve_subproblem(inst, &y);
            if best.as_ref().is_none_or(|(_, bv)| v > *bv) {
                best = Some((y, v));
            }
        }
        best.unwrap()
    }

    #[test]
    fn bitmask_hex_low_bit_first() {
        let mut y = TaskDecision::all_local(4);
        y.y[0] = true;
        y.y[2] = true;
        assert_eq!(y.bitmask_hex(), "5");
        assert_eq!(TaskDecision::all_local(4).bitmask_hex(), "0");
        let mut wide = TaskDecision::all_local(100);
        wide.y[99] = true;
        assert_eq!(wide.bitmask_hex(), "8000000000000000000000000");
    }

    #[test]
    fn subproblem_budget_is_tight() {
        let inst = instance(5, 11, &uniform(5));
        let mut y = TaskDecision::all_local(5);
        y.y[2] = true;
        let (alloc, _, _) = solve_subproblem(&inst, &y);
        let used: f64 = alloc.tau_u + alloc.tau.iter().sum::<f64>();
        let t = inst.params().frame_duration_s;
        assert!(
            (used - t).abs() <= 1e-9,
            "frame budget should be exhausted: used {used}, frame {t}"
        );
        for (i, &tau) in alloc.tau.iter().enumerate() {
            if i != 2 {
                assert_eq!(tau, 0.0, "local HUE {i} must get zero airtime");
            }
        }
        assert!(alloc.tau_u >= inst.params().epsilon_tau_s - 1e-15);
    }

    #[test]
    fn cut_is_tight_at_its_anchor() {
        let inst = instance(6, 3, &[1.0, 2.0, 0.5, 1.5, 1.0, 3.0]);
        for mask in [0u64, 0b000100, 0b101010] {
            let y = TaskDecision::from_mask(mask, 6);
            let (_, value, cut) = solve_subproblem(&inst, &y);
            assert_eq!(
                cut.evaluate(&y),
                value,
                "anchor evaluation must reproduce the subproblem value exactly"
            );
        }
    }

    #[test]
    fn cut_over_estimates_everywhere() {
        let weights = [2.0, 1.0, 3.0, 0.5, 1.2];
        let inst = instance(5, 7, &weights);
        for anchor in 0..1u64 << 5 {
            let ya = TaskDecision::from_mask(anchor, 5);
            let (_, _, cut) = solve_subproblem(&inst, &ya);
            for mask in 0..1u64 << 5 {
                let y = TaskDecision::from_mask(mask, 5);
                let (_, v, _) = solve_subproblem(&inst, &y);
                let e = cut.evaluate(&y);
                assert!(
                    e >= v - 1e-9 * v.abs().max(1.0),
                    "cut anchored at {anchor:b} undercuts {mask:b}: {e} < {v}"
                );
            }
        }
    }

    #[test]
    fn master_requires_cuts() {
        assert!(matches!(
            solve_master(&[], 3, Mode::Paper, -25.0),
            Err(BendersError::EmptyCutPool)
        ));
    }

    #[test]
    fn relaxed_master_rejects_wide_instances() {
        let cut = BendersCut {
            kappa: vec![0.0; 21],
            y_star: TaskDecision::all_local(21),
            value: 0.0,
        };
        assert!(matches!(
            solve_master(&[cut], 21, Mode::Relaxed, -25.0),
            Err(BendersError::TooManyHues { got: 21, max: 20 })
        ));
    }

    #[test]
    fn master_ties_keep_lowest_bitmask() {
        // A flat cut makes every candidate equal; the all-local decision
        // (mask zero) must win.
        let cut = BendersCut {
            kappa: vec![0.0; 3],
            y_star: TaskDecision::all_local(3),
            value: 1.0,
        };
        let (y, v) = solve_master(&[cut], 3, Mode::Relaxed, -25.0).unwrap();
        assert_eq!(y.num_offloaded(), 0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn paper_mode_matches_enumeration() {
        for seed in [1u64, 2, 3] {
            let weights = [1.0, 1.8, 0.7, 2.5, 1.1, 0.9, 1.4];
            let inst = instance(7, seed, &weights);
            let state = benders_solve(&inst, &SolverOptions::default()).unwrap();
            let inc = state.incumbent.as_ref().unwrap();
            let (y_best, v_best) = enumerate_best(&inst, Mode::Paper);
            assert!(
                (inc.value - v_best).abs() <= 1e-6 * v_best.abs().max(1.0),
                "seed {seed}: benders {} vs enumeration {v_best}",
                inc.value
            );
            assert_eq!(inc.y, y_best, "seed {seed}: decisions disagree");
        }
    }

    #[test]
    fn relaxed_mode_matches_enumeration() {
        for seed in [5u64, 6] {
            let weights = [2.2, 0.6, 1.9, 1.0, 1.3, 2.8];
            let inst = instance(6, seed, &weights);
            let opts = SolverOptions {
                mode: Mode::Relaxed,
                ..SolverOptions::default()
            };
            let state = benders_solve(&inst, &opts).unwrap();
            let inc = state.incumbent.as_ref().unwrap();
            let (_, v_best) = enumerate_best(&inst, Mode::Relaxed);
            assert!(
                (inc.value - v_best).abs() <= 1e-6 * v_best.abs().max(1.0),
                "seed {seed}: benders {} vs enumeration {v_best}",
                inc.value
            );
        }
    }

    #[test]
    fn bounds_are_monotone_and_close() {
        let weights = [1.0, 2.0, 1.5, 0.8, 2.4, 1.1, 0.6, 1.9];
        let inst = instance(8, 21, &weights);
        let opts = SolverOptions {
            mode: Mode::Relaxed,
            ..SolverOptions::default()
        };
        let state = benders_solve(&inst, &opts).unwrap();
        for pair in state.trace.windows(2) {
            assert!(pair[1].lb >= pair[0].lb, "lower bound regressed");
            assert!(pair[1].ub <= pair[0].ub, "upper bound regressed");
        }
        let last = state.trace.last().unwrap();
        assert!(last.ub - last.lb <= 1e-4, "final gap too wide");
        assert!(state.iteration <= 50);
    }

    #[test]
    fn paper_mode_needs_few_iterations() {
        let inst = instance(100, 9, &uniform(100));
        let state = benders_solve(&inst, &SolverOptions::default()).unwrap();
        assert!(
            state.iteration <= 15,
            "paper mode took {} iterations",
            state.iteration
        );
    }

    #[test]
    fn initial_decision_is_validated() {
        let inst = instance(3, 1, &uniform(3));
        let mut y0 = TaskDecision::all_local(3);
        y0.y[0] = true;
        y0.y[1] = true;
        let opts = SolverOptions {
            initial_y: Some(y0),
            ..SolverOptions::default()
        };
        assert!(matches!(
            benders_solve(&inst, &opts),
            Err(BendersError::BadInitialDecision { .. })
        ));
    }

    #[test]
    fn single_hue_dominant_offload_converges_fast() {
        // weight 5 makes the lone HUE's offload coefficient beat the
        // backhaul's, so the two-point decision space resolves to y=(1)
        let inst = instance(1, 2, &[5.0]);
        let (y_best, _) = enumerate_best(&inst, Mode::Paper);
        assert!(y_best.y[0], "premise: offloading must dominate");
        let state = benders_solve(&inst, &SolverOptions::default()).unwrap();
        let inc = state.incumbent.unwrap();
        assert!(inc.y.y[0]);
        assert!(state.iteration <= 3, "took {} iterations", state.iteration);
        assert!(state.ub - state.lb <= 1e-4);
    }

    #[test]
    fn iteration_budget_error_keeps_partial_state() {
        // weights above 2 make offloading beat staying local, so the
        // all-local start cannot close the gap in a single iteration
        let inst = instance(5, 21, &[1.0, 3.0, 1.0, 2.5, 1.0]);
        let full = benders_solve(&inst, &SolverOptions::default()).unwrap();
        assert!(
            full.incumbent.as_ref().unwrap().y.num_offloaded() > 0,
            "premise: the optimum must offload someone"
        );
        let tight = SolverOptions {
            max_iter: 1,
            ..SolverOptions::default()
        };
        match benders_solve(&inst, &tight) {
            Err(BendersError::MaxIterationsExceeded {
                max_iter,
                gap,
                state,
            }) => {
                assert_eq!(max_iter, 1);
                assert!(gap > tight.epsilon);
                assert_eq!(state.iteration, 1);
                assert_eq!(state.trace.len(), 1);
                let inc = state.incumbent.expect("first subproblem gives a feasible point");
                assert!(inc.value <= full.incumbent.as_ref().unwrap().value);
            }
            other => panic!("expected an iteration budget error, got {other:?}"),
        }
    }
}
