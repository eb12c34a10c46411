//! Primal decomposition of the airtime subproblem.
//!
//! For a fixed offload decision the frame splits into a HUE share and a
//! backhaul share: `theta` seconds go to the UAV slot, the rest to the
//! offloading HUEs. Both halves are independent LPs, solved in parallel,
//! and each reports the dual price of its own budget. The coordinator
//! walks `theta` along the price difference (a projected subgradient
//! ascent); because both prices are constants of the decision, the
//! split value is affine in `theta` and the walk pins the correct
//! boundary after the first full-length step.
//!
//! The module exists as a cross-check: its converged value must agree
//! with the one-shot LP in [`crate::benders::solve_subproblem`].

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benders::{TaskDecision, TimeAllocation};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::physics::Instance;

/// Step-size schedule for the coordinator.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum StepRule {
    /// `zeta_t = zeta0 / sqrt(t)`. With `zeta0: None` the base step is
    /// calibrated at the first iterate to `T / |lambda2 - lambda1|`, so
    /// the first move spans the whole frame.
    Diminishing { zeta0: Option<f64> },
    /// Fixed step, mainly for experiments with deliberately slow walks.
    Constant(f64),
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Diminishing { zeta0: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalOptions {
    /// Relative tolerance used by the non-improvement stop.
    pub tol: f64,
    pub max_iter: usize,
    pub step: StepRule,
    /// Starting split; `None` means half the frame.
    pub theta0: Option<f64>,
}

impl Default for PrimalOptions {
    fn default() -> Self {
        PrimalOptions {
            tol: 1e-6,
            max_iter: 500,
            step: StepRule::default(),
            theta0: None,
        }
    }
}

/// One coordinator iterate. `value` is the full objective (local rates
/// included) of the split evaluated that iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalDecompState {
    pub theta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub step: f64,
    pub iteration: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalOutcome {
    pub best: PrimalDecompState,
    /// Allocation at the best iterate.
    pub alloc: TimeAllocation,
    pub trace: Vec<PrimalDecompState>,
}

#[derive(Debug, Error)]
pub enum PrimalError {
    #[error("decision length {got} does not match {expect} HUEs")]
    DecisionMismatch { got: usize, expect: usize },
    #[error("no convergence within {max_iter} iterations")]
    MaxIterationsExceeded {
        max_iter: usize,
        /// Best iterate found before giving up.
        best: Box<PrimalOutcome>,
    },
}

/// HUE half: maximize the weighted offload rates inside a budget of
/// `t_frame - theta` seconds. Returns the airtimes, the half's value and
/// the budget dual `lambda1` (zero when nobody offloads).
pub fn solve_sub1(instance: &Instance, y: &TaskDecision, theta: f64) -> (Vec<f64>, f64, f64) {
    let m = instance.num_hues();
    let c = instance.leo_rate_coeff_bps();
    let z = instance.weights();
    let budget = instance.params().frame_duration_s - theta;
    let objective: Vec<f64> = (0..m)
        .map(|i| if y.y[i] { z[i] * c[i] } else { 0.0 })
        .collect();
    let lp = LinearProgram {
        objective_coeffs: objective,
        constraint_matrix: vec![vec![1.0; m]],
        rhs: vec![budget.max(0.0)],
        lower_bounds: vec![0.0; m],
        upper_bounds: vec![None; m],
    };
    let sol = solve_lp(&lp);
    assert_eq!(sol.status, LpStatus::Optimal, "HUE half is a bounded simplex");
    (sol.primal, sol.objective, sol.duals[0])
}

/// Backhaul half: the UAV slot takes everything it is given, so the
/// optimum sits at `tau_u = theta` and the budget is worth the backhaul
/// coefficient exactly.
pub fn solve_sub2(instance: &Instance, theta: f64) -> (f64, f64, f64) {
    let eps = instance.params().epsilon_tau_s;
    debug_assert!(theta >= eps, "coordinator must keep theta above the slot floor");
    let lp = LinearProgram {
        objective_coeffs: vec![instance.uav_rate_coeff_bps()],
        constraint_matrix: vec![vec![1.0]],
        rhs: vec![theta],
        lower_bounds: vec![eps],
        upper_bounds: vec![None],
    };
    let sol = solve_lp(&lp);
    assert_eq!(sol.status, LpStatus::Optimal, "backhaul half is a segment");
    (sol.primal[0], sol.objective, sol.duals[0])
}

/// Projected ascent step on the split point: `theta` moves toward
/// whichever half prices a marginal frame second higher, clamped to the
/// backhaul floor and the frame. Budget duals are nonnegative, so the
/// difference really is the gradient of the split value.
pub fn update_theta(instance: &Instance, theta: f64, lambda1: f64, lambda2: f64, step: f64) -> f64 {
    let p = instance.params();
    (theta + step * (lambda2 - lambda1)).clamp(p.epsilon_tau_s, p.frame_duration_s)
}

/// Runs the coordinator until the split stops moving or stops improving.
pub fn primal_decomposition(
    instance: &Instance,
    y: &TaskDecision,
    opts: &PrimalOptions,
) -> Result<PrimalOutcome, PrimalError> {
    let m = instance.num_hues();
    if y.len() != m {
        return Err(PrimalError::DecisionMismatch {
            got: y.len(),
            expect: m,
        });
    }
    let p = instance.params();
    let t_frame = p.frame_duration_s;
    let eps = p.epsilon_tau_s;
    let z = instance.weights();
    let local = instance.local_rate_bps();
    let local_part: f64 = (0..m).filter(|&i| !y.y[i]).map(|i| z[i] * local[i]).sum();

    let mut theta = opts.theta0.unwrap_or(t_frame / 2.0).clamp(eps, t_frame);
    let mut zeta0_cal: Option<f64> = match opts.step {
        StepRule::Diminishing { zeta0 } => zeta0,
        StepRule::Constant(_) => None,
    };

    let mut trace: Vec<PrimalDecompState> = Vec::new();
    let mut best: Option<(PrimalDecompState, TimeAllocation)> = None;

    for iteration in 1..=opts.max_iter {
        let ((tau, v1, lambda1), (tau_u, v2, lambda2)) =
            rayon::join(|| solve_sub1(instance, y, theta), || solve_sub2(instance, theta));
        let value = local_part + v1 + v2;
        let grad = lambda2 - lambda1;

        let step = match opts.step {
            StepRule::Constant(s) => s,
            StepRule::Diminishing { .. } => {
                let z0 = *zeta0_cal.get_or_insert_with(|| {
                    if grad.abs() > 0.0 {
                        t_frame / grad.abs()
                    } else {
                        t_frame
                    }
                });
                z0 / (iteration as f64).sqrt()
            }
        };

        let state = PrimalDecompState {
            theta,
            lambda1,
            lambda2,
            step,
            iteration,
            value,
        };
        trace.push(state.clone());
        let improved = match &best {
            Some((b, _)) => value > b.value,
            None => true,
        };
        if improved {
            best = Some((state, TimeAllocation { tau_u, tau }));
        }

        let next = update_theta(instance, theta, lambda1, lambda2, step);
        // The value is affine in theta, so a pinned split is optimal;
        // a move too small to matter at the requested tolerance ends
        // the walk as well.
        let stalled = (next - theta).abs() * grad.abs() <= opts.tol * value.abs().max(1.0);
        if next == theta || stalled {
            let (best_state, alloc) = best.expect("at least one iterate recorded");
            return Ok(PrimalOutcome {
                best: best_state,
                alloc,
                trace,
            });
        }
        theta = next;
    }

    let (best_state, alloc) = best.expect("at least one iterate recorded");
    Err(PrimalError::MaxIterationsExceeded {
        max_iter: opts.max_iter,
        best: Box::new(PrimalOutcome {
            best: best_state,
            alloc,
            trace,
        }),
    })
}

/// Writes the coordinator trace as CSV.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[PrimalDecompState]) -> io::Result<()> {
    writeln!(out, "iteration,theta_s,lambda1,lambda2,step_s,value_bps")?;
    for row in trace {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.iteration, row.theta, row.lambda1, row.lambda2, row.step, row.value
        )?;
    }
    Ok(())
}

/// Convenience wrapper writing the trace to a file path.
pub fn write_trace_csv_file(path: &Path, trace: &[PrimalDecompState]) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    write_trace_csv(&mut f, trace)
}
