//! Reference schemes the decomposition is measured against.
//!
//! `brute_force_optimal` enumerates every feasible decision and solves
//! the airtime LP for each, so it is exact at any size the enumeration
//! can afford. `random_scheme` draws a feasible decision and a uniform
//! airtime split, giving the floor any optimizer must clear.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benders::{
    solve_subproblem, BendersError, Mode, TaskDecision, TimeAllocation, MAX_RELAXED_HUES,
};
use crate::physics::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Benders,
    BruteForce,
    Random,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Benders => "benders",
            Scheme::BruteForce => "brute_force",
            Scheme::Random => "random",
        }
    }
}

/// Objective split into its three physical terms; `total()` is the
/// objective in the exact order the terms are accumulated everywhere.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RateBreakdown {
    pub local_bps: f64,
    pub offload_bps: f64,
    pub backhaul_bps: f64,
}

impl RateBreakdown {
    pub fn total(&self) -> f64 {
        self.local_bps + self.offload_bps + self.backhaul_bps
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub y: TaskDecision,
    pub alloc: TimeAllocation,
    pub objective_bps: f64,
    pub breakdown: RateBreakdown,
    pub scheme: Scheme,
}

impl Solution {
    /// Prices a decision and allocation. Components are summed in HUE
    /// index order so equal inputs give bitwise-equal outputs.
    pub fn from_decision(
        instance: &Instance,
        y: TaskDecision,
        alloc: TimeAllocation,
        scheme: Scheme,
    ) -> Solution {
        let m = instance.num_hues();
        assert_eq!(y.len(), m);
        assert_eq!(alloc.tau.len(), m);
        let z = instance.weights();
        let c = instance.leo_rate_coeff_bps();
        let local_rate = instance.local_rate_bps();
        let mut local = 0.0;
        let mut offload = 0.0;
        for i in 0..m {
            if y.y[i] {
                offload += z[i] * c[i] * alloc.tau[i];
            } else {
                local += z[i] * local_rate[i];
            }
        }
        let breakdown = RateBreakdown {
            local_bps: local,
            offload_bps: offload,
            backhaul_bps: instance.uav_rate_coeff_bps() * alloc.tau_u,
        };
        Solution {
            y,
            alloc,
            objective_bps: breakdown.total(),
            breakdown,
            scheme,
        }
    }
}

/// Feasible decisions of a mode in ascending bitmask order: all-local
/// first, then single offloaders by index, then (relaxed only) the rest.
fn candidates(num_hues: usize, mode: Mode) -> Result<Vec<TaskDecision>, BendersError> {
    match mode {
        Mode::Paper => {
            let mut v = Vec::with_capacity(num_hues + 1);
            v.push(TaskDecision::all_local(num_hues));
            for i in 0..num_hues {
                let mut y = TaskDecision::all_local(num_hues);
                y.y[i] = true;
                v.push(y);
            }
            Ok(v)
        }
        Mode::Relaxed => {
            if num_hues > MAX_RELAXED_HUES {
                return Err(BendersError::TooManyHues {
                    got: num_hues,
                    max: MAX_RELAXED_HUES,
                });
            }
            Ok((0..1u64 << num_hues)
                .map(|mask| TaskDecision::from_mask(mask, num_hues))
                .collect())
        }
    }
}

/// Exact optimum by exhaustive enumeration. Candidates are priced in
/// parallel; ties keep the lowest bitmask, independent of the thread
/// count because the reduction order is a total order on (value, rank).
pub fn brute_force_optimal(instance: &Instance, mode: Mode) -> Result<Solution, BendersError> {
    let cands = candidates(instance.num_hues(), mode)?;
    let best = cands
        .into_par_iter()
        .enumerate()
        .map(|(rank, y)| {
            let (alloc, value, _) = solve_subproblem(instance, &y);
            (value, rank, y, alloc)
        })
        .reduce_with(|a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        })
        .expect("candidate list is never empty");
    let (_, _, y, alloc) = best;
    Ok(Solution::from_decision(instance, y, alloc, Scheme::BruteForce))
}

/// Uniform feasible decision plus a flat-Dirichlet airtime split over
/// the budget left above the backhaul slot floor. Deterministic in the
/// seed.
pub fn random_scheme(instance: &Instance, mode: Mode, seed: u64) -> Solution {
    let m = instance.num_hues();
    let p = instance.params();
    let t = p.frame_duration_s;
    let eps = p.epsilon_tau_s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let y = match mode {
        Mode::Paper => {
            // m+1 equally likely choices: nobody, or exactly one HUE.
            let pick = rng.random_range(0..=m);
            let mut y = TaskDecision::all_local(m);
            if pick > 0 {
                y.y[pick - 1] = true;
            }
            y
        }
        Mode::Relaxed => TaskDecision {
            y: (0..m).map(|_| rng.random_bool(0.5)).collect(),
        },
    };

    // Exp(1) draws normalized over the active slots (backhaul first,
    // then offloaders by index) land uniformly on the simplex.
    let mut draws = vec![0.0f64; m + 1];
    let mut sum = 0.0;
    draws[0] = rng.sample(Exp1);
    sum += draws[0];
    for i in 0..m {
        if y.y[i] {
            draws[i + 1] = rng.sample(Exp1);
            sum += draws[i + 1];
        }
    }
    let budget = t - eps;
    let alloc = TimeAllocation {
        tau_u: eps + draws[0] / sum * budget,
        tau: (0..m).map(|i| draws[i + 1] / sum * budget).collect(),
    };
    Solution::from_decision(instance, y, alloc, Scheme::Random)
}
