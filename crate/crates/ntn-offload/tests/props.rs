//! Property tests: seeded generators drive the LP solver, the airtime
//! subproblem, and the instance builders across wide input ranges.

mod common;

use common::{closed_form_subproblem_value, random_small_lp, varied_instance, vertex_enumeration_optimum};
use ntn_offload::baselines::brute_force_optimal;
use ntn_offload::benders::{solve_subproblem, Mode, TaskDecision};
use ntn_offload::lp::{solve_lp, LpStatus};
use ntn_offload::physics::{db_to_linear, linear_to_db};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn db_conversion_roundtrips(x in -200.0..200.0f64) {
        let back = linear_to_db(db_to_linear(x));
        prop_assert!((back - x).abs() <= 1e-12, "{x} came back as {back}");
    }

    #[test]
    fn bitmask_hex_matches_the_mask(m in 1..=20usize, raw in any::<u64>()) {
        let mask = raw & ((1u64 << m) - 1);
        let y = TaskDecision::from_mask(mask, m);
        prop_assert_eq!(y.bitmask_hex(), format!("{mask:x}"));
        prop_assert_eq!(y.num_offloaded() as u32, mask.count_ones());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Every generated LP is feasible and bounded by construction, so the
    /// solver must return an optimum whose primal respects the rows, whose
    /// duals close the strong-duality gap, and whose value a brute-force
    /// vertex enumeration reproduces.
    #[test]
    fn random_lp_certificates_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_small_lp(&mut rng);
        let sol = solve_lp(&lp);
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        for (row, (coeffs, &b)) in lp.constraint_matrix.iter().zip(&lp.rhs).enumerate() {
            let lhs: f64 = coeffs.iter().zip(&sol.primal).map(|(a, x)| a * x).sum();
            prop_assert!(lhs <= b + 1e-9, "row {row}: {lhs} > {b}");
        }
        for (j, (&x, &l)) in sol.primal.iter().zip(&lp.lower_bounds).enumerate() {
            prop_assert!(x >= l - 1e-9, "var {j}: {x} below {l}");
        }
        let dual_obj: f64 = sol.duals.iter().zip(&lp.rhs).map(|(d, b)| d * b).sum();
        let gap = (dual_obj - sol.objective).abs();
        prop_assert!(gap <= 1e-8 * sol.objective.abs().max(1.0), "duality gap {gap:.3e}");
        let vertex = vertex_enumeration_optimum(&lp).expect("feasible by construction");
        let diff = (vertex - sol.objective).abs();
        prop_assert!(diff <= 1e-9 * sol.objective.abs().max(1.0), "vertex diff {diff:.3e}");
    }

    /// Scaling the objective by a power of two leaves the pivot path, and
    /// with it the primal point, untouched; the value and every dual scale
    /// by exactly that factor. The entering threshold is relative to the
    /// largest coefficient, so the premise needs one coefficient >= 1.
    #[test]
    fn power_of_two_objective_scaling_is_exact(seed in any::<u64>(), e in 1..=6i32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_small_lp(&mut rng);
        prop_assume!(lp.objective_coeffs.iter().any(|c| c.abs() >= 1.0));
        let k = 2f64.powi(e);
        let mut scaled = lp.clone();
        for c in &mut scaled.objective_coeffs {
            *c *= k;
        }
        let base = solve_lp(&lp);
        let big = solve_lp(&scaled);
        prop_assert_eq!(base.status, LpStatus::Optimal);
        prop_assert_eq!(big.status, LpStatus::Optimal);
        for (a, b) in base.primal.iter().zip(&big.primal) {
            prop_assert_eq!(a.to_bits(), b.to_bits(), "primal moved under scaling");
        }
        prop_assert_eq!((k * base.objective).to_bits(), big.objective.to_bits());
        for (a, b) in base.duals.iter().zip(&big.duals) {
            prop_assert_eq!((k * a).to_bits(), b.to_bits(), "dual did not scale");
        }
    }

    /// The airtime subproblem always exhausts the frame, honors the
    /// backhaul floor, reproduces its closed form, and hands back a cut
    /// that is bit-exact at its anchor.
    #[test]
    fn subproblem_budget_and_cut_anchor(m in 2..8usize, seed in any::<u64>(), raw in any::<u64>()) {
        let inst = varied_instance(m, seed);
        let y = TaskDecision::from_mask(raw & ((1u64 << m) - 1), m);
        let (alloc, value, cut) = solve_subproblem(&inst, &y);
        let t = inst.params().frame_duration_s;
        let used: f64 = alloc.tau_u + alloc.tau.iter().sum::<f64>();
        prop_assert!((used - t).abs() <= 1e-9, "frame not exhausted: {used}");
        prop_assert!(alloc.tau_u >= inst.params().epsilon_tau_s - 1e-15);
        for (i, &tau) in alloc.tau.iter().enumerate() {
            prop_assert!(tau >= 0.0);
            if !y.y[i] {
                prop_assert_eq!(tau, 0.0, "local HUE {} got airtime", i);
            }
        }
        prop_assert_eq!(cut.evaluate(&y).to_bits(), value.to_bits(), "cut loose at anchor");
        let direct = closed_form_subproblem_value(&inst, &y);
        let diff = (value - direct).abs();
        prop_assert!(diff <= 1e-9 * direct.abs().max(1.0), "closed form diff {diff:.3e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Appending a HUE leaves every earlier coefficient bit-identical
    /// (draws are sequential per HUE) and strictly raises the exhaustive
    /// optimum, since the newcomer adds a positive local term and removes
    /// no option.
    #[test]
    fn appending_a_hue_raises_the_optimum(m in 2..6usize, seed in any::<u64>()) {
        let small = varied_instance(m, seed);
        let big = varied_instance(m + 1, seed);
        for i in 0..m {
            prop_assert_eq!(
                small.leo_rate_coeff_bps()[i].to_bits(),
                big.leo_rate_coeff_bps()[i].to_bits(),
                "offload coefficient {} changed", i
            );
            prop_assert_eq!(
                small.local_rate_bps()[i].to_bits(),
                big.local_rate_bps()[i].to_bits(),
                "local rate {} changed", i
            );
            prop_assert_eq!(small.weights()[i].to_bits(), big.weights()[i].to_bits());
        }
        prop_assert_eq!(small.uav_rate_coeff_bps().to_bits(), big.uav_rate_coeff_bps().to_bits());
        let v_small = brute_force_optimal(&small, Mode::Relaxed).unwrap().objective_bps;
        let v_big = brute_force_optimal(&big, Mode::Relaxed).unwrap().objective_bps;
        prop_assert!(v_big > v_small, "optimum fell from {v_small} to {v_big}");
    }
}
