//! Shared helpers for the integration suites: independent oracles and
//! seeded instance generators. Everything here is deliberately written
//! against different math than the library (vertex enumeration, closed
//! forms) so agreement is evidence, not circularity.

// each suite compiles this module separately and uses its own subset
#![allow(dead_code)]

use ntn_offload::benders::TaskDecision;
use ntn_offload::lp::LinearProgram;
use ntn_offload::physics::{build_instance, sample_topology, Instance, SystemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Maximum objective over all vertices of the feasible polytope, found
/// by activating every n-subset of the constraints (rows plus bounds)
/// and testing the resulting corner. Exact up to the linear solves, so
/// it double-checks the simplex without sharing any code with it.
/// Returns `None` when no feasible vertex exists.
pub fn vertex_enumeration_optimum(lp: &LinearProgram) -> Option<f64> {
    let n = lp.objective_coeffs.len();
    assert!(n <= 6, "vertex enumeration is for tiny LPs only");

    // Everything as a·x <= b.
    let mut cons: Vec<(Vec<f64>, f64)> = Vec::new();
    for (row, &b) in lp.constraint_matrix.iter().zip(&lp.rhs) {
        cons.push((row.clone(), b));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        cons.push((e, -lp.lower_bounds[j]));
        if let Some(u) = lp.upper_bounds[j] {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            cons.push((e, u));
        }
    }
    let k = cons.len();
    if k < n {
        return None; // no vertex can exist
    }

    let mut best: Option<f64> = None;
    let mut pick = (0..n).collect::<Vec<usize>>();
    loop {
        if let Some(x) = solve_square(&pick, &cons, n) {
            let feasible = cons.iter().all(|(a, b)| {
                a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum::<f64>() <= b + 1e-7
            });
            if feasible {
                let obj: f64 = lp
                    .objective_coeffs
                    .iter()
                    .zip(&x)
                    .map(|(c, xi)| c * xi)
                    .sum();
                best = Some(match best {
                    Some(b) if b >= obj => b,
                    _ => obj,
                });
            }
        }
        // next combination in lexicographic order
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] + (n - i) < k {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solves the n-by-n system formed by the picked constraints as
/// equalities. Gaussian elimination with partial pivoting; `None` on a
/// (near-)singular pick.
fn solve_square(pick: &[usize], cons: &[(Vec<f64>, f64)], n: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = pick.iter().map(|&i| cons[i].0.clone()).collect();
    let mut b: Vec<f64> = pick.iter().map(|&i| cons[i].1).collect();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if mag < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pivot_row = a[col].clone();
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r][col] / pivot_row[col];
            if f != 0.0 {
                for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Subproblem optimum in closed form: the frame beyond the backhaul
/// floor goes to the single best coefficient among the backhaul and the
/// active offloaders, everyone left local keeps their weighted rate.
pub fn closed_form_subproblem_value(inst: &Instance, y: &TaskDecision) -> f64 {
    let p = inst.params();
    let t = p.frame_duration_s;
    let eps = p.epsilon_tau_s;
    let c_u = inst.uav_rate_coeff_bps();
    let c = inst.leo_rate_coeff_bps();
    let z = inst.weights();
    let local_rate = inst.local_rate_bps();
    let mut w = c_u;
    let mut local = 0.0;
    for i in 0..inst.num_hues() {
        if y.y[i] {
            w = w.max(z[i] * c[i]);
        } else {
            local += z[i] * local_rate[i];
        }
    }
    local + w * (t - eps) + c_u * eps
}

/// Seeded instance with per-HUE weights drawn from [0.5, 2.0). The
/// spread pushes some weighted offload coefficients above the backhaul
/// coefficient, so offloading is genuinely profitable on a good share
/// of draws.
pub fn varied_instance(m: usize, seed: u64) -> Instance {
    let params = SystemParams::default();
    let topo = sample_topology(&params, m, 0, seed).expect("topology sampling");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x57EA_D1ED_5EED);
    let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..2.0)).collect();
    build_instance(&params, &topo, seed.wrapping_mul(0x9E37_79B9) ^ 0xCAB1E, &weights)
        .expect("instance build")
}

/// Uniformly random decision over all 2^m subsets, seeded.
pub fn random_relaxed_decision(m: usize, seed: u64) -> TaskDecision {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TaskDecision {
        y: (0..m).map(|_| rng.random_bool(0.5)).collect(),
    }
}

/// Small feasible bounded LP with a mix of generic rows, an explicit
/// per-variable cap (its dual is visible), an all-ones boundedness row,
/// and sometimes a negative-rhs row that forces a phase-one start.
pub fn random_small_lp(rng: &mut ChaCha8Rng) -> LinearProgram {
    let n = rng.random_range(2..=6usize);
    let n_rows = rng.random_range(1..=4usize);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for _ in 0..n_rows {
        rows.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
        rhs.push(rng.random_range(0.5..2.0));
    }
    // cap a random variable through an explicit row so its dual is visible
    let j = rng.random_range(0..n);
    let mut cap = vec![0.0; n];
    cap[j] = 1.0;
    rows.push(cap);
    rhs.push(rng.random_range(0.2..1.5));
    // boundedness
    rows.push(vec![1.0; n]);
    rhs.push(rng.random_range(1.0..3.0));
    // x = 0.05 * e_1 stays strictly inside every row above, so this
    // lower cut keeps the program feasible while forcing phase one
    if rng.random_bool(0.5) {
        rows.push(vec![-1.0; n]);
        rhs.push(-0.05);
    }
    LinearProgram {
        objective_coeffs: (0..n).map(|_| rng.random_range(-1.0..2.0)).collect(),
        constraint_matrix: rows,
        rhs,
        lower_bounds: vec![0.0; n],
        upper_bounds: vec![None; n],
    }
}

/// Relaxed-mode instance set shared by the agreement and convergence
/// criteria: HUE counts 2 through 12, five seeds each.
pub fn relaxed_criterion_instances() -> Vec<Instance> {
    let mut v = Vec::new();
    for m in 2..=12 {
        for seed in 0..5u64 {
            v.push(varied_instance(m, 1000 * m as u64 + seed));
        }
    }
    v
}

/// Paper-mode instance set shared by the same criteria: the sweep's HUE
/// counts at three seeds each.
pub fn paper_criterion_instances() -> Vec<Instance> {
    let mut v = Vec::new();
    for &m in &[5usize, 10, 25, 50, 100] {
        for seed in 0..3u64 {
            v.push(varied_instance(m, 7000 * m as u64 + seed));
        }
    }
    v
}

/// One pass/fail line per acceptance criterion, then the hard assert.
pub fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}
