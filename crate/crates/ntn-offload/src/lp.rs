//! Dense linear programming in maximization form, with dual extraction.
//!
//! Problems are stated as: maximize c·x subject to A·x <= b and
//! per-variable bounds l <= x <= u (upper bounds optional). The solver is
//! a two-phase tableau simplex using Bland's smallest-index rule for both
//! entering and leaving choices, so every solve is deterministic and
//! cycle-free. Duals are reported for the inequality rows only; bound
//! rows are handled internally. The decision search and the primal
//! decomposition both consume those duals, which is why the crate ships
//! its own engine instead of binding an external solver.

/// Absolute feasibility tolerance on constraint satisfaction.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Relative duality-gap tolerance required of every optimal return.
pub const DUALITY_GAP_TOL: f64 = 1e-8;
/// Smallest magnitude accepted for a pivot element.
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective_coeffs: Vec<f64>,
    /// One row per `<=` inequality; row length equals the variable count.
    pub constraint_matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    /// `None` leaves the variable unbounded above.
    pub upper_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    fn assert_well_formed(&self) {
        let n = self.objective_coeffs.len();
        assert!(n > 0, "LP needs at least one variable");
        assert_eq!(self.rhs.len(), self.constraint_matrix.len());
        assert_eq!(self.lower_bounds.len(), n);
        assert_eq!(self.upper_bounds.len(), n);
        for row in &self.constraint_matrix {
            assert_eq!(row.len(), n, "constraint row length must match variables");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub primal: Vec<f64>,
    pub objective: f64,
    /// One nonnegative multiplier per inequality row.
    pub duals: Vec<f64>,
    pub status: LpStatus,
}

impl LpSolution {
    fn degenerate(status: LpStatus) -> Self {
        LpSolution {
            primal: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
            status,
        }
    }
}

/// Solves the LP. Infeasible and unbounded problems are reported through
/// `status`; only malformed input (mismatched dimensions) panics.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    lp.assert_well_formed();
    let n = lp.objective_coeffs.len();
    let m = lp.constraint_matrix.len();

    // Shift every variable to x' = x - l >= 0 and turn finite upper
    // bounds into extra rows x' <= u - l.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for (row, &b) in lp.constraint_matrix.iter().zip(&lp.rhs) {
        let shift: f64 = row
            .iter()
            .zip(&lp.lower_bounds)
            .map(|(a, l)| a * l)
            .sum();
        rows.push(row.clone());
        rhs.push(b - shift);
    }
    for j in 0..n {
        if let Some(u) = lp.upper_bounds[j] {
            let width = u - lp.lower_bounds[j];
            if width < -FEASIBILITY_TOL {
                return LpSolution::degenerate(LpStatus::Infeasible);
            }
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push(row);
            rhs.push(width.max(0.0));
        }
    }

    let mut tab = Tableau::build(n, &rows, &rhs);
    if tab.n_art > 0 && !tab.run_phase_one() {
        return LpSolution::degenerate(LpStatus::Infeasible);
    }

    let mut cost = vec![0.0; tab.n_cols()];
    cost[..n].copy_from_slice(&lp.objective_coeffs);
    if !tab.optimize(&cost, /*allow_artificials=*/ false) {
        return LpSolution::degenerate(LpStatus::Unbounded);
    }

    // Map the shifted basic solution back to original coordinates.
    let mut primal = lp.lower_bounds.clone();
    for (r, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            primal[bv] += tab.rows[r][tab.rhs_col];
        }
    }
    let objective: f64 = lp
        .objective_coeffs
        .iter()
        .zip(&primal)
        .map(|(c, x)| c * x)
        .sum();

    // The multiplier of row r is the basis-cost combination of its slack
    // column; the convention holds whether or not phase one negated the row.
    let mut duals = Vec::with_capacity(m);
    for r in 0..m {
        let col = n + r;
        let mut d = 0.0;
        for (row, &bv) in tab.rows.iter().zip(&tab.basis) {
            d += cost[bv] * row[col];
        }
        duals.push(if d < 0.0 && d > -1e-7 { 0.0 } else { d });
    }

    debug_assert!(
        check_optimal(lp, &primal, &duals, objective, &tab, &cost),
        "optimal certificate failed internal verification"
    );

    LpSolution {
        primal,
        objective,
        duals,
        status: LpStatus::Optimal,
    }
}

/// Debug-build verification: primal feasibility and strong duality over
/// the internal row set (user rows plus bound rows).
fn check_optimal(
    lp: &LinearProgram,
    primal: &[f64],
    duals: &[f64],
    objective: f64,
    tab: &Tableau,
    cost: &[f64],
) -> bool {
    let scale = 1.0 + primal.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    for (row, &b) in lp.constraint_matrix.iter().zip(&lp.rhs) {
        let lhs: f64 = row.iter().zip(primal).map(|(a, x)| a * x).sum();
        if lhs > b + FEASIBILITY_TOL * scale.max(1.0 + b.abs()) {
            return false;
        }
    }
    for ((&x, &l), &u) in primal.iter().zip(&lp.lower_bounds).zip(&lp.upper_bounds) {
        if x < l - FEASIBILITY_TOL * scale {
            return false;
        }
        if let Some(u) = u {
            if x > u + FEASIBILITY_TOL * scale {
                return false;
            }
        }
    }
    if duals.iter().any(|&d| d < 0.0) {
        return false;
    }
    // Dual objective over all internal rows, in shifted coordinates.
    let mut dual_obj = 0.0;
    for r in 0..tab.n_rows() {
        let col = primal.len() + r;
        let mut mu = 0.0;
        for (row, &bv) in tab.rows.iter().zip(&tab.basis) {
            mu += cost[bv] * row[col];
        }
        dual_obj += mu * tab.rhs_shifted[r];
    }
    let primal_shifted: f64 = objective
        - lp.objective_coeffs
            .iter()
            .zip(&lp.lower_bounds)
            .map(|(c, l)| c * l)
            .sum::<f64>();
    (dual_obj - primal_shifted).abs() <= DUALITY_GAP_TOL * primal_shifted.abs().max(1.0)
}

// ---------------------------------------------------------------------------
// Tableau internals
// ---------------------------------------------------------------------------

struct Tableau {
    /// Dense rows over [structural | slacks | artificials | rhs].
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_struct: usize,
    n_slack: usize,
    n_art: usize,
    rhs_col: usize,
    /// Right-hand sides as seen by the equality system (after row sign
    /// normalization); kept for the duality check.
    rhs_shifted: Vec<f64>,
}

impl Tableau {
    fn build(n: usize, rows_in: &[Vec<f64>], rhs_in: &[f64]) -> Tableau {
        let r_count = rows_in.len();
        let mut art_rows: Vec<usize> = Vec::new();
        for (r, &b) in rhs_in.iter().enumerate() {
            if b < 0.0 {
                art_rows.push(r);
            }
        }
        let n_art = art_rows.len();
        let n_cols = n + r_count + n_art + 1;
        let mut rows = vec![vec![0.0; n_cols]; r_count];
        let mut basis = vec![0usize; r_count];
        let mut next_art = 0usize;
        for r in 0..r_count {
            let flip = rhs_in[r] < 0.0;
            let sign = if flip { -1.0 } else { 1.0 };
            for j in 0..n {
                rows[r][j] = sign * rows_in[r][j];
            }
            rows[r][n + r] = sign; // slack keeps the original row's sign
            rows[r][n_cols - 1] = sign * rhs_in[r];
            if flip {
                let art_col = n + r_count + next_art;
                next_art += 1;
                rows[r][art_col] = 1.0;
                basis[r] = art_col;
            } else {
                basis[r] = n + r;
            }
        }
        // Pre-normalization values: the reported duals price the
        // original row orientation, so the duality check must too.
        let rhs_shifted = rhs_in.to_vec();
        Tableau {
            rows,
            basis,
            n_struct: n,
            n_slack: r_count,
            n_art,
            rhs_col: n_cols - 1,
            rhs_shifted,
        }
    }

    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn n_cols(&self) -> usize {
        self.rhs_col
    }

    /// Drives the artificial objective to zero. Returns false when the
    /// system is infeasible.
    fn run_phase_one(&mut self) -> bool {
        let mut cost = vec![0.0; self.n_cols()];
        for c in cost.iter_mut().skip(self.n_struct + self.n_slack) {
            *c = -1.0;
        }
        let bounded = self.optimize(&cost, /*allow_artificials=*/ true);
        debug_assert!(bounded, "phase one is bounded by construction");
        let art_sum: f64 = self
            .basis
            .iter()
            .zip(&self.rows)
            .filter(|(bv, _)| **bv >= self.n_struct + self.n_slack)
            .map(|(_, row)| row[self.rhs_col])
            .sum();
        let scale: f64 = self
            .rhs_shifted
            .iter()
            .fold(1.0f64, |a, b| a.max(b.abs()));
        if art_sum > 1e-8 * scale {
            return false;
        }
        // Pivot leftover artificials out of the basis where possible;
        // rows that admit no pivot are redundant and stay at zero.
        for r in 0..self.n_rows() {
            if self.basis[r] < self.n_struct + self.n_slack {
                continue;
            }
            if let Some(j) = (0..self.n_struct + self.n_slack)
                .find(|&j| self.rows[r][j].abs() > PIVOT_TOL)
            {
                self.pivot(r, j);
            }
        }
        true
    }

    /// Bland-rule simplex over the given cost vector. Returns false on
    /// unboundedness.
    fn optimize(&mut self, cost: &[f64], allow_artificials: bool) -> bool {
        let enter_limit = if allow_artificials {
            self.n_cols()
        } else {
            self.n_struct + self.n_slack
        };
        let tol_enter = PIVOT_TOL
            * cost
                .iter()
                .fold(1.0f64, |a, c| a.max(c.abs()));
        let max_pivots = 10_000 + 100 * (self.n_rows() + self.n_cols());
        for _ in 0..max_pivots {
            let entering = (0..enter_limit).find(|&j| {
                !self.basis.contains(&j) && self.reduced_cost(cost, j) > tol_enter
            });
            let Some(j) = entering else {
                return true; // optimal for this cost vector
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.n_rows() {
                let a = self.rows[r][j];
                if a > PIVOT_TOL {
                    let ratio = self.rows[r][self.rhs_col] / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - 1e-12 * lratio.abs().max(1.0)
                                || (ratio <= lratio + 1e-12 * lratio.abs().max(1.0)
                                    && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return false; // improving ray, unbounded
            };
            self.pivot(r, j);
        }
        unreachable!("simplex exceeded its pivot budget; Bland's rule precludes cycling");
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut z = 0.0;
        for (row, &bv) in self.rows.iter().zip(&self.basis) {
            z += cost[bv] * row[j];
        }
        cost[j] - z
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        for rr in 0..self.n_rows() {
            if rr == r {
                continue;
            }
            let f = self.rows[rr][j];
            if f != 0.0 {
                for c in 0..=self.rhs_col {
                    self.rows[rr][c] -= f * self.rows[r][c];
                }
            }
        }
        self.basis[r] = j;
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
