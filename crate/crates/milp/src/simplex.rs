//! Two-phase bounded-variable primal simplex.
//!
//! The basis inverse is kept as a dense `m × m` matrix updated by elementary
//! row operations after every pivot; constraint columns stay sparse. Phase 1
//! minimizes the sum of artificial variables from a slack/artificial crash
//! basis, phase 2 the real objective with the artificials pinned to zero.
//!
//! Pricing is Dantzig's largest-reduced-cost rule with lowest-index ties.
//! After a run of degenerate pivots the solver switches to Bland's rule
//! (lowest eligible index for both entering and leaving variable) until the
//! objective moves again, which rules out cycling.

use crate::error::SolveError;
use crate::problem::{MilpProblem, Relation, Sense};

/// Reduced-cost optimality tolerance.
const DUAL_TOL: f64 = 1e-9;
/// Primal feasibility tolerance used by the Harris ratio test.
const PRIMAL_TOL: f64 = 1e-9;
/// Pivots smaller than this are never admitted by the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Below this magnitude an entry is numerically zero.
const BREAKDOWN_TOL: f64 = 1e-11;
/// Consecutive degenerate pivots before falling back to Bland's rule.
const DEGENERATE_RUN: usize = 50;
const REFRESH_EVERY: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of an LP solve. `objective` and `values` are present only when the
/// status is [`LpStatus::Optimal`].
#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves the continuous relaxation of `problem` (integrality ignored).
pub fn solve_lp(problem: &MilpProblem) -> Result<LpSolution, SolveError> {
    let lower: Vec<f64> = problem.variables().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = problem.variables().iter().map(|v| v.upper).collect();
    solve_lp_with_bounds(problem, &lower, &upper)
}

/// Solves the relaxation with variable bounds replaced by `lower`/`upper`.
pub fn solve_lp_with_bounds(problem: &MilpProblem, lower: &[f64], upper: &[f64]) -> Result<LpSolution, SolveError> {
    let n = problem.num_variables();
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);
    if (0..n).any(|j| lower[j] > upper[j]) {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            objective: None,
            values: None,
            iterations: 0,
        });
    }
    let mut engine = Engine::new(problem, lower, upper);
    let outcome = engine.solve()?;
    let iterations = engine.iterations;
    Ok(match outcome {
        Outcome::Infeasible => LpSolution {
            status: LpStatus::Infeasible,
            objective: None,
            values: None,
            iterations,
        },
        Outcome::Unbounded => LpSolution {
            status: LpStatus::Unbounded,
            objective: None,
            values: None,
            iterations,
        },
        Outcome::Optimal => {
            let mut values: Vec<f64> = engine.x[..n].to_vec();
            for (j, v) in values.iter_mut().enumerate() {
                *v = v.clamp(lower[j], upper[j]);
                if *v == 0.0 {
                    *v = 0.0; // normalize -0
                }
            }
            let objective = problem.objective().evaluate(&values);
            LpSolution {
                status: LpStatus::Optimal,
                objective: Some(objective),
                values: Some(values),
                iterations,
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable sitting at zero.
    Free,
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

struct Engine {
    m: usize,
    /// Structural + slack columns (artificials are implicit unit columns).
    n_cols: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    art_sign: Vec<f64>,
    b: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    phase2_cost: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    x: Vec<f64>,
    binv: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    since_refresh: usize,
    degenerate_run: usize,
    bland: bool,
    iteration_limit: usize,
    alpha: Vec<f64>,
    rho: Vec<f64>,
}

impl Engine {
    fn new(problem: &MilpProblem, lower: &[f64], upper: &[f64]) -> Self {
        let n_struct = problem.num_variables();
        let m = problem.num_constraints();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        let mut b = vec![0.0; m];
        let mut slack_of_row = vec![None; m];
        for (i, c) in problem.constraints().iter().enumerate() {
            for (var, coef) in c.expr.terms() {
                cols[var.index()].push((i, coef));
            }
            b[i] = c.rhs;
        }
        let mut col_lower = lower.to_vec();
        let mut col_upper = upper.to_vec();
        for (i, c) in problem.constraints().iter().enumerate() {
            let sign = match c.relation {
                Relation::LessEqual => 1.0,
                Relation::GreaterEqual => -1.0,
                Relation::Equal => continue,
            };
            slack_of_row[i] = Some((cols.len(), sign));
            cols.push(vec![(i, sign)]);
            col_lower.push(0.0);
            col_upper.push(f64::INFINITY);
        }
        let n_cols = cols.len();
        let n_total = n_cols + m;

        let obj_sign = match problem.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut phase2_cost = vec![0.0; n_total];
        for (var, coef) in problem.objective().terms() {
            phase2_cost[var.index()] = obj_sign * coef;
        }

        // Nonbasic structurals start at a finite bound (or zero if free).
        let mut x = vec![0.0; n_total];
        let mut state = vec![State::AtLower; n_total];
        for j in 0..n_cols {
            let (lo, up) = (col_lower[j], col_upper[j]);
            if lo.is_finite() {
                x[j] = lo;
                state[j] = State::AtLower;
            } else if up.is_finite() {
                x[j] = up;
                state[j] = State::AtUpper;
            } else {
                x[j] = 0.0;
                state[j] = State::Free;
            }
        }
        let mut residual = b.clone();
        for (j, col) in cols.iter().enumerate().take(n_struct) {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    residual[i] -= a * x[j];
                }
            }
        }

        col_lower.extend(std::iter::repeat_n(0.0, m));
        col_upper.extend(std::iter::repeat_n(f64::INFINITY, m));
        let mut art_sign = vec![1.0; m];
        let mut basis = vec![0; m];
        let mut binv = vec![0.0; m * m];
        let mut cost = vec![0.0; n_total];
        for i in 0..m {
            let r = residual[i];
            let art = n_cols + i;
            match slack_of_row[i] {
                Some((s, sign)) if r * sign >= 0.0 => {
                    basis[i] = s;
                    state[s] = State::Basic;
                    x[s] = r * sign;
                    binv[i * m + i] = sign;
                    // unused artificial: pinned at zero
                    col_upper[art] = 0.0;
                    x[art] = 0.0;
                }
                _ => {
                    let sign = if r < 0.0 { -1.0 } else { 1.0 };
                    art_sign[i] = sign;
                    basis[i] = art;
                    state[art] = State::Basic;
                    x[art] = r.abs();
                    binv[i * m + i] = sign;
                    cost[art] = 1.0;
                }
            }
        }

        let iteration_limit = 50 * (n_total + m) + 10_000;
        Engine {
            m,
            n_cols,
            n_struct,
            cols,
            art_sign,
            b,
            lower: col_lower,
            upper: col_upper,
            cost,
            phase2_cost,
            state,
            basis,
            x,
            binv,
            d: vec![0.0; n_total],
            iterations: 0,
            since_refresh: 0,
            degenerate_run: 0,
            bland: false,
            iteration_limit,
            alpha: vec![0.0; m],
            rho: vec![0.0; m],
        }
    }

    fn n_total(&self) -> usize {
        self.n_cols + self.m
    }

    fn solve(&mut self) -> Result<Outcome, SolveError> {
        let needs_phase1 = self.cost.iter().any(|&c| c != 0.0);
        if needs_phase1 {
            self.recompute_duals();
            if let Step::Unbounded = self.run()? {
                return Err(SolveError::NumericalBreakdown(
                    "phase 1 objective reported unbounded".into(),
                ))
            }
            self.refresh_primal();
            let infeasibility: f64 = (self.n_cols..self.n_total()).map(|j| self.x[j].max(0.0)).sum();
            let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if infeasibility > 1e-7 * scale {
                return Ok(Outcome::Infeasible);
            }
        }
        for j in self.n_cols..self.n_total() {
            self.upper[j] = 0.0;
            if self.state[j] != State::Basic {
                self.state[j] = State::AtLower;
                self.x[j] = 0.0;
            }
        }
        self.cost = self.phase2_cost.clone();
        self.bland = false;
        self.degenerate_run = 0;
        self.recompute_duals();
        let mut reinverted = false;
        loop {
            match self.run()? {
                Step::Unbounded => return Ok(Outcome::Unbounded),
                _ => {
                    self.refresh_primal();
                    if self.primal_error() <= 1e-7 || reinverted {
                        return Ok(Outcome::Optimal);
                    }
                    // accumulated drift in the basis inverse: rebuild and polish
                    self.reinvert()?;
                    self.refresh_primal();
                    self.recompute_duals();
                    reinverted = true;
                }
            }
        }
    }

    fn column(&self, j: usize) -> ColumnIter<'_> {
        if j < self.n_cols {
            ColumnIter::Sparse(self.cols[j].iter())
        } else {
            let i = j - self.n_cols;
            ColumnIter::Unit(Some((i, self.art_sign[i])))
        }
    }

    /// y = c_B B⁻¹, then d_j = c_j − y·A_j.
    fn recompute_duals(&mut self) {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        for j in 0..self.n_total() {
            if self.state[j] == State::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let mut dj = self.cost[j];
            for (i, a) in self.column(j) {
                dj -= y[i] * a;
            }
            self.d[j] = dj;
        }
        self.since_refresh = 0;
    }

    /// x_B = B⁻¹ (b − N x_N).
    fn refresh_primal(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for j in 0..self.n_total() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, a) in self.column(j) {
                    r[i] -= a * xj;
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
    }

    /// max |A x − b| together with bound violations of basic variables.
    fn primal_error(&self) -> f64 {
        let mut r = self.b.clone();
        for j in 0..self.n_total() {
            let xj = self.x[j];
            if xj != 0.0 {
                for (i, a) in self.column(j) {
                    r[i] -= a * xj;
                }
            }
        }
        let mut err = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for &j in &self.basis {
            err = err.max(self.lower[j] - self.x[j]).max(self.x[j] - self.upper[j]);
        }
        err
    }

    /// Rebuilds B⁻¹ from scratch by Gauss-Jordan elimination with partial pivoting.
    fn reinvert(&mut self) -> Result<(), SolveError> {
        let m = self.m;
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, a) in self.column(j) {
                bmat[i * m + k] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv = k;
            let mut best = bmat[k * m + k].abs();
            for i in k + 1..m {
                let v = bmat[i * m + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < BREAKDOWN_TOL {
                return Err(SolveError::NumericalBreakdown(format!(
                    "singular basis during reinversion (column {k}, pivot {best:e})"
                )));
            }
            if piv != k {
                for c in 0..m {
                    bmat.swap(k * m + c, piv * m + c);
                    inv.swap(k * m + c, piv * m + c);
                }
            }
            let p = bmat[k * m + k];
            for c in 0..m {
                bmat[k * m + c] /= p;
                inv[k * m + c] /= p;
            }
            let nz_b: Vec<usize> = (0..m).filter(|&c| bmat[k * m + c] != 0.0).collect();
            let nz_i: Vec<usize> = (0..m).filter(|&c| inv[k * m + c] != 0.0).collect();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = bmat[i * m + k];
                if f == 0.0 {
                    continue;
                }
                for &c in &nz_b {
                    bmat[i * m + c] -= f * bmat[k * m + c];
                }
                for &c in &nz_i {
                    inv[i * m + c] -= f * inv[k * m + c];
                }
            }
        }
        // rows of `inv` follow the column order of B, i.e. basis rows
        self.binv = inv;
        Ok(())
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_total() {
            let st = self.state[j];
            if st == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = match st {
                State::AtLower if dj < -DUAL_TOL => 1.0,
                State::AtUpper if dj > DUAL_TOL => -1.0,
                State::Free if dj.abs() > DUAL_TOL => -dj.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, score)| dj.abs() > score) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ftran(&mut self, q: usize) {
        let m = self.m;
        self.alpha.iter_mut().for_each(|v| *v = 0.0);
        let entries: Vec<(usize, f64)> = self.column(q).collect();
        for (k, a) in entries {
            for i in 0..m {
                let b = self.binv[i * m + k];
                if b != 0.0 {
                    self.alpha[i] += a * b;
                }
            }
        }
    }

    fn run(&mut self) -> Result<Step, SolveError> {
        loop {
            if self.iterations >= self.iteration_limit {
                return Err(SolveError::IterationLimit(self.iteration_limit));
            }
            if self.since_refresh >= REFRESH_EVERY {
                self.refresh_primal();
                self.recompute_duals();
            }
            match self.iterate()? {
                Step::Continue => {}
                other => return Ok(other),
            }
        }
    }

    fn iterate(&mut self) -> Result<Step, SolveError> {
        let Some((q, dir)) = self.choose_entering() else {
            return Ok(Step::Optimal);
        };
        self.iterations += 1;
        self.since_refresh += 1;
        self.ftran(q);
        let m = self.m;

        // basic variable i moves at rate delta_i = -dir * alpha_i
        let range_q = self.upper[q] - self.lower[q];
        let mut leave: Option<usize> = None;
        let mut theta;
        let mut tiny_blocker = false;
        if self.bland {
            theta = f64::INFINITY;
            let mut leave_col = usize::MAX;
            for i in 0..m {
                let a = self.alpha[i];
                if a.abs() <= PIVOT_TOL {
                    if a.abs() > BREAKDOWN_TOL {
                        tiny_blocker = true;
                    }
                    continue;
                }
                let delta = -dir * a;
                let j = self.basis[i];
                let ratio = if delta < 0.0 {
                    if self.lower[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[j] - self.lower[j]) / -delta).max(0.0)
                } else {
                    if self.upper[j] == f64::INFINITY {
                        continue;
                    }
                    ((self.upper[j] - self.x[j]) / delta).max(0.0)
                };
                if ratio < theta - 1e-12 || (ratio <= theta + 1e-12 && j < leave_col) {
                    theta = ratio.min(theta);
                    leave = Some(i);
                    leave_col = j;
                }
            }
        } else {
            // Harris two-pass ratio test
            let mut theta_max = f64::INFINITY;
            for i in 0..m {
                let a = self.alpha[i];
                if a.abs() <= PIVOT_TOL {
                    if a.abs() > BREAKDOWN_TOL {
                        tiny_blocker = true;
                    }
                    continue;
                }
                let delta = -dir * a;
                let j = self.basis[i];
                let r = if delta < 0.0 {
                    if self.lower[j] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[j] - self.lower[j] + PRIMAL_TOL) / -delta
                } else {
                    if self.upper[j] == f64::INFINITY {
                        continue;
                    }
                    (self.upper[j] - self.x[j] + PRIMAL_TOL) / delta
                };
                theta_max = theta_max.min(r);
            }
            theta = f64::INFINITY;
            if theta_max.is_finite() {
                let mut best_piv = 0.0;
                for i in 0..m {
                    let a = self.alpha[i];
                    if a.abs() <= PIVOT_TOL {
                        continue;
                    }
                    let delta = -dir * a;
                    let j = self.basis[i];
                    let r = if delta < 0.0 {
                        if self.lower[j] == f64::NEG_INFINITY {
                            continue;
                        }
                        (self.x[j] - self.lower[j]) / -delta
                    } else {
                        if self.upper[j] == f64::INFINITY {
                            continue;
                        }
                        (self.upper[j] - self.x[j]) / delta
                    };
                    if r <= theta_max && a.abs() > best_piv {
                        best_piv = a.abs();
                        leave = Some(i);
                        theta = r.max(0.0);
                    }
                }
            }
        }

        if range_q.is_finite() && range_q <= theta {
            // bound flip, basis unchanged
            let step = dir * range_q;
            for i in 0..m {
                let a = self.alpha[i];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * step;
                }
            }
            if dir > 0.0 {
                self.state[q] = State::AtUpper;
                self.x[q] = self.upper[q];
            } else {
                self.state[q] = State::AtLower;
                self.x[q] = self.lower[q];
            }
            self.note_progress(range_q);
            return Ok(Step::Continue);
        }

        let Some(r) = leave else {
            if tiny_blocker {
                return Err(SolveError::NumericalBreakdown(
                    "only sub-tolerance pivots block an improving direction".into(),
                ));
            }
            return Ok(Step::Unbounded);
        };

        let step = dir * theta;
        for i in 0..m {
            let a = self.alpha[i];
            if a != 0.0 {
                self.x[self.basis[i]] -= a * step;
            }
        }
        self.x[q] += step;

        let p = self.basis[r];
        let delta_r = -dir * self.alpha[r];
        if delta_r < 0.0 {
            self.state[p] = State::AtLower;
            self.x[p] = self.lower[p];
        } else {
            self.state[p] = State::AtUpper;
            self.x[p] = self.upper[p];
        }

        // pivot row of B⁻¹A for the reduced-cost update
        let piv = self.alpha[r];
        self.rho.copy_from_slice(&self.binv[r * m..(r + 1) * m]);
        let theta_d = self.d[q] / piv;
        if theta_d != 0.0 {
            for j in 0..self.n_total() {
                if self.state[j] == State::Basic || j == p {
                    continue;
                }
                let mut arj = 0.0;
                for (i, a) in self.column(j) {
                    arj += self.rho[i] * a;
                }
                if arj != 0.0 {
                    self.d[j] -= theta_d * arj;
                }
            }
        }
        self.d[p] = -theta_d;
        self.d[q] = 0.0;

        // B⁻¹ update: row r /= piv, then eliminate alpha from the other rows
        let nz: Vec<usize> = (0..m).filter(|&k| self.rho[k] != 0.0).collect();
        for &k in &nz {
            self.rho[k] /= piv;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = self.alpha[i];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.binv[i * m..(i + 1) * m];
            for &k in &nz {
                row[k] -= f * self.rho[k];
            }
        }
        {
            let row = &mut self.binv[r * m..(r + 1) * m];
            row.iter_mut().for_each(|v| *v = 0.0);
            for &k in &nz {
                row[k] = self.rho[k];
            }
        }

        self.basis[r] = q;
        self.state[q] = State::Basic;
        self.note_progress(theta);
        Ok(Step::Continue)
    }

    fn note_progress(&mut self, theta: f64) {
        if theta <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERATE_RUN {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
            self.bland = false;
        }
    }

    #[allow(dead_code)]
    fn structural_count(&self) -> usize {
        self.n_struct
    }
}

enum ColumnIter<'a> {
    Sparse(std::slice::Iter<'a, (usize, f64)>),
    Unit(Option<(usize, f64)>),
}

impl Iterator for ColumnIter<'_> {
    type Item = (usize, f64);
    fn next(&mut self) -> Option<(usize, f64)> {
        match self {
            ColumnIter::Sparse(it) => it.next().copied(),
            ColumnIter::Unit(e) => e.take(),
        }
    }
}
