//! Reference oracles for tests. Everything here is deliberately naive
//! (enumeration, dense elimination, explicit sums) and shares no code path
//! with the solver or the modelling layer it is used to check.

use rand::Rng;
use strata_milp::{LinearExpression, MilpProblem, Relation, Sense};

pub use rand_chacha::ChaCha8Rng;
pub use rand::SeedableRng;

/// Solves `a x = b` for a square dense system; `None` when (near) singular.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[piv][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for c in k..n {
                    a[i][c] -= f * a[k][c];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k][c] * x[c]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn feasible(problem: &MilpProblem, x: &[f64], tol: f64) -> bool {
    problem.variables().iter().all(|v| {
        let xi = x[v.id.index()];
        xi >= v.lower - tol && xi <= v.upper + tol
    }) && problem
        .constraints()
        .iter()
        .all(|c| c.relation.is_satisfied(c.expr.evaluate(x), c.rhs, tol))
}

fn combinations(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] < n - k + i) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Optimal objective of a box-bounded LP by enumerating every basic point.
/// Returns `None` when no vertex is feasible. Integrality is ignored.
pub fn vertex_enumeration(problem: &MilpProblem) -> Option<f64> {
    let n = problem.num_variables();
    assert!(
        problem.variables().iter().all(|v| v.lower.is_finite() && v.upper.is_finite()),
        "vertex enumeration needs a bounded box"
    );
    // each hyperplane: (coefficients, rhs)
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in problem.constraints() {
        let mut row = vec![0.0; n];
        for (v, a) in c.expr.terms() {
            row[v.index()] = a;
        }
        planes.push((row, c.rhs));
    }
    for v in problem.variables() {
        let mut row = vec![0.0; n];
        row[v.id.index()] = 1.0;
        planes.push((row.clone(), v.lower));
        planes.push((row, v.upper));
    }
    let sign = if problem.sense() == Sense::Minimize { 1.0 } else { -1.0 };
    let mut best: Option<f64> = None;
    if n == 0 {
        return feasible(problem, &[], 1e-7).then(|| problem.objective().evaluate(&[]));
    }
    combinations(planes.len(), n, |pick| {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = dense_solve(a, b) {
            if feasible(problem, &x, 1e-7) {
                let obj = problem.objective().evaluate(&x);
                if best.is_none_or(|b| sign * obj < sign * b) {
                    best = Some(obj);
                }
            }
        }
    });
    best
}

/// Best point of a pure-integer problem by enumerating every integer point of
/// its bounding box. Ties keep the lexicographically first point.
pub fn exhaustive_integer(problem: &MilpProblem) -> Option<(f64, Vec<f64>)> {
    let vars = problem.variables();
    assert!(vars.iter().all(|v| v.integral), "pure integer problems only");
    let lo: Vec<i64> = vars.iter().map(|v| v.lower.ceil() as i64).collect();
    let hi: Vec<i64> = vars.iter().map(|v| v.upper.floor() as i64).collect();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return None;
    }
    let sign = if problem.sense() == Sense::Minimize { 1.0 } else { -1.0 };
    let mut cur = lo.clone();
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        let x: Vec<f64> = cur.iter().map(|&v| v as f64).collect();
        if feasible(problem, &x, 1e-9) {
            let obj = problem.objective().evaluate(&x);
            if best.as_ref().is_none_or(|(b, _)| sign * obj < sign * b - 1e-12) {
                best = Some((obj, x));
            }
        }
        // odometer increment, last variable fastest
        let mut i = cur.len();
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                for j in i + 1..cur.len() {
                    cur[j] = lo[j];
                }
                break;
            }
        }
    }
}

/// Random feasible LP with a bounded box, `1..=max_vars` variables and
/// `0..=max_cons` rows built around an interior anchor point.
pub fn random_bounded_lp(rng: &mut impl Rng, max_vars: usize, max_cons: usize) -> MilpProblem {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_cons);
    let mut p = MilpProblem::new();
    let mut anchor = Vec::new();
    let vars: Vec<_> = (0..n)
        .map(|j| {
            let lo = rng.gen_range(-5..=2) as f64;
            let hi = lo + rng.gen_range(1..=8) as f64;
            anchor.push(rng.gen_range(lo..=hi));
            p.add_continuous(&format!("x{j}"), lo, hi).unwrap()
        })
        .collect();
    for i in 0..m {
        let mut e = LinearExpression::new();
        for &v in &vars {
            if rng.gen_bool(0.7) {
                e.add_term(v, rng.gen_range(-4..=4) as f64);
            }
        }
        let at_anchor = e.evaluate(&anchor);
        let (rel, rhs) = match rng.gen_range(0..10) {
            0 => (Relation::Equal, at_anchor),
            1..=5 => (Relation::LessEqual, at_anchor + rng.gen_range(0.0..3.0)),
            _ => (Relation::GreaterEqual, at_anchor - rng.gen_range(0.0..3.0)),
        };
        p.add_constraint(&format!("r{i}"), e, rel, rhs).unwrap();
    }
    let mut obj = LinearExpression::new();
    for &v in &vars {
        obj.add_term(v, rng.gen_range(-5.0..5.0));
    }
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    p.set_objective(obj, sense).unwrap();
    p
}

/// Random pure-binary MILP with `1..=max_bin` binaries and `1..=max_cons`
/// knapsack-like rows; may be infeasible.
pub fn random_binary_milp(rng: &mut impl Rng, max_bin: usize, max_cons: usize) -> MilpProblem {
    let n = rng.gen_range(1..=max_bin);
    let m = rng.gen_range(1..=max_cons);
    let mut p = MilpProblem::new();
    let vars: Vec<_> = (0..n).map(|j| p.add_binary(&format!("b{j}")).unwrap()).collect();
    for i in 0..m {
        let mut e = LinearExpression::new();
        let mut total = 0.0;
        for &v in &vars {
            if rng.gen_bool(0.6) {
                let a = rng.gen_range(-3..=9) as f64;
                e.add_term(v, a);
                total += a.max(0.0);
            }
        }
        let (rel, rhs) = if rng.gen_bool(0.75) {
            (Relation::LessEqual, (total * rng.gen_range(0.2..0.8)).round())
        } else {
            (Relation::GreaterEqual, rng.gen_range(0..=3) as f64)
        };
        p.add_constraint(&format!("k{i}"), e, rel, rhs).unwrap();
    }
    let mut obj = LinearExpression::new();
    for &v in &vars {
        obj.add_term(v, rng.gen_range(-10..=10) as f64 + rng.gen_range(0.0..1.0));
    }
    let sense = if rng.gen_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    p.set_objective(obj, sense).unwrap();
    p
}

/// Capital recovery factor as the reciprocal of the present-value annuity
/// sum `Σ_{k=1..n} (1+i)^-k`.
pub fn crf_by_discount_sum(interest: f64, years: u32) -> f64 {
    let pv: f64 = (1..=years).map(|k| (1.0 + interest).powi(-(k as i32))).sum();
    1.0 / pv
}

/// Every `k`-subset of `0..n`, in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    combinations(n, k, |c| out.push(c.to_vec()));
    out
}

/// Exhaustive k-medoids: the subset minimizing the sum of distances from
/// every point to its nearest chosen point (first subset on ties).
pub fn exhaustive_medoids(points: &[Vec<f64>], k: usize) -> (Vec<usize>, f64) {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut best = (Vec::new(), f64::INFINITY);
    for subset in k_subsets(points.len(), k) {
        let cost: f64 = points
            .iter()
            .map(|p| {
                subset
                    .iter()
                    .map(|&m| dist(p, &points[m]))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        if cost < best.1 - 1e-12 {
            best = (subset, cost);
        }
    }
    best
}

/// Values `lo, lo+step, …, hi` (inclusive, snapped to the grid).
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as i64;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_count() {
        assert_eq!(k_subsets(5, 2).len(), 10);
        assert_eq!(k_subsets(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(k_subsets(4, 1).len(), 4);
    }

    #[test]
    fn vertex_oracle_on_textbook_lp() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, 10.0).unwrap();
        let y = p.add_continuous("y", 0.0, 10.0).unwrap();
        p.add_constraint("a", LinearExpression::term(x, 1.0).with_term(y, 1.0), Relation::LessEqual, 4.0)
            .unwrap();
        p.add_constraint("b", x.into(), Relation::LessEqual, 2.0).unwrap();
        p.set_objective(LinearExpression::term(x, 3.0).with_term(y, 2.0), Sense::Maximize)
            .unwrap();
        assert_eq!(vertex_enumeration(&p), Some(10.0));
    }

    #[test]
    fn crf_matches_known_cases() {
        assert!((crf_by_discount_sum(0.05, 1) - 1.05).abs() < 1e-12);
        assert!((crf_by_discount_sum(0.0, 10) - 0.1).abs() < 1e-12);
    }
}
