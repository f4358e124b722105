//! Best-first branch-and-bound over LP relaxations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::SolveError;
use crate::problem::{MilpProblem, Sense};
use crate::simplex::{solve_lp_with_bounds, LpStatus};

pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const DEFAULT_REL_GAP: f64 = 1e-6;
pub const DEFAULT_NODE_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MilpStatus {
    /// Proven optimal within the relative gap.
    Optimal,
    /// Node limit hit with an incumbent whose gap exceeds the tolerance.
    Feasible,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective in the problem's own sense; `None` unless
    /// `status` is `Optimal` or `Feasible`.
    pub objective: Option<f64>,
    pub values: Option<Vec<f64>>,
    /// Best proven bound in the problem's own sense.
    pub best_bound: Option<f64>,
    pub gap: f64,
    pub nodes_explored: usize,
}

impl MilpSolution {
    pub fn has_solution(&self) -> bool {
        self.values.is_some()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MilpOptions {
    pub rel_gap: f64,
    pub node_limit: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            rel_gap: DEFAULT_REL_GAP,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

pub fn solve_milp(problem: &MilpProblem, rel_gap: f64, node_limit: usize) -> Result<MilpSolution, SolveError> {
    solve_milp_with(problem, &MilpOptions { rel_gap, node_limit })
}

struct Node {
    /// LP bound in minimization form.
    bound: f64,
    seq: u64,
    /// Branching decisions from the root: (variable, lower, upper).
    fixings: Vec<(usize, f64, f64)>,
    values: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound, then oldest node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    let diff = incumbent - bound;
    if diff <= 1e-9 {
        0.0
    } else {
        diff / incumbent.abs().max(1e-10)
    }
}

/// Most fractional integral variable, lowest id on ties.
fn branching_variable(problem: &MilpProblem, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for v in problem.variables().iter().filter(|v| v.integral) {
        let x = values[v.id.index()];
        let frac = x - x.floor();
        if frac <= INTEGRALITY_TOL || frac >= 1.0 - INTEGRALITY_TOL {
            continue;
        }
        let score = (frac - 0.5).abs();
        if best.is_none_or(|(_, s)| score < s - 1e-12) {
            best = Some((v.id.index(), score));
        }
    }
    best.map(|(j, _)| j)
}

pub fn solve_milp_with(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpSolution, SolveError> {
    if !(options.rel_gap >= 0.0) {
        return Err(SolveError::InvalidParameter(format!("rel_gap {}", options.rel_gap)));
    }
    if options.node_limit == 0 {
        return Err(SolveError::InvalidParameter("node_limit must be at least 1".into()));
    }
    let sign = match problem.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let base_lower: Vec<f64> = problem
        .variables()
        .iter()
        .map(|v| if v.integral { v.lower.ceil() } else { v.lower })
        .collect();
    let base_upper: Vec<f64> = problem
        .variables()
        .iter()
        .map(|v| if v.integral { v.upper.floor() } else { v.upper })
        .collect();

    let mut nodes_explored = 0usize;
    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    let mut incumbent: Option<(f64, Vec<f64>)> = None;

    let evaluate = |fixings: &[(usize, f64, f64)], explored: &mut usize| {
        let mut lower = base_lower.clone();
        let mut upper = base_upper.clone();
        for &(j, lo, up) in fixings {
            lower[j] = lo;
            upper[j] = up;
        }
        *explored += 1;
        solve_lp_with_bounds(problem, &lower, &upper)
    };

    let root = evaluate(&[], &mut nodes_explored)?;
    match root.status {
        LpStatus::Infeasible => return Ok(terminal(MilpStatus::Infeasible, nodes_explored)),
        LpStatus::Unbounded => return Ok(terminal(MilpStatus::Unbounded, nodes_explored)),
        LpStatus::Optimal => {}
    }
    heap.push(Node {
        bound: sign * root.objective.unwrap(),
        seq,
        fixings: Vec::new(),
        values: root.values.unwrap(),
    });
    seq += 1;

    let mut limit_hit = false;
    let mut best_bound = f64::NEG_INFINITY;
    while let Some(node) = heap.pop() {
        if let Some((inc, _)) = &incumbent {
            if relative_gap(*inc, node.bound) <= options.rel_gap {
                best_bound = node.bound;
                heap.clear();
                break;
            }
        }
        let Some(j) = branching_variable(problem, &node.values) else {
            // integral LP optimum: new incumbent if strictly better
            if incumbent.as_ref().is_none_or(|(inc, _)| node.bound < inc - 1e-9) {
                incumbent = Some((node.bound, node.values));
            }
            continue;
        };
        if nodes_explored >= options.node_limit {
            best_bound = node.bound;
            limit_hit = true;
            heap.push(node);
            break;
        }
        let x = node.values[j];
        let lo_j = node
            .fixings
            .iter()
            .rev()
            .find(|f| f.0 == j)
            .map_or(base_lower[j], |f| f.1);
        let up_j = node
            .fixings
            .iter()
            .rev()
            .find(|f| f.0 == j)
            .map_or(base_upper[j], |f| f.2);
        let children = [(lo_j, x.floor()), (x.ceil(), up_j)];
        for (lo, up) in children {
            if nodes_explored >= options.node_limit {
                limit_hit = true;
                break;
            }
            let mut fixings = node.fixings.clone();
            fixings.push((j, lo, up));
            let sol = evaluate(&fixings, &mut nodes_explored)?;
            match sol.status {
                LpStatus::Infeasible => continue,
                LpStatus::Unbounded => return Ok(terminal(MilpStatus::Unbounded, nodes_explored)),
                LpStatus::Optimal => {}
            }
            let bound = sign * sol.objective.unwrap();
            if let Some((inc, _)) = &incumbent {
                if bound >= inc - 1e-9 {
                    continue;
                }
            }
            heap.push(Node {
                bound,
                seq,
                fixings,
                values: sol.values.unwrap(),
            });
            seq += 1;
        }
        if limit_hit {
            best_bound = heap
                .peek()
                .map_or(node.bound, |top| top.bound.min(node.bound));
            break;
        }
    }

    let Some((inc, mut values)) = incumbent else {
        if limit_hit {
            return Err(SolveError::NodeLimitExceeded { nodes: nodes_explored });
        }
        return Ok(terminal(MilpStatus::Infeasible, nodes_explored));
    };
    if heap.is_empty() && !limit_hit && best_bound == f64::NEG_INFINITY {
        // tree exhausted
        best_bound = inc;
    }
    best_bound = best_bound.min(inc);
    let gap = relative_gap(inc, best_bound);
    for v in problem.variables().iter().filter(|v| v.integral) {
        let x = &mut values[v.id.index()];
        *x = x.round();
    }
    let objective = problem.objective().evaluate(&values);
    let status = if gap <= options.rel_gap {
        MilpStatus::Optimal
    } else {
        MilpStatus::Feasible
    };
    Ok(MilpSolution {
        status,
        objective: Some(objective),
        values: Some(values),
        best_bound: Some(sign * best_bound),
        gap,
        nodes_explored,
    })
}

fn terminal(status: MilpStatus, nodes_explored: usize) -> MilpSolution {
    MilpSolution {
        status,
        objective: None,
        values: None,
        best_bound: None,
        gap: 0.0,
        nodes_explored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LinearExpression, Relation};

    #[test]
    fn binary_knapsack_tie_break() {
        let mut p = MilpProblem::new();
        let x = p.add_binary("x").unwrap();
        let y = p.add_binary("y").unwrap();
        p.add_constraint(
            "cap",
            LinearExpression::term(x, 2.0).with_term(y, 2.0),
            Relation::LessEqual,
            3.0,
        )
        .unwrap();
        p.set_objective(LinearExpression::term(x, 1.0).with_term(y, 1.0), Sense::Maximize)
            .unwrap();
        let s = solve_milp(&p, DEFAULT_REL_GAP, DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert_eq!(s.objective, Some(1.0));
        assert_eq!(s.values.unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn empty_integer_slice() {
        let mut p = MilpProblem::new();
        let x = p.add_variable("x", 0.2, 0.8, true).unwrap();
        p.set_objective(x.into(), Sense::Minimize).unwrap();
        let s = solve_milp(&p, DEFAULT_REL_GAP, DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_without_incumbent() {
        // x + y = 1.5 has no integer point but every relaxation is feasible
        // until both variables are fixed
        let mut p = MilpProblem::new();
        let x = p.add_variable("x", 0.0, 10.0, true).unwrap();
        let y = p.add_variable("y", 0.0, 10.0, true).unwrap();
        p.add_constraint(
            "c",
            LinearExpression::term(x, 2.0).with_term(y, 2.0),
            Relation::Equal,
            3.0,
        )
        .unwrap();
        assert!(matches!(
            solve_milp(&p, 0.0, 1),
            Err(SolveError::NodeLimitExceeded { .. })
        ));
        let s = solve_milp(&p, 0.0, 1000).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn bad_parameters() {
        let p = MilpProblem::new();
        assert!(solve_milp(&p, -1.0, 10).is_err());
        assert!(solve_milp(&p, 0.0, 0).is_err());
    }
}
