//! Two-objective Pareto fronts by the ε-constraint method.

use strata_milp::{LinearExpression, MilpOptions, Relation, Sense};

use crate::error::Error;
use crate::model::{EnergyModel, ModelSolution};
use crate::objective::{build_objective, CostParameters, ObjectiveSpec};

/// Points closer than this in both objectives are merged.
pub const DUPLICATE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ParetoPoint {
    /// Objective values in their natural units and sense.
    pub objective_a: f64,
    pub objective_b: f64,
    pub solution: ModelSolution,
}

struct Objective {
    /// Expression in minimization form.
    expr: LinearExpression,
    sign: f64,
}

impl Objective {
    fn new(spec: &ObjectiveSpec, model: &EnergyModel, cost: &CostParameters) -> Result<Self, Error> {
        let (expr, sense) = build_objective(spec, model, cost)?;
        let sign = match sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        Ok(Self {
            expr: expr.scaled(sign),
            sign,
        })
    }
}

struct Front<'a> {
    model: &'a EnergyModel,
    options: &'a MilpOptions,
}

impl Front<'_> {
    /// Minimizes `goal` subject to `bounded ≤ limit` (when given).
    fn minimize(&self, goal: &Objective, bound: Option<(&Objective, f64)>, context: &str) -> Result<ModelSolution, Error> {
        let mut p = self.model.problem.clone();
        if let Some((obj, limit)) = bound {
            p.add_constraint("pareto/epsilon", obj.expr.clone(), Relation::LessEqual, limit)?;
        }
        p.set_objective(goal.expr.clone(), Sense::Minimize)?;
        self.model.solve_variant(&p, self.options, context)
    }

    /// Minimizes `first`, then `second` with `first` held at its optimum.
    fn lexicographic(&self, first: &Objective, second: &Objective, bound: Option<(&Objective, f64)>) -> Result<ModelSolution, Error> {
        let s1 = self.minimize(first, bound, "pareto")?;
        let f1 = first.expr.evaluate(&s1.values);
        let mut p = self.model.problem.clone();
        if let Some((obj, limit)) = bound {
            p.add_constraint("pareto/epsilon", obj.expr.clone(), Relation::LessEqual, limit)?;
        }
        p.add_constraint("pareto/hold", first.expr.clone(), Relation::LessEqual, f1)?;
        p.set_objective(second.expr.clone(), Sense::Minimize)?;
        match self.model.solve_variant(&p, self.options, "pareto") {
            Ok(s2) => Ok(s2),
            // the hold row can be numerically out of reach; keep the first solve
            Err(Error::Infeasible { .. }) => Ok(s1),
            Err(e) => Err(e),
        }
    }
}

/// Generates up to `n_points` non-dominated points trading `obj_a` against
/// `obj_b`, sorted ascending by `objective_a`.
pub fn generate_pareto_front(
    model: &EnergyModel,
    obj_a: &ObjectiveSpec,
    obj_b: &ObjectiveSpec,
    cost: &CostParameters,
    n_points: usize,
    options: &MilpOptions,
) -> Result<Vec<ParetoPoint>, Error> {
    if n_points < 2 {
        return Err(Error::InvalidInput("a Pareto front needs at least 2 points".into()));
    }
    let a = Objective::new(obj_a, model, cost)?;
    let b = Objective::new(obj_b, model, cost)?;
    let front = Front {
        model,
        options,
    };

    let at_a = front.lexicographic(&a, &b, None)?;
    let at_b = front.lexicographic(&b, &a, None)?;
    let b_hi = b.expr.evaluate(&at_a.values);
    let b_lo = b.expr.evaluate(&at_b.values);

    let mut raw = vec![at_a];
    for k in 1..n_points - 1 {
        let eps = b_hi + (b_lo - b_hi) * k as f64 / (n_points - 1) as f64;
        // interior bounds lie between two feasible endpoints, so infeasibility
        // here is numerical and the point is skipped
        match front.lexicographic(&a, &b, Some((&b, eps))) {
            Ok(s) => raw.push(s),
            Err(Error::Infeasible { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    raw.push(at_b);

    let mut points: Vec<(f64, f64, ModelSolution)> = raw
        .into_iter()
        .map(|s| (a.expr.evaluate(&s.values), b.expr.evaluate(&s.values), s))
        .collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
    let mut kept: Vec<(f64, f64, ModelSolution)> = Vec::new();
    for p in points {
        let duplicate = kept
            .iter()
            .any(|q| (q.0 - p.0).abs() <= DUPLICATE_TOL && (q.1 - p.1).abs() <= DUPLICATE_TOL);
        let dominated = kept.iter().any(|q| dominates((q.0, q.1), (p.0, p.1)));
        if !duplicate && !dominated {
            kept.retain(|q| !dominates((p.0, p.1), (q.0, q.1)));
            kept.push(p);
        }
    }
    let mut out: Vec<ParetoPoint> = kept
        .into_iter()
        .map(|(fa, fb, solution)| ParetoPoint {
            objective_a: a.sign * fa,
            objective_b: b.sign * fb,
            solution,
        })
        .collect();
    out.sort_by(|x, y| x.objective_a.total_cmp(&y.objective_a));
    Ok(out)
}

/// Whether `p` dominates `q` (minimization form), beyond the duplicate tolerance.
pub fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 <= q.0 + DUPLICATE_TOL
        && p.1 <= q.1 + DUPLICATE_TOL
        && (p.0 < q.0 - DUPLICATE_TOL || p.1 < q.1 - DUPLICATE_TOL)
}
