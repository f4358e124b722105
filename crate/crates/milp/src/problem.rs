//! In-memory representation of a mixed-integer linear program.
//!
//! Variables are addressed by dense [`VariableId`]s handed out in insertion
//! order. Constraints are stored in canonical form: the expression constant
//! is folded into the right-hand side and zero coefficients are dropped, so
//! two models built by the same sequence of calls are identical.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::ModelError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VariableId(pub(crate) usize);

impl VariableId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: VariableId,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integral: bool,
}

impl Variable {
    pub fn is_binary(&self) -> bool {
        self.integral && self.lower == 0.0 && self.upper == 1.0
    }
}

/// Sparse affine expression `Σ coef·var + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearExpression {
    terms: BTreeMap<VariableId, f64>,
    constant: f64,
}

impl LinearExpression {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: value,
        }
    }

    pub fn term(var: VariableId, coef: f64) -> Self {
        let mut expr = Self::new();
        expr.add_term(var, coef);
        expr
    }

    /// Builder form of [`add_term`](Self::add_term).
    pub fn with_term(mut self, var: VariableId, coef: f64) -> Self {
        self.add_term(var, coef);
        self
    }

    pub fn with_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    /// Accumulates `coef·var`; a coefficient that cancels to zero is removed.
    pub fn add_term(&mut self, var: VariableId, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let entry = self.terms.entry(var).or_insert(0.0);
        *entry += coef;
        if *entry == 0.0 {
            self.terms.remove(&var);
        }
    }

    pub fn add_constant(&mut self, value: f64) {
        self.constant += value;
    }

    pub fn add_scaled(&mut self, other: &LinearExpression, factor: f64) {
        for (&var, &coef) in &other.terms {
            self.add_term(var, coef * factor);
        }
        self.constant += other.constant * factor;
    }

    pub fn scaled(&self, factor: f64) -> LinearExpression {
        let mut out = LinearExpression::new();
        out.add_scaled(self, factor);
        out
    }

    pub fn terms(&self) -> impl ExactSizeIterator<Item = (VariableId, f64)> + '_ {
        self.terms.iter().map(|(&v, &c)| (v, c))
    }

    pub fn coefficient(&self, var: VariableId) -> f64 {
        self.terms.get(&var).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Value of the expression at `values`, indexed by variable id.
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(v, c)| c * values[v.0])
            .sum::<f64>()
            + self.constant
    }
}

impl From<VariableId> for LinearExpression {
    fn from(var: VariableId) -> Self {
        LinearExpression::term(var, 1.0)
    }
}

impl AddAssign<&LinearExpression> for LinearExpression {
    fn add_assign(&mut self, rhs: &LinearExpression) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Add for LinearExpression {
    type Output = LinearExpression;
    fn add(mut self, rhs: LinearExpression) -> LinearExpression {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for LinearExpression {
    type Output = LinearExpression;
    fn sub(mut self, rhs: LinearExpression) -> LinearExpression {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Neg for LinearExpression {
    type Output = LinearExpression;
    fn neg(self) -> LinearExpression {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for LinearExpression {
    type Output = LinearExpression;
    fn mul(self, rhs: f64) -> LinearExpression {
        self.scaled(rhs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    LessEqual,
    Equal,
    GreaterEqual,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::LessEqual => "<=",
            Relation::Equal => "=",
            Relation::GreaterEqual => ">=",
        }
    }

    pub fn is_satisfied(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::LessEqual => lhs <= rhs + tol,
            Relation::Equal => (lhs - rhs).abs() <= tol,
            Relation::GreaterEqual => lhs >= rhs - tol,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Sense {
    #[default]
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    /// Canonical: constant is always zero.
    pub expr: LinearExpression,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MilpProblem {
    variables: Vec<Variable>,
    by_name: HashMap<String, VariableId>,
    constraints: Vec<Constraint>,
    constraint_names: HashSet<String>,
    objective: LinearExpression,
    sense: Sense,
}

impl MilpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        name: &str,
        lower: f64,
        upper: f64,
        integral: bool,
    ) -> Result<VariableId, ModelError> {
        check_name(name)?;
        if self.by_name.contains_key(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        check_bounds(name, lower, upper)?;
        let id = VariableId(self.variables.len());
        self.variables.push(Variable {
            id,
            name: name.to_string(),
            lower,
            upper,
            integral,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn add_continuous(&mut self, name: &str, lower: f64, upper: f64) -> Result<VariableId, ModelError> {
        self.add_variable(name, lower, upper, false)
    }

    pub fn add_binary(&mut self, name: &str) -> Result<VariableId, ModelError> {
        self.add_variable(name, 0.0, 1.0, true)
    }

    pub fn set_bounds(&mut self, var: VariableId, lower: f64, upper: f64) -> Result<(), ModelError> {
        let v = self
            .variables
            .get_mut(var.0)
            .ok_or_else(|| ModelError::UnknownVariable(var.to_string()))?;
        check_bounds(&v.name, lower, upper)?;
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn set_integral(&mut self, var: VariableId, integral: bool) {
        self.variables[var.0].integral = integral;
    }

    /// Stores `expr relation rhs` in canonical form and returns its index.
    pub fn add_constraint(
        &mut self,
        name: &str,
        expr: LinearExpression,
        relation: Relation,
        rhs: f64,
    ) -> Result<ConstraintId, ModelError> {
        check_name(name)?;
        if self.constraint_names.contains(name) {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        self.check_expression(&expr, name)?;
        let rhs = rhs - expr.constant;
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(format!("right-hand side of {name}")));
        }
        let mut canonical = expr;
        canonical.constant = 0.0;
        let id = ConstraintId(self.constraints.len());
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr: canonical,
            relation,
            rhs,
        });
        self.constraint_names.insert(name.to_string());
        Ok(id)
    }

    pub fn set_objective(&mut self, expr: LinearExpression, sense: Sense) -> Result<(), ModelError> {
        self.check_expression(&expr, "objective")?;
        if !expr.constant.is_finite() {
            return Err(ModelError::NonFinite("objective constant".into()));
        }
        self.objective = expr;
        self.sense = sense;
        Ok(())
    }

    fn check_expression(&self, expr: &LinearExpression, context: &str) -> Result<(), ModelError> {
        for (var, coef) in expr.terms() {
            if var.0 >= self.variables.len() {
                return Err(ModelError::UnknownVariable(format!("{var} in {context}")));
            }
            if !coef.is_finite() {
                return Err(ModelError::NonFinite(format!(
                    "coefficient of {} in {context}",
                    self.variables[var.0].name
                )));
            }
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VariableId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn variable_by_name(&self, name: &str) -> Option<VariableId> {
        self.by_name.get(name).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: ConstraintId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &LinearExpression {
        &self.objective
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.integral)
    }

    /// Largest violation of any bound or constraint at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for v in &self.variables {
            let x = values[v.id.0];
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs = c.expr.evaluate(values);
            let viol = match c.relation {
                Relation::LessEqual => lhs - c.rhs,
                Relation::GreaterEqual => c.rhs - lhs,
                Relation::Equal => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

/// Names must survive a trip through CPLEX-LP text unchanged.
fn check_name(name: &str) -> Result<(), ModelError> {
    if is_lp_name(name) {
        Ok(())
    } else {
        Err(ModelError::InvalidName(name.to_string()))
    }
}

pub(crate) fn is_lp_name(name: &str) -> bool {
    const EXTRA: &str = "_./#$%&(),;?@{}|~!'";
    let mut chars = name.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    if first.is_ascii_digit() || first == '.' {
        return false;
    }
    if !name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
    {
        return false;
    }
    let lower = name.to_ascii_lowercase();
    !matches!(lower.as_str(), "free" | "inf" | "infinity")
}

fn check_bounds(name: &str, lower: f64, upper: f64) -> Result<(), ModelError> {
    if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY || lower > upper
    {
        return Err(ModelError::InvalidBounds {
            name: name.to_string(),
            lower,
            upper,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_sequential() {
        let mut p = MilpProblem::new();
        let a = p.add_variable("p_pv", 0.0, 10.0, false).unwrap();
        assert_eq!(a.index(), 0);
        let b = p.add_variable("u_on", 0.0, 1.0, true).unwrap();
        assert_eq!(b.index(), 1);
        assert!(p.variable(b).integral);
        assert_eq!(p.variable_by_name("u_on"), Some(b));
    }

    #[test]
    fn duplicate_and_bad_bounds_rejected() {
        let mut p = MilpProblem::new();
        p.add_variable("p_pv", 0.0, 10.0, false).unwrap();
        assert_eq!(
            p.add_variable("p_pv", 0.0, 1.0, false),
            Err(ModelError::DuplicateName("p_pv".into()))
        );
        assert!(matches!(
            p.add_variable("y", 2.0, 1.0, false),
            Err(ModelError::InvalidBounds { .. })
        ));
        assert!(matches!(
            p.add_variable("3x", 0.0, 1.0, false),
            Err(ModelError::InvalidName(_))
        ));
        assert!(p.add_variable("free", 0.0, 1.0, false).is_err());
        assert!(p.add_variable("a-b", 0.0, 1.0, false).is_err());
    }

    #[test]
    fn constant_is_folded_and_zeros_dropped() {
        let mut p = MilpProblem::new();
        let x = p.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let y = p.add_continuous("y", 0.0, f64::INFINITY).unwrap();
        let c = p
            .add_constraint("c1", LinearExpression::term(x, 1.0).with_constant(2.0), Relation::LessEqual, 5.0)
            .unwrap();
        let stored = p.constraint(c);
        assert_eq!(stored.rhs, 3.0);
        assert_eq!(stored.expr.constant_term(), 0.0);

        let c = p
            .add_constraint(
                "c2",
                LinearExpression::term(x, 1.0).with_term(y, 0.0),
                Relation::Equal,
                4.0,
            )
            .unwrap();
        let stored = p.constraint(c);
        assert_eq!(stored.expr.len(), 1);
        assert_eq!(stored.expr.coefficient(x), 1.0);
        assert_eq!(stored.rhs, 4.0);
    }

    #[test]
    fn unknown_variable_rejected() {
        let mut p = MilpProblem::new();
        let ghost = VariableId(7);
        assert!(matches!(
            p.add_constraint("c", LinearExpression::term(ghost, 1.0), Relation::LessEqual, 1.0),
            Err(ModelError::UnknownVariable(_))
        ));
        assert!(p.set_objective(LinearExpression::term(ghost, 1.0), Sense::Minimize).is_err());
    }

    #[test]
    fn cancelling_terms_vanish() {
        let x = VariableId(0);
        let e = LinearExpression::term(x, 2.0) - LinearExpression::term(x, 2.0);
        assert!(e.is_empty());
    }
}
