//! Model builder: variables with bounds and integrality, linear rows, objective.

use std::fmt;

use crate::error::ModelError;

/// Handle to a variable inside a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Handle to a constraint row inside a [`Model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub(crate) usize);

impl RowId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveSense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
}

/// A linear row `lower <= Σ coef·x <= upper`. One-sided rows carry an
/// infinite bound on the other side.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Constraint {
    pub fn is_range(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite() && self.lower != self.upper
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }
}

/// Mixed-integer linear model. Immutable once handed to a solver.
#[derive(Debug, Clone)]
pub struct Model {
    name: String,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
    objective: Vec<f64>,
    sense: ObjectiveSense,
}

impl Default for Model {
    fn default() -> Self {
        Self::new("model")
    }
}

impl Model {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            sense: ObjectiveSense::Maximize,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integer: bool,
    ) -> VarId {
        let id = VarId(self.vars.len());
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer,
        });
        self.objective.push(0.0);
        id
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, true)
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, true)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, false)
    }

    /// Adds `Σ terms (rel) rhs`. Repeated variables in `terms` are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        rel: Relation,
        rhs: f64,
    ) -> RowId {
        let (lower, upper) = match rel {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
            Relation::Eq => (rhs, rhs),
        };
        self.add_range(name, terms, lower, upper)
    }

    /// Adds the two-sided row `lower <= Σ terms <= upper`.
    pub fn add_range(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        lower: f64,
        upper: f64,
    ) -> RowId {
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, c) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += c,
                _ => merged.push((v, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        let id = RowId(self.rows.len());
        self.rows.push(Constraint {
            name: name.into(),
            terms: merged,
            lower,
            upper,
        });
        id
    }

    pub fn set_objective(
        &mut self,
        sense: ObjectiveSense,
        terms: impl IntoIterator<Item = (VarId, f64)>,
    ) {
        self.sense = sense;
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for (v, c) in terms {
            if let Some(slot) = self.objective.get_mut(v.0) {
                *slot += c;
            }
        }
    }

    pub fn sense(&self) -> ObjectiveSense {
        self.sense
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name).map(VarId)
    }

    pub fn find_row(&self, name: &str) -> Option<RowId> {
        self.rows.iter().position(|r| r.name == name).map(RowId)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().zip(values).map(|(c, x)| c * x).sum()
    }

    /// Checks bound sanity and that every row references declared variables.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(ModelError::NanBound {
                    var: v.name.clone(),
                });
            }
            if v.lower > v.upper {
                return Err(ModelError::EmptyBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(ModelError::EmptyBounds {
                    var: v.name.clone(),
                    lower: v.lower,
                    upper: v.upper,
                });
            }
            debug_assert!(i < self.objective.len());
        }
        for row in &self.rows {
            if row.lower.is_nan() || row.upper.is_nan() {
                return Err(ModelError::NanRhs {
                    row: row.name.clone(),
                });
            }
            for &(v, c) in &row.terms {
                if v.0 >= self.vars.len() {
                    return Err(ModelError::UnknownVariable {
                        row: row.name.clone(),
                        index: v.0,
                    });
                }
                if !c.is_finite() {
                    return Err(ModelError::NonFiniteCoefficient {
                        row: row.name.clone(),
                    });
                }
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(ModelError::NonFiniteCoefficient {
                row: "objective".into(),
            });
        }
        Ok(())
    }

    /// Largest violation of bounds, rows and integrality for `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        if values.len() != self.vars.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for (v, &x) in self.vars.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
            if v.integer {
                worst = worst.max((x - x.round()).abs());
            }
        }
        for row in &self.rows {
            let a = row.activity(values);
            worst = worst.max(row.lower - a).max(a - row.upper);
        }
        worst
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        self.max_violation(values) <= tol
    }
}
