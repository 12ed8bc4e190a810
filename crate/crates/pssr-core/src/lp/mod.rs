//! Exact rational linear and integer programming.
//!
//! Everything here runs over arbitrary-precision rationals: an optimal
//! solution satisfies every constraint with exact arithmetic, and no
//! tolerance parameter exists anywhere in this module. The LP solver is a
//! revised simplex with a product-form inverse ([`simplex`]); the integer
//! solver is branch-and-bound over exact LP relaxations ([`branch`]).

mod branch;
mod lpfmt;
mod simplex;

pub use branch::{solve_ilp, solve_ilp_seeded};
pub use lpfmt::write_lp_format;
pub use simplex::solve_lp;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::rational::Rat;

pub type VarId = usize;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Sense {
    Min,
    Max,
}

/// One linear constraint: a sparse, duplicate-free coefficient row, a
/// relation, and a right-hand side.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, Rat)>,
    pub rel: Relation,
    pub rhs: Rat,
}

#[derive(Clone, Debug)]
pub struct VarDef {
    pub name: String,
    pub lower: Rat,
    pub integral: bool,
}

/// A linear (or integer) program over exact rationals. Variables carry a
/// lower bound (0 unless declared otherwise) and an integrality flag that
/// only [`solve_ilp`] honors.
#[derive(Clone, Debug)]
pub struct Program {
    pub vars: Vec<VarDef>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, Rat)>,
    pub sense: Sense,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output. For `Optimal`, `values` satisfies every constraint and
/// bound exactly, and `duals` (one entry per constraint, present for LP
/// solves) certifies optimality via strong duality.
#[derive(Clone, Debug)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<Rat>,
    pub objective: Rat,
    pub duals: Option<Vec<Rat>>,
}

impl Solution {
    pub fn infeasible() -> Self {
        Solution {
            status: Status::Infeasible,
            values: Vec::new(),
            objective: Rat::zero(),
            duals: None,
        }
    }

    pub fn unbounded() -> Self {
        Solution {
            status: Status::Unbounded,
            values: Vec::new(),
            objective: Rat::zero(),
            duals: None,
        }
    }
}

/// Node, iteration, and wall-clock budgets. Exhaustion is a first-class,
/// reported outcome, never a silent truncation.
#[derive(Clone, Debug)]
pub struct SolveBudget {
    /// Branch-and-bound node limit.
    pub max_nodes: u64,
    /// Simplex iteration limit per LP solve.
    pub max_lp_iterations: u64,
    /// Overall wall-clock limit.
    pub time_limit: Option<Duration>,
}

impl Default for SolveBudget {
    fn default() -> Self {
        SolveBudget {
            max_nodes: 200_000,
            max_lp_iterations: 5_000_000,
            time_limit: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error(
        "budget exceeded after {nodes} nodes / {lp_iterations} LP iterations (bound {}, incumbent {})",
        .best_bound.as_ref().map(|b| b.to_string()).unwrap_or_else(|| "none".into()),
        .incumbent_objective.as_ref().map(|b| b.to_string()).unwrap_or_else(|| "none".into())
    )]
    BudgetExceeded {
        nodes: u64,
        lp_iterations: u64,
        /// Best objective bound among unexplored subproblems.
        best_bound: Option<Rat>,
        /// Best integral solution found before the budget ran out.
        incumbent_objective: Option<Rat>,
    },
    #[error("integer program has an unbounded LP relaxation and no caller-supplied incumbent")]
    UnboundedRelaxation,
    #[error("caller-supplied incumbent is not feasible: {0}")]
    BadIncumbent(String),
}

impl Program {
    pub fn new(sense: Sense) -> Self {
        Program {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Rat, integral: bool) -> VarId {
        self.vars.push(VarDef {
            name: name.into(),
            lower,
            integral,
        });
        self.vars.len() - 1
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, Rat)>,
        rel: Relation,
        rhs: Rat,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            rel,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Reject undeclared variable references, duplicate coefficients, and an
    /// empty objective.
    pub fn validate(&self) -> Result<(), SolveError> {
        let check_row = |label: &str, terms: &[(VarId, Rat)]| -> Result<(), SolveError> {
            let mut seen = vec![false; self.vars.len()];
            for (v, _) in terms {
                if *v >= self.vars.len() {
                    return Err(SolveError::Malformed(format!(
                        "{label} references undeclared variable #{v}"
                    )));
                }
                if seen[*v] {
                    return Err(SolveError::Malformed(format!(
                        "{label} has a duplicate coefficient for {}",
                        self.vars[*v].name
                    )));
                }
                seen[*v] = true;
            }
            Ok(())
        };
        if self.objective.is_empty() {
            return Err(SolveError::Malformed("empty objective".into()));
        }
        check_row("objective", &self.objective)?;
        for c in &self.constraints {
            check_row(&format!("constraint {}", c.name), &c.terms)?;
        }
        Ok(())
    }

    pub fn eval_terms(terms: &[(VarId, Rat)], x: &[Rat]) -> Rat {
        let mut acc = Rat::zero();
        for (v, c) in terms {
            if !c.is_zero() && !x[*v].is_zero() {
                acc += &(c * &x[*v]);
            }
        }
        acc
    }

    pub fn objective_value(&self, x: &[Rat]) -> Rat {
        Self::eval_terms(&self.objective, x)
    }

    /// Exact feasibility check of a point against all constraints and bounds
    /// (integrality included when `integral` is set). Returns the name of the
    /// first violated condition.
    pub fn check_point(&self, x: &[Rat], integral: bool) -> Result<(), String> {
        if x.len() != self.vars.len() {
            return Err(format!(
                "point has {} values, program has {} variables",
                x.len(),
                self.vars.len()
            ));
        }
        for (v, def) in self.vars.iter().enumerate() {
            if x[v] < def.lower {
                return Err(format!("{} = {} below lower bound {}", def.name, x[v], def.lower));
            }
            if integral && def.integral && !x[v].is_integer() {
                return Err(format!("{} = {} not integral", def.name, x[v]));
            }
        }
        for c in &self.constraints {
            let lhs = Self::eval_terms(&c.terms, x);
            let ok = match c.rel {
                Relation::Le => lhs <= c.rhs,
                Relation::Eq => lhs == c.rhs,
                Relation::Ge => lhs >= c.rhs,
            };
            if !ok {
                return Err(format!(
                    "constraint {} violated: lhs {} {:?} rhs {}",
                    c.name, lhs, c.rel, c.rhs
                ));
            }
        }
        Ok(())
    }
}

/// Verify an optimal LP solution's certificate: exact primal feasibility,
/// dual sign feasibility, nonnegative reduced costs, complementary
/// slackness, and strong duality. Returns a description of the first
/// failure, if any.
pub fn verify_certificate(p: &Program, sol: &Solution) -> Result<(), String> {
    if sol.status != Status::Optimal {
        return Err("certificate check requires an optimal solution".into());
    }
    p.check_point(&sol.values, false)?;
    let obj = p.objective_value(&sol.values);
    if obj != sol.objective {
        return Err(format!(
            "reported objective {} differs from recomputed {}",
            sol.objective, obj
        ));
    }
    let Some(duals) = &sol.duals else {
        return Err("no dual values attached".into());
    };
    if duals.len() != p.constraints.len() {
        return Err("dual vector length mismatch".into());
    }

    // Work in min form: for Max, the attached duals certify the negated
    // problem, so flip them along with the costs.
    let sign = match p.sense {
        Sense::Min => Rat::one(),
        Sense::Max => -Rat::one(),
    };
    let mut cost = vec![Rat::zero(); p.vars.len()];
    for (v, c) in &p.objective {
        cost[*v] += &(&sign * c);
    }
    let duals: Vec<Rat> = duals.iter().map(|y| &sign * y).collect();

    let mut reduced = cost;
    for (r, c) in p.constraints.iter().enumerate() {
        match c.rel {
            Relation::Ge if duals[r].is_negative() => {
                return Err(format!("dual for >= row {} is negative: {}", c.name, duals[r]))
            }
            Relation::Le if duals[r].is_positive() => {
                return Err(format!("dual for <= row {} is positive: {}", c.name, duals[r]))
            }
            _ => {}
        }
        // Complementary slackness on rows.
        if !duals[r].is_zero() {
            let lhs = Program::eval_terms(&c.terms, &sol.values);
            if lhs != c.rhs {
                return Err(format!(
                    "slack row {} carries nonzero dual {}",
                    c.name, duals[r]
                ));
            }
        }
        for (v, a) in &c.terms {
            reduced[*v] -= &(&duals[r] * a);
        }
    }
    let mut dual_obj = Rat::zero();
    for (r, c) in p.constraints.iter().enumerate() {
        if !duals[r].is_zero() {
            dual_obj += &(&duals[r] * &c.rhs);
        }
    }
    for (v, d) in reduced.iter().enumerate() {
        if d.is_negative() {
            return Err(format!(
                "reduced cost of {} is negative: {}",
                p.vars[v].name, d
            ));
        }
        // Complementary slackness on columns.
        if !d.is_zero() && sol.values[v] != p.vars[v].lower {
            return Err(format!(
                "nonbasic-priced variable {} sits above its lower bound",
                p.vars[v].name
            ));
        }
        dual_obj += &(d * &p.vars[v].lower);
    }
    let primal_obj = &sign * &sol.objective;
    if dual_obj != primal_obj {
        return Err(format!(
            "strong duality fails: dual {} vs primal {}",
            dual_obj, primal_obj
        ));
    }
    Ok(())
}
