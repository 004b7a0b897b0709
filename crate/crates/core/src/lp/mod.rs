//! Dense two-phase simplex and a depth-first branch-and-bound on top of it.
//!
//! Sized for the small, well-scaled models that show up here: the cycle LP,
//! region membership LPs and toy time-expanded MILPs.

mod milp;
mod simplex;

pub use milp::{solve_milp, Integrality, MilpModel};
pub use simplex::solve_lp;

use crate::error::{Error, Result};

/// Primal feasibility tolerance used for post-solve residual checks.
pub const EPS_FEAS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `minimize objective · x` subject to the constraints and variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// `(lower, upper)` per variable; infinities allowed.
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// A program over `n` non-negative variables.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    /// Adds a constraint given as sparse `(index, coefficient)` terms.
    pub fn add_sparse(&mut self, terms: &[(usize, f64)], relation: Relation, rhs: f64) -> &mut Self {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(j, a) in terms {
            coeffs[j] += a;
        }
        self.add(coeffs, relation, rhs)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::MalformedLp(format!(
                "{} bounds for {} variables",
                self.bounds.len(),
                n
            )));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::MalformedLp("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::MalformedLp(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().any(|a| !a.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::MalformedLp(format!("constraint {i} has a non-finite entry")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::MalformedLp(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Largest constraint or bound violation of `x`, scaled by `1 + |rhs|`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let gap = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(gap / (1.0 + c.rhs.abs()));
        }
        for (&v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch-and-bound stopped early; `values` holds the best incumbent.
    NodeLimit,
    /// Branch-and-bound stopped early without any integral point.
    NoIncumbent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Dual objective recovered from the final basis (LP only).
    pub dual_objective: Option<f64>,
}

impl Solution {
    pub(crate) fn without_point(status: Status, n: usize) -> Self {
        Self {
            status,
            values: vec![0.0; n],
            objective: f64::NAN,
            dual_objective: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// `|primal - dual|`, if a dual value is available.
    pub fn duality_gap(&self) -> Option<f64> {
        self.dual_objective.map(|d| (self.objective - d).abs())
    }
}

/// The cycle LP: minimize `sum K_i` subject to `sum_i r^i K_i >= Q`
/// componentwise and `K >= 0`. `rates[i]` is the i-th service vector.
pub fn solve_cycle_lp(rates: &[Vec<f64>], demand: &[f64]) -> Result<Solution> {
    let p = demand.len();
    if let Some(bad) = rates.iter().find(|r| r.len() != p) {
        return Err(Error::MalformedLp(format!(
            "service vector of length {} for {p} pairs",
            bad.len()
        )));
    }
    if rates.iter().flatten().any(|&r| r < 0.0 || !r.is_finite()) || demand.iter().any(|&q| q < 0.0 || !q.is_finite()) {
        return Err(Error::MalformedLp("rates and demand must be non-negative".into()));
    }
    for (pair, &q) in demand.iter().enumerate() {
        if q > 0.0 && rates.iter().all(|r| r[pair] <= 0.0) {
            return Ok(Solution::without_point(Status::Infeasible, rates.len()));
        }
    }
    let mut lp = LinearProgram::new(vec![1.0; rates.len()]);
    for (pair, &q) in demand.iter().enumerate() {
        if q > 0.0 {
            lp.add(rates.iter().map(|r| r[pair]).collect(), Relation::Ge, q);
        }
    }
    let sol = solve_lp(&lp)?;
    if sol.is_optimal() {
        // coverage is re-checked independently of the simplex's own check
        for (pair, &q) in demand.iter().enumerate() {
            let covered: f64 = rates.iter().zip(&sol.values).map(|(r, k)| r[pair] * k).sum();
            if covered < q - EPS_FEAS * (1.0 + q) {
                return Err(Error::NumericalInstability(0));
            }
        }
    }
    Ok(sol)
}
