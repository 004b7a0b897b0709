use super::{solve_lp, LinearProgram, Solution, Status};
use crate::error::{Error, Result};

const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrality {
    Continuous,
    Binary,
    Integer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub lp: LinearProgram,
    pub integrality: Vec<Integrality>,
}

impl MilpModel {
    pub fn new(lp: LinearProgram, integrality: Vec<Integrality>) -> Self {
        Self { lp, integrality }
    }

    fn root_bounds(&self) -> Result<Vec<(f64, f64)>> {
        if self.integrality.len() != self.lp.num_vars() {
            return Err(Error::MalformedLp(format!(
                "{} integrality marks for {} variables",
                self.integrality.len(),
                self.lp.num_vars()
            )));
        }
        let mut bounds = self.lp.bounds.clone();
        for (j, (kind, b)) in self.integrality.iter().zip(bounds.iter_mut()).enumerate() {
            match kind {
                Integrality::Continuous => {}
                Integrality::Binary => {
                    b.0 = b.0.max(0.0).ceil();
                    b.1 = b.1.min(1.0).floor();
                }
                Integrality::Integer => {
                    if !b.0.is_finite() || !b.1.is_finite() {
                        return Err(Error::MalformedLp(format!("integer variable {j} is unbounded")));
                    }
                    b.0 = b.0.ceil();
                    b.1 = b.1.floor();
                }
            }
        }
        Ok(bounds)
    }
}

/// Depth-first branch-and-bound with LP-relaxation bounding.
///
/// Branches on the most fractional variable (lowest index on ties) and dives
/// into the nearer rounding first. `node_limit` caps the number of LP
/// relaxations solved.
pub fn solve_milp(model: &MilpModel, node_limit: usize) -> Result<Solution> {
    model.lp.validate()?;
    let n = model.lp.num_vars();
    let root = model.root_bounds()?;
    if root.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(Solution::without_point(Status::Infeasible, n));
    }

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut stack = vec![root];
    let mut nodes = 0usize;
    let mut relaxed = model.lp.clone();

    while let Some(bounds) = stack.pop() {
        if nodes >= node_limit {
            stack.push(bounds);
            break;
        }
        nodes += 1;
        relaxed.bounds = bounds.clone();
        let sol = solve_lp(&relaxed)?;
        match sol.status {
            Status::Infeasible => continue,
            Status::Unbounded => {
                return Ok(Solution::without_point(Status::Unbounded, n));
            }
            _ => {}
        }
        if let Some((_, best)) = &incumbent {
            if sol.objective >= best - 1e-9 * (1.0 + best.abs()) {
                continue;
            }
        }

        let mut branch: Option<(usize, f64)> = None;
        let mut best_dist = INT_TOL;
        for (j, kind) in model.integrality.iter().enumerate() {
            if *kind == Integrality::Continuous {
                continue;
            }
            let v = sol.values[j];
            let dist = (v - v.floor()).min(v.ceil() - v);
            if dist > best_dist {
                best_dist = dist;
                branch = Some((j, v));
            }
        }

        match branch {
            None => {
                let mut values = sol.values.clone();
                for (v, kind) in values.iter_mut().zip(&model.integrality) {
                    if *kind != Integrality::Continuous {
                        *v = v.round();
                    }
                }
                if model.lp.max_violation(&values) <= INT_TOL {
                    let obj = model.lp.objective_value(&values);
                    if incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
                        incumbent = Some((values, obj));
                    }
                }
            }
            Some((j, v)) => {
                let mut down = bounds.clone();
                down[j].1 = v.floor();
                let mut up = bounds;
                up[j].0 = v.ceil();
                // the nearer rounding is popped first
                if v - v.floor() < 0.5 {
                    stack.push(up);
                    stack.push(down);
                } else {
                    stack.push(down);
                    stack.push(up);
                }
            }
        }
    }

    let exhausted = stack.is_empty();
    Ok(match (incumbent, exhausted) {
        (Some((values, objective)), true) => Solution {
            status: Status::Optimal,
            values,
            objective,
            dual_objective: None,
        },
        (Some((values, objective)), false) => Solution {
            status: Status::NodeLimit,
            values,
            objective,
            dual_objective: None,
        },
        (None, true) => Solution::without_point(Status::Infeasible, n),
        (None, false) => Solution::without_point(Status::NoIncumbent, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Relation;
    use proptest::prelude::*;

    #[test]
    fn rounding_forced_up() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![1.0], Relation::Ge, 0.4);
        let s = solve_milp(&MilpModel::new(lp, vec![Integrality::Binary]), 100).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(s.values, vec![1.0]);
    }

    #[test]
    fn knapsack() {
        // max 3a + 2b s.t. a + b <= 1
        let mut lp = LinearProgram::new(vec![-3.0, -2.0]);
        lp.add(vec![1.0, 1.0], Relation::Le, 1.0);
        let s = solve_milp(&MilpModel::new(lp, vec![Integrality::Binary; 2]), 100).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_binary_region() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add(vec![1.0], Relation::Ge, 0.5).add(vec![1.0], Relation::Le, 0.4);
        let s = solve_milp(&MilpModel::new(lp, vec![Integrality::Binary]), 100).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn node_limit_without_incumbent() {
        // x + y = 1.5 with both integral is infeasible but needs branching to prove
        let mut lp = LinearProgram::new(vec![1.0, 1.0]);
        lp.add(vec![2.0, 2.0], Relation::Eq, 3.0);
        lp.bounds = vec![(0.0, 3.0); 2];
        let s = solve_milp(&MilpModel::new(lp, vec![Integrality::Integer; 2]), 1).unwrap();
        assert_eq!(s.status, Status::NoIncumbent);
    }

    #[test]
    fn rejects_unbounded_integer() {
        let lp = LinearProgram::new(vec![1.0]);
        assert!(solve_milp(&MilpModel::new(lp, vec![Integrality::Integer]), 10).is_err());
    }

    /// Exhaustive oracle over all integral points inside the bounds.
    fn enumerate(model: &MilpModel) -> Option<f64> {
        let bounds = &model.lp.bounds;
        let mut point: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let mut best: Option<f64> = None;
        loop {
            if model.lp.max_violation(&point) <= 1e-9 {
                let obj = model.lp.objective_value(&point);
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
            let mut j = 0;
            loop {
                if j == point.len() {
                    return best;
                }
                if point[j] < bounds[j].1 {
                    point[j] += 1.0;
                    break;
                }
                point[j] = bounds[j].0;
                j += 1;
            }
        }
    }

    fn small_model() -> impl Strategy<Value = MilpModel> {
        (2usize..=8)
            .prop_flat_map(|n| {
                let obj = prop::collection::vec(-5i32..=5, n);
                let rows = prop::collection::vec((prop::collection::vec(-4i32..=4, n), 0u8..3, -6i32..=10), 1..=4);
                let uppers = prop::collection::vec(1u8..=2, n);
                (obj, rows, uppers)
            })
            .prop_map(|(obj, rows, uppers)| {
                let n = obj.len();
                let mut lp = LinearProgram::new(obj.into_iter().map(f64::from).collect());
                for (coeffs, rel, rhs) in rows {
                    let rel = [Relation::Le, Relation::Ge, Relation::Eq][rel as usize];
                    lp.add(coeffs.into_iter().map(f64::from).collect(), rel, f64::from(rhs));
                }
                lp.bounds = uppers.iter().map(|&u| (0.0, f64::from(u))).collect();
                let kinds = uppers
                    .iter()
                    .map(|&u| {
                        if u == 1 {
                            Integrality::Binary
                        } else {
                            Integrality::Integer
                        }
                    })
                    .collect::<Vec<_>>();
                debug_assert_eq!(kinds.len(), n);
                MilpModel::new(lp, kinds)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn agrees_with_enumeration(model in small_model()) {
            let oracle = enumerate(&model);
            let sol = solve_milp(&model, 100_000).unwrap();
            match oracle {
                None => prop_assert_eq!(sol.status, Status::Infeasible),
                Some(best) => {
                    prop_assert_eq!(sol.status, Status::Optimal);
                    prop_assert!((sol.objective - best).abs() < 1e-6, "bnb {} vs enum {}", sol.objective, best);
                }
            }
        }
    }
}
