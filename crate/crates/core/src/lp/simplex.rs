use super::{LinearProgram, Relation, Solution, Status, EPS_FEAS};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate Dantzig pivots tolerated before switching to Bland.
const DEGENERATE_LIMIT: usize = 50;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi - y`
    Flip { col: usize, hi: f64 },
    /// `x = y+ - y-`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    map: Vec<VarMap>,
    num_struct: usize,
    cost: Vec<f64>,
    constant: f64,
    /// rows as (dense coefficients over structural columns, relation, rhs)
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

fn standardize(lp: &LinearProgram) -> StandardForm {
    let mut map = Vec::with_capacity(lp.num_vars());
    let mut num_struct = 0;
    for &(lo, hi) in &lp.bounds {
        if lo.is_finite() {
            map.push(VarMap::Shift { col: num_struct, lo });
            num_struct += 1;
        } else if hi.is_finite() {
            map.push(VarMap::Flip { col: num_struct, hi });
            num_struct += 1;
        } else {
            map.push(VarMap::Split {
                pos: num_struct,
                neg: num_struct + 1,
            });
            num_struct += 2;
        }
    }

    let mut cost = vec![0.0; num_struct];
    let mut constant = 0.0;
    let substitute = |coeffs: &[f64], out: &mut Vec<f64>| -> f64 {
        let mut shift = 0.0;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match map[j] {
                VarMap::Shift { col, lo } => {
                    out[col] += a;
                    shift += a * lo;
                }
                VarMap::Flip { col, hi } => {
                    out[col] -= a;
                    shift += a * hi;
                }
                VarMap::Split { pos, neg } => {
                    out[pos] += a;
                    out[neg] -= a;
                }
            }
        }
        shift
    };
    constant += substitute(&lp.objective, &mut cost);

    let mut rows = Vec::with_capacity(lp.constraints.len());
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; num_struct];
        let shift = substitute(&c.coeffs, &mut coeffs);
        rows.push((coeffs, c.relation, c.rhs - shift));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if let VarMap::Shift { col, .. } = map[j] {
            if hi.is_finite() {
                let mut coeffs = vec![0.0; num_struct];
                coeffs[col] = 1.0;
                rows.push((coeffs, Relation::Le, hi - lo));
            }
        }
    }
    StandardForm {
        map,
        num_struct,
        cost,
        constant,
        rows,
    }
}

struct Tableau {
    m: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    /// reduced costs, last entry is minus the objective value
    reduced: Vec<f64>,
    barred: Vec<bool>,
    bland: bool,
    degenerate_run: usize,
    iterations: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn set_costs(&mut self, costs: &[f64]) {
        self.reduced = costs.to_vec();
        self.reduced.push(0.0);
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.data[i * self.width..(i + 1) * self.width];
                for (d, &t) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.at(r, c);
        for j in 0..w {
            self.data[r * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for (x, &pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[c] = 0.0;
            }
        }
        let f = self.reduced[c];
        if f != 0.0 {
            for (x, &pr) in self.reduced.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            self.reduced[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn entering(&self) -> Option<usize> {
        let cols = self.width - 1;
        if self.bland {
            (0..cols).find(|&j| !self.barred[j] && self.reduced[j] < -PIVOT_TOL)
        } else {
            let mut best = None;
            let mut best_val = -PIVOT_TOL;
            for j in 0..cols {
                if !self.barred[j] && self.reduced[j] < best_val {
                    best_val = self.reduced[j];
                    best = Some(j);
                }
            }
            best
        }
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            let a = self.at(i, c);
            if a > PIVOT_TOL {
                let ratio = self.rhs(i).max(0.0) / a;
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
        }
        best.map(|(i, _)| i)
    }

    fn run(&mut self, cap: usize) -> Result<Outcome> {
        loop {
            let Some(c) = self.entering() else {
                return Ok(Outcome::Optimal);
            };
            let Some(r) = self.leaving(c) else {
                return Ok(Outcome::Unbounded);
            };
            if self.rhs(r).abs() <= PIVOT_TOL {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
            }
            self.pivot(r, c);
            self.iterations += 1;
            if self.iterations > cap {
                return Err(Error::NumericalInstability(self.iterations));
            }
        }
    }
}

/// Solves a linear program with the two-phase simplex method.
///
/// Dantzig pricing with a switch to Bland's rule after a run of degenerate
/// pivots. An `Optimal` result has passed a residual check against the
/// original constraints.
pub fn solve_lp(lp: &LinearProgram) -> Result<Solution> {
    lp.validate()?;
    let n = lp.num_vars();
    let sf = standardize(lp);
    let m = sf.rows.len();
    let ns = sf.num_struct;

    // column layout: structural | slack/surplus per row | artificial per row
    let mut extra_cols = 0;
    let mut slack_col = vec![None; m];
    let mut art_col = vec![None; m];
    let mut normalized = Vec::with_capacity(m);
    for (i, (coeffs, rel, rhs)) in sf.rows.iter().enumerate() {
        let (coeffs, rel, rhs) = if *rhs < 0.0 {
            let flipped = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            (coeffs.iter().map(|a| -a).collect::<Vec<_>>(), flipped, -rhs)
        } else {
            (coeffs.clone(), *rel, *rhs)
        };
        if rel != Relation::Eq {
            slack_col[i] = Some(ns + extra_cols);
            extra_cols += 1;
        }
        normalized.push((coeffs, rel, rhs));
    }
    let first_art = ns + extra_cols;
    let mut num_art = 0;
    for (i, (_, rel, _)) in normalized.iter().enumerate() {
        if *rel != Relation::Le {
            art_col[i] = Some(first_art + num_art);
            num_art += 1;
        }
    }
    let cols = first_art + num_art;
    let width = cols + 1;

    let mut data = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let mut identity = vec![0; m];
    for (i, (coeffs, rel, rhs)) in normalized.iter().enumerate() {
        let row = &mut data[i * width..(i + 1) * width];
        row[..ns].copy_from_slice(coeffs);
        row[cols] = *rhs;
        match rel {
            Relation::Le => {
                let s = slack_col[i].unwrap();
                row[s] = 1.0;
                basis[i] = s;
                identity[i] = s;
            }
            Relation::Ge => {
                row[slack_col[i].unwrap()] = -1.0;
                let a = art_col[i].unwrap();
                row[a] = 1.0;
                basis[i] = a;
                identity[i] = a;
            }
            Relation::Eq => {
                let a = art_col[i].unwrap();
                row[a] = 1.0;
                basis[i] = a;
                identity[i] = a;
            }
        }
    }

    let mut t = Tableau {
        m,
        width,
        data,
        basis,
        reduced: Vec::new(),
        barred: vec![false; cols],
        bland: false,
        degenerate_run: 0,
        iterations: 0,
    };
    let cap = 50_000 + 50 * (m + cols);

    if num_art > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in phase1.iter_mut().skip(first_art) {
            *c = 1.0;
        }
        t.set_costs(&phase1);
        t.run(cap)?;
        let infeasibility = -t.reduced[cols];
        let scale = 1.0 + normalized.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok(Solution::without_point(Status::Infeasible, n));
        }
        // drive zero-level artificials out of the basis where possible
        for i in 0..m {
            if t.basis[i] >= first_art {
                if let Some(j) = (0..first_art).find(|&j| t.at(i, j).abs() > PIVOT_TOL) {
                    t.pivot(i, j);
                }
            }
        }
        for b in t.barred.iter_mut().skip(first_art) {
            *b = true;
        }
        t.bland = false;
        t.degenerate_run = 0;
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..ns].copy_from_slice(&sf.cost);
    t.set_costs(&phase2);
    if let Outcome::Unbounded = t.run(cap)? {
        return Ok(Solution::without_point(Status::Unbounded, n));
    }

    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[t.basis[i]] = t.rhs(i).max(0.0);
    }
    let values: Vec<f64> = sf
        .map
        .iter()
        .map(|vm| match *vm {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Flip { col, hi } => hi - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();

    // duals y_i = c_B B^-1 e_i, read from each row's identity column
    let mut dual_objective = sf.constant;
    for (i, row) in normalized.iter().enumerate() {
        let col = identity[i];
        let yi: f64 = (0..m).map(|r| phase2[t.basis[r]] * t.at(r, col)).sum();
        dual_objective += yi * row.2;
    }

    if lp.max_violation(&values) > EPS_FEAS {
        return Err(Error::NumericalInstability(t.iterations));
    }
    let objective = lp.objective_value(&values);
    Ok(Solution {
        status: Status::Optimal,
        values,
        objective,
        dual_objective: Some(dual_objective),
    })
}
