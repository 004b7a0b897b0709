//! Throughput regions spanned by service vectors.
//!
//! A demand vector `lambda` (requests per step) lies in the outer region when
//! some weights `x >= 0` with `sum(x) <= 1` give `sum_i x_i r^i >= lambda`
//! componentwise, and in the inner region when the inequality can be made
//! strict for every pair.

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, Relation, Status, EPS_FEAS};
use crate::network::{NetworkSpec, PairId};
use crate::vectors::ServiceVector;

/// Result of a membership query.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCertificate {
    pub member: bool,
    pub strict: bool,
    /// Convex weights over the vectors (meaningful when `member`).
    pub weights: Vec<f64>,
    /// Largest uniform margin `t` with `sum_i x_i r^i >= lambda + t`.
    pub margin: f64,
    /// A pair whose constraint binds at the optimum (when not a member).
    pub violated_pair: Option<PairId>,
}

/// Solves `max t` s.t. `sum_i x_i r^i_p - t * w_p >= b_p`, `sum x <= 1`, `x >= 0`.
/// Returns `(t, x)`; the last LP variable is `t`.
fn margin_lp(rates: &[Vec<f64>], num_pairs: usize, lhs_t: &[f64], rhs: &[f64]) -> Result<(f64, Vec<f64>)> {
    let r = rates.len();
    let mut objective = vec![0.0; r + 1];
    objective[r] = -1.0;
    let mut lp = LinearProgram::new(objective);
    // t is free below, capped above to keep the LP bounded when a pair is unconstrained
    lp.bounds[r] = (
        f64::NEG_INFINITY,
        1.0 + rhs.iter().fold(0.0, |a: f64, &b| a.max(b.abs())),
    );
    for p in 0..num_pairs {
        let mut row: Vec<f64> = rates.iter().map(|v| v[p]).collect();
        row.push(-lhs_t[p]);
        lp.add(row, Relation::Ge, rhs[p]);
    }
    let mut cap = vec![1.0; r];
    cap.push(0.0);
    lp.add(cap, Relation::Le, 1.0);
    let sol = solve_lp(&lp)?;
    match sol.status {
        Status::Optimal => {
            let t = sol.values[r];
            Ok((t, sol.values[..r].to_vec()))
        }
        other => Err(Error::MalformedLp(format!("margin LP ended with status {other:?}"))),
    }
}

fn binding_pairs(rates: &[Vec<f64>], x: &[f64], lhs_t: &[f64], t: f64, rhs: &[f64]) -> Vec<PairId> {
    (0..rhs.len())
        .filter(|&p| {
            let cover: f64 = rates.iter().zip(x).map(|(v, w)| v[p] * w).sum();
            let slack = cover - lhs_t[p] * t - rhs[p];
            lhs_t[p] != 0.0 && slack.abs() <= 1e-7 * (1.0 + rhs[p].abs())
        })
        .map(PairId)
        .collect()
}

/// Tests whether `lambda` (per step) lies in the outer region, or with
/// `strict` in the inner region.
///
/// Both cases solve one LP maximising a uniform margin `t`; the point is in
/// the outer region when `t >= 0` and in the inner region when `t > 0`.
pub fn in_region(lambda: &[f64], vectors: &[ServiceVector], strict: bool) -> Result<RegionCertificate> {
    if lambda.iter().any(|&l| !l.is_finite() || l < 0.0) {
        return Err(Error::InvalidDemand(
            "demand rates must be finite and non-negative".into(),
        ));
    }
    let n = lambda.len();
    if let Some(v) = vectors.iter().find(|v| v.multiples.len() != n) {
        return Err(Error::InvalidDemand(format!(
            "demand has {n} entries, vector {} has {}",
            v.id,
            v.multiples.len()
        )));
    }
    let rates: Vec<Vec<f64>> = vectors.iter().map(ServiceVector::rates).collect();
    let ones = vec![1.0; n];
    let (t, x) = if n == 0 {
        (1.0, vec![0.0; rates.len()])
    } else {
        margin_lp(&rates, n, &ones, lambda)?
    };
    let member = if strict { t > EPS_FEAS } else { t >= -EPS_FEAS };
    let violated_pair = if member {
        None
    } else {
        binding_pairs(&rates, &x, &ones, t, lambda).into_iter().next()
    };
    let weights = if !strict && member && lambda.iter().all(|&l| l == 0.0) {
        vec![0.0; rates.len()]
    } else {
        x
    };
    Ok(RegionCertificate {
        member,
        strict,
        weights,
        margin: t,
        violated_pair,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleResult {
    /// Largest `theta` with `theta * direction` in the outer region.
    pub theta: f64,
    pub weights: Vec<f64>,
    /// Pairs whose coverage constraint is tight at the optimum.
    pub binding_pairs: Vec<PairId>,
}

/// Computes `sup { theta : theta * direction in D }` by linear programming.
pub fn max_uniform_scale(direction: &[f64], vectors: &[ServiceVector]) -> Result<ScaleResult> {
    if direction.iter().any(|&d| !d.is_finite() || d < 0.0) {
        return Err(Error::InvalidDemand(
            "direction entries must be finite and non-negative".into(),
        ));
    }
    if direction.iter().all(|&d| d == 0.0) {
        return Err(Error::InvalidDemand("direction must be non-zero".into()));
    }
    let n = direction.len();
    if vectors.is_empty() {
        return Ok(ScaleResult {
            theta: 0.0,
            weights: Vec::new(),
            binding_pairs: Vec::new(),
        });
    }
    let rates: Vec<Vec<f64>> = vectors.iter().map(ServiceVector::rates).collect();
    if let Some(v) = rates.iter().find(|v| v.len() != n) {
        return Err(Error::InvalidDemand(format!(
            "direction has {n} entries, vectors have {}",
            v.len()
        )));
    }
    let zeros = vec![0.0; n];
    let (theta, x) = margin_lp(&rates, n, direction, &zeros)?;
    let theta = theta.max(0.0);
    let binding_pairs = binding_pairs(&rates, &x, direction, theta, &zeros);
    Ok(ScaleResult {
        theta,
        weights: x,
        binding_pairs,
    })
}

/// A vector entry whose pair lacks a matching opposite-direction service.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingCompanion {
    pub vector_id: usize,
    pub pair: PairId,
    /// The opposite pair, when it is declared at all.
    pub opposite: Option<PairId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SymmetryReport {
    pub checked: usize,
    pub missing: Vec<MissingCompanion>,
}

impl SymmetryReport {
    pub fn satisfied(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Checks, for every vector and every served pair `p`, that some vector
/// serves both `p` and its opposite pair at the same rate.
pub fn has_symmetric_companion(net: &NetworkSpec, vectors: &[ServiceVector]) -> Result<SymmetryReport> {
    let mut report = SymmetryReport::default();
    for v in vectors {
        for p in v.support() {
            report.checked += 1;
            let m = v.multiples[p.0];
            let opposite = net.opposite(p)?;
            let found =
                opposite.is_some_and(|q| vectors.iter().any(|w| w.multiples[p.0] == m && w.multiples[q.0] == m));
            if !found {
                report.missing.push(MissingCompanion {
                    vector_id: v.id,
                    pair: p,
                    opposite,
                });
            }
        }
    }
    Ok(report)
}

/// Membership of every point of a two-pair grid; rows are `(lambda, certificate)`.
pub fn sample_grid(
    num_pairs: usize,
    axes: (PairId, PairId),
    values: &[f64],
    vectors: &[ServiceVector],
    strict: bool,
) -> Result<Vec<(Vec<f64>, RegionCertificate)>> {
    let mut out = Vec::with_capacity(values.len() * values.len());
    for &a in values {
        for &b in values {
            let mut lambda = vec![0.0; num_pairs];
            lambda[axes.0 .0] = a;
            lambda[axes.1 .0] += b;
            let cert = in_region(&lambda, vectors, strict)?;
            out.push((lambda, cert));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_slot_system;
    use crate::presets;
    use crate::vectors::{enumerate_service_vectors, EnumerateOptions};

    fn vector(id: usize, multiples: Vec<u32>) -> ServiceVector {
        let offsets = multiples.iter().map(|&m| (0..m).collect()).collect();
        ServiceVector {
            id,
            multiples,
            offsets,
            k_tau: 10,
        }
    }

    #[test]
    fn zero_demand_is_inside_with_zero_weights() {
        let vs = vec![vector(0, vec![1, 0]), vector(1, vec![0, 1])];
        let c = in_region(&[0.0, 0.0], &vs, false).unwrap();
        assert!(c.member);
        assert_eq!(c.weights, vec![0.0, 0.0]);
    }

    #[test]
    fn single_vector_boundary_is_outer_not_inner() {
        let vs = vec![vector(0, vec![1, 1])];
        let outer = in_region(&[0.1, 0.1], &vs, false).unwrap();
        assert!(outer.member);
        assert!((outer.weights[0] - 1.0).abs() < 1e-9);
        let inner = in_region(&[0.1, 0.1], &vs, true).unwrap();
        assert!(!inner.member);
    }

    #[test]
    fn out_of_region_names_a_binding_pair() {
        let vs = vec![vector(0, vec![1, 0]), vector(1, vec![0, 2])];
        let c = in_region(&[0.08, 0.1], &vs, false).unwrap();
        // 0.08 needs x0 = 0.8, 0.1 needs x1 = 0.5
        assert!(!c.member);
        assert!(c.violated_pair.is_some());
    }

    #[test]
    fn single_pair_direction_scale() {
        let vs = vec![vector(0, vec![1, 0]), vector(1, vec![0, 3])];
        let s = max_uniform_scale(&[1.0, 0.0], &vs).unwrap();
        assert!((s.theta - 0.1).abs() < 1e-9);
        assert_eq!(s.binding_pairs, vec![PairId(0)]);
    }

    #[test]
    fn empty_set_and_zero_direction() {
        assert_eq!(max_uniform_scale(&[1.0], &[]).unwrap().theta, 0.0);
        assert!(max_uniform_scale(&[0.0, 0.0], &[vector(0, vec![1, 1])]).is_err());
    }

    #[test]
    fn unsupported_direction_scales_to_zero() {
        let vs = vec![vector(0, vec![1, 0])];
        assert_eq!(max_uniform_scale(&[0.0, 1.0], &vs).unwrap().theta, 0.0);
    }

    #[test]
    fn example_one_symmetry_report() {
        let net = presets::example1_network();
        let slots = build_slot_system(&net);
        let set = enumerate_service_vectors(&net, &slots, &EnumerateOptions::default());
        let report = has_symmetric_companion(&net, &set.vectors).unwrap();
        assert_eq!(
            report.checked,
            set.vectors.iter().map(|v| v.support().count()).sum::<usize>()
        );
        // (1,4) and (2,3) have no opposite pair in this network
        let p14 = net.find_pair("1", "4").unwrap();
        assert!(report.missing.iter().any(|m| m.pair == p14 && m.opposite.is_none()));
    }
}
