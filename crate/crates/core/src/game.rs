//! The virtual game behind the learning rule.
//!
//! Node `l` behaves as if maximizing
//!
//! ```text
//! U(p) = -e^(-alpha p)/alpha - (p^2/2)(1 + 1/b) + (1 + alpha)/alpha
//! ```
//!
//! over `[p_min, 1]`, where `b = e^(rho2) / prod_{k != l}(1 - p_k)` carries the
//! coupling to the other nodes. `U` is strictly concave, so the best response
//! is the unique root of `e^(-alpha p) = p (1 + 1/b)`, clamped at `p_min`.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    others_silent, others_silent_except, sup_distance, GameConfig, NodeParams, ProbVector,
};
use crate::roots::bisect_decreasing;

/// Absolute tolerance of the scalar best-response root.
pub const ROOT_TOLERANCE: f64 = 1e-12;
/// Left end of the root bracket.
const ROOT_FLOOR: f64 = 1e-12;
/// Cap on best-response iterations in [`solve_ne`].
pub const MAX_ITERATIONS: usize = 10_000;

pub fn utility(p: f64, alpha: f64, b: f64) -> f64 {
    -(-alpha * p).exp() / alpha - 0.5 * p * p * (1.0 + 1.0 / b) + (1.0 + alpha) / alpha
}

/// `dU/dp`, strictly decreasing in `p`.
pub fn utility_gradient(p: f64, alpha: f64, b: f64) -> f64 {
    (-alpha * p).exp() - p * (1.0 + 1.0 / b)
}

/// Inverse of `b` for `node`, finite even when another node sits at `p = 1`.
pub(crate) fn inverse_b(profile: &[f64], node: usize, params: &NodeParams) -> f64 {
    params.age_weight() * others_silent(profile, node)
}

/// Best response of a node with `params` to the other nodes' probabilities
/// `others`.
pub fn best_response(others: &[f64], params: &NodeParams) -> Result<f64> {
    let inv_b = params.age_weight() * others.iter().map(|p| 1.0 - p).product::<f64>();
    best_response_for(params, inv_b)
}

fn best_response_for(params: &NodeParams, inv_b: f64) -> Result<f64> {
    let alpha = params.alpha;
    let root = bisect_decreasing(
        |p| (-alpha * p).exp() - p * (1.0 + inv_b),
        ROOT_FLOOR,
        1.0,
        ROOT_TOLERANCE,
    )?;
    Ok(root.max(params.p_min))
}

/// Best response of every node to the same profile (Jacobi update).
pub fn best_response_map(profile: &[f64], roster: &[NodeParams]) -> Result<ProbVector> {
    check_lengths(profile, roster)?;
    let next = roster
        .iter()
        .enumerate()
        .map(|(node, params)| best_response_for(params, inverse_b(profile, node, params)))
        .collect::<Result<Vec<_>>>()?;
    ProbVector::new(next)
}

fn check_lengths(profile: &[f64], roster: &[NodeParams]) -> Result<()> {
    if profile.len() != roster.len() {
        return Err(Error::ProfileLength {
            got: profile.len(),
            expected: roster.len(),
        });
    }
    Ok(())
}

/// Upper bound on the infinity norm of the best-response Jacobian,
/// `max_l (N-1)(1-p_global_min)^(N-2) / (e^(rho2_l)(alpha_l + 1))`. The map
/// is a contraction whenever this is below one.
pub fn contraction_bound(n: usize, roster: &[NodeParams], p_global_min: f64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let coupling = (n - 1) as f64 * (1.0 - p_global_min).powi(n as i32 - 2);
    roster
        .iter()
        .map(|p| coupling / (p.rho2.exp() * (p.alpha + 1.0)))
        .fold(0.0, f64::max)
}

/// Optimality defect of `profile[node]`: zero at an interior root of the
/// first-order condition or at the floor when the gradient points below it.
pub fn best_response_residual(profile: &[f64], node: usize, params: &NodeParams) -> f64 {
    let p = profile[node];
    let inv_b = inverse_b(profile, node, params);
    let g = (-params.alpha * p).exp() - p * (1.0 + inv_b);
    if p <= params.p_min && g <= 0.0 {
        0.0
    } else {
        g.abs()
    }
}

/// Analytic best-response Jacobian entry `d p_node^br / d p_wrt` at
/// `profile`, valid where the floor is inactive. Zero on the diagonal.
pub fn best_response_sensitivity(
    profile: &[f64],
    node: usize,
    wrt: usize,
    params: &NodeParams,
) -> Result<f64> {
    if node == wrt {
        return Ok(0.0);
    }
    let inv_b = inverse_b(profile, node, params);
    let p = best_response_for(params, inv_b)?;
    Ok(
        params.age_weight() * others_silent_except(profile, node, wrt)
            / ((params.alpha + 1.0 / p) * (1.0 + inv_b)),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub probabilities: ProbVector,
    /// Per-node first-order defect at the returned profile.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub contraction_bound: f64,
}

/// Nash equilibrium of the roster in `config`, from the all-0.5 start.
pub fn solve_ne(config: &GameConfig, tol: f64) -> Result<EquilibriumResult> {
    solve_ne_roster(&config.nodes, config.p_global_min, tol)
}

pub fn solve_ne_roster(
    roster: &[NodeParams],
    p_global_min: f64,
    tol: f64,
) -> Result<EquilibriumResult> {
    let start: Vec<f64> = roster.iter().map(|p| p.p_min.max(0.5)).collect();
    solve_ne_from(roster, p_global_min, &start, tol)
}

/// Iterates the best-response map from `start` until a step moves no
/// coordinate by `tol` or more.
pub fn solve_ne_from(
    roster: &[NodeParams],
    p_global_min: f64,
    start: &[f64],
    tol: f64,
) -> Result<EquilibriumResult> {
    if roster.is_empty() {
        return Err(Error::EmptyRoster(0));
    }
    check_lengths(start, roster)?;
    let bound = contraction_bound(roster.len(), roster, p_global_min);
    if bound >= 1.0 {
        warn!("contraction bound {bound:.4} >= 1; equilibrium uniqueness is not certified");
    }
    let mut current = start.to_vec();
    let mut last_step = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let next = best_response_map(&current, roster)?.into_inner();
        last_step = sup_distance(&next, &current);
        current = next;
        if last_step < tol {
            let residuals = (0..roster.len())
                .map(|node| best_response_residual(&current, node, &roster[node]))
                .collect();
            return Ok(EquilibriumResult {
                probabilities: ProbVector::new(current)?,
                residuals,
                iterations: iteration,
                contraction_bound: bound,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "best-response iteration",
        iterations: MAX_ITERATIONS,
        last_step,
    })
}
