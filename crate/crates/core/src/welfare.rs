//! Social utility, the social optimum and the price of anarchy.
//!
//! `U_sys(P) = sum_l U_l(p_l; P_-l)` over the game's own action sets
//! `[p_min, 1]^N`. `U_sys` is strictly concave along every coordinate, so a
//! coordinate sweep can maximize each slice exactly; it is not jointly concave
//! in general, hence the multi-start.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{inverse_b, solve_ne, utility};
use crate::model::{others_silent_except, GameConfig, NodeParams, ProbVector};
use crate::roots::bisect_decreasing;
use crate::stream::{rng_for, Purpose};

/// Sweep-to-sweep change at which coordinate ascent stops.
pub const SWEEP_TOLERANCE: f64 = 1e-10;
/// Equilibrium tolerance used for the price of anarchy.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100_000;
const RANDOM_STARTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareResult {
    pub p_opt: ProbVector,
    pub p_ne: ProbVector,
    pub u_opt: f64,
    pub u_ne: f64,
    /// `u_opt / u_ne`.
    pub poa: f64,
}

fn check(profile: &[f64], roster: &[NodeParams]) -> Result<()> {
    if profile.len() != roster.len() {
        return Err(Error::ProfileLength {
            got: profile.len(),
            expected: roster.len(),
        });
    }
    Ok(())
}

pub fn system_utility(profile: &[f64], roster: &[NodeParams]) -> Result<f64> {
    check(profile, roster)?;
    Ok(roster
        .iter()
        .enumerate()
        .map(|(node, params)| {
            let inv_b = inverse_b(profile, node, params);
            utility(profile[node], params.alpha, 1.0 / inv_b)
        })
        .sum())
}

/// What node `j`'s transmissions cost everybody else at the margin:
/// `sum_{l != j} (p_l^2 / 2) e^(-rho2_l) prod_{k != l, j} (1 - p_k)`.
pub fn externality(profile: &[f64], j: usize, roster: &[NodeParams]) -> Result<f64> {
    check(profile, roster)?;
    if j >= profile.len() {
        return Err(Error::NodeIndex {
            index: j,
            len: profile.len(),
        });
    }
    Ok(roster
        .iter()
        .enumerate()
        .filter(|&(l, _)| l != j)
        .map(|(l, params)| {
            0.5 * profile[l]
                * profile[l]
                * params.age_weight()
                * others_silent_except(profile, l, j)
        })
        .sum())
}

/// `dU_sys / dp_j`.
pub fn system_gradient(profile: &[f64], j: usize, roster: &[NodeParams]) -> Result<f64> {
    let ext = externality(profile, j, roster)?;
    let params = &roster[j];
    let p = profile[j];
    Ok((-params.alpha * p).exp() - p * (1.0 + inverse_b(profile, j, params)) + ext)
}

/// Exact maximizer of `U_sys` in coordinate `j` over `[p_min, 1]`.
fn coordinate_argmax(profile: &[f64], j: usize, roster: &[NodeParams]) -> Result<f64> {
    let params = &roster[j];
    let inv_b = inverse_b(profile, j, params);
    let ext = externality(profile, j, roster)?;
    let slope = |x: f64| (-params.alpha * x).exp() - x * (1.0 + inv_b) + ext;
    if slope(1.0) >= 0.0 {
        return Ok(1.0);
    }
    if slope(params.p_min) <= 0.0 {
        return Ok(params.p_min);
    }
    bisect_decreasing(slope, params.p_min, 1.0, 1e-13)
}

/// Cyclic coordinate ascent from `start`.
pub fn coordinate_ascent(start: &[f64], roster: &[NodeParams], tol: f64) -> Result<Vec<f64>> {
    check(start, roster)?;
    let mut profile = start.to_vec();
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        change = 0.0;
        for j in 0..profile.len() {
            let next = coordinate_argmax(&profile, j, roster)?;
            change = f64::max(change, (next - profile[j]).abs());
            profile[j] = next;
        }
        if change < tol {
            return Ok(profile);
        }
    }
    Err(Error::NoConvergence {
        what: "coordinate ascent",
        iterations: MAX_SWEEPS,
        last_step: change,
    })
}

/// Social optimum over `[p_min, 1]^N`: coordinate ascent from the
/// equilibrium and from five seeded random starts, best result kept.
pub fn optimize_system(config: &GameConfig, tol: f64) -> Result<ProbVector> {
    let ne = solve_ne(config, EQUILIBRIUM_TOLERANCE)?;
    optimize_from(config, &ne.probabilities, tol).map(|(p, _)| p)
}

fn optimize_from(config: &GameConfig, ne: &[f64], tol: f64) -> Result<(ProbVector, f64)> {
    let roster = &config.nodes;
    let mut starts = vec![ne.to_vec()];
    for start in 0..RANDOM_STARTS {
        starts.push(
            roster
                .iter()
                .enumerate()
                .map(|(node, params)| {
                    rng_for(config.seed, Purpose::Welfare, start as u64, node as u64)
                        .gen_range(params.p_min..=1.0)
                })
                .collect(),
        );
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in starts {
        let candidate = coordinate_ascent(&start, roster, tol)?;
        let value = system_utility(&candidate, roster)?;
        if best.as_ref().is_none_or(|(_, v)| value > *v) {
            best = Some((candidate, value));
        }
    }
    let (profile, value) = best.expect("at least one start");
    Ok((ProbVector::new(profile)?, value))
}

/// `U_sys(P_opt) / U_sys(P_ne)`.
pub fn price_of_anarchy(config: &GameConfig) -> Result<WelfareResult> {
    let ne = solve_ne(config, EQUILIBRIUM_TOLERANCE)?;
    let u_ne = system_utility(&ne.probabilities, &config.nodes)?;
    let (p_opt, u_opt) = optimize_from(config, &ne.probabilities, SWEEP_TOLERANCE)?;
    Ok(WelfareResult {
        p_opt,
        p_ne: ne.probabilities,
        u_opt,
        u_ne,
        poa: u_opt / u_ne,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{best_response, utility_gradient};
    use crate::model::b_factor;

    fn config(n: usize) -> GameConfig {
        GameConfig::homogeneous(n, 1.0, 0.05).unwrap()
    }

    #[test]
    fn single_node_reduces_to_own_utility() {
        let c = config(1);
        let p = &c.nodes[0];
        let b = b_factor(&[0.4], 0, p.rho2).unwrap();
        assert_eq!(
            system_utility(&[0.4], &c.nodes).unwrap(),
            utility(0.4, p.alpha, b)
        );
        assert_eq!(
            system_gradient(&[0.4], 0, &c.nodes).unwrap(),
            utility_gradient(0.4, p.alpha, b)
        );
        let opt = optimize_system(&c, SWEEP_TOLERANCE).unwrap();
        let br = best_response(&[], p).unwrap();
        assert!((opt[0] - br).abs() < 1e-10);
        let w = price_of_anarchy(&c).unwrap();
        assert!((w.poa - 1.0).abs() < 1e-9);
    }

    #[test]
    fn permutation_invariance() {
        let c = config(3);
        let a = system_utility(&[0.2, 0.5, 0.7], &c.nodes).unwrap();
        let b = system_utility(&[0.7, 0.2, 0.5], &c.nodes).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn optimum_dominates_random_profiles() {
        let c = config(4);
        let opt = optimize_system(&c, SWEEP_TOLERANCE).unwrap();
        let u_opt = system_utility(&opt, &c.nodes).unwrap();
        let mut rng = rng_for(99, Purpose::Welfare, 1000, 0);
        for _ in 0..1000 {
            let p: Vec<f64> = (0..4).map(|_| rng.gen_range(0.05..=1.0)).collect();
            assert!(system_utility(&p, &c.nodes).unwrap() <= u_opt + 1e-12);
        }
    }

    #[test]
    fn externality_positive_at_equilibrium() {
        for n in 2..8 {
            let c = config(n);
            let ne = solve_ne(&c, 1e-12).unwrap();
            for j in 0..n {
                let ext = externality(&ne.probabilities, j, &c.nodes).unwrap();
                let grad = system_gradient(&ne.probabilities, j, &c.nodes).unwrap();
                assert!(ext > 0.0);
                assert!((grad - ext).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let c = config(2);
        assert!(system_utility(&[0.3], &c.nodes).is_err());
        assert!(externality(&[0.3, 0.3], 2, &c.nodes).is_err());
    }
}
