//! Domain types shared by every other module, plus the parameter-selection
//! rule that makes the best-response map a contraction for any roster size.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::Schedule;

/// Additive margin turning the strict lower bound on `rho2` into a concrete
/// value.
pub const RHO2_MARGIN: f64 = 0.01;

/// Per-node constants of the learning rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeParams {
    pub cost_per_transmission: f64,
    /// Weight of the cost term.
    pub rho1: f64,
    /// Weight of the age term.
    pub rho2: f64,
    /// Floor on the transmission probability.
    pub p_min: f64,
    /// `cost_per_transmission * rho1`.
    pub alpha: f64,
}

impl NodeParams {
    pub fn new(cost_per_transmission: f64, rho1: f64, rho2: f64, p_min: f64) -> Result<Self> {
        if !(cost_per_transmission.is_finite() && cost_per_transmission > 0.0) {
            return Err(Error::NonPositiveCost(cost_per_transmission));
        }
        positive("rho1", rho1)?;
        positive("rho2", rho2)?;
        if !(p_min > 0.0 && p_min < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_min",
                reason: format!("must lie in (0, 1), got {p_min}"),
            });
        }
        Ok(Self {
            cost_per_transmission,
            rho1,
            rho2,
            p_min,
            alpha: cost_per_transmission * rho1,
        })
    }

    /// `e^(-rho2)`, the reciprocal of the roster-independent part of `b`.
    pub(crate) fn age_weight(&self) -> f64 {
        (-self.rho2).exp()
    }
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

/// Maximizer over real `n` of `(n - 1)(1 - p_global_min)^(n - 2)`.
pub fn critical_roster_size(p_global_min: f64) -> f64 {
    1.0 - 1.0 / (1.0 - p_global_min).ln()
}

/// Smallest `rho2` (exclusive) that keeps the contraction bound below one for
/// every roster size, before [`RHO2_MARGIN`] is added.
pub fn rho2_threshold(p_global_min: f64, alpha: f64) -> f64 {
    let n_star = critical_roster_size(p_global_min);
    let peak = (n_star - 1.0) * (1.0 - p_global_min).powf(n_star - 2.0);
    (peak / (alpha + 1.0)).ln().max(0.0)
}

/// Chooses `p_min`, `rho1` and `rho2` for a node from the global probability
/// floor alone, so that a unique equilibrium is guaranteed without knowing the
/// number of nodes.
///
/// `rho1` takes its largest admissible value, which makes `alpha` (and hence
/// the probability trajectory) independent of the node's cost.
pub fn derive_params(cost: f64, p_global_min: f64) -> Result<NodeParams> {
    if !(p_global_min > 0.0 && p_global_min < 0.5) {
        return Err(Error::PGlobalMinOutOfRange(p_global_min));
    }
    if !(cost.is_finite() && cost > 0.0) {
        return Err(Error::NonPositiveCost(cost));
    }
    let alpha = -(2.0 * p_global_min).ln();
    let rho1 = alpha / cost;
    let rho2 = rho2_threshold(p_global_min, alpha) + RHO2_MARGIN;
    NodeParams::new(cost, rho1, rho2, p_global_min)
}

/// `prod_{k != node} (1 - p_k)`: the chance that nobody else transmits.
pub(crate) fn others_silent(probs: &[f64], node: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != node)
        .map(|(_, p)| 1.0 - p)
        .product()
}

/// `prod_{k != a, b} (1 - p_k)`.
pub(crate) fn others_silent_except(probs: &[f64], a: usize, b: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != a && k != b)
        .map(|(_, p)| 1.0 - p)
        .product()
}

fn check_index(probs: &[f64], node: usize) -> Result<()> {
    if node < probs.len() {
        Ok(())
    } else {
        Err(Error::NodeIndex {
            index: node,
            len: probs.len(),
        })
    }
}

/// Per-slot probability that `node` is the sole transmitter.
pub fn success_probability(probs: &[f64], node: usize) -> Result<f64> {
    check_index(probs, node)?;
    Ok(probs[node] * others_silent(probs, node))
}

/// `e^(rho2) / prod_{k != node} (1 - p_k)`.
pub fn b_factor(probs: &[f64], node: usize, rho2: f64) -> Result<f64> {
    check_index(probs, node)?;
    if let Some(k) = probs
        .iter()
        .enumerate()
        .position(|(k, &p)| k != node && p >= 1.0)
    {
        return Err(Error::DegenerateProfile(format!(
            "node {k} transmits with probability 1, so b is unbounded"
        )));
    }
    Ok(rho2.exp() / others_silent(probs, node))
}

/// Transmission probabilities of the active roster, in roster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Accepts any profile with entries in `[0, 1]`. Use
    /// [`ProbVector::check_feasible`] for the stricter `[p_min, 1)` domain.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (index, &value) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidProbability {
                    index,
                    value,
                    domain: "[0, 1]",
                });
            }
        }
        Ok(Self(probs))
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    /// Checks the learning invariant: one entry per node, each in
    /// `[p_min, 1)`.
    pub fn check_feasible(&self, roster: &[NodeParams]) -> Result<()> {
        if self.0.len() != roster.len() {
            return Err(Error::ProfileLength {
                got: self.0.len(),
                expected: roster.len(),
            });
        }
        for (index, (&value, node)) in self.0.iter().zip(roster).enumerate() {
            if !(value >= node.p_min && value < 1.0) {
                return Err(Error::InvalidProbability {
                    index,
                    value,
                    domain: "[p_min, 1)",
                });
            }
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Largest absolute coordinate difference.
    pub fn sup_distance(&self, other: &[f64]) -> f64 {
        sup_distance(&self.0, other)
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// One node's statistics over one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    /// Cost spent per slot.
    pub avg_cost: f64,
    /// Time-averaged age in slots, counted from zero at the frame start.
    pub avg_age: f64,
    /// Slots in which this node was the sole transmitter.
    pub successes: u64,
    /// Slots in which this node transmitted.
    pub transmissions: u64,
}

/// Nodes leaving or joining between frames. Joins append to the roster tail
/// and leaves remove from the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RosterChange {
    Join(Vec<NodeParams>),
    Leave(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnEvent {
    /// 1-based frame before which the change applies.
    pub frame: usize,
    pub change: RosterChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub nodes: Vec<NodeParams>,
    /// Slots per frame.
    pub frame_length: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub churn_events: Vec<ChurnEvent>,
    /// Restart the learning-rate clock whenever the roster changes.
    pub reinit_kappa_on_churn: bool,
    /// Global floor used by the contraction certificate.
    pub p_global_min: f64,
    /// Starting profile; drawn uniformly from `[p_min, 1)` when absent.
    pub initial_probabilities: Option<Vec<f64>>,
}

impl GameConfig {
    /// `n` identical nodes with parameters from [`derive_params`], reciprocal
    /// learning rate and no churn.
    pub fn homogeneous(n: usize, cost: f64, p_global_min: f64) -> Result<Self> {
        let params = derive_params(cost, p_global_min)?;
        let config = Self {
            nodes: vec![params; n],
            frame_length: 10_000,
            schedule: Schedule::reciprocal(),
            seed: 1,
            churn_events: Vec::new(),
            reinit_kappa_on_churn: false,
            p_global_min,
            initial_probabilities: None,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_frame_length(mut self, frame_length: usize) -> Self {
        self.frame_length = frame_length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 {
            return Err(Error::InvalidParameter {
                name: "frame_length",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.p_global_min > 0.0 && self.p_global_min < 1.0) {
            return Err(Error::InvalidParameter {
                name: "p_global_min",
                reason: format!("must lie in (0, 1), got {}", self.p_global_min),
            });
        }
        self.schedule.validate()?;
        if let Some(init) = &self.initial_probabilities {
            ProbVector::new(init.clone())?.check_feasible(&self.nodes)?;
        }
        let mut events: Vec<&ChurnEvent> = self.churn_events.iter().collect();
        events.sort_by_key(|e| e.frame);
        if self.nodes.is_empty() {
            return Err(Error::EmptyRoster(1));
        }
        let mut size = self.nodes.len();
        for event in events {
            if event.frame == 0 {
                return Err(Error::InvalidParameter {
                    name: "churn.frame",
                    reason: "frames are numbered from 1".into(),
                });
            }
            match &event.change {
                RosterChange::Join(nodes) => size += nodes.len(),
                RosterChange::Leave(count) => {
                    if *count >= size {
                        return Err(Error::EmptyRoster(event.frame));
                    }
                    size -= count;
                }
            }
        }
        Ok(())
    }
}

/// Everything recorded about one simulated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// 1-based frame index.
    pub frame: usize,
    pub roster_size: usize,
    /// Learning rate applied at the end of this frame.
    pub kappa: f64,
    /// Profile in force during this frame.
    pub probabilities: ProbVector,
    /// Per-node statistics; empty in expected mode.
    pub observations: Vec<FrameObservation>,
    /// Slots with two or more transmitters.
    pub collision_slots: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<FrameRecord>,
    /// Profile after the last update.
    pub final_probabilities: ProbVector,
}

impl Trajectory {
    pub fn frames(&self) -> usize {
        self.records.len()
    }

    /// Profile in force at 1-based `frame`, or the final profile for
    /// `frame == frames() + 1`.
    pub fn profile_at(&self, frame: usize) -> Option<&ProbVector> {
        if frame == self.records.len() + 1 {
            Some(&self.final_probabilities)
        } else {
            frame
                .checked_sub(1)
                .and_then(|i| self.records.get(i))
                .map(|r| &r.probabilities)
        }
    }
}
