//! The local learning rule.
//!
//! At the end of frame `t` node `l` computes
//!
//! ```text
//! v = e^(-rho1 C_av) - 1 / ((1 + age_av) e^(rho2)) - p
//! p <- max(p_min, p + kappa(t) v)
//! ```
//!
//! from nothing but its own frame statistics. Replacing the statistics by
//! their large-frame limits gives the expected dynamics, whose drift is the
//! gradient of the node's virtual utility.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{simulate_frame_with, Access};
use crate::error::{Error, Result};
use crate::game::inverse_b;
use crate::model::{
    ChurnEvent, FrameObservation, FrameRecord, GameConfig, NodeParams, ProbVector, RosterChange,
    Trajectory,
};
use crate::stream::{rng_for, FrameStreams, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `kappa(t) = 1/t`.
    Reciprocal,
    /// Fixed rate; does not decay, so only useful for experiments.
    Constant(f64),
    /// Explicit rates for `t = 1, 2, ...`; the last entry repeats.
    Table(Vec<f64>),
}

/// Learning-rate schedule plus an optional periodic restart of its clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub reinit_period: Option<usize>,
}

impl Schedule {
    pub fn reciprocal() -> Self {
        Self {
            kind: ScheduleKind::Reciprocal,
            reinit_period: None,
        }
    }

    pub fn constant(kappa: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant(kappa),
            reinit_period: None,
        }
    }

    pub fn with_reinit_period(mut self, period: usize) -> Self {
        self.reinit_period = Some(period);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |k: f64| k > 0.0 && k <= 1.0;
        match &self.kind {
            ScheduleKind::Reciprocal => {}
            ScheduleKind::Constant(k) if !in_range(*k) => {
                return Err(Error::InvalidParameter {
                    name: "kappa",
                    reason: format!("constant rate must lie in (0, 1], got {k}"),
                })
            }
            ScheduleKind::Table(rates)
                if rates.is_empty() || !rates.iter().all(|&k| in_range(k)) =>
            {
                return Err(Error::InvalidParameter {
                    name: "kappa",
                    reason: "table must be non-empty with every rate in (0, 1]".into(),
                })
            }
            _ => {}
        }
        if self.reinit_period == Some(0) {
            return Err(Error::InvalidParameter {
                name: "kappa_reinit_period",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Rate at clock value `t >= 1`.
    pub fn kappa(&self, t: u64) -> f64 {
        let t = t.max(1);
        match &self.kind {
            ScheduleKind::Reciprocal => 1.0 / t as f64,
            ScheduleKind::Constant(k) => *k,
            ScheduleKind::Table(rates) => {
                let i = (t as usize - 1).min(rates.len() - 1);
                rates[i]
            }
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self::reciprocal()
    }
}

/// Whether frame statistics come from the channel or from their limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Stochastic,
    Expected,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stochastic" => Ok(Mode::Stochastic),
            "expected" => Ok(Mode::Expected),
            other => Err(format!(
                "unknown mode `{other}` (expected `stochastic` or `expected`)"
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Stochastic => "stochastic",
            Mode::Expected => "expected",
        })
    }
}

/// The per-frame stochastic subgradient `v`.
pub fn subgradient(obs: &FrameObservation, p: f64, params: &NodeParams) -> f64 {
    (-params.rho1 * obs.avg_cost).exp() - params.age_weight() / (1.0 + obs.avg_age) - p
}

/// `max(p_min, p + kappa v)`.
pub fn learning_update(p: f64, v: f64, kappa: f64, p_min: f64) -> f64 {
    (p + kappa * v).max(p_min)
}

/// Drift of the expected dynamics, `e^(-alpha p) - p/b - p`.
pub fn expected_drift(profile: &[f64], node: usize, params: &NodeParams) -> Result<f64> {
    if node >= profile.len() {
        return Err(Error::NodeIndex {
            index: node,
            len: profile.len(),
        });
    }
    let p = profile[node];
    Ok((-params.alpha * p).exp() - p * inverse_b(profile, node, params) - p)
}

/// A learning run advanced one frame at a time.
#[derive(Debug, Clone)]
pub struct LearningRun {
    config: GameConfig,
    mode: Mode,
    access: Access,
    roster: Vec<NodeParams>,
    profile: Vec<f64>,
    events: Vec<ChurnEvent>,
    next_event: usize,
    /// Next frame to simulate (1-based).
    frame: usize,
    /// Learning-rate clock.
    clock: u64,
}

impl LearningRun {
    pub fn new(config: &GameConfig, mode: Mode) -> Result<Self> {
        Self::with_access(config, mode, Access::Contention)
    }

    pub(crate) fn with_access(config: &GameConfig, mode: Mode, access: Access) -> Result<Self> {
        config.validate()?;
        let roster = config.nodes.clone();
        let profile = match &config.initial_probabilities {
            Some(p) => p.clone(),
            None => roster
                .iter()
                .enumerate()
                .map(|(node, params)| initial_probability(config.seed, 0, node, params))
                .collect(),
        };
        let mut events = config.churn_events.clone();
        events.sort_by_key(|e| e.frame);
        Ok(Self {
            config: config.clone(),
            mode,
            access,
            roster,
            profile,
            events,
            next_event: 0,
            frame: 1,
            clock: 1,
        })
    }

    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    pub fn roster(&self) -> &[NodeParams] {
        &self.roster
    }

    pub fn next_frame(&self) -> usize {
        self.frame
    }

    fn apply_churn(&mut self) -> Result<()> {
        let mut changed = false;
        while let Some(event) = self.events.get(self.next_event) {
            if event.frame != self.frame {
                break;
            }
            match &event.change {
                RosterChange::Join(nodes) => {
                    for params in nodes {
                        let node = self.roster.len();
                        self.profile.push(initial_probability(
                            self.config.seed,
                            self.frame as u64,
                            node,
                            params,
                        ));
                        self.roster.push(*params);
                    }
                }
                RosterChange::Leave(count) => {
                    let keep = self.roster.len().saturating_sub(*count);
                    self.roster.truncate(keep);
                    self.profile.truncate(keep);
                }
            }
            self.next_event += 1;
            changed = true;
        }
        if self.roster.is_empty() {
            return Err(Error::EmptyRoster(self.frame));
        }
        if changed && self.config.reinit_kappa_on_churn {
            self.clock = 1;
        }
        Ok(())
    }

    /// Plays one frame and applies the update.
    pub fn step(&mut self) -> Result<FrameRecord> {
        self.apply_churn()?;
        let kappa = self.config.schedule.kappa(self.clock);
        let (drifts, observations, collision_slots) = match self.mode {
            Mode::Stochastic => {
                let summary = simulate_frame_with(
                    &self.profile,
                    &self.roster,
                    self.config.frame_length,
                    self.access,
                    FrameStreams::new(self.config.seed, self.frame as u64),
                    |_, _| {},
                )?;
                let drifts = summary
                    .observations
                    .iter()
                    .zip(&self.profile)
                    .zip(&self.roster)
                    .map(|((obs, &p), params)| subgradient(obs, p, params))
                    .collect();
                (drifts, summary.observations, summary.collision_slots)
            }
            Mode::Expected => {
                let drifts = (0..self.roster.len())
                    .map(|node| expected_drift(&self.profile, node, &self.roster[node]))
                    .collect::<Result<Vec<_>>>()?;
                (drifts, Vec::new(), 0)
            }
        };
        let next: Vec<f64> = self
            .profile
            .iter()
            .zip(&drifts)
            .zip(&self.roster)
            .map(|((&p, &v), params)| learning_update(p, v, kappa, params.p_min))
            .collect();
        let record = FrameRecord {
            frame: self.frame,
            roster_size: self.roster.len(),
            kappa,
            probabilities: ProbVector::new(std::mem::replace(&mut self.profile, next))?,
            observations,
            collision_slots,
        };
        self.frame += 1;
        self.clock += 1;
        if let Some(period) = self.config.schedule.reinit_period {
            if self.clock > period as u64 {
                self.clock = 1;
            }
        }
        Ok(record)
    }

    pub fn run(mut self, frames: usize) -> Result<Trajectory> {
        let records = (0..frames)
            .map(|_| self.step())
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            records,
            final_probabilities: ProbVector::new(self.profile)?,
        })
    }
}

/// Uniform draw from `[p_min, 1)` for the node at `position` first seen in
/// `frame`.
fn initial_probability(seed: u64, frame: u64, position: usize, params: &NodeParams) -> f64 {
    rng_for(seed, Purpose::Initialization, frame, position as u64).gen_range(params.p_min..1.0)
}

/// Runs the learning rule on the contention channel for `frames` frames.
pub fn run_learning(config: &GameConfig, frames: usize, mode: Mode) -> Result<Trajectory> {
    LearningRun::new(config, mode)?.run(frames)
}
