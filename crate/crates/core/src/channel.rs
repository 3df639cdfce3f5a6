//! One frame of the slotted collision channel.
//!
//! In each slot every node independently decides to transmit; a slot is a
//! success for a node iff it is the only transmitter. Ages restart from zero
//! at every frame boundary, grow by one per slot and drop to zero on success.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{success_probability, FrameObservation, NodeParams};
use crate::stream::FrameStreams;

/// Who may transmit in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Access {
    /// Every node in every slot.
    #[default]
    Contention,
    /// Slot `i` (1-based) belongs to node `(i - 1) mod N` alone.
    RoundRobin,
}

impl Access {
    fn allotted(self, slot: usize, node: usize, roster: usize) -> bool {
        match self {
            Access::Contention => true,
            Access::RoundRobin => (slot - 1) % roster == node,
        }
    }
}

/// What happened in one slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotOutcome<'a> {
    /// 1-based slot index within the frame.
    pub slot: usize,
    pub transmitted: &'a [bool],
    pub sole_transmitter: Option<usize>,
}

impl SlotOutcome<'_> {
    pub fn transmitters(&self) -> usize {
        self.transmitted.iter().filter(|&&t| t).count()
    }
}

/// Per-node age, in slots since the last success in the current frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeState {
    ages: Vec<u64>,
}

impl AgeState {
    pub fn new(nodes: usize) -> Self {
        Self {
            ages: vec![0; nodes],
        }
    }

    pub fn ages(&self) -> &[u64] {
        &self.ages
    }

    pub fn advance(&mut self, sole_transmitter: Option<usize>) {
        for (node, age) in self.ages.iter_mut().enumerate() {
            if sole_transmitter == Some(node) {
                *age = 0;
            } else {
                *age += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSummary {
    pub observations: Vec<FrameObservation>,
    pub collision_slots: u64,
}

/// Simulates one contention frame and returns each node's statistics.
///
/// Entries of `profile` may be anywhere in `[0, 1]`; the `p_min` floor is the
/// learning rule's concern, not the channel's.
pub fn simulate_frame(
    profile: &[f64],
    roster: &[NodeParams],
    frame_length: usize,
    streams: FrameStreams,
) -> Result<Vec<FrameObservation>> {
    simulate_frame_with(
        profile,
        roster,
        frame_length,
        Access::Contention,
        streams,
        |_, _| {},
    )
    .map(|s| s.observations)
}

/// Full-control variant of [`simulate_frame`]: chooses the access rule and
/// hands every slot outcome, with the ages after that slot, to `observer`.
pub fn simulate_frame_with<F>(
    profile: &[f64],
    roster: &[NodeParams],
    frame_length: usize,
    access: Access,
    streams: FrameStreams,
    mut observer: F,
) -> Result<FrameSummary>
where
    F: FnMut(&SlotOutcome<'_>, &AgeState),
{
    let n = roster.len();
    if n == 0 {
        return Err(Error::EmptyRoster(streams.frame as usize));
    }
    if profile.len() != n {
        return Err(Error::ProfileLength {
            got: profile.len(),
            expected: n,
        });
    }
    if frame_length == 0 {
        return Err(Error::InvalidParameter {
            name: "frame_length",
            reason: "must be at least 1".into(),
        });
    }
    if let Some((index, &value)) = profile
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(*p))
    {
        return Err(Error::InvalidProbability {
            index,
            value,
            domain: "[0, 1]",
        });
    }

    let mut rngs: Vec<_> = (0..n).map(|node| streams.node(node)).collect();
    let mut transmitted = vec![false; n];
    let mut transmissions = vec![0u64; n];
    let mut successes = vec![0u64; n];
    let mut age_sums = vec![0u64; n];
    let mut ages = AgeState::new(n);
    let mut collision_slots = 0u64;

    for slot in 1..=frame_length {
        // All draws first, then adjudicate.
        let mut count = 0usize;
        let mut last = 0usize;
        for node in 0..n {
            let tx = access.allotted(slot, node, n) && rngs[node].gen::<f64>() < profile[node];
            transmitted[node] = tx;
            if tx {
                count += 1;
                last = node;
                transmissions[node] += 1;
            }
        }
        let sole_transmitter = (count == 1).then_some(last);
        if count > 1 {
            collision_slots += 1;
        }
        if let Some(node) = sole_transmitter {
            successes[node] += 1;
        }
        ages.advance(sole_transmitter);
        for (sum, &age) in age_sums.iter_mut().zip(ages.ages()) {
            *sum += age;
        }
        observer(
            &SlotOutcome {
                slot,
                transmitted: &transmitted,
                sole_transmitter,
            },
            &ages,
        );
    }

    let m = frame_length as f64;
    let observations = roster
        .iter()
        .enumerate()
        .map(|(node, params)| FrameObservation {
            avg_cost: params.cost_per_transmission * transmissions[node] as f64 / m,
            avg_age: age_sums[node] as f64 / m,
            successes: successes[node],
            transmissions: transmissions[node],
        })
        .collect();
    Ok(FrameSummary {
        observations,
        collision_slots,
    })
}

/// Large-frame limit of the per-slot average cost.
pub fn expected_cost(p: f64, cost: f64) -> f64 {
    cost * p
}

/// Large-frame limit of the time-averaged age, `(1 - nu) / nu` with `nu` the
/// node's per-slot success probability.
pub fn expected_age(profile: &[f64], node: usize) -> Result<f64> {
    let nu = success_probability(profile, node)?;
    age_from_success_probability(nu)
}

pub(crate) fn age_from_success_probability(nu: f64) -> Result<f64> {
    if nu <= 0.0 {
        return Err(Error::DegenerateProfile(
            "success probability is zero, age is unbounded".into(),
        ));
    }
    Ok((1.0 - nu) / nu)
}

/// Stationary law of the in-frame age chain: `P(age = k) = nu (1 - nu)^k`.
///
/// # Panics
/// If `nu` is outside `(0, 1)`.
pub fn age_stationary_pmf(nu: f64, k: u64) -> f64 {
    assert!(nu > 0.0 && nu < 1.0, "nu must lie in (0, 1), got {nu}");
    nu * (1.0 - nu).powf(k as f64)
}
