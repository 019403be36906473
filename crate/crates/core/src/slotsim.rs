//! Slot-level Monte Carlo simulation of saturated DCF stations.
//!
//! Every station always has a packet. In each logical slot the stations
//! whose counter is zero transmit: one transmitter is a success, two or more
//! collide. A successful station restarts at stage 0, colliders move to
//! `min(stage + 1, m)`, and both redraw uniformly over the window of their
//! new stage. What the other stations do during a busy slot is set by
//! [`BackoffRule`]; after an idle slot every counter counts down by one.
//!
//! Busy slots are a single step on the slot axis; their real durations
//! (`T_s`, `T_c`) are only applied when reporting throughput.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::markov::ChainGeometry;
use crate::metrics::FrameTimes;
use crate::params::FrameDurations;
use crate::scenario::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StationState {
    pub stage: u32,
    pub counter: u64,
}

fn draw<R: Rng + ?Sized>(g: &ChainGeometry, stage: u32, rng: &mut R) -> StationState {
    let w = g.window_size(stage).expect("stage within the chain");
    StationState {
        stage,
        counter: rng.random_range(0..w),
    }
}

/// `n` stations at stage 0 with counters uniform on `[0, W_0 - 1]`.
pub fn init_stations<R: Rng + ?Sized>(n: u32, g: &ChainGeometry, rng: &mut R) -> Vec<StationState> {
    (0..n).map(|_| draw(g, 0, rng)).collect()
}

/// Counter behaviour of non-transmitting stations during a busy slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackoffRule {
    /// Counters hold until the channel is idle again (802.11 freeze).
    Freeze,
    /// Counters step down once per logical slot, busy or idle. Every slot is
    /// one step of the classic backoff chain.
    #[default]
    CountThrough,
}

impl BackoffRule {
    pub fn as_str(self) -> &'static str {
        match self {
            BackoffRule::Freeze => "freeze",
            BackoffRule::CountThrough => "count_through",
        }
    }
}

impl std::str::FromStr for BackoffRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "freeze" => Ok(BackoffRule::Freeze),
            "count_through" => Ok(BackoffRule::CountThrough),
            _ => Err(format!(
                "unknown backoff rule `{s}` (expected freeze or count_through)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    Success,
    Collision,
}

/// Advance one slot. The indices of this slot's transmitters are left in
/// `transmitters`.
pub fn step_slot<R: Rng + ?Sized>(
    states: &mut [StationState],
    g: &ChainGeometry,
    rule: BackoffRule,
    rng: &mut R,
    transmitters: &mut Vec<usize>,
) -> SlotOutcome {
    transmitters.clear();
    transmitters.extend(
        states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.counter == 0)
            .map(|(i, _)| i),
    );
    let outcome = match transmitters.len() {
        0 => {
            states.iter_mut().for_each(|s| s.counter -= 1);
            return SlotOutcome::Idle;
        }
        1 => SlotOutcome::Success,
        _ => SlotOutcome::Collision,
    };
    if rule == BackoffRule::CountThrough {
        // Transmitters sit at zero and are redrawn below.
        states
            .iter_mut()
            .filter(|s| s.counter > 0)
            .for_each(|s| s.counter -= 1);
    }
    let m = g.max_stage();
    for &i in transmitters.iter() {
        let stage = match outcome {
            SlotOutcome::Success => 0,
            _ => (states[i].stage + 1).min(m),
        };
        states[i] = draw(g, stage, rng);
    }
    outcome
}

/// Real-time weights for reporting throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotWeights {
    pub idle_us: f64,
    pub success_us: f64,
    pub collision_us: f64,
    pub payload_us: f64,
}

impl SlotWeights {
    pub fn new(durations: &FrameDurations, frames: &FrameTimes) -> Self {
        Self {
            idle_us: durations.t_slot_us,
            success_us: frames.t_s_us,
            collision_us: frames.t_c_us,
            payload_us: durations.payload_us,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStats {
    pub n: u32,
    pub rule: BackoffRule,
    /// Slots aggregated (warm-up excluded).
    pub slots: u64,
    pub warmup_slots: u64,
    pub tx_slots: u64,
    pub success_slots: u64,
    pub collision_slots: u64,
    pub idle_slots: u64,
    /// Transmission attempts summed over stations.
    pub attempts: u64,
    /// Slots in which a station either counted down or transmitted, summed
    /// over stations. Frozen slots are not opportunities.
    pub opportunities: u64,
    /// `attempts / opportunities`.
    pub tau_hat: f64,
    /// `success_slots / tx_slots` (1 when nothing was sent).
    pub p_su_hat: f64,
    /// Slots in which station 0 collided with exactly one other station,
    /// per station-0 opportunity.
    pub p_col_tagged_hat: f64,
    /// Payload airtime over total airtime.
    pub payload_time_fraction: f64,
}

/// Sequential simulator over one RNG stream.
pub struct Simulator {
    geometry: ChainGeometry,
    rule: BackoffRule,
    states: Vec<StationState>,
    rng: ChaCha8Rng,
    transmitters: Vec<usize>,
}

impl Simulator {
    pub fn new(n: u32, geometry: ChainGeometry, rule: BackoffRule, seed: u64) -> Self {
        let mut rng = stream_rng(seed, u64::from(n));
        let states = init_stations(n, &geometry, &mut rng);
        Self {
            geometry,
            rule,
            states,
            rng,
            transmitters: Vec::new(),
        }
    }

    pub fn states(&self) -> &[StationState] {
        &self.states
    }

    pub fn step(&mut self) -> SlotOutcome {
        step_slot(
            &mut self.states,
            &self.geometry,
            self.rule,
            &mut self.rng,
            &mut self.transmitters,
        )
    }

    /// Stations that transmitted in the last slot.
    pub fn last_transmitters(&self) -> &[usize] {
        &self.transmitters
    }
}

/// Number of warm-up slots run (and discarded) before `slots` measured ones.
pub fn warmup_for(slots: u64) -> u64 {
    slots / 100
}

/// Simulate `n` stations for `slots` measured slots after a warm-up of
/// `slots / 100` discarded slots.
pub fn run(
    n: u32,
    slots: u64,
    g: &ChainGeometry,
    rule: BackoffRule,
    weights: &SlotWeights,
    seed: u64,
) -> SimStats {
    assert!(n >= 1, "at least one station is required");
    let mut sim = Simulator::new(n, *g, rule, seed);
    let warmup_slots = warmup_for(slots);
    for _ in 0..warmup_slots {
        sim.step();
    }

    let (mut success, mut collision, mut idle) = (0u64, 0u64, 0u64);
    let (mut attempts, mut tagged_attempts, mut tagged_pair_collisions) = (0u64, 0u64, 0u64);
    for _ in 0..slots {
        let outcome = sim.step();
        let tx = sim.last_transmitters();
        attempts += tx.len() as u64;
        if tx.first() == Some(&0) {
            tagged_attempts += 1;
            if tx.len() == 2 {
                tagged_pair_collisions += 1;
            }
        }
        match outcome {
            SlotOutcome::Idle => idle += 1,
            SlotOutcome::Success => success += 1,
            SlotOutcome::Collision => collision += 1,
        }
    }

    let tx_slots = success + collision;
    let (opportunities, tagged_opportunities) = match rule {
        BackoffRule::Freeze => (idle * u64::from(n) + attempts, idle + tagged_attempts),
        BackoffRule::CountThrough => (slots * u64::from(n), slots),
    };
    let airtime = idle as f64 * weights.idle_us
        + success as f64 * weights.success_us
        + collision as f64 * weights.collision_us;
    SimStats {
        n,
        rule,
        slots,
        warmup_slots,
        tx_slots,
        success_slots: success,
        collision_slots: collision,
        idle_slots: idle,
        attempts,
        opportunities,
        tau_hat: ratio(attempts, opportunities, 0.0),
        p_su_hat: ratio(success, tx_slots, 1.0),
        p_col_tagged_hat: ratio(tagged_pair_collisions, tagged_opportunities, 0.0),
        payload_time_fraction: if airtime > 0.0 {
            success as f64 * weights.payload_us / airtime
        } else {
            0.0
        },
    }
}

fn ratio(num: u64, den: u64, empty: f64) -> f64 {
    if den == 0 {
        empty
    } else {
        num as f64 / den as f64
    }
}
