//! Repeated-game engine: memory-K states with public randomization signals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bargaining::Tuning;
use crate::matrix_game::BimatrixGame;

/// Randomness handed to agents. Each seat gets its own stream.
pub type AgentRng = ChaCha8Rng;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid match configuration: {0}")]
    InvalidConfig(String),
    #[error("{agent} (player {seat}) chose action {action} at step {t}, but only {available} exist")]
    ActionOutOfRange {
        agent: String,
        seat: u8,
        t: usize,
        action: usize,
        available: usize,
    },
    #[error("{agent} (player {seat}) reported weight {weight} at step {t}")]
    WeightOutOfRange {
        agent: String,
        seat: u8,
        t: usize,
        weight: f64,
    },
}

/// Both players' last K actions (oldest first) and last K+1 signal bits,
/// the final bit being the current step's signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HistoryState {
    pub a1: Vec<usize>,
    pub a2: Vec<usize>,
    pub y1: Vec<bool>,
    pub y2: Vec<bool>,
}

impl HistoryState {
    pub fn initial(k: usize) -> Self {
        HistoryState {
            a1: vec![0; k],
            a2: vec![0; k],
            y1: vec![false; k + 1],
            y2: vec![false; k + 1],
        }
    }

    pub fn k(&self) -> usize {
        self.a1.len()
    }

    /// The same state seen from player 2's seat.
    pub fn swapped(&self) -> Self {
        HistoryState {
            a1: self.a2.clone(),
            a2: self.a1.clone(),
            y1: self.y2.clone(),
            y2: self.y1.clone(),
        }
    }

    pub fn y1_now(&self) -> bool {
        *self.y1.last().expect("K+1 >= 1 signal bits")
    }

    pub fn y2_now(&self) -> bool {
        *self.y2.last().expect("K+1 >= 1 signal bits")
    }

    pub fn push_signals(&mut self, y1: bool, y2: bool) {
        shift_in(&mut self.y1, y1);
        shift_in(&mut self.y2, y2);
    }

    pub fn push_actions(&mut self, a1: usize, a2: usize) {
        shift_in(&mut self.a1, a1);
        shift_in(&mut self.a2, a2);
    }

    /// Number of distinct states: (n1·n2)^K · 2^(2K+2).
    pub fn count(n1: usize, n2: usize, k: usize) -> usize {
        (n1 * n2).pow(k as u32) << (2 * k + 2)
    }

    /// Dense index in `0..count(n1, n2, K)`.
    pub fn index(&self, n1: usize, n2: usize) -> usize {
        let mut idx = 0usize;
        for (&a, &b) in self.a1.iter().zip(&self.a2) {
            idx = idx * (n1 * n2) + a * n2 + b;
        }
        for &y in self.y1.iter().chain(&self.y2) {
            idx = idx * 2 + y as usize;
        }
        idx
    }

    pub fn from_index(mut idx: usize, n1: usize, n2: usize, k: usize) -> Self {
        let mut s = HistoryState::initial(k);
        for i in (0..k + 1).rev() {
            s.y2[i] = idx % 2 == 1;
            idx /= 2;
        }
        for i in (0..k + 1).rev() {
            s.y1[i] = idx % 2 == 1;
            idx /= 2;
        }
        for i in (0..k).rev() {
            let pair = idx % (n1 * n2);
            idx /= n1 * n2;
            s.a1[i] = pair / n2;
            s.a2[i] = pair % n2;
        }
        s
    }
}

fn shift_in<T: Copy>(v: &mut [T], x: T) {
    if v.is_empty() {
        return;
    }
    v.rotate_left(1);
    *v.last_mut().unwrap() = x;
}

/// One step of play. `t` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub a1: usize,
    pub a2: usize,
    pub y1: bool,
    pub y2: bool,
    pub x: f64,
    pub r1: f64,
    pub r2: f64,
}

impl StepRecord {
    /// The record from player 2's seat.
    pub fn swapped(&self) -> Self {
        StepRecord {
            a1: self.a2,
            a2: self.a1,
            y1: self.y2,
            y2: self.y1,
            r1: self.r2,
            r2: self.r1,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub horizon: usize,
    pub k: usize,
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    pub tuning: Tuning,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            horizon: 20_000,
            k: 1,
            eps: 0.05,
            delta: 0.05,
            seed: 0,
            tuning: Tuning::default(),
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.horizon == 0 {
            return Err(EngineError::InvalidConfig("T must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(EngineError::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(EngineError::InvalidConfig(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(EngineError::InvalidConfig(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn enforce_params(&self) -> crate::bargaining::EnforceParams {
        crate::bargaining::EnforceParams {
            k: self.k,
            eps: self.eps,
        }
    }

    /// Epoch length H = ⌊√T⌋ (at least 1).
    pub fn epoch_len(&self) -> usize {
        ((self.horizon as f64).sqrt().floor() as usize).max(1)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Uniform interface for everything that plays: experts, LAFF, opponents.
///
/// Agents always see the game from their own seat: in `act` and `observe`,
/// index 1 is the agent itself and index 2 its opponent.
pub trait Agent: Send {
    fn name(&self) -> String;

    /// Weight for the public signal at step `t` (0-based), in [0,1].
    fn report_weight(&mut self, t: usize) -> f64;

    fn act(&mut self, state: &HistoryState, t: usize, rng: &mut AgentRng) -> usize;

    fn observe(&mut self, step: &StepRecord);

    /// Active expert, for agents built from experts.
    fn expert_index(&self) -> Option<usize> {
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct MatchTrace {
    pub records: Vec<StepRecord>,
    pub experts1: Option<Vec<u8>>,
    pub experts2: Option<Vec<u8>>,
}

impl MatchTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mean_rewards(&self) -> (f64, f64) {
        if self.records.is_empty() {
            return (0.0, 0.0);
        }
        let n = self.records.len() as f64;
        let (s1, s2) = self
            .records
            .iter()
            .fold((0.0, 0.0), |acc, r| (acc.0 + r.r1, acc.1 + r.r2));
        (s1 / n, s2 / n)
    }
}

/// Both signal bits from one public uniform draw.
pub fn draw_signals(x: f64, w1: f64, w2: f64) -> (bool, bool) {
    (x < w1, x < w2)
}

/// Seeded generator for a stream of one match: 0 is the public signal,
/// 1 and 2 belong to the agents in seats 1 and 2.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_weight(agent: &dyn Agent, seat: u8, t: usize, w: f64) -> Result<(), EngineError> {
    if (0.0..=1.0).contains(&w) {
        Ok(())
    } else {
        Err(EngineError::WeightOutOfRange {
            agent: agent.name(),
            seat,
            t,
            weight: w,
        })
    }
}

pub fn run_match(
    game: &BimatrixGame,
    alg1: &mut dyn Agent,
    alg2: &mut dyn Agent,
    config: &MatchConfig,
) -> Result<MatchTrace, EngineError> {
    config.validate()?;
    let k = config.k;
    let mut rng = stream_rng(config.seed, 0);
    let mut rng1 = stream_rng(config.seed, 1);
    let mut rng2 = stream_rng(config.seed, 2);

    let mut view1 = HistoryState::initial(k);
    let mut view2 = HistoryState::initial(k);
    let mut trace = MatchTrace {
        records: Vec::with_capacity(config.horizon),
        ..Default::default()
    };
    let mut experts1 = Vec::new();
    let mut experts2 = Vec::new();

    for t in 0..config.horizon {
        let w1 = alg1.report_weight(t);
        check_weight(alg1, 1, t, w1)?;
        let w2 = alg2.report_weight(t);
        check_weight(alg2, 2, t, w2)?;

        if t == 0 {
            for _ in 0..k {
                let x: f64 = rng.gen();
                let (y1, y2) = draw_signals(x, w1, w2);
                view1.push_signals(y1, y2);
                view2.push_signals(y2, y1);
            }
        }
        let x: f64 = rng.gen();
        let (y1, y2) = draw_signals(x, w1, w2);
        view1.push_signals(y1, y2);
        view2.push_signals(y2, y1);

        let a1 = alg1.act(&view1, t, &mut rng1);
        if a1 >= game.n1() {
            return Err(EngineError::ActionOutOfRange {
                agent: alg1.name(),
                seat: 1,
                t,
                action: a1,
                available: game.n1(),
            });
        }
        let a2 = alg2.act(&view2, t, &mut rng2);
        if a2 >= game.n2() {
            return Err(EngineError::ActionOutOfRange {
                agent: alg2.name(),
                seat: 2,
                t,
                action: a2,
                available: game.n2(),
            });
        }

        let rec = StepRecord {
            t: t + 1,
            a1,
            a2,
            y1,
            y2,
            x,
            r1: game.r1(a1, a2),
            r2: game.r2(a1, a2),
        };
        // Expert labels describe who chose this step's action.
        if let Some(e) = alg1.expert_index() {
            experts1.push(e as u8);
        }
        if let Some(e) = alg2.expert_index() {
            experts2.push(e as u8);
        }
        alg1.observe(&rec);
        alg2.observe(&rec.swapped());
        trace.records.push(rec);

        view1.push_actions(a1, a2);
        view2.push_actions(a2, a1);
    }
    if experts1.len() == config.horizon {
        trace.experts1 = Some(experts1);
    }
    if experts2.len() == config.horizon {
        trace.experts2 = Some(experts2);
    }
    Ok(trace)
}


#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    /// Uniformly random two-action player with weight 0.5.
    pub struct RandomAgent;

    impl Agent for RandomAgent {
        fn name(&self) -> String {
            "random".into()
        }
        fn report_weight(&mut self, _t: usize) -> f64 {
            0.5
        }
        fn act(&mut self, _s: &HistoryState, _t: usize, r: &mut AgentRng) -> usize {
            r.gen_range(0..2)
        }
        fn observe(&mut self, _s: &StepRecord) {}
    }
}
