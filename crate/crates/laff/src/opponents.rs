//! Opponent zoo: Bully, FTFT, ε-greedy Q-learning, Fictitious Play,
//! Manipulator, and a few scripted probes.
//!
//! Opponents are named on the command line as `name` or `name:{json}`,
//! e.g. `ftft:{"p":0.3}` or `fixed:{"action":1}`.

use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::bargaining::BargainError;
use crate::engine::{Agent, AgentRng, HistoryState, MatchConfig, StepRecord};
use crate::experts::{ExpertContext, LeaderAgent, LeaderPolicy};
use crate::laff::LaffAgent;
use crate::matrix_game::{argmax_first, BimatrixGame, GameError, MixedStrategy, Player};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum OpponentError {
    #[error("unknown opponent '{0}'")]
    UnknownName(String),
    #[error("bad parameters for '{name}': {reason}")]
    BadParams { name: String, reason: String },
    #[error(transparent)]
    Bargain(#[from] BargainError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpponentSpec {
    Laff,
    Bully,
    Ftft { p: f64 },
    EpsGreedyQ { gamma: f64 },
    FictitiousPlay,
    Manipulator { eps_prime: f64, p_switch: f64 },
    Egalitarian,
    Maximin,
    FixedAction(usize),
    Mixed(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FtftParams {
    p: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QParams {
    gamma: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManipulatorParams {
    eps_prime: Option<f64>,
    p_switch: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FixedParams {
    action: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MixedParams {
    probs: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn params<T: for<'de> Deserialize<'de>>(name: &str, json: Option<&str>) -> Result<Option<T>, OpponentError> {
    json.map(|j| {
        serde_json::from_str::<T>(j).map_err(|e| OpponentError::BadParams {
            name: name.to_string(),
            reason: e.to_string(),
        })
    })
    .transpose()
}

fn check_unit(name: &str, field: &str, v: f64) -> Result<f64, OpponentError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(OpponentError::BadParams {
            name: name.into(),
            reason: format!("{field} must lie in [0,1], got {v}"),
        })
    }
}

impl OpponentSpec {
    pub const NAMES: [&'static str; 10] = [
        "laff",
        "bully",
        "ftft",
        "q",
        "fp",
        "manipulator",
        "egalitarian",
        "maximin",
        "fixed",
        "mixed",
    ];

    /// Parses `name` or `name:{json}`.
    pub fn parse(text: &str) -> Result<Self, OpponentError> {
        let text = text.trim();
        match text.split_once(':') {
            Some((name, json)) => Self::from_parts(name.trim(), Some(json)),
            None => Self::from_parts(text, None),
        }
    }

    pub fn parse_bytes(data: &[u8]) -> Result<Self, OpponentError> {
        let text = std::str::from_utf8(data).map_err(|e| OpponentError::BadParams {
            name: "?".into(),
            reason: e.to_string(),
        })?;
        Self::parse(text)
    }

    pub fn from_parts(name: &str, json: Option<&str>) -> Result<Self, OpponentError> {
        let lower = name.to_ascii_lowercase();
        let spec = match lower.as_str() {
            "laff" => params::<NoParams>(name, json).map(|_| OpponentSpec::Laff)?,
            "bully" => params::<NoParams>(name, json).map(|_| OpponentSpec::Bully)?,
            "egalitarian" => params::<NoParams>(name, json).map(|_| OpponentSpec::Egalitarian)?,
            "maximin" => params::<NoParams>(name, json).map(|_| OpponentSpec::Maximin)?,
            "fp" | "fictitious_play" => params::<NoParams>(name, json).map(|_| OpponentSpec::FictitiousPlay)?,
            "ftft" => {
                let p = params::<FtftParams>(name, json)?.and_then(|p| p.p).unwrap_or(0.2);
                OpponentSpec::Ftft {
                    p: check_unit(name, "p", p)?,
                }
            }
            "q" | "q-learning" | "eps_greedy_q" => {
                let gamma = params::<QParams>(name, json)?
                    .and_then(|p| p.gamma)
                    .unwrap_or(EpsGreedyQ::GAMMA);
                if !(0.0..1.0).contains(&gamma) {
                    return Err(OpponentError::BadParams {
                        name: name.into(),
                        reason: format!("gamma must lie in [0,1), got {gamma}"),
                    });
                }
                OpponentSpec::EpsGreedyQ { gamma }
            }
            "manipulator" => {
                let p = params::<ManipulatorParams>(name, json)?;
                let eps_prime = p.as_ref().and_then(|p| p.eps_prime).unwrap_or(0.025);
                let p_switch = p.as_ref().and_then(|p| p.p_switch).unwrap_or(5e-5);
                OpponentSpec::Manipulator {
                    eps_prime: check_unit(name, "eps_prime", eps_prime)?,
                    p_switch: check_unit(name, "p_switch", p_switch)?,
                }
            }
            "fixed" => {
                let p = params::<FixedParams>(name, json)?.ok_or_else(|| OpponentError::BadParams {
                    name: name.into(),
                    reason: "needs {\"action\": n}".into(),
                })?;
                OpponentSpec::FixedAction(p.action)
            }
            "mixed" => {
                let p = params::<MixedParams>(name, json)?.ok_or_else(|| OpponentError::BadParams {
                    name: name.into(),
                    reason: "needs {\"probs\": [..]}".into(),
                })?;
                MixedStrategy::new(p.probs.clone()).map_err(|e| OpponentError::BadParams {
                    name: name.into(),
                    reason: e.to_string(),
                })?;
                OpponentSpec::Mixed(p.probs)
            }
            _ => return Err(OpponentError::UnknownName(name.to_string())),
        };
        Ok(spec)
    }

    /// Short display label, also used in tournament tables.
    pub fn label(&self) -> String {
        match self {
            OpponentSpec::Laff => "laff".into(),
            OpponentSpec::Bully => "bully".into(),
            OpponentSpec::Ftft { .. } => "ftft".into(),
            OpponentSpec::EpsGreedyQ { .. } => "q".into(),
            OpponentSpec::FictitiousPlay => "fp".into(),
            OpponentSpec::Manipulator { .. } => "manipulator".into(),
            OpponentSpec::Egalitarian => "egalitarian".into(),
            OpponentSpec::Maximin => "maximin".into(),
            OpponentSpec::FixedAction(a) => format!("fixed{a}"),
            OpponentSpec::Mixed(_) => "mixed".into(),
        }
    }

    /// Builds a playing agent for `seat`.
    pub fn build(
        &self,
        game: &BimatrixGame,
        seat: Player,
        config: &MatchConfig,
    ) -> Result<Box<dyn Agent>, OpponentError> {
        let agent: Box<dyn Agent> = match self {
            OpponentSpec::Laff => Box::new(LaffAgent::new(game, seat, config)?),
            OpponentSpec::Bully => Box::new(bully_agent(game, seat, config)?),
            OpponentSpec::Ftft { p } => Box::new(ftft_agent(game, seat, config, *p)?),
            OpponentSpec::Egalitarian => Box::new(LeaderAgent {
                label: "egalitarian".into(),
                policy: ExpertContext::new(game, seat, config)?.egalitarian_leader(),
            }),
            OpponentSpec::EpsGreedyQ { gamma } => Box::new(EpsGreedyQ::with_gamma(game, seat, config.k, *gamma)),
            OpponentSpec::FictitiousPlay => Box::new(FictitiousPlay::new(game, seat)),
            OpponentSpec::Manipulator { eps_prime, p_switch } => {
                Box::new(Manipulator::new(game, seat, config, *eps_prime, *p_switch)?)
            }
            OpponentSpec::Maximin | OpponentSpec::FixedAction(_) | OpponentSpec::Mixed(_) => {
                let strategy = self.fixed_strategy(game, seat)?.expect("stateless kind");
                Box::new(MixedAgent {
                    label: self.label(),
                    strategy,
                })
            }
        };
        Ok(agent)
    }

    fn fixed_strategy(&self, game: &BimatrixGame, seat: Player) -> Result<Option<MixedStrategy>, OpponentError> {
        let view = game.view_from(seat);
        let n = view.n1();
        let bad = |reason: String| OpponentError::BadParams {
            name: self.label(),
            reason,
        };
        Ok(match self {
            OpponentSpec::Maximin => Some(crate::matrix_game::security_value(&view, Player::One).1),
            OpponentSpec::FixedAction(a) => {
                if *a >= n {
                    return Err(bad(format!("action {a} out of range for {n} actions")));
                }
                Some(MixedStrategy::pure(n, *a))
            }
            OpponentSpec::Mixed(p) => {
                if p.len() != n {
                    return Err(bad(format!("{} probabilities for {n} actions", p.len())));
                }
                Some(MixedStrategy::new(p.clone()).map_err(|e| bad(e.to_string()))?)
            }
            _ => None,
        })
    }

    /// The opponent's fixed memory-K policy, if it has one.
    pub fn bounded_memory(
        &self,
        game: &BimatrixGame,
        seat: Player,
        config: &MatchConfig,
    ) -> Result<Option<BoundedPolicy>, OpponentError> {
        if let Some(s) = self.fixed_strategy(game, seat)? {
            return Ok(Some(BoundedPolicy::Stateless(s)));
        }
        let ctx = || ExpertContext::new(game, seat, config);
        Ok(match self {
            OpponentSpec::Bully => Some(BoundedPolicy::Leader(ctx()?.bully_leader())),
            OpponentSpec::Egalitarian => Some(BoundedPolicy::Leader(ctx()?.egalitarian_leader())),
            OpponentSpec::Ftft { p } => {
                let mut leader = ctx()?.egalitarian_leader();
                leader.punish_prob = *p;
                Some(BoundedPolicy::Leader(leader))
            }
            _ => None,
        })
    }
}

/// A memory-K policy from the owner's own seat.
#[derive(Debug, Clone)]
pub enum BoundedPolicy {
    Stateless(MixedStrategy),
    /// Post-amnesty behaviour of a Leader expert.
    Leader(LeaderPolicy),
}

impl BoundedPolicy {
    pub fn weight(&self) -> f64 {
        match self {
            BoundedPolicy::Stateless(_) => 0.0,
            BoundedPolicy::Leader(l) => l.weight,
        }
    }

    pub fn distribution(&self, own_state: &HistoryState) -> Vec<f64> {
        match self {
            BoundedPolicy::Stateless(s) => s.probs.clone(),
            BoundedPolicy::Leader(l) => l.distribution(own_state),
        }
    }
}

/// φ_B for the given seat.
pub fn bully_agent(game: &BimatrixGame, seat: Player, config: &MatchConfig) -> Result<LeaderAgent, BargainError> {
    Ok(LeaderAgent {
        label: "bully".into(),
        policy: ExpertContext::new(game, seat, config)?.bully_leader(),
    })
}

/// φ_E that carries out each eligible punishment only with probability `p`.
pub fn ftft_agent(
    game: &BimatrixGame,
    seat: Player,
    config: &MatchConfig,
    p: f64,
) -> Result<LeaderAgent, BargainError> {
    let mut policy = ExpertContext::new(game, seat, config)?.egalitarian_leader();
    policy.punish_prob = p;
    Ok(LeaderAgent {
        label: "ftft".into(),
        policy,
    })
}

/// Plays a fixed mixed strategy regardless of history.
pub struct MixedAgent {
    pub label: String,
    pub strategy: MixedStrategy,
}

impl Agent for MixedAgent {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        0.0
    }

    fn act(&mut self, _state: &HistoryState, _t: usize, rng: &mut AgentRng) -> usize {
        self.strategy.sample(rng)
    }

    fn observe(&mut self, _step: &StepRecord) {}
}

/// Tabular Q-learning with decaying ε-greedy exploration.
#[derive(Debug, Clone)]
pub struct EpsGreedyQ {
    n1: usize,
    n2: usize,
    q: Vec<f64>,
    gamma: f64,
    pending: Option<(usize, usize, f64, usize)>,
    last_state: usize,
    steps: usize,
}

impl EpsGreedyQ {
    pub const GAMMA: f64 = 0.95;

    pub fn new(game: &BimatrixGame, seat: Player, k: usize) -> Self {
        Self::with_gamma(game, seat, k, Self::GAMMA)
    }

    pub fn with_gamma(game: &BimatrixGame, seat: Player, k: usize, gamma: f64) -> Self {
        let view = game.view_from(seat);
        let (n1, n2) = (view.n1(), view.n2());
        EpsGreedyQ {
            n1,
            n2,
            q: vec![1.0 / (1.0 - gamma); HistoryState::count(n1, n2, k) * n1],
            gamma,
            pending: None,
            last_state: 0,
            steps: 0,
        }
    }

    pub fn explore_prob(t: usize) -> f64 {
        1.0 / (10.0 + t as f64 / 10.0)
    }

    pub fn learning_rate(t: usize) -> f64 {
        5.0 / (10.0 + t as f64 / 100.0)
    }

    pub fn q_values(&self, state: &HistoryState) -> &[f64] {
        let s = state.index(self.n1, self.n2);
        &self.q[s * self.n1..(s + 1) * self.n1]
    }

    /// Applies the update deferred from the previous step.
    fn update_to(&mut self, next: usize) {
        if let Some((s, a, r, t)) = self.pending.take() {
            let n = self.n1;
            let best = self.q[next * n..(next + 1) * n]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let i = s * n + a;
            self.q[i] += Self::learning_rate(t) * (r + self.gamma * best - self.q[i]);
        }
    }

    fn choose(&self, s: usize, t: usize, rng: &mut AgentRng) -> usize {
        if rng.gen::<f64>() < Self::explore_prob(t) {
            rng.gen_range(0..self.n1)
        } else {
            argmax_first(self.q[s * self.n1..(s + 1) * self.n1].iter().copied())
        }
    }

    fn record(&mut self, rec: &StepRecord) {
        self.pending = Some((self.last_state, rec.a1, rec.r1, self.steps));
        self.steps += 1;
    }
}

impl Agent for EpsGreedyQ {
    fn name(&self) -> String {
        "q".into()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        0.0
    }

    fn act(&mut self, state: &HistoryState, t: usize, rng: &mut AgentRng) -> usize {
        let s = state.index(self.n1, self.n2);
        self.update_to(s);
        self.last_state = s;
        self.choose(s, t, rng)
    }

    fn observe(&mut self, step: &StepRecord) {
        self.record(step);
    }
}

/// Best response to the empirical frequency of the opponent's actions.
#[derive(Debug, Clone)]
pub struct FictitiousPlay {
    view: BimatrixGame,
    counts: Vec<u64>,
}

impl FictitiousPlay {
    pub fn new(game: &BimatrixGame, seat: Player) -> Self {
        let view = game.view_from(seat);
        FictitiousPlay {
            counts: vec![0; view.n2()],
            view,
        }
    }

    /// Empirical opponent marginal; uniform before any observation.
    pub fn belief(&self) -> Vec<f64> {
        let total: u64 = self.counts.iter().sum();
        if total == 0 {
            let n = self.counts.len();
            return vec![1.0 / n as f64; n];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }

    pub fn best_response(&self) -> usize {
        let p = self.belief();
        argmax_first(
            (0..self.view.n1()).map(|a| p.iter().enumerate().map(|(j, pj)| pj * self.view.r1(a, j)).sum::<f64>()),
        )
    }
}

impl Agent for FictitiousPlay {
    fn name(&self) -> String {
        "fp".into()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        0.0
    }

    fn act(&mut self, _state: &HistoryState, _t: usize, _rng: &mut AgentRng) -> usize {
        self.best_response()
    }

    fn observe(&mut self, step: &StepRecord) {
        self.counts[step.a2] += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManipulatorPhase {
    /// Leading with the Bully Leader, no switching allowed.
    Lead,
    /// Leading, may switch to the learner when rewards sag.
    Watch,
    /// Learning for 3T/10 steps after the switch.
    Learn,
    /// Trial of the learner after a stationarity check passed.
    TestLearner,
    Locked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManipulatorExpert {
    Leader,
    Learner,
}

/// Leads with its Bully solution, may fall back to Q-learning, then locks
/// in one expert with a maximin safety override.
pub struct Manipulator {
    leader: LeaderPolicy,
    learner: EpsGreedyQ,
    maximin: MixedStrategy,
    mu_b: f64,
    mu_s: f64,
    eps_prime: f64,
    p_switch: f64,
    horizon: usize,
    window: usize,
    pub phase: ManipulatorPhase,
    pub expert: ManipulatorExpert,
    pub overriding: bool,
    phase_end: usize,
    steps: usize,
    cum: f64,
    expert_sum: [f64; 2],
    expert_n: [usize; 2],
    opp_actions: Vec<usize>,
    recent: std::collections::VecDeque<f64>,
    recent_sum: f64,
    n_opp: usize,
}

impl Manipulator {
    pub fn new(
        game: &BimatrixGame,
        seat: Player,
        config: &MatchConfig,
        eps_prime: f64,
        p_switch: f64,
    ) -> Result<Self, BargainError> {
        let ctx = ExpertContext::new(game, seat, config)?;
        let window = (config.horizon / 20).max(1);
        let mut leader = ctx.bully_leader();
        leader.activate();
        Ok(Manipulator {
            mu_b: ctx.bully.u1,
            mu_s: ctx.mu_s.0,
            maximin: ctx.maximin.clone(),
            learner: EpsGreedyQ::new(game, seat, config.k),
            leader,
            eps_prime,
            p_switch,
            horizon: config.horizon,
            window,
            phase: ManipulatorPhase::Lead,
            expert: ManipulatorExpert::Leader,
            overriding: false,
            phase_end: window,
            steps: 0,
            cum: 0.0,
            expert_sum: [0.0; 2],
            expert_n: [0; 2],
            opp_actions: Vec::with_capacity(config.horizon),
            recent: std::collections::VecDeque::with_capacity(window),
            recent_sum: 0.0,
            n_opp: ctx.view.n2(),
        })
    }

    /// Total-variation distance between the opponent's action frequencies in
    /// the last window and the one before it exceeds 0.1.
    pub fn opponent_nonstationary(&self) -> bool {
        let w = self.window;
        let n = self.opp_actions.len();
        if n < 2 * w {
            return false;
        }
        let freq = |slice: &[usize]| {
            let mut f = vec![0.0; self.n_opp];
            for &a in slice {
                f[a] += 1.0 / slice.len() as f64;
            }
            f
        };
        let last = freq(&self.opp_actions[n - w..]);
        let prev = freq(&self.opp_actions[n - 2 * w..n - w]);
        let tv: f64 = last.iter().zip(&prev).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
        tv > 0.1
    }

    fn best_expert(&self) -> ManipulatorExpert {
        let avg = |i: usize| {
            if self.expert_n[i] == 0 {
                f64::NEG_INFINITY
            } else {
                self.expert_sum[i] / self.expert_n[i] as f64
            }
        };
        if avg(1) > avg(0) {
            ManipulatorExpert::Learner
        } else {
            ManipulatorExpert::Leader
        }
    }

    fn set_expert(&mut self, e: ManipulatorExpert) {
        if e == ManipulatorExpert::Leader && self.expert != e {
            self.leader.activate();
        }
        self.expert = e;
    }

    fn advance_phase(&mut self) {
        match self.phase {
            ManipulatorPhase::Lead if self.steps >= self.phase_end => {
                self.phase = ManipulatorPhase::Watch;
            }
            ManipulatorPhase::Learn if self.steps >= self.phase_end => {
                if self.opponent_nonstationary() {
                    let best = self.best_expert();
                    self.set_expert(best);
                    self.phase = ManipulatorPhase::Locked;
                } else {
                    self.phase = ManipulatorPhase::TestLearner;
                    self.phase_end = self.steps + self.window;
                }
            }
            ManipulatorPhase::TestLearner if self.steps >= self.phase_end => {
                let e = if self.opponent_nonstationary() {
                    self.best_expert()
                } else {
                    ManipulatorExpert::Learner
                };
                self.set_expert(e);
                self.phase = ManipulatorPhase::Locked;
            }
            _ => {}
        }
    }
}

impl Agent for Manipulator {
    fn name(&self) -> String {
        "manipulator".into()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        match self.expert {
            ManipulatorExpert::Leader => self.leader.weight,
            ManipulatorExpert::Learner => 0.0,
        }
    }

    fn act(&mut self, state: &HistoryState, t: usize, rng: &mut AgentRng) -> usize {
        let s = state.index(self.learner.n1, self.learner.n2);
        self.learner.update_to(s);
        self.learner.last_state = s;

        if self.phase == ManipulatorPhase::Watch && self.expert == ManipulatorExpert::Leader {
            let avg = self.cum / self.steps.max(1) as f64;
            if avg < self.mu_b - self.eps_prime && rng.gen::<f64>() < self.p_switch {
                self.set_expert(ManipulatorExpert::Learner);
                self.phase = ManipulatorPhase::Learn;
                self.phase_end = self.steps + 3 * self.horizon / 10;
            }
        }
        if self.phase == ManipulatorPhase::Locked {
            let trailing = self.recent_sum / self.recent.len().max(1) as f64;
            self.overriding = self.recent.len() == self.window && trailing < self.mu_s - self.eps_prime;
            if self.overriding {
                return self.maximin.sample(rng);
            }
        }
        match self.expert {
            ManipulatorExpert::Leader => self.leader.act(state, rng),
            ManipulatorExpert::Learner => self.learner.choose(s, t, rng),
        }
    }

    fn observe(&mut self, step: &StepRecord) {
        self.learner.record(step);
        self.leader.observe();
        self.steps += 1;
        self.cum += step.r1;
        let e = self.expert as usize;
        if !self.overriding {
            self.expert_sum[e] += step.r1;
            self.expert_n[e] += 1;
        }
        self.opp_actions.push(step.a2);
        self.recent.push_back(step.r1);
        self.recent_sum += step.r1;
        if self.recent.len() > self.window {
            self.recent_sum -= self.recent.pop_front().unwrap();
        }
        self.advance_phase();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_match, stream_rng};
    use crate::games;
    use proptest::prelude::{prop_assert, proptest};

    fn chicken() -> BimatrixGame {
        games::builtin("chicken").unwrap()
    }

    fn cfg(horizon: usize, seed: u64) -> MatchConfig {
        MatchConfig {
            horizon,
            seed,
            ..MatchConfig::default()
        }
    }

    #[test]
    fn parse_names_and_params() {
        assert_eq!(OpponentSpec::parse("bully").unwrap(), OpponentSpec::Bully);
        assert_eq!(OpponentSpec::parse("FTFT").unwrap(), OpponentSpec::Ftft { p: 0.2 });
        assert_eq!(
            OpponentSpec::parse(r#"ftft:{"p":0.5}"#).unwrap(),
            OpponentSpec::Ftft { p: 0.5 }
        );
        assert_eq!(
            OpponentSpec::parse(r#"fixed:{"action":1}"#).unwrap(),
            OpponentSpec::FixedAction(1)
        );
        assert_eq!(
            OpponentSpec::parse("manipulator").unwrap(),
            OpponentSpec::Manipulator {
                eps_prime: 0.025,
                p_switch: 5e-5
            }
        );
        assert!(matches!(
            OpponentSpec::parse("nobody"),
            Err(OpponentError::UnknownName(_))
        ));
        assert!(matches!(
            OpponentSpec::parse(r#"ftft:{"p":2}"#),
            Err(OpponentError::BadParams { .. })
        ));
        assert!(matches!(
            OpponentSpec::parse(r#"bully:{"x":1}"#),
            Err(OpponentError::BadParams { .. })
        ));
        assert!(matches!(
            OpponentSpec::parse("fixed"),
            Err(OpponentError::BadParams { .. })
        ));
        assert!(matches!(
            OpponentSpec::parse(r#"mixed:{"probs":[0.2,0.2]}"#),
            Err(OpponentError::BadParams { .. })
        ));
    }

    #[test]
    fn bully_as_player_two_in_chicken() {
        let ctx = ExpertContext::new(&chicken(), Player::Two, &cfg(100, 0)).unwrap();
        assert_eq!(ctx.bully.u1, 1.0);
        assert_eq!(ctx.bully.u2, 0.25);
        // In original coordinates the enforced cell is (row 0, column 1).
        assert_eq!(ctx.bully.xa.swapped(), crate::JointAction::new(0, 1));
    }

    #[test]
    fn bully_never_punishes_compliant_follower() {
        let g = chicken();
        let config = cfg(500, 3);
        let mut bully = bully_agent(&g, Player::Two, &config).unwrap();
        let mut compliant = MixedAgent {
            label: "c".into(),
            strategy: MixedStrategy::pure(2, 0),
        };
        let tr = run_match(&g, &mut compliant, &mut bully, &config).unwrap();
        assert_eq!(bully.policy.punishments, 0);
        assert!(tr.records.iter().all(|r| r.r2 == 1.0));
    }

    #[test]
    fn bully_reports_its_alpha() {
        let g = games::builtin("sym_second_best").unwrap();
        let config = cfg(10, 0);
        let mut b = bully_agent(&g, Player::Two, &config).unwrap();
        let alpha = b.policy.solution.alpha;
        for t in 0..10 {
            assert_eq!(b.report_weight(t), alpha);
        }
    }

    #[test]
    fn ftft_zero_never_punishes() {
        let g = games::builtin("sym_inferior").unwrap();
        let config = cfg(2000, 5);
        let mut f = ftft_agent(&g, Player::Two, &config, 0.0).unwrap();
        let mut dev = MixedAgent {
            label: "d".into(),
            strategy: MixedStrategy::pure(2, 1),
        };
        run_match(&g, &mut dev, &mut f, &config).unwrap();
        assert_eq!(f.policy.punishments, 0);
    }

    #[test]
    fn ftft_one_matches_egalitarian_stream() {
        let g = games::builtin("sym_inferior").unwrap();
        let config = cfg(3000, 9);
        let mut f = ftft_agent(&g, Player::Two, &config, 1.0).unwrap();
        let mut e = OpponentSpec::Egalitarian.build(&g, Player::Two, &config).unwrap();
        let mut q1 = EpsGreedyQ::new(&g, Player::One, 1);
        let mut q2 = EpsGreedyQ::new(&g, Player::One, 1);
        let a = run_match(&g, &mut q1, &mut f, &config).unwrap();
        let b = run_match(&g, &mut q2, e.as_mut(), &config).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn ftft_punishment_rate_is_binomial() {
        // Against an opponent that always deviates, every post-amnesty step is
        // eligible and each is punished with probability 0.2.
        let g = games::builtin("sym_inferior").unwrap();
        let steps = 10_000;
        let config = cfg(steps, 17);
        let mut f = ftft_agent(&g, Player::Two, &config, 0.2).unwrap();
        let ebs = f.policy.solution.clone();
        let always_dev = ebs.support().iter().all(|c| c.a2 != 1);
        assert!(always_dev, "pick a deviation outside the solution's support");
        let mut dev = MixedAgent {
            label: "d".into(),
            strategy: MixedStrategy::pure(2, 1),
        };
        run_match(&g, &mut dev, &mut f, &config).unwrap();
        let eligible = (steps - f.policy.kp) as f64;
        let rate = f.policy.punishments as f64 / eligible;
        let sd = (0.2 * 0.8 / eligible).sqrt();
        assert!((rate - 0.2).abs() < 4.0 * sd, "rate {rate}");
    }

    #[test]
    fn q_schedules() {
        assert_eq!(EpsGreedyQ::learning_rate(0), 0.5);
        assert_eq!(EpsGreedyQ::explore_prob(0), 0.1);
        assert!(EpsGreedyQ::explore_prob(10_000_000) < 1e-5);
        let q = EpsGreedyQ::new(&chicken(), Player::One, 1);
        assert!(q.q.iter().all(|&v| (v - 20.0).abs() < 1e-12));
    }

    #[test]
    fn q_learner_yields_to_bully_in_chicken() {
        let g = chicken();
        let mut tail = Vec::new();
        for seed in 0..5 {
            let config = cfg(20_000, seed);
            let mut q = EpsGreedyQ::new(&g, Player::One, 1);
            let mut b = bully_agent(&g, Player::Two, &config).unwrap();
            let tr = run_match(&g, &mut q, &mut b, &config).unwrap();
            let last = &tr.records[15_000..];
            let m1 = last.iter().map(|r| r.r1).sum::<f64>() / last.len() as f64;
            let m2 = last.iter().map(|r| r.r2).sum::<f64>() / last.len() as f64;
            tail.push((m1, m2));
        }
        let m1 = tail.iter().map(|t| t.0).sum::<f64>() / 5.0;
        let m2 = tail.iter().map(|t| t.1).sum::<f64>() / 5.0;
        assert!((m1 - 0.25).abs() < 0.05 && m2 > 0.9, "({m1}, {m2})");
    }

    #[test]
    fn fictitious_play_best_responds() {
        let g = chicken();
        let mut fp = FictitiousPlay::new(&g, Player::Two);
        let mut rng = stream_rng(0, 1);
        let s = HistoryState::initial(1);
        // Uniform prior in Chicken from seat 2: 0.5·0.5+0.5·0.25 vs 0.5·1+0.5·0.
        assert_eq!(fp.act(&s, 0, &mut rng), 1);
        let config = cfg(200, 0);
        let mut opp = MixedAgent {
            label: "a1".into(),
            strategy: MixedStrategy::pure(2, 1),
        };
        let tr = run_match(&g, &mut opp, &mut fp, &config).unwrap();
        assert_eq!(tr.records.last().unwrap().a2, 0);
    }

    #[test]
    fn fictitious_play_tie_goes_to_first() {
        let g = BimatrixGame::new(
            "flat",
            &[vec![0.5, 0.5], vec![0.5, 0.5]],
            &[vec![0.5, 0.5], vec![0.5, 0.5]],
        )
        .unwrap();
        let fp = FictitiousPlay::new(&g, Player::One);
        assert_eq!(fp.best_response(), 0);
    }

    #[test]
    fn manipulator_stays_leader_against_compliant_follower() {
        let g = chicken();
        let config = cfg(4000, 2);
        let mut m = Manipulator::new(&g, Player::Two, &config, 0.025, 5e-5).unwrap();
        let mut c = MixedAgent {
            label: "c".into(),
            strategy: MixedStrategy::pure(2, 0),
        };
        run_match(&g, &mut c, &mut m, &config).unwrap();
        assert_eq!(m.expert, ManipulatorExpert::Leader);
        assert_eq!(m.phase, ManipulatorPhase::Watch);
        assert!(!m.overriding);
    }

    #[test]
    fn manipulator_override_engages() {
        let g = chicken();
        let config = cfg(2000, 4);
        let mut m = Manipulator::new(&g, Player::Two, &config, 0.025, 5e-5).unwrap();
        m.phase = ManipulatorPhase::Locked;
        let s = HistoryState::initial(1);
        let mut rng = stream_rng(0, 2);
        for t in 0..100 {
            m.act(&s, t, &mut rng);
            assert!(!m.overriding);
            // Both swerve-less: zero reward, below μ_S − ε′ = 0.225.
            m.observe(&StepRecord {
                t: t + 1,
                a1: 1,
                a2: 1,
                y1: false,
                y2: false,
                x: 0.0,
                r1: 0.0,
                r2: 0.0,
            });
        }
        m.act(&s, 100, &mut rng);
        assert!(m.overriding);
        for t in 0..100 {
            m.observe(&StepRecord {
                t: t + 101,
                a1: 0,
                a2: 1,
                y1: false,
                y2: false,
                x: 0.0,
                r1: 0.5,
                r2: 0.5,
            });
        }
        m.act(&s, 200, &mut rng);
        assert!(!m.overriding);
    }

    #[test]
    fn bounded_memory_policies() {
        let g = chicken();
        let config = cfg(100, 0);
        let p = OpponentSpec::FixedAction(1)
            .bounded_memory(&g, Player::Two, &config)
            .unwrap()
            .unwrap();
        assert_eq!(p.distribution(&HistoryState::initial(1)), vec![0.0, 1.0]);
        assert_eq!(p.weight(), 0.0);
        let e = OpponentSpec::Egalitarian
            .bounded_memory(&g, Player::Two, &config)
            .unwrap()
            .unwrap();
        assert_eq!(e.weight(), 0.5);
        assert!(OpponentSpec::FictitiousPlay
            .bounded_memory(&g, Player::Two, &config)
            .unwrap()
            .is_none());
        assert!(OpponentSpec::FixedAction(3)
            .bounded_memory(&g, Player::Two, &config)
            .is_err());
    }

    proptest! {
        #[test]
        fn every_kind_plays_in_range(seed in 0u64..1000, which in 0usize..10, gi in 0usize..16) {
            let g = games::all()[gi].clone();
            let spec = match which {
                0 => OpponentSpec::Laff,
                1 => OpponentSpec::Bully,
                2 => OpponentSpec::Ftft { p: 0.2 },
                3 => OpponentSpec::EpsGreedyQ { gamma: 0.95 },
                4 => OpponentSpec::FictitiousPlay,
                5 => OpponentSpec::Manipulator { eps_prime: 0.025, p_switch: 0.5 },
                6 => OpponentSpec::Egalitarian,
                7 => OpponentSpec::Maximin,
                8 => OpponentSpec::FixedAction(1),
                _ => OpponentSpec::Mixed(vec![0.3, 0.7]),
            };
            let config = cfg(300, seed);
            let mut a = spec.build(&g, Player::One, &config).unwrap();
            let mut b = spec.build(&g, Player::Two, &config).unwrap();
            let tr = run_match(&g, a.as_mut(), b.as_mut(), &config);
            prop_assert!(tr.is_ok());
        }

        #[test]
        fn fictitious_play_is_deterministic(actions in proptest::collection::vec(0usize..2, 1..60)) {
            let g = games::builtin("asym_biased").unwrap();
            let mut f1 = FictitiousPlay::new(&g, Player::One);
            let mut f2 = FictitiousPlay::new(&g, Player::One);
            let mut r1 = stream_rng(1, 1);
            let mut r2 = stream_rng(2, 1);
            let s = HistoryState::initial(1);
            for (t, &a) in actions.iter().enumerate() {
                let x = f1.act(&s, t, &mut r1);
                let y = f2.act(&s, t, &mut r2);
                prop_assert!(x == y);
                let rec = StepRecord { t: t + 1, a1: x, a2: a, y1: false, y2: false, x: 0.0, r1: 0.0, r2: 0.0 };
                f1.observe(&rec);
                f2.observe(&rec);
            }
        }
    }
}
