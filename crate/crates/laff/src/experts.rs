//! The four sub-algorithms LAFF switches between: Conditional Follower,
//! Conditional Maximin, Egalitarian Leader and Bully Leader.
//!
//! Experts reason from their own seat. `ExpertContext` holds everything they
//! derive from the game once per match.

use rand::Rng;

use crate::bargaining::{
    bully_solution, enforceable_ebs, punishment_length, security_pair, BargainError, EnforceParams, PairSolution,
};
use crate::engine::{Agent, AgentRng, HistoryState, MatchConfig, StepRecord};
use crate::matrix_game::{punishment_strategy, security_value, BimatrixGame, MixedStrategy, Player};

/// Regret scale of the Follower's learner: (S·A·ln(τ/δ))^(1/3) · τ^(2/3).
pub fn rq_bound(tau: usize, delta: f64, states: usize, actions: usize) -> f64 {
    let tau = tau.max(1) as f64;
    let log_term = (tau / delta).ln().max(0.0);
    (states as f64 * actions as f64 * log_term).cbrt() * tau.powf(2.0 / 3.0)
}

/// Orients a solution so `xA` is the lexicographically smaller joint action
/// in the original game's coordinates. Both seats then map the public
/// signal to the same cell.
fn canonical(sol: PairSolution, seat: Player) -> PairSolution {
    let key = |ja: crate::JointAction| match seat {
        Player::One => ja,
        Player::Two => ja.swapped(),
    };
    if key(sol.xa) > key(sol.xb) {
        sol.flipped()
    } else {
        sol
    }
}

/// Game-derived quantities shared by the experts of one seat.
#[derive(Debug, Clone)]
pub struct ExpertContext {
    pub view: BimatrixGame,
    pub seat: Player,
    pub config: MatchConfig,
    pub ep: EnforceParams,
    /// Security values (own, opponent).
    pub mu_s: (f64, f64),
    pub ebs: PairSolution,
    pub bully: PairSolution,
    pub kp_ebs: usize,
    pub kp_bully: usize,
    pub punish: MixedStrategy,
    pub maximin: MixedStrategy,
    pub epoch_len: usize,
    pub subepoch_len: usize,
    pub states: usize,
}

impl ExpertContext {
    pub fn new(game: &BimatrixGame, seat: Player, config: &MatchConfig) -> Result<Self, BargainError> {
        let view = game.view_from(seat);
        let ep = EnforceParams::new(config.k, config.eps)?;
        let mu_s = security_pair(&view);
        let ebs = canonical(enforceable_ebs(&view, ep), seat);
        let bully = canonical(bully_solution(&view, ep), seat);
        let kp_ebs = punishment_length(&ebs, ep, mu_s.1)?;
        let kp_bully = punishment_length(&bully, ep, mu_s.1)?;
        let epoch_len = config.epoch_len();
        Ok(ExpertContext {
            punish: punishment_strategy(&view).1,
            maximin: security_value(&view, Player::One).1,
            states: HistoryState::count(view.n1(), view.n2(), config.k),
            subepoch_len: ((epoch_len as f64).sqrt().ceil() as usize).max(1),
            view,
            seat,
            config: *config,
            ep,
            mu_s,
            ebs,
            bully,
            kp_ebs,
            kp_bully,
            epoch_len,
        })
    }

    pub fn egalitarian_leader(&self) -> LeaderPolicy {
        LeaderPolicy::new(self.ebs.clone(), self.kp_ebs, self.punish.clone(), self.maximin.clone())
    }

    pub fn bully_leader(&self) -> LeaderPolicy {
        LeaderPolicy::new(
            self.bully.clone(),
            self.kp_bully,
            self.punish.clone(),
            self.maximin.clone(),
        )
    }

    pub fn follower(&self) -> ConditionalFollower {
        ConditionalFollower::new(self)
    }

    pub fn conditional_maximin(&self) -> ConditionalMaximin {
        ConditionalMaximin::new(self)
    }
}

/// Leader expert: plays its part of a bargaining solution and punishes
/// recent deviations.
#[derive(Debug, Clone)]
pub struct LeaderPolicy {
    pub solution: PairSolution,
    pub kp: usize,
    pub punish: MixedStrategy,
    /// Used in place of the solution when it is a security fallback.
    pub maximin: MixedStrategy,
    pub weight: f64,
    pub steps_active: usize,
    /// Chance that an eligible punishment is carried out.
    pub punish_prob: f64,
    pub punishments: usize,
}

impl LeaderPolicy {
    pub fn new(solution: PairSolution, kp: usize, punish: MixedStrategy, maximin: MixedStrategy) -> Self {
        LeaderPolicy {
            weight: solution.alpha,
            solution,
            kp,
            punish,
            maximin,
            steps_active: 0,
            punish_prob: 1.0,
            punishments: 0,
        }
    }

    /// Restarts the startup amnesty.
    pub fn activate(&mut self) {
        self.steps_active = 0;
    }

    /// Whether the opponent left the solution within the last K′ steps.
    /// Compliance is judged against this player's own signal at each step.
    pub fn deviated(&self, state: &HistoryState) -> bool {
        let k = state.k();
        (1..=self.kp.min(k)).any(|back| {
            let y = state.y1[k - back];
            state.a2[k - back] != self.solution.target(y).a2
        })
    }

    pub fn act(&mut self, state: &HistoryState, rng: &mut AgentRng) -> usize {
        leader_act(self, state, state.y1_now(), rng)
    }

    pub fn observe(&mut self) {
        self.steps_active += 1;
    }

    /// Action distribution once the startup amnesty is over.
    pub fn distribution(&self, state: &HistoryState) -> Vec<f64> {
        if self.solution.is_fallback() {
            return self.maximin.probs.clone();
        }
        let target = self.solution.target(state.y1_now()).a1;
        let mut d = vec![0.0; self.punish.len()];
        if self.deviated(state) {
            for (a, p) in self.punish.probs.iter().enumerate() {
                d[a] += self.punish_prob * p;
            }
            d[target] += 1.0 - self.punish_prob;
        } else {
            d[target] = 1.0;
        }
        d
    }
}

/// One move of a Leader expert given its current signal bit.
pub fn leader_act(policy: &mut LeaderPolicy, state: &HistoryState, y_own: bool, rng: &mut AgentRng) -> usize {
    if policy.solution.is_fallback() {
        return policy.maximin.sample(rng);
    }
    if policy.steps_active >= policy.kp && policy.deviated(state) {
        let punish = policy.punish_prob >= 1.0 || (policy.punish_prob > 0.0 && rng.gen::<f64>() < policy.punish_prob);
        if punish {
            policy.punishments += 1;
            return policy.punish.sample(rng);
        }
    }
    policy.solution.target(y_own).a1
}

/// Follower expert: optimistic tabular Q-learning with a test that hands
/// control to the Egalitarian Leader when the learner falls short of V.
#[derive(Debug, Clone)]
pub struct ConditionalFollower {
    n1: usize,
    n2: usize,
    q: Vec<f64>,
    visits: Vec<u32>,
    gamma: f64,
    h0: f64,
    pub subepoch_len: usize,
    pub elapsed: usize,
    pub cum_reward: f64,
    pub tripped: bool,
    pub v1: f64,
    c4: f64,
    states: usize,
    horizon: usize,
    delta: f64,
    pending: Option<(usize, usize, f64)>,
}

impl ConditionalFollower {
    pub const GAMMA: f64 = 0.95;
    pub const H0: f64 = 10.0;

    pub fn new(ctx: &ExpertContext) -> Self {
        let (n1, n2) = (ctx.view.n1(), ctx.view.n2());
        let q0 = 1.0 / (1.0 - Self::GAMMA);
        ConditionalFollower {
            n1,
            n2,
            q: vec![q0; ctx.states * n1],
            visits: vec![0; ctx.states * n1],
            gamma: Self::GAMMA,
            h0: Self::H0,
            subepoch_len: ctx.subepoch_len,
            elapsed: 0,
            cum_reward: 0.0,
            tripped: false,
            v1: ctx.ebs.u1,
            c4: ctx.config.tuning.c4,
            states: ctx.states,
            horizon: ctx.config.horizon,
            delta: ctx.config.delta,
            pending: None,
        }
    }

    /// Starts a new instance. The trip flag survives.
    pub fn begin_instance(&mut self) {
        self.elapsed = 0;
        self.cum_reward = 0.0;
        self.pending = None;
    }

    pub fn q_values(&self, state: &HistoryState) -> &[f64] {
        let s = state.index(self.n1, self.n2);
        &self.q[s * self.n1..(s + 1) * self.n1]
    }

    /// Greedy action with lowest-index ties.
    pub fn greedy(&self, state: &HistoryState) -> usize {
        crate::matrix_game::argmax_first(self.q_values(state).iter().copied())
    }

    /// Applies the update deferred from the previous step, then picks greedily.
    pub fn act(&mut self, state: &HistoryState) -> usize {
        let s = state.index(self.n1, self.n2);
        optimistic_q(self, s);
        crate::matrix_game::argmax_first(self.q[s * self.n1..(s + 1) * self.n1].iter().copied())
    }

    /// Records the step; returns true if the exploitation test just failed.
    pub fn observe(&mut self, state_index: usize, rec: &StepRecord) -> bool {
        self.pending = Some((state_index, rec.a1, rec.r1));
        self.elapsed += 1;
        self.cum_reward += rec.r1;
        follower_test(self)
    }

    pub fn state_index(&self, state: &HistoryState) -> usize {
        state.index(self.n1, self.n2)
    }
}

/// Deferred Q-learning update towards the state just reached.
pub fn optimistic_q(fs: &mut ConditionalFollower, next_state: usize) {
    if let Some((s, a, r)) = fs.pending.take() {
        let n = fs.n1;
        let best_next = fs.q[next_state * n..(next_state + 1) * n]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let i = s * n + a;
        fs.visits[i] += 1;
        let lr = (fs.h0 + 1.0) / (fs.h0 + fs.visits[i] as f64);
        fs.q[i] += lr * (r + fs.gamma * best_next - fs.q[i]);
    }
}

/// Subepoch test of the Follower. Trips permanently on failure.
pub fn follower_test(fs: &mut ConditionalFollower) -> bool {
    if fs.tripped || fs.elapsed == 0 || !fs.elapsed.is_multiple_of(fs.subepoch_len) {
        return false;
    }
    let tau = fs.elapsed;
    let mean = fs.cum_reward / tau as f64;
    let slack = fs.c4 * rq_bound(tau, fs.delta / fs.horizon as f64, fs.states, fs.n1) / tau as f64;
    if mean < fs.v1 - slack {
        fs.tripped = true;
        return true;
    }
    false
}

/// Maximin expert: plays the security strategy and hands control to the
/// Egalitarian Leader once the opponent is seen earning too much.
#[derive(Debug, Clone)]
pub struct ConditionalMaximin {
    pub strategy: MixedStrategy,
    pub elapsed: usize,
    pub opp_cum_reward: f64,
    pub tripped: bool,
    mu_e2: f64,
    eta_m: f64,
    subepoch_len: usize,
    k: usize,
    horizon: usize,
    delta: f64,
}

impl ConditionalMaximin {
    pub fn new(ctx: &ExpertContext) -> Self {
        ConditionalMaximin {
            strategy: ctx.maximin.clone(),
            elapsed: 0,
            opp_cum_reward: 0.0,
            tripped: false,
            mu_e2: ctx.ebs.u2,
            eta_m: ctx.config.tuning.eta_m,
            subepoch_len: ctx.subepoch_len,
            k: ctx.config.k,
            horizon: ctx.config.horizon,
            delta: ctx.config.delta,
        }
    }

    pub fn begin_instance(&mut self) {
        self.elapsed = 0;
        self.opp_cum_reward = 0.0;
    }

    /// Records the step; returns true if the test just tripped.
    pub fn observe(&mut self, rec: &StepRecord) -> bool {
        maximin_step(self, rec)
    }
}

/// Accumulates the opponent's reward (skipping the first K steps of the
/// instance) and runs the subepoch test.
pub fn maximin_step(ms: &mut ConditionalMaximin, rec: &StepRecord) -> bool {
    ms.elapsed += 1;
    if ms.elapsed > ms.k {
        ms.opp_cum_reward += rec.r2;
    }
    if ms.tripped || ms.elapsed <= ms.k || !ms.elapsed.is_multiple_of(ms.subepoch_len) {
        return false;
    }
    let n = (ms.elapsed - ms.k) as f64;
    let mean = ms.opp_cum_reward / n;
    let bound = ms.mu_e2 - ms.eta_m + ((ms.horizon as f64 / ms.delta).ln() / (2.0 * n)).sqrt();
    if mean > bound {
        ms.tripped = true;
        return true;
    }
    false
}

/// A Leader expert on its own.
pub struct LeaderAgent {
    pub label: String,
    pub policy: LeaderPolicy,
}

impl Agent for LeaderAgent {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        self.policy.weight
    }

    fn act(&mut self, state: &HistoryState, _t: usize, rng: &mut AgentRng) -> usize {
        self.policy.act(state, rng)
    }

    fn observe(&mut self, _step: &StepRecord) {
        self.policy.observe();
    }
}

/// The Conditional Follower on its own, delegating to the Egalitarian Leader
/// once tripped.
pub struct FollowerAgent {
    pub follower: ConditionalFollower,
    pub egalitarian: LeaderPolicy,
    last_state: usize,
}

impl FollowerAgent {
    pub fn new(ctx: &ExpertContext) -> Self {
        FollowerAgent {
            follower: ctx.follower(),
            egalitarian: ctx.egalitarian_leader(),
            last_state: 0,
        }
    }
}

impl Agent for FollowerAgent {
    fn name(&self) -> String {
        "follower".into()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        self.egalitarian.weight
    }

    fn act(&mut self, state: &HistoryState, _t: usize, rng: &mut AgentRng) -> usize {
        if self.follower.tripped {
            return self.egalitarian.act(state, rng);
        }
        self.last_state = self.follower.state_index(state);
        self.follower.act(state)
    }

    fn observe(&mut self, step: &StepRecord) {
        if self.follower.tripped {
            self.egalitarian.observe();
        } else if self.follower.observe(self.last_state, step) {
            self.egalitarian.activate();
        }
    }
}

/// The Conditional Maximin expert on its own.
pub struct MaximinAgent {
    pub maximin: ConditionalMaximin,
    pub egalitarian: LeaderPolicy,
}

impl MaximinAgent {
    pub fn new(ctx: &ExpertContext) -> Self {
        MaximinAgent {
            maximin: ctx.conditional_maximin(),
            egalitarian: ctx.egalitarian_leader(),
        }
    }
}

impl Agent for MaximinAgent {
    fn name(&self) -> String {
        "maximin".into()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        self.egalitarian.weight
    }

    fn act(&mut self, state: &HistoryState, _t: usize, rng: &mut AgentRng) -> usize {
        if self.maximin.tripped {
            self.egalitarian.act(state, rng)
        } else {
            self.maximin.strategy.sample(rng)
        }
    }

    fn observe(&mut self, step: &StepRecord) {
        if self.maximin.tripped {
            self.egalitarian.observe();
        } else if self.maximin.observe(step) {
            self.egalitarian.activate();
        }
    }
}
