//! The LAFF controller: a fixed schedule of experts, each kept while its
//! running average stays above the matching target.

use crate::bargaining::{slack_b, slack_b_scaled, slack_b_theoretical, xi, BargainError, SlackMode, TheoryTerms};
use crate::engine::{Agent, AgentRng, HistoryState, MatchConfig, StepRecord};
use crate::experts::{ConditionalFollower, ConditionalMaximin, ExpertContext, LeaderPolicy};
use crate::matrix_game::{BimatrixGame, Player};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpertKind {
    Follower,
    BullyLeader,
    EgalitarianLeader,
    Maximin,
}

pub const SCHEDULE: [ExpertKind; 6] = [
    ExpertKind::Follower,
    ExpertKind::BullyLeader,
    ExpertKind::Follower,
    ExpertKind::EgalitarianLeader,
    ExpertKind::Follower,
    ExpertKind::Maximin,
];

#[derive(Debug, Clone)]
pub struct LaffController {
    ctx: ExpertContext,
    /// `targets[j]` guards the switch out of `SCHEDULE[j]`; the last expert is terminal.
    pub targets: [f64; 5],
    j: usize,
    pub tau: usize,
    pub r_tau: f64,
    pub epoch_len: usize,
    follower: ConditionalFollower,
    maximin: ConditionalMaximin,
    egalitarian: LeaderPolicy,
    bully: LeaderPolicy,
    last_state: usize,
    /// Steps (1-based) at which each switch happened.
    pub switch_times: Vec<usize>,
    steps: usize,
}

impl LaffController {
    pub fn new(game: &BimatrixGame, seat: Player, config: &MatchConfig) -> Result<Self, BargainError> {
        let ctx = ExpertContext::new(game, seat, config)?;
        Ok(Self::from_context(ctx))
    }

    pub fn from_context(ctx: ExpertContext) -> Self {
        let (mb, me, ms) = (ctx.bully.u1, ctx.ebs.u1, ctx.mu_s.0);
        LaffController {
            targets: [mb, mb, me, me, ms],
            j: 0,
            tau: 0,
            r_tau: 0.0,
            epoch_len: ctx.epoch_len,
            follower: ctx.follower(),
            maximin: ctx.conditional_maximin(),
            egalitarian: ctx.egalitarian_leader(),
            bully: ctx.bully_leader(),
            last_state: 0,
            switch_times: Vec::new(),
            steps: 0,
            ctx,
        }
    }

    pub fn context(&self) -> &ExpertContext {
        &self.ctx
    }

    /// Active position in the schedule, from 1.
    pub fn active(&self) -> usize {
        self.j + 1
    }

    pub fn active_kind(&self) -> ExpertKind {
        SCHEDULE[self.j]
    }

    pub fn follower_tripped(&self) -> bool {
        self.follower.tripped
    }

    pub fn maximin_tripped(&self) -> bool {
        self.maximin.tripped
    }

    fn plays_egalitarian(&self) -> bool {
        match SCHEDULE[self.j] {
            ExpertKind::Follower => self.follower.tripped,
            ExpertKind::Maximin => self.maximin.tripped,
            ExpertKind::EgalitarianLeader => true,
            ExpertKind::BullyLeader => false,
        }
    }

    pub fn weight(&self) -> f64 {
        match SCHEDULE[self.j] {
            ExpertKind::BullyLeader => self.bully.weight,
            _ => self.egalitarian.weight,
        }
    }

    pub fn act(&mut self, state: &HistoryState, rng: &mut AgentRng) -> usize {
        if self.plays_egalitarian() {
            return self.egalitarian.act(state, rng);
        }
        match SCHEDULE[self.j] {
            ExpertKind::Follower => {
                self.last_state = self.follower.state_index(state);
                self.follower.act(state)
            }
            ExpertKind::BullyLeader => self.bully.act(state, rng),
            ExpertKind::Maximin => self.maximin.strategy.sample(rng),
            ExpertKind::EgalitarianLeader => unreachable!("handled above"),
        }
    }

    /// Punishment length and per-step margin of the active target.
    fn target_terms(&self) -> (usize, f64) {
        let cfg = &self.ctx.config;
        let (sol, kp) = if self.j < 2 {
            (&self.ctx.bully, self.ctx.kp_bully)
        } else {
            (&self.ctx.ebs, self.ctx.kp_ebs)
        };
        let margin = xi(cfg.eps, sol.deviation_profit, kp.max(1)).unwrap_or(cfg.eps).min(1.0);
        (kp, margin)
    }

    /// Slack of the switch test after `tau` steps on the current expert.
    pub fn slack(&self, tau: usize) -> f64 {
        let cfg = &self.ctx.config;
        match cfg.tuning.slack {
            SlackMode::Practical => slack_b(tau, cfg.horizon, cfg.delta, &cfg.tuning),
            SlackMode::Scaled => {
                let (kp, margin) = self.target_terms();
                slack_b_scaled(tau, cfg.horizon, cfg.delta, &cfg.tuning, kp, margin)
            }
            SlackMode::Theoretical { t0, c2 } => {
                let (kp, margin) = self.target_terms();
                let terms = TheoryTerms {
                    kp,
                    xi: margin,
                    states: self.ctx.states,
                    actions: self.ctx.view.n1(),
                };
                slack_b_theoretical(tau, cfg.horizon, cfg.delta, cfg.tuning.c1, t0, c2, terms)
            }
        }
    }

    /// Per-step bookkeeping and, at epoch boundaries, the switch test.
    pub fn observe(&mut self, rec: &StepRecord) {
        self.steps += 1;
        self.r_tau += rec.r1;
        self.tau += 1;

        if self.plays_egalitarian() {
            self.egalitarian.observe();
        } else {
            match SCHEDULE[self.j] {
                ExpertKind::Follower => {
                    if self.follower.observe(self.last_state, rec) {
                        self.egalitarian.activate();
                    }
                }
                ExpertKind::BullyLeader => self.bully.observe(),
                ExpertKind::Maximin => {
                    if self.maximin.observe(rec) {
                        self.egalitarian.activate();
                    }
                }
                ExpertKind::EgalitarianLeader => unreachable!("handled above"),
            }
        }

        laff_observe_switch(self);
    }

    fn activate_next(&mut self) {
        self.j += 1;
        self.tau = 0;
        self.r_tau = 0.0;
        self.switch_times.push(self.steps);
        match SCHEDULE[self.j] {
            ExpertKind::Follower => {
                self.follower.begin_instance();
                if self.follower.tripped {
                    self.egalitarian.activate();
                }
            }
            ExpertKind::BullyLeader => self.bully.activate(),
            ExpertKind::EgalitarianLeader => self.egalitarian.activate(),
            ExpertKind::Maximin => self.maximin.begin_instance(),
        }
    }
}

/// The switch test: leaves expert j when its average since activation falls
/// below `targets[j] - B(τ)` at a multiple of H steps.
pub fn laff_observe_switch(ctrl: &mut LaffController) -> bool {
    if ctrl.j + 1 >= SCHEDULE.len() || !ctrl.tau.is_multiple_of(ctrl.epoch_len) {
        return false;
    }
    let mean = ctrl.r_tau / ctrl.tau as f64;
    if mean < ctrl.targets[ctrl.j] - ctrl.slack(ctrl.tau) {
        ctrl.activate_next();
        return true;
    }
    false
}

/// LAFF as a playing agent.
pub struct LaffAgent {
    pub ctrl: LaffController,
}

impl LaffAgent {
    pub fn new(game: &BimatrixGame, seat: Player, config: &MatchConfig) -> Result<Self, BargainError> {
        Ok(LaffAgent {
            ctrl: LaffController::new(game, seat, config)?,
        })
    }
}

impl Agent for LaffAgent {
    fn name(&self) -> String {
        "laff".into()
    }

    fn report_weight(&mut self, _t: usize) -> f64 {
        self.ctrl.weight()
    }

    fn act(&mut self, state: &HistoryState, _t: usize, rng: &mut AgentRng) -> usize {
        self.ctrl.act(state, rng)
    }

    fn observe(&mut self, step: &StepRecord) {
        self.ctrl.observe(step);
    }

    fn expert_index(&self) -> Option<usize> {
        Some(self.ctrl.active())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_match;
    use crate::games;
    use proptest::prelude::{prop_assert, proptest};

    fn cfg(horizon: usize, seed: u64) -> MatchConfig {
        MatchConfig {
            horizon,
            seed,
            ..MatchConfig::default()
        }
    }

    struct Fixed(usize);

    impl Agent for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn report_weight(&mut self, _t: usize) -> f64 {
            0.0
        }
        fn act(&mut self, _s: &HistoryState, _t: usize, _r: &mut AgentRng) -> usize {
            self.0
        }
        fn observe(&mut self, _s: &StepRecord) {}
    }

    #[test]
    fn chicken_targets() {
        let g = games::builtin("chicken").unwrap();
        let c = LaffController::new(&g, Player::One, &cfg(10_000, 0)).unwrap();
        let expect = [1.0, 1.0, 0.625, 0.625, 0.25];
        for (a, b) in c.targets.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(c.epoch_len, 100);
        assert_eq!(c.context().subepoch_len, 10);
        assert_eq!(c.active(), 1);
    }

    #[test]
    fn empty_region_collapses_targets() {
        let g = BimatrixGame::new("f", &[vec![0.5, 0.5]], &[vec![0.0, 1.0]]).unwrap();
        let config = MatchConfig {
            eps: 2.0,
            ..cfg(100, 0)
        };
        let c = LaffController::new(&g, Player::One, &config).unwrap();
        assert!(c.targets.iter().all(|&t| t == 0.5));
    }

    #[test]
    fn target_ordering_for_builtins() {
        for g in games::all() {
            for seat in [Player::One, Player::Two] {
                let c = LaffController::new(&g, seat, &cfg(1000, 0)).unwrap();
                assert!(
                    c.targets[0] >= c.targets[2] - 1e-9 && c.targets[2] >= c.targets[4] - 1e-9,
                    "{}",
                    g.name
                );
            }
        }
    }

    #[test]
    fn stays_on_first_expert_when_targets_are_met() {
        // A game where every cell pays player 1 the same: every test passes.
        let g = BimatrixGame::new(
            "flat",
            &[vec![0.6, 0.6], vec![0.6, 0.6]],
            &[vec![0.1, 0.9], vec![0.4, 0.2]],
        )
        .unwrap();
        let config = cfg(4000, 1);
        let mut laff = LaffAgent::new(&g, Player::One, &config).unwrap();
        let tr = run_match(&g, &mut laff, &mut Fixed(0), &config).unwrap();
        assert!(tr.experts1.unwrap().iter().all(|&e| e == 1));
    }

    #[test]
    fn switches_only_at_epoch_multiples() {
        let g = games::builtin("chicken").unwrap();
        for seed in 0..5 {
            let config = cfg(10_000, seed);
            let mut laff = LaffAgent::new(&g, Player::One, &config).unwrap();
            let tr = run_match(&g, &mut laff, &mut Fixed(1), &config).unwrap();
            let experts = tr.experts1.unwrap();
            for w in experts.windows(2) {
                assert!(w[1] >= w[0]);
            }
            let mut last = 0;
            for &s in &laff.ctrl.switch_times {
                assert_eq!((s - last) % laff.ctrl.epoch_len, 0);
                last = s;
            }
            assert!(laff.ctrl.switch_times.len() <= 5);
        }
    }

    #[test]
    fn partial_final_epoch_has_no_test() {
        // T = 150 gives H = 12; steps 145..150 form a partial epoch.
        let g = games::builtin("chicken").unwrap();
        let config = cfg(150, 0);
        let mut laff = LaffAgent::new(&g, Player::One, &config).unwrap();
        run_match(&g, &mut laff, &mut Fixed(1), &config).unwrap();
        assert!(laff.ctrl.switch_times.iter().all(|&s| s % 12 == 0 && s <= 144));
    }

    #[test]
    fn theoretical_slack_mode_runs() {
        let g = games::builtin("sym_inferior").unwrap();
        let mut config = cfg(2000, 0);
        config.tuning.slack = SlackMode::Theoretical { t0: 10.0, c2: 1.0 };
        let mut laff = LaffAgent::new(&g, Player::One, &config).unwrap();
        let b = laff.ctrl.slack(44);
        assert!(b.is_finite() && b > 0.0);
        run_match(&g, &mut laff, &mut Fixed(0), &config).unwrap();
    }

    proptest! {
        #[test]
        fn expert_index_never_decreases(seed in 0u64..40, a in 0usize..2) {
            let g = games::builtin("asym_second_best").unwrap();
            let config = cfg(3000, seed);
            let mut laff = LaffAgent::new(&g, Player::Two, &config).unwrap();
            let tr = run_match(&g, &mut Fixed(a), &mut laff, &config).unwrap();
            let e = tr.experts2.unwrap();
            prop_assert!(e.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(e.iter().all(|&x| (1..=6).contains(&x)));
        }
    }
}
