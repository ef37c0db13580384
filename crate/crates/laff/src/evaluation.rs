//! Regret benchmarks, the round-robin learning game, pure equilibria of that
//! game and replicator dynamics over it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bargaining::BargainError;
use crate::engine::{run_match, EngineError, MatchConfig, MatchTrace};
use crate::experts::ExpertContext;
use crate::matrix_game::{security_value, BimatrixGame, Player};
use crate::mdp::{mu_star, MdpError};
use crate::opponents::{OpponentError, OpponentSpec};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EvalError {
    #[error("'{0}' is not a Bounded Memory opponent")]
    NotBoundedMemory(String),
    #[error("replicator step produced negative mass {mass} for algorithm {index}")]
    NegativeMass { index: usize, mass: f64 },
    #[error("population is not a distribution: {0}")]
    NotOnSimplex(String),
    #[error("matrix shape mismatch: {0}")]
    Shape(String),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Bargain(#[from] BargainError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Opponent(#[from] OpponentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// What player 1's regret is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum OpponentClass {
    BoundedMemory(OpponentSpec),
    Adversarial,
    FollowerConditional,
    FollowerUnconditional,
}

impl OpponentClass {
    /// The class each zoo member is scored under.
    pub fn of(spec: &OpponentSpec) -> OpponentClass {
        match spec {
            OpponentSpec::EpsGreedyQ { .. } | OpponentSpec::FictitiousPlay => OpponentClass::FollowerUnconditional,
            OpponentSpec::Laff => OpponentClass::FollowerConditional,
            OpponentSpec::Manipulator { .. } => OpponentClass::Adversarial,
            other => OpponentClass::BoundedMemory(other.clone()),
        }
    }
}

/// Player 1's benchmark μ(𝔅) against the class.
pub fn benchmark_for(game: &BimatrixGame, class: &OpponentClass, config: &MatchConfig) -> Result<f64, EvalError> {
    Ok(match class {
        OpponentClass::Adversarial => security_value(game, Player::One).0,
        OpponentClass::FollowerConditional => ExpertContext::new(game, Player::One, config)?.ebs.u1,
        OpponentClass::FollowerUnconditional => ExpertContext::new(game, Player::One, config)?.bully.u1,
        OpponentClass::BoundedMemory(spec) => {
            let policy = spec
                .bounded_memory(game, Player::Two, config)?
                .ok_or_else(|| EvalError::NotBoundedMemory(spec.label()))?;
            mu_star(game, &policy, config.k)?
        }
    })
}

/// Cumulative regret `t·μ − Σ_{s≤t} r_s`; entry `i` is step `t = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub benchmark: f64,
    pub cumulative: Vec<f64>,
}

impl RegretCurve {
    pub fn from_rewards(benchmark: f64, rewards: impl IntoIterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = rewards
            .into_iter()
            .map(|r| {
                acc += benchmark - r;
                acc
            })
            .collect();
        RegretCurve { benchmark, cumulative }
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }

    /// Average regret R(t)/t for `t` from 1.
    pub fn average_at(&self, t: usize) -> f64 {
        self.cumulative[t - 1] / t as f64
    }

    pub fn averages(&self) -> Vec<f64> {
        (1..=self.len()).map(|t| self.average_at(t)).collect()
    }

    /// Least-squares slope of the cumulative curve over its second half.
    pub fn second_half_slope(&self) -> f64 {
        let half = self.len() / 2;
        least_squares_slope(&self.cumulative[half..])
    }
}

/// Slope of the least-squares line through `(i, ys[i])`.
pub fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let mx = (n - 1) as f64 / 2.0;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Player 1's regret against `benchmark`.
pub fn regret_curve(trace: &MatchTrace, benchmark: f64) -> RegretCurve {
    RegretCurve::from_rewards(benchmark, trace.records.iter().map(|r| r.r1))
}

/// Player 2's regret with respect to `mu_e2 + c`.
pub fn exploiter_regret(trace: &MatchTrace, mu_e2: f64, c: f64) -> RegretCurve {
    RegretCurve::from_rewards(mu_e2 + c, trace.records.iter().map(|r| r.r2))
}

/// Mean rewards of every ordered algorithm pair: row algorithm in seat 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningGameMatrix {
    pub labels: Vec<String>,
    m1: Vec<f64>,
    m2: Vec<f64>,
}

impl LearningGameMatrix {
    pub fn new(labels: Vec<String>, m1: Vec<Vec<f64>>, m2: Vec<Vec<f64>>) -> Result<Self, EvalError> {
        let j = labels.len();
        let ok = |m: &Vec<Vec<f64>>| m.len() == j && m.iter().all(|r| r.len() == j);
        if !ok(&m1) || !ok(&m2) {
            return Err(EvalError::Shape(format!("expected {j}×{j} matrices")));
        }
        Ok(LearningGameMatrix {
            labels,
            m1: m1.concat(),
            m2: m2.concat(),
        })
    }

    pub fn zeros(labels: Vec<String>) -> Self {
        let j = labels.len();
        LearningGameMatrix {
            labels,
            m1: vec![0.0; j * j],
            m2: vec![0.0; j * j],
        }
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn m1(&self, i: usize, j: usize) -> f64 {
        self.m1[i * self.size() + j]
    }

    pub fn m2(&self, i: usize, j: usize) -> f64 {
        self.m2[i * self.size() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, m1: f64, m2: f64) {
        let n = self.size();
        self.m1[i * n + j] = m1;
        self.m2[i * n + j] = m2;
    }

    /// Reward of algorithm `i` against `j`, the worse of its two seats.
    pub fn role_min(&self, i: usize, j: usize) -> f64 {
        self.m1(i, j).min(self.m2(j, i))
    }

    /// Element-wise mean of same-shaped matrices.
    pub fn mean(items: &[LearningGameMatrix]) -> Result<LearningGameMatrix, EvalError> {
        let first = items
            .first()
            .ok_or_else(|| EvalError::Shape("no matrices to average".into()))?;
        let mut out = LearningGameMatrix::zeros(first.labels.clone());
        for m in items {
            if m.labels.len() != out.labels.len() {
                return Err(EvalError::Shape("matrices of different sizes".into()));
            }
            for (a, b) in out.m1.iter_mut().zip(&m.m1) {
                *a += b / items.len() as f64;
            }
            for (a, b) in out.m2.iter_mut().zip(&m.m2) {
                *a += b / items.len() as f64;
            }
        }
        Ok(out)
    }
}

/// Cells where neither player gains by switching algorithm (ties count).
pub fn pure_nash(m: &LearningGameMatrix) -> Vec<(usize, usize)> {
    let n = m.size();
    let mut cells = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let row_best = (0..n).all(|k| m.m1(i, j) >= m.m1(k, j) - 1e-12);
            let col_best = (0..n).all(|k| m.m2(i, j) >= m.m2(i, k) - 1e-12);
            if row_best && col_best {
                cells.push((i, j));
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationState {
    pub p: Vec<f64>,
}

impl PopulationState {
    pub fn new(p: Vec<f64>) -> Result<Self, EvalError> {
        if p.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(EvalError::NotOnSimplex("negative or non-finite share".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(EvalError::NotOnSimplex(format!("shares sum to {s}")));
        }
        Ok(PopulationState { p })
    }

    pub fn uniform(n: usize) -> Self {
        PopulationState {
            p: vec![1.0 / n as f64; n],
        }
    }

    /// Uniform draw from the simplex.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let s: f64 = e.iter().sum();
        PopulationState {
            p: e.into_iter().map(|x| x / s).collect(),
        }
    }
}

/// Fitness of each algorithm: per-game role-minimum rewards averaged over
/// games, against the population.
pub fn fitness(p: &PopulationState, tensors: &[LearningGameMatrix]) -> Result<Vec<f64>, EvalError> {
    let n = p.p.len();
    if tensors.is_empty() || tensors.iter().any(|t| t.size() != n) {
        return Err(EvalError::Shape(format!("need per-game {n}×{n} matrices")));
    }
    let g = tensors.len() as f64;
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| tensors.iter().map(|t| t.role_min(i, j)).sum::<f64>() / g * p.p[j])
                .sum()
        })
        .collect())
}

/// One generation: `p ⊙ ((1 − f̄)·1 + f)` with f̄ the unweighted mean
/// fitness, renormalized onto the simplex.
pub fn replicator_step(p: &PopulationState, tensors: &[LearningGameMatrix]) -> Result<PopulationState, EvalError> {
    let f = fitness(p, tensors)?;
    let fbar = f.iter().sum::<f64>() / f.len() as f64;
    let mut next: Vec<f64> = p.p.iter().zip(&f).map(|(pi, fi)| pi * (1.0 - fbar + fi)).collect();
    if let Some((index, &mass)) = next.iter().enumerate().find(|(_, &m)| m < 0.0) {
        return Err(EvalError::NegativeMass { index, mass });
    }
    let total: f64 = next.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(EvalError::NotOnSimplex("population vanished".into()));
    }
    next.iter_mut().for_each(|x| *x /= total);
    Ok(PopulationState { p: next })
}

/// Runs `generations` steps and returns every state, the start included.
pub fn replicator_run(
    start: PopulationState,
    tensors: &[LearningGameMatrix],
    generations: usize,
) -> Result<Vec<PopulationState>, EvalError> {
    let mut out = Vec::with_capacity(generations + 1);
    out.push(start);
    for _ in 0..generations {
        let next = replicator_step(out.last().unwrap(), tensors)?;
        out.push(next);
    }
    Ok(out)
}

/// One match of a tournament.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub game: String,
    pub trial: usize,
    pub i: usize,
    pub j: usize,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Debug, Clone)]
pub struct Tournament {
    pub labels: Vec<String>,
    pub games: Vec<String>,
    pub trials: usize,
    /// Every ordered pair, game and trial, mirrored cells included.
    pub results: Vec<TrialResult>,
}

impl Tournament {
    /// Learning-game matrix of one game and one trial.
    pub fn matrix_for(&self, game: &str, trial: usize) -> LearningGameMatrix {
        let mut m = LearningGameMatrix::zeros(self.labels.clone());
        for r in self.results.iter().filter(|r| r.game == game && r.trial == trial) {
            m.set(r.i, r.j, r.m1, r.m2);
        }
        m
    }

    /// Per-game matrices averaged over trials.
    pub fn per_game(&self) -> Vec<LearningGameMatrix> {
        self.games
            .iter()
            .map(|g| {
                let per_trial: Vec<_> = (0..self.trials).map(|t| self.matrix_for(g, t)).collect();
                LearningGameMatrix::mean(&per_trial).expect("at least one trial")
            })
            .collect()
    }

    /// Matrix averaged over games and trials.
    pub fn learning_game(&self) -> LearningGameMatrix {
        LearningGameMatrix::mean(&self.per_game()).expect("at least one game")
    }

    /// Rebuilds a tournament from stored results.
    pub fn from_results(labels: Vec<String>, results: Vec<TrialResult>) -> Result<Self, EvalError> {
        let mut games: Vec<String> = Vec::new();
        for r in &results {
            if !games.contains(&r.game) {
                games.push(r.game.clone());
            }
            if r.i >= labels.len() || r.j >= labels.len() {
                return Err(EvalError::Shape(format!(
                    "pair ({}, {}) outside {} algorithms",
                    r.i,
                    r.j,
                    labels.len()
                )));
            }
        }
        let trials = results.iter().map(|r| r.trial + 1).max().unwrap_or(0);
        let n = labels.len();
        for g in &games {
            for t in 0..trials {
                let cells = results.iter().filter(|r| &r.game == g && r.trial == t).count();
                if cells != n * n {
                    return Err(EvalError::Shape(format!(
                        "game {g} trial {t} has {cells} of {} cells",
                        n * n
                    )));
                }
            }
        }
        if games.is_empty() {
            return Err(EvalError::Shape("no results".into()));
        }
        Ok(Tournament {
            labels,
            games,
            trials,
            results,
        })
    }
}

/// SplitMix64 finalizer, used to derive independent per-match seeds.
pub fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn match_seed(seed: u64, game: usize, trial: usize, i: usize, j: usize) -> u64 {
    [game, trial, i, j]
        .iter()
        .fold(splitmix(seed), |acc, &v| splitmix(acc ^ v as u64))
}

pub fn play(
    game: &BimatrixGame,
    a: &OpponentSpec,
    b: &OpponentSpec,
    config: &MatchConfig,
) -> Result<MatchTrace, EvalError> {
    let mut x = a.build(game, Player::One, config)?;
    let mut y = b.build(game, Player::Two, config)?;
    Ok(run_match(game, x.as_mut(), y.as_mut(), config)?)
}

/// All ordered pairs of `algorithms` on every game for `trials` trials. On
/// symmetric games only `i ≤ j` is played and the reverse is copied.
/// `jobs` caps concurrent matches (0 uses every core).
pub fn round_robin(
    algorithms: &[OpponentSpec],
    games: &[BimatrixGame],
    trials: usize,
    config: &MatchConfig,
    jobs: usize,
) -> Result<Tournament, EvalError> {
    let n = algorithms.len();
    let mut tasks = Vec::new();
    for (g, game) in games.iter().enumerate() {
        for trial in 0..trials {
            for i in 0..n {
                for j in 0..n {
                    if game.is_symmetric() && j < i {
                        continue;
                    }
                    tasks.push((g, trial, i, j));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let played: Vec<Result<TrialResult, EvalError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(g, trial, i, j)| {
                let cfg = config.with_seed(match_seed(config.seed, g, trial, i, j));
                let trace = play(&games[g], &algorithms[i], &algorithms[j], &cfg)?;
                let (m1, m2) = trace.mean_rewards();
                Ok(TrialResult {
                    game: games[g].name.clone(),
                    trial,
                    i,
                    j,
                    m1,
                    m2,
                })
            })
            .collect()
    });
    let mut results = Vec::with_capacity(games.len() * trials * n * n);
    for r in played {
        let r = r?;
        let mirror = games
            .iter()
            .find(|g| g.name == r.game)
            .map(|g| g.is_symmetric())
            .unwrap_or(false)
            && r.i != r.j;
        if mirror {
            results.push(TrialResult {
                i: r.j,
                j: r.i,
                m1: r.m2,
                m2: r.m1,
                ..r.clone()
            });
        }
        results.push(r);
    }
    results.sort_by(|a, b| {
        let ga = games.iter().position(|g| g.name == a.game);
        let gb = games.iter().position(|g| g.name == b.game);
        (ga, a.trial, a.i, a.j).cmp(&(gb, b.trial, b.i, b.j))
    });
    Ok(Tournament {
        labels: algorithms.iter().map(|a| a.label()).collect(),
        games: games.iter().map(|g| g.name.clone()).collect(),
        trials,
        results,
    })
}

/// Replicator runs from the uniform population. Every generation draws,
/// with replacement, one trial's matrix per game.
pub fn replicator_ensemble(
    tournament: &Tournament,
    runs: usize,
    generations: usize,
    seed: u64,
) -> Result<Vec<Vec<PopulationState>>, EvalError> {
    let n = tournament.labels.len();
    let per_trial: Vec<Vec<LearningGameMatrix>> = tournament
        .games
        .iter()
        .map(|g| (0..tournament.trials).map(|t| tournament.matrix_for(g, t)).collect())
        .collect();
    (0..runs)
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(run as u64)));
            let mut out = Vec::with_capacity(generations + 1);
            out.push(PopulationState::uniform(n));
            for _ in 0..generations {
                let tensors: Vec<LearningGameMatrix> = per_trial
                    .iter()
                    .map(|trials| trials[rng.gen_range(0..trials.len())].clone())
                    .collect();
                let next = replicator_step(out.last().unwrap(), &tensors)?;
                out.push(next);
            }
            Ok(out)
        })
        .collect()
}
