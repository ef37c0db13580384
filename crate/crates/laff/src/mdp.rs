//! The MDP a Bounded Memory opponent induces on player 1, and its
//! optimal average reward.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::engine::HistoryState;
use crate::matrix_game::{argmax_first, BimatrixGame};
use crate::opponents::BoundedPolicy;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MdpError {
    #[error("opponent policy returned an invalid distribution in state {state}: {reason}")]
    InvalidPolicy { state: usize, reason: String },
    #[error("signal weight {0} outside [0,1]")]
    BadWeight(f64),
    #[error("K must be at least 1")]
    ZeroMemory,
    #[error("value iteration did not converge within {sweeps} sweeps (last span {span:e})")]
    NoConvergence { sweeps: usize, span: f64 },
    #[error("policy has {got} entries, MDP has {expected} states")]
    PolicyShape { got: usize, expected: usize },
}

pub const TOLERANCE: f64 = 1e-8;
pub const MAX_SWEEPS: usize = 1_000_000;

/// Finite MDP over the history states reachable from the start of a match.
#[derive(Debug, Clone)]
pub struct InducedMdp {
    pub k: usize,
    pub n_actions: usize,
    states: Vec<HistoryState>,
    /// Sparse successor lists indexed by `s * n_actions + a`.
    transitions: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    opp_reward: Vec<f64>,
    /// Distribution over the states play can start in.
    pub initial: Vec<(usize, f64)>,
}

impl InducedMdp {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, s: usize) -> &HistoryState {
        &self.states[s]
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Expected player-1 reward of action `a` in state `s`.
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn opp_reward(&self, s: usize, a: usize) -> f64 {
        self.opp_reward[s * self.n_actions + a]
    }

    /// Index of the anchor state: all actions 0, all signal bits 0.
    pub fn anchor(&self) -> usize {
        self.initial
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|x| x.0)
            .unwrap_or(0)
    }
}

/// Probabilities of the four joint signal outcomes (y1, y2) from one shared
/// uniform draw: (1,1), (1,0), (0,1), (0,0).
pub fn joint_bits(w1: f64, w2: f64) -> [((bool, bool), f64); 4] {
    [
        ((true, true), w1.min(w2)),
        ((true, false), (w1 - w2).max(0.0)),
        ((false, true), (w2 - w1).max(0.0)),
        ((false, false), 1.0 - w1.max(w2)),
    ]
}

/// Builds the MDP induced by `opp_policy`, which maps a state (seen from
/// player 1) to a distribution over player 2's actions.
pub fn induce_mdp(
    game: &BimatrixGame,
    opp_policy: &dyn Fn(&HistoryState) -> Vec<f64>,
    w1: f64,
    w2: f64,
    k: usize,
) -> Result<InducedMdp, MdpError> {
    for w in [w1, w2] {
        if !(0.0..=1.0).contains(&w) {
            return Err(MdpError::BadWeight(w));
        }
    }
    if k == 0 {
        return Err(MdpError::ZeroMemory);
    }
    let (n1, n2) = (game.n1(), game.n2());
    let bits: Vec<_> = joint_bits(w1, w2).into_iter().filter(|b| b.1 > 0.0).collect();

    // All actions 0 and K+1 independent joint signal draws.
    let mut initial: HashMap<HistoryState, f64> = HashMap::new();
    initial.insert(HistoryState::initial(k), 1.0);
    for _ in 0..=k {
        let mut next = HashMap::new();
        for (s, p) in &initial {
            for &((y1, y2), q) in &bits {
                let mut t = s.clone();
                t.push_signals(y1, y2);
                *next.entry(t).or_insert(0.0) += p * q;
            }
        }
        initial = next;
    }

    let mut index: HashMap<HistoryState, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    let mut init_sorted: Vec<_> = initial.into_iter().collect();
    init_sorted.sort_by_key(|(s, _)| s.index(n1, n2));
    let mut init = Vec::new();
    for (s, p) in init_sorted {
        let i = states.len();
        index.insert(s.clone(), i);
        states.push(s.clone());
        queue.push_back(i);
        init.push((i, p));
    }

    let mut transitions = Vec::new();
    let mut reward = Vec::new();
    let mut opp_reward = Vec::new();
    while let Some(i) = queue.pop_front() {
        let s = states[i].clone();
        let pi = opp_policy(&s);
        validate(&pi, n2, s.index(n1, n2))?;
        debug_assert_eq!(transitions.len(), i * n1);
        for a in 0..n1 {
            let mut succ: Vec<(usize, f64)> = Vec::new();
            let (mut r1, mut r2) = (0.0, 0.0);
            for (a2, &p2) in pi.iter().enumerate() {
                if p2 == 0.0 {
                    continue;
                }
                r1 += p2 * game.r1(a, a2);
                r2 += p2 * game.r2(a, a2);
                for &((y1, y2), q) in &bits {
                    let mut t = s.clone();
                    t.push_actions(a, a2);
                    t.push_signals(y1, y2);
                    let j = match index.get(&t) {
                        Some(&j) => j,
                        None => {
                            let j = states.len();
                            index.insert(t.clone(), j);
                            states.push(t);
                            queue.push_back(j);
                            j
                        }
                    };
                    match succ.iter_mut().find(|e| e.0 == j) {
                        Some(e) => e.1 += p2 * q,
                        None => succ.push((j, p2 * q)),
                    }
                }
            }
            succ.sort_by_key(|e| e.0);
            transitions.push(succ);
            reward.push(r1);
            opp_reward.push(r2);
        }
    }
    Ok(InducedMdp {
        k,
        n_actions: n1,
        states,
        transitions,
        reward,
        opp_reward,
        initial: init,
    })
}

fn validate(pi: &[f64], n2: usize, state: usize) -> Result<(), MdpError> {
    let bad = |reason: String| Err(MdpError::InvalidPolicy { state, reason });
    if pi.len() != n2 {
        return bad(format!("{} entries for {n2} actions", pi.len()));
    }
    if pi.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return bad("negative or non-finite entry".into());
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return bad(format!("entries sum to {sum}"));
    }
    Ok(())
}

/// The MDP induced by a Bounded Memory opponent sitting in seat 2.
pub fn induce_against(
    game: &BimatrixGame,
    opponent: &BoundedPolicy,
    w1: f64,
    k: usize,
) -> Result<InducedMdp, MdpError> {
    induce_mdp(
        game,
        &|s: &HistoryState| opponent.distribution(&s.swapped()),
        w1,
        opponent.weight(),
        k,
    )
}

/// Optimal gain and a gain-optimal deterministic policy.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    /// Gain from the initial state distribution.
    pub mu_star: f64,
    /// Per-state gain (constant on communicating MDPs).
    pub gains: Vec<f64>,
    pub policy: Vec<usize>,
    pub sweeps: usize,
}

/// Relative value iteration on the aperiodic transform (P + I)/2, anchored
/// at the initial state. Stops when the span of successive differences
/// falls below 1e-8, or, for multichain MDPs, when each state's difference
/// has settled.
pub fn optimal_average_reward(mdp: &InducedMdp) -> Result<OptimalSolution, MdpError> {
    let n = mdp.n_states();
    let na = mdp.n_actions;
    let anchor = mdp.anchor();
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut diff = vec![0.0; n];
    let mut prev_diff = vec![f64::NAN; n];
    let mut span = f64::INFINITY;
    let mut prev_drift = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = (0..na)
                .map(|a| q_value(mdp, &h, s, a))
                .fold(f64::NEG_INFINITY, f64::max);
        }
        let (mut lo, mut hi, mut drift) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for s in 0..n {
            diff[s] = next[s] - h[s];
            lo = lo.min(diff[s]);
            hi = hi.max(diff[s]);
            drift = drift.max((diff[s] - prev_diff[s]).abs());
        }
        span = hi - lo;
        let offset = next[anchor];
        for s in 0..n {
            h[s] = next[s] - offset;
        }
        // Multichain MDPs never close the span; accept once the geometric
        // tail of the per-state differences is below tolerance.
        let ratio = drift / prev_drift;
        let settled = sweep > 2 && (drift == 0.0 || (ratio < 1.0 && drift * ratio / (1.0 - ratio) < TOLERANCE * 1e-2));
        if span < TOLERANCE || settled {
            let policy = (0..n).map(|s| greedy(mdp, &h, s)).collect();
            let gains = diff.clone();
            let mu_star = mdp.initial.iter().map(|&(s, p)| p * gains[s]).sum();
            return Ok(OptimalSolution {
                mu_star,
                gains,
                policy,
                sweeps: sweep,
            });
        }
        prev_diff.copy_from_slice(&diff);
        if sweep > 1 {
            prev_drift = drift;
        }
    }
    Err(MdpError::NoConvergence {
        sweeps: MAX_SWEEPS,
        span,
    })
}

fn q_value(mdp: &InducedMdp, h: &[f64], s: usize, a: usize) -> f64 {
    let ev: f64 = mdp.successors(s, a).iter().map(|&(j, p)| p * h[j]).sum();
    mdp.reward(s, a) + 0.5 * (h[s] + ev)
}

fn greedy(mdp: &InducedMdp, h: &[f64], s: usize) -> usize {
    let vals: Vec<f64> = (0..mdp.n_actions).map(|a| q_value(mdp, h, s, a)).collect();
    let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Snap near-ties so the lowest index wins.
    argmax_first(vals.iter().map(|&v| if best - v < 1e-9 { best } else { v }))
}

/// Long-run average rewards (player 1, player 2) of a deterministic
/// policy, started from the initial distribution.
pub fn policy_average_rewards(mdp: &InducedMdp, policy: &[usize]) -> Result<(f64, f64), MdpError> {
    let n = mdp.n_states();
    if policy.len() != n {
        return Err(MdpError::PolicyShape {
            got: policy.len(),
            expected: n,
        });
    }
    let mut d = vec![0.0; n];
    for &(s, p) in &mdp.initial {
        d[s] += p;
    }
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            if d[s] == 0.0 {
                continue;
            }
            next[s] += 0.5 * d[s];
            for &(j, p) in mdp.successors(s, policy[s]) {
                next[j] += 0.5 * d[s] * p;
            }
        }
        change = d.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut d, &mut next);
        if change < 1e-13 {
            let g1 = (0..n).map(|s| d[s] * mdp.reward(s, policy[s])).sum();
            let g2 = (0..n).map(|s| d[s] * mdp.opp_reward(s, policy[s])).sum();
            return Ok((g1, g2));
        }
    }
    Err(MdpError::NoConvergence {
        sweeps: MAX_SWEEPS,
        span: change,
    })
}

pub fn policy_average_reward(mdp: &InducedMdp, policy: &[usize]) -> Result<f64, MdpError> {
    policy_average_rewards(mdp, policy).map(|r| r.0)
}

/// μ* of player 1 against a Bounded Memory opponent in seat 2.
pub fn mu_star(game: &BimatrixGame, opponent: &BoundedPolicy, k: usize) -> Result<f64, MdpError> {
    let mdp = induce_against(game, opponent, 0.0, k)?;
    optimal_average_reward(&mdp).map(|s| s.mu_star)
}
