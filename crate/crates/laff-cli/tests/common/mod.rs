//! Independent oracles shared by the acceptance checks.

#![allow(dead_code)]

use std::collections::HashMap;

use laff::mdp::InducedMdp;
use laff::BimatrixGame;

#[derive(Clone, Copy, PartialEq)]
pub enum Goal {
    Egalitarian,
    Selfish,
}

fn r2_profit(game: &BimatrixGame, cells: &[(usize, usize)]) -> f64 {
    let mut r = f64::NEG_INFINITY;
    for &(a1, a2) in cells {
        for j in 0..game.n2() {
            if j != a2 {
                r = r.max(game.r2(a1, j) - game.r2(a1, a2));
            }
        }
    }
    r
}

/// Best objective over every pair of joint actions and every weight on a
/// 1e-4 grid that is ε-enforceable and individually rational. Falls back to
/// the security point when nothing qualifies.
pub fn grid_oracle(game: &BimatrixGame, k: usize, eps: f64, mu: (f64, f64), goal: Goal) -> f64 {
    let cells: Vec<(usize, usize)> = (0..game.n1())
        .flat_map(|i| (0..game.n2()).map(move |j| (i, j)))
        .collect();
    let k = k as f64;
    let objective = |u1: f64, u2: f64| match goal {
        Goal::Egalitarian => (u1 - mu.0).min(u2 - mu.1),
        Goal::Selfish => u1,
    };
    let mut best = objective(mu.0, mu.1);
    let tol = 1e-12;
    for (n, &p) in cells.iter().enumerate() {
        for &q in &cells[n..] {
            let support: Vec<(usize, usize)> = if p == q { vec![p] } else { vec![p, q] };
            let r = r2_profit(game, &support);
            let steps = if p == q { 0 } else { 10_000 };
            for s in 0..=steps {
                let a = if steps == 0 { 1.0 } else { s as f64 / steps as f64 };
                let u1 = a * game.r1(p.0, p.1) + (1.0 - a) * game.r1(q.0, q.1);
                let u2 = a * game.r2(p.0, p.1) + (1.0 - a) * game.r2(q.0, q.1);
                let enforceable = k * u2 >= k * mu.1 + r + eps - tol;
                let rational = u1 >= mu.0 - tol && u2 >= mu.1 - tol;
                if enforceable && rational {
                    best = best.max(objective(u1, u2));
                }
            }
        }
    }
    best
}

fn key(x: f64) -> i64 {
    (x * 1e10).round() as i64
}

/// Coarsest partition of the states that agrees on rewards and on
/// per-action transition mass into every block.
pub fn bisimulation(mdp: &InducedMdp) -> Vec<usize> {
    let n = mdp.n_states();
    let na = mdp.n_actions;
    let mut block: Vec<usize> = relabel(
        &(0..n)
            .map(|s| (0..na).map(|a| vec![key(mdp.reward(s, a))]).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    );
    loop {
        let sigs: Vec<Vec<Vec<i64>>> = (0..n)
            .map(|s| {
                let mut sig = vec![vec![block[s] as i64]];
                for a in 0..na {
                    let mut mass: HashMap<usize, f64> = HashMap::new();
                    for &(t, p) in mdp.successors(s, a) {
                        *mass.entry(block[t]).or_default() += p;
                    }
                    let mut row: Vec<(usize, i64)> = mass
                        .into_iter()
                        .map(|(b, p)| (b, key(p)))
                        .filter(|x| x.1 != 0)
                        .collect();
                    row.sort();
                    sig.push(row.into_iter().flat_map(|(b, p)| [b as i64, p]).collect());
                }
                sig
            })
            .collect();
        let next = relabel(&sigs);
        let done = next.iter().max() == block.iter().max();
        block = next;
        if done {
            return block;
        }
    }
}

fn relabel<T: std::hash::Hash + Eq + Clone>(sigs: &[T]) -> Vec<usize> {
    let mut ids: HashMap<T, usize> = HashMap::new();
    sigs.iter()
        .map(|s| {
            let len = ids.len();
            *ids.entry(s.clone()).or_insert(len)
        })
        .collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        for (l, &x) in a[i].iter().enumerate() {
            if x != 0.0 {
                for j in 0..n {
                    c[i][j] += x * b[l][j];
                }
            }
        }
    }
    c
}

/// Best gain from the initial distribution over all deterministic stationary
/// policies of the lumped MDP. Each policy's limiting matrix comes from
/// repeated squaring of its lazy chain. Returns (gain, number of blocks).
pub fn enumerated_gain(mdp: &InducedMdp) -> (f64, usize) {
    let block = bisimulation(mdp);
    let nb = block.iter().max().map_or(0, |m| m + 1);
    let na = mdp.n_actions;
    let mut rep = vec![usize::MAX; nb];
    for (s, &b) in block.iter().enumerate() {
        if rep[b] == usize::MAX {
            rep[b] = s;
        }
    }
    let mut p0 = vec![0.0; nb];
    for &(s, p) in &mdp.initial {
        p0[block[s]] += p;
    }
    let trans: Vec<Vec<Vec<f64>>> = (0..nb)
        .map(|b| {
            (0..na)
                .map(|a| {
                    let mut row = vec![0.0; nb];
                    for &(t, p) in mdp.successors(rep[b], a) {
                        row[block[t]] += p;
                    }
                    row
                })
                .collect()
        })
        .collect();
    assert!(na.pow(nb as u32) <= 1 << 16, "{nb} blocks is too many to enumerate");
    let mut best = f64::NEG_INFINITY;
    let mut choice = vec![0usize; nb];
    loop {
        let mut m: Vec<Vec<f64>> = (0..nb)
            .map(|b| {
                let mut row: Vec<f64> = trans[b][choice[b]].iter().map(|p| p / 2.0).collect();
                row[b] += 0.5;
                row
            })
            .collect();
        for _ in 0..60 {
            m = mat_mul(&m, &m);
            for row in &mut m {
                let total: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= total);
            }
        }
        let r: Vec<f64> = (0..nb).map(|b| mdp.reward(rep[b], choice[b])).collect();
        let gain: f64 = (0..nb)
            .map(|i| p0[i] * (0..nb).map(|j| m[i][j] * r[j]).sum::<f64>())
            .sum();
        best = best.max(gain);

        let mut pos = 0;
        loop {
            if pos == nb {
                return (best, nb);
            }
            choice[pos] += 1;
            if choice[pos] < na {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}
