//! Bimatrix games and their zero-sum kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GameError {
    #[error("game needs at least one action per player")]
    EmptyMatrix,
    #[error("{matrix} has ragged rows")]
    Ragged { matrix: &'static str },
    #[error("R1 is {0}x{1} but R2 is {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("{matrix}[{row}][{col}] = {value} is outside [0,1]")]
    OutOfRange {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("malformed game file: {0}")]
    Malformed(String),
    #[error("unknown game '{0}'")]
    UnknownGame(String),
    #[error("strategy has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid mixed strategy: {0}")]
    InvalidStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// Two-player stage game with rewards in [0,1]. Matrices are row-major
/// `n1 × n2`, rows indexed by player 1's action.
#[derive(Debug, Clone, PartialEq)]
pub struct BimatrixGame {
    pub name: String,
    n1: usize,
    n2: usize,
    r1: Vec<f64>,
    r2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GameFile {
    name: String,
    #[serde(rename = "R1")]
    r1: Vec<Vec<f64>>,
    #[serde(rename = "R2")]
    r2: Vec<Vec<f64>>,
}

fn flatten(m: &[Vec<f64>], label: &'static str) -> Result<(usize, usize, Vec<f64>), GameError> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(GameError::EmptyMatrix);
    }
    if m.iter().any(|r| r.len() != cols) {
        return Err(GameError::Ragged { matrix: label });
    }
    let mut flat = Vec::with_capacity(rows * cols);
    for (i, row) in m.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(GameError::OutOfRange {
                    matrix: label,
                    row: i,
                    col: j,
                    value: v,
                });
            }
            flat.push(v);
        }
    }
    Ok((rows, cols, flat))
}

impl BimatrixGame {
    pub fn new(name: impl Into<String>, r1: &[Vec<f64>], r2: &[Vec<f64>]) -> Result<Self, GameError> {
        let (n1, n2, f1) = flatten(r1, "R1")?;
        let (m1, m2, f2) = flatten(r2, "R2")?;
        if (n1, n2) != (m1, m2) {
            return Err(GameError::ShapeMismatch(n1, n2, m1, m2));
        }
        Ok(BimatrixGame {
            name: name.into(),
            n1,
            n2,
            r1: f1,
            r2: f2,
        })
    }

    /// Parses the `{name, R1, R2}` JSON format.
    pub fn from_json(bytes: &[u8]) -> Result<Self, GameError> {
        let file: GameFile = serde_json::from_slice(bytes).map_err(|e| GameError::Malformed(e.to_string()))?;
        BimatrixGame::new(file.name, &file.r1, &file.r2)
    }

    pub fn to_json(&self) -> String {
        let file = GameFile {
            name: self.name.clone(),
            r1: self.matrix(Player::One),
            r2: self.matrix(Player::Two),
        };
        serde_json::to_string_pretty(&file).expect("game serializes")
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn actions(&self, p: Player) -> usize {
        match p {
            Player::One => self.n1,
            Player::Two => self.n2,
        }
    }

    #[inline]
    pub fn r1(&self, a1: usize, a2: usize) -> f64 {
        self.r1[a1 * self.n2 + a2]
    }

    #[inline]
    pub fn r2(&self, a1: usize, a2: usize) -> f64 {
        self.r2[a1 * self.n2 + a2]
    }

    #[inline]
    pub fn reward(&self, p: Player, a1: usize, a2: usize) -> f64 {
        match p {
            Player::One => self.r1(a1, a2),
            Player::Two => self.r2(a1, a2),
        }
    }

    pub fn matrix(&self, p: Player) -> Vec<Vec<f64>> {
        (0..self.n1)
            .map(|i| (0..self.n2).map(|j| self.reward(p, i, j)).collect())
            .collect()
    }

    /// The same game with the players' roles exchanged: the returned game's
    /// player 1 is this game's player 2.
    pub fn swap_roles(&self) -> BimatrixGame {
        let mut r1 = Vec::with_capacity(self.r1.len());
        let mut r2 = Vec::with_capacity(self.r2.len());
        for j in 0..self.n2 {
            for i in 0..self.n1 {
                r1.push(self.r2(i, j));
                r2.push(self.r1(i, j));
            }
        }
        BimatrixGame {
            name: self.name.clone(),
            n1: self.n2,
            n2: self.n1,
            r1,
            r2,
        }
    }

    /// The game viewed from `seat`: identity for player 1, role swap for player 2.
    pub fn view_from(&self, seat: Player) -> BimatrixGame {
        match seat {
            Player::One => self.clone(),
            Player::Two => self.swap_roles(),
        }
    }

    /// True when swapping players and actions leaves the game unchanged.
    pub fn is_symmetric(&self) -> bool {
        self.n1 == self.n2 && (0..self.n1).all(|i| (0..self.n2).all(|j| (self.r2(i, j) - self.r1(j, i)).abs() < 1e-12))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, GameError> {
        if probs.is_empty() {
            return Err(GameError::InvalidStrategy("no actions".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(GameError::InvalidStrategy("negative or non-finite entry".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(GameError::InvalidStrategy(format!("sums to {s}")));
        }
        Ok(MixedStrategy { probs })
    }

    pub fn pure(n: usize, a: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[a] = 1.0;
        MixedStrategy { probs }
    }

    pub fn uniform(n: usize) -> Self {
        MixedStrategy {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Draws an action; a pure strategy consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let Some(a) = self.probs.iter().position(|&p| p >= 1.0) {
            return a;
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (a, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Maximin value of `player`'s own reward matrix and an optimal strategy.
pub fn security_value(game: &BimatrixGame, player: Player) -> (f64, MixedStrategy) {
    let view = game.view_from(player);
    let (m, n) = (view.n1, view.n2);
    if m == 1 {
        let v = (0..n).map(|j| view.r1(0, j)).fold(f64::INFINITY, f64::min);
        return (v, MixedStrategy::pure(1, 0));
    }
    if n == 1 {
        let best = argmax_first((0..m).map(|i| view.r1(i, 0)));
        return (view.r1(best, 0), MixedStrategy::pure(m, best));
    }
    let sol = lp::solve_zero_sum(m, n, &view.r1);
    (
        sol.value,
        MixedStrategy {
            probs: sol.row_strategy,
        },
    )
}

/// Player 1's strategy minimizing player 2's best-response reward, with that
/// reward. By minimax duality the value equals player 2's security value.
pub fn punishment_strategy(game: &BimatrixGame) -> (f64, MixedStrategy) {
    let (m, n) = (game.n1, game.n2);
    if m == 1 {
        let v = (0..n).map(|j| game.r2(0, j)).fold(f64::NEG_INFINITY, f64::max);
        return (v, MixedStrategy::pure(1, 0));
    }
    if n == 1 {
        let best = argmax_first((0..m).map(|i| -game.r2(i, 0)));
        return (game.r2(best, 0), MixedStrategy::pure(m, best));
    }
    let neg: Vec<f64> = game.r2.iter().map(|v| -v).collect();
    let sol = lp::solve_zero_sum(m, n, &neg);
    (
        -sol.value,
        MixedStrategy {
            probs: sol.row_strategy,
        },
    )
}

/// `s1ᵀ R^(player) s2`.
pub fn expected_reward(
    game: &BimatrixGame,
    s1: &MixedStrategy,
    s2: &MixedStrategy,
    player: Player,
) -> Result<f64, GameError> {
    if s1.len() != game.n1 {
        return Err(GameError::DimensionMismatch {
            expected: game.n1,
            got: s1.len(),
        });
    }
    if s2.len() != game.n2 {
        return Err(GameError::DimensionMismatch {
            expected: game.n2,
            got: s2.len(),
        });
    }
    let mut acc = 0.0;
    for (i, p) in s1.probs.iter().enumerate() {
        for (j, q) in s2.probs.iter().enumerate() {
            acc += p * q * game.reward(player, i, j);
        }
    }
    Ok(acc)
}

pub(crate) fn argmax_first<I: IntoIterator<Item = f64>>(it: I) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in it.into_iter().enumerate() {
        if v > best_v + 1e-12 {
            best = i;
            best_v = v;
        }
    }
    best
}
