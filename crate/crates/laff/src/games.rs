//! Built-in game library and game loading.

use std::path::Path;

use crate::matrix_game::{BimatrixGame, GameError};

type Cells = [[(f64, f64); 2]; 2];

const T3: f64 = 1.0 / 3.0;
const TT3: f64 = 2.0 / 3.0;

const BUILTINS: &[(&str, Cells)] = &[
    ("chicken", [[(0.5, 0.5), (0.25, 1.0)], [(1.0, 0.25), (0.0, 0.0)]]),
    ("sym_win_win", [[(1.0, 1.0), (0.0, TT3)], [(TT3, 0.0), (T3, T3)]]),
    (
        "asym_win_win",
        [[(1.0, 1.0), (0.0, 5.0 / 6.0)], [(T3, 0.0), (TT3, TT3)]],
    ),
    ("sym_biased", [[(T3, T3), (TT3, 1.0)], [(1.0, TT3), (0.0, 0.0)]]),
    ("asym_biased", [[(TT3, 0.0), (0.0, 1.0)], [(1.0, TT3), (T3, T3)]]),
    ("sym_second_best", [[(T3, T3), (0.0, 1.0)], [(1.0, 0.0), (TT3, TT3)]]),
    ("asym_second_best", [[(1.0, T3), (T3, 1.0)], [(0.0, 0.0), (TT3, TT3)]]),
    ("sym_unfair", [[(0.5, 0.5), (0.25, 1.0)], [(1.0, 0.25), (0.0, 0.0)]]),
    ("asym_unfair", [[(0.0, 1.0), (0.75, 0.75)], [(1.0, 0.25), (0.25, 0.0)]]),
    ("sym_inferior", [[(0.8, 0.8), (0.0, 1.0)], [(1.0, 0.0), (0.2, 0.2)]]),
    (
        "asym_inferior",
        [[(1.0, 0.75), (0.0, 1.0)], [(0.75, 0.0), (0.25, 0.25)]],
    ),
    ("cyclic", [[(0.0, 1.0), (0.75, 0.75)], [(1.0, 0.0), (0.25, 0.25)]]),
    (
        "train_inferior",
        [[(0.75, 0.75), (0.0, 1.0)], [(1.0, 0.0), (0.25, 0.25)]],
    ),
    (
        "train_unfair",
        [[(0.625, 0.625), (0.375, 1.0)], [(1.0, 0.375), (0.0, 0.0)]],
    ),
    (
        "train_coordination",
        [[(1.0, 0.5), (0.0, 0.0)], [(0.0, 0.0), (0.2, 1.0)]],
    ),
    ("train_asymmetric", [[(0.0, 1.0), (1.0, TT3)], [(T3, 0.0), (TT3, T3)]]),
];

/// The eleven evaluation games.
pub const TEST_GAMES: [&str; 11] = [
    "sym_win_win",
    "asym_win_win",
    "sym_biased",
    "asym_biased",
    "sym_second_best",
    "asym_second_best",
    "sym_unfair",
    "asym_unfair",
    "sym_inferior",
    "asym_inferior",
    "cyclic",
];

pub const TRAINING_GAMES: [&str; 4] = [
    "train_inferior",
    "train_unfair",
    "train_coordination",
    "train_asymmetric",
];

fn build(name: &str, cells: &Cells) -> BimatrixGame {
    let r1: Vec<Vec<f64>> = cells.iter().map(|row| row.iter().map(|c| c.0).collect()).collect();
    let r2: Vec<Vec<f64>> = cells.iter().map(|row| row.iter().map(|c| c.1).collect()).collect();
    BimatrixGame::new(name, &r1, &r2).expect("built-in games are valid")
}

pub fn builtin(name: &str) -> Result<BimatrixGame, GameError> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, c)| build(n, c))
        .ok_or_else(|| GameError::UnknownGame(name.to_string()))
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

/// All sixteen built-in games in library order.
pub fn all() -> Vec<BimatrixGame> {
    BUILTINS.iter().map(|(n, c)| build(n, c)).collect()
}

pub fn test_games() -> Vec<BimatrixGame> {
    TEST_GAMES.iter().map(|n| builtin(n).unwrap()).collect()
}

/// Resolves a built-in name, falling back to reading a JSON file.
pub fn load_game(name_or_path: &str) -> Result<BimatrixGame, GameError> {
    if let Ok(g) = builtin(name_or_path) {
        return Ok(g);
    }
    let path = Path::new(name_or_path);
    if !path.exists() {
        return Err(GameError::UnknownGame(name_or_path.to_string()));
    }
    let bytes = std::fs::read(path).map_err(|e| GameError::Malformed(format!("{}: {e}", path.display())))?;
    BimatrixGame::from_json(&bytes)
}
