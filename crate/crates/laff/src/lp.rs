//! Dense simplex for matrix games.
//!
//! Only the zero-sum use case is needed: the row player maximizes
//! min_j (pᵀM)_j. The matrix is shifted to be strictly positive and the
//! column player's LP `max 1ᵀy s.t. My ≤ 1, y ≥ 0` is solved from the slack
//! basis with Bland's rule. The row player's strategy is read off the final
//! objective row (the duals of the slack columns).

const PIVOT_EPS: f64 = 1e-12;

/// Solution of a zero-sum matrix game from the row player's point of view.
#[derive(Debug, Clone)]
pub struct ZeroSumSolution {
    pub value: f64,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
}

/// Solves `max_p min_q pᵀ M q` for a row-major `m × n` matrix.
pub fn solve_zero_sum(m: usize, n: usize, mat: &[f64]) -> ZeroSumSolution {
    assert_eq!(mat.len(), m * n, "matrix size mismatch");
    assert!(m > 0 && n > 0, "empty matrix");

    let min = mat.iter().cloned().fold(f64::INFINITY, f64::min);
    let shift = 1.0 - min;

    // Tableau layout: m constraint rows then one objective row;
    // columns are y_0..y_{n-1}, s_0..s_{m-1}, rhs.
    let width = n + m + 1;
    let mut tab = vec![0.0; (m + 1) * width];
    for i in 0..m {
        for j in 0..n {
            tab[i * width + j] = mat[i * n + j] + shift;
        }
        tab[i * width + n + i] = 1.0;
        tab[i * width + n + m] = 1.0;
    }
    for j in 0..n {
        tab[m * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    loop {
        let obj = &tab[m * width..m * width + n + m];
        let Some(enter) = obj.iter().position(|&c| c < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best_ratio = f64::INFINITY;
        for i in 0..m {
            let a = tab[i * width + enter];
            if a > PIVOT_EPS {
                let ratio = tab[i * width + n + m] / a;
                let better = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best_ratio - PIVOT_EPS || (ratio <= best_ratio + PIVOT_EPS && basis[i] < basis[l])
                    }
                };
                if better {
                    best_ratio = ratio;
                    leave = Some(i);
                }
            }
        }
        // Bounded: every column has a positive entry after the shift.
        let row = leave.expect("zero-sum LP is bounded");
        pivot(&mut tab, width, m + 1, row, enter);
        basis[row] = enter;
    }

    let total = tab[m * width + n + m];
    let value = 1.0 / total - shift;

    let mut row_strategy: Vec<f64> = (0..m).map(|i| tab[m * width + n + i].max(0.0)).collect();
    normalize(&mut row_strategy);

    let mut col_strategy = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            col_strategy[b] = tab[i * width + n + m].max(0.0);
        }
    }
    normalize(&mut col_strategy);

    ZeroSumSolution {
        value,
        row_strategy,
        col_strategy,
    }
}

fn pivot(tab: &mut [f64], width: usize, rows: usize, pr: usize, pc: usize) {
    let p = tab[pr * width + pc];
    for c in 0..width {
        tab[pr * width + c] /= p;
    }
    for r in 0..rows {
        if r == pr {
            continue;
        }
        let f = tab[r * width + pc];
        if f != 0.0 {
            for c in 0..width {
                tab[r * width + c] -= f * tab[pr * width + c];
            }
        }
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let k = v.len() as f64;
        v.iter_mut().for_each(|x| *x = 1.0 / k);
    }
}
