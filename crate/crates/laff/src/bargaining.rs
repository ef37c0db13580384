//! Enforceable bargaining: deviation profits, the constrained EBS and Bully
//! pair searches, punishment length and the switch-test slack.
//!
//! Every solution is a mixture of at most two joint actions `xA`, `xB` with
//! weight `alpha` on `xA`. A single joint action is stored with `xA == xB`
//! and `alpha == 1`.

use serde::Serialize;
use thiserror::Error;

use crate::matrix_game::{security_value, BimatrixGame, Player};

/// Comparison slack used when ranking candidate solutions.
const TIE_TOL: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BargainError {
    #[error("deviation profit of an empty set")]
    EmptySet,
    #[error("pair must be ordered so that R2(xA) >= R2(xB)")]
    Ordering,
    #[error("solution is not enforceable: u2 - muS2 = {gap}, r + eps = {need}")]
    Unenforceable { gap: f64, need: f64 },
    #[error("invalid enforcement parameters: {0}")]
    InvalidParams(String),
    #[error("xi needs a positive punishment length when r > -eps")]
    ZeroPunishment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct JointAction {
    pub a1: usize,
    pub a2: usize,
}

impl JointAction {
    pub fn new(a1: usize, a2: usize) -> Self {
        JointAction { a1, a2 }
    }

    pub fn swapped(self) -> Self {
        JointAction {
            a1: self.a2,
            a2: self.a1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolutionKind {
    Ebs,
    Bully,
    SecurityFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairSolution {
    pub xa: JointAction,
    pub xb: JointAction,
    pub alpha: f64,
    pub u1: f64,
    pub u2: f64,
    pub deviation_profit: f64,
    pub kind: SolutionKind,
}

impl PairSolution {
    pub fn is_fallback(&self) -> bool {
        self.kind == SolutionKind::SecurityFallback
    }

    /// Joint action prescribed for signal bit `y`.
    pub fn target(&self, y: bool) -> JointAction {
        if y {
            self.xa
        } else {
            self.xb
        }
    }

    pub fn support(&self) -> Vec<JointAction> {
        if self.xa == self.xb {
            vec![self.xa]
        } else {
            vec![self.xa, self.xb]
        }
    }

    /// Same mixture with `xA` and `xB` exchanged.
    pub fn flipped(&self) -> PairSolution {
        if self.xa == self.xb {
            return self.clone();
        }
        PairSolution {
            xa: self.xb,
            xb: self.xa,
            alpha: 1.0 - self.alpha,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnforceParams {
    pub k: usize,
    pub eps: f64,
}

impl EnforceParams {
    pub fn new(k: usize, eps: f64) -> Result<Self, BargainError> {
        if k == 0 {
            return Err(BargainError::InvalidParams("K must be at least 1".into()));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(BargainError::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        Ok(EnforceParams { k, eps })
    }
}

/// Player 2's best one-shot gain from deviating at any joint action in `x`.
/// A row with a single column contributes negative infinity.
pub fn deviation_profit(game: &BimatrixGame, x: &[JointAction]) -> Result<f64, BargainError> {
    if x.is_empty() {
        return Err(BargainError::EmptySet);
    }
    let mut best = f64::NEG_INFINITY;
    for ja in x {
        let here = game.r2(ja.a1, ja.a2);
        for j in 0..game.n2() {
            if j != ja.a2 {
                best = best.max(game.r2(ja.a1, j) - here);
            }
        }
    }
    Ok(best)
}

/// Smallest weight on `xa` that makes the mixture enforceable.
///
/// Requires `R2(xa) >= R2(xb)`. With equal player-2 rewards the weight is
/// irrelevant, so the result is `Some(0)` if the pair is enforceable and
/// `None` otherwise. A result above 1 means the pair is infeasible.
pub fn alpha_lower_bound(
    game: &BimatrixGame,
    xa: JointAction,
    xb: JointAction,
    ep: EnforceParams,
    mu_s2: f64,
) -> Result<Option<f64>, BargainError> {
    let ra = game.r2(xa.a1, xa.a2);
    let rb = game.r2(xb.a1, xb.a2);
    if ra < rb {
        return Err(BargainError::Ordering);
    }
    let r = deviation_profit(game, &[xa, xb])?;
    let k = ep.k as f64;
    if ra > rb {
        Ok(Some((r + ep.eps + k * (mu_s2 - rb)) / (k * (ra - rb))))
    } else if k * ra >= k * mu_s2 + r + ep.eps {
        Ok(Some(0.0))
    } else {
        Ok(None)
    }
}

/// Security values of both players.
pub fn security_pair(game: &BimatrixGame) -> (f64, f64) {
    (security_value(game, Player::One).0, security_value(game, Player::Two).0)
}

#[derive(Clone, Copy, PartialEq)]
enum Objective {
    Egalitarian,
    Selfish,
}

struct Candidate {
    beta: f64,
    u1: f64,
    u2: f64,
    score: f64,
}

/// Intersects `[lo, hi]` with `{β : a + bβ >= c}`.
fn restrict(lo: &mut f64, hi: &mut f64, a: f64, b: f64, c: f64) -> bool {
    if b > 0.0 {
        *lo = lo.max((c - a) / b);
    } else if b < 0.0 {
        *hi = hi.min((c - a) / b);
    } else if a < c - TIE_TOL {
        return false;
    }
    *lo <= *hi + TIE_TOL
}

fn better(obj: Objective, cand: &Candidate, best: &Candidate) -> bool {
    if cand.score > best.score + TIE_TOL {
        return true;
    }
    if cand.score < best.score - TIE_TOL {
        return false;
    }
    if cand.u1 > best.u1 + TIE_TOL {
        return true;
    }
    // Bully ties in u1 prefer the outcome better for player 2.
    obj == Objective::Selfish && cand.u1 >= best.u1 - TIE_TOL && cand.u2 > best.u2 + TIE_TOL
}

/// Best weight on `p` for the pair `(p, q)`, or `None` if no weight is feasible.
fn best_for_pair(
    game: &BimatrixGame,
    p: JointAction,
    q: JointAction,
    ep: EnforceParams,
    mu: (f64, f64),
    obj: Objective,
) -> Option<Candidate> {
    let (p1, p2) = (game.r1(p.a1, p.a2), game.r2(p.a1, p.a2));
    let (q1, q2) = (game.r1(q.a1, q.a2), game.r2(q.a1, q.a2));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);

    // Enforceability, expressed through the bound on the higher-R2 point.
    let (xa, xb, on_p) = if p2 >= q2 { (p, q, true) } else { (q, p, false) };
    let v = alpha_lower_bound(game, xa, xb, ep, mu.1).expect("pair is ordered")?;
    if p2 != q2 {
        if on_p {
            lo = lo.max(v);
        } else {
            hi = hi.min(1.0 - v);
        }
    }
    if lo > hi + TIE_TOL {
        return None;
    }
    // Membership in the individually rational region.
    if !restrict(&mut lo, &mut hi, q1, p1 - q1, mu.0) || !restrict(&mut lo, &mut hi, q2, p2 - q2, mu.1) {
        return None;
    }
    let lo = lo.clamp(0.0, 1.0);
    let hi = hi.clamp(lo, 1.0);

    let eval = |beta: f64| {
        let u1 = beta * p1 + (1.0 - beta) * q1;
        let u2 = beta * p2 + (1.0 - beta) * q2;
        let score = match obj {
            Objective::Egalitarian => (u1 - mu.0).min(u2 - mu.1),
            Objective::Selfish => u1,
        };
        Candidate { beta, u1, u2, score }
    };

    let mut betas = vec![lo, hi];
    if obj == Objective::Egalitarian {
        // Where the two arms u1 - mu1 and u2 - mu2 cross.
        let denom = (p1 - q1) - (p2 - q2);
        if denom != 0.0 {
            let a = (q2 - q1 + mu.0 - mu.1) / denom;
            if a > lo && a < hi {
                betas.push(a);
            }
        }
    }
    let mut best: Option<Candidate> = None;
    for b in betas {
        let c = eval(b);
        if best.as_ref().is_none_or(|cur| better(obj, &c, cur)) {
            best = Some(c);
        }
    }
    best
}

fn search(game: &BimatrixGame, ep: EnforceParams, obj: Objective) -> PairSolution {
    let mu = security_pair(game);
    let cells: Vec<JointAction> = (0..game.n1())
        .flat_map(|i| (0..game.n2()).map(move |j| JointAction::new(i, j)))
        .collect();

    let mut best: Option<(Candidate, JointAction, JointAction)> = None;
    for (ia, &p) in cells.iter().enumerate() {
        for &q in &cells[ia..] {
            if let Some(c) = best_for_pair(game, p, q, ep, mu, obj) {
                if best.as_ref().is_none_or(|(cur, _, _)| better(obj, &c, cur)) {
                    best = Some((c, p, q));
                }
            }
        }
    }

    let kind = match obj {
        Objective::Egalitarian => crate::bargaining::SolutionKind::Ebs,
        Objective::Selfish => crate::bargaining::SolutionKind::Bully,
    };
    match best {
        None => PairSolution {
            xa: JointAction::new(0, 0),
            xb: JointAction::new(0, 0),
            alpha: 1.0,
            u1: mu.0,
            u2: mu.1,
            deviation_profit: f64::NEG_INFINITY,
            kind: SolutionKind::SecurityFallback,
        },
        Some((c, p, q)) => {
            let (xa, xb, alpha) = if p == q || c.beta >= 1.0 - TIE_TOL {
                (p, p, 1.0)
            } else if c.beta <= TIE_TOL {
                (q, q, 1.0)
            } else {
                (p, q, c.beta)
            };
            let support: &[JointAction] = if xa == xb { &[xa] } else { &[xa, xb] };
            let u1 = alpha * game.r1(xa.a1, xa.a2) + (1.0 - alpha) * game.r1(xb.a1, xb.a2);
            let u2 = alpha * game.r2(xa.a1, xa.a2) + (1.0 - alpha) * game.r2(xb.a1, xb.a2);
            PairSolution {
                xa,
                xb,
                alpha,
                u1,
                u2,
                deviation_profit: deviation_profit(game, support).expect("nonempty"),
                kind,
            }
        }
    }
}

/// Enforceable egalitarian bargaining solution: maximizes the smaller of the
/// two players' gains over their security values.
pub fn enforceable_ebs(game: &BimatrixGame, ep: EnforceParams) -> PairSolution {
    search(game, ep, Objective::Egalitarian)
}

/// Enforceable outcome maximizing player 1's value.
pub fn bully_solution(game: &BimatrixGame, ep: EnforceParams) -> PairSolution {
    search(game, ep, Objective::Selfish)
}

/// Shortest punishment (in steps, at most K) that deters every deviation
/// from `solution`.
pub fn punishment_length(solution: &PairSolution, ep: EnforceParams, mu_s2: f64) -> Result<usize, BargainError> {
    if solution.is_fallback() {
        return Ok(0);
    }
    let need = solution.deviation_profit + ep.eps;
    if need <= 0.0 {
        return Ok(0);
    }
    let gap = solution.u2 - mu_s2;
    if gap <= 0.0 {
        return Err(BargainError::Unenforceable { gap, need });
    }
    let kp = (need / gap - 1e-9).ceil().max(0.0) as usize;
    Ok(kp.min(ep.k))
}

/// Per-step margin by which a deviating opponent loses under punishment.
pub fn xi(eps: f64, r: f64, kp: usize) -> Result<f64, BargainError> {
    if r > -eps && kp == 0 {
        return Err(BargainError::ZeroPunishment);
    }
    Ok(if r >= 0.0 {
        eps / (2.0 * kp as f64)
    } else if r > -eps {
        (eps + r) / (2.0 * kp as f64)
    } else {
        -r
    })
}

/// How the LAFF switch test computes its slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SlackMode {
    /// `C1/τ + C3·sqrt(ln(T/δ)/(2τ))`.
    Practical,
    /// The full bound, with the problem-dependent constants supplied.
    Theoretical { t0: f64, c2: f64 },
    /// The full bound's structure with C1 standing in for C1·T0, C3 scaling
    /// its τ^(-1/2) term and the Follower regret term dropped.
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuning {
    pub c1: f64,
    pub c3: f64,
    pub c4: f64,
    pub eta_m: f64,
    pub slack: SlackMode,
}

impl Default for Tuning {
    fn default() -> Self {
        Tuning {
            c1: 0.05,
            c3: 0.005,
            c4: 0.005,
            eta_m: 0.05,
            slack: SlackMode::Practical,
        }
    }
}

/// Practical slack of the LAFF switch test.
pub fn slack_b(tau: usize, horizon: usize, delta: f64, tuning: &Tuning) -> f64 {
    let tau = tau.max(1) as f64;
    let log_term = (horizon as f64 / delta).ln().max(0.0);
    tuning.c1 / tau + tuning.c3 * (log_term / (2.0 * tau)).sqrt()
}

/// Slack with the target's punishment length and margin kept:
/// `(K′ξ + C1 + K′ + 1)/(ξτ) + C3·((3 + ξ)/ξ)·sqrt(ln(T/δ)/(2τ))`.
pub fn slack_b_scaled(tau: usize, horizon: usize, delta: f64, tuning: &Tuning, kp: usize, xi: f64) -> f64 {
    let tau = tau.max(1) as f64;
    let kp = kp as f64;
    let log_term = (horizon as f64 / delta).ln().max(0.0);
    (kp * xi + tuning.c1 + kp + 1.0) / (xi * tau) + tuning.c3 * (3.0 + xi) / xi * (log_term / (2.0 * tau)).sqrt()
}

/// Inputs of the theoretical slack that depend on the active target.
#[derive(Debug, Clone, Copy)]
pub struct TheoryTerms {
    pub kp: usize,
    pub xi: f64,
    pub states: usize,
    pub actions: usize,
}

/// Theoretical slack; `t0` and `c2` are the Follower's unknown constants.
pub fn slack_b_theoretical(
    tau: usize,
    horizon: usize,
    delta: f64,
    c1: f64,
    t0: f64,
    c2: f64,
    terms: TheoryTerms,
) -> f64 {
    let tau_f = tau.max(1) as f64;
    let kp = terms.kp as f64;
    let xi = terms.xi;
    let log_term = (horizon as f64 / delta).ln().max(0.0);
    let rq = crate::experts::rq_bound(tau.max(1), delta / horizon as f64, terms.states, terms.actions);
    (kp * xi + c1 * t0 + kp + 1.0) / (xi * tau_f)
        + (c2 * rq + (3.0 + xi) * (tau_f * log_term / 2.0).sqrt()) / (xi * tau_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games;
    use proptest::prelude::*;

    fn ep(k: usize, eps: f64) -> EnforceParams {
        EnforceParams::new(k, eps).unwrap()
    }

    fn chicken() -> BimatrixGame {
        games::builtin("chicken").unwrap()
    }

    #[test]
    fn deviation_profit_examples() {
        let g = chicken();
        let x = [JointAction::new(0, 1), JointAction::new(1, 0)];
        assert!((deviation_profit(&g, &x).unwrap() + 0.25).abs() < 1e-12);
        assert!((deviation_profit(&g, &[JointAction::new(1, 0)]).unwrap() + 0.25).abs() < 1e-12);
        assert!(deviation_profit(&g, &[]).is_err());
        // Best response cells never pay to leave.
        assert!(deviation_profit(&g, &[JointAction::new(0, 1)]).unwrap() < 0.0);
    }

    #[test]
    fn single_column_is_minus_infinity() {
        let g = BimatrixGame::new("c", &[vec![0.3], vec![0.6]], &[vec![0.1], vec![0.9]]).unwrap();
        assert_eq!(
            deviation_profit(&g, &[JointAction::new(0, 0)]).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn alpha_bound_examples() {
        let g = chicken();
        let b = alpha_lower_bound(&g, JointAction::new(0, 1), JointAction::new(1, 0), ep(1, 0.05), 0.25)
            .unwrap()
            .unwrap();
        assert!((b - (-0.2 / 0.75)).abs() < 1e-12);
        assert_eq!(
            alpha_lower_bound(&g, JointAction::new(1, 0), JointAction::new(0, 1), ep(1, 0.05), 0.25),
            Err(BargainError::Ordering)
        );
    }

    #[test]
    fn alpha_bound_equal_rewards() {
        // R2 equal to muS2 at both points and r = -eps exactly.
        let g = BimatrixGame::new(
            "e",
            &[vec![0.5, 0.5], vec![0.5, 0.5]],
            &[vec![0.5, 0.25], vec![0.5, 0.25]],
        )
        .unwrap();
        let mu2 = security_value(&g, Player::Two).0;
        assert!((mu2 - 0.5).abs() < 1e-12);
        let xa = JointAction::new(0, 0);
        let xb = JointAction::new(1, 0);
        assert_eq!(alpha_lower_bound(&g, xa, xb, ep(1, 0.25), mu2).unwrap(), Some(0.0));
        assert_eq!(alpha_lower_bound(&g, xa, xb, ep(1, 0.3), mu2).unwrap(), None);
    }

    #[test]
    fn alpha_bound_above_one_is_returned() {
        let g = chicken();
        let b = alpha_lower_bound(&g, JointAction::new(0, 1), JointAction::new(1, 0), ep(1, 1.225), 0.25)
            .unwrap()
            .unwrap();
        assert!((b - 1.3).abs() < 1e-12);
    }

    #[test]
    fn chicken_ebs() {
        let s = enforceable_ebs(&chicken(), ep(1, 0.05));
        assert_eq!(s.kind, SolutionKind::Ebs);
        assert_eq!(s.xa, JointAction::new(0, 1));
        assert_eq!(s.xb, JointAction::new(1, 0));
        assert!((s.alpha - 0.5).abs() < 1e-12);
        assert!((s.u1 - 0.625).abs() < 1e-12 && (s.u2 - 0.625).abs() < 1e-12);
        assert!((s.deviation_profit + 0.25).abs() < 1e-12);
    }

    #[test]
    fn chicken_ebs_flip_point() {
        for k in [1usize, 2, 3] {
            let thr = 0.375 * k as f64 + 0.25;
            let below = enforceable_ebs(&chicken(), ep(k, thr - 1e-4));
            assert!((below.u1 - 0.625).abs() < 1e-9 && (below.u2 - 0.625).abs() < 1e-9);
            let above = enforceable_ebs(&chicken(), ep(k, thr + 1e-4));
            assert!(above.u1.min(above.u2) < 0.625 - 1e-6);
        }
    }

    #[test]
    fn chicken_bully() {
        let s = bully_solution(&chicken(), ep(1, 0.05));
        assert_eq!(s.kind, SolutionKind::Bully);
        assert_eq!((s.xa, s.xb), (JointAction::new(1, 0), JointAction::new(1, 0)));
        assert_eq!((s.u1, s.u2), (1.0, 0.25));
        // At eps = 0.3 the pure cell is no longer enforceable.
        let s = bully_solution(&chicken(), ep(1, 0.3));
        assert!((s.u1 - 0.95).abs() < 1e-9, "{s:?}");
        assert!(s.u1 < 1.0);
    }

    #[test]
    fn fallback_when_nothing_is_enforceable() {
        // Player 2 always gains by deviating from every cell in row 0 and
        // row 1 pays player 1 below its security value.
        let g = BimatrixGame::new("f", &[vec![0.5, 0.5]], &[vec![0.0, 1.0]]).unwrap();
        let s = enforceable_ebs(&g, ep(1, 0.05));
        // Only (0,1) is enforceable; it yields u = (0.5, 1).
        assert_eq!(s.xa, JointAction::new(0, 1));
        let s = enforceable_ebs(&g, ep(1, 2.0));
        assert_eq!(s.kind, SolutionKind::SecurityFallback);
        assert_eq!((s.u1, s.u2), security_pair(&g));
    }

    #[test]
    fn punishment_length_examples() {
        let e = ep(1, 0.05);
        let s = enforceable_ebs(&chicken(), e);
        assert_eq!(punishment_length(&s, e, 0.25).unwrap(), 0);
        let mut t = s.clone();
        t.deviation_profit = 0.2;
        t.u2 = 0.5;
        assert_eq!(punishment_length(&t, ep(3, 0.05), 0.25).unwrap(), 1);
        t.deviation_profit = -0.05;
        assert_eq!(punishment_length(&t, e, 0.25).unwrap(), 0);
        t.deviation_profit = 0.2;
        t.u2 = 0.25;
        assert!(punishment_length(&t, e, 0.25).is_err());
    }

    #[test]
    fn xi_examples() {
        assert!((xi(0.05, -0.25, 0).unwrap() - 0.25).abs() < 1e-12);
        assert!((xi(0.1, 0.2, 2).unwrap() - 0.025).abs() < 1e-12);
        assert!((xi(0.1, -0.05, 1).unwrap() - 0.025).abs() < 1e-12);
        assert!(xi(0.1, 0.0, 0).is_err());
    }

    #[test]
    fn slack_examples() {
        let t = Tuning::default();
        let b = slack_b(1, 200_000, 0.05, &t);
        let expect = 0.05 + 0.005 * ((4e6f64).ln() / 2.0).sqrt();
        assert!((b - expect).abs() < 1e-15);
        assert!((b - 0.0638).abs() < 5e-4);
        assert!(slack_b(1 << 40, 200_000, 0.05, &t) < 1e-6);
    }

    #[test]
    fn theoretical_slack_is_decreasing() {
        let terms = TheoryTerms {
            kp: 1,
            xi: 0.25,
            states: 64,
            actions: 2,
        };
        let mut prev = f64::INFINITY;
        for tau in [10usize, 100, 1000, 10_000, 100_000] {
            let b = slack_b_theoretical(tau, 200_000, 0.05, 0.05, 10.0, 1.0, terms);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn targets_are_ordered_for_builtins() {
        for g in games::all() {
            for k in [1, 2] {
                for eps in [0.05, 0.2] {
                    let e = ep(k, eps);
                    let ebs = enforceable_ebs(&g, e);
                    let bully = bully_solution(&g, e);
                    let (m1, _) = security_pair(&g);
                    assert!(bully.u1 >= ebs.u1 - 1e-9, "{}", g.name);
                    assert!(ebs.u1 >= m1 - 1e-9, "{}", g.name);
                }
            }
        }
    }

    #[test]
    fn symmetric_games_have_equal_ebs_values() {
        for g in games::all().into_iter().filter(|g| g.is_symmetric()) {
            for k in [1, 2] {
                for eps in [0.05, 0.2] {
                    let s = enforceable_ebs(&g, ep(k, eps));
                    assert!((s.u1 - s.u2).abs() < 1e-6, "{} K={k} eps={eps}: {s:?}", g.name);
                }
            }
        }
    }

    fn check_solution(g: &BimatrixGame, s: &PairSolution, e: EnforceParams) -> Result<(), TestCaseError> {
        let (m1, m2) = security_pair(g);
        if s.is_fallback() {
            prop_assert_eq!((s.u1, s.u2), (m1, m2));
            return Ok(());
        }
        let u1 = s.alpha * g.r1(s.xa.a1, s.xa.a2) + (1.0 - s.alpha) * g.r1(s.xb.a1, s.xb.a2);
        let u2 = s.alpha * g.r2(s.xa.a1, s.xa.a2) + (1.0 - s.alpha) * g.r2(s.xb.a1, s.xb.a2);
        prop_assert!((u1 - s.u1).abs() < 1e-9 && (u2 - s.u2).abs() < 1e-9);
        prop_assert!(s.u1 >= m1 - 1e-9 && s.u2 >= m2 - 1e-9);
        let r = deviation_profit(g, &s.support()).unwrap();
        let k = e.k as f64;
        prop_assert!(k * s.u2 >= k * m2 + r + e.eps - 1e-9);
        Ok(())
    }

    fn arb_game() -> impl Strategy<Value = BimatrixGame> {
        (1usize..4, 1usize..4).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0u8..=8, m * n),
                proptest::collection::vec(0u8..=8, m * n),
            )
                .prop_map(move |(a, b)| {
                    let to = |v: Vec<u8>| -> Vec<Vec<f64>> {
                        v.chunks(n)
                            .map(|c| c.iter().map(|&x| x as f64 / 8.0).collect())
                            .collect()
                    };
                    BimatrixGame::new("arb", &to(a), &to(b)).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn solutions_satisfy_definitions(g in arb_game(), k in 1usize..3, eps in 0.01f64..0.5) {
            let e = ep(k, eps);
            let ebs = enforceable_ebs(&g, e);
            let bully = bully_solution(&g, e);
            check_solution(&g, &ebs, e)?;
            check_solution(&g, &bully, e)?;
            if !ebs.is_fallback() && !bully.is_fallback() {
                prop_assert!(bully.u1 >= ebs.u1 - 1e-9);
            }
            let kp = punishment_length(&ebs, e, security_pair(&g).1).unwrap();
            prop_assert!(kp <= k);
        }

        #[test]
        fn larger_eps_never_helps(g in arb_game(), k in 1usize..3, eps in 0.01f64..0.4, extra in 0.0f64..0.4) {
            let (m1, m2) = security_pair(&g);
            let score = |s: &PairSolution| (s.u1 - m1).min(s.u2 - m2);
            let a = enforceable_ebs(&g, ep(k, eps));
            let b = enforceable_ebs(&g, ep(k, eps + extra));
            prop_assert!(score(&b) <= score(&a) + 1e-9);
        }

        #[test]
        fn slack_decreases(tau in 1usize..1_000_000) {
            let t = Tuning::default();
            prop_assert!(slack_b(2 * tau, 20_000, 0.05, &t) < slack_b(tau, 20_000, 0.05, &t));
        }
    }
}
