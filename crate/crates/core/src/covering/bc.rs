use std::fmt::Write as _;

use crate::error::{Error, Flag, Result};
use crate::geometry::{check_dim, Ball, BallRef};
use crate::measure::{SelfSimilarMeasure, Target, DEFAULT_NODE_BUDGET};

use super::index::sweep;
use super::{ball_mass, BallSequence};

/// Which balls play the role of `L_{B,n}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum BcStrategy {
    /// Every ball contained in `B`, in sequence order.
    #[default]
    ContainedIn,
    /// Explicit indices; each must lie in `B`.
    Indices(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct BcReport {
    pub ball: Ball,
    pub mu_b: f64,
    pub selected: Vec<usize>,
    /// `S_Q` for `Q = 1..`
    pub s: Vec<f64>,
    /// `P_Q = Σ_{s,t <= Q} μ(L_s ∩ L_t)`
    pub p: Vec<f64>,
    /// `P_Q μ(B) / S_Q^2`
    pub ratio: Vec<f64>,
    pub c: Option<f64>,
    /// Values of `Q` at which `ratio_Q <= C`.
    pub holds_at: Vec<usize>,
    pub flags: Vec<Flag>,
}

impl BcReport {
    /// Quasi-independence seen at one checkpoint at least (needs `C`).
    pub fn quasi_independent(&self) -> Option<bool> {
        self.c.map(|_| !self.holds_at.is_empty())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("Q,S_Q,P_Q,ratio\n");
        for q in 0..self.s.len() {
            let _ = writeln!(out, "{},{},{},{}", q + 1, self.s[q], self.p[q], self.ratio[q]);
        }
        out
    }
}

/// Partial sums and correlation sums of the masses of the selected balls.
/// `P_Q` is accumulated as `P_{Q-1} + μ(L_Q) + 2 Σ_{s<Q} μ(L_s ∩ L_Q)`, with
/// the meeting pairs found by a sweep (disjoint pairs contribute nothing).
pub fn borel_cantelli_check(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    b: &Ball,
    strategy: &BcStrategy,
    q_max: usize,
    c: Option<f64>,
    tol: f64,
) -> Result<BcReport> {
    check_dim(seq.dim(), mu.dim())?;
    check_dim(seq.dim(), b.dim())?;
    let outer = b.as_ref();
    let selected: Vec<usize> = match strategy {
        BcStrategy::ContainedIn => (0..seq.len()).filter(|&i| seq.get(i).inside_ball(&outer)).take(q_max).collect(),
        BcStrategy::Indices(ix) => {
            if let Some(&i) = ix.iter().find(|&&i| i >= seq.len() || !seq.get(i).inside_ball(&outer)) {
                return Err(Error::invalid(format!("ball {i} is not a ball of the sequence inside B")));
            }
            ix.iter().copied().take(q_max).collect()
        }
    };
    let mut flags = Vec::new();
    if selected.len() < 2 {
        flags.push(Flag::Degenerate(format!("only {} balls selected", selected.len())));
    }
    let mu_b = ball_mass(mu, &outer, tol)?;
    let balls: Vec<BallRef<'_>> = selected.iter().map(|&i| seq.get(i)).collect();
    let mut masses = Vec::with_capacity(balls.len());
    for l in &balls {
        masses.push(ball_mass(mu, l, tol)?);
    }
    let mut cross = vec![0.0; balls.len()];
    let mut failure = None;
    sweep(&balls, 1.0, |i, j| {
        let (s, t) = (i.min(j), i.max(j));
        match intersection_mass(mu, &balls[s], &balls[t], tol) {
            Ok(m) => {
                cross[t] += m;
                true
            }
            Err(e) => {
                failure = Some(e);
                false
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (mut s_acc, mut p_acc) = (0.0, 0.0);
    let (mut s, mut p, mut ratio) = (Vec::new(), Vec::new(), Vec::new());
    for q in 0..balls.len() {
        s_acc += masses[q];
        p_acc += masses[q] + 2.0 * cross[q];
        s.push(s_acc);
        p.push(p_acc);
        ratio.push(if s_acc > 0.0 { p_acc * mu_b / (s_acc * s_acc) } else { f64::INFINITY });
    }
    let holds_at = match c {
        Some(c) => ratio.iter().enumerate().filter(|(_, r)| **r <= c).map(|(q, _)| q + 1).collect(),
        None => Vec::new(),
    };
    if c.is_some() && holds_at.is_empty() && !ratio.is_empty() {
        flags.push(Flag::Note("the ratio exceeds C at every checkpoint".into()));
    }
    Ok(BcReport { ball: b.clone(), mu_b, selected, s, p, ratio, c, holds_at, flags })
}

fn intersection_mass(mu: &SelfSimilarMeasure, a: &BallRef<'_>, b: &BallRef<'_>, tol: f64) -> Result<f64> {
    if mu.is_lebesgue() {
        let mut v = 1.0;
        for i in 0..a.center.len() {
            let lo = (a.center[i] - a.radius).max(b.center[i] - b.radius).max(0.0);
            let hi = (a.center[i] + a.radius).min(b.center[i] + b.radius).min(1.0);
            v *= (hi - lo).max(0.0);
        }
        return Ok(v);
    }
    match Target::ball_intersection(a, b) {
        Some(t) => Ok(mu.eval_target(&t, tol, DEFAULT_NODE_BUDGET)?.mid()),
        None => Ok(0.0),
    }
}
