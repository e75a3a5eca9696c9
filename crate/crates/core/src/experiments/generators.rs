use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::covering::BallSequence;
use crate::error::{Error, Result};
use crate::geometry::check_dim;
use crate::measure::SelfSimilarMeasure;

/// Name recorded in manifests for the generator behind `gen_random`.
pub const PRNG_NAME: &str = "ChaCha20 (rand_chacha 0.3, seed_from_u64)";

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Balls `B(p/q, 1/q²)`, `0 <= p <= q <= q_max`, `gcd(p,q) = 1`, ordered by
/// `q` then `p`.
pub fn gen_farey(q_max: u64) -> Result<BallSequence> {
    if q_max < 1 {
        return Err(Error::invalid("q_max must be at least 1"));
    }
    let mut s = BallSequence::new(1, format!("farey q_max={q_max}"))?;
    for q in 1..=q_max {
        let r = 1.0 / (q as f64 * q as f64);
        for p in 0..=q {
            if gcd(p, q) == 1 {
                s.push(&[p as f64 / q as f64], r)?;
            }
        }
    }
    Ok(s)
}

/// `φ(q)` for `q <= n` by a sieve (with `φ(1) = 1`).
pub fn totients(n: usize) -> Vec<u64> {
    let mut phi: Vec<u64> = (0..=n as u64).collect();
    for i in 2..=n {
        if phi[i] == i as u64 {
            for j in (i..=n).step_by(i) {
                phi[j] -= phi[j] / i as u64;
            }
        }
    }
    phi
}

/// The Farey family grouped by denominator: `(q, number of balls, radius)`.
/// Lets sums over very long Farey sequences run without materializing them.
pub fn farey_denominators(q_max: u64) -> Vec<(u64, u64, f64)> {
    let phi = totients(q_max as usize);
    (1..=q_max)
        .map(|q| (q, if q == 1 { 2 } else { phi[q as usize] }, 1.0 / (q as f64 * q as f64)))
        .collect()
}

/// Arc lengths `l_n` of the random covering.
#[derive(Clone, Debug, PartialEq)]
pub enum LengthRule {
    /// `l_n = a / n`
    Harmonic { a: f64 },
    Explicit(Vec<f64>),
}

impl LengthRule {
    fn length(&self, n: usize) -> Option<f64> {
        match self {
            LengthRule::Harmonic { a } => Some(a / n as f64),
            LengthRule::Explicit(v) => v.get(n - 1).copied(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SheppVerdict {
    Divergent,
    Convergent,
    Borderline,
}

/// Finite-`N` growth diagnostic of `Σ n^{-2} exp(l_1 + … + l_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SheppDiagnostic {
    /// `(N, partial sum)` at powers of two and at the end.
    pub partial_sums: Vec<(usize, f64)>,
    /// Fitted `p` in `term_n ≈ C n^{-p}` over the last decade of terms.
    pub term_exponent: Option<f64>,
    pub verdict: Option<SheppVerdict>,
}

fn shepp_diagnostic(lengths: &[f64]) -> SheppDiagnostic {
    let mut acc = 0.0;
    let mut cum = 0.0;
    let mut logs = Vec::with_capacity(lengths.len());
    let mut partial_sums = Vec::new();
    for (i, l) in lengths.iter().enumerate() {
        let n = (i + 1) as f64;
        cum += l;
        let log_term = cum - 2.0 * n.ln();
        logs.push((n.ln(), log_term));
        acc += log_term.exp();
        if (i + 1).is_power_of_two() || i + 1 == lengths.len() {
            partial_sums.push((i + 1, acc));
        }
    }
    let tail = &logs[logs.len() - logs.len() / 10 * 9..];
    let term_exponent = if tail.len() >= 10 {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some(-sxy / sxx)
    } else {
        None
    };
    let verdict = term_exponent.map(|p| {
        if p < 0.95 {
            SheppVerdict::Divergent
        } else if p > 1.05 {
            SheppVerdict::Convergent
        } else {
            SheppVerdict::Borderline
        }
    });
    SheppDiagnostic { partial_sums, term_exponent, verdict }
}

/// `n` balls with i.i.d. uniform centers in `[0,1]^dim` and radii `l_n / 2`.
pub fn gen_random(n: usize, rule: &LengthRule, seed: u64, dim: usize) -> Result<(BallSequence, SheppDiagnostic)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut s = BallSequence::with_capacity(dim, n, format!("random n={n} seed={seed}"))?;
    let mut lengths = Vec::with_capacity(n);
    let mut c = vec![0.0; dim];
    for i in 1..=n {
        let l = rule.length(i).ok_or_else(|| Error::invalid(format!("no length given for n = {i}")))?;
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::invalid(format!("length {l} at n = {i} is not positive")));
        }
        for x in c.iter_mut() {
            *x = rng.gen::<f64>();
        }
        s.push(&c, l / 2.0)?;
        lengths.push(l);
    }
    let diag = if lengths.is_empty() {
        SheppDiagnostic { partial_sums: Vec::new(), term_exponent: None, verdict: None }
    } else {
        shepp_diagnostic(&lengths)
    };
    Ok((s, diag))
}

/// Depth of the cylinders used to check that the base point lies on `K`.
const MEMBERSHIP_DEPTH: u32 = 8;

/// Whether `x` lies in some cylinder `f_w([0,1]^d)` with `|w| = depth` below
/// the cylinder `scale · [0,1]^d + shift`.
fn in_cylinder(mu: &SelfSimilarMeasure, x: &[f64], scale: f64, shift: &[f64], depth: u32) -> bool {
    let inside = (0..x.len()).all(|i| shift[i] <= x[i] && x[i] <= shift[i] + scale);
    if !inside || depth == 0 {
        return inside;
    }
    mu.maps().iter().any(|m| {
        let t: Vec<f64> = shift.iter().zip(&m.translation).map(|(a, b)| scale * b + a).collect();
        in_cylinder(mu, x, scale * m.ratio, &t, depth - 1)
    })
}

/// Balls `B(f_w(x), factor |K| c_w)` over all words with `|w| <= depth`,
/// ordered by length then lexicographically.
pub fn gen_ifs_orbit(mu: &SelfSimilarMeasure, x: &[f64], depth: u32, factor: f64) -> Result<BallSequence> {
    check_dim(mu.dim(), x.len())?;
    if !(factor > 0.0) {
        return Err(Error::invalid("factor must be positive"));
    }
    if !in_cylinder(mu, x, 1.0, &vec![0.0; x.len()], MEMBERSHIP_DEPTH) {
        return Err(Error::invalid("the base point lies in no depth-8 cylinder of the attractor"));
    }
    let m = mu.maps().len() as f64;
    if (m.powi(depth as i32 + 1) - 1.0) / (m - 1.0).max(1.0) > 5e7 {
        return Err(Error::Budget(format!("{} maps to depth {depth} give too many balls", mu.maps().len())));
    }
    let diam = mu.attractor_diameter();
    let mut s = BallSequence::new(x.len(), format!("ifs depth={depth} factor={factor}"))?;
    for n in 0..=depth {
        for (_, ratio, t) in mu.words(n) {
            let c: Vec<f64> = x.iter().zip(&t).map(|(xi, ti)| ratio * xi + ti).collect();
            s.push(&c, factor * diam * ratio)?;
        }
    }
    Ok(s)
}
