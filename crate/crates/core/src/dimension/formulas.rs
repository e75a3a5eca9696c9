use crate::error::{Error, Result};
use crate::geometry::validate_tau;

/// `g_τ(s) = max_k { s τ_k − Σ_{i<=k} (τ_k − τ_i) }`.
pub fn g_tau(s: f64, tau: &[f64]) -> Result<f64> {
    validate_tau(tau)?;
    if !(s >= 0.0) {
        return Err(Error::invalid("s must be non-negative"));
    }
    Ok(branches(tau).map(|(a, b)| a * s + b).fold(f64::NEG_INFINITY, f64::max))
}

/// Lines `s ↦ τ_k s − Σ_{i<=k}(τ_k − τ_i)` whose maximum is `g_τ`.
fn branches(tau: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    (0..tau.len()).map(move |k| (tau[k], -tau[..=k].iter().map(|t| tau[k] - t).sum::<f64>()))
}

/// `H^s_∞` of the rectangle with sides `r^{τ_i}`: `r^{g_τ(s)}`.
pub fn essential_rect_content(tau: &[f64], r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid("r must lie in (0,1)"));
    }
    Ok(r.powf(g_tau(s, tau)?))
}

/// Smallest `s` with `g_τ(s) >= target`, found by walking the upper envelope
/// of the branch lines from `s = 0`.
pub fn s0_solver(tau: &[f64], target: f64) -> Result<f64> {
    validate_tau(tau)?;
    if !(target > 0.0) {
        return Err(Error::invalid("target must be positive"));
    }
    let lines: Vec<(f64, f64)> = branches(tau).collect();
    let at = |l: (f64, f64), s: f64| l.0 * s + l.1;
    // active line at s = 0: highest value, steepest on ties
    let mut cur = lines[0];
    for &l in &lines[1..] {
        if l.1 > cur.1 || (l.1 == cur.1 && l.0 > cur.0) {
            cur = l;
        }
    }
    let mut s = 0.0;
    if at(cur, s) >= target {
        return Ok(0.0);
    }
    loop {
        // next breakpoint: the earliest point where a steeper line overtakes
        let mut next: Option<(f64, (f64, f64))> = None;
        for &l in &lines {
            if l.0 > cur.0 {
                let x = (cur.1 - l.1) / (l.0 - cur.0);
                if x >= s && next.is_none_or(|(nx, nl)| x < nx || (x == nx && l.0 > nl.0)) {
                    next = Some((x, l));
                }
            }
        }
        let solve = (target - cur.1) / cur.0;
        match next {
            Some((x, l)) if solve > x => {
                s = x;
                cur = l;
            }
            _ => return Ok(solve.max(s)),
        }
    }
}

/// `dim μ / δ`.
pub fn predict_shrunk_ball_dim(dim_mu: f64, delta: f64) -> Result<f64> {
    if !(delta >= 1.0) || !(dim_mu > 0.0) {
        return Err(Error::invalid("need delta >= 1 and dim_mu > 0"));
    }
    Ok(dim_mu / delta)
}

/// `min_i (dim μ + Σ_{j<=i} (τ_i − τ_j)) / τ_i`.
pub fn predict_rect_dim(dim_mu: f64, tau: &[f64]) -> Result<f64> {
    validate_tau(tau)?;
    if !(dim_mu > 0.0) || dim_mu > tau.len() as f64 {
        return Err(Error::invalid("dim_mu must lie in (0, d]"));
    }
    Ok((0..tau.len())
        .map(|i| (dim_mu + tau[..=i].iter().map(|t| tau[i] - t).sum::<f64>()) / tau[i])
        .fold(f64::INFINITY, f64::min))
}
