use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Flag, Result};
use crate::geometry::{scale_index_unit, validate_tau};

use super::formulas::g_tau;

/// Shape of the sets whose cover cost is summed.
#[derive(Clone, Debug, PartialEq)]
pub enum CoverShape {
    /// Ball of the given radius; cost `|B|^s = (2r)^s`.
    Ball,
    /// Rectangle with sides `r^{τ_i}`; cost `r^{g_τ(s)}`.
    Rect(Vec<f64>),
}

/// One set of the sequence (or `weight` identical sets).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverItem {
    pub radius: f64,
    pub mass: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct CriticalOptions {
    /// Exponents at which tail sums and bucket slopes are reported.
    pub s_grid: Vec<f64>,
    /// Upper end of the search interval (ambient dimension).
    pub s_max: f64,
    /// Tail start as a fraction of the total weight.
    pub tail_fraction: f64,
    pub bisection_tol: f64,
    pub prediction: Option<(f64, String)>,
    pub tolerance: f64,
}

impl CriticalOptions {
    pub fn new(s_max: f64) -> Self {
        let steps = (s_max / 0.05).round() as usize;
        CriticalOptions {
            s_grid: (0..=steps).map(|i| i as f64 * 0.05).collect(),
            s_max,
            tail_fraction: 0.5,
            bisection_tol: 1e-3,
            prediction: None,
            tolerance: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub s: f64,
    pub tail_sum: f64,
    /// Fitted growth rate of `log2 S_k(s)` per scale bucket.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimensionReport {
    pub prediction: Option<f64>,
    pub formula: String,
    /// Exponent where the per-bucket cover sums stop growing.
    pub estimate: Option<f64>,
    /// Exponent where the tail sum crosses 1.
    pub tail_cross: Option<f64>,
    pub tolerance: f64,
    /// Number of sets in the truncated sequence.
    pub truncation: f64,
    /// Scale buckets used in the fit.
    pub window: Option<(i32, i32)>,
    pub rows: Vec<GridRow>,
    pub flags: Vec<Flag>,
}

impl DimensionReport {
    pub fn agrees(&self) -> Option<bool> {
        Some((self.estimate? - self.prediction?).abs() <= self.tolerance)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let mut s = String::from("s_grid,tail_sum,prediction,estimate,tolerance\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.s,
                r.tail_sum,
                opt(self.prediction),
                opt(self.estimate),
                self.tolerance
            );
        }
        s
    }

    /// Two-column plot data `s tail_sum`.
    pub fn plot_tail(&self) -> String {
        self.rows.iter().map(|r| format!("{} {}\n", r.s, r.tail_sum)).collect()
    }

    /// Two-column plot data `s slope`.
    pub fn plot_slope(&self) -> String {
        self.rows.iter().filter_map(|r| r.slope.map(|b| format!("{} {}\n", r.s, b))).collect()
    }
}

struct Cost<'a> {
    shape: &'a CoverShape,
}

impl Cost<'_> {
    fn log2(&self, r: f64, s: f64) -> f64 {
        match self.shape {
            CoverShape::Ball => s * (2.0 * r).log2(),
            CoverShape::Rect(tau) => g_tau(s, tau).unwrap_or(f64::NAN) * r.log2(),
        }
    }
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Log-sum-exp in base 2.
fn log2_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp2()).sum::<f64>().log2()
}

/// Critical exponent of the natural cover of a truncated set sequence. The
/// sets are grouped in scale buckets `k` (`2^{-k-1} < r <= 2^{-k}`); for each
/// `s` the growth rate of `log2 Σ_{U ∈ T_k} cost_s(U)` in `k` is fitted over the
/// complete buckets of the upper half of the scale range, and the estimate is
/// the `s` where this rate vanishes (the series turns from divergent to
/// summable). The exponent where the tail sum from the median weight crosses
/// 1 is reported alongside.
pub fn natural_cover_critical_exponent(
    items: &[CoverItem],
    shape: &CoverShape,
    opts: &CriticalOptions,
) -> Result<DimensionReport> {
    if let CoverShape::Rect(tau) = shape {
        validate_tau(tau)?;
    }
    if !(opts.s_max > 0.0) || !(opts.tail_fraction >= 0.0 && opts.tail_fraction < 1.0) {
        return Err(Error::invalid("need s_max > 0 and a tail fraction in [0,1)"));
    }
    if items.iter().any(|it| !(it.radius > 0.0 && it.radius.is_finite()) || !(it.weight > 0.0)) {
        return Err(Error::invalid("every set needs a positive radius and weight"));
    }
    let cost = Cost { shape };
    let mut flags = Vec::new();
    let total: f64 = items.iter().map(|i| i.weight).sum();

    let mut buckets: BTreeMap<i32, Vec<(f64, f64)>> = BTreeMap::new();
    for it in items {
        let k = scale_index_unit(it.radius);
        buckets.entry(k).or_default().push((it.radius, it.weight.log2()));
    }
    // the bucket of the smallest sets may be cut off by the truncation
    let complete: Vec<i32> = buckets.keys().copied().collect();
    let complete = &complete[..complete.len().saturating_sub(1)];
    let window = if complete.len() >= 2 {
        let lo = complete[0] + (complete[complete.len() - 1] - complete[0]) / 2;
        let used: Vec<i32> = complete.iter().copied().filter(|&k| k >= lo).collect();
        let used = if used.len() >= 3 { used } else { complete.to_vec() };
        Some(used)
    } else {
        flags.push(Flag::Degenerate(format!("only {} scale buckets; no growth rate can be fitted", buckets.len())));
        None
    };
    let slope_at = |s: f64| -> Option<f64> {
        let w = window.as_ref()?;
        let pts: Vec<(f64, f64)> = w
            .iter()
            .map(|k| (*k as f64, log2_sum(buckets[k].iter().map(|(r, lw)| lw + cost.log2(*r, s)))))
            .collect();
        fit_slope(&pts)
    };

    let mut acc = 0.0;
    let n0 = items
        .iter()
        .position(|it| {
            acc += it.weight;
            acc > opts.tail_fraction * total
        })
        .unwrap_or(0);
    let tail = &items[n0..];
    let tail_at = |s: f64| log2_sum(tail.iter().map(|it| it.weight.log2() + cost.log2(it.radius, s))).exp2();

    let rows: Vec<GridRow> =
        opts.s_grid.iter().map(|&s| GridRow { s, tail_sum: tail_at(s), slope: slope_at(s) }).collect();
    let slopes: Vec<f64> = rows.iter().filter_map(|r| r.slope).collect();
    if slopes.windows(2).any(|w| w[1] > w[0] + 1e-9) {
        flags.push(Flag::NonMonotone("bucket growth rates are not decreasing in s; bracket widened".into()));
    }
    let estimate = window.as_ref().and_then(|_| {
        bisect(|s| slope_at(s).unwrap_or(f64::NAN), 0.0, opts.s_max, opts.bisection_tol, &mut flags, "growth rate")
    });
    let tail_cross = if tail.is_empty() {
        None
    } else {
        bisect(|s| tail_at(s).log2(), 0.0, opts.s_max, opts.bisection_tol, &mut flags, "tail sum")
    };
    let (prediction, formula) = match &opts.prediction {
        Some((p, f)) => (Some(*p), f.clone()),
        None => (None, String::new()),
    };
    Ok(DimensionReport {
        prediction,
        formula,
        estimate,
        tail_cross,
        tolerance: opts.tolerance,
        truncation: total,
        window: window.map(|w| (w[0], w[w.len() - 1])),
        rows,
        flags,
    })
}

/// Root of a decreasing function on `[a, b]`, clamped to the interval (and
/// flagged) when there is no sign change.
fn bisect(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, flags: &mut Vec<Flag>, what: &str) -> Option<f64> {
    let (fa, fb) = (f(a), f(b));
    if fa.is_nan() || fb.is_nan() {
        return None;
    }
    if fa <= 0.0 {
        flags.push(Flag::Note(format!("{what} is already non-positive at s = {a}")));
        return Some(a);
    }
    if fb > 0.0 {
        flags.push(Flag::Note(format!("{what} stays positive up to s = {b}")));
        return Some(b);
    }
    let (mut lo, mut hi) = (a, b);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn totients(n: usize) -> Vec<u64> {
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

    #[test]
    fn farey_contracted_balls_cross_at_half() {
        let q_max = 2000;
        let phi = totients(q_max);
        let items: Vec<CoverItem> = (1..=q_max)
            .map(|q| CoverItem {
                radius: (q as f64).powi(-4),
                mass: 2.0 * (q as f64).powi(-4),
                weight: if q == 1 { 2.0 } else { phi[q] as f64 },
            })
            .collect();
        let mut opts = CriticalOptions::new(1.0);
        opts.prediction = Some((0.5, "dim(mu)/delta".into()));
        let rep = natural_cover_critical_exponent(&items, &CoverShape::Ball, &opts).unwrap();
        let est = rep.estimate.unwrap();
        assert!((est - 0.5).abs() < 0.05, "{est}");
        assert_eq!(rep.agrees(), Some(true));
        assert!((rep.tail_cross.unwrap() - 0.5).abs() < 0.1);
        assert!(rep.to_csv().starts_with("s_grid,tail_sum,prediction,estimate,tolerance\n0,"));
    }

    #[test]
    fn dyadic_inballs_cross_at_dimension() {
        for d in [1usize, 2] {
            let items: Vec<CoverItem> = (0..14)
                .map(|k| CoverItem {
                    radius: 2f64.powi(-(k as i32) - 1),
                    mass: 2f64.powi(-(k as i32 * d as i32)),
                    weight: 2f64.powi((k * d) as i32),
                })
                .collect();
            let rep = natural_cover_critical_exponent(&items, &CoverShape::Ball, &CriticalOptions::new(d as f64 + 1.0)).unwrap();
            assert!((rep.estimate.unwrap() - d as f64).abs() < 1e-3);
        }
    }

    #[test]
    fn repeated_ball_is_degenerate() {
        let items = vec![CoverItem { radius: 0.1, mass: 0.2, weight: 1.0 }; 50];
        let rep = natural_cover_critical_exponent(&items, &CoverShape::Ball, &CriticalOptions::new(1.0)).unwrap();
        assert!(rep.estimate.is_none());
        assert!(rep.flags.iter().any(|f| matches!(f, Flag::Degenerate(_))));
    }

    #[test]
    fn rectangles_use_the_rect_exponent() {
        // 2^{2k} rectangles with base radius 2^-k and τ = (1,2): cost 2^{-k g(s)}
        let tau = vec![1.0, 2.0];
        let items: Vec<CoverItem> = (1..16)
            .map(|k| CoverItem { radius: 2f64.powi(-k), mass: 0.0, weight: 2f64.powi(2 * k) })
            .collect();
        let rep = natural_cover_critical_exponent(&items, &CoverShape::Rect(tau.clone()), &CriticalOptions::new(2.0)).unwrap();
        let s0 = super::super::formulas::s0_solver(&tau, 2.0).unwrap();
        assert!((rep.estimate.unwrap() - s0).abs() < 2e-3);
    }
}
