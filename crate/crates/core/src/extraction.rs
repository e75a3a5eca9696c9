//! Subsequence extraction: weakly redundant subsequences, measure-conditioned
//! filters, the diagonal construction and relevance classes.

use std::fmt::Write as _;

use crate::covering::{
    ac_empirical_check, greedy_disjoint_cover, index::first_conflict, open_set_mass, weak_redundancy_report, AcTable,
    BallSequence, CoverOptions, RedundancyReport, Selector,
};
use crate::error::{Error, Flag, Result};
use crate::geometry::{check_dim, Aabb, Ball, BallRef, OpenSet};
use crate::measure::{MeasureInterval, SelfSimilarMeasure};

/// One ball of an extracted subsequence.
#[derive(Clone, Debug, PartialEq)]
pub struct KeptBall {
    pub index: usize,
    pub radius: f64,
    pub mass: MeasureInterval,
    /// `log μ(B) / log |B|`, absent when `μ(B) = 0` or `|B| = 1`.
    pub ratio: Option<f64>,
    pub kept_by: String,
    /// Tolerance `ε(L)` attached by the diagonal construction.
    pub eps: Option<f64>,
}

/// Position in `kept` beyond which every ball has `ε(L) <= eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cut {
    pub eps: f64,
    pub position: usize,
}

/// Family-of-origin partition of a scale bucket: each part is a subset of one
/// disjoint cover family.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyCertificate {
    pub k: i32,
    pub families: usize,
    pub verified: bool,
}

#[derive(Clone, Debug)]
pub struct ExtractionResult {
    pub parent_len: usize,
    pub provenance: String,
    /// Increasing in `index`, except for the diagonal construction, which
    /// lists each ball at its first selection in (step, sub-step) order.
    pub kept: Vec<KeptBall>,
    pub schedule: Option<String>,
    pub cut: Option<Cut>,
    pub certificate: Vec<FamilyCertificate>,
    pub redundancy: Option<RedundancyReport>,
    pub ac: Option<AcTable>,
    /// `(step, covered fraction)`
    pub step_fractions: Vec<(i32, f64)>,
    pub metadata: Vec<(String, String)>,
    pub flags: Vec<Flag>,
}

impl ExtractionResult {
    fn new(seq: &BallSequence) -> Self {
        ExtractionResult {
            parent_len: seq.len(),
            provenance: seq.provenance.clone(),
            kept: Vec::new(),
            schedule: None,
            cut: None,
            certificate: Vec::new(),
            redundancy: None,
            ac: None,
            step_fractions: Vec::new(),
            metadata: Vec::new(),
            flags: Vec::new(),
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        self.kept.iter().map(|k| k.index).collect()
    }

    pub fn subsequence(&self, seq: &BallSequence) -> BallSequence {
        seq.subsequence(&self.indices(), format!("{}|extracted", seq.provenance))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,radius,mass_lo,mass_hi,ratio,kept_by\n");
        for k in &self.kept {
            let ratio = k.ratio.map_or(String::new(), |r| format!("{r}"));
            let _ = writeln!(s, "{},{},{},{},{},{}", k.index, k.radius, k.mass.lo, k.mass.hi, ratio, k.kept_by);
        }
        s
    }

    /// Recomputes the cut for another `ε`.
    pub fn cut_for(&self, eps: f64) -> Option<Cut> {
        if self.kept.iter().all(|k| k.eps.is_none()) {
            return None;
        }
        let position = self.kept.iter().rposition(|k| k.eps.is_none_or(|e| e > eps)).map_or(0, |p| p + 1);
        Some(Cut { eps, position })
    }

    fn attach_certificates(&mut self, seq: &BallSequence, mu: &SelfSimilarMeasure, tol: f64, ac: bool) -> Result<()> {
        let mut ix = self.indices();
        ix.sort_unstable();
        let sub = seq.subsequence(&ix, "");
        if sub.is_empty() {
            return Ok(());
        }
        let k_max = sub.buckets().keys().next_back().copied().unwrap_or(0);
        self.redundancy = Some(weak_redundancy_report(&sub, k_max));
        if ac {
            let omegas = certificate_sets(seq, mu);
            let n = sub.len();
            self.ac = Some(ac_empirical_check(&sub, mu, &omegas, &[0, n / 2], tol)?);
        }
        Ok(())
    }
}

fn ratio_of(mass: f64, radius: f64) -> Option<f64> {
    let diam = 2.0 * radius;
    (mass > 0.0 && diam != 1.0).then(|| mass.ln() / diam.ln())
}

fn masses(seq: &BallSequence, mu: &SelfSimilarMeasure, tol: f64) -> Result<Vec<MeasureInterval>> {
    let mut out = Vec::with_capacity(seq.len());
    for b in seq.iter() {
        out.push(mu.eval(&b.to_owned(), tol)?);
    }
    Ok(out)
}

fn kept_ball(seq: &BallSequence, i: usize, mass: MeasureInterval, kept_by: String, eps: Option<f64>) -> KeptBall {
    let radius = seq.radius(i);
    KeptBall { index: i, radius, mass, ratio: ratio_of(mass.mid(), radius), kept_by, eps }
}

/// Open box holding every ball of the sequence and the support of `μ`.
fn enclosing_open_set(seq: &BallSequence, mu: &SelfSimilarMeasure) -> OpenSet {
    let d = seq.dim();
    let mut lo = mu.hull().lo.clone();
    let mut hi = mu.hull().hi.clone();
    for b in seq.iter() {
        for i in 0..d {
            lo[i] = lo[i].min(b.center[i] - b.radius);
            hi[i] = hi[i].max(b.center[i] + b.radius);
        }
    }
    for i in 0..d {
        lo[i] = (lo[i] - 1.0).floor();
        hi[i] = (hi[i] + 1.0).ceil();
    }
    OpenSet::from_box(Aabb { lo, hi }).expect("non-degenerate box")
}

/// Open sets used for the a.c. certificate: a box around the support and the
/// two halves of it along the first axis.
fn certificate_sets(seq: &BallSequence, mu: &SelfSimilarMeasure) -> Vec<OpenSet> {
    let outer = enclosing_open_set(seq, mu);
    let h = mu.hull();
    let mid = 0.5 * (h.lo[0] + h.hi[0]);
    let b = &outer.boxes()[0];
    let mut left = b.clone();
    left.hi[0] = mid;
    let mut right = b.clone();
    right.lo[0] = mid;
    let mut v = vec![outer.clone()];
    for half in [left, right] {
        if let Ok(o) = OpenSet::from_box(half) {
            v.push(o);
        }
    }
    v
}

/// Extraction of a weakly redundant subsequence: for each `k <= k_max` a
/// greedy disjoint cover from the tail `g_k` (all later balls have
/// `|B| <= 2^-k`); the union of these families is the result. Members of a
/// scale bucket `T_k` of the result come from at most `k + 1` families, which
/// is certified by checking each family-of-origin part for disjointness.
pub fn extract_weakly_redundant(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    k_max: u32,
    target: f64,
    tol: f64,
) -> Result<ExtractionResult> {
    check_dim(seq.dim(), mu.dim())?;
    let mut res = ExtractionResult::new(seq);
    let omega = enclosing_open_set(seq, mu);
    let opts = CoverOptions { target, rounds: 1, tol };
    // family of origin of each selected ball
    let mut origin: Vec<Option<u32>> = vec![None; seq.len()];
    for k in 0..=k_max {
        let g = seq.tail_start(k as i32 + 1);
        if g >= seq.len() {
            res.flags.push(Flag::Truncated(format!("no tail with |B| <= 2^-{k} within the sequence")));
            break;
        }
        let fam = greedy_disjoint_cover(seq, mu, &omega, g, &opts)?;
        res.flags.extend(fam.flags.iter().cloned());
        res.step_fractions.push((k as i32, fam.covered_fraction));
        if fam.covered_fraction < target {
            res.flags.push(Flag::Note(format!(
                "family {k} covers {:.4} of the mass, below the target {target}",
                fam.covered_fraction
            )));
        }
        for i in fam.indices {
            origin[i].get_or_insert(k);
        }
    }
    let kept: Vec<usize> = (0..seq.len()).filter(|&i| origin[i].is_some()).collect();
    for &i in &kept {
        let m = mu.eval(&seq.ball(i), tol)?;
        res.kept.push(kept_ball(seq, i, m, format!("family{}", origin[i].unwrap_or(0)), None));
    }
    let sub = seq.subsequence(&kept, "");
    for (&k, members) in sub.buckets() {
        let mut parts: std::collections::BTreeMap<u32, Vec<BallRef<'_>>> = Default::default();
        for &j in members {
            let i = kept[j];
            parts.entry(origin[i].unwrap_or(0)).or_default().push(seq.get(i));
        }
        let verified = parts.values().all(|p| first_conflict(p, 1.0).is_none());
        res.certificate.push(FamilyCertificate { k, families: parts.len(), verified });
    }
    res.metadata.push(("k_max".into(), k_max.to_string()));
    res.metadata.push(("target".into(), target.to_string()));
    res.attach_certificates(seq, mu, tol, false)?;
    if res.kept.is_empty() {
        res.flags.push(Flag::EmptySelection("no ball was extracted".into()));
    }
    Ok(res)
}

/// Outcome of a grid-verified inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tri {
    Holds,
    Fails,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointDim {
    /// `μ(B(x,r)) <= r^{α-ε}` on the grid.
    pub in_e: Tri,
    /// `μ(B(x,r)) >= r^{γ+ε}` on the grid.
    pub in_f: Tri,
}

/// Grid check of the inequalities defining the sets `E_μ` and `F_μ`.
#[allow(clippy::too_many_arguments)]
pub fn point_dim_predicate(
    mu: &SelfSimilarMeasure,
    x: &[f64],
    alpha: f64,
    gamma: f64,
    rho: f64,
    eps: f64,
    r_grid: &[f64],
    tol: f64,
) -> Result<PointDim> {
    check_dim(mu.dim(), x.len())?;
    if !(0.0 <= alpha && alpha <= gamma) || !(eps > 0.0) || !(rho > 0.0) {
        return Err(Error::invalid("need 0 <= alpha <= gamma, eps > 0 and rho > 0"));
    }
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0 && r <= rho)) {
        return Err(Error::invalid("the radius grid must be a nonempty subset of (0, rho]"));
    }
    let (mut e, mut f) = (Tri::Holds, Tri::Holds);
    for &r in r_grid {
        let m = mu.eval(&Ball::new(x.to_vec(), r)?, tol)?;
        let upper = r.powf(alpha - eps);
        let lower = r.powf(gamma + eps);
        e = combine(e, if m.hi <= upper { Tri::Holds } else if m.lo > upper { Tri::Fails } else { Tri::Undetermined });
        f = combine(f, if m.lo >= lower { Tri::Holds } else if m.hi < lower { Tri::Fails } else { Tri::Undetermined });
    }
    Ok(PointDim { in_e: e, in_f: f })
}

fn combine(a: Tri, b: Tri) -> Tri {
    match (a, b) {
        (Tri::Fails, _) | (_, Tri::Fails) => Tri::Fails,
        (Tri::Undetermined, _) | (_, Tri::Undetermined) => Tri::Undetermined,
        _ => Tri::Holds,
    }
}

fn lower_ok(m: &MeasureInterval, radius: f64, dim: f64, eps: f64) -> bool {
    m.hi <= (2.0 * radius).powf(dim - eps)
}

fn upper_ok(m: &MeasureInterval, radius: f64, dim: f64, eps: f64) -> bool {
    m.lo >= (2.0 * radius).powf(dim + eps)
}

/// Keeps the balls with `μ(B) <= |B|^{dim μ - ε}` (upper end of the enclosure).
pub fn extract_lower_conditioned(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    eps: f64,
    tol: f64,
) -> Result<ExtractionResult> {
    filter_conditioned(seq, mu, eps, tol, "lower", |m, r, d| lower_ok(m, r, d, eps))
}

/// Keeps the balls with `μ(B) >= |B|^{dim μ + ε}` (lower end of the enclosure).
/// `v' = (v + 1) / 2` when not given.
pub fn extract_upper_conditioned(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    eps: f64,
    v: f64,
    v_prime: Option<f64>,
    tol: f64,
) -> Result<ExtractionResult> {
    let vp = v_prime.unwrap_or((v + 1.0) / 2.0);
    if !(0.0 < v && v < vp && vp < 1.0) {
        return Err(Error::invalid("need 0 < v < v' < 1"));
    }
    let mut res = filter_conditioned(seq, mu, eps, tol, "upper", |m, r, d| upper_ok(m, r, d, eps))?;
    res.metadata.push(("v".into(), v.to_string()));
    res.metadata.push(("v_prime".into(), vp.to_string()));
    Ok(res)
}

fn filter_conditioned(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    eps: f64,
    tol: f64,
    label: &str,
    keep: impl Fn(&MeasureInterval, f64, f64) -> bool,
) -> Result<ExtractionResult> {
    check_dim(seq.dim(), mu.dim())?;
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be positive"));
    }
    let dim = mu.dimension()?;
    let mut res = ExtractionResult::new(seq);
    for (i, m) in masses(seq, mu, tol)?.into_iter().enumerate() {
        if keep(&m, seq.radius(i), dim) {
            res.kept.push(kept_ball(seq, i, m, label.into(), None));
        }
    }
    res.metadata.push(("eps".into(), eps.to_string()));
    res.metadata.push(("dim_mu".into(), dim.to_string()));
    if res.kept.is_empty() {
        res.flags.push(Flag::EmptySelection(format!("no ball satisfies the {label} condition")));
    }
    res.attach_certificates(seq, mu, tol, true)?;
    Ok(res)
}

/// Tolerance schedule `ε_n`, `n >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// `ε_n = 1 / (n + 1)`
    Harmonic,
    /// `ε_n = a / n^p`
    Power { a: f64, p: f64 },
    /// Explicit values; the last one repeats.
    Explicit(Vec<f64>),
}

impl Schedule {
    pub fn eps(&self, n: usize) -> f64 {
        let n = n.max(1);
        match self {
            Schedule::Harmonic => 1.0 / (n as f64 + 1.0),
            Schedule::Power { a, p } => a / (n as f64).powf(*p),
            Schedule::Explicit(v) => v[(n - 1).min(v.len() - 1)],
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Schedule::Harmonic => "eps_n=1/(n+1)".into(),
            Schedule::Power { a, p } => format!("eps_n={a}/n^{p}"),
            Schedule::Explicit(v) => format!("explicit:{v:?}"),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Schedule::Harmonic => true,
            Schedule::Power { a, p } => *a > 0.0 && *p > 0.0,
            Schedule::Explicit(v) => !v.is_empty() && v.iter().all(|e| *e > 0.0) && v.windows(2).all(|w| w[1] <= w[0]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("the schedule must be positive and non-increasing"))
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConditionedOptions {
    pub schedule: Schedule,
    pub k_max: u32,
    /// Fraction of the residual mass each sub-step must cover.
    pub target: f64,
    pub max_sub_steps: usize,
    /// `ε` used for the reported cut.
    pub report_eps: f64,
    pub tol: f64,
    pub certify_ac: bool,
}

impl Default for ConditionedOptions {
    fn default() -> Self {
        ConditionedOptions {
            schedule: Schedule::Harmonic,
            k_max: 16,
            target: 0.5,
            max_sub_steps: 64,
            report_eps: 0.1,
            tol: 1e-10,
            certify_ac: true,
        }
    }
}

/// The diagonal construction. Step `k` covers the support with balls from the
/// tail `g_k` (`|B| <= 2^-k`, `|B| < 1`); sub-step `i` covers `target` of the
/// residual mass with balls satisfying both conditions at `ε_{i+k}` and
/// disjoint from the balls chosen earlier in the step. Balls are listed in
/// construction order at their first selection, with the `ε` used there.
pub fn extract_conditioned(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    opts: &ConditionedOptions,
) -> Result<ExtractionResult> {
    check_dim(seq.dim(), mu.dim())?;
    opts.schedule.validate()?;
    if !(opts.target > 0.0 && opts.target < 1.0) {
        return Err(Error::invalid("target must lie in (0,1)"));
    }
    let dim = mu.dimension()?;
    let mass = masses(seq, mu, opts.tol)?;
    let omega = enclosing_open_set(seq, mu);
    let omega_mass = open_set_mass(mu, &omega, opts.tol)?;
    let mut res = ExtractionResult::new(seq);
    let mut seen = vec![false; seq.len()];

    let mut order: Vec<usize> = (0..seq.len()).filter(|&i| 2.0 * seq.radius(i) < 1.0).collect();
    order.sort_by(|&a, &b| mass[b].mid().total_cmp(&mass[a].mid()).then(a.cmp(&b)));

    for k in 0..=opts.k_max {
        let g = seq.tail_start(k as i32 + 1);
        if g >= seq.len() {
            res.flags.push(Flag::Truncated(format!("step {k}: no tail with |B| <= 2^-{k}")));
            break;
        }
        let mut sel = Selector::new(seq);
        let mut sub = 0;
        while sub < opts.max_sub_steps {
            sub += 1;
            let eps = opts.schedule.eps(sub + k as usize);
            let cands: Vec<(usize, f64)> = order
                .iter()
                .filter(|&&i| i >= g)
                .filter(|&&i| lower_ok(&mass[i], seq.radius(i), dim, eps) && upper_ok(&mass[i], seq.radius(i), dim, eps))
                .filter(|&&i| omega.contains_ball(&seq.get(i)))
                .map(|&i| (i, mass[i].mid()))
                .collect();
            let before = sel.selected.len();
            let stop = sel.mass + opts.target * (omega_mass - sel.mass);
            sel.pass(&cands, stop);
            let mut fresh: Vec<usize> = sel.selected[before..].iter().copied().filter(|&i| !seen[i]).collect();
            fresh.sort_unstable();
            for i in fresh {
                seen[i] = true;
                res.kept.push(kept_ball(seq, i, mass[i], format!("step{k}.{sub}"), Some(eps)));
            }
            if sel.selected.len() == before {
                if sub == 1 {
                    res.flags.push(Flag::Truncated(format!(
                        "step {k}: no ball passes both conditions at eps={eps}"
                    )));
                }
                break;
            }
            if omega_mass - sel.mass <= opts.tol {
                break;
            }
        }
        let fraction = if omega_mass > 0.0 { sel.mass / omega_mass } else { 0.0 };
        res.step_fractions.push((k as i32, fraction));
    }
    res.schedule = Some(opts.schedule.describe());
    res.cut = res.cut_for(opts.report_eps);
    res.metadata.push(("dim_mu".into(), dim.to_string()));
    res.metadata.push(("target".into(), opts.target.to_string()));
    if res.kept.is_empty() {
        res.flags.push(Flag::EmptySelection("the diagonal construction kept no ball".into()));
    }
    res.attach_certificates(seq, mu, opts.tol, opts.certify_ac)?;
    Ok(res)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceWindow {
    pub g: usize,
    /// `μ(∪_{n >= g, B_n thin} v B_n)`
    pub thin_union: f64,
    /// `μ(∪_{n >= g, B_n fat} B_n)`
    pub fat_union: f64,
    /// The unions were bounded by the sum of masses instead of measured.
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelevanceReport {
    /// `μ(B) <= |B|^{α+ε}`
    pub thin: Vec<usize>,
    /// `μ(B) >= |B|^{α-ε}`
    pub fat: Vec<usize>,
    pub windows: Vec<RelevanceWindow>,
}

/// Splits the balls into the thin class (`μ(B) <= |B|^{α+ε}`) and the fat
/// class (`μ(B) >= |B|^{α-ε}`), and measures the unions of `v`-shrunk thin
/// balls and of fat balls over tail windows `n >= g`.
pub fn classify_relevance(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    eps: f64,
    v: f64,
    tol: f64,
) -> Result<RelevanceReport> {
    check_dim(seq.dim(), mu.dim())?;
    if !(v > 0.0 && v < 1.0) || !(eps > 0.0) {
        return Err(Error::invalid("need 0 < v < 1 and eps > 0"));
    }
    let alpha = mu.dimension()?;
    let mass = masses(seq, mu, tol)?;
    let mut thin = Vec::new();
    let mut fat = Vec::new();
    for (i, m) in mass.iter().enumerate() {
        let diam = 2.0 * seq.radius(i);
        if m.hi <= diam.powf(alpha + eps) {
            thin.push(i);
        }
        if m.lo >= diam.powf(alpha - eps) {
            fat.push(i);
        }
    }
    let n = seq.len();
    let mut windows = Vec::new();
    for j in 0..8 {
        let g = n * j / 8;
        let thin_balls: Vec<Ball> = thin
            .iter()
            .filter(|&&i| i >= g)
            .map(|&i| seq.ball(i).scale(v))
            .collect::<Result<_>>()?;
        let fat_balls: Vec<Ball> = fat.iter().filter(|&&i| i >= g).map(|&i| seq.ball(i)).collect();
        let (t, tb) = union_mass(mu, &thin_balls, tol)?;
        let (f, fb) = union_mass(mu, &fat_balls, tol)?;
        windows.push(RelevanceWindow { g, thin_union: t, fat_union: f, bounded: tb || fb });
    }
    Ok(RelevanceReport { thin, fat, windows })
}

const UNION_CAP: usize = 64;

/// `μ` of a union of closed balls: exact decomposition in `d = 1` or for
/// small families, otherwise the sum of masses (flagged as a bound).
fn union_mass(mu: &SelfSimilarMeasure, balls: &[Ball], tol: f64) -> Result<(f64, bool)> {
    if balls.is_empty() {
        return Ok((0.0, false));
    }
    let d = balls[0].dim();
    if d == 1 {
        let mut iv: Vec<(f64, f64)> = balls.iter().map(|b| (b.center()[0] - b.radius(), b.center()[0] + b.radius())).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        let mut total = 0.0;
        for (lo, hi) in merged {
            let b = Aabb::new(vec![lo], vec![hi])?;
            total += mu.eval_box(&b, crate::measure::Closure::Closed, tol, crate::measure::DEFAULT_NODE_BUDGET)?.mid();
        }
        return Ok((total.min(1.0), false));
    }
    if balls.len() <= UNION_CAP {
        let boxes: Vec<Aabb> = balls.iter().map(Ball::to_box).collect();
        let set = OpenSet::new(boxes)?;
        let mut total = 0.0;
        for p in set.disjoint_pieces() {
            total += mu.eval_box(&p, crate::measure::Closure::Closed, tol, crate::measure::DEFAULT_NODE_BUDGET)?.mid();
        }
        return Ok((total.min(1.0), false));
    }
    let mut total = 0.0;
    for b in balls {
        total += mu.eval(b, tol)?.mid();
    }
    Ok((total.min(1.0), true))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leb() -> SelfSimilarMeasure {
        SelfSimilarMeasure::lebesgue(1).unwrap()
    }

    fn dyadic_inballs(depth: u32) -> BallSequence {
        let mut s = BallSequence::new(1, "dyadic").unwrap();
        for k in 0..=depth {
            let r = 0.5f64.powi(k as i32 + 1);
            for j in 0..(1u64 << k) {
                s.push(&[(2 * j + 1) as f64 * r], r).unwrap();
            }
        }
        s
    }

    /// Cantor orbit balls `B(f_w(0), 3·3^-|w|)`.
    fn cantor_orbit(depth: u32) -> BallSequence {
        let mut s = BallSequence::new(1, "orbit").unwrap();
        for n in 0..=depth {
            let c = 3f64.powi(-(n as i32));
            for w in 0..(1u64 << n) {
                let mut x = 0.0;
                for j in 0..n {
                    if (w >> (n - 1 - j)) & 1 == 1 {
                        x += 2.0 * 3f64.powi(-(j as i32) - 1);
                    }
                }
                s.push(&[x], 3.0 * c).unwrap();
            }
        }
        s
    }

    #[test]
    fn weakly_redundant_dyadic() {
        let s = dyadic_inballs(10);
        let r = extract_weakly_redundant(&s, &leb(), 8, 0.75, 1e-10).unwrap();
        assert!(!r.kept.is_empty());
        assert!(r.kept.windows(2).all(|w| w[0].index < w[1].index));
        for c in &r.certificate {
            assert!(c.verified);
            assert!(c.families as i32 <= c.k + 1, "{c:?}");
        }
    }

    #[test]
    fn point_dim_examples() {
        let leb = leb();
        // with radius r the E-inequality 2r <= r^0.9 needs r <= 2^-10
        let fine: Vec<f64> = (11..20).map(|k| 2f64.powi(-k)).collect();
        let p = point_dim_predicate(&leb, &[0.5], 1.0, 1.0, 0.25, 0.1, &fine, 1e-12).unwrap();
        assert_eq!(p, PointDim { in_e: Tri::Holds, in_f: Tri::Holds });
        let coarse = [0.25];
        let p = point_dim_predicate(&leb, &[0.5], 1.0, 1.0, 0.25, 0.1, &coarse, 1e-12).unwrap();
        assert_eq!(p.in_e, Tri::Fails);

        let cantor = SelfSimilarMeasure::cantor(0.5).unwrap();
        let d = 2f64.ln() / 3f64.ln();
        let grid: Vec<f64> = (1..12).map(|m| 3f64.powi(-m)).collect();
        let p = point_dim_predicate(&cantor, &[0.0], d, d, 1.0 / 3.0, 0.05, &grid, 1e-12).unwrap();
        assert_eq!(p, PointDim { in_e: Tri::Holds, in_f: Tri::Holds });
        let grid: Vec<f64> = (2..8).map(|m| 3f64.powi(-m)).collect();
        let p = point_dim_predicate(&cantor, &[0.5], d, d, 1.0, 0.05, &grid, 1e-12).unwrap();
        assert_eq!(p.in_f, Tri::Fails);
    }

    #[test]
    fn lower_and_upper_filters() {
        let s = dyadic_inballs(6);
        let r = extract_lower_conditioned(&s, &leb(), 0.5, 1e-12).unwrap();
        assert_eq!(r.kept.len(), s.len());
        let r = extract_upper_conditioned(&s, &leb(), 0.5, 0.5, None, 1e-12).unwrap();
        assert_eq!(r.kept.len(), s.len());
        assert!(r.metadata.contains(&("v_prime".to_string(), "0.75".to_string())));

        let cantor = SelfSimilarMeasure::cantor(0.5).unwrap();
        let mut g = BallSequence::new(1, "gap").unwrap();
        g.push(&[0.5], 0.1).unwrap();
        g.push(&[0.5], 1.0).unwrap();
        let low = extract_lower_conditioned(&g, &cantor, 0.1, 1e-12).unwrap();
        // gap ball has zero mass; the big ball has |B| = 2 and 1 <= 2^{dim - eps}
        assert_eq!(low.indices(), vec![0, 1]);
        let up = extract_upper_conditioned(&g, &cantor, 0.1, 0.5, None, 1e-12).unwrap();
        assert!(!up.indices().contains(&0));

        let orbit = cantor_orbit(6);
        let dim = cantor.dimension().unwrap();
        let up = extract_upper_conditioned(&orbit, &cantor, 0.3, 0.5, None, 1e-12).unwrap();
        assert!(!up.kept.is_empty());
        for k in &up.kept {
            let m = cantor.eval(&orbit.ball(k.index), 1e-12).unwrap();
            assert!(m.lo >= (2.0 * k.radius).powf(dim + 0.3));
        }
        let low_orbit = extract_lower_conditioned(&orbit, &cantor, 0.3, 1e-12).unwrap();
        for k in &low_orbit.kept {
            let m = cantor.eval(&orbit.ball(k.index), 1e-12).unwrap();
            assert!(m.hi <= (2.0 * k.radius).powf(dim - 0.3));
        }
        // refiltering is idempotent
        let sub = low.subsequence(&g);
        assert_eq!(extract_lower_conditioned(&sub, &cantor, 0.1, 1e-12).unwrap().kept.len(), sub.len());
    }

    #[test]
    fn conditioned_on_lebesgue_gives_unit_ratios() {
        let s = dyadic_inballs(10);
        let opts = ConditionedOptions { k_max: 8, certify_ac: false, ..Default::default() };
        let r = extract_conditioned(&s, &leb(), &opts).unwrap();
        assert!(!r.kept.is_empty());
        for k in &r.kept {
            let ratio = k.ratio.unwrap();
            // μ(B) = |B| for dyadic inballs in [0,1]
            assert!((ratio - 1.0).abs() <= 1e-12, "{ratio}");
        }
    }

    #[test]
    fn conditioned_on_cantor_orbit() {
        let mu = SelfSimilarMeasure::cantor(0.7).unwrap();
        let s = cantor_orbit(10);
        let opts = ConditionedOptions { certify_ac: false, ..Default::default() };
        let r = extract_conditioned(&s, &mu, &opts).unwrap();
        let dim = mu.dimension().unwrap();
        let cut = r.cut.unwrap();
        assert!(cut.position < r.kept.len());
        for k in &r.kept[cut.position..] {
            assert!((k.ratio.unwrap() - dim).abs() <= 0.1 + 1e-12);
        }
        let tiny = ConditionedOptions { schedule: Schedule::Explicit(vec![1e-9]), certify_ac: false, ..Default::default() };
        let r = extract_conditioned(&s, &mu, &tiny).unwrap();
        assert!(r.flags.iter().any(|f| matches!(f, Flag::Truncated(_))));
    }

    #[test]
    fn relevance_classes() {
        let mu = SelfSimilarMeasure::cantor(0.5).unwrap();
        let mut s = BallSequence::new(1, "x").unwrap();
        for n in 2..40 {
            s.push(&[0.5], 0.1 / n as f64).unwrap();
        }
        let r = classify_relevance(&s, &mu, 0.1, 0.5, 1e-12).unwrap();
        assert_eq!(r.thin.len(), s.len());
        assert!(r.fat.is_empty());
        assert!(r.windows.iter().all(|w| w.thin_union == 0.0));

        // Lebesgue balls inside [0,1] have μ(B) = |B|: neither class
        let mut t = BallSequence::new(1, "y").unwrap();
        t.push(&[0.5], 0.25).unwrap();
        let r = classify_relevance(&t, &leb(), 0.1, 0.5, 1e-12).unwrap();
        assert!(r.fat.is_empty() && r.thin.is_empty());

        // weights (0.9, 0.1): μ(B(0,1/9)) = 0.81 >= (2/9)^{α-ε}
        let heavy = SelfSimilarMeasure::cantor(0.9).unwrap();
        let mut u = BallSequence::new(1, "z").unwrap();
        for _ in 0..5 {
            u.push(&[0.0], 1.0 / 9.0).unwrap();
        }
        let r = classify_relevance(&u, &heavy, 0.1, 0.5, 1e-12).unwrap();
        assert_eq!(r.fat, vec![0, 1, 2, 3, 4]);
    }
}
