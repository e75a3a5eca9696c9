//! Self-similar measures generated by homothetic IFS on `R^d`.
//!
//! `μ(B)` is enclosed in a certified interval by breadth-first refinement of
//! cylinders `f_w(H)`, where `H` is the bounding box of the attractor. Each
//! cylinder carries the weight `p_w` of the term `p_w μ∘f_w^{-1}` it supports;
//! cylinders inside the target count fully, cylinders outside count zero and
//! the rest (straddlers) are refined until their total weight drops below the
//! requested tolerance.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Flag, Result};
use crate::geometry::exact::{dd_cmp, sign_of_sum, DoubleDouble, Term};
use crate::geometry::{check_dim, Aabb, Ball, BallRef};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// Contracting homothety `x ↦ ratio·x + translation`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    pub ratio: f64,
    pub translation: Vec<f64>,
}

impl SimilarityMap {
    pub fn new(ratio: f64, translation: Vec<f64>) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!("similarity ratio must lie in (0,1), got {ratio}")));
        }
        Ok(SimilarityMap { ratio, translation })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.translation).map(|(xi, ti)| self.ratio * xi + ti).collect()
    }

    pub fn fixed_point(&self) -> Vec<f64> {
        self.translation.iter().map(|t| t / (1.0 - self.ratio)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Lebesgue,
    General,
}

/// `μ = Σ p_i μ∘f_i^{-1}` with homothetic `f_i`. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SelfSimilarMeasure {
    dim: usize,
    maps: Vec<SimilarityMap>,
    probs: Vec<f64>,
    osc_asserted: bool,
    kind: Kind,
    hull: Aabb,
}

/// Certified enclosure `lo <= μ(target) <= hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureInterval {
    pub lo: f64,
    pub hi: f64,
    pub budget_exceeded: bool,
}

impl MeasureInterval {
    pub fn exact(v: f64) -> Self {
        MeasureInterval { lo: v, hi: v, budget_exceeded: false }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

/// How a target set treats its boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    Closed,
    Open,
}

/// Target set with each bound given as an exact sum `x + y` of two doubles,
/// so a ball `c ± r` is compared without rounding its endpoints.
#[derive(Clone, Debug)]
pub struct Target {
    lo: Vec<(f64, f64)>,
    hi: Vec<(f64, f64)>,
    closure: Closure,
}

impl Target {
    pub fn ball(b: &Ball) -> Self {
        Target {
            lo: b.center().iter().map(|c| (*c, -b.radius())).collect(),
            hi: b.center().iter().map(|c| (*c, b.radius())).collect(),
            closure: Closure::Closed,
        }
    }

    /// The closed box `A ∩ B` of two balls, empty when they are disjoint.
    pub fn ball_intersection(a: &BallRef<'_>, b: &BallRef<'_>) -> Option<Self> {
        if a.disjoint(b) {
            return None;
        }
        let pick = |x: (f64, f64), y: (f64, f64), larger: bool| {
            let ord = sign_of_sum(&[Term::Val(x.0), Term::Val(x.1), Term::Val(-y.0), Term::Val(-y.1)]);
            if (ord == Ordering::Greater) == larger {
                x
            } else {
                y
            }
        };
        let (lo, hi) = a
            .center
            .iter()
            .zip(b.center)
            .map(|(&ca, &cb)| {
                (
                    pick((ca, -a.radius), (cb, -b.radius), true),
                    pick((ca, a.radius), (cb, b.radius), false),
                )
            })
            .unzip();
        Some(Target { lo, hi, closure: Closure::Closed })
    }

    pub fn boxed(b: &Aabb, closure: Closure) -> Self {
        Target {
            lo: b.lo.iter().map(|x| (*x, 0.0)).collect(),
            hi: b.hi.iter().map(|x| (*x, 0.0)).collect(),
            closure,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn rounded_box(&self) -> Aabb {
        Aabb {
            lo: self.lo.iter().map(|(x, y)| x + y).collect(),
            hi: self.hi.iter().map(|(x, y)| x + y).collect(),
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Class {
    Inside,
    Outside,
    Straddle,
}

struct Node {
    scale: DoubleDouble,
    shift: Vec<DoubleDouble>,
    weight: f64,
    depth: u32,
}

impl SelfSimilarMeasure {
    pub fn new(maps: Vec<SimilarityMap>, probs: Vec<f64>, osc_asserted: bool) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::invalid("a self-similar measure needs at least two maps"));
        }
        check_dim(maps.len(), probs.len())?;
        let dim = maps[0].translation.len();
        if dim == 0 {
            return Err(Error::invalid("maps must act on R^d with d >= 1"));
        }
        for m in &maps {
            check_dim(dim, m.translation.len())?;
            if !(m.ratio > 0.0 && m.ratio < 1.0) {
                return Err(Error::invalid("similarity ratios must lie in (0,1)"));
            }
            // f([0,1]^d) ⊆ [0,1]^d keeps the attractor in the unit cube
            let tol = 1e-12;
            if m.translation.iter().any(|t| *t < -tol || t + m.ratio > 1.0 + tol) {
                return Err(Error::invalid(
                    "each map must send [0,1]^d into itself (normalize the IFS first)",
                ));
            }
        }
        if probs.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::invalid("probabilities must be strictly positive"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("probabilities must sum to 1, got {total}")));
        }
        let hull = attractor_hull(&maps, dim);
        Ok(SelfSimilarMeasure { dim, maps, probs, osc_asserted, kind: Kind::General, hull })
    }

    /// Lebesgue measure on `[0,1]^d`, represented by the `2^d` halving maps.
    pub fn lebesgue(d: usize) -> Result<Self> {
        if d == 0 || d > 16 {
            return Err(Error::invalid("lebesgue dimension must lie in 1..=16"));
        }
        let n = 1usize << d;
        let maps = (0..n)
            .map(|mask| SimilarityMap {
                ratio: 0.5,
                translation: (0..d).map(|i| 0.5 * ((mask >> i) & 1) as f64).collect(),
            })
            .collect();
        Ok(SelfSimilarMeasure {
            dim: d,
            maps,
            probs: vec![1.0 / n as f64; n],
            osc_asserted: true,
            kind: Kind::Lebesgue,
            hull: Aabb::unit(d),
        })
    }

    /// Middle-thirds Cantor measure with weights `(p, 1 - p)`.
    pub fn cantor(p: f64) -> Result<Self> {
        SelfSimilarMeasure::new(
            vec![
                SimilarityMap::new(1.0 / 3.0, vec![0.0])?,
                SimilarityMap::new(1.0 / 3.0, vec![2.0 / 3.0])?,
            ],
            vec![p, 1.0 - p],
            true,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn osc_asserted(&self) -> bool {
        self.osc_asserted
    }

    pub fn is_lebesgue(&self) -> bool {
        self.kind == Kind::Lebesgue
    }

    /// Bounding box of the attractor `K`.
    pub fn hull(&self) -> &Aabb {
        &self.hull
    }

    /// Sup-norm diameter `|K|`.
    pub fn attractor_diameter(&self) -> f64 {
        self.hull.diameter()
    }

    /// True when the support is the closure of its interior (checked for the
    /// built-in Lebesgue measure and for IFS whose first-level cylinders tile
    /// the unit cube).
    pub fn support_is_regular_closed(&self) -> bool {
        if self.is_lebesgue() {
            return true;
        }
        let vol: f64 = self.maps.iter().map(|m| m.ratio.powi(self.dim as i32)).sum();
        (vol - 1.0).abs() < 1e-12
    }

    pub fn eval(&self, b: &Ball, tol: f64) -> Result<MeasureInterval> {
        check_dim(self.dim, b.dim())?;
        self.eval_target(&Target::ball(b), tol, DEFAULT_NODE_BUDGET)
    }

    /// Certified enclosure of `μ(target)`.
    pub fn eval_box(
        &self,
        target: &Aabb,
        closure: Closure,
        tol: f64,
        budget: usize,
    ) -> Result<MeasureInterval> {
        self.eval_target(&Target::boxed(target, closure), tol, budget)
    }

    pub fn eval_target(&self, target: &Target, tol: f64, budget: usize) -> Result<MeasureInterval> {
        check_dim(self.dim, target.dim())?;
        if !(tol > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        if self.is_lebesgue() {
            return Ok(MeasureInterval::exact(
                target.rounded_box().intersect(&self.hull).map_or(0.0, |b| b.volume()),
            ));
        }
        let mut inside = 0.0;
        let mut level = vec![Node {
            scale: DoubleDouble::ONE,
            shift: vec![DoubleDouble::ZERO; self.dim],
            weight: 1.0,
            depth: 0,
        }];
        let mut nodes = 1usize;
        loop {
            let mut straddling = Vec::new();
            let mut straddle_mass = 0.0;
            for node in level {
                match self.classify(&node, target) {
                    Class::Inside => inside += node.weight,
                    Class::Outside => {}
                    Class::Straddle => {
                        straddle_mass += node.weight;
                        straddling.push(node);
                    }
                }
            }
            if straddle_mass <= tol || straddling.is_empty() {
                return Ok(interval(inside, straddle_mass, false));
            }
            let next = straddling.len() * self.maps.len();
            if nodes + next > budget {
                return Ok(interval(inside, straddle_mass, true));
            }
            nodes += next;
            level = straddling
                .into_iter()
                .flat_map(|n| {
                    self.maps.iter().zip(&self.probs).map(move |(m, p)| Node {
                        scale: n.scale.mul_f64(m.ratio),
                        shift: n.shift.iter().zip(&m.translation).map(|(s, t)| n.scale.mul_f64(*t) + *s).collect(),
                        weight: n.weight * p,
                        depth: n.depth + 1,
                    })
                })
                .collect();
        }
    }

    /// Classifies the cylinder `f_w(H)` against the target. Cylinder bounds
    /// carry a double-double rounding allowance.
    fn classify(&self, n: &Node, t: &Target) -> Class {
        let mut inside = true;
        for i in 0..self.dim {
            let lo = n.scale.mul_f64(self.hull.lo[i]) + n.shift[i];
            let hi = n.scale.mul_f64(self.hull.hi[i]) + n.shift[i];
            let slack = (n.depth as f64 + 3.0) * 1e-30 * (1.0 + lo.hi.abs().max(hi.hi.abs()));
            let (tlx, tly) = t.lo[i];
            let (thx, thy) = t.hi[i];
            let above_lo = dd_cmp(lo, -slack, tlx, tly);
            let below_hi = dd_cmp(hi, slack, thx, thy);
            let hi_vs_tlo = dd_cmp(hi, slack, tlx, tly);
            let lo_vs_thi = dd_cmp(lo, -slack, thx, thy);
            match t.closure {
                Closure::Closed => {
                    if hi_vs_tlo == Ordering::Less || lo_vs_thi == Ordering::Greater {
                        return Class::Outside;
                    }
                    inside &= above_lo != Ordering::Less && below_hi != Ordering::Greater;
                }
                Closure::Open => {
                    if hi_vs_tlo != Ordering::Greater || lo_vs_thi != Ordering::Less {
                        return Class::Outside;
                    }
                    inside &= above_lo == Ordering::Greater && below_hi == Ordering::Less;
                }
            }
        }
        if inside {
            Class::Inside
        } else {
            Class::Straddle
        }
    }

    /// `dim(μ) = (Σ p_i log p_i) / (Σ p_i log c_i)`, valid under the open set
    /// condition; refuses when OSC has not been asserted.
    pub fn dimension(&self) -> Result<f64> {
        if self.is_lebesgue() {
            return Ok(self.dim as f64);
        }
        if !self.osc_asserted {
            return Err(Error::Refused(
                "the entropy/Lyapunov quotient needs the open set condition; assert `osc 1` \
                 if the IFS satisfies it"
                    .into(),
            ));
        }
        let entropy: f64 = self.probs.iter().map(|p| p * p.ln()).sum();
        let lyapunov: f64 = self.maps.iter().zip(&self.probs).map(|(m, p)| p * m.ratio.ln()).sum();
        Ok(entropy / lyapunov)
    }

    /// All `m^depth` cylinders `f_w([0,1]^d)` with weights `p_w`.
    pub fn cylinders(&self, depth: u32, budget: usize) -> Result<Vec<(Aabb, f64)>> {
        let m = self.maps.len() as f64;
        if m.powi(depth as i32) > budget as f64 {
            let suggested = ((budget as f64).ln() / m.ln()).floor() as u32;
            return Err(Error::Budget(format!(
                "{} cylinders at depth {depth} exceed the budget of {budget}; try depth {suggested}",
                m.powi(depth as i32)
            )));
        }
        let mut level = vec![(1.0f64, vec![0.0; self.dim], 1.0f64)];
        for _ in 0..depth {
            level = level
                .into_iter()
                .flat_map(|(s, t, w)| {
                    self.maps.iter().zip(&self.probs).map(move |(m, p)| {
                        (s * m.ratio, t.iter().zip(&m.translation).map(|(a, b)| s * b + a).collect(), w * p)
                    })
                })
                .collect();
        }
        Ok(level
            .into_iter()
            .map(|(s, t, w)| {
                (Aabb { lo: t.clone(), hi: t.iter().map(|x| x + s).collect() }, w)
            })
            .collect())
    }

    /// Words of length `depth` in lexicographic order, with composed maps.
    pub(crate) fn words(&self, depth: u32) -> Vec<(Vec<usize>, f64, Vec<f64>)> {
        let mut level = vec![(Vec::new(), 1.0f64, vec![0.0; self.dim])];
        for _ in 0..depth {
            level = level
                .into_iter()
                .flat_map(|(w, s, t): (Vec<usize>, f64, Vec<f64>)| {
                    self.maps.iter().enumerate().map(move |(i, m)| {
                        let mut w2 = w.clone();
                        w2.push(i);
                        (w2, s * m.ratio, t.iter().zip(&m.translation).map(|(a, b)| s * b + a).collect())
                    })
                })
                .collect();
        }
        level
    }

    /// Parses the measure file format, or the built-in `lebesgue d`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, head) = lines.next().ok_or_else(|| Error::parse(1, "empty measure file"))?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.first() == Some(&"lebesgue") {
            let d = toks
                .get(1)
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(ln, "expected `lebesgue d`"))?;
            return SelfSimilarMeasure::lebesgue(d).map_err(|e| Error::parse(ln, e.to_string()));
        }
        if toks.len() != 2 {
            return Err(Error::parse(ln, "expected header `m d`"));
        }
        let m: usize = toks[0].parse().map_err(|_| Error::parse(ln, "bad map count"))?;
        let d: usize = toks[1].parse().map_err(|_| Error::parse(ln, "bad dimension"))?;
        let mut maps = Vec::with_capacity(m);
        let mut probs = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, line) = lines.next().ok_or_else(|| Error::parse(ln, "missing map line"))?;
            let nums: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(ln, format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if nums.len() != d + 2 {
                return Err(Error::parse(ln, format!("expected {} numbers", d + 2)));
            }
            maps.push(SimilarityMap::new(nums[0], nums[1..=d].to_vec()).map_err(|e| Error::parse(ln, e.to_string()))?);
            probs.push(nums[d + 1]);
        }
        let (ln, osc) = lines.next().ok_or_else(|| Error::parse(ln, "missing `osc 0|1` line"))?;
        let osc = match osc.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["osc", "0"] => false,
            ["osc", "1"] => true,
            _ => return Err(Error::parse(ln, "expected `osc 0` or `osc 1`")),
        };
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content after `osc` line"));
        }
        SelfSimilarMeasure::new(maps, probs, osc).map_err(|e| Error::parse(ln, e.to_string()))
    }
}

impl fmt::Display for SelfSimilarMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_lebesgue() {
            return writeln!(f, "lebesgue {}", self.dim);
        }
        writeln!(f, "{} {}", self.maps.len(), self.dim)?;
        for (m, p) in self.maps.iter().zip(&self.probs) {
            write!(f, "{}", m.ratio)?;
            for t in &m.translation {
                write!(f, " {t}")?;
            }
            writeln!(f, " {p}")?;
        }
        writeln!(f, "osc {}", u8::from(self.osc_asserted))
    }
}

fn interval(inside: f64, straddle: f64, budget_exceeded: bool) -> MeasureInterval {
    MeasureInterval { lo: inside, hi: (inside + straddle).min(1.0), budget_exceeded }
}

/// For positive-ratio homotheties the attractor's extent along each axis runs
/// between the smallest and largest fixed-point coordinate. The rounded box is
/// pushed outward until every map provably sends it into itself, so it is
/// certain to contain the attractor.
fn attractor_hull(maps: &[SimilarityMap], d: usize) -> Aabb {
    let fixed: Vec<Vec<f64>> = maps.iter().map(SimilarityMap::fixed_point).collect();
    let mut lo: Vec<f64> = (0..d).map(|i| fixed.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)).collect();
    let mut hi: Vec<f64> = (0..d).map(|i| fixed.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)).collect();
    for i in 0..d {
        for _ in 0..200 {
            let lo_ok = maps.iter().all(|m| {
                sign_of_sum(&[Term::Prod(m.ratio, lo[i]), Term::Val(m.translation[i]), Term::Val(-lo[i])])
                    != Ordering::Less
            });
            let hi_ok = maps.iter().all(|m| {
                sign_of_sum(&[Term::Prod(m.ratio, hi[i]), Term::Val(m.translation[i]), Term::Val(-hi[i])])
                    != Ordering::Greater
            });
            if lo_ok && hi_ok {
                break;
            }
            if !lo_ok {
                lo[i] = lo[i].next_down();
            }
            if !hi_ok {
                hi[i] = hi[i].next_up();
            }
        }
    }
    Aabb { lo, hi }
}

/// `eval_measure`.
pub fn eval_measure(mu: &SelfSimilarMeasure, b: &Ball, tol: f64) -> Result<MeasureInterval> {
    mu.eval(b, tol)
}

/// Sampled ratios `log μ(B(x,r)) / log r`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalDimProfile {
    pub point: Vec<f64>,
    /// `(r, ratio)`, `None` when the enclosure of `μ(B(x,r))` contains 0.
    pub samples: Vec<(f64, Option<f64>)>,
    pub liminf_est: Option<f64>,
    pub limsup_est: Option<f64>,
    pub flags: Vec<Flag>,
}

pub fn local_dimension(
    mu: &SelfSimilarMeasure,
    x: &[f64],
    r_grid: &[f64],
    tol: f64,
) -> Result<LocalDimProfile> {
    check_dim(mu.dim(), x.len())?;
    if r_grid.len() < 3 {
        return Err(Error::invalid("local dimension needs at least 3 radii"));
    }
    if r_grid.iter().any(|r| !(*r > 0.0 && *r < 1.0)) {
        return Err(Error::invalid("radii must lie in (0,1)"));
    }
    if r_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("radii must be strictly decreasing"));
    }
    let mut samples = Vec::with_capacity(r_grid.len());
    let mut flags = Vec::new();
    for &r in r_grid {
        let m = mu.eval(&Ball::new(x.to_vec(), r)?, tol)?;
        if m.budget_exceeded {
            flags.push(Flag::BudgetExceeded(format!("μ(B(x,{r}))")));
        }
        let ratio = (m.lo > 0.0).then(|| m.mid().ln() / r.ln());
        samples.push((r, ratio));
    }
    let tail: Vec<f64> = samples[samples.len() / 2..].iter().filter_map(|s| s.1).collect();
    let liminf_est = tail.iter().copied().reduce(f64::min);
    let limsup_est = tail.iter().copied().reduce(f64::max);
    if samples.iter().any(|s| s.1.is_none()) {
        flags.push(Flag::Note("some radii have zero measure (point outside the support)".into()));
    }
    Ok(LocalDimProfile { point: x.to_vec(), samples, liminf_est, limsup_est, flags })
}

pub fn measure_dimension(mu: &SelfSimilarMeasure) -> Result<f64> {
    mu.dimension()
}

pub fn attractor_cylinders(mu: &SelfSimilarMeasure, depth: u32) -> Result<Vec<(Aabb, f64)>> {
    mu.cylinders(depth, DEFAULT_NODE_BUDGET)
}
