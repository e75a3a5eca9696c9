use crate::error::{Error, Flag, Result};
use crate::geometry::{Aabb, OpenSet};

/// Default cap on refinement nodes of the content recursion.
pub const DEFAULT_CONTENT_BUDGET: usize = 5_000_000;

/// Stored cover elements are capped; the value stays exact beyond the cap.
const COVER_CAP: usize = 100_000;

/// Upper (and, for a single box, lower) estimate of the Hausdorff content
/// `H^s_t` of a finite union of closed boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct ContentEstimate {
    pub s: f64,
    /// `None` stands for `t = ∞`.
    pub t: Option<f64>,
    pub value_upper: f64,
    pub value_lower: Option<f64>,
    /// Covering cubes (or the single enclosing ball as a box).
    pub cover: Vec<Aabb>,
    /// The stored cover is complete (it is capped for very fine covers).
    pub cover_complete: bool,
    /// Bound on the loss of dyadic covers against arbitrary ones.
    pub dyadic_factor: f64,
    pub depth: u32,
    pub nodes: usize,
    pub flags: Vec<Flag>,
}

fn pow(x: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        x.powf(s)
    }
}

/// Closed cube meets a closed box in a set that a neighbouring cube does not
/// cover entirely: positive overlap along every non-degenerate axis.
fn meets(lo: &[f64], hi: &[f64], b: &Aabb) -> bool {
    (0..lo.len()).all(|i| {
        if b.lo[i] < b.hi[i] {
            b.lo[i] < hi[i] && lo[i] < b.hi[i]
        } else {
            lo[i] <= b.lo[i] && b.lo[i] <= hi[i]
        }
    })
}

fn inside(lo: &[f64], hi: &[f64], b: &Aabb) -> bool {
    (0..lo.len()).all(|i| b.lo[i] <= lo[i] && hi[i] <= b.hi[i])
}

struct Recursion<'a> {
    boxes: &'a [Aabb],
    s: f64,
    d: usize,
    max_gen: i32,
    nodes: usize,
    budget: usize,
    over_budget: bool,
}

impl Recursion<'_> {
    fn cube(gen: i32, idx: &[i64]) -> (Vec<f64>, Vec<f64>) {
        let h = 2f64.powi(-gen);
        (idx.iter().map(|&k| k as f64 * h).collect(), idx.iter().map(|&k| (k + 1) as f64 * h).collect())
    }

    /// Optimal cost of covering `cube ∩ set` by dyadic subcubes down to
    /// `max_gen`, with the chosen cover appended to `cover` up to the cap.
    fn solve(&mut self, gen: i32, idx: &[i64], active: &[usize], cover: &mut Vec<Aabb>) -> f64 {
        self.nodes += 1;
        let h = 2f64.powi(-gen);
        let (lo, hi) = Self::cube(gen, idx);
        let whole = pow(h, self.s);
        let levels = self.max_gen - gen;
        if active.iter().any(|&b| inside(&lo, &hi, &self.boxes[b])) {
            let split_all = self.s > self.d as f64 && levels > 0;
            if !split_all {
                push_capped(cover, Aabb { lo, hi });
                return whole;
            }
            let count = 2f64.powi(self.d as i32 * levels);
            let fine = 2f64.powi(-self.max_gen);
            if cover.len() as f64 + count <= COVER_CAP as f64 {
                emit_subcubes(idx, gen, self.max_gen, cover);
            } else {
                cover.resize(COVER_CAP + 1, Aabb { lo: lo.clone(), hi: hi.clone() });
            }
            return count * pow(fine, self.s);
        }
        if levels <= 0 || self.nodes >= self.budget {
            if levels > 0 {
                self.over_budget = true;
            }
            push_capped(cover, Aabb { lo, hi });
            return whole;
        }
        let mut split = 0.0;
        let mut sub = Vec::new();
        let mut child = vec![0i64; self.d];
        for mask in 0..(1u32 << self.d) {
            for i in 0..self.d {
                child[i] = 2 * idx[i] + ((mask >> i) & 1) as i64;
            }
            let (clo, chi) = Self::cube(gen + 1, &child);
            let act: Vec<usize> = active.iter().copied().filter(|&b| meets(&clo, &chi, &self.boxes[b])).collect();
            if act.is_empty() {
                continue;
            }
            split += self.solve(gen + 1, &child, &act, &mut sub);
            if split >= whole {
                break;
            }
        }
        if split < whole {
            for c in sub {
                push_capped(cover, c);
            }
            split
        } else {
            push_capped(cover, Aabb { lo, hi });
            whole
        }
    }
}

fn push_capped(cover: &mut Vec<Aabb>, b: Aabb) {
    if cover.len() <= COVER_CAP {
        cover.push(b);
    }
}

fn emit_subcubes(idx: &[i64], gen: i32, max_gen: i32, cover: &mut Vec<Aabb>) {
    if gen == max_gen {
        let (lo, hi) = Recursion::cube(gen, idx);
        cover.push(Aabb { lo, hi });
        return;
    }
    let d = idx.len();
    for mask in 0..(1u32 << d) {
        let child: Vec<i64> = (0..d).map(|i| 2 * idx[i] + ((mask >> i) & 1) as i64).collect();
        emit_subcubes(&child, gen + 1, max_gen, cover);
    }
}

/// Lower bound by the mass distribution principle applied to normalized
/// Lebesgue measure on a single box with sides `a`: any set of diameter
/// `ρ <= t` carries at most `Π min(ρ, a_i) / V` of the mass.
fn single_box_lower(sides: &[f64], s: f64, t: Option<f64>) -> f64 {
    let d = sides.len() as f64;
    let vol: f64 = sides.iter().product();
    if vol == 0.0 || s > d {
        return 0.0;
    }
    let f = |rho: f64| vol * pow(rho, s) / sides.iter().map(|&a| a.min(rho)).product::<f64>();
    let mut cands: Vec<f64> = sides.iter().copied().filter(|&a| t.is_none_or(|t| a <= t)).collect();
    if let Some(t) = t {
        cands.push(t);
    }
    let mut best = cands.into_iter().map(f).fold(f64::INFINITY, f64::min);
    if s == d {
        best = best.min(vol);
    }
    best
}

/// Greedy-optimal dyadic cover of a union of closed boxes: each cube is kept
/// whole or split, whichever is cheaper, down to `depth` generations below the
/// starting scale. A single ball around the whole set is also considered.
pub fn hausdorff_content_upper(set: &OpenSet, s: f64, t: Option<f64>, depth: u32) -> Result<ContentEstimate> {
    hausdorff_content_upper_with_budget(set, s, t, depth, DEFAULT_CONTENT_BUDGET)
}

pub fn hausdorff_content_upper_with_budget(
    set: &OpenSet,
    s: f64,
    t: Option<f64>,
    depth: u32,
    budget: usize,
) -> Result<ContentEstimate> {
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::invalid("s must be a finite non-negative number"));
    }
    if t.is_some_and(|t| !(t > 0.0)) {
        return Err(Error::invalid("t must be positive"));
    }
    let bbox = set.bounding_box().ok_or_else(|| Error::invalid("the set is empty"))?;
    let d = set.dim();
    let diam = bbox.diameter();
    let mut est = ContentEstimate {
        s,
        t,
        value_upper: f64::INFINITY,
        value_lower: None,
        cover: Vec::new(),
        cover_complete: true,
        dyadic_factor: 4f64.powf(s),
        depth,
        nodes: 0,
        flags: Vec::new(),
    };
    if diam == 0.0 {
        est.value_upper = pow(0.0, s);
        est.value_lower = Some(est.value_upper);
        est.cover.push(bbox);
        return Ok(est);
    }
    let g_fit = (-diam.log2()).floor() as i32 - 2;
    let g_start = match t {
        Some(t) => ((-t.log2()).ceil() as i32).max(g_fit),
        None => g_fit,
    };
    let mut rec = Recursion { boxes: set.boxes(), s, d, max_gen: g_start + depth as i32, nodes: 0, budget, over_budget: false };
    let scale = 2f64.powi(g_start);
    let ranges: Vec<(i64, i64)> = (0..d)
        .map(|i| {
            let a = (bbox.lo[i] * scale).floor() as i64;
            let b = ((bbox.hi[i] * scale).ceil() as i64 - 1).max(a);
            (a, b)
        })
        .collect();
    let all: Vec<usize> = (0..set.boxes().len()).collect();
    let mut total = 0.0;
    let mut cover = Vec::new();
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        let (lo, hi) = Recursion::cube(g_start, &idx);
        let act: Vec<usize> = all.iter().copied().filter(|&b| meets(&lo, &hi, &set.boxes()[b])).collect();
        if !act.is_empty() {
            total += rec.solve(g_start, &idx, &act, &mut cover);
        }
        for i in 0..d {
            idx[i] += 1;
            if idx[i] <= ranges[i].1 {
                continue 'outer;
            }
            idx[i] = ranges[i].0;
        }
        break;
    }
    est.nodes = rec.nodes;
    if rec.over_budget {
        est.flags.push(Flag::BudgetExceeded(format!("refinement stopped after {} nodes", rec.nodes)));
    }
    let single = pow(diam, s);
    if t.is_none_or(|t| diam <= t) && single <= total {
        est.value_upper = single;
        let c: Vec<f64> = bbox.lo.iter().zip(&bbox.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        est.cover = vec![Aabb {
            lo: c.iter().map(|x| x - diam / 2.0).collect(),
            hi: c.iter().map(|x| x + diam / 2.0).collect(),
        }];
    } else {
        est.value_upper = total;
        est.cover_complete = cover.len() <= COVER_CAP;
        cover.truncate(COVER_CAP);
        est.cover = cover;
    }
    if set.boxes().len() == 1 {
        let sides: Vec<f64> = bbox.lo.iter().zip(&bbox.hi).map(|(l, h)| h - l).collect();
        est.value_lower = Some(single_box_lower(&sides, s, t).min(est.value_upper));
    }
    Ok(est)
}
