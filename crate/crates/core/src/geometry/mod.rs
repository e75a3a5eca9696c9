//! Sup-norm balls, τ-rectangles, boxes and dyadic cubes.
//!
//! Coordinates are stored as `f64`. Every stored value is a dyadic rational and
//! all disjointness and containment predicates are evaluated exactly on those
//! values (see [`exact`]); only estimation paths (contractions with a
//! non-integer exponent, rectangle sides, masses) use rounded arithmetic.

pub mod exact;

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Flag, Result};
use exact::{diff_minus_scaled, gap_vs_radii, sign_of_sum, Term};

/// Name of the coordinate mode recorded in every report.
pub const COORD_MODE_EXACT: &str = "f64-dyadic-exact";
pub const COORD_MODE_FLOAT: &str = "f64";

/// Borrowed view of a closed sup-norm ball.
#[derive(Clone, Copy, Debug)]
pub struct BallRef<'a> {
    pub center: &'a [f64],
    pub radius: f64,
}

/// Closed ball of `(R^d, |.|_inf)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball dimension must be at least 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("ball radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("ball center must be finite"));
        }
        Ok(Ball { center, radius })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Sup-norm diameter `|B| = 2r`.
    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn as_ref(&self) -> BallRef<'_> {
        BallRef { center: &self.center, radius: self.radius }
    }

    /// `tB`: same center, radius multiplied by `t`.
    pub fn scale(&self, t: f64) -> Result<Ball> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("scale factor must be positive, got {t}")));
        }
        Ball::new(self.center.clone(), self.radius * t)
    }

    /// `B^δ`: same center, radius `r^δ`. `δ < 1` is allowed and flagged.
    pub fn contract(&self, delta: f64) -> (Ball, Option<Flag>) {
        let flag = (delta < 1.0).then_some(Flag::Expansion);
        let radius = if delta == 1.0 { self.radius } else { self.radius.powf(delta) };
        (Ball { center: self.center.clone(), radius }, flag)
    }

    /// Closed bounding box of the ball (the ball itself, in sup norm).
    pub fn to_box(&self) -> Aabb {
        self.as_ref().to_box()
    }
}

impl<'a> BallRef<'a> {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn to_owned(&self) -> Ball {
        Ball { center: self.center.to_vec(), radius: self.radius }
    }

    pub fn to_box(&self) -> Aabb {
        Aabb {
            lo: self.center.iter().map(|c| c - self.radius).collect(),
            hi: self.center.iter().map(|c| c + self.radius).collect(),
        }
    }

    /// Exact test: `fa*A` and `fb*B` are disjoint closed balls.
    pub fn disjoint_scaled(&self, fa: f64, other: &BallRef<'_>, fb: f64) -> bool {
        self.center.iter().zip(other.center).any(|(&a, &b)| {
            gap_vs_radii(a, b, fa, self.radius, fb, other.radius) == Ordering::Greater
                || gap_vs_radii(b, a, fa, self.radius, fb, other.radius) == Ordering::Greater
        })
    }

    #[inline]
    pub fn disjoint(&self, other: &BallRef<'_>) -> bool {
        self.disjoint_scaled(1.0, other, 1.0)
    }

    /// Exact test: the closed ball `f*self` lies in the open box.
    pub fn inside_open_box_scaled(&self, f: f64, b: &Aabb) -> bool {
        self.center.iter().enumerate().all(|(i, &c)| {
            diff_minus_scaled(c, b.lo[i], f, self.radius) == Ordering::Greater
                && diff_minus_scaled(b.hi[i], c, f, self.radius) == Ordering::Greater
        })
    }

    pub fn inside_open_box(&self, b: &Aabb) -> bool {
        self.inside_open_box_scaled(1.0, b)
    }

    /// Exact test: the closed ball lies in the closed box.
    pub fn inside_closed_box(&self, b: &Aabb) -> bool {
        self.center.iter().enumerate().all(|(i, &c)| {
            diff_minus_scaled(c, b.lo[i], 1.0, self.radius) != Ordering::Less
                && diff_minus_scaled(b.hi[i], c, 1.0, self.radius) != Ordering::Less
        })
    }

    /// Exact test: `x` lies in the closed ball `f*self`.
    pub fn contains_point_scaled(&self, x: &[f64], f: f64) -> bool {
        self.center.iter().zip(x).all(|(&c, &xi)| {
            diff_minus_scaled(xi, c, f, self.radius) != Ordering::Greater
                && diff_minus_scaled(c, xi, f, self.radius) != Ordering::Greater
        })
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.contains_point_scaled(x, 1.0)
    }

    /// Exact test: `self ⊆ other` as closed balls.
    pub fn inside_ball(&self, other: &BallRef<'_>) -> bool {
        self.center.iter().zip(other.center).all(|(&a, &b)| {
            let fits = |s: f64| {
                sign_of_sum(&[Term::Val(s * a), Term::Val(-s * b), Term::Val(self.radius), Term::Val(-other.radius)])
                    != Ordering::Greater
            };
            fits(1.0) && fits(-1.0)
        })
    }
}

impl fmt::Display for Ball {
    /// One line: `d c_1 ... c_d r`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.center.len())?;
        for c in &self.center {
            write!(f, " {c}")?;
        }
        write!(f, " {}", self.radius)
    }
}

impl std::str::FromStr for Ball {
    type Err = Error;

    fn from_str(s: &str) -> Result<Ball> {
        let nums: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::parse(0, format!("{t:?}: {e}"))))
            .collect::<Result<_>>()?;
        let d = *nums.first().ok_or_else(|| Error::parse(0, "empty ball line"))?;
        if d < 1.0 || d.fract() != 0.0 {
            return Err(Error::parse(0, format!("bad dimension {d}")));
        }
        let d = d as usize;
        if nums.len() != d + 2 {
            return Err(Error::parse(0, format!("expected {} numbers, got {}", d + 2, nums.len())));
        }
        Ball::new(nums[1..=d].to_vec(), nums[d + 1])
    }
}

/// `scale_ball`: `tB`.
pub fn scale_ball(b: &Ball, t: f64) -> Result<Ball> {
    b.scale(t)
}

/// `contract_ball`: `B^δ`.
pub fn contract_ball(b: &Ball, delta: f64) -> (Ball, Option<Flag>) {
    b.contract(delta)
}

pub fn balls_disjoint(a: &Ball, b: &Ball) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.as_ref().disjoint(&b.as_ref()))
}

/// True when `factor*a` and `factor*b` meet (closed balls; tangency counts).
pub fn balls_intersect_after_scaling(a: &Ball, b: &Ball, factor: f64) -> Result<bool> {
    check_dim(a.dim(), b.dim())?;
    if !(factor > 0.0) {
        return Err(Error::invalid("scaling factor must be positive"));
    }
    Ok(!a.as_ref().disjoint_scaled(factor, &b.as_ref(), factor))
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Scale bucket of a radius: the unique `k` with `2^{-k-1} < r <= 2^{-k}`.
///
/// Radii above 1 land in bucket `-1` and come back with a flag.
pub fn scale_index(radius: f64) -> (i32, Option<Flag>) {
    if radius > 1.0 {
        return (-1, Some(Flag::RadiusAboveOne { index: 0 }));
    }
    (scale_index_unit(radius), None)
}

/// The exact bucket `k` (possibly negative) of a positive finite radius.
pub(crate) fn scale_index_unit(radius: f64) -> i32 {
    debug_assert!(radius > 0.0 && radius.is_finite());
    let bits = radius.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        // subnormal: fall back on logarithms, adequate far below any use here
        let k = (-radius.log2()).ceil() as i32;
        return if 2f64.powi(-k) == radius { k } else { k - 1 };
    }
    let e = exp_bits - 1023;
    if mantissa == 0 {
        -e
    } else {
        -e - 1
    }
}

/// Axis-aligned box `[lo, hi]` (open or closed according to the caller).
#[derive(Clone, Debug, PartialEq)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::invalid("box dimension must be at least 1"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::invalid("box requires lo <= hi on every axis"));
        }
        Ok(Aabb { lo, hi })
    }

    pub fn unit(d: usize) -> Self {
        Aabb { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Sup-norm diameter (longest side).
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }

    /// Intersection of closed boxes, `None` when empty.
    pub fn intersect(&self, other: &Aabb) -> Option<Aabb> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            None
        } else {
            Some(Aabb { lo, hi })
        }
    }

    /// Closed containment `other ⊆ self`.
    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// `other` lies in the interior of `self`.
    pub fn interior_contains_box(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|i| self.lo[i] < other.lo[i] && other.hi[i] < self.hi[i])
    }

    /// Closed boxes share no point.
    pub fn disjoint_closed(&self, other: &Aabb) -> bool {
        (0..self.dim()).any(|i| self.hi[i] < other.lo[i] || other.hi[i] < self.lo[i])
    }

    /// Interiors share no point.
    pub fn disjoint_interiors(&self, other: &Aabb) -> bool {
        (0..self.dim()).any(|i| self.hi[i] <= other.lo[i] || other.hi[i] <= self.lo[i])
    }
}

/// Finite union of open boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct OpenSet {
    boxes: Vec<Aabb>,
}

impl OpenSet {
    /// Builds the union, merging overlapping intervals when `d = 1`.
    pub fn new(boxes: Vec<Aabb>) -> Result<Self> {
        let d = boxes.first().map(Aabb::dim).ok_or_else(|| Error::invalid("open set needs a box"))?;
        for b in &boxes {
            check_dim(d, b.dim())?;
        }
        let mut boxes: Vec<Aabb> = boxes
            .into_iter()
            .filter(|b| b.lo.iter().zip(&b.hi).all(|(a, c)| a < c))
            .collect();
        if d == 1 {
            boxes.sort_by(|a, b| a.lo[0].total_cmp(&b.lo[0]));
            let mut merged: Vec<Aabb> = Vec::with_capacity(boxes.len());
            for b in boxes {
                match merged.last_mut() {
                    // open intervals overlapping in a set of positive length merge
                    Some(last) if b.lo[0] < last.hi[0] => {
                        last.hi[0] = last.hi[0].max(b.hi[0]);
                    }
                    _ => merged.push(b),
                }
            }
            boxes = merged;
        }
        Ok(OpenSet { boxes })
    }

    pub fn from_box(b: Aabb) -> Result<Self> {
        OpenSet::new(vec![b])
    }

    pub fn unit(d: usize) -> Self {
        OpenSet { boxes: vec![Aabb::unit(d)] }
    }

    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }

    pub fn dim(&self) -> usize {
        self.boxes.first().map_or(0, Aabb::dim)
    }

    /// Conservative exact containment of a closed ball: true when the ball lies
    /// inside a single box of the (merged) union. Exact in `d = 1`.
    pub fn contains_ball(&self, b: &BallRef<'_>) -> bool {
        self.boxes.iter().any(|x| b.inside_open_box(x))
    }

    pub fn bounding_box(&self) -> Option<Aabb> {
        let first = self.boxes.first()?;
        let mut lo = first.lo.clone();
        let mut hi = first.hi.clone();
        for b in &self.boxes[1..] {
            for i in 0..lo.len() {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        Some(Aabb { lo, hi })
    }

    /// Pairwise interior-disjoint boxes with the same union (up to boundaries),
    /// obtained by coordinate compression.
    pub fn disjoint_pieces(&self) -> Vec<Aabb> {
        let d = self.dim();
        if self.boxes.len() <= 1 || d == 1 {
            return self.boxes.clone();
        }
        let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); d];
        for b in &self.boxes {
            for (i, c) in cuts.iter_mut().enumerate() {
                c.push(b.lo[i]);
                c.push(b.hi[i]);
            }
        }
        for c in &mut cuts {
            c.sort_by(f64::total_cmp);
            c.dedup();
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; d];
        'outer: loop {
            let cell = Aabb {
                lo: (0..d).map(|i| cuts[i][idx[i]]).collect(),
                hi: (0..d).map(|i| cuts[i][idx[i] + 1]).collect(),
            };
            if self.boxes.iter().any(|b| b.contains_box(&cell)) {
                out.push(cell);
            }
            for i in 0..d {
                idx[i] += 1;
                if idx[i] + 1 < cuts[i].len() {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        out
    }

    /// Parses `box lo_1 .. lo_d hi_1 .. hi_d` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<OpenSet> {
        let mut boxes = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            if toks.next() != Some("box") {
                return Err(Error::parse(ln + 1, "expected `box` keyword"));
            }
            let nums: Vec<f64> = toks
                .map(|t| t.parse::<f64>().map_err(|e| Error::parse(ln + 1, format!("{t:?}: {e}"))))
                .collect::<Result<_>>()?;
            if nums.is_empty() || !nums.len().is_multiple_of(2) {
                return Err(Error::parse(ln + 1, "box needs 2d coordinates"));
            }
            let d = nums.len() / 2;
            boxes.push(
                Aabb::new(nums[..d].to_vec(), nums[d..].to_vec())
                    .map_err(|e| Error::parse(ln + 1, e.to_string()))?,
            );
        }
        OpenSet::new(boxes)
    }
}

impl fmt::Display for OpenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.boxes {
            write!(f, "box")?;
            for v in b.lo.iter().chain(&b.hi) {
                write!(f, " {v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Open rectangle `x + Π (-r^{τ_i}/2, r^{τ_i}/2)` attached to a ball.
#[derive(Clone, Debug, PartialEq)]
pub struct Rectangle {
    pub center: Vec<f64>,
    pub base_radius: f64,
    pub tau: Vec<f64>,
}

impl Rectangle {
    pub fn sides(&self) -> Vec<f64> {
        self.tau.iter().map(|t| self.base_radius.powf(*t)).collect()
    }

    /// Closure of the rectangle as a box.
    pub fn to_box(&self) -> Aabb {
        let sides = self.sides();
        Aabb {
            lo: self.center.iter().zip(&sides).map(|(c, s)| c - s / 2.0).collect(),
            hi: self.center.iter().zip(&sides).map(|(c, s)| c + s / 2.0).collect(),
        }
    }
}

pub fn validate_tau(tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(Error::invalid("tau must be non-empty"));
    }
    if tau[0] < 1.0 {
        return Err(Error::invalid(format!("tau_1 must be at least 1, got {}", tau[0])));
    }
    if tau.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("tau must be non-decreasing"));
    }
    Ok(())
}

pub fn rectangle_from_ball(b: &Ball, tau: &[f64]) -> Result<Rectangle> {
    validate_tau(tau)?;
    check_dim(b.dim(), tau.len())?;
    if b.radius() > 1.0 {
        return Err(Error::invalid("rectangles need a base radius of at most 1"));
    }
    Ok(Rectangle { center: b.center().to_vec(), base_radius: b.radius(), tau: tau.to_vec() })
}

/// Half-open dyadic cube `Π [k_i 2^{-g}, (k_i + 1) 2^{-g})`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    pub generation: u32,
    pub index: Vec<i64>,
}

impl DyadicCube {
    pub fn side(&self) -> f64 {
        2f64.powi(-(self.generation as i32))
    }

    /// Closure of the cube.
    pub fn to_box(&self) -> Aabb {
        let h = self.side();
        Aabb {
            lo: self.index.iter().map(|&k| k as f64 * h).collect(),
            hi: self.index.iter().map(|&k| (k + 1) as f64 * h).collect(),
        }
    }

    /// The closed cube as a sup-norm ball.
    pub fn inball(&self) -> Ball {
        let h = self.side();
        Ball {
            center: self.index.iter().map(|&k| (k as f64 + 0.5) * h).collect(),
            radius: h / 2.0,
        }
    }

    pub fn children(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let d = self.index.len();
        (0..(1u32 << d)).map(move |mask| DyadicCube {
            generation: self.generation + 1,
            index: (0..d).map(|i| 2 * self.index[i] + ((mask >> i) & 1) as i64).collect(),
        })
    }
}

/// Index range of generation-`k` half-open cubes meeting `[lo, hi]` on one axis.
pub(crate) fn cube_range(lo: f64, hi: f64, k: u32) -> (i64, i64) {
    let s = 2f64.powi(k as i32);
    ((lo * s).floor() as i64, (hi * s).floor() as i64)
}

/// Minimal set of generation-`k` half-open dyadic cubes covering the closed box.
pub fn dyadic_cover(region: &Aabb, k: u32) -> Vec<DyadicCube> {
    let ranges: Vec<(i64, i64)> =
        (0..region.dim()).map(|i| cube_range(region.lo[i], region.hi[i], k)).collect();
    let mut out = Vec::new();
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        out.push(DyadicCube { generation: k, index: idx.clone() });
        for i in 0..idx.len() {
            idx[i] += 1;
            if idx[i] <= ranges[i].1 {
                continue 'outer;
            }
            idx[i] = ranges[i].0;
        }
        break;
    }
    out
}
