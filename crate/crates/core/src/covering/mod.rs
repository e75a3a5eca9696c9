//! Greedy disjoint coverings, Besicovitch-type partitions, weak-redundancy
//! profiles and Borel–Cantelli sums over ball sequences.

mod bc;
pub(crate) mod index;
mod partition;
mod redundancy;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};

use crate::error::{Error, Flag, Result};
use crate::geometry::{check_dim, scale_index, Ball, BallRef, OpenSet};
use crate::measure::{Closure, SelfSimilarMeasure, Target, DEFAULT_NODE_BUDGET};

pub use bc::{borel_cantelli_check, BcReport, BcStrategy};
pub use partition::{
    besicovitch_partition, overlap_count, sort_disjoint_families, BesicovitchPartition, FamilySort,
    OverlapCount,
};
pub use redundancy::{weak_redundancy_report, RedundancyReport, ScaleRow};

use index::{first_conflict, DisjointIndex};

/// Ordered, indexed family of closed balls with its scale buckets `T_k`.
#[derive(Clone, Debug, Default)]
pub struct BallSequence {
    dim: usize,
    centers: Vec<f64>,
    radii: Vec<f64>,
    buckets: BTreeMap<i32, Vec<usize>>,
    pub provenance: String,
    flags: Vec<Flag>,
}

impl BallSequence {
    pub fn new(dim: usize, provenance: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(BallSequence { dim, provenance: provenance.into(), ..Default::default() })
    }

    pub fn from_balls(balls: &[Ball], provenance: impl Into<String>) -> Result<Self> {
        let dim = balls.first().map_or(1, Ball::dim);
        let mut s = BallSequence::new(dim, provenance)?;
        for b in balls {
            s.push(b.center(), b.radius())?;
        }
        Ok(s)
    }

    pub fn with_capacity(dim: usize, n: usize, provenance: impl Into<String>) -> Result<Self> {
        let mut s = BallSequence::new(dim, provenance)?;
        s.centers.reserve(n * dim);
        s.radii.reserve(n);
        Ok(s)
    }

    pub fn push(&mut self, center: &[f64], radius: f64) -> Result<()> {
        check_dim(self.dim, center.len())?;
        if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("ball {} is not a finite ball with positive radius", self.len())));
        }
        let n = self.radii.len();
        let (k, flag) = scale_index(radius);
        if flag.is_some() {
            self.flags.push(Flag::RadiusAboveOne { index: n });
        }
        self.buckets.entry(k).or_default().push(n);
        self.centers.extend_from_slice(center);
        self.radii.push(radius);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize) -> BallRef<'_> {
        BallRef { center: &self.centers[i * self.dim..(i + 1) * self.dim], radius: self.radii[i] }
    }

    pub fn ball(&self, i: usize) -> Ball {
        self.get(i).to_owned()
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn iter(&self) -> impl Iterator<Item = BallRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// `k -> T_k` (indices in increasing order). Bucket `-1` holds radii above 1.
    pub fn buckets(&self) -> &BTreeMap<i32, Vec<usize>> {
        &self.buckets
    }

    pub fn bucket(&self, k: i32) -> &[usize] {
        self.buckets.get(&k).map_or(&[], Vec::as_slice)
    }

    pub fn flags(&self) -> &[Flag] {
        &self.flags
    }

    pub fn subsequence(&self, indices: &[usize], provenance: impl Into<String>) -> BallSequence {
        let mut s = BallSequence { dim: self.dim, provenance: provenance.into(), ..Default::default() };
        for &i in indices {
            let b = self.get(i);
            // already validated
            let _ = s.push(b.center, b.radius);
        }
        s
    }

    /// First index `g` such that every ball from `g` on has radius `<= 2^-k`.
    /// Returns `len()` when the last ball is larger.
    pub fn tail_start(&self, k: i32) -> usize {
        let bound = 2f64.powi(-k);
        self.radii.iter().rposition(|&r| r > bound).map_or(0, |p| p + 1)
    }

    /// Checks the radius conventions: all radii at most 1 and running minima
    /// that keep decreasing. Problems come back as flags.
    pub fn check_radii(&self) -> Vec<Flag> {
        let mut flags = Vec::new();
        if let Some(i) = self.radii.iter().position(|&r| r > 1.0) {
            flags.push(Flag::RadiusAboveOne { index: i });
        }
        let n = self.len();
        if n >= 4 {
            let min_at = |m: usize| self.radii[..m].iter().copied().fold(f64::INFINITY, f64::min);
            if min_at(n) >= min_at(n / 2) {
                flags.push(Flag::NonMonotone(
                    "minimum radius did not decrease over the second half of the sequence".into(),
                ));
            }
        }
        flags
    }

    /// Ball lines `d c_1 .. c_d r`, one per ball.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.len() * 24);
        for b in self.iter() {
            let _ = write!(s, "{}", self.dim);
            for c in b.center {
                let _ = write!(s, " {c}");
            }
            let _ = writeln!(s, " {}", b.radius);
        }
        s
    }

    pub fn parse(text: &str, provenance: impl Into<String>) -> Result<Self> {
        let mut seq: Option<BallSequence> = None;
        let provenance = provenance.into();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let b: Ball = line.parse().map_err(|e: Error| Error::parse(ln + 1, e.to_string()))?;
            let s = match &mut seq {
                Some(s) => s,
                None => seq.insert(BallSequence::new(b.dim(), provenance.clone())?),
            };
            s.push(b.center(), b.radius()).map_err(|e| Error::parse(ln + 1, e.to_string()))?;
        }
        seq.ok_or_else(|| Error::parse(1, "no balls in input"))
    }
}

/// Output of the greedy cover engine.
#[derive(Clone, Debug)]
pub struct CoverFamily {
    /// Selected ball indices, in selection order.
    pub indices: Vec<usize>,
    pub omega: OpenSet,
    pub omega_mass: f64,
    pub covered_mass: f64,
    pub covered_fraction: f64,
    /// The `g` used: only balls of index `>= g` were eligible.
    pub min_index: usize,
    /// Cumulative fraction after each round that ran.
    pub round_fractions: Vec<f64>,
    pub audit_passed: bool,
    pub flags: Vec<Flag>,
}

impl CoverFamily {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index\n");
        for i in &self.indices {
            let _ = writeln!(s, "{i}");
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CoverOptions {
    pub target: f64,
    pub rounds: usize,
    /// Tolerance for each `μ(B)` enclosure.
    pub tol: f64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { target: 0.75, rounds: 8, tol: 1e-10 }
    }
}

static AUDITS_RUN: AtomicUsize = AtomicUsize::new(0);
static AUDITS_FAILED: AtomicUsize = AtomicUsize::new(0);

/// `(audits run, audits failed)` over every cover family built in this process.
pub fn audit_counters() -> (usize, usize) {
    (AUDITS_RUN.load(AtomicOrdering::Relaxed), AUDITS_FAILED.load(AtomicOrdering::Relaxed))
}

/// Exact post-hoc audit: selected balls pairwise disjoint and inside `omega`.
pub fn audit_cover(seq: &BallSequence, indices: &[usize], omega: &OpenSet) -> std::result::Result<(), String> {
    if let Some(&i) = indices.iter().find(|&&i| !omega.contains_ball(&seq.get(i))) {
        return Err(format!("ball {i} is not contained in the open set"));
    }
    let balls: Vec<BallRef<'_>> = indices.iter().map(|&i| seq.get(i)).collect();
    if seq.dim() == 1 {
        // disjoint intervals ordered by center: consecutive checks suffice
        let mut order: Vec<usize> = (0..balls.len()).collect();
        order.sort_by(|&a, &b| balls[a].center[0].total_cmp(&balls[b].center[0]));
        for w in order.windows(2) {
            if !balls[w[0]].disjoint(&balls[w[1]]) {
                return Err(format!("balls {} and {} intersect", indices[w[0]], indices[w[1]]));
            }
        }
        return Ok(());
    }
    match first_conflict(&balls, 1.0) {
        Some((a, b)) => Err(format!("balls {} and {} intersect", indices[a], indices[b])),
        None => Ok(()),
    }
}

/// Incremental greedy selection of pairwise-disjoint balls.
pub(crate) struct Selector<'a> {
    seq: &'a BallSequence,
    index: DisjointIndex,
    pub selected: Vec<usize>,
    pub mass: f64,
}

impl<'a> Selector<'a> {
    pub fn new(seq: &'a BallSequence) -> Self {
        Selector { seq, index: DisjointIndex::new(seq.dim()), selected: Vec::new(), mass: 0.0 }
    }

    pub fn fits(&self, i: usize) -> bool {
        !self.index.meets_any(&self.seq.get(i))
    }

    pub fn take(&mut self, i: usize, mass: f64) {
        self.index.insert(&self.seq.get(i));
        self.selected.push(i);
        self.mass += mass;
    }

    /// One greedy pass over `cands` (already ordered); stops as soon as the
    /// selected mass reaches `stop_mass`. Returns the number of balls added.
    pub fn pass(&mut self, cands: &[(usize, f64)], stop_mass: f64) -> usize {
        let before = self.selected.len();
        for &(i, m) in cands {
            if self.mass >= stop_mass {
                break;
            }
            if self.fits(i) {
                self.take(i, m);
            }
        }
        self.selected.len() - before
    }
}

/// `μ(Ω)` for a union of open boxes.
pub fn open_set_mass(mu: &SelfSimilarMeasure, omega: &OpenSet, tol: f64) -> Result<f64> {
    check_dim(mu.dim(), omega.dim())?;
    let pieces = omega.disjoint_pieces();
    let each = tol / pieces.len().max(1) as f64;
    let mut total = 0.0;
    for p in &pieces {
        total += mu.eval_target(&Target::boxed(p, Closure::Open), each, DEFAULT_NODE_BUDGET)?.mid();
    }
    Ok(total)
}

/// Balls of index `>= g` inside `omega` accepted by `keep`, with their masses,
/// ordered by decreasing mass and then increasing index.
pub(crate) fn ordered_candidates(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    omega: &OpenSet,
    g: usize,
    tol: f64,
    mut keep: impl FnMut(usize) -> bool,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for i in g..seq.len() {
        let b = seq.get(i);
        if !omega.contains_ball(&b) || !keep(i) {
            continue;
        }
        out.push((i, ball_mass(mu, &b, tol)?));
    }
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(out)
}

pub(crate) fn ball_mass(mu: &SelfSimilarMeasure, b: &BallRef<'_>, tol: f64) -> Result<f64> {
    if mu.is_lebesgue() {
        let mut v = 1.0;
        for &c in b.center {
            v *= ((c + b.radius).min(1.0) - (c - b.radius).max(0.0)).max(0.0);
        }
        return Ok(v);
    }
    Ok(mu.eval(&b.to_owned(), tol)?.mid())
}

/// Greedy disjoint cover of `omega` by balls of index `>= g`.
///
/// Each round is a greedy pass by decreasing mass inside the residual open set
/// (`omega` minus the closed balls already chosen); the engine stops once the
/// covered fraction reaches `target` or a round adds nothing.
pub fn greedy_disjoint_cover(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    omega: &OpenSet,
    g: usize,
    opts: &CoverOptions,
) -> Result<CoverFamily> {
    check_dim(seq.dim(), mu.dim())?;
    check_dim(seq.dim(), omega.dim())?;
    if !(opts.target > 0.0 && opts.target < 1.0) {
        return Err(Error::invalid("target must lie in (0,1)"));
    }
    if omega.boxes().is_empty() {
        return Err(Error::invalid("the open set is empty"));
    }
    let omega_mass = open_set_mass(mu, omega, opts.tol)?;
    let cands = ordered_candidates(seq, mu, omega, g, opts.tol, |_| true)?;
    let mut sel = Selector::new(seq);
    let mut flags = Vec::new();
    let mut round_fractions = Vec::new();
    let stop = opts.target * omega_mass;
    let fraction = |m: f64| if omega_mass > 0.0 { (m / omega_mass).min(1.0) } else { 0.0 };
    for _ in 0..opts.rounds {
        let added = sel.pass(&cands, stop);
        round_fractions.push(fraction(sel.mass));
        if added == 0 || sel.mass >= stop {
            break;
        }
    }
    if sel.selected.is_empty() {
        flags.push(Flag::EmptySelection(format!("no ball of index >= {g} fits inside the open set")));
    }
    if omega_mass == 0.0 {
        flags.push(Flag::Degenerate("the open set has zero measure".into()));
    }
    let audit = audit_cover(seq, &sel.selected, omega);
    AUDITS_RUN.fetch_add(1, AtomicOrdering::Relaxed);
    if let Err(e) = &audit {
        AUDITS_FAILED.fetch_add(1, AtomicOrdering::Relaxed);
        flags.push(Flag::PreconditionViolated(format!("audit failed: {e}")));
    }
    Ok(CoverFamily {
        covered_fraction: fraction(sel.mass),
        indices: sel.selected,
        omega: omega.clone(),
        omega_mass,
        covered_mass: sel.mass,
        min_index: g,
        round_fractions,
        audit_passed: audit.is_ok(),
        flags,
    })
}

#[derive(Clone, Debug)]
pub struct AcRow {
    pub omega: usize,
    pub g: usize,
    pub fraction: f64,
    pub selected: usize,
    pub flags: Vec<Flag>,
}

/// Single-round disjoint fractions over a grid of open sets and start indices.
/// `c_emp` is the minimum: evidence at the tested depths only.
#[derive(Clone, Debug)]
pub struct AcTable {
    pub rows: Vec<AcRow>,
    pub c_emp: f64,
}

pub fn ac_empirical_check(
    seq: &BallSequence,
    mu: &SelfSimilarMeasure,
    omegas: &[OpenSet],
    gs: &[usize],
    tol: f64,
) -> Result<AcTable> {
    let opts = CoverOptions { target: 1.0 - f64::EPSILON, rounds: 1, tol };
    let mut rows = Vec::new();
    for (w, omega) in omegas.iter().enumerate() {
        for &g in gs {
            let fam = greedy_disjoint_cover(seq, mu, omega, g, &opts)?;
            rows.push(AcRow {
                omega: w,
                g,
                fraction: fam.covered_fraction,
                selected: fam.indices.len(),
                flags: fam.flags,
            });
        }
    }
    let c_emp = rows.iter().map(|r| r.fraction).fold(f64::INFINITY, f64::min);
    Ok(AcTable { c_emp: if rows.is_empty() { 0.0 } else { c_emp }, rows })
}

impl AcTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("omega,g,fraction,selected\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.omega, r.g, r.fraction, r.selected);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Aabb;

    /// Closed dyadic cubes of generations `0..=depth` in `[0,1]`, by
    /// generation and then position.
    pub(crate) fn dyadic_inballs(depth: u32) -> BallSequence {
        let mut s = BallSequence::new(1, "dyadic").unwrap();
        for k in 0..=depth {
            let r = 0.5f64.powi(k as i32 + 1);
            for j in 0..(1u64 << k) {
                s.push(&[(2 * j + 1) as f64 * r], r).unwrap();
            }
        }
        s
    }

    fn unit_interval() -> OpenSet {
        OpenSet::from_box(Aabb::new(vec![0.0], vec![1.0]).unwrap()).unwrap()
    }

    #[test]
    fn buckets_follow_scale_index() {
        let s = dyadic_inballs(3);
        assert_eq!(s.bucket(1), &[0]);
        assert_eq!(s.bucket(2), &[1, 2]);
        assert_eq!(s.bucket(4).len(), 8);
        assert!(s.flags().is_empty());
        let mut t = BallSequence::new(1, "x").unwrap();
        t.push(&[0.0], 3.0).unwrap();
        assert_eq!(t.bucket(-1), &[0]);
        assert_eq!(t.flags(), &[Flag::RadiusAboveOne { index: 0 }]);
        assert_eq!(t.tail_start(0), 1);
    }

    #[test]
    fn text_roundtrip() {
        let s = dyadic_inballs(2);
        let t = BallSequence::parse(&s.to_text(), "x").unwrap();
        assert_eq!(t.radii(), s.radii());
        assert!(BallSequence::parse("1 0.5\n", "x").is_err());
        assert!(BallSequence::parse("1 0.5 0.1\n2 0.5 0.5 0.1\n", "x").is_err());
    }

    #[test]
    fn dyadic_fixture_reaches_ninety_percent() {
        let s = dyadic_inballs(12);
        let mu = SelfSimilarMeasure::lebesgue(1).unwrap();
        let fam = greedy_disjoint_cover(&s, &mu, &unit_interval(), 0, &CoverOptions { target: 0.9, ..Default::default() })
            .unwrap();
        assert!(fam.covered_fraction >= 0.9, "{}", fam.covered_fraction);
        assert!(fam.audit_passed);
    }

    #[test]
    fn disjoint_open_set_gives_empty_flagged_family() {
        let mut s = BallSequence::new(1, "x").unwrap();
        s.push(&[0.25], 0.125).unwrap();
        let mu = SelfSimilarMeasure::lebesgue(1).unwrap();
        let omega = OpenSet::from_box(Aabb::new(vec![0.5], vec![1.0]).unwrap()).unwrap();
        let fam = greedy_disjoint_cover(&s, &mu, &omega, 0, &CoverOptions::default()).unwrap();
        assert!(fam.indices.is_empty());
        assert_eq!(fam.covered_fraction, 0.0);
        assert!(matches!(fam.flags[0], Flag::EmptySelection(_)));
        let t = ac_empirical_check(&s, &mu, &[omega], &[0], 1e-9).unwrap();
        assert_eq!(t.c_emp, 0.0);
    }

    #[test]
    fn single_round_on_inballs_is_at_least_half() {
        let s = dyadic_inballs(10);
        let mu = SelfSimilarMeasure::lebesgue(1).unwrap();
        let omegas: Vec<OpenSet> = [(0.0, 1.0), (0.25, 0.75), (0.125, 0.5)]
            .iter()
            .map(|&(a, b)| OpenSet::from_box(Aabb::new(vec![a], vec![b]).unwrap()).unwrap())
            .collect();
        let t = ac_empirical_check(&s, &mu, &omegas, &[0, 3, 7], 1e-9).unwrap();
        assert!(t.c_emp >= 0.5, "{:?}", t.rows);
    }

    #[test]
    fn cover_under_cantor_measure_is_audited() {
        let mu = SelfSimilarMeasure::cantor(0.7).unwrap();
        let s = dyadic_inballs(8);
        let fam = greedy_disjoint_cover(&s, &mu, &unit_interval(), 0, &CoverOptions::default()).unwrap();
        assert!(fam.audit_passed);
        assert!(fam.covered_fraction > 0.0);
    }

    #[test]
    fn two_dimensional_cover() {
        let mut s = BallSequence::new(2, "grid").unwrap();
        for k in 1..=5 {
            let r = 0.5f64.powi(k + 1);
            let n = 1u64 << k;
            for i in 0..n {
                for j in 0..n {
                    s.push(&[(2 * i + 1) as f64 * r, (2 * j + 1) as f64 * r], r).unwrap();
                }
            }
        }
        let mu = SelfSimilarMeasure::lebesgue(2).unwrap();
        let fam = greedy_disjoint_cover(&s, &mu, &OpenSet::unit(2), 0, &CoverOptions::default()).unwrap();
        assert!(fam.audit_passed);
        assert!(fam.covered_fraction > 0.0);
        // generation-2 square (1,1) contains generation-3 square (2,2)
        assert!(audit_cover(&s, &[9, 38], &OpenSet::unit(2)).unwrap_err().contains("intersect"));
    }
}
