//! Spatial indexes over pairwise-disjoint closed balls.

use std::collections::{BTreeMap, HashMap};

use crate::geometry::{scale_index, BallRef};

/// Answers "does this ball meet any stored ball?" exactly.
pub(crate) enum DisjointIndex {
    /// `d = 1`: stored intervals are disjoint, so ordering by center is
    /// ordering by position and only the two neighbors of a query can meet it.
    Line(BTreeMap<OrdF64, f64>),
    Grid(Grid),
}

#[derive(Clone, Copy)]
pub(crate) struct OrdF64(pub f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl DisjointIndex {
    pub fn new(dim: usize) -> Self {
        if dim == 1 {
            DisjointIndex::Line(BTreeMap::new())
        } else {
            DisjointIndex::Grid(Grid::new(dim))
        }
    }

    pub fn meets_any(&self, q: &BallRef<'_>) -> bool {
        match self {
            DisjointIndex::Line(map) => {
                let c = OrdF64(q.center[0]);
                let below = map.range(..=c).next_back();
                let above = map.range(c..).next();
                [below, above].into_iter().flatten().any(|(k, r)| {
                    let other = [k.0];
                    !q.disjoint(&BallRef { center: &other, radius: *r })
                })
            }
            DisjointIndex::Grid(g) => g.meets_any(q),
        }
    }

    /// Caller guarantees `b` is disjoint from everything stored.
    pub fn insert(&mut self, b: &BallRef<'_>) {
        match self {
            DisjointIndex::Line(map) => {
                map.insert(OrdF64(b.center[0]), b.radius);
            }
            DisjointIndex::Grid(g) => g.insert(b),
        }
    }
}

/// Multi-level hash grid: a ball of scale `k` lives in the level-`k` cell of
/// side `2^-k` holding its center.
pub(crate) struct Grid {
    dim: usize,
    centers: Vec<f64>,
    radii: Vec<f64>,
    levels: BTreeMap<i32, Level>,
}

#[derive(Default)]
struct Level {
    cells: HashMap<Vec<i64>, Vec<u32>>,
    members: Vec<u32>,
}

impl Grid {
    fn new(dim: usize) -> Self {
        Grid { dim, centers: Vec::new(), radii: Vec::new(), levels: BTreeMap::new() }
    }

    fn level_of(r: f64) -> i32 {
        scale_index(r).0.min(60)
    }

    fn cell(c: &[f64], k: i32) -> Vec<i64> {
        let s = 2f64.powi(k);
        c.iter().map(|x| (x * s).floor() as i64).collect()
    }

    fn stored(&self, i: u32) -> BallRef<'_> {
        let i = i as usize;
        BallRef { center: &self.centers[i * self.dim..(i + 1) * self.dim], radius: self.radii[i] }
    }

    fn insert(&mut self, b: &BallRef<'_>) {
        let id = self.radii.len() as u32;
        self.centers.extend_from_slice(b.center);
        self.radii.push(b.radius);
        let k = Grid::level_of(b.radius);
        let level = self.levels.entry(k).or_default();
        level.cells.entry(Grid::cell(b.center, k)).or_default().push(id);
        level.members.push(id);
    }

    fn meets_any(&self, q: &BallRef<'_>) -> bool {
        for (&k, level) in &self.levels {
            let side = 2f64.powi(-k);
            // stored centers lie within q.radius + side of q's center
            let reach = q.radius + side;
            let lo = Grid::cell(&q.center.iter().map(|c| c - reach).collect::<Vec<_>>(), k);
            let hi = Grid::cell(&q.center.iter().map(|c| c + reach).collect::<Vec<_>>(), k);
            let cells: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a + 1) as f64).product();
            // bucket -1 holds every radius above 1, so its reach is unbounded
            if k < 0 || cells > level.members.len() as f64 {
                if level.members.iter().any(|&id| !q.disjoint(&self.stored(id))) {
                    return true;
                }
                continue;
            }
            let mut idx = lo.clone();
            'cells: loop {
                if let Some(ids) = level.cells.get(&idx) {
                    if ids.iter().any(|&id| !q.disjoint(&self.stored(id))) {
                        return true;
                    }
                }
                for i in 0..self.dim {
                    idx[i] += 1;
                    if idx[i] <= hi[i] {
                        continue 'cells;
                    }
                    idx[i] = lo[i];
                }
                break;
            }
        }
        false
    }
}

/// All pairs `(i, j)`, `i < j`, whose `f`-dilations meet (closed balls, exact
/// test). Sweep on the first axis; candidates are confirmed exactly.
pub(crate) fn intersecting_pairs(balls: &[BallRef<'_>], f: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    sweep(balls, f, |i, j| {
        out.push((i.min(j), i.max(j)));
        true
    });
    out
}

/// First pair whose `f`-dilations meet, if any.
pub(crate) fn first_conflict(balls: &[BallRef<'_>], f: f64) -> Option<(usize, usize)> {
    let mut found = None;
    sweep(balls, f, |i, j| {
        found = Some((i.min(j), i.max(j)));
        false
    });
    found
}

/// Calls `hit(i, j)` for every meeting pair; stops early when it returns false.
pub(crate) fn sweep(balls: &[BallRef<'_>], f: f64, mut hit: impl FnMut(usize, usize) -> bool) {
    let lo = |b: &BallRef<'_>| b.center[0] - f * b.radius;
    let hi = |b: &BallRef<'_>| {
        let h = b.center[0] + f * b.radius;
        h + (h.abs() + f * b.radius) * 1e-15 + f64::MIN_POSITIVE
    };
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| lo(&balls[a]).total_cmp(&lo(&balls[b])).then(a.cmp(&b)));
    for (pos, &i) in order.iter().enumerate() {
        let reach = hi(&balls[i]);
        for &j in &order[pos + 1..] {
            if lo(&balls[j]) - lo(&balls[j]).abs() * 1e-15 > reach {
                break;
            }
            if !balls[i].disjoint_scaled(f, &balls[j], f) && !hit(i, j) {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_pairs(balls: &[BallRef<'_>], f: f64) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for i in 0..balls.len() {
            for j in i + 1..balls.len() {
                if !balls[i].disjoint_scaled(f, &balls[j], f) {
                    v.push((i, j));
                }
            }
        }
        v
    }

    proptest! {
        #[test]
        fn sweep_matches_naive(
            raw in prop::collection::vec((0u32..64, 0u32..64, 1u32..8), 0..40),
            f in prop::sample::select(vec![0.5, 1.0, 2.0]),
        ) {
            let store: Vec<([f64; 2], f64)> = raw
                .iter()
                .map(|(x, y, r)| ([*x as f64 / 64.0, *y as f64 / 64.0], *r as f64 / 64.0))
                .collect();
            let balls: Vec<BallRef<'_>> = store.iter().map(|(c, r)| BallRef { center: c, radius: *r }).collect();
            let mut got = intersecting_pairs(&balls, f);
            got.sort();
            prop_assert_eq!(got, naive_pairs(&balls, f));
        }

        #[test]
        fn index_agrees_with_linear_scan(
            dim in 1usize..3,
            raw in prop::collection::vec((0u32..128, 0u32..128, 0u32..7), 1..60),
        ) {
            let store: Vec<(Vec<f64>, f64)> = raw
                .iter()
                .map(|(x, y, k)| {
                    let c = [*x as f64 / 128.0, *y as f64 / 128.0];
                    (c[..dim].to_vec(), 2f64.powi(-(*k as i32) - 2))
                })
                .collect();
            let mut idx = DisjointIndex::new(dim);
            let mut kept: Vec<usize> = Vec::new();
            for (i, (c, r)) in store.iter().enumerate() {
                let q = BallRef { center: c, radius: *r };
                let naive = kept.iter().any(|&j| !q.disjoint(&BallRef { center: &store[j].0, radius: store[j].1 }));
                prop_assert_eq!(idx.meets_any(&q), naive);
                if !naive {
                    idx.insert(&q);
                    kept.push(i);
                }
            }
        }
    }
}
