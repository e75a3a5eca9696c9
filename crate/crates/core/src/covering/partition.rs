use std::cmp::Ordering;

use crate::error::{Error, Flag, Result};
use crate::geometry::exact::{sign_of_sum, Term};
use crate::geometry::{check_dim, scale_index, Ball, BallRef};

use super::index::{first_conflict, intersecting_pairs};

/// Result of the Besicovitch-type selection and re-sorting.
#[derive(Clone, Debug, PartialEq)]
pub struct BesicovitchPartition {
    /// Input indices chosen by the selection step, in selection order.
    pub selected: Vec<usize>,
    /// Families of input indices; within a family the `(1/v)`-dilations are
    /// pairwise disjoint.
    pub families: Vec<Vec<usize>>,
}

impl BesicovitchPartition {
    pub fn count(&self) -> usize {
        self.families.len()
    }
}

fn validate(family: &[Ball]) -> Result<usize> {
    let d = family.first().map_or(1, Ball::dim);
    for b in family {
        check_dim(d, b.dim())?;
        if !b.radius().is_finite() || b.center().iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("unbounded family"));
        }
    }
    Ok(d)
}

/// Greedy Besicovitch selection by decreasing radius (a ball is taken when its
/// center is not yet covered), followed by first-fit sorting of the selected
/// balls into families whose `(1/v)`-dilations are pairwise disjoint.
pub fn besicovitch_partition(family: &[Ball], v: f64) -> Result<BesicovitchPartition> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid("v must lie in (0,1]"));
    }
    let d = validate(family)?;
    let mut centers: Vec<&[f64]> = family.iter().map(Ball::center).collect();
    centers.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal));
    if centers.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("expected one ball per center"));
    }

    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by(|&a, &b| family[b].radius().total_cmp(&family[a].radius()).then(a.cmp(&b)));
    let mut selected: Vec<usize> = Vec::new();
    for &i in &order {
        let c = family[i].center();
        if !selected.iter().any(|&j| family[j].as_ref().contains_point(c)) {
            selected.push(i);
        }
    }

    let f = 1.0 / v;
    let balls: Vec<BallRef<'_>> = selected.iter().map(|&i| family[i].as_ref()).collect();
    let mut pos: Vec<usize> = (0..balls.len()).collect();
    if d == 1 {
        // left endpoints of the dilated intervals, compared exactly
        pos.sort_by(|&a, &b| {
            sign_of_sum(&[
                Term::Val(balls[a].center[0]),
                Term::Prod(-f, balls[a].radius),
                Term::Val(-balls[b].center[0]),
                Term::Prod(f, balls[b].radius),
            ])
            .then(a.cmp(&b))
        });
    } else {
        pos.sort_by_key(|&a| (scale_index(balls[a].radius).0, a));
    }
    let colors = first_fit(&balls, f, &pos);
    let count = colors.iter().copied().max().map_or(0, |c| c + 1);
    let mut families = vec![Vec::new(); count];
    for &p in &pos {
        families[colors[p]].push(selected[p]);
    }
    Ok(BesicovitchPartition { selected, families })
}

/// First-fit coloring of the `f`-dilation conflict graph in the given order.
fn first_fit(balls: &[BallRef<'_>], f: f64, order: &[usize]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); balls.len()];
    for (a, b) in intersecting_pairs(balls, f) {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut color = vec![usize::MAX; balls.len()];
    let mut used = Vec::new();
    for &i in order {
        used.clear();
        used.extend(adj[i].iter().map(|&j| color[j]).filter(|&c| c != usize::MAX));
        used.sort_unstable();
        used.dedup();
        color[i] = used.iter().enumerate().find(|(k, c)| *k != **c).map_or(used.len(), |(k, _)| k);
    }
    color
}

/// Families of pairwise-disjoint balls built by scale-ordered first fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySort {
    pub families: Vec<Vec<usize>>,
    /// `1 + max` over balls of the number of earlier-placed balls it meets.
    pub greedy_bound: usize,
}

impl FamilySort {
    pub fn count(&self) -> usize {
        self.families.len()
    }
}

/// Splits a family whose `v`-scalings are pairwise disjoint into families of
/// pairwise-disjoint balls, scale buckets in ascending order (largest balls
/// first), each ball going to the first family it does not meet.
pub fn sort_disjoint_families(family: &[Ball], v: f64) -> Result<FamilySort> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid("v must lie in (0,1]"));
    }
    validate(family)?;
    let balls: Vec<BallRef<'_>> = family.iter().map(Ball::as_ref).collect();
    if let Some((a, b)) = first_conflict(&balls, v) {
        return Err(Error::invalid(format!("the v-scaled balls {a} and {b} intersect")));
    }
    let mut order: Vec<usize> = (0..family.len()).collect();
    order.sort_by_key(|&a| (scale_index(balls[a].radius).0, a));
    let colors = first_fit(&balls, 1.0, &order);
    let count = colors.iter().copied().max().map_or(0, |c| c + 1);
    let mut families = vec![Vec::new(); count];
    for &i in &order {
        families[colors[i]].push(i);
    }
    let mut rank = vec![0usize; family.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut earlier = vec![0usize; family.len()];
    for (a, b) in intersecting_pairs(&balls, 1.0) {
        let later = if rank[a] > rank[b] { a } else { b };
        earlier[later] += 1;
    }
    let greedy_bound = 1 + earlier.iter().copied().max().unwrap_or(0);
    Ok(FamilySort { families, greedy_bound })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverlapCount {
    pub count: usize,
    pub flags: Vec<Flag>,
}

/// Number of family balls meeting `probe`. Preconditions (family radii at
/// least the probe's, `v`-scalings pairwise disjoint) are checked and flagged.
pub fn overlap_count(family: &[Ball], probe: &Ball, v: f64) -> Result<OverlapCount> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(Error::invalid("v must lie in (0,1]"));
    }
    for b in family {
        check_dim(probe.dim(), b.dim())?;
    }
    let mut flags = Vec::new();
    if let Some(i) = family.iter().position(|b| b.radius() < probe.radius()) {
        flags.push(Flag::PreconditionViolated(format!("ball {i} is smaller than the probe")));
    }
    let balls: Vec<BallRef<'_>> = family.iter().map(Ball::as_ref).collect();
    if let Some((a, b)) = first_conflict(&balls, v) {
        flags.push(Flag::PreconditionViolated(format!("the v-scaled balls {a} and {b} intersect")));
    }
    let p = probe.as_ref();
    let count = balls.iter().filter(|b| !b.disjoint(&p)).count();
    Ok(OverlapCount { count, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b1(c: f64, r: f64) -> Ball {
        Ball::new(vec![c], r).unwrap()
    }

    #[test]
    fn besicovitch_examples() {
        let p = besicovitch_partition(&[b1(0.3, 0.1)], 0.5).unwrap();
        assert_eq!(p.families, vec![vec![0]]);
        let p = besicovitch_partition(&[b1(0.0, 0.6), b1(1.0, 0.6), b1(2.0, 0.6)], 1.0).unwrap();
        assert_eq!(p.count(), 2);
        assert!(besicovitch_partition(&[b1(0.0, 0.6), b1(0.0, 0.3)], 1.0).is_err());
        assert!(besicovitch_partition(&[b1(0.0, 0.6)], 0.0).is_err());
    }

    #[test]
    fn sort_examples() {
        let fam = [b1(0.0, 1.0), b1(1.5, 1.0), b1(3.0, 1.0)];
        let s = sort_disjoint_families(&fam, 0.5).unwrap();
        assert_eq!(s.count(), 2);
        assert!(s.count() <= s.greedy_bound);
        let s = sort_disjoint_families(&[b1(0.0, 0.25), b1(1.0, 0.25)], 0.5).unwrap();
        assert_eq!(s.count(), 1);
        let e = sort_disjoint_families(&[b1(0.0, 1.0), b1(0.5, 1.0)], 0.5).unwrap_err();
        assert!(e.to_string().contains("0 and 1"));
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_count(&[], &b1(0.0, 1.0), 0.5).unwrap().count, 0);
        let far = overlap_count(&[b1(10.0, 1.0), b1(-10.0, 2.0)], &b1(0.0, 1.0), 0.5).unwrap();
        assert_eq!(far.count, 0);
        assert!(far.flags.is_empty());
        let bad = overlap_count(&[b1(0.0, 0.5)], &b1(0.0, 1.0), 0.5).unwrap();
        assert_eq!(bad.count, 1);
        assert_eq!(bad.flags.len(), 1);
    }

    /// Oracle for the largest count: candidates on a grid of centers (step 1/8)
    /// and radii in {1, 1.5, 2, 3}; the halves are intervals, so the largest
    /// pairwise-disjoint set is found exactly by earliest-right-end scheduling.
    #[test]
    fn overlap_bound_in_one_dimension() {
        let probe = b1(0.0, 1.0);
        let mut cands = Vec::new();
        for r in [1.0, 1.5, 2.0, 3.0] {
            for j in -40..=40 {
                let c = j as f64 / 8.0;
                if (c.abs() - r) <= 1.0 {
                    cands.push(b1(c, r));
                }
            }
        }
        cands.sort_by(|a, b| (a.center()[0] + a.radius() / 2.0).total_cmp(&(b.center()[0] + b.radius() / 2.0)));
        let mut best: Vec<Ball> = Vec::new();
        for c in cands {
            let lo = c.center()[0] - c.radius() / 2.0;
            if best.last().is_none_or(|l| lo > l.center()[0] + l.radius() / 2.0) {
                best.push(c);
            }
        }
        let got = overlap_count(&best, &probe, 0.5).unwrap();
        assert!(got.flags.is_empty());
        assert_eq!(got.count, best.len());
        assert!(got.count <= 6, "{}", got.count);
    }

    proptest! {
        #[test]
        fn partition_covers_centers_and_separates_dilations(
            raw in prop::collection::btree_map(0u32..256, 1u32..32, 1..60),
            v in prop::sample::select(vec![1.0, 0.5, 0.25]),
        ) {
            let fam: Vec<Ball> = raw.iter().map(|(c, r)| b1(*c as f64 / 256.0, *r as f64 / 256.0)).collect();
            let p = besicovitch_partition(&fam, v).unwrap();
            for b in &fam {
                prop_assert!(p.selected.iter().any(|&j| fam[j].as_ref().contains_point(b.center())));
            }
            for f in &p.families {
                for (x, &i) in f.iter().enumerate() {
                    for &j in &f[x + 1..] {
                        prop_assert!(fam[i].as_ref().disjoint_scaled(1.0 / v, &fam[j].as_ref(), 1.0 / v));
                    }
                }
            }
        }

        #[test]
        fn sorted_families_are_disjoint_and_within_bound(
            raw in prop::collection::vec((0u32..512, 0u32..4), 1..50),
        ) {
            // keep balls whose halves avoid the ones already kept
            let mut fam: Vec<Ball> = Vec::new();
            for (c, k) in raw {
                let b = b1(c as f64 / 64.0, 0.5f64.powi(k as i32));
                if fam.iter().all(|o| o.as_ref().disjoint_scaled(0.5, &b.as_ref(), 0.5)) {
                    fam.push(b);
                }
            }
            let s = sort_disjoint_families(&fam, 0.5).unwrap();
            prop_assert!(s.count() <= s.greedy_bound);
            let mut seen = 0;
            for f in &s.families {
                seen += f.len();
                for (x, &i) in f.iter().enumerate() {
                    for &j in &f[x + 1..] {
                        prop_assert!(fam[i].as_ref().disjoint(&fam[j].as_ref()));
                    }
                }
            }
            prop_assert_eq!(seen, fam.len());
        }
    }
}
