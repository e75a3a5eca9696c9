use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::Flag;
use crate::geometry::exact::{gap_vs_radii, sign_of_sum, Term};
use crate::geometry::BallRef;

use super::index::{first_conflict, intersecting_pairs};
use super::BallSequence;

#[derive(Clone, Debug, PartialEq)]
pub struct ScaleRow {
    pub k: i32,
    /// `|T_k|`
    pub count: usize,
    pub j_k: usize,
    /// `log2(J_k) / k`, undefined for `k = 0`.
    pub slope: Option<f64>,
    /// Family label of each member of `T_k`, aligned with `seq.bucket(k)`.
    pub labels: Vec<usize>,
    /// Every family passed the exact disjointness check.
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RedundancyReport {
    pub rows: Vec<ScaleRow>,
    pub k_min: i32,
    /// `max_{k >= k_min} log2(J_k)/k`
    pub slope_tail: Option<f64>,
    pub tail_non_increasing: bool,
    /// In `d = 1` the `J_k` are minimal; otherwise they are upper bounds.
    pub minimal: bool,
    pub flags: Vec<Flag>,
}

impl RedundancyReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,count,J_k,slope\n");
        for r in &self.rows {
            let slope = r.slope.map_or(String::new(), |x| format!("{x}"));
            let _ = writeln!(s, "{},{},{},{}", r.k, r.count, r.j_k, slope);
        }
        s
    }

    pub fn row(&self, k: i32) -> Option<&ScaleRow> {
        self.rows.iter().find(|r| r.k == k)
    }
}

/// Splits each scale bucket `T_k`, `k <= k_max`, into pairwise-disjoint
/// families. In `d = 1` this is interval partitioning by left endpoints, which
/// uses exactly the maximal overlap depth; in higher dimension it is first-fit
/// coloring of the intersection graph in index order.
pub fn weak_redundancy_report(seq: &BallSequence, k_max: i32) -> RedundancyReport {
    let mut flags = Vec::new();
    if !seq.bucket(-1).is_empty() {
        flags.push(Flag::PreconditionViolated(format!(
            "{} balls have radius above 1 and were left out",
            seq.bucket(-1).len()
        )));
    }
    let mut rows = Vec::new();
    for (&k, members) in seq.buckets().range(0..=k_max.max(0)) {
        let balls: Vec<BallRef<'_>> = members.iter().map(|&i| seq.get(i)).collect();
        let labels = if seq.dim() == 1 { interval_partition(&balls) } else { first_fit_by_index(&balls) };
        let j_k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); j_k];
        for (b, &l) in balls.iter().zip(&labels) {
            groups[l].push(*b);
        }
        let verified = groups.iter().all(|g| first_conflict(g, 1.0).is_none());
        let slope = (k > 0).then(|| (j_k as f64).log2() / k as f64);
        rows.push(ScaleRow { k, count: members.len(), j_k, slope, labels, verified });
    }
    let k_min = (k_max / 2).max(1);
    let tail: Vec<f64> = rows.iter().filter(|r| r.k >= k_min).filter_map(|r| r.slope).collect();
    let slope_tail = tail.iter().copied().reduce(f64::max);
    let tail_non_increasing = tail.windows(2).all(|w| w[1] <= w[0]);
    RedundancyReport { rows, k_min, slope_tail, tail_non_increasing, minimal: seq.dim() == 1, flags }
}

/// Heap entry ordered so that the interval with the smallest right endpoint
/// (compared exactly) sits on top.
struct Open<'a> {
    ball: BallRef<'a>,
    label: usize,
}

impl Open<'_> {
    fn right_cmp(&self, other: &Self) -> Ordering {
        sign_of_sum(&[
            Term::Val(self.ball.center[0]),
            Term::Val(self.ball.radius),
            Term::Val(-other.ball.center[0]),
            Term::Val(-other.ball.radius),
        ])
    }
}

impl PartialEq for Open<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open<'_> {}

impl PartialOrd for Open<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        other.right_cmp(self).then(other.label.cmp(&self.label))
    }
}

fn interval_partition(balls: &[BallRef<'_>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        sign_of_sum(&[
            Term::Val(balls[a].center[0]),
            Term::Val(-balls[a].radius),
            Term::Val(-balls[b].center[0]),
            Term::Val(balls[b].radius),
        ])
        .then(a.cmp(&b))
    });
    let mut labels = vec![0; balls.len()];
    let mut heap: BinaryHeap<Open<'_>> = BinaryHeap::new();
    let mut next = 0;
    for i in order {
        let b = balls[i];
        let reuse = heap.peek().is_some_and(|top| {
            gap_vs_radii(b.center[0], top.ball.center[0], 1.0, b.radius, 1.0, top.ball.radius) == Ordering::Greater
        });
        let label = if reuse {
            heap.pop().map(|t| t.label).unwrap_or(0)
        } else {
            next += 1;
            next - 1
        };
        labels[i] = label;
        heap.push(Open { ball: b, label });
    }
    labels
}

fn first_fit_by_index(balls: &[BallRef<'_>]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); balls.len()];
    for (a, b) in intersecting_pairs(balls, 1.0) {
        adj[b].push(a);
    }
    let mut labels: Vec<usize> = Vec::with_capacity(balls.len());
    let mut used = Vec::new();
    for n in adj.iter() {
        used.clear();
        used.extend(n.iter().map(|&j| labels[j]));
        used.sort_unstable();
        used.dedup();
        labels.push(used.iter().enumerate().find(|(k, c)| *k != **c).map_or(used.len(), |(k, _)| k));
    }
    labels
}
