//! Exact sign predicates over `f64` operands.
//!
//! Every finite `f64` is a dyadic rational, so sums and products of stored
//! coordinates can be evaluated without rounding by keeping the error terms
//! (floating-point expansions). All disjointness and containment tests of the
//! covering engine go through here.

use std::cmp::Ordering;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bv = s - a;
    let av = s - bv;
    (s, (a - av) + (b - bv))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Non-overlapping expansion, components sorted by increasing magnitude.
#[derive(Default)]
struct Expansion {
    parts: Vec<f64>,
}

impl Expansion {
    fn add(&mut self, mut q: f64) {
        if q == 0.0 {
            return;
        }
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        for &h in &self.parts {
            let (s, e) = two_sum(q, h);
            if e != 0.0 {
                out.push(e);
            }
            q = s;
        }
        if q != 0.0 {
            out.push(q);
        }
        self.parts = out;
    }

    fn sign(&self) -> Ordering {
        match self.parts.iter().rev().find(|x| **x != 0.0) {
            Some(x) if *x > 0.0 => Ordering::Greater,
            Some(_) => Ordering::Less,
            None => Ordering::Equal,
        }
    }
}

/// A term of an exact sum: either a plain value or a product of two values.
#[derive(Clone, Copy, Debug)]
pub enum Term {
    Val(f64),
    Prod(f64, f64),
}

/// Exact sign of `Σ terms`.
pub fn sign_of_sum(terms: &[Term]) -> Ordering {
    let mut e = Expansion::default();
    for t in terms {
        match *t {
            Term::Val(v) => e.add(v),
            Term::Prod(a, b) => {
                let (p, err) = two_prod(a, b);
                e.add(p);
                e.add(err);
            }
        }
    }
    e.sign()
}

/// Exact comparison of `a - b` against `fa*ra + fb*rb`.
///
/// Returns the sign of `(a - b) - (fa*ra + fb*rb)`.
#[inline]
pub fn gap_vs_radii(a: f64, b: f64, fa: f64, ra: f64, fb: f64, rb: f64) -> Ordering {
    // Fast path: the rounded value is far from zero.
    let approx = (a - b) - (fa * ra + fb * rb);
    let scale = a.abs() + b.abs() + (fa * ra).abs() + (fb * rb).abs();
    if approx.abs() > scale * 1e-12 {
        return if approx > 0.0 { Ordering::Greater } else { Ordering::Less };
    }
    sign_of_sum(&[
        Term::Val(a),
        Term::Val(-b),
        Term::Prod(-fa, ra),
        Term::Prod(-fb, rb),
    ])
}

/// Exact sign of `a - b - f*r`.
#[inline]
pub fn diff_minus_scaled(a: f64, b: f64, f: f64, r: f64) -> Ordering {
    gap_vs_radii(a, b, f, r, 0.0, 0.0)
}

/// Double-double value `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    #[inline]
    fn renorm(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, b);
        DoubleDouble { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, f: f64) -> Self {
        let (p, e) = two_prod(self.hi, f);
        DoubleDouble::renorm(p, e + self.lo * f)
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl std::ops::Add for DoubleDouble {
    type Output = Self;

    #[inline]
    fn add(self, o: DoubleDouble) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        DoubleDouble::renorm(s, e + self.lo + o.lo)
    }
}

impl std::ops::Mul for DoubleDouble {
    type Output = Self;

    #[inline]
    fn mul(self, o: DoubleDouble) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        DoubleDouble::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }
}

/// Exact sign of `v + off - (x + y)` where `v` is a double-double.
#[inline]
pub fn dd_cmp(v: DoubleDouble, off: f64, x: f64, y: f64) -> Ordering {
    let approx = (v.hi - x) + (v.lo + off - y);
    let scale = v.hi.abs() + x.abs() + y.abs() + off.abs();
    if approx.abs() > scale * 1e-12 {
        return if approx > 0.0 { Ordering::Greater } else { Ordering::Less };
    }
    sign_of_sum(&[Term::Val(v.hi), Term::Val(v.lo), Term::Val(off), Term::Val(-x), Term::Val(-y)])
}
