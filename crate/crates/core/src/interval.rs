//! Finite unions of half-open rational intervals `[lo, hi)` inside `[0, 1]`.

use num_traits::{One, Zero};

use crate::real::{to_f64, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalSet {
    /// Sorted, pairwise disjoint, non-adjacent, non-empty intervals.
    parts: Vec<(Rational, Rational)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn unit() -> Self {
        Self {
            parts: vec![(Rational::zero(), Rational::one())],
        }
    }

    /// Builds the union of arbitrary intervals, clipped to `[0, 1]` and merged.
    pub fn from_intervals<I>(intervals: I) -> Self
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let zero = Rational::zero();
        let one = Rational::one();
        let mut raw: Vec<(Rational, Rational)> = intervals
            .into_iter()
            .map(|(lo, hi)| (lo.max(zero.clone()), hi.min(one.clone())))
            .filter(|(lo, hi)| lo < hi)
            .collect();
        raw.sort();
        Self { parts: merge_sorted(raw) }
    }

    pub fn parts(&self) -> &[(Rational, Rational)] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn measure(&self) -> Rational {
        self.parts
            .iter()
            .fold(Rational::zero(), |acc, (lo, hi)| acc + (hi - lo))
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let idx = self.parts.partition_point(|(lo, _)| lo <= x);
        idx > 0 && x < &self.parts[idx - 1].1
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.parts
            .iter()
            .any(|(lo, hi)| to_f64(lo) <= x && x < to_f64(hi))
    }

    /// Complement inside `[0, 1]`.
    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        let mut cursor = Rational::zero();
        for (lo, hi) in &self.parts {
            if &cursor < lo {
                out.push((cursor.clone(), lo.clone()));
            }
            cursor = hi.clone();
        }
        if cursor < Rational::one() {
            out.push((cursor, Rational::one()));
        }
        Self { parts: out }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.parts.len() && j < other.parts.len() {
            let (a_lo, a_hi) = &self.parts[i];
            let (b_lo, b_hi) = &other.parts[j];
            let lo = a_lo.max(b_lo);
            let hi = a_hi.min(b_hi);
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a_hi < b_hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { parts: out }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self::from_intervals(self.parts.iter().chain(&other.parts).cloned())
    }

    /// Lebesgue measure of the intersection with `[lo, hi)`.
    pub fn overlap(&self, lo: &Rational, hi: &Rational) -> Rational {
        let start = self.parts.partition_point(|(_, h)| h <= lo);
        let mut acc = Rational::zero();
        for (a, b) in &self.parts[start..] {
            if a >= hi {
                break;
            }
            let l = a.max(lo);
            let h = b.min(hi);
            if l < h {
                acc += h - l;
            }
        }
        acc
    }

    /// All interval endpoints, in increasing order.
    pub fn endpoints(&self) -> impl Iterator<Item = &Rational> {
        self.parts.iter().flat_map(|(lo, hi)| [lo, hi])
    }
}

fn merge_sorted(raw: Vec<(Rational, Rational)>) -> Vec<(Rational, Rational)> {
    let mut out: Vec<(Rational, Rational)> = Vec::with_capacity(raw.len());
    for (lo, hi) in raw {
        match out.last_mut() {
            Some(last) if lo <= last.1 => {
                if hi > last.1 {
                    last.1 = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}
