use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::real::{to_f64, Rational};

/// The rare-event set: a finite union of subintervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    centers: Vec<Rational>,
    radius: Option<Rational>,
    intervals: IntervalSet,
    intervals_f: Vec<(f64, f64)>,
}

impl Hole {
    /// `∪_{v ∈ V} (v − ε, v + ε)`, clipped to `[0, 1]` and merged.
    pub fn around(centers: &[Rational], radius: &Rational) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::invalid(format!("hole radius must be positive, got {radius}")));
        }
        if centers.is_empty() {
            return Err(Error::invalid("hole needs at least one center"));
        }
        let zero = Rational::zero();
        let one = Rational::from_integer(1.into());
        if let Some(v) = centers.iter().find(|v| **v < zero || **v > one) {
            return Err(Error::invalid(format!("hole center {v} outside [0, 1]")));
        }
        let intervals =
            IntervalSet::from_intervals(centers.iter().map(|v| (v - radius, v + radius)));
        Ok(Self::build(centers.to_vec(), Some(radius.clone()), intervals))
    }

    pub fn from_intervals(intervals: IntervalSet) -> Self {
        Self::build(Vec::new(), None, intervals)
    }

    pub fn empty() -> Self {
        Self::from_intervals(IntervalSet::empty())
    }

    fn build(centers: Vec<Rational>, radius: Option<Rational>, intervals: IntervalSet) -> Self {
        let intervals_f = intervals
            .parts()
            .iter()
            .map(|(lo, hi)| (to_f64(lo), to_f64(hi)))
            .collect();
        Self {
            centers,
            radius,
            intervals,
            intervals_f,
        }
    }

    pub fn centers(&self) -> &[Rational] {
        &self.centers
    }

    pub fn radius(&self) -> Option<&Rational> {
        self.radius.as_ref()
    }

    pub fn intervals(&self) -> &IntervalSet {
        &self.intervals
    }

    pub fn intervals_f64(&self) -> &[(f64, f64)] {
        &self.intervals_f
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn lebesgue(&self) -> Rational {
        self.intervals.measure()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.intervals.contains(x)
    }

    pub fn contains_f64(&self, x: f64) -> bool {
        self.intervals_f.iter().any(|&(lo, hi)| lo <= x && x < hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::{int, rat};

    #[test]
    fn neighbourhoods_merge_and_clip() {
        let h = Hole::around(&[rat(1, 3)], &rat(1, 1024)).unwrap();
        assert_eq!(h.lebesgue(), rat(1, 512));
        let h = Hole::around(&[int(0)], &rat(1, 8)).unwrap();
        assert_eq!(h.intervals().parts(), &[(int(0), rat(1, 8))]);
        let h = Hole::around(&[rat(1, 4), rat(5, 16)], &rat(1, 8)).unwrap();
        assert_eq!(h.intervals().len(), 1);
        assert!(h.lebesgue() <= rat(4, 8));
        assert!(h.contains_f64(0.2) && !h.contains_f64(0.5));
    }

    #[test]
    fn rejects_bad_radius_or_center() {
        assert!(Hole::around(&[rat(1, 3)], &int(0)).is_err());
        assert!(Hole::around(&[int(2)], &rat(1, 8)).is_err());
        assert!(Hole::around(&[], &rat(1, 8)).is_err());
    }
}
