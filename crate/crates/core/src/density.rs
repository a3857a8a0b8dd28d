//! Exact piecewise-constant densities and their transport under affine maps.
//!
//! For piecewise affine maps the transfer operator sends step functions to
//! step functions, so densities can be pushed forward exactly in rational
//! arithmetic. Breakpoints of `P f` are images of the breakpoints of `f` and
//! of the branch endpoints; for Markov configurations their number stays
//! bounded.

use num_traits::{One, Signed, Zero};

use crate::interval::IntervalSet;
use crate::maps::IntervalMap;
use crate::real::{rat, to_f64, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct StepDensity {
    /// `breaks[0] = 0 < … < breaks[m] = 1`.
    breaks: Vec<Rational>,
    values: Vec<Rational>,
}

impl StepDensity {
    pub fn constant(c: Rational) -> Self {
        Self {
            breaks: vec![Rational::zero(), Rational::one()],
            values: vec![c],
        }
    }

    pub fn uniform() -> Self {
        Self::constant(Rational::one())
    }

    /// Step function with the given cell edges and values; panics on shape mismatch.
    pub fn from_cells(breaks: Vec<Rational>, values: Vec<Rational>) -> Self {
        assert_eq!(breaks.len(), values.len() + 1, "breaks/values shape mismatch");
        assert!(breaks.windows(2).all(|w| w[0] < w[1]), "breaks must increase");
        let mut d = Self { breaks, values };
        d.coalesce();
        d
    }

    pub fn breaks(&self) -> &[Rational] {
        &self.breaks
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let idx = self.breaks.partition_point(|b| b <= x);
        let cell = idx.saturating_sub(1).min(self.values.len() - 1);
        self.values[cell].clone()
    }

    pub fn integral(&self) -> Rational {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .fold(Rational::zero(), |acc, (w, v)| acc + (&w[1] - &w[0]) * v)
    }

    pub fn integral_over(&self, set: &IntervalSet) -> Rational {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .filter(|(_, v)| !v.is_zero())
            .fold(Rational::zero(), |acc, (w, v)| acc + set.overlap(&w[0], &w[1]) * v)
    }

    pub fn sup_over(&self, set: &IntervalSet) -> Option<Rational> {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .filter(|(w, _)| set.overlap(&w[0], &w[1]).is_positive())
            .map(|(_, v)| v.clone())
            .max()
    }

    pub fn inf_over(&self, set: &IntervalSet) -> Option<Rational> {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .filter(|(w, _)| set.overlap(&w[0], &w[1]).is_positive())
            .map(|(_, v)| v.clone())
            .min()
    }

    /// `1_set · f`.
    pub fn restrict(&self, set: &IntervalSet) -> Self {
        let mut breaks: Vec<Rational> = self
            .breaks
            .iter()
            .chain(set.endpoints())
            .cloned()
            .collect();
        breaks.sort();
        breaks.dedup();
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) * rat(1, 2);
                if set.contains(&mid) {
                    self.eval(&mid)
                } else {
                    Rational::zero()
                }
            })
            .collect();
        let mut d = Self { breaks, values };
        d.coalesce();
        d
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut d = Self {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        };
        d.coalesce();
        d
    }

    /// The transfer operator: `(P f)(y) = Σ_{T x = y} f(x) / |T'(x)|`.
    pub fn push(&self, map: &IntervalMap) -> Self {
        let mut breaks = vec![Rational::zero(), Rational::one()];
        for b in map.branches() {
            breaks.push(b.apply(b.lo()));
            breaks.push(b.apply(b.hi()));
            for p in self.breaks.iter().filter(|p| *p > b.lo() && *p < b.hi()) {
                breaks.push(b.apply(p));
            }
        }
        breaks.sort();
        breaks.dedup();
        let weights: Vec<Rational> = map.branches().iter().map(|b| b.slope().abs().recip()).collect();
        let values = breaks
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) * rat(1, 2);
                map.branches()
                    .iter()
                    .zip(&weights)
                    .filter_map(|(b, wgt)| {
                        let x = b.invert(&mid);
                        (&x >= b.lo() && &x < b.hi()).then(|| self.eval(&x) * wgt)
                    })
                    .fold(Rational::zero(), |acc, v| acc + v)
            })
            .collect();
        let mut d = Self { breaks, values };
        d.coalesce();
        d
    }

    pub fn to_f64_cells(&self) -> Vec<(f64, f64, f64)> {
        self.breaks
            .windows(2)
            .zip(&self.values)
            .map(|(w, v)| (to_f64(&w[0]), to_f64(&w[1]), to_f64(v)))
            .collect()
    }

    fn coalesce(&mut self) {
        let mut breaks = vec![self.breaks[0].clone()];
        let mut values: Vec<Rational> = Vec::with_capacity(self.values.len());
        for (i, v) in self.values.iter().enumerate() {
            if values.last() == Some(v) {
                *breaks.last_mut().expect("non-empty") = self.breaks[i + 1].clone();
            } else {
                values.push(v.clone());
                breaks.push(self.breaks[i + 1].clone());
            }
        }
        self.breaks = breaks;
        self.values = values;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::int;

    #[test]
    fn lebesgue_is_invariant_for_doubling_and_tent() {
        let u = StepDensity::uniform();
        assert_eq!(u.push(&IntervalMap::doubling()), u);
        assert_eq!(u.push(&IntervalMap::tent()), u);
    }

    #[test]
    fn skew_markov_invariant_density() {
        let phi = StepDensity::from_cells(vec![int(0), rat(2, 3), int(1)], vec![rat(9, 8), rat(3, 4)]);
        assert_eq!(phi.integral(), int(1));
        assert_eq!(phi.push(&IntervalMap::skew_markov()), phi);
    }

    #[test]
    fn push_preserves_mass() {
        let f = StepDensity::from_cells(vec![int(0), rat(1, 3), rat(1, 2), int(1)], vec![int(3), int(0), rat(1, 5)]);
        for map in [IntervalMap::doubling(), IntervalMap::tent(), IntervalMap::skew_markov()] {
            assert_eq!(f.push(&map).integral(), f.integral());
        }
    }

    #[test]
    fn restrict_zeroes_outside() {
        let set = IntervalSet::from_intervals([(rat(1, 4), rat(1, 2))]);
        let r = StepDensity::uniform().restrict(&set);
        assert_eq!(r.integral(), rat(1, 4));
        assert_eq!(r.cells(), 3);
        assert_eq!(r.sup_over(&set), Some(int(1)));
    }
}
