use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::maps::IntervalMap;
use crate::real::{rat, to_f64, Rational};

/// Default cap on the number of partition points explored when closing a
/// point set under the map.
pub const DEFAULT_MARKOV_CAP: usize = 1 << 14;

/// Bin edges `0 = e_0 < e_1 < … < e_m = 1` of an Ulam discretization.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamGrid {
    edges: Vec<Rational>,
    edges_f: Vec<f64>,
    lengths_f: Vec<f64>,
    markov: bool,
}

impl UlamGrid {
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("grid needs at least one bin"));
        }
        let m_i = i64::try_from(m).map_err(|_| Error::invalid("grid too large"))?;
        Self::from_edges((0..=m_i).map(|i| rat(i, m_i)).collect())
    }

    pub fn from_edges(edges: Vec<Rational>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::invalid("grid needs at least two edges"));
        }
        if !edges[0].is_zero() || !edges[edges.len() - 1].is_one() {
            return Err(Error::invalid("grid edges must run from 0 to 1"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid edges must be strictly increasing"));
        }
        Ok(Self::build(edges, false))
    }

    /// Smallest partition containing the branch endpoints and `extra`
    /// that is forward invariant: every cell lies in one branch and is
    /// mapped onto a union of cells. Fails with [`Error::NotMarkov`] if
    /// the closure exceeds `cap` points.
    pub fn markov(map: &IntervalMap, extra: &[Rational], cap: usize) -> Result<Self> {
        let zero = Rational::zero();
        let one = Rational::one();
        let mut points: BTreeSet<Rational> = map.singular_set().iter().cloned().collect();
        let mut todo: Vec<Rational> = points.iter().cloned().collect();
        for p in extra {
            if *p < zero || *p > one {
                return Err(Error::invalid(format!("partition point {p} outside [0, 1]")));
            }
            if points.insert(p.clone()) {
                todo.push(p.clone());
            }
        }
        while let Some(p) = todo.pop() {
            for b in map.branches() {
                if &p < b.lo() || &p > b.hi() {
                    continue;
                }
                let q = b.apply(&p);
                if points.insert(q.clone()) {
                    if points.len() > cap {
                        return Err(Error::NotMarkov(format!(
                            "forward closure exceeds {cap} partition points"
                        )));
                    }
                    todo.push(q);
                }
            }
        }
        Ok(Self::build(points.into_iter().collect(), true))
    }

    fn build(edges: Vec<Rational>, markov: bool) -> Self {
        let edges_f: Vec<f64> = edges.iter().map(to_f64).collect();
        let lengths_f = edges.windows(2).map(|w| to_f64(&(&w[1] - &w[0]))).collect();
        Self {
            edges,
            edges_f,
            lengths_f,
            markov,
        }
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[Rational] {
        &self.edges
    }

    pub fn edges_f64(&self) -> &[f64] {
        &self.edges_f
    }

    /// Bin lengths: the `ν₀` weights of the pairing `ν₀(f) = Σ Lᵢ fᵢ`.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths_f
    }

    pub fn bin_length(&self, i: usize) -> Rational {
        &self.edges[i + 1] - &self.edges[i]
    }

    /// Built as the forward closure of a point set under a map.
    pub fn is_markov(&self) -> bool {
        self.markov
    }

    pub fn bin_of(&self, x: &Rational) -> usize {
        let idx = self.edges.partition_point(|e| e <= x);
        idx.saturating_sub(1).min(self.bins() - 1)
    }

    pub fn bin_of_f64(&self, x: f64) -> usize {
        let idx = self.edges_f.partition_point(|&e| e <= x);
        idx.saturating_sub(1).min(self.bins() - 1)
    }

    /// Bins `i` with `[lo, hi) ∩ B_i ≠ ∅`.
    pub fn bins_overlapping(&self, lo: &Rational, hi: &Rational) -> std::ops::Range<usize> {
        let start = self.edges.partition_point(|e| e <= lo).saturating_sub(1);
        let end = self.edges.partition_point(|e| e < hi).min(self.bins());
        start..end.max(start)
    }

    /// `ν₀(f) = Σ Lᵢ fᵢ`.
    pub fn pairing(&self, f: &[f64]) -> f64 {
        self.lengths_f.iter().zip(f).map(|(l, v)| l * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::int;

    #[test]
    fn uniform_grid() {
        let g = UlamGrid::uniform(4).unwrap();
        assert_eq!(g.bins(), 4);
        assert_eq!(g.bin_of(&rat(1, 4)), 1);
        assert_eq!(g.bin_of(&int(1)), 3);
        assert_eq!(g.bins_overlapping(&rat(1, 8), &rat(1, 2)), 0..2);
        assert!(UlamGrid::uniform(0).is_err());
        assert!(UlamGrid::from_edges(vec![int(0), rat(1, 2), rat(1, 2), int(1)]).is_err());
    }

    #[test]
    fn markov_closure_for_hole_at_one_third() {
        let d = IntervalMap::doubling();
        let eps = rat(1, 256);
        let third = rat(1, 3);
        let g = UlamGrid::markov(&d, &[&third - &eps, &third + &eps], DEFAULT_MARKOV_CAP).unwrap();
        assert!(g.is_markov());
        assert!(g.edges().contains(&(&third - &eps)));
        assert!(g.edges().contains(&rat(2, 3)));
        // closure: every edge maps to an edge
        for e in g.edges() {
            assert!(g.edges().contains(&d.eval_exact(e)) || e == &int(1));
        }
    }

    #[test]
    fn non_markov_closure_hits_cap() {
        let beta = IntervalMap::new(
            vec![
                crate::maps::Branch::affine(int(0), rat(2, 3), rat(3, 2), int(0)).unwrap(),
                crate::maps::Branch::affine(rat(2, 3), int(1), rat(3, 2), int(-1)).unwrap(),
            ],
            vec![],
        )
        .unwrap();
        assert!(matches!(UlamGrid::markov(&beta, &[], 256), Err(Error::NotMarkov(_))));
    }
}
