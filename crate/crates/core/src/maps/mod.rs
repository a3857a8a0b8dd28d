//! Piecewise affine expanding interval maps of Rychlik type.
//!
//! A map is a list of affine branches `x ↦ a·x + b` on half-open domains
//! `[lo, hi)` covering `[0, 1]`. At a branch endpoint the map takes the value
//! of the branch to the right (right-continuous convention); `x = 1` belongs
//! to the last branch. The weight `g = 1/|T'|` vanishes on the singular set,
//! which holds the branch endpoints and any extra marked points.

mod hole;
mod spec;

pub use hole::Hole;
pub use spec::{parse_map, BranchSpec, MapPreset, MapSpec};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::real::{int, rat, to_f64, Rational};

const MAX_BRANCHES: usize = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    lo: Rational,
    hi: Rational,
    slope: Rational,
    intercept: Rational,
    lo_f: f64,
    hi_f: f64,
    slope_f: f64,
    intercept_f: f64,
}

impl Branch {
    /// Affine branch `x ↦ slope·x + intercept` on `[lo, hi)`; requires `|slope| > 1`.
    pub fn affine(lo: Rational, hi: Rational, slope: Rational, intercept: Rational) -> Result<Self> {
        if lo >= hi {
            return Err(Error::invalid(format!("empty branch domain [{lo}, {hi})")));
        }
        if slope.abs() <= Rational::one() {
            return Err(Error::invalid(format!(
                "branch on [{lo}, {hi}) has slope {slope}; uniform expansion needs |slope| > 1"
            )));
        }
        Ok(Self {
            lo_f: to_f64(&lo),
            hi_f: to_f64(&hi),
            slope_f: to_f64(&slope),
            intercept_f: to_f64(&intercept),
            lo,
            hi,
            slope,
            intercept,
        })
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn slope(&self) -> &Rational {
        &self.slope
    }

    pub fn intercept(&self) -> &Rational {
        &self.intercept
    }

    pub fn slope_f64(&self) -> f64 {
        self.slope_f
    }

    pub fn intercept_f64(&self) -> f64 {
        self.intercept_f
    }

    pub fn domain_f64(&self) -> (f64, f64) {
        (self.lo_f, self.hi_f)
    }

    pub fn apply(&self, x: &Rational) -> Rational {
        &self.slope * x + &self.intercept
    }

    pub fn apply_f64(&self, x: f64) -> f64 {
        self.slope_f * x + self.intercept_f
    }

    /// The unique `x` with `apply(x) = y` (not restricted to the domain).
    pub fn invert(&self, y: &Rational) -> Rational {
        (y - &self.intercept) / &self.slope
    }

    /// Closure of the image of the domain, as `(min, max)`.
    pub fn image(&self) -> (Rational, Rational) {
        let a = self.apply(&self.lo);
        let b = self.apply(&self.hi);
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Preimage inside this branch of the half-open interval `[y0, y1)`.
    pub fn preimage(&self, y0: &Rational, y1: &Rational) -> Option<(Rational, Rational)> {
        let (u, v) = (self.invert(y0), self.invert(y1));
        let (u, v) = if u <= v { (u, v) } else { (v, u) };
        let lo = u.max(self.lo.clone());
        let hi = v.min(self.hi.clone());
        (lo < hi).then_some((lo, hi))
    }

    fn contains_f64(&self, x: f64) -> bool {
        self.lo_f <= x && x < self.hi_f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMap {
    branches: Vec<Branch>,
    singular: Vec<Rational>,
}

impl IntervalMap {
    /// Validates that the branches tile `[0, 1]` in order and map into `[0, 1]`.
    pub fn new(branches: Vec<Branch>, marked: Vec<Rational>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::invalid("map needs at least one branch"));
        }
        if branches.len() > MAX_BRANCHES {
            return Err(Error::invalid(format!("more than {MAX_BRANCHES} branches")));
        }
        if !branches[0].lo.is_zero() {
            return Err(Error::invalid("first branch must start at 0"));
        }
        if !branches[branches.len() - 1].hi.is_one() {
            return Err(Error::invalid("last branch must end at 1"));
        }
        for w in branches.windows(2) {
            if w[0].hi != w[1].lo {
                return Err(Error::invalid(format!(
                    "branches must be contiguous: gap or overlap at {} / {}",
                    w[0].hi, w[1].lo
                )));
            }
        }
        let zero = Rational::zero();
        let one = Rational::one();
        for b in &branches {
            let (a, c) = b.image();
            if a < zero || c > one {
                return Err(Error::invalid(format!(
                    "branch on [{}, {}) maps outside [0, 1]",
                    b.lo, b.hi
                )));
            }
        }
        let mut singular: Vec<Rational> = branches
            .iter()
            .map(|b| b.lo.clone())
            .chain(std::iter::once(one.clone()))
            .collect();
        for m in marked {
            if m < zero || m > one {
                return Err(Error::invalid(format!("marked point {m} outside [0, 1]")));
            }
            singular.push(m);
        }
        singular.sort();
        singular.dedup();
        Ok(Self { branches, singular })
    }

    /// `x ↦ 2x mod 1`.
    pub fn doubling() -> Self {
        Self::times(2)
    }

    /// `x ↦ k·x mod 1` for an integer `k ≥ 2`.
    pub fn times(k: i64) -> Self {
        assert!(k >= 2, "times(k) needs k >= 2");
        let branches = (0..k)
            .map(|j| Branch::affine(rat(j, k), rat(j + 1, k), int(k), int(-j)).expect("valid branch"))
            .collect();
        Self::new(branches, Vec::new()).expect("valid preset")
    }

    /// Full tent map: `2x` on `[0, 1/2)`, `2 − 2x` on `[1/2, 1]`.
    pub fn tent() -> Self {
        let branches = vec![
            Branch::affine(int(0), rat(1, 2), int(2), int(0)).expect("valid branch"),
            Branch::affine(rat(1, 2), int(1), int(-2), int(2)).expect("valid branch"),
        ];
        Self::new(branches, Vec::new()).expect("valid preset")
    }

    /// Two-branch Markov map with partition `{[0, 2/3), [2/3, 1)}`:
    /// `3x/2` onto `[0, 1)` and `2x − 4/3` onto `[0, 2/3)`.
    /// Its invariant density is `9/8` on the first cell and `3/4` on the second.
    pub fn skew_markov() -> Self {
        let branches = vec![
            Branch::affine(int(0), rat(2, 3), rat(3, 2), int(0)).expect("valid branch"),
            Branch::affine(rat(2, 3), int(1), int(2), rat(-4, 3)).expect("valid branch"),
        ];
        Self::new(branches, Vec::new()).expect("valid preset")
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// Branch endpoints (including 0 and 1) plus marked points, sorted.
    pub fn singular_set(&self) -> &[Rational] {
        &self.singular
    }

    /// `inf |T'|`; its reciprocal bounds the contraction rate of `g`.
    pub fn min_expansion(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.slope_f.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every branch is `x ↦ a·x + b` with integer `a` and `b`.
    pub fn is_integer_affine(&self) -> bool {
        self.branches
            .iter()
            .all(|b| b.slope.is_integer() && b.intercept.is_integer())
    }

    pub fn branch_index(&self, x: f64) -> usize {
        self.branches
            .iter()
            .position(|b| b.contains_f64(x))
            .unwrap_or(if x < 0.0 { 0 } else { self.branches.len() - 1 })
    }

    pub fn branch_index_exact(&self, x: &Rational) -> usize {
        let idx = self.branches.partition_point(|b| &b.lo <= x);
        idx.saturating_sub(1).min(self.branches.len() - 1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let y = self.branches[self.branch_index(x)].apply_f64(x);
        y.clamp(0.0, 1.0)
    }

    pub fn eval_exact(&self, x: &Rational) -> Rational {
        self.branches[self.branch_index_exact(x)].apply(x)
    }

    pub fn slope_at(&self, x: &Rational) -> &Rational {
        &self.branches[self.branch_index_exact(x)].slope
    }

    pub fn orbit(&self, x: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n + 1);
        let mut cur = x;
        out.push(cur);
        for _ in 0..n {
            cur = self.eval(cur);
            out.push(cur);
        }
        out
    }

    pub fn orbit_exact(&self, x: &Rational, n: usize) -> Vec<Rational> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x.clone());
        for i in 0..n {
            let next = self.eval_exact(&out[i]);
            out.push(next);
        }
        out
    }

    /// Minimal `p ≤ k_max` with `|T^p x − x| < tol`.
    pub fn detect_period(&self, x: f64, k_max: usize, tol: f64) -> Option<usize> {
        let mut cur = x;
        for p in 1..=k_max {
            cur = self.eval(cur);
            if (cur - x).abs() < tol {
                return Some(p);
            }
        }
        None
    }

    /// Exact minimal period `p ≤ k_max`, for rational points.
    pub fn detect_period_exact(&self, x: &Rational, k_max: usize) -> Option<usize> {
        let mut cur = x.clone();
        for p in 1..=k_max {
            cur = self.eval_exact(&cur);
            if &cur == x {
                return Some(p);
            }
        }
        None
    }

    /// `T^{-1}(set)` as an interval union.
    pub fn preimage(&self, set: &IntervalSet) -> IntervalSet {
        let mut pieces = Vec::new();
        for b in &self.branches {
            let (img_lo, img_hi) = b.image();
            for (lo, hi) in set.parts() {
                if hi <= &img_lo || lo >= &img_hi {
                    continue;
                }
                if let Some(p) = b.preimage(lo, hi) {
                    pieces.push(p);
                }
            }
        }
        IntervalSet::from_intervals(pieces)
    }

    fn is_interior_singular(&self, x: &Rational) -> bool {
        !x.is_zero() && !x.is_one() && self.singular.binary_search(x).is_ok()
    }
}

/// One element `(x, k)` of the return set: `T^{k+1} x ∈ V` with no earlier visit.
#[derive(Debug, Clone, PartialEq)]
pub struct PiPair {
    pub x: Rational,
    pub k: usize,
    /// `1/|(T^{k+1})'(x)|`.
    pub weight: Rational,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PiSet {
    pub pairs: Vec<PiPair>,
    /// `|V| · (inf|T'|)^{-(k_max+2)}`: a bound on the weight of any return
    /// later than `k_max + 1` steps.
    pub omitted_weight_bound: f64,
}

/// Collects the first returns of each center to the center set within
/// `k_max + 1` steps.
pub fn pi_set(map: &IntervalMap, centers: &[Rational], k_max: usize) -> Result<PiSet> {
    let mut pairs = Vec::new();
    for v in centers {
        let mut x = v.clone();
        let mut derivative = Rational::one();
        for j in 1..=k_max + 1 {
            if map.is_interior_singular(&x) {
                return Err(Error::SingularOrbit {
                    point: v.to_string(),
                    singular: x.to_string(),
                    step: j - 1,
                });
            }
            derivative *= map.slope_at(&x).abs();
            x = map.eval_exact(&x);
            if centers.contains(&x) {
                pairs.push(PiPair {
                    x: v.clone(),
                    k: j - 1,
                    weight: derivative.recip(),
                });
                break;
            }
        }
    }
    let rate = map.min_expansion().recip();
    Ok(PiSet {
        pairs,
        omitted_weight_bound: centers.len() as f64 * rate.powi(k_max as i32 + 2),
    })
}

/// `θ = 1 − Σ weight` over the return set, clamped to `[0, 1]`.
pub fn theta_analytic(pi: &PiSet) -> f64 {
    let total = pi
        .pairs
        .iter()
        .fold(Rational::zero(), |acc, p| acc + &p.weight);
    (1.0 - to_f64(&total)).clamp(0.0, 1.0)
}
