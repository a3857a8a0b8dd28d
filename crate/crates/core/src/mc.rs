//! Monte Carlo orbit sampling.
//!
//! Maps whose branches all have integer slopes and intercepts are iterated
//! exactly on a 64-bit fixed-point lift: a state `X` stands for the cell
//! `[X, X+1)·2⁻⁶⁴`, and each step replaces the bits the expansion pushes out
//! with fresh random bits, so the orbit stays distributed like a true orbit
//! of a `ν₀`-uniform point. Other maps fall back to plain `f64` iteration.
//!
//! Samples are split into fixed-size chunks; chunk `i` draws from the ChaCha
//! stream `i` of the run's seed, and results merge as sums of counts, so the
//! output does not depend on the number of worker threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::IntervalMap;
use crate::real::to_f64;

pub const CHUNK: u64 = 1 << 14;

const TWO64: f64 = 18_446_744_073_709_551_616.0;

/// Initial distribution for sampled orbits.
#[derive(Debug, Clone)]
pub enum InitLaw {
    /// Lebesgue measure.
    Uniform,
    /// Piecewise constant density on cells `(lo, hi, value)`, sampled by
    /// inverse CDF.
    Cells(Vec<(f64, f64, f64)>),
}

#[derive(Debug, Clone)]
struct CellTable {
    lo: Vec<f64>,
    len: Vec<f64>,
    cdf: Vec<f64>,
}

impl CellTable {
    fn new(cells: &[(f64, f64, f64)]) -> Result<Self> {
        let mut lo = Vec::new();
        let mut len = Vec::new();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for &(a, b, v) in cells {
            if !(b > a) || !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid("density cells must be nonempty with finite nonnegative values"));
            }
            acc += (b - a) * v;
            lo.push(a);
            len.push(b - a);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(Error::invalid("initial density has zero mass"));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { lo, len, cdf })
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        self.lo[i] + self.len[i] * rng.random::<f64>()
    }
}

#[derive(Debug, Clone)]
enum Init {
    Uniform,
    Cells(CellTable),
}

/// Buffered random bits.
struct Bits {
    buf: u64,
    left: u32,
}

impl Bits {
    fn new() -> Self {
        Self { buf: 0, left: 0 }
    }

    #[inline(always)]
    fn take(&mut self, rng: &mut ChaCha8Rng, n: u32) -> u64 {
        if self.left < n {
            self.buf = rng.next_u64();
            self.left = 64;
        }
        let v = self.buf & ((1u64 << n) - 1);
        self.buf >>= n;
        self.left -= n;
        v
    }
}

#[derive(Debug, Clone)]
struct LiftBranch {
    /// Branch starts at state `start`.
    start: u64,
    slope: i64,
    /// `log₂|slope|` when `|slope|` is a power of two.
    bits: Option<u32>,
}

#[derive(Debug, Clone)]
enum Kernel {
    /// `x ↦ 2^s x mod 1`.
    Shift(u32),
    Lift(Vec<LiftBranch>),
    Float(IntervalMap),
}

/// Orbit generator for one map and initial law.
#[derive(Debug, Clone)]
pub struct Sampler {
    kernel: Kernel,
    init: Init,
}

fn to_state(x: f64) -> u64 {
    if x <= 0.0 {
        0
    } else if x >= 1.0 {
        u64::MAX
    } else {
        (x * TWO64) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Shift,
    FixedPointLift,
    Float,
}

impl Sampler {
    pub fn new(map: &IntervalMap, init: InitLaw) -> Result<Self> {
        let init = match init {
            InitLaw::Uniform => Init::Uniform,
            InitLaw::Cells(c) => Init::Cells(CellTable::new(&c)?),
        };
        Ok(Self {
            kernel: kernel_for(map),
            init,
        })
    }

    /// Forces `f64` iteration, for cross-checks.
    pub fn float(map: &IntervalMap, init: InitLaw) -> Result<Self> {
        let mut s = Self::new(map, init)?;
        s.kernel = Kernel::Float(map.clone());
        Ok(s)
    }

    pub fn engine(&self) -> EngineKind {
        match self.kernel {
            Kernel::Shift(_) => EngineKind::Shift,
            Kernel::Lift(_) => EngineKind::FixedPointLift,
            Kernel::Float(_) => EngineKind::Float,
        }
    }
}

fn kernel_for(map: &IntervalMap) -> Kernel {
    if !map.is_integer_affine() {
        return Kernel::Float(map.clone());
    }
    let branches: Vec<LiftBranch> = map
        .branches()
        .iter()
        .map(|b| {
            let slope = b.slope().to_integer();
            let slope = i64::try_from(&slope).unwrap_or(i64::MAX);
            let m = slope.unsigned_abs();
            LiftBranch {
                start: to_state(to_f64(b.lo())),
                slope,
                bits: m.is_power_of_two().then(|| m.trailing_zeros()),
            }
        })
        .collect();
    if branches.iter().all(|b| b.slope == branches[0].slope && b.slope > 0) {
        if let Some(s) = branches[0].bits {
            return Kernel::Shift(s);
        }
    }
    Kernel::Lift(branches)
}

/// Targets in both coordinate systems.
#[derive(Debug, Clone)]
struct Target {
    /// Half-open intervals as `(start, width)` in state units.
    holes_u: Vec<(u64, u64)>,
    holes_f: Vec<(f64, f64)>,
    centers_u: Vec<u64>,
    centers_f: Vec<f64>,
}

impl Target {
    fn holes(intervals: &[(f64, f64)]) -> Self {
        let holes_u = intervals
            .iter()
            .map(|&(a, b)| {
                let s = to_state(a);
                let e = if b >= 1.0 { u64::MAX } else { to_state(b) };
                (s, e - s)
            })
            .collect();
        Self {
            holes_u,
            holes_f: intervals.to_vec(),
            centers_u: Vec::new(),
            centers_f: Vec::new(),
        }
    }

    fn centers(centers: &[f64]) -> Self {
        Self {
            holes_u: Vec::new(),
            holes_f: Vec::new(),
            centers_u: centers.iter().map(|&c| to_state(c)).collect(),
            centers_f: centers.to_vec(),
        }
    }
}

/// One orbit representation: `u64` lift or `f64`.
trait Orbit: Copy {
    /// Distances in the representation's own units.
    type Dist: Copy + PartialOrd;
    const FAR: Self::Dist;
    fn in_hole(self, t: &Target) -> bool;
    fn dist(self, t: &Target) -> Self::Dist;
    fn radius(r: f64) -> Self::Dist;
}

impl Orbit for u64 {
    type Dist = u64;
    const FAR: u64 = u64::MAX;

    fn radius(r: f64) -> u64 {
        to_state(r)
    }

    #[inline(always)]
    fn in_hole(self, t: &Target) -> bool {
        t.holes_u.iter().any(|&(s, w)| self.wrapping_sub(s) < w)
    }

    #[inline(always)]
    fn dist(self, t: &Target) -> u64 {
        t.centers_u.iter().map(|&c| self.abs_diff(c)).min().unwrap_or(u64::MAX)
    }
}

impl Orbit for f64 {
    type Dist = f64;
    const FAR: f64 = f64::INFINITY;

    fn radius(r: f64) -> f64 {
        r
    }

    #[inline(always)]
    fn in_hole(self, t: &Target) -> bool {
        t.holes_f.iter().any(|&(a, b)| self >= a && self < b)
    }

    #[inline(always)]
    fn dist(self, t: &Target) -> f64 {
        t.centers_f
            .iter()
            .map(|&c| (self - c).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-sample work: sees each state `T^i x` in turn and returns `false` to
/// stop early.
trait Visit<S: Orbit> {
    fn start(&mut self);
    fn visit(&mut self, i: usize, s: S) -> bool;
    fn finish(&mut self, counts: &mut [u64]);
}

fn run_orbit_lift<V: Visit<u64>>(k: &Kernel, x0: u64, n: usize, rng: &mut ChaCha8Rng, bits: &mut Bits, v: &mut V) {
    let mut x = x0;
    v.start();
    match k {
        Kernel::Shift(s) => {
            let s = *s;
            let mask = (1u64 << s) - 1;
            let per = (64 / s) as usize;
            let mut i = 0;
            while i < n {
                let mut buf = rng.next_u64();
                for _ in 0..per.min(n - i) {
                    if !v.visit(i, x) {
                        return;
                    }
                    x = (x << s) | (buf & mask);
                    buf >>= s;
                    i += 1;
                }
            }
        }
        Kernel::Lift(branches) => {
            for i in 0..n {
                if !v.visit(i, x) {
                    return;
                }
                let idx = branches.partition_point(|b| b.start <= x).saturating_sub(1);
                let b = &branches[idx];
                let u = match b.bits {
                    Some(s) => bits.take(rng, s),
                    None => rng.random_range(0..b.slope.unsigned_abs()),
                };
                let k = b.slope as u64;
                let shift = if b.slope < 0 { k } else { 0 };
                x = k.wrapping_mul(x).wrapping_add(shift).wrapping_add(u);
            }
        }
        Kernel::Float(_) => unreachable!(),
    }
}

fn run_orbit_float<V: Visit<f64>>(map: &IntervalMap, x0: f64, n: usize, v: &mut V) {
    let mut x = x0;
    v.start();
    for i in 0..n {
        if !v.visit(i, x) {
            return;
        }
        x = map.eval(x);
    }
}

impl Sampler {
    fn init_state(&self, rng: &mut ChaCha8Rng) -> (u64, f64) {
        match &self.init {
            Init::Uniform => {
                let u = rng.next_u64();
                (u, u as f64 / TWO64)
            }
            Init::Cells(t) => {
                let x = t.sample(rng);
                let low = rng.next_u64() & 0x7ff;
                let hi = ((x * (1u64 << 53) as f64) as u64).min((1u64 << 53) - 1);
                ((hi << 11) | low, x)
            }
        }
    }

    /// Runs `samples` orbits of length `n` in chunks and sums the per-chunk
    /// counts of length `width`.
    fn run<VL, VF>(
        &self,
        samples: u64,
        seed: u64,
        n: usize,
        width: usize,
        make_l: impl Fn() -> VL + Sync,
        make_f: impl Fn() -> VF + Sync,
    ) -> Vec<u64>
    where
        VL: Visit<u64>,
        VF: Visit<f64>,
    {
        let chunks = samples.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c);
                let count = CHUNK.min(samples - c * CHUNK);
                let mut counts = vec![0u64; width];
                let mut bits = Bits::new();
                match &self.kernel {
                    Kernel::Float(map) => {
                        let mut v = make_f();
                        for _ in 0..count {
                            let (_, x) = self.init_state(&mut rng);
                            run_orbit_float(map, x, n, &mut v);
                            v.finish(&mut counts);
                        }
                    }
                    k => {
                        let mut v = make_l();
                        for _ in 0..count {
                            let (x, _) = self.init_state(&mut rng);
                            run_orbit_lift(k, x, n, &mut rng, &mut bits, &mut v);
                            v.finish(&mut counts);
                        }
                    }
                }
                counts
            })
            .reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            )
    }

    /// Histogram of the first hitting time `τ = inf{i ≥ 0 : Tⁱx ∈ A}` over
    /// `i < n_max`; the last slot counts orbits with `τ ≥ n_max`.
    pub fn hitting_histogram(&self, hole: &[(f64, f64)], n_max: usize, samples: u64, seed: u64) -> Vec<u64> {
        let target = Target::holes(hole);
        let make_l = || HitVisit::<u64>::new(target.clone(), n_max);
        let make_f = || HitVisit::<f64>::new(target.clone(), n_max);
        self.run(samples, seed, n_max, n_max + 1, make_l, make_f)
    }

    /// For each checkpoint `n_j` (increasing) with radius `r_j`, the number of
    /// orbits whose distance to the centers stays `≥ r_j` for all `i < n_j`.
    pub fn min_distance_counts(
        &self,
        centers: &[f64],
        checkpoints: &[usize],
        radii: &[f64],
        samples: u64,
        seed: u64,
    ) -> Result<Vec<u64>> {
        if checkpoints.len() != radii.len() || checkpoints.is_empty() {
            return Err(Error::invalid("one radius per checkpoint is required"));
        }
        if checkpoints.len() > 64 {
            return Err(Error::invalid("at most 64 checkpoints per run"));
        }
        if checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("checkpoints must be strictly increasing"));
        }
        let target = Target::centers(centers);
        let n = *checkpoints.last().unwrap_or(&0);
        let cps = checkpoints.to_vec();
        let rs = radii.to_vec();
        let make_l = || MinDistVisit::<u64>::new(target.clone(), cps.clone(), rs.clone());
        let make_f = || MinDistVisit::<f64>::new(target.clone(), cps.clone(), rs.clone());
        Ok(self.run(samples, seed, n, checkpoints.len(), make_l, make_f))
    }
}

struct HitVisit<S> {
    target: Target,
    n_max: usize,
    tau: usize,
    _s: std::marker::PhantomData<S>,
}

impl<S> HitVisit<S> {
    fn new(target: Target, n_max: usize) -> Self {
        Self {
            target,
            n_max,
            tau: n_max,
            _s: std::marker::PhantomData,
        }
    }
}

impl<S: Orbit> Visit<S> for HitVisit<S> {
    fn start(&mut self) {
        self.tau = self.n_max;
    }

    #[inline(always)]
    fn visit(&mut self, i: usize, s: S) -> bool {
        if s.in_hole(&self.target) {
            self.tau = i;
            false
        } else {
            true
        }
    }

    fn finish(&mut self, counts: &mut [u64]) {
        counts[self.tau] += 1;
    }
}

struct MinDistVisit<S: Orbit> {
    target: Target,
    checkpoints: Vec<usize>,
    radii: Vec<S::Dist>,
    smallest: S::Dist,
    min: S::Dist,
    next: usize,
    /// `checkpoints[next]`, or `usize::MAX` once all are closed.
    next_at: usize,
    passed: u64,
}

impl<S: Orbit> MinDistVisit<S> {
    fn new(target: Target, checkpoints: Vec<usize>, radii: Vec<f64>) -> Self {
        let smallest = S::radius(radii.iter().cloned().fold(f64::INFINITY, f64::min));
        Self {
            target,
            checkpoints,
            radii: radii.into_iter().map(S::radius).collect(),
            smallest,
            min: S::FAR,
            next: 0,
            next_at: 0,
            passed: 0,
        }
    }

    fn close_checkpoints(&mut self, upto: usize) {
        while self.next < self.checkpoints.len() && self.checkpoints[self.next] <= upto {
            if self.min >= self.radii[self.next] {
                self.passed |= 1 << self.next;
            }
            self.next += 1;
        }
        self.next_at = self.checkpoints.get(self.next).copied().unwrap_or(usize::MAX);
    }
}

impl<S: Orbit> Visit<S> for MinDistVisit<S> {
    fn start(&mut self) {
        self.min = S::FAR;
        self.next = 0;
        self.next_at = self.checkpoints[0];
        self.passed = 0;
    }

    #[inline(always)]
    fn visit(&mut self, i: usize, s: S) -> bool {
        if i == self.next_at {
            self.close_checkpoints(i);
        }
        let d = s.dist(&self.target);
        if d < self.min {
            self.min = d;
        }
        self.min >= self.smallest
    }

    fn finish(&mut self, counts: &mut [u64]) {
        self.close_checkpoints(usize::MAX);
        for (j, c) in counts.iter_mut().enumerate() {
            if self.passed & (1 << j) != 0 {
                *c += 1;
            }
        }
    }
}

/// `s(n) = #{τ ≥ n}/samples` for `n = 0..=n_max` from a hitting histogram.
pub fn survival_from_histogram(hist: &[u64], samples: u64) -> Vec<f64> {
    let mut out = vec![0.0; hist.len()];
    let mut tail = 0u64;
    for n in (0..hist.len()).rev() {
        tail += hist[n];
        out[n] = tail as f64 / samples as f64;
    }
    out
}

/// Binomial standard error `√(p(1−p)/samples)`.
pub fn binomial_se(p: f64, samples: u64) -> f64 {
    (p * (1.0 - p) / samples as f64).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn engine_selection() {
        let u = InitLaw::Uniform;
        assert_eq!(Sampler::new(&IntervalMap::doubling(), u.clone()).unwrap().engine(), EngineKind::Shift);
        assert_eq!(Sampler::new(&IntervalMap::tent(), u.clone()).unwrap().engine(), EngineKind::FixedPointLift);
        assert_eq!(Sampler::new(&IntervalMap::times(3), u.clone()).unwrap().engine(), EngineKind::FixedPointLift);
        assert_eq!(Sampler::new(&IntervalMap::skew_markov(), u).unwrap().engine(), EngineKind::Float);
    }

    #[test]
    fn half_hole_survival() {
        let s = Sampler::new(&IntervalMap::doubling(), InitLaw::Uniform).unwrap();
        let samples = 200_000;
        let h = s.hitting_histogram(&[(0.0, 0.5)], 8, samples, 7);
        let surv = survival_from_histogram(&h, samples);
        assert_eq!(surv[0], 1.0);
        for n in 1..=8 {
            let p = 0.5f64.powi(n as i32);
            assert!((surv[n] - p).abs() < 4.0 * binomial_se(p, samples) + 1e-12);
        }
        assert_eq!(h, s.hitting_histogram(&[(0.0, 0.5)], 8, samples, 7));
    }

    #[test]
    fn lift_and_float_agree_early() {
        let tent = IntervalMap::tent();
        let samples = 100_000;
        let a = Sampler::new(&tent, InitLaw::Uniform).unwrap();
        let b = Sampler::float(&tent, InitLaw::Uniform).unwrap();
        let ha = survival_from_histogram(&a.hitting_histogram(&[(0.25, 0.5)], 10, samples, 1), samples);
        let hb = survival_from_histogram(&b.hitting_histogram(&[(0.25, 0.5)], 10, samples, 1), samples);
        for (x, y) in ha.iter().zip(&hb) {
            assert!((x - y).abs() < 8.0 * binomial_se(*x, samples) + 1e-9);
        }
    }

    #[test]
    fn weighted_initial_law() {
        let cells = vec![(0.0, 0.5, 3.0), (0.5, 1.0, 1.0)];
        let s = Sampler::new(&IntervalMap::doubling(), InitLaw::Cells(cells)).unwrap();
        let samples = 100_000;
        let h = s.hitting_histogram(&[(0.0, 0.5)], 1, samples, 3);
        let p = h[0] as f64 / samples as f64;
        assert!((p - 0.75).abs() < 4.0 * binomial_se(0.75, samples));
        assert!(Sampler::new(&IntervalMap::doubling(), InitLaw::Cells(vec![(0.0, 1.0, 0.0)])).is_err());
    }

    #[test]
    fn min_distance_matches_hitting() {
        let s = Sampler::new(&IntervalMap::doubling(), InitLaw::Uniform).unwrap();
        let samples = 50_000;
        let r = 1.0 / 64.0;
        let c = 1.0 / 3.0;
        let md = s.min_distance_counts(&[c], &[10, 40], &[r, r], samples, 11).unwrap();
        let h = s.hitting_histogram(&[(c - r, c + r)], 40, samples, 11);
        let surv: Vec<u64> = [10usize, 40].iter().map(|&n| h[n..].iter().sum()).collect();
        // Same streams, same orbits up to boundary ties.
        for (a, b) in md.iter().zip(&surv) {
            assert!(a.abs_diff(*b) <= 2, "{a} vs {b}");
        }
    }
}
