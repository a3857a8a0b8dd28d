//! Extreme value laws for distance observables via the hitting-time
//! equivalence `{max(X₀, …, X_{n−1}) ≤ z} = {τ ≥ n}` for the hole `{X > z}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::{Hole, IntervalMap};
use crate::mc::{binomial_se, InitLaw, Sampler};
use crate::real::{from_f64, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `X = −|x − z*|`, `z_max = 0`.
    #[default]
    NegDistance,
    /// `X = −ln|x − z*|`, `z_max = +∞`.
    NegLogDistance,
}

/// `X(x) = h(|x − z*|)` with `h` strictly decreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    center: Rational,
    center_f: f64,
    transform: Transform,
}

impl Observable {
    pub fn new(center: Rational, transform: Transform) -> Result<Self> {
        let c = to_f64(&center);
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::invalid("observable center must lie in [0, 1]"));
        }
        Ok(Self {
            center_f: c,
            center,
            transform,
        })
    }

    pub fn center(&self) -> &Rational {
        &self.center
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn z_max(&self) -> f64 {
        match self.transform {
            Transform::NegDistance => 0.0,
            Transform::NegLogDistance => f64::INFINITY,
        }
    }

    pub fn h(&self, d: f64) -> f64 {
        match self.transform {
            Transform::NegDistance => -d,
            Transform::NegLogDistance => -d.ln(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.h((x - self.center_f).abs())
    }

    /// Radius `r` with `{X > z} = {|x − z*| < r}`.
    pub fn radius_for(&self, z: f64) -> f64 {
        match self.transform {
            Transform::NegDistance => (-z).max(0.0),
            Transform::NegLogDistance => (-z).exp(),
        }
    }

    pub fn level_for_radius(&self, r: f64) -> f64 {
        self.h(r)
    }
}

/// Piecewise constant density cells `(lo, hi, value)` normalized to mass 1.
fn ball_mass(cells: &[(f64, f64, f64)], center: f64, r: f64) -> f64 {
    let (a, b) = (center - r, center + r);
    cells
        .iter()
        .map(|&(lo, hi, v)| (hi.min(b) - lo.max(a)).max(0.0) * v)
        .sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSequence {
    pub t: f64,
    pub n: Vec<usize>,
    pub z: Vec<f64>,
    pub radii: Vec<f64>,
    /// `n · μ₀{X > z_n}` as achieved.
    pub scaled_mass: Vec<f64>,
}

const LEVEL_TOL: f64 = 1e-14;

/// Solves `n μ₀{X > z_n} = t` for each `n` by bisection on the radius.
pub fn levels_for(t: f64, n_list: &[usize], obs: &Observable, phi0_cells: &[(f64, f64, f64)]) -> Result<LevelSequence> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("t must be positive"));
    }
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::invalid("n values must be positive and strictly increasing"));
    }
    let total: f64 = phi0_cells.iter().map(|&(lo, hi, v)| (hi - lo) * v).sum();
    if !(total > 0.0) {
        return Err(Error::invalid("density has zero mass"));
    }
    let cells: Vec<(f64, f64, f64)> = phi0_cells.iter().map(|&(lo, hi, v)| (lo, hi, v / total)).collect();
    let c = obs.center_f;
    let r_full = c.max(1.0 - c);
    let mut seq = LevelSequence {
        t,
        n: n_list.to_vec(),
        z: Vec::new(),
        radii: Vec::new(),
        scaled_mass: Vec::new(),
    };
    for &n in n_list {
        let target = t / n as f64;
        if target > ball_mass(&cells, c, r_full) + LEVEL_TOL {
            return Err(Error::invalid(format!("t = {t} too large for n = {n}: the level set cannot carry mass {target}")));
        }
        let (mut lo, mut hi) = (0.0, r_full);
        let mut r = hi;
        for _ in 0..200 {
            r = 0.5 * (lo + hi);
            let m = ball_mass(&cells, c, r);
            if (m - target).abs() <= LEVEL_TOL {
                break;
            }
            if m < target {
                lo = r;
            } else {
                hi = r;
            }
        }
        seq.z.push(obs.level_for_radius(r));
        seq.radii.push(r);
        seq.scaled_mass.push(n as f64 * ball_mass(&cells, c, r));
    }
    Ok(seq)
}

/// `exp(−tθ)`.
pub fn max_law_predicted(t: f64, theta: f64) -> f64 {
    (-t * theta).exp()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvlPoint {
    pub n: usize,
    pub z: f64,
    pub empirical: f64,
    pub stderr: f64,
}

impl EvlPoint {
    /// `θ̂ = −ln(p)/t` with its delta-method standard error.
    pub fn theta_hat(&self, t: f64) -> (f64, f64) {
        (-self.empirical.ln() / t, self.stderr / (self.empirical * t))
    }
}

/// Monte Carlo estimate of `ν₀{max(X₀, …, X_{n−1}) ≤ z_n}` along the level
/// sequence. Orbits start from Lebesgue measure unless `init` says otherwise.
pub fn max_law_empirical(
    map: &IntervalMap,
    obs: &Observable,
    levels: &LevelSequence,
    samples: u64,
    seed: u64,
    init: InitLaw,
) -> Result<Vec<EvlPoint>> {
    if samples == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    let sampler = Sampler::new(map, init)?;
    let counts = sampler.min_distance_counts(&[obs.center_f], &levels.n, &levels.radii, samples, seed)?;
    Ok(counts
        .iter()
        .zip(&levels.n)
        .zip(&levels.z)
        .map(|((&c, &n), &z)| {
            let p = c as f64 / samples as f64;
            EvlPoint {
                n,
                z,
                empirical: p,
                stderr: binomial_se(p, samples),
            }
        })
        .collect())
}

/// The hole `{X > z}` as an interval set.
pub fn level_hole(obs: &Observable, z: f64) -> Result<Hole> {
    let r = obs.radius_for(z);
    if r <= 0.0 {
        return Ok(Hole::empty());
    }
    Hole::around(std::slice::from_ref(&obs.center), &from_f64(r)?)
}

/// Whether `max(X(x), …, X(T^{n−1}x)) > z` along the `f64` orbit.
pub fn exceeds(map: &IntervalMap, obs: &Observable, x0: f64, n: usize, z: f64) -> bool {
    map.orbit(x0, n).iter().any(|&x| obs.eval(x) > z)
}

/// Whether the `f64` orbit enters the hole before time `n`.
pub fn hits(map: &IntervalMap, hole: &Hole, x0: f64, n: usize) -> bool {
    map.orbit(x0, n).iter().any(|&x| hole.contains_f64(x))
}

pub const EVL_CSV_HEADER: &str = "n,z_n,empirical,predicted,stderr";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::rat;

    fn unit() -> Vec<(f64, f64, f64)> {
        vec![(0.0, 1.0, 1.0)]
    }

    #[test]
    fn uniform_levels() {
        let obs = Observable::new(rat(1, 3), Transform::NegDistance).unwrap();
        let l = levels_for(1.0, &[1024], &obs, &unit()).unwrap();
        assert!((2.0 * l.radii[0] - 1.0 / 1024.0).abs() < 1e-14);
        let l2 = levels_for(2.0, &[1024], &obs, &unit()).unwrap();
        assert!((l2.radii[0] - 2.0 * l.radii[0]).abs() < 1e-14);
        assert!(levels_for(5.0, &[2], &obs, &unit()).is_err());
        assert!(levels_for(1.0, &[8, 4], &obs, &unit()).is_err());
    }

    #[test]
    fn log_transform_levels() {
        let obs = Observable::new(rat(1, 3), Transform::NegLogDistance).unwrap();
        let l = levels_for(1.0, &[100], &obs, &unit()).unwrap();
        assert!((obs.radius_for(l.z[0]) - l.radii[0]).abs() < 1e-15);
        assert!((l.scaled_mass[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn predicted_values() {
        assert_eq!(max_law_predicted(1.0, 1.0), (-1.0f64).exp());
        assert_eq!(max_law_predicted(2.0, 0.75), (-1.5f64).exp());
        assert_eq!(max_law_predicted(3.0, 0.0), 1.0);
    }

    #[test]
    fn empty_level_set_is_certain() {
        let obs = Observable::new(rat(1, 3), Transform::NegDistance).unwrap();
        let levels = LevelSequence {
            t: 1.0,
            n: vec![10],
            z: vec![0.0],
            radii: vec![0.0],
            scaled_mass: vec![0.0],
        };
        let p = max_law_empirical(&IntervalMap::doubling(), &obs, &levels, 1000, 1, InitLaw::Uniform).unwrap();
        assert_eq!(p[0].empirical, 1.0);
    }
}
