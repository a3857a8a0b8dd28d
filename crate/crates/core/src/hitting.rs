//! Survival curves `s(n) = measure{τ_ε ≥ n}` and the exponential law for the
//! first hitting time.

use log::warn;
use num_traits::Zero;
use serde::Serialize;

use crate::density::StepDensity;
use crate::error::{Error, Result};
use crate::interval::IntervalSet;
use crate::maps::{Hole, IntervalMap};
use crate::mc::{binomial_se, survival_from_histogram, InitLaw, Sampler};
use crate::rare_events::{q_k_series, select_n, theta_truncated, MethodChoice};
use crate::real::to_f64;
use crate::system::OpenSystem;
use crate::transfer::{SpectralTriple, TransferMatrix};

/// Default cap on the number of intervals of the exact surviving set.
pub const DEFAULT_INTERVAL_CAP: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Nu0,
    Mu0,
}

#[derive(Debug, Clone, Serialize)]
pub struct SurvivalCurve {
    pub measure_kind: MeasureKind,
    /// `s(0), …, s(n_max)`.
    pub values: Vec<f64>,
    pub epsilon: Option<f64>,
    /// Set when the exact computation stopped early; `values` then ends at
    /// this index.
    pub truncated_at: Option<usize>,
    /// Standard errors for sampled curves.
    pub stderr: Option<Vec<f64>>,
}

impl SurvivalCurve {
    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn at(&self, n: usize) -> Option<f64> {
        self.values.get(n).copied()
    }
}

/// Exact survival by pulling back the hole complement in rational arithmetic.
/// `phi0` is required for [`MeasureKind::Mu0`].
pub fn survival_exact(
    map: &IntervalMap,
    hole: &Hole,
    n_max: usize,
    kind: MeasureKind,
    phi0: Option<&StepDensity>,
    cap: usize,
) -> Result<SurvivalCurve> {
    let weight = match kind {
        MeasureKind::Nu0 => StepDensity::uniform(),
        MeasureKind::Mu0 => phi0
            .cloned()
            .ok_or_else(|| Error::invalid("the mu0 curve needs the invariant density"))?,
    };
    let total = weight.integral();
    if total.is_zero() {
        return Err(Error::invalid("reference density has zero mass"));
    }
    let outside = hole.intervals().complement();
    let mut surviving = IntervalSet::unit();
    let mut values = Vec::with_capacity(n_max + 1);
    let mut truncated_at = None;
    for n in 0..=n_max {
        values.push(to_f64(&(weight.integral_over(&surviving) / &total)));
        if n == n_max {
            break;
        }
        surviving = outside.intersect(&map.preimage(&surviving));
        if surviving.len() > cap {
            truncated_at = Some(n);
            warn!("exact survival set exceeds {cap} intervals after {} steps", n + 1);
            break;
        }
    }
    Ok(SurvivalCurve {
        measure_kind: kind,
        values,
        epsilon: hole.radius().map(to_f64),
        truncated_at,
        stderr: None,
    })
}

/// `s(n) = ν₀(M_εⁿ φ)` by repeated products.
pub fn survival_operator(m_eps: &TransferMatrix, init: &[f64], n_max: usize, kind: MeasureKind) -> Result<SurvivalCurve> {
    if init.len() != m_eps.dim() {
        return Err(Error::invalid("initial density does not match the grid"));
    }
    let grid = m_eps.grid();
    let mass = grid.pairing(init);
    if !(mass > 0.0) {
        return Err(Error::invalid("initial density has zero mass"));
    }
    let mut f: Vec<f64> = init.iter().map(|v| v / mass).collect();
    let mut next = vec![0.0; f.len()];
    let mut values = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        values.push(grid.pairing(&f));
        if n < n_max {
            m_eps.apply_into(&f, &mut next);
            std::mem::swap(&mut f, &mut next);
        }
    }
    Ok(SurvivalCurve {
        measure_kind: kind,
        values,
        epsilon: m_eps.hole().and_then(|h| h.radius()).map(to_f64),
        truncated_at: None,
        stderr: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub band: f64,
    pub floor: f64,
}

impl SpectralEstimate {
    pub fn contains(&self, s: f64) -> bool {
        (s - self.value).abs() <= self.band + self.floor
    }
}

/// `λⁿ ν_ε(φ)` with the band `C λⁿ (1 − gap)ⁿ` and the round-off floor.
pub fn survival_spectral(triple: &SpectralTriple, nu_phi: f64, n: usize, c: f64) -> SpectralEstimate {
    let ln = triple.lambda.powi(n as i32);
    SpectralEstimate {
        value: ln * nu_phi,
        band: c * ln * (1.0 - triple.gap).max(0.0).powi(n as i32),
        floor: noise_floor(triple, n),
    }
}

/// Accuracy of `λⁿ ν_ε(φ)` in floating point: the eigenvalue is known to about
/// the solver residual, and that error compounds linearly in `n`.
pub fn noise_floor(triple: &SpectralTriple, n: usize) -> f64 {
    if triple.lambda <= 0.0 {
        return 0.0;
    }
    let rho = triple.residual.max(triple.residual_left).max(16.0 * f64::EPSILON);
    triple.lambda.powi(n as i32) * (n as f64 + 1.0) * rho / triple.lambda
}

/// Smallest `C` with `|s(n) − λⁿν_ε(φ)| ≤ C λⁿ (1 − gap)ⁿ` on `range`, with
/// the round-off floor subtracted first.
pub fn fit_band_constant(curve: &SurvivalCurve, triple: &SpectralTriple, nu_phi: f64, range: std::ops::Range<usize>) -> f64 {
    range
        .filter_map(|n| curve.at(n).map(|s| (n, s)))
        .map(|(n, s)| {
            let est = survival_spectral(triple, nu_phi, n, 1.0);
            if est.band > 0.0 {
                ((s - est.value).abs() - est.floor).max(0.0) / est.band
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// `ξ_ε = θ_{N,ε} + κ_N` with a fitted `κ_N`.
pub fn xi_epsilon(theta_n_eps: f64, kappa_fit: f64) -> f64 {
    theta_n_eps + kappa_fit
}

/// `δ_ε = min_N (N η̂ + κ̂_N)` with `κ̂_N = (1 − gap)^N / gap`. Returns the
/// minimum and its minimizer.
pub fn delta_epsilon(eta_hat: f64, gap: f64) -> (f64, usize) {
    if !(gap > 0.0) {
        return (f64::INFINITY, 1);
    }
    let kappa = |n: usize| (1.0 - gap).max(0.0).powi(n as i32) / gap;
    let mut best = (eta_hat + kappa(1), 1);
    let mut n = 2;
    while n < 1_000_000 {
        let v = n as f64 * eta_hat + kappa(n);
        if v < best.0 {
            best = (v, n);
        } else if n as f64 * eta_hat > best.0 {
            break;
        }
        n += 1;
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorPoint {
    pub t: f64,
    pub n: usize,
    pub survival: f64,
    pub error: f64,
    /// `(t ∨ 1) e^{−t} δ_ε`.
    pub bound_shape: f64,
    /// `n` lies in the regime where only the trivial estimate applies.
    pub small_n: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub xi_eps: f64,
    pub delta_eps: f64,
    /// `Δ_ε = μ₀(A_ε)`.
    pub mass: f64,
    pub error_curve: Vec<ErrorPoint>,
    /// `max_t error / ((t ∨ 1) e^{−t} δ_ε)`.
    pub c_hat: f64,
    pub omitted: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct ScalingInputs {
    pub xi: f64,
    pub mass: f64,
    pub delta_eps: f64,
    /// Curves at `n` up to this value are flagged as small-`n`.
    pub small_n: usize,
}

/// Compares `s(⌊t/(ξΔ)⌋)` with `e^{−t}` over `t_grid`.
pub fn exp_error_curve(curve: &SurvivalCurve, inputs: ScalingInputs, t_grid: &[f64]) -> ScalingReport {
    let mut points = Vec::new();
    let mut omitted = Vec::new();
    let mut c_hat: f64 = 0.0;
    for &t in t_grid {
        let n = (t / (inputs.xi * inputs.mass)).floor();
        let s = if n.is_finite() && n >= 0.0 { curve.at(n as usize) } else { None };
        let Some(s) = s else {
            warn!("t = {t} lies beyond the curve horizon {}", curve.n_max());
            omitted.push(t);
            continue;
        };
        let n = n as usize;
        let error = (s - (-t).exp()).abs();
        let bound_shape = t.max(1.0) * (-t).exp() * inputs.delta_eps;
        if bound_shape > 0.0 {
            c_hat = c_hat.max(error / bound_shape);
        }
        points.push(ErrorPoint {
            t,
            n,
            survival: s,
            error,
            bound_shape,
            small_n: n <= inputs.small_n,
        });
    }
    ScalingReport {
        xi_eps: inputs.xi,
        delta_eps: inputs.delta_eps,
        mass: inputs.mass,
        error_curve: points,
        c_hat,
        omitted,
    }
}

/// Scaling inputs derived from an open system: `N(ε)` from `η̂` and the gap,
/// `ξ_ε = θ_{N(ε),ε}` and `δ_ε`.
pub fn scaling_inputs(sys: &OpenSystem, kappa_fit: f64) -> Result<ScalingInputs> {
    let eta = sys.eta_hat();
    let gap = sys.triple.gap;
    let n = select_n(eta, gap).clamp(1, 10_000);
    let qs = q_k_series(sys, n, MethodChoice::Auto)?;
    let theta = theta_truncated(sys.lambda(), &qs.q, n)?;
    Ok(ScalingInputs {
        xi: xi_epsilon(theta, kappa_fit),
        mass: sys.delta,
        delta_eps: delta_epsilon(eta, gap).0,
        small_n: n,
    })
}

/// The `μ₀` survival curve of a system, long enough for `t_max`.
pub fn mu0_curve_for(sys: &OpenSystem, xi: f64, t_max: f64) -> Result<SurvivalCurve> {
    let n_max = (t_max / (xi * sys.delta)).floor();
    if !n_max.is_finite() || n_max > 1e8 {
        return Err(Error::invalid("curve horizon too long"));
    }
    survival_operator(&sys.open, &sys.phi0, n_max as usize + 1, MeasureKind::Mu0)
}

/// Sampled survival with binomial standard errors.
pub fn survival_montecarlo(
    map: &IntervalMap,
    hole: &Hole,
    n_max: usize,
    samples: u64,
    seed: u64,
    kind: MeasureKind,
    phi0_cells: Option<Vec<(f64, f64, f64)>>,
) -> Result<SurvivalCurve> {
    if samples == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    let init = match kind {
        MeasureKind::Nu0 => InitLaw::Uniform,
        MeasureKind::Mu0 => InitLaw::Cells(
            phi0_cells.ok_or_else(|| Error::invalid("the mu0 curve needs the invariant density"))?,
        ),
    };
    let sampler = Sampler::new(map, init)?;
    let hist = sampler.hitting_histogram(hole.intervals_f64(), n_max, samples, seed);
    let values = survival_from_histogram(&hist, samples);
    let stderr = values.iter().map(|&p| binomial_se(p, samples)).collect();
    Ok(SurvivalCurve {
        measure_kind: kind,
        values,
        epsilon: hole.radius().map(to_f64),
        truncated_at: None,
        stderr: Some(stderr),
    })
}

/// Cells `(lo, hi, φ₀)` of the system's invariant density.
pub fn phi0_cells(sys: &OpenSystem) -> Vec<(f64, f64, f64)> {
    match &sys.phi0_exact {
        Some(d) => d.to_f64_cells(),
        None => sys
            .grid()
            .edges_f64()
            .windows(2)
            .zip(&sys.phi0)
            .map(|(w, &v)| (w[0], w[1], v.max(0.0)))
            .collect(),
    }
}

pub const SURVIVAL_CSV_HEADER: &str = "n,s_nu0,s_mu0,spectral_estimate,band";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::{int, rat};
    use crate::system::{GridChoice, SolverOptions};
    use crate::transfer::{assemble_ulam, UlamGrid};

    fn half() -> Hole {
        Hole::from_intervals(IntervalSet::from_intervals([(int(0), rat(1, 2))]))
    }

    #[test]
    fn exact_half_hole() {
        let c = survival_exact(&IntervalMap::doubling(), &half(), 12, MeasureKind::Nu0, None, 1 << 10).unwrap();
        for (n, v) in c.values.iter().enumerate() {
            assert_eq!(*v, 0.5f64.powi(n as i32));
        }
        let e = survival_exact(&IntervalMap::tent(), &Hole::empty(), 5, MeasureKind::Nu0, None, 16).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn truncation_marker() {
        let hole = Hole::around(&[rat(1, 3)], &rat(1, 1000)).unwrap();
        let c = survival_exact(&IntervalMap::doubling(), &hole, 40, MeasureKind::Nu0, None, 8).unwrap();
        assert!(c.truncated_at.is_some());
        assert_eq!(c.values[0], 1.0);
    }

    #[test]
    fn operator_half_hole() {
        let grid = UlamGrid::uniform(2).unwrap();
        let m = assemble_ulam(&IntervalMap::doubling(), &grid).open(&half());
        let c = survival_operator(&m, &[1.0, 1.0], 10, MeasureKind::Nu0).unwrap();
        for (n, v) in c.values.iter().enumerate() {
            assert!((v - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        let closed = assemble_ulam(&IntervalMap::doubling(), &grid);
        let c = survival_operator(&closed, &[1.0, 1.0], 10, MeasureKind::Nu0).unwrap();
        assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn spectral_band_contains_operator() {
        let hole = Hole::around(&[rat(1, 3)], &rat(1, 1024)).unwrap();
        let sys = OpenSystem::build(&IntervalMap::doubling(), &hole, GridChoice::Markov { cap: 4096 }, SolverOptions::default()).unwrap();
        let curve = survival_operator(&sys.open, &sys.phi0, 200, MeasureKind::Mu0).unwrap();
        let nu_phi = sys.triple.nu_of(&sys.phi0);
        assert!((nu_phi - 1.0).abs() < 1e-2);
        let c = fit_band_constant(&curve, &sys.triple, nu_phi, 1..20);
        for n in 20..=200 {
            let est = survival_spectral(&sys.triple, nu_phi, n, c);
            assert!(est.contains(curve.values[n]), "n = {n}");
        }
    }

    #[test]
    fn delta_eps_minimizer() {
        let (d, n) = delta_epsilon(1e-4, 0.5);
        assert!(n > 5 && n < 20);
        let brute = (1..200).map(|n| n as f64 * 1e-4 + 0.5f64.powi(n) / 0.5).fold(f64::INFINITY, f64::min);
        assert_eq!(d, brute);
    }

    #[test]
    fn error_curve_basics() {
        let curve = SurvivalCurve {
            measure_kind: MeasureKind::Mu0,
            values: (0..=100).map(|n| (-(n as f64) * 0.01).exp()).collect(),
            epsilon: None,
            truncated_at: None,
            stderr: None,
        };
        let inputs = ScalingInputs { xi: 1.0, mass: 0.01, delta_eps: 0.1, small_n: 3 };
        let r = exp_error_curve(&curve, inputs, &[0.1, 0.5, 1.0, 5.0]);
        assert_eq!(r.omitted, vec![5.0]);
        assert!(r.error_curve.iter().all(|p| p.error < 1e-12));
        assert!(r.error_curve[0].n == 10 || r.error_curve[0].n == 9);
    }

    #[test]
    fn montecarlo_half_hole() {
        let c = survival_montecarlo(&IntervalMap::doubling(), &half(), 6, 1_000_000, 5, MeasureKind::Nu0, None).unwrap();
        let se = c.stderr.as_ref().unwrap();
        assert!((c.values[5] - 1.0 / 32.0).abs() <= 3.0 * se[5]);
        let e = survival_montecarlo(&IntervalMap::doubling(), &Hole::empty(), 6, 1000, 5, MeasureKind::Nu0, None).unwrap();
        assert!(e.values.iter().all(|&v| v == 1.0));
    }
}
