//! Return-time series `q_k`, truncated and extrapolated extremal indices.

use log::warn;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::density::StepDensity;
use crate::error::{Error, Result};
use crate::maps::{Hole, IntervalMap};
use crate::real::{to_f64, Rational};
use crate::system::{GridChoice, OpenSystem, SolverOptions};

pub use crate::system::mu0_hole;

/// Cell count past which exact propagation of densities gives up.
pub const EXACT_CELL_CAP: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QMethod {
    ExactInterval,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodChoice {
    /// Exact when the invariant density is known exactly, else matrix.
    #[default]
    Auto,
    Exact,
    Matrix,
}

#[derive(Debug, Clone, Serialize)]
pub struct QSeries {
    pub epsilon: Option<f64>,
    /// `q_0 … q_{N−1}`.
    pub q: Vec<f64>,
    pub delta: f64,
    pub eta: f64,
    pub method: QMethod,
    /// Mass started in the hole that has not returned after `N` steps,
    /// relative to `Δ`. Equals `1 − Σ q` up to round-off.
    pub unreturned: f64,
}

impl QSeries {
    pub fn partial_sum(&self, n: usize) -> f64 {
        self.q.iter().take(n).sum()
    }

    /// Partial sum plus a geometric tail with ratio `lambda`.
    pub fn tail_extrapolated_sum(&self, lambda: f64) -> f64 {
        let s = self.partial_sum(self.q.len());
        match self.q.last() {
            Some(&last) if lambda < 1.0 => s + last * lambda / (1.0 - lambda),
            _ => s,
        }
    }
}

/// Exact `q_k` by propagating `1_A φ₀` under the map in rational arithmetic.
pub fn q_series_exact(map: &IntervalMap, hole: &Hole, phi0: &StepDensity, n: usize) -> Result<QSeries> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let a = hole.intervals();
    let outside = a.complement();
    let delta = phi0.integral_over(a);
    if !delta.is_positive() {
        return Err(Error::ZeroMassHole);
    }
    let mut g = phi0.restrict(a).push(map);
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        q.push(to_f64(&(g.integral_over(a) / &delta)));
        if k + 1 < n {
            g = g.restrict(&outside).push(map);
            if g.cells() > EXACT_CELL_CAP {
                return Err(Error::NotMarkov(format!(
                    "exact propagation exceeds {EXACT_CELL_CAP} cells at k = {k}"
                )));
            }
        }
    }
    let unreturned = to_f64(&(g.restrict(&outside).integral() / &delta));
    let sup_inv = phi0
        .inf_over(a)
        .filter(|v| !v.is_zero())
        .map(|v| to_f64(&v.recip()))
        .unwrap_or(f64::INFINITY);
    let delta_f = to_f64(&delta);
    Ok(QSeries {
        epsilon: hole.radius().map(to_f64),
        q,
        delta: delta_f,
        eta: delta_f * sup_inv,
        method: QMethod::ExactInterval,
        unreturned,
    })
}

/// `q_k = ν₀((P₀ − P_ε) P_ε^k (P₀ − P_ε) φ₀) / Δ` on the system's grid.
pub fn q_series_matrix(sys: &OpenSystem, n: usize) -> Result<QSeries> {
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    if sys.delta_is_zero() {
        return Err(Error::ZeroMassHole);
    }
    let cov = sys.coverage();
    let lengths = sys.grid().lengths();
    let delta: f64 = lengths.iter().zip(&cov).zip(&sys.phi0).map(|((l, c), p)| l * c * p).sum();
    let weights: Vec<f64> = lengths.iter().zip(&cov).map(|(l, c)| l * c).collect();
    let seed: Vec<f64> = cov.iter().zip(&sys.phi0).map(|(c, p)| c * p).collect();
    let mut g = sys.closed.apply(&seed);
    let mut next = vec![0.0; g.len()];
    let mut q = Vec::with_capacity(n);
    for k in 0..n {
        let hit: f64 = weights.iter().zip(&g).map(|(w, v)| w * v).sum();
        q.push(hit / delta);
        if k + 1 < n {
            sys.open.apply_into(&g, &mut next);
            std::mem::swap(&mut g, &mut next);
        }
    }
    let hit: f64 = weights.iter().zip(&g).map(|(w, v)| w * v).sum();
    let unreturned = (sys.grid().pairing(&g) - hit) / delta;
    Ok(QSeries {
        epsilon: sys.hole.radius().map(to_f64),
        q,
        delta,
        eta: sys.eta_hat(),
        method: QMethod::Matrix,
        unreturned,
    })
}

/// Both routes behind one entry point.
pub fn q_k_series(sys: &OpenSystem, n: usize, method: MethodChoice) -> Result<QSeries> {
    let exact = |d: &StepDensity| {
        q_series_exact(&sys.map, &sys.hole, d, n).map(|mut s| {
            s.eta = sys.eta_hat();
            s
        })
    };
    match (method, &sys.phi0_exact) {
        (MethodChoice::Matrix, _) | (MethodChoice::Auto, None) => q_series_matrix(sys, n),
        (MethodChoice::Exact, None) => Err(Error::NotMarkov(
            "exact q_k needs an exactly known invariant density".into(),
        )),
        (MethodChoice::Exact, Some(d)) => exact(d),
        (MethodChoice::Auto, Some(d)) => match exact(d) {
            Err(Error::NotMarkov(_)) => q_series_matrix(sys, n),
            other => other,
        },
    }
}

/// `θ_{N,ε} = 1 − Σ_{k<N} λ_ε^{−k} q_k`.
pub fn theta_truncated(lambda: f64, q: &[f64], n: usize) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid(format!("lambda {lambda} outside (0, 1]")));
    }
    if n > q.len() {
        return Err(Error::invalid(format!("N = {n} exceeds the {} computed terms", q.len())));
    }
    let mut scale = 1.0;
    let mut s = 0.0;
    for &qk in &q[..n] {
        s += scale * qk;
        scale /= lambda;
    }
    Ok(1.0 - s)
}

/// First-order eigenvalue prediction `exp(−θΔ)`.
pub fn eigenvalue_prediction(theta: f64, delta: f64) -> f64 {
    (-theta * delta).exp()
}

/// `N(ε) = ⌈log η̂ / log(1 − γ̂)⌉`, at least 1.
pub fn select_n(eta_hat: f64, gap: f64) -> usize {
    if !(eta_hat > 0.0 && eta_hat < 1.0) || gap >= 1.0 {
        return 1;
    }
    if gap <= 0.0 {
        return usize::MAX;
    }
    let n = (eta_hat.ln() / (1.0 - gap).ln()).ceil();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extrapolation {
    pub value: f64,
    /// Fitted exponent `p` in `y(ε) ≈ y₀ + C ε^p`.
    pub order: f64,
    pub coefficient: f64,
    /// Largest misfit of the model over all points.
    pub residual: f64,
    /// True when the order could not be fitted and `p = 1` was used.
    pub order_fallback: bool,
}

const ORDER_RANGE: (f64, f64) = (0.25, 4.0);

/// Richardson extrapolation to `ε = 0` from the three smallest `ε`. The order
/// is fitted from the data when the three points determine it within
/// `[0.25, 4]`, else it falls back to 1.
pub fn richardson(eps: &[f64], ys: &[f64]) -> Result<Extrapolation> {
    if eps.len() != ys.len() || eps.len() < 3 {
        return Err(Error::invalid("extrapolation needs at least three points"));
    }
    if eps.windows(2).any(|w| !(w[1] < w[0])) || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("epsilons must be positive and strictly decreasing"));
    }
    let k = eps.len();
    let (e1, e2, e3) = (eps[k - 3], eps[k - 2], eps[k - 1]);
    let (y1, y2, y3) = (ys[k - 3], ys[k - 2], ys[k - 1]);
    let ratio_of = |p: f64| (e1.powf(p) - e2.powf(p)) / (e2.powf(p) - e3.powf(p));
    let (mut order, mut fallback) = (1.0, true);
    if (y2 - y3).abs() > 0.0 {
        let target = (y1 - y2) / (y2 - y3);
        let f = |p: f64| ratio_of(p) - target;
        let (mut lo, mut hi) = ORDER_RANGE;
        if f(lo) * f(hi) < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(lo) * f(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            order = 0.5 * (lo + hi);
            fallback = false;
        }
    }
    let c = (y2 - y3) / (e2.powf(order) - e3.powf(order));
    let value = y3 - c * e3.powf(order);
    let residual = eps
        .iter()
        .zip(ys)
        .map(|(e, y)| (y - value - c * e.powf(order)).abs())
        .fold(0.0, f64::max);
    Ok(Extrapolation {
        value,
        order,
        coefficient: c,
        residual,
        order_fallback: fallback,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub gap: f64,
    pub theta_n_eps: f64,
    /// `(1 − λ_ε)/Δ_ε`.
    pub diag: f64,
    pub kac_partial_sum: f64,
    pub kac_tail_sum: f64,
    pub eta_hat: f64,
    pub n_auto: usize,
    pub bins: usize,
    pub method: QMethod,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtremalIndexEstimate {
    pub rows: Vec<SweepRow>,
    pub n: usize,
    /// `θ_{N,ε}` at the smallest ε.
    pub theta_n_eps: f64,
    pub theta_extrapolated: Extrapolation,
    pub diag_extrapolated: Extrapolation,
    pub warnings: Vec<String>,
}

impl ExtremalIndexEstimate {
    pub fn epsilons(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.epsilon).collect()
    }

    /// `|(1 − λ_ε)/Δ_ε − θ_{N,ε}|` along the sweep.
    pub fn consistency_gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| (r.diag - r.theta_n_eps).abs()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ThetaOptions {
    pub grid: GridChoice,
    pub solver: SolverOptions,
    pub method: MethodChoice,
    /// Relative slack before a non-shrinking diagnostic gap is reported.
    pub noise: Option<f64>,
}

/// One row of an ε-sweep.
pub fn sweep_row(sys: &OpenSystem, epsilon: f64, n: usize, method: MethodChoice) -> Result<SweepRow> {
    let qs = q_k_series(sys, n, method)?;
    let lambda = sys.lambda();
    Ok(SweepRow {
        epsilon,
        delta: sys.delta,
        lambda,
        gap: sys.triple.gap,
        theta_n_eps: theta_truncated(lambda, &qs.q, n)?,
        diag: (1.0 - lambda) / sys.delta,
        kac_partial_sum: qs.partial_sum(n),
        kac_tail_sum: qs.tail_extrapolated_sum(lambda),
        eta_hat: qs.eta,
        n_auto: select_n(qs.eta, sys.triple.gap),
        bins: sys.grid().bins(),
        method: qs.method,
    })
}

/// θ_{N,ε} along a decreasing ε-sweep, extrapolated to ε = 0.
pub fn theta_limit(
    map: &IntervalMap,
    centers: &[Rational],
    eps_list: &[Rational],
    n: usize,
    opts: &ThetaOptions,
) -> Result<ExtremalIndexEstimate> {
    if eps_list.len() < 3 {
        return Err(Error::invalid("the ε-sweep needs at least three values"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("ε values must be strictly decreasing"));
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    for eps in eps_list {
        let hole = Hole::around(centers, eps)?;
        let sys = OpenSystem::build(map, &hole, opts.grid, opts.solver)?;
        rows.push(sweep_row(&sys, to_f64(eps), n, opts.method)?);
    }
    finish_estimate(rows, n, opts.noise.unwrap_or(0.05))
}

/// Extrapolates completed sweep rows and collects trend warnings.
pub fn finish_estimate(rows: Vec<SweepRow>, n: usize, noise: f64) -> Result<ExtremalIndexEstimate> {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let thetas: Vec<f64> = rows.iter().map(|r| r.theta_n_eps).collect();
    let diags: Vec<f64> = rows.iter().map(|r| r.diag).collect();
    let theta_extrapolated = richardson(&eps, &thetas)?;
    let diag_extrapolated = richardson(&eps, &diags)?;
    let mut warnings = Vec::new();
    let gaps: Vec<f64> = rows.iter().map(|r| (r.diag - r.theta_n_eps).abs()).collect();
    for (i, w) in gaps.windows(2).enumerate() {
        if w[1] > w[0] * (1.0 + noise) {
            warnings.push(format!(
                "diagnostic gap grows from {:.3e} to {:.3e} between ε = {:.3e} and {:.3e}; N may be too small or the grid too coarse",
                w[0],
                w[1],
                eps[i],
                eps[i + 1]
            ));
        }
    }
    for r in &rows {
        if r.n_auto > n {
            warnings.push(format!("N = {n} is below the suggested N(ε) = {} at ε = {:.3e}", r.n_auto, r.epsilon));
        }
    }
    if theta_extrapolated.order_fallback {
        warnings.push("extrapolation order not identifiable; used order 1".into());
    }
    for w in &warnings {
        warn!("{w}");
    }
    Ok(ExtremalIndexEstimate {
        theta_n_eps: *thetas.last().unwrap_or(&f64::NAN),
        rows,
        n,
        theta_extrapolated,
        diag_extrapolated,
        warnings,
    })
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,delta,lambda,theta_N_eps,diag,kac_partial_sum";

pub fn sweep_csv_line(r: &SweepRow) -> String {
    format!(
        "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        r.epsilon, r.delta, r.lambda, r.theta_n_eps, r.diag, r.kac_partial_sum
    )
}
