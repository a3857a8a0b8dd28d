//! Subcommand drivers. Each validates its config, computes, and writes its
//! artifacts into the output directory.

use std::path::Path;

use log::{info, warn};
use openrates::evl::{self, Observable, EVL_CSV_HEADER};
use openrates::hitting::{
    exp_error_curve, fit_band_constant, mu0_curve_for, phi0_cells, scaling_inputs, survival_exact,
    survival_montecarlo, survival_operator, survival_spectral, MeasureKind, ScalingReport, SurvivalCurve,
    SURVIVAL_CSV_HEADER,
};
use openrates::maps::{pi_set, theta_analytic, Hole, IntervalMap};
use openrates::mc::InitLaw;
use openrates::rare_events::{
    finish_estimate, q_k_series, select_n, sweep_csv_line, theta_truncated, ExtremalIndexEstimate, SweepRow,
    SWEEP_CSV_HEADER,
};
use openrates::real::{to_f64, Rational};
use openrates::sft::{entropy_csv_line, entropy_drop_study, topological_entropy, EntropyReport, ENTROPY_CSV_HEADER};
use openrates::system::OpenSystem;
use openrates::transfer::escape_rate as escape_rate_of;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{EvlConfig, HittingConfig, MeasureConfig, SftConfig, SweepConfig, SweepSetup};
use crate::output::{num, Artifacts};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// One ε of a sweep. `row` is absent when the hole carries no mass.
#[derive(Debug, Clone, Serialize)]
pub struct SweepItem {
    pub epsilon: f64,
    pub lambda: f64,
    pub escape_rate: f64,
    pub gap: f64,
    pub zero_mass: bool,
    pub row: Option<SweepRow>,
    #[serde(skip)]
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub items: Vec<SweepItem>,
    pub estimate: Option<ExtremalIndexEstimate>,
    /// `1 − Σ 1/|(T^{k+1})'(x)|` over periodic returns of the centers.
    pub theta_analytic: Option<f64>,
    pub warnings: Vec<String>,
}

impl SweepSummary {
    pub fn theta_hat(&self) -> Option<f64> {
        self.estimate.as_ref().map(|e| e.theta_extrapolated.value)
    }
}

fn sweep_item(cfg: &SweepConfig, setup: &SweepSetup, eps: &Rational) -> Result<SweepItem> {
    let hole = Hole::around(&setup.centers, eps)?;
    let sys = OpenSystem::build(&setup.map, &hole, cfg.grid.choice(), cfg.solver.options())?;
    let lambda = sys.lambda();
    let mut item = SweepItem {
        epsilon: to_f64(eps),
        lambda,
        escape_rate: escape_rate_of(&sys.triple).unwrap_or(f64::INFINITY),
        gap: sys.triple.gap,
        zero_mass: sys.delta_is_zero(),
        row: None,
        q: Vec::new(),
    };
    if item.zero_mass {
        warn!("hole at ε = {:e} has zero mass; row flagged", item.epsilon);
        return Ok(item);
    }
    let n = cfg.n;
    let qs = q_k_series(&sys, n, cfg.method.choice())?;
    item.row = Some(SweepRow {
        epsilon: item.epsilon,
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
    });
    item.q = qs.q;
    Ok(item)
}

/// The ε-sweep shared by `escape-rate` and `extremal-index`.
pub fn compute_sweep(cfg: &SweepConfig) -> Result<SweepSummary> {
    let setup = cfg.validate()?;
    let items = setup
        .epsilons
        .par_iter()
        .map(|eps| sweep_item(cfg, &setup, eps))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<SweepRow> = items.iter().filter_map(|i| i.row.clone()).collect();
    let mut warnings = Vec::new();
    let estimate = if rows.len() >= 3 {
        let est = finish_estimate(rows, cfg.n, 0.05)?;
        warnings.extend(est.warnings.iter().cloned());
        Some(est)
    } else {
        let w = "fewer than three ε with positive hole mass; no extrapolation".to_string();
        warn!("{w}");
        warnings.push(w);
        None
    };
    let theta_analytic = match pi_set(&setup.map, &setup.centers, cfg.k_max) {
        Ok(pi) => Some(theta_analytic(&pi)),
        Err(e) => {
            warnings.push(format!("no analytic extremal index: {e}"));
            None
        }
    };
    Ok(SweepSummary {
        items,
        estimate,
        theta_analytic,
        warnings,
    })
}

const ESCAPE_CSV_HEADER: &str = "epsilon,delta,lambda,escape_rate,gap,diag,theta_N_eps,status";

pub fn escape_rate(cfg: &SweepConfig, out: &Path) -> Result<SweepSummary> {
    let summary = compute_sweep(cfg)?;
    let mut art = Artifacts::new(out, "escape-rate", cfg)?;
    let lines: Vec<String> = summary
        .items
        .iter()
        .map(|i| {
            let (delta, diag, theta) = match &i.row {
                Some(r) => (r.delta, r.diag, r.theta_n_eps),
                None => (0.0, f64::NAN, f64::NAN),
            };
            format!(
                "{},{},{},{},{},{},{},{}",
                num(i.epsilon),
                num(delta),
                num(i.lambda),
                num(i.escape_rate),
                num(i.gap),
                num(diag),
                num(theta),
                if i.zero_mass { "zero-mass" } else { "ok" }
            )
        })
        .collect();
    art.csv("escape_rate.csv", ESCAPE_CSV_HEADER, &lines)?;
    art.json("escape_rate.json", &summary)?;
    write_q(cfg, &summary, &mut art)?;
    if let Some(t) = summary.theta_hat() {
        info!("extrapolated θ = {t:.6}");
    }
    Ok(summary)
}

pub fn extremal_index(cfg: &SweepConfig, out: &Path) -> Result<SweepSummary> {
    let summary = compute_sweep(cfg)?;
    if let Some(z) = summary.items.iter().find(|i| i.zero_mass) {
        warn!("ε = {:e} gives a hole of zero mass", z.epsilon);
        return Err(CliError::Core(openrates::Error::ZeroMassHole));
    }
    let mut art = Artifacts::new(out, "extremal-index", cfg)?;
    let lines: Vec<String> = summary.items.iter().filter_map(|i| i.row.as_ref()).map(sweep_csv_line).collect();
    art.csv("extremal_index.csv", SWEEP_CSV_HEADER, &lines)?;
    art.json("extremal_index.json", &summary)?;
    write_q(cfg, &summary, &mut art)?;
    Ok(summary)
}

fn write_q(cfg: &SweepConfig, summary: &SweepSummary, art: &mut Artifacts) -> Result<()> {
    if !cfg.write_q {
        return Ok(());
    }
    for (i, item) in summary.items.iter().enumerate() {
        let lines: Vec<String> = item.q.iter().enumerate().map(|(k, q)| format!("{k},{}", num(*q))).collect();
        art.csv(&format!("q_{i}.csv"), "k,q_k", &lines)?;
    }
    Ok(())
}

/// Survival data and the exponential-law comparison for one ε.
#[derive(Debug, Clone, Serialize)]
pub struct HittingItem {
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub gap: f64,
    pub nu_phi: f64,
    /// Band constant fitted over the whole curve, and over `n < 20` and
    /// `n ≥ 20` separately.
    pub band_constant: f64,
    pub band_constant_early: f64,
    pub band_constant_late: f64,
    #[serde(skip)]
    pub nu0: SurvivalCurve,
    #[serde(skip)]
    pub mu0: SurvivalCurve,
    #[serde(skip)]
    pub spectral: Vec<(f64, f64)>,
    #[serde(skip)]
    pub exact_nu0: Option<SurvivalCurve>,
    #[serde(skip)]
    pub exact_mu0: Option<SurvivalCurve>,
    #[serde(skip)]
    pub monte_carlo: Option<SurvivalCurve>,
    pub scaling: Option<ScalingReport>,
    pub warnings: Vec<String>,
}

/// Boundary between the early and late band-constant fits.
const BAND_SPLIT: usize = 20;

fn hitting_item(cfg: &HittingConfig, setup: &SweepSetup, index: usize, eps: &Rational) -> Result<HittingItem> {
    let map = &setup.map;
    let hole = Hole::around(&setup.centers, eps)?;
    let sys = OpenSystem::build(map, &hole, cfg.grid.choice(), cfg.solver.options())?;
    let ones = vec![1.0; sys.grid().bins()];
    let nu0 = survival_operator(&sys.open, &ones, cfg.n_max, MeasureKind::Nu0)?;
    let mu0 = survival_operator(&sys.open, &sys.phi0, cfg.n_max, MeasureKind::Mu0)?;
    let nu_phi = sys.triple.nu_of(&sys.phi0);
    let c = fit_band_constant(&mu0, &sys.triple, nu_phi, 1..cfg.n_max + 1);
    let c_early = fit_band_constant(&mu0, &sys.triple, nu_phi, 1..BAND_SPLIT.min(cfg.n_max + 1));
    let c_late = fit_band_constant(&mu0, &sys.triple, nu_phi, BAND_SPLIT..cfg.n_max + 1);
    let spectral = (0..=cfg.n_max)
        .map(|n| {
            let e = survival_spectral(&sys.triple, nu_phi, n, c);
            (e.value, e.band + e.floor)
        })
        .collect();
    let mut warnings = Vec::new();
    let (mut exact_nu0, mut exact_mu0) = (None, None);
    if cfg.exact {
        match survival_exact(map, &hole, cfg.n_max, MeasureKind::Nu0, None, cfg.interval_cap) {
            Ok(c) => exact_nu0 = Some(c),
            Err(e) => warnings.push(format!("exact ν₀ survival unavailable: {e}")),
        }
        match &sys.phi0_exact {
            Some(d) => match survival_exact(map, &hole, cfg.n_max, MeasureKind::Mu0, Some(d), cfg.interval_cap) {
                Ok(c) => exact_mu0 = Some(c),
                Err(e) => warnings.push(format!("exact μ₀ survival unavailable: {e}")),
            },
            None => warnings.push("exact μ₀ survival unavailable: invariant density not known exactly".into()),
        }
    }
    let monte_carlo = match (&cfg.monte_carlo, cfg.seed) {
        (Some(mc), Some(seed)) => {
            let kind = match mc.measure {
                MeasureConfig::Nu0 => MeasureKind::Nu0,
                MeasureConfig::Mu0 => MeasureKind::Mu0,
            };
            let seed = seed.wrapping_add(index as u64);
            Some(survival_montecarlo(map, &hole, cfg.n_max, mc.samples, seed, kind, Some(phi0_cells(&sys)))?)
        }
        _ => None,
    };
    let scaling = if sys.delta_is_zero() {
        warnings.push("hole has zero mass; no exponential-law comparison".into());
        None
    } else {
        let t_max = cfg.t_grid.iter().copied().fold(0.0, f64::max);
        let report = scaling_inputs(&sys, 0.0).and_then(|inputs| {
            let curve = mu0_curve_for(&sys, inputs.xi, t_max)?;
            Ok(exp_error_curve(&curve, inputs, &cfg.t_grid))
        });
        match report {
            Ok(r) => Some(r),
            Err(e @ openrates::Error::NoConvergence { .. }) => return Err(e.into()),
            Err(e) => {
                warnings.push(format!("no exponential-law comparison: {e}"));
                None
            }
        }
    };
    for w in &warnings {
        warn!("ε = {}: {w}", to_f64(eps));
    }
    Ok(HittingItem {
        epsilon: to_f64(eps),
        delta: sys.delta,
        lambda: sys.lambda(),
        gap: sys.triple.gap,
        nu_phi,
        band_constant: c,
        band_constant_early: c_early,
        band_constant_late: c_late,
        nu0,
        mu0,
        spectral,
        exact_nu0,
        exact_mu0,
        monte_carlo,
        scaling,
        warnings,
    })
}

pub fn compute_hitting(cfg: &HittingConfig) -> Result<Vec<HittingItem>> {
    let setup = cfg.validate()?;
    setup
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(i, eps)| hitting_item(cfg, &setup, i, eps))
        .collect()
}

fn cell(c: Option<&SurvivalCurve>, n: usize) -> String {
    c.and_then(|c| c.at(n)).map(num).unwrap_or_default()
}

pub fn hitting(cfg: &HittingConfig, out: &Path) -> Result<Vec<HittingItem>> {
    let items = compute_hitting(cfg)?;
    let mut art = Artifacts::new(out, "hitting", cfg)?;
    for (i, it) in items.iter().enumerate() {
        let lines: Vec<String> = (0..=cfg.n_max)
            .map(|n| {
                let (est, band) = it.spectral[n];
                format!("{n},{},{},{},{}", cell(Some(&it.nu0), n), cell(Some(&it.mu0), n), num(est), num(band))
            })
            .collect();
        art.csv(&format!("survival_{i}.csv"), SURVIVAL_CSV_HEADER, &lines)?;
        if it.exact_nu0.is_some() || it.exact_mu0.is_some() {
            let lines: Vec<String> = (0..=cfg.n_max)
                .map(|n| format!("{n},{},{}", cell(it.exact_nu0.as_ref(), n), cell(it.exact_mu0.as_ref(), n)))
                .collect();
            art.csv(&format!("exact_{i}.csv"), "n,s_nu0,s_mu0", &lines)?;
        }
        if let Some(mc) = &it.monte_carlo {
            let se = mc.stderr.clone().unwrap_or_default();
            let lines: Vec<String> = mc
                .values
                .iter()
                .zip(&se)
                .enumerate()
                .map(|(n, (s, e))| format!("{n},{},{}", num(*s), num(*e)))
                .collect();
            art.csv(&format!("montecarlo_{i}.csv"), "n,s,stderr", &lines)?;
        }
        if let Some(sc) = &it.scaling {
            let lines: Vec<String> = sc
                .error_curve
                .iter()
                .map(|p| format!("{},{},{},{},{},{}", num(p.t), p.n, num(p.survival), num(p.error), num(p.bound_shape), p.small_n))
                .collect();
            art.csv(&format!("scaling_{i}.csv"), "t,n,survival,error,bound_shape,small_n", &lines)?;
        }
    }
    art.json("hitting.json", &items)?;
    Ok(items)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvlSummary {
    pub levels: evl::LevelSequence,
    pub points: Vec<evl::EvlPoint>,
    pub theta: f64,
    pub predicted: f64,
    /// `−ln(p)/t` at the largest `n`, with its standard error.
    pub theta_hat: f64,
    pub theta_hat_stderr: f64,
    pub engine: String,
}

fn evl_theta(cfg: &EvlConfig, map: &IntervalMap) -> Result<f64> {
    if let Some(t) = cfg.theta {
        return Ok(t);
    }
    let pi = pi_set(map, std::slice::from_ref(&cfg.center.0), cfg.k_max)?;
    Ok(theta_analytic(&pi))
}

pub fn compute_evl(cfg: &EvlConfig) -> Result<EvlSummary> {
    let map = cfg.validate()?;
    let seed = cfg.seed.expect("validated");
    let obs = Observable::new(cfg.center.0.clone(), cfg.transform)?;
    let sys = OpenSystem::build(&map, &Hole::empty(), cfg.grid.choice(), cfg.solver.options())?;
    let cells = phi0_cells(&sys);
    let levels = evl::levels_for(cfg.t, &cfg.n, &obs, &cells)?;
    let init = match cfg.init {
        MeasureConfig::Nu0 => InitLaw::Uniform,
        MeasureConfig::Mu0 => InitLaw::Cells(cells),
    };
    let engine = format!("{:?}", openrates::mc::Sampler::new(&map, init.clone())?.engine());
    let points = evl::max_law_empirical(&map, &obs, &levels, cfg.samples, seed, init)?;
    let theta = evl_theta(cfg, &map)?;
    let last = *points.last().expect("n is nonempty");
    let (theta_hat, theta_hat_stderr) = last.theta_hat(cfg.t);
    Ok(EvlSummary {
        levels,
        points,
        theta,
        predicted: evl::max_law_predicted(cfg.t, theta),
        theta_hat,
        theta_hat_stderr,
        engine,
    })
}

pub fn run_evl(cfg: &EvlConfig, out: &Path) -> Result<EvlSummary> {
    let s = compute_evl(cfg)?;
    let mut art = Artifacts::new(out, "evl", cfg)?;
    let lines: Vec<String> = s
        .points
        .iter()
        .map(|p| format!("{},{},{},{},{}", p.n, num(p.z), num(p.empirical), num(s.predicted), num(p.stderr)))
        .collect();
    art.csv("evl.csv", EVL_CSV_HEADER, &lines)?;
    art.json("evl.json", &s)?;
    info!("θ̂ = {:.5} ± {:.5} (predicted θ = {:.5})", s.theta_hat, s.theta_hat_stderr, s.theta);
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SftSummary {
    pub alphabet: usize,
    pub h_closed: f64,
    pub reports: Vec<EntropyReport>,
}

pub fn compute_sft(cfg: &SftConfig) -> Result<SftSummary> {
    let (sft, words) = cfg.validate()?;
    Ok(SftSummary {
        alphabet: sft.alphabet(),
        h_closed: topological_entropy(&sft)?,
        reports: entropy_drop_study(&sft, &words)?,
    })
}

pub fn sft_entropy(cfg: &SftConfig, out: &Path) -> Result<SftSummary> {
    let s = compute_sft(cfg)?;
    let mut art = Artifacts::new(out, "sft-entropy", cfg)?;
    let lines: Vec<String> = s.reports.iter().map(entropy_csv_line).collect();
    art.csv("entropy.csv", ENTROPY_CSV_HEADER, &lines)?;
    art.json("entropy.json", &s)?;
    Ok(s)
}
