//! A map together with a hole: closed and open operators, invariant density
//! and the leading spectral data, assembled once and shared by the rare-event,
//! hitting-time and extreme-value computations.

use num_traits::{One, Zero};

use crate::density::StepDensity;
use crate::error::{Error, Result};
use crate::maps::{Hole, IntervalMap};
use crate::real::{to_f64, Rational};
use crate::transfer::{
    assemble_markov_exact, assemble_ulam, leading_triple, SpectralTriple, TransferMatrix, UlamGrid,
    DEFAULT_MARKOV_CAP, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

/// Largest Markov partition for which the invariant density is solved exactly.
const EXACT_DENSITY_MAX_CELLS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    /// Forward closure of branch and hole endpoints; fails if not finite.
    Markov { cap: usize },
    Uniform { bins: usize },
    /// Markov partition when it closes within `cap` points, else uniform.
    Auto { cap: usize, bins: usize },
}

impl Default for GridChoice {
    fn default() -> Self {
        GridChoice::Auto {
            cap: DEFAULT_MARKOV_CAP,
            bins: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpenSystem {
    pub map: IntervalMap,
    pub hole: Hole,
    pub closed: TransferMatrix,
    pub open: TransferMatrix,
    /// Invariant density on the grid, `ν₀(phi0) = 1`.
    pub phi0: Vec<f64>,
    /// Exact invariant density, when the map is Markov.
    pub phi0_exact: Option<StepDensity>,
    /// `Δ = μ₀(A)`.
    pub delta: f64,
    pub delta_exact: Option<Rational>,
    /// Leading data of the open operator. For `Δ = 0` this is the closed triple.
    pub triple: SpectralTriple,
}

/// Exact invariant density of a piecewise affine Markov map, or `None` if the
/// map is not Markov within the default cap.
pub fn invariant_density_exact(map: &IntervalMap) -> Result<Option<StepDensity>> {
    let closed = match assemble_markov_exact(map) {
        Ok(m) => m,
        Err(Error::NotMarkov(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    if closed.dim() > EXACT_DENSITY_MAX_CELLS {
        return Ok(None);
    }
    let grid = closed.grid();
    let m = closed.dim();
    // (M − I) φ = 0 with the last equation replaced by Σ Lᵢ φᵢ = 1.
    let mut a = vec![vec![Rational::zero(); m + 1]; m];
    for (j, col) in closed.exact_columns().iter().enumerate() {
        for (i, v) in col {
            a[*i][j] += v;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= Rational::one();
    }
    for (j, cell) in a[m - 1].iter_mut().take(m).enumerate() {
        *cell = grid.bin_length(j);
    }
    a[m - 1][m] = Rational::one();
    let values = solve_exact(a).ok_or_else(|| Error::invalid("invariant density is not unique"))?;
    Ok(Some(StepDensity::from_cells(grid.edges().to_vec(), values)))
}

/// Gauss–Jordan elimination on an augmented `m × (m+1)` rational system.
fn solve_exact(mut a: Vec<Vec<Rational>>) -> Option<Vec<Rational>> {
    let m = a.len();
    for col in 0..m {
        let pivot = (col..m).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let inv = a[col][col].recip();
        for x in a[col].iter_mut() {
            *x *= &inv;
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r == col || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *x -= &factor * p;
            }
        }
    }
    Some(a.into_iter().map(|row| row[m].clone()).collect())
}

impl OpenSystem {
    pub fn build(map: &IntervalMap, hole: &Hole, grid: GridChoice, solver: SolverOptions) -> Result<Self> {
        let grid = match grid {
            GridChoice::Markov { cap } => markov_grid(map, hole, cap)?,
            GridChoice::Uniform { bins } => UlamGrid::uniform(bins)?,
            GridChoice::Auto { cap, bins } => match markov_grid(map, hole, cap) {
                Ok(g) => g,
                Err(Error::NotMarkov(_)) => UlamGrid::uniform(bins)?,
                Err(e) => return Err(e),
            },
        };
        let closed = assemble_ulam(map, &grid);
        Self::from_closed(map, hole, closed, solver)
    }

    /// Uses a prepared closed matrix; its grid should resolve the hole.
    pub fn from_closed(map: &IntervalMap, hole: &Hole, closed: TransferMatrix, solver: SolverOptions) -> Result<Self> {
        let phi0_exact = invariant_density_exact(map)?;
        let grid = closed.grid().clone();
        let phi0 = match (&phi0_exact, grid.is_markov()) {
            (Some(d), true) => cell_values(d, &grid),
            _ => leading_triple(&closed, solver.tol, solver.max_iter)?.phi,
        };
        let delta_exact = phi0_exact
            .as_ref()
            .map(|d| d.integral_over(hole.intervals()));
        let delta = match &delta_exact {
            Some(d) => to_f64(d),
            None => mu0_hole(&phi0, hole, &grid),
        };
        let open = closed.open(hole);
        let triple = leading_triple(if delta == 0.0 { &closed } else { &open }, solver.tol, solver.max_iter)?;
        Ok(Self {
            map: map.clone(),
            hole: hole.clone(),
            closed,
            open,
            phi0,
            phi0_exact,
            delta,
            delta_exact,
            triple,
        })
    }

    pub fn grid(&self) -> &UlamGrid {
        self.closed.grid()
    }

    pub fn lambda(&self) -> f64 {
        self.triple.lambda
    }

    /// Fraction of each bin covered by the hole.
    pub fn coverage(&self) -> Vec<f64> {
        coverage(self.hole(), self.grid())
    }

    pub fn hole(&self) -> &Hole {
        &self.hole
    }

    /// `η̂ = Δ · sup(1/φ₀ on A)`, a computable stand-in for `‖ν₀(P₀ − P_ε)‖`.
    pub fn eta_hat(&self) -> f64 {
        let cov = self.coverage();
        let inf_phi = self
            .phi0
            .iter()
            .zip(&cov)
            .filter(|(_, c)| **c > 0.0)
            .map(|(p, _)| *p)
            .fold(f64::INFINITY, f64::min);
        if self.delta == 0.0 {
            0.0
        } else {
            self.delta / inf_phi
        }
    }
}

fn markov_grid(map: &IntervalMap, hole: &Hole, cap: usize) -> Result<UlamGrid> {
    let extra: Vec<Rational> = hole.intervals().endpoints().cloned().collect();
    UlamGrid::markov(map, &extra, cap)
}

fn cell_values(d: &StepDensity, grid: &UlamGrid) -> Vec<f64> {
    grid.edges()
        .windows(2)
        .map(|w| to_f64(&d.eval(&((&w[0] + &w[1]) / Rational::from_integer(2.into())))))
        .collect()
}

/// `Leb(B_j ∩ A)/Leb(B_j)` for each bin.
pub fn coverage(hole: &Hole, grid: &UlamGrid) -> Vec<f64> {
    let e = grid.edges();
    (0..grid.bins())
        .map(|j| to_f64(&(hole.intervals().overlap(&e[j], &e[j + 1]) / grid.bin_length(j))))
        .collect()
}

/// `Δ = ∫_A φ₀ dν₀` with exact proration of partially covered bins.
pub fn mu0_hole(phi0: &[f64], hole: &Hole, grid: &UlamGrid) -> f64 {
    coverage(hole, grid)
        .iter()
        .zip(phi0)
        .zip(grid.lengths())
        .map(|((c, p), l)| c * p * l)
        .sum()
}

impl OpenSystem {
    pub fn has_exact(&self) -> bool {
        self.phi0_exact.is_some()
    }

    pub fn delta_is_zero(&self) -> bool {
        self.delta_exact.as_ref().map_or(self.delta == 0.0, |d| d.is_zero())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval::IntervalSet;
    use crate::real::rat;

    #[test]
    fn exact_densities() {
        let d = invariant_density_exact(&IntervalMap::doubling()).unwrap().unwrap();
        assert_eq!(d, StepDensity::uniform());
        let s = invariant_density_exact(&IntervalMap::skew_markov()).unwrap().unwrap();
        assert_eq!(s.values(), &[rat(9, 8), rat(3, 4)]);
    }

    #[test]
    fn hole_mass() {
        let d = IntervalMap::doubling();
        let eps = rat(1, 1024);
        let hole = Hole::around(&[rat(1, 3)], &eps).unwrap();
        let sys = OpenSystem::build(&d, &hole, GridChoice::Markov { cap: 1 << 12 }, SolverOptions::default()).unwrap();
        assert_eq!(sys.delta_exact, Some(rat(1, 512)));
        assert!((sys.delta - 1.0 / 512.0).abs() < 1e-18);

        let uniform = UlamGrid::uniform(7).unwrap();
        let phi = vec![1.0; 7];
        assert_eq!(mu0_hole(&phi, &Hole::empty(), &uniform), 0.0);
        let all = Hole::from_intervals(IntervalSet::unit());
        assert!((mu0_hole(&phi, &all, &uniform) - 1.0).abs() < 1e-15);
        let h = Hole::around(&[rat(1, 3)], &eps).unwrap();
        assert!((mu0_hole(&phi, &h, &uniform) - 1.0 / 512.0).abs() < 1e-17);
    }

    #[test]
    fn zero_mass_hole_keeps_lambda_one() {
        let d = IntervalMap::doubling();
        let sys = OpenSystem::build(&d, &Hole::empty(), GridChoice::Uniform { bins: 8 }, SolverOptions::default()).unwrap();
        assert!(sys.delta_is_zero());
        assert!((sys.lambda() - 1.0).abs() < 1e-14);
    }
}
